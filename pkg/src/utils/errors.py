"""
Иерархия исключений bayescore.

user_error=True означает ошибку входных данных пользователя (код выхода 2),
остальные ошибки считаются ошибками выполнения (код выхода 3).
"""


class BayesError(Exception):
    """Базовое исключение пакета."""

    user_error = False


class ParameterError(BayesError, ValueError):
    """Недопустимые параметры распределения или конфигурации."""

    user_error = True


class DomainError(BayesError, ValueError):
    """Аргумент вне области определения (носителя)."""

    user_error = True


class DegenerateError(BayesError, ArithmeticError):
    """Вырожденный результат: нулевая дисперсия, нулевая масса и т.п."""


class ConsistencyError(BayesError, ValueError):
    """Несогласованные вероятности."""

    user_error = True


class EmptyDataError(BayesError, ValueError):
    """Пустая выборка."""

    user_error = True


class ImproperPosteriorError(BayesError, ValueError):
    """Апостериорное распределение не нормируемо."""

    user_error = True


class InitError(BayesError, RuntimeError):
    """Не найдена стартовая точка с конечной плотностью."""


class MissingConditionalError(BayesError, ValueError):
    """У цели нет полных условных распределений для Гиббса."""

    user_error = True


class SpecError(BayesError, ValueError):
    """Ошибка в описании модели (поле указывается в сообщении)."""

    user_error = True

    def __init__(self, message: str, field: str | None = None):
        super().__init__(message)
        self.field = field


class ZeroVarianceError(BayesError, ValueError):
    """Столбец с нулевой дисперсией при стандартизации."""

    user_error = True

    def __init__(self, column: str):
        super().__init__(f"нулевая дисперсия в столбце '{column}'")
        self.column = column


class MetaMismatchError(BayesError, ValueError):
    """Метаданные стандартизации не соответствуют параметрам."""

    user_error = True


class DimensionError(BayesError, ValueError):
    """Несогласованные размерности."""

    user_error = True


class ImproperPriorError(BayesError, ValueError):
    """Несобственное априорное распределение там, где нужно собственное."""

    user_error = True


class InfeasibleError(BayesError, ArithmeticError):
    """Ограничения задачи максимальной энтропии несовместны."""


class ToleranceError(BayesError, ArithmeticError):
    """Итерационный метод не достиг точности за отведённое число шагов."""


class SupportError(BayesError, ValueError):
    """Нарушена абсолютная непрерывность (q = 0 там, где p > 0)."""

    user_error = True


class UnknownActError(BayesError, KeyError):
    """Действие отсутствует в матрице решений."""

    user_error = True


class DataError(BayesError, ValueError):
    """Ошибка в наборе данных (пропуски, типы, столбцы)."""

    user_error = True
