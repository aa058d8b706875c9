"""
Утилиты для валидации входных файлов и аргументов командной строки
"""
import math
import re

COLUMN_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_.]*$")
LOTTERY_TOL = 1e-9


def validate_column_name(name: str) -> tuple[bool, str]:
    """Имя столбца набора данных: латиница, цифры, '_' и '.', не с цифры."""
    if not name:
        return False, "Имя столбца не может быть пустым"
    if not COLUMN_RE.fullmatch(name):
        return False, f"Недопустимое имя столбца '{name}'"
    return True, ""


def validate_columns(available, required) -> tuple[bool, str]:
    """
    Проверяет, что в наборе данных есть все требуемые столбцы

    Returns:
        Кортеж (is_valid, error_message)
    """
    missing = [c for c in required if c not in set(available)]
    if missing:
        return False, f"В данных нет столбцов: {', '.join(missing)}"
    return True, ""


def validate_seed(seed) -> tuple[bool, str]:
    if seed is None:
        return True, ""
    try:
        value = int(seed)
    except (TypeError, ValueError):
        return False, f"Зерно должно быть целым числом, получено '{seed}'"
    if value < 0:
        return False, "Зерно должно быть неотрицательным"
    return True, ""


def validate_lottery(probs, n_outcomes: int | None = None) -> tuple[bool, str]:
    """
    Проверяет лотерею: конечные неотрицательные вероятности с суммой 1

    Args:
        probs: список вероятностей
        n_outcomes: ожидаемое число исходов (если известно)
    """
    if not isinstance(probs, (list, tuple)) or not probs:
        return False, "Лотерея должна быть непустым списком вероятностей"
    try:
        values = [float(p) for p in probs]
    except (TypeError, ValueError):
        return False, "Вероятности лотереи должны быть числами"
    if n_outcomes is not None and len(values) != n_outcomes:
        return False, f"Лотерея задана на {len(values)} исходах, а исходов {n_outcomes}"
    if any(not math.isfinite(p) or p < 0 for p in values):
        return False, "Вероятности лотереи должны быть неотрицательными"
    total = math.fsum(values)
    if abs(total - 1.0) > LOTTERY_TOL:
        return False, f"Вероятности лотереи в сумме дают {total:g}, а не 1"
    return True, ""


def validate_decision_file(obj) -> tuple[bool, str]:
    """Структура файла задачи решения до построения DecisionMatrix."""
    if not isinstance(obj, dict):
        return False, "Файл задачи должен содержать JSON-объект"
    for key in ("states", "prior", "outcomes", "utilities", "acts"):
        if key not in obj:
            return False, f"В файле задачи нет поля '{key}'"
    states, outcomes, acts = obj["states"], obj["outcomes"], obj["acts"]
    if not isinstance(states, list) or not states:
        return False, "states должен быть непустым списком"
    if not isinstance(outcomes, list) or not outcomes:
        return False, "outcomes должен быть непустым списком"
    if not isinstance(obj["utilities"], list) or len(obj["utilities"]) != len(outcomes):
        return False, "utilities должен задавать полезность каждого исхода"
    ok, message = validate_lottery(obj["prior"], len(states))
    if not ok:
        return False, f"prior: {message}"
    if not isinstance(acts, dict) or not acts:
        return False, "acts должен быть непустым объектом имя -> лотереи"
    for name, row in acts.items():
        if not isinstance(row, list) or len(row) != len(states):
            return False, f"Действие '{name}': нужна лотерея для каждого из {len(states)} состояний"
        for state, lottery in zip(states, row):
            ok, message = validate_lottery(lottery, len(outcomes))
            if not ok:
                return False, f"Действие '{name}', состояние '{state}': {message}"
    return True, ""


def validate_log_likelihoods(values, n_states: int) -> tuple[bool, str]:
    """Вектор логарифмов правдоподобия состояний для --update."""
    if len(values) != n_states:
        return False, f"Нужно {n_states} значений логарифма правдоподобия, получено {len(values)}"
    if any(math.isnan(v) or v == math.inf for v in values):
        return False, "Логарифм правдоподобия не может быть NaN или +inf"
    if all(v == -math.inf for v in values):
        return False, "Все состояния имеют нулевое правдоподобие"
    return True, ""
