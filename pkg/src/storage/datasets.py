"""
Загрузка наборов данных из CSV и сборка входов модели
"""
import hashlib
import logging
from dataclasses import dataclass

import numpy as np
import pandas as pd

from ..models.spec import DesignMatrix, ModelSpec
from ..utils.errors import DataError, EmptyDataError
from ..utils.validators import validate_column_name, validate_columns

logger = logging.getLogger("bayescore")


@dataclass(frozen=True, eq=False)
class Dataset:
    """Прямоугольная таблица без пропусков."""

    frame: pd.DataFrame
    source: str = ""

    @property
    def columns(self) -> tuple:
        return tuple(self.frame.columns)

    @property
    def n_rows(self) -> int:
        return len(self.frame)

    def require(self, names) -> None:
        ok, message = validate_columns(self.columns, names)
        if not ok:
            raise DataError(message)

    def column(self, name: str) -> np.ndarray:
        """Числовой столбец."""
        self.require([name])
        values = pd.to_numeric(self.frame[name], errors="coerce")
        if values.isna().any():
            raise DataError(f"Столбец '{name}' содержит нечисловые значения")
        return values.to_numpy(dtype=float)

    def labels(self, name: str) -> list[str]:
        """Столбец меток группы (как строки)."""
        self.require([name])
        return [str(v) for v in self.frame[name].tolist()]

    def design(self, predictors) -> DesignMatrix:
        if not predictors:
            return DesignMatrix(np.ones((self.n_rows, 1)), ("intercept",))
        columns = np.column_stack([self.column(p) for p in predictors])
        return DesignMatrix.from_columns(columns, tuple(predictors))

    def fingerprint(self, name: str) -> str:
        """SHA-256 значений столбца; одинаков для одинаковых откликов."""
        self.require([name])
        hashed = pd.util.hash_pandas_object(self.frame[name].astype(str), index=False)
        return hashlib.sha256(hashed.to_numpy().tobytes()).hexdigest()


def load_dataset(path: str, drop_na: bool = False, label_columns=()) -> Dataset:
    """
    Читает CSV: разделитель ',', строка заголовка обязательна, UTF-8, десятичная точка

    Args:
        path: путь к файлу
        drop_na: удалять строки с пропусками вместо ошибки
        label_columns: столбцы, читаемые как строки (метки групп)

    Raises:
        DataError: файл не найден, не разбирается или содержит пропуски
        EmptyDataError: нет ни одной строки данных
    """
    try:
        frame = pd.read_csv(
            path,
            sep=",",
            header=0,
            encoding="utf-8",
            decimal=".",
            dtype={c: str for c in label_columns},
        )
    except FileNotFoundError:
        raise DataError(f"Файл данных не найден: {path}")
    except pd.errors.EmptyDataError:
        raise EmptyDataError(f"Файл данных пуст: {path}")
    except (pd.errors.ParserError, UnicodeDecodeError) as e:
        raise DataError(f"Не удалось разобрать {path}: {e}")

    for name in frame.columns:
        ok, message = validate_column_name(str(name))
        if not ok:
            raise DataError(message)
    if frame.columns.duplicated().any():
        raise DataError(f"Повторяющиеся имена столбцов в {path}")

    missing = frame.isna().any(axis=1)
    if missing.any():
        rows = (np.flatnonzero(missing.to_numpy()) + 2).tolist()
        if not drop_na:
            raise DataError(f"Пропуски в строках {rows[:10]} файла {path} (используйте --drop-na)")
        frame = frame.loc[~missing].reset_index(drop=True)
        logger.warning(f"Удалено {len(rows)} строк с пропусками из {path}")
    if frame.empty:
        raise EmptyDataError(f"В {path} нет строк данных")
    logger.info(f"Загружен набор {path}: {len(frame)} строк, {len(frame.columns)} столбцов")
    return Dataset(frame, str(path))


def label_columns(spec: ModelSpec) -> tuple:
    return (spec.group,) if spec.group is not None else ()


def model_inputs(ds: Dataset, spec: ModelSpec, with_response: bool = True) -> dict:
    """Аргументы compile / posterior_predictive из набора данных по описанию модели."""
    required = list(spec.predictors)
    if with_response:
        required.append(spec.response)
    for extra in (spec.group, spec.likelihood.trials, spec.likelihood.exposure):
        if extra is not None:
            required.append(extra)
    ds.require(required)
    inputs = {
        "X": ds.design(spec.predictors),
        "groups": ds.labels(spec.group) if spec.group is not None else None,
        "trials": ds.column(spec.likelihood.trials) if spec.likelihood.trials else None,
        "exposure": ds.column(spec.likelihood.exposure) if spec.likelihood.exposure else None,
    }
    if with_response:
        inputs["y"] = ds.column(spec.response)
    return inputs
