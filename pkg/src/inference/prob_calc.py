"""
Дискретное исчисление вероятностей: таблицы сопряжённости, маргинализация,
теорема Байеса для двух и k высказываний, сеточные апостериорные
"""
import logging
import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
from scipy.special import logsumexp

from ..distributions.families import Distribution
from ..utils.errors import ConsistencyError, DegenerateError, DimensionError, DomainError, ParameterError

logger = logging.getLogger("bayescore")

NORMALIZATION_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class DiscretePrior:
    """Дискретное распределение над упорядоченным носителем."""

    support: tuple
    probs: np.ndarray

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=float)
        object.__setattr__(self, "support", tuple(self.support))
        object.__setattr__(self, "probs", probs)
        if probs.ndim != 1 or probs.size != len(self.support):
            raise DimensionError(
                f"длина вероятностей {probs.size} не совпадает с носителем {len(self.support)}"
            )
        if np.any(~np.isfinite(probs)) or np.any(probs < 0):
            raise ParameterError("вероятности должны быть конечными и неотрицательными")
        if abs(math.fsum(probs) - 1.0) > NORMALIZATION_TOL:
            raise ParameterError(f"вероятности в сумме дают {math.fsum(probs)!r}, а не 1")

    @classmethod
    def uniform(cls, support: Sequence) -> "DiscretePrior":
        k = len(support)
        return cls(tuple(support), np.full(k, 1.0 / k))

    def __len__(self):
        return len(self.support)

    def prob(self, label) -> float:
        return float(self.probs[self.support.index(label)])


@dataclass(frozen=True, eq=False)
class JointTable:
    """Таблица сопряжённости r x c совместных вероятностей."""

    labels_row: tuple
    labels_col: tuple
    cells: np.ndarray

    def __post_init__(self):
        cells = np.asarray(self.cells, dtype=float)
        object.__setattr__(self, "labels_row", tuple(self.labels_row))
        object.__setattr__(self, "labels_col", tuple(self.labels_col))
        object.__setattr__(self, "cells", cells)
        if cells.shape != (len(self.labels_row), len(self.labels_col)):
            raise DimensionError(f"размер таблицы {cells.shape} не совпадает с метками")
        if np.any(~np.isfinite(cells)) or np.any(cells < 0):
            raise ParameterError("ячейки таблицы должны быть неотрицательными")
        if abs(math.fsum(cells.ravel()) - 1.0) > NORMALIZATION_TOL:
            raise ParameterError("сумма ячеек таблицы должна равняться 1")


class Marginals(NamedTuple):
    row_marginal: DiscretePrior
    col_marginal: DiscretePrior


def _normalized(probs: np.ndarray) -> np.ndarray:
    total = probs.sum()
    return probs / total if total > 0 else probs


def marginalize(t: JointTable) -> Marginals:
    """Правило маргинализации: суммы по строкам и по столбцам."""
    row = _normalized(t.cells.sum(axis=1))
    col = _normalized(t.cells.sum(axis=0))
    return Marginals(DiscretePrior(t.labels_row, row), DiscretePrior(t.labels_col, col))


def conditional(t: JointTable, given_axis: str, index: int) -> DiscretePrior:
    """Правило произведения: P(A|B) = P(AB)/P(B).

    Args:
        t: таблица совместных вероятностей
        given_axis: "row" (условие на строку) или "col" (условие на столбец)
        index: номер условия

    Returns:
        условное распределение по другой оси
    """
    if given_axis == "row":
        slice_, labels = t.cells[index, :], t.labels_col
    elif given_axis == "col":
        slice_, labels = t.cells[:, index], t.labels_row
    else:
        raise ParameterError(f"given_axis должно быть 'row' или 'col', получено {given_axis!r}")
    total = slice_.sum()
    if total <= 0:
        raise DegenerateError("условие имеет нулевую вероятность")
    return DiscretePrior(labels, slice_ / total)


def bayes_two_prop(prior_A: float, tpr: float, fpr: float) -> float:
    """P(A|B) по доле истинно и ложно положительных исходов."""
    for name, value in (("prior_A", prior_A), ("tpr", tpr), ("fpr", fpr)):
        if not 0.0 <= value <= 1.0:
            raise DomainError(f"{name}={value} вне [0, 1]")
    numerator = tpr * prior_A
    evidence = numerator + fpr * (1.0 - prior_A)
    if evidence == 0.0:
        raise DegenerateError("свидетельство невозможно при обеих гипотезах")
    return numerator / evidence


def bayes_grid(prior: DiscretePrior, log_likelihood: Sequence[float]) -> DiscretePrior:
    """Апостериорное на сетке, нормировка через log-sum-exp.

    Точки с нулевой априорной массой остаются нулевыми при любом правдоподобии.
    """
    loglik = np.asarray(log_likelihood, dtype=float)
    if loglik.shape != prior.probs.shape:
        raise DimensionError(f"длина правдоподобия {loglik.size} не совпадает с носителем {len(prior)}")
    if np.any(np.isnan(loglik)):
        raise DomainError("логарифм правдоподобия содержит NaN")
    positive = prior.probs > 0
    log_post = np.full(loglik.shape, -np.inf)
    with np.errstate(divide="ignore"):
        log_post[positive] = loglik[positive] + np.log(prior.probs[positive])
    if not np.any(np.isfinite(log_post)):
        raise DegenerateError("вся апостериорная масса равна нулю")
    if np.any(log_post == np.inf):
        # бесконечное правдоподобие: масса делится поровну между такими точками
        post = (log_post == np.inf).astype(float)
    else:
        post = np.exp(log_post - logsumexp(log_post))
    return DiscretePrior(prior.support, post / post.sum())


def generalized_sum(pA: float, pB: float, pAB: float) -> float:
    """Обобщённое правило сложения P(A+B) = P(A) + P(B) - P(AB)."""
    for name, value in (("pA", pA), ("pB", pB), ("pAB", pAB)):
        if not 0.0 <= value <= 1.0:
            raise ConsistencyError(f"{name}={value} вне [0, 1]")
    if pAB > min(pA, pB):
        raise ConsistencyError(f"P(AB)={pAB} больше min(P(A), P(B))")
    result = pA + pB - pAB
    if result > 1.0 + NORMALIZATION_TOL:
        raise ConsistencyError(f"P(A+B)={result} больше 1")
    return min(result, 1.0)


def discretize(d: Distribution, grid: Sequence[float]) -> DiscretePrior:
    """Дискретизация плотности на сетке (масса в точке пропорциональна плотности)."""
    points = np.asarray(grid, dtype=float)
    inside = d.in_support(points)
    logp = np.full(points.shape, -np.inf)
    if np.any(inside):
        logp[inside] = d.log_density(points[inside])
    if not np.any(np.isfinite(logp)):
        raise DegenerateError("сетка не пересекает носитель распределения")
    probs = np.exp(logp - logsumexp(logp))
    return DiscretePrior(tuple(points.tolist()), probs / probs.sum())
