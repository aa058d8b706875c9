"""
Сравнение моделей: энтропия и максимальная энтропия, KL, факторы Байеса,
шкала Джеффриса, DIC и WAIC
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Sequence

import numpy as np
from scipy import integrate
from scipy.special import betaln, gammaln, logsumexp, rel_entr, xlogy

from ..config import settings
from ..distributions.families import Distribution
from ..mcmc.targets import ChainSet, LogTarget
from ..utils.errors import (
    DimensionError,
    InfeasibleError,
    ParameterError,
    SupportError,
    ToleranceError,
)
from .prob_calc import DiscretePrior

logger = logging.getLogger("bayescore")


# ---------------------------------------------------------------------------
# Энтропия и максимальная энтропия
# ---------------------------------------------------------------------------

def shannon_entropy(p: DiscretePrior, measure: Sequence[float] | None = None) -> float:
    """S = -sum p_i ln(p_i/m_i); нулевые p_i не дают вклада."""
    probs = p.probs
    m = np.ones_like(probs) if measure is None else np.asarray(measure, dtype=float)
    if m.shape != probs.shape:
        raise DimensionError("длина меры не совпадает с носителем")
    if np.any(m <= 0.0):
        raise ParameterError("веса меры должны быть положительными")
    return float(-np.sum(xlogy(probs, probs)) + np.sum(xlogy(probs, m)))


@dataclass(frozen=True)
class MomentConstraint:
    fn: Callable[[np.ndarray], np.ndarray]
    target: float
    name: str = ""


def mean_constraint(target: float) -> MomentConstraint:
    return MomentConstraint(lambda x: x, float(target), "mean")


def variance_constraint(target: float, mean: float = 0.0) -> MomentConstraint:
    return MomentConstraint(lambda x: (x - mean) ** 2, float(target), "variance")


@dataclass(frozen=True, eq=False)
class MaxEntProblem:
    support: tuple
    constraints: tuple = ()
    measure: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "support", tuple(self.support))
        object.__setattr__(self, "constraints", tuple(self.constraints))
        if not self.support:
            raise ParameterError("пустой носитель")
        if self.measure is not None:
            m = np.asarray(self.measure, dtype=float)
            if m.shape != (len(self.support),) or np.any(m <= 0.0):
                raise ParameterError("веса меры должны быть положительными, по одному на точку")
            object.__setattr__(self, "measure", m)

    def weights(self) -> np.ndarray:
        return np.ones(len(self.support)) if self.measure is None else self.measure

    def moment_matrix(self) -> np.ndarray:
        """Матрица (точки x ограничения) значений C_l(x_j) - c_l."""
        x = np.asarray(self.support, dtype=float)
        if not self.constraints:
            return np.zeros((x.size, 0))
        return np.column_stack([np.asarray(c.fn(x), dtype=float) - c.target for c in self.constraints])


def _dual(log_m: np.ndarray, moments: np.ndarray, lam: np.ndarray):
    logits = log_m - moments @ lam
    log_z = logsumexp(logits)
    p = np.exp(logits - log_z)
    return log_z, p


def maxent_solve(prob: MaxEntProblem, tol: float | None = None, max_iter: int | None = None) -> DiscretePrior:
    """Распределение максимальной энтропии p_j = m_j exp(-sum lambda_l C_l(x_j)) / Z.

    Ньютон по двойственной функции log Z(lambda) с дроблением шага, старт с lambda = 0.

    Raises:
        InfeasibleError: цель ограничения вне диапазона C на носителе или расходимость
        ToleranceError: точность не достигнута за max_iter итераций
    """
    cfg = settings.get_section("evidence")
    tol = cfg["maxent_tol"] if tol is None else tol
    max_iter = cfg["maxent_max_iter"] if max_iter is None else max_iter
    moments = prob.moment_matrix()
    log_m = np.log(prob.weights())
    for j, c in enumerate(prob.constraints):
        col = moments[:, j]
        if col.min() > 0.0 or col.max() < 0.0:
            raise InfeasibleError(f"ограничение '{c.name or j}': цель {c.target} вне диапазона на носителе")

    lam = np.zeros(moments.shape[1])
    log_z, p = _dual(log_m, moments, lam)
    for it in range(max_iter + 1):
        residual = p @ moments
        if moments.shape[1] == 0 or np.max(np.abs(residual)) < tol:
            logger.debug(f"MaxEnt сошёлся за {it} итераций")
            return DiscretePrior(prob.support, p / p.sum())
        centered = moments - residual
        hessian = (centered * p[:, None]).T @ centered
        step = np.linalg.lstsq(hessian, residual, rcond=None)[0]
        # градиент log Z по lambda равен -residual
        t = 1.0
        while t > 1e-12:
            candidate = lam + t * step
            new_log_z, new_p = _dual(log_m, moments, candidate)
            if np.isfinite(new_log_z) and new_log_z <= log_z - 1e-4 * t * float(residual @ step):
                break
            t *= 0.5
        else:
            raise InfeasibleError("шаг Ньютона не уменьшает двойственную функцию")
        lam, log_z, p = candidate, new_log_z, new_p
        logger.debug(f"MaxEnt итерация {it + 1}: |невязка|={np.max(np.abs(residual)):.3e}, шаг {t:g}")
        if not np.all(np.isfinite(lam)) or np.max(np.abs(lam)) > 1e8:
            raise InfeasibleError("множители Лагранжа расходятся")
    raise ToleranceError(f"MaxEnt не достиг точности {tol} за {max_iter} итераций")


def kl_divergence(p: DiscretePrior, q: DiscretePrior) -> float:
    """Направленное расхождение D(p, q) = sum p_i ln(p_i/q_i).

    Raises:
        SupportError: q_i = 0 там, где p_i > 0
    """
    if p.support != q.support:
        raise DimensionError("носители распределений не совпадают")
    if np.any((q.probs == 0.0) & (p.probs > 0.0)):
        raise SupportError("q обращается в ноль там, где p положительно")
    return float(np.sum(rel_entr(p.probs, q.probs)))


def deviance(log_liks: Sequence[float]) -> float:
    return -2.0 * math.fsum(np.asarray(log_liks, dtype=float).ravel())


# ---------------------------------------------------------------------------
# Факторы Байеса
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ModelEvidence:
    log_average_likelihood: float
    method: str = "closed_form"


def bayes_factor(evidence_i: ModelEvidence, evidence_j: ModelEvidence) -> float:
    return math.exp(evidence_i.log_average_likelihood - evidence_j.log_average_likelihood)


def posterior_odds(factor: float, prior_odds: float = 1.0) -> float:
    if factor < 0.0 or prior_odds < 0.0:
        raise ParameterError("фактор Байеса и априорные шансы должны быть неотрицательны")
    return factor * prior_odds


def _check_counts(y: int, n: int):
    if not (0 <= y <= n):
        raise ParameterError(f"требуется 0 <= y <= n, получено y={y}, n={n}")


def evidence_beta_binomial(alpha: float, beta: float, y: int, n: int, combinatorial: bool = False) -> ModelEvidence:
    """Среднее правдоподобие последовательности с y успехами из n при Beta{alpha, beta}.

    combinatorial=True добавляет биномиальный коэффициент (вероятность числа успехов).
    """
    if not (alpha > 0.0 and beta > 0.0):
        raise ParameterError("параметры Beta должны быть > 0")
    _check_counts(y, n)
    log_ev = betaln(alpha + y, beta + n - y) - betaln(alpha, beta)
    if combinatorial:
        log_ev += gammaln(n + 1.0) - gammaln(y + 1.0) - gammaln(n - y + 1.0)
    return ModelEvidence(float(log_ev))


def evidence_gamma_poisson(alpha: float, beta: float, data: Sequence[int]) -> ModelEvidence:
    """Среднее правдоподобие пуассоновских отсчётов при Gamma{alpha, beta} (интенсивность)."""
    if not (alpha > 0.0 and beta > 0.0):
        raise ParameterError("параметры Gamma должны быть > 0")
    y = np.asarray(data, dtype=float)
    if np.any(y < 0) or np.any(y != np.round(y)):
        raise ParameterError("отсчёты должны быть неотрицательными целыми")
    total, n = float(y.sum()), y.size
    log_ev = (
        alpha * math.log(beta) - gammaln(alpha)
        + gammaln(alpha + total) - (alpha + total) * math.log(beta + n)
        - float(np.sum(gammaln(y + 1.0)))
    )
    return ModelEvidence(float(log_ev))


def bayes_factor_beta_binomial(prior1: tuple, prior2: tuple, y: int, n: int) -> float:
    """B12 = [B(a1+y, b1+n-y)/B(a2+y, b2+n-y)] * [B(a2, b2)/B(a1, b1)]."""
    e1 = evidence_beta_binomial(prior1[0], prior1[1], y, n)
    e2 = evidence_beta_binomial(prior2[0], prior2[1], y, n)
    return bayes_factor(e1, e2)


class EvidenceBand(str, Enum):
    SUPPORTED = "supported"
    WEAK = "weak-against"
    SUBSTANTIAL = "substantial-against"
    STRONG = "strong-against"
    VERY_STRONG = "very-strong-against"
    DECISIVE = "decisive-against"


# нижние границы полос (не включая), от слабой к сильной
JEFFREYS_BANDS = (
    (1.0, EvidenceBand.SUPPORTED),
    (10.0 ** -0.5, EvidenceBand.WEAK),
    (10.0 ** -1.0, EvidenceBand.SUBSTANTIAL),
    (10.0 ** -1.5, EvidenceBand.STRONG),
    (10.0 ** -2.0, EvidenceBand.VERY_STRONG),
)


def jeffreys_classify(b12: float) -> EvidenceBand:
    """Полоса шкалы Джеффриса; граничные значения относятся к более сильной полосе."""
    if not b12 > 0.0:
        raise ParameterError(f"фактор Байеса должен быть > 0, получено {b12}")
    for lower, band in JEFFREYS_BANDS:
        if b12 > lower:
            return band
    return EvidenceBand.DECISIVE


# ---------------------------------------------------------------------------
# Квадратура
# ---------------------------------------------------------------------------

def _coarse_grid(prior: Distribution, size: int, tail: float) -> np.ndarray:
    levels = np.linspace(tail, 1.0 - tail, size)
    return np.unique([prior.quantile(q) for q in levels])


def _log_integrand(log_likelihood, priors):
    def value(*theta):
        lp = 0.0
        for d, t in zip(priors, theta):
            if not bool(d.in_support(t)):
                return -math.inf
            lp += float(d.log_density(t))
        ll = float(log_likelihood(theta[0] if len(theta) == 1 else np.asarray(theta)))
        return ll + lp if not math.isnan(ll) else -math.inf

    return value


def evidence_quadrature(
    log_likelihood: Callable,
    prior: Distribution | Sequence[Distribution],
    grid: int | None = None,
) -> ModelEvidence:
    """log среднего правдоподобия численным интегрированием по 1 или 2 параметрам.

    Для двух параметров prior задаётся списком независимых одномерных распределений,
    а log_likelihood принимает вектор из двух значений.

    Raises:
        DimensionError: больше двух параметров
    """
    priors = [prior] if isinstance(prior, Distribution) else list(prior)
    if not 1 <= len(priors) <= 2:
        raise DimensionError(f"квадратура поддерживает 1 или 2 параметра, получено {len(priors)}")
    if any(d.multivariate for d in priors):
        raise DimensionError("квадратура требует одномерных априорных")
    grid = grid or settings.get_section("evidence")["quadrature_grid"]
    log_f = _log_integrand(log_likelihood, priors)

    if len(priors) == 1:
        d = priors[0]
        if d.discrete:
            # дискретное априорное: прямое суммирование по носителю
            support = np.arange(d.quantile(1e-12), d.quantile(1.0 - 1e-12) + 1)
            return ModelEvidence(float(logsumexp([log_f(t) for t in support])), "quadrature")
        points = _coarse_grid(d, grid, 1e-12)
        values = np.array([log_f(t) for t in points])
        shift = float(np.max(values))
        if not math.isfinite(shift):
            raise ParameterError("правдоподобие равно нулю на всей сетке априорного")
        peak = float(points[int(np.argmax(values))])
        lower, upper = d.support_bounds()
        total = 0.0
        for a, b in ((lower, peak), (peak, upper)):
            if a < b:
                total += integrate.quad(
                    lambda t: math.exp(log_f(t) - shift), a, b, epsabs=0.0, epsrel=1e-11, limit=400
                )[0]
        return ModelEvidence(shift + math.log(total), "quadrature")

    side = max(11, int(math.sqrt(grid)))
    axes = [_coarse_grid(d, side, 1e-10) for d in priors]
    values = np.array([[log_f(a, b) for b in axes[1]] for a in axes[0]])
    shift = float(np.max(values))
    if not math.isfinite(shift):
        raise ParameterError("правдоподобие равно нулю на всей сетке априорного")
    (a_lo, a_hi), (b_lo, b_hi) = [(float(ax[0]), float(ax[-1])) for ax in axes]
    total = integrate.dblquad(
        lambda b, a: math.exp(log_f(a, b) - shift), a_lo, a_hi, b_lo, b_hi, epsabs=0.0, epsrel=1e-10
    )[0]
    return ModelEvidence(shift + math.log(total), "quadrature")


# ---------------------------------------------------------------------------
# Информационные критерии
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class PointwiseLogLik:
    """Матрица (выборка x наблюдение) логарифмов правдоподобия одного наблюдения."""

    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2:
            raise DimensionError("ожидается матрица выборки x наблюдения")
        object.__setattr__(self, "values", values)

    @property
    def n_draws(self) -> int:
        return self.values.shape[0]

    @property
    def n_obs(self) -> int:
        return self.values.shape[1]


def pointwise_log_lik(chains: ChainSet, target: LogTarget) -> PointwiseLogLik:
    if target.pointwise_log_lik is None:
        raise ParameterError("цель не предоставляет поточечное правдоподобие")
    if tuple(chains.free_names) != tuple(target.param_names):
        raise DimensionError("параметры цепочек не совпадают с целью")
    draws = chains.free_draws()
    workers = max(1, min(int(settings.THREADS), len(draws)))
    with ThreadPoolExecutor(max_workers=workers) as pool:
        rows = list(pool.map(target.pointwise_log_lik, draws, chunksize=max(1, len(draws) // (4 * workers))))
    return PointwiseLogLik(np.vstack(rows))


@dataclass
class DicResult:
    dic: float
    p_dic: float
    mean_deviance: float
    deviance_at_mean: float

    def to_dict(self) -> dict:
        return {"dic": self.dic, "p_dic": self.p_dic, "mean_deviance": self.mean_deviance,
                "deviance_at_mean": self.deviance_at_mean}


def dic(chains: ChainSet, target: LogTarget) -> DicResult:
    """DIC = D_mean + p_DIC, p_DIC = D_mean - D(theta_mean); theta_mean берётся на шкале сэмплирования."""
    loglik = target.log_likelihood
    if loglik is None:
        raise ParameterError("цель не предоставляет правдоподобие")
    draws = chains.free_draws()
    if len(draws) < 100:
        logger.warning(f"DIC по {len(draws)} выборкам (< 100) ненадёжен")
    mean_dev = float(np.mean([-2.0 * loglik(theta) for theta in draws]))
    dev_at_mean = -2.0 * float(loglik(draws.mean(axis=0)))
    p_dic = mean_dev - dev_at_mean
    return DicResult(mean_dev + p_dic, p_dic, mean_dev, dev_at_mean)


@dataclass
class WaicResult:
    waic: float
    lppd: float
    p_waic: float
    se: float
    pointwise: np.ndarray = field(repr=False)

    def to_dict(self, with_pointwise: bool = False) -> dict:
        out = {"waic": self.waic, "lppd": self.lppd, "p_waic": self.p_waic, "se": self.se}
        if with_pointwise:
            out["pointwise"] = self.pointwise.tolist()
        return out


def waic(pointwise: PointwiseLogLik) -> WaicResult:
    """lppd через log-sum-exp с весом 1/S; p_WAIC = 2 sum (lppd_i - mean_i); WAIC = -2 lppd + 2 p_WAIC."""
    values = pointwise.values
    s = values.shape[0]
    if s < 100:
        logger.warning(f"WAIC по {s} выборкам (< 100) ненадёжен")
    lppd_i = logsumexp(values, axis=0, b=1.0 / s)
    p_i = 2.0 * (lppd_i - values.mean(axis=0))
    waic_i = -2.0 * lppd_i + 2.0 * p_i
    n = values.shape[1]
    se = float(math.sqrt(n * np.var(waic_i))) if n > 1 else 0.0
    return WaicResult(
        waic=float(waic_i.sum()),
        lppd=float(lppd_i.sum()),
        p_waic=float(p_i.sum()),
        se=se,
        pointwise=waic_i,
    )


@dataclass
class ModelComparison:
    name: str
    waic: WaicResult
    dic: DicResult | None
    delta_waic: float = 0.0
    weight: float = 1.0

    def to_dict(self) -> dict:
        out = {"model": self.name, **self.waic.to_dict()}
        if self.dic is not None:
            out.update({"dic": self.dic.dic, "p_dic": self.dic.p_dic})
        out.update({"delta_waic": self.delta_waic, "weight": self.weight})
        return out


def compare_models(results: dict) -> list[ModelComparison]:
    """Ранжирование по WAIC с весами exp(-dWAIC/2), нормированными к 1.

    Args:
        results: имя модели -> (WaicResult, DicResult | None)
    """
    if not results:
        raise ParameterError("нет моделей для сравнения")
    sizes = {name: w.pointwise.size for name, (w, _) in results.items()}
    if len(set(sizes.values())) != 1:
        raise DimensionError(f"модели обучены на разном числе наблюдений: {sizes}")
    rows = sorted(
        (ModelComparison(name, w, d) for name, (w, d) in results.items()),
        key=lambda r: r.waic.waic,
    )
    best = rows[0].waic.waic
    for row in rows:
        row.delta_waic = row.waic.waic - best
    raw = np.exp(-0.5 * np.array([r.delta_waic for r in rows]))
    for row, w in zip(rows, raw / raw.sum()):
        row.weight = float(w)
    return rows
