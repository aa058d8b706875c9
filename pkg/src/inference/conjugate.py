"""
Точные сопряжённые апостериорные распределения и достаточные статистики
"""
import logging
import math
import numbers
from dataclasses import dataclass
from fractions import Fraction
from typing import NamedTuple, Sequence

import numpy as np
from scipy import stats

from ..distributions.families import Beta, Gamma, Gauss, InverseGamma, NegativeBinomial, NoncentralT
from ..mcmc.targets import LogTarget
from ..utils.errors import DomainError, EmptyDataError, ImproperPosteriorError, ParameterError
from .prob_calc import DiscretePrior

logger = logging.getLogger("bayescore")


@dataclass(frozen=True)
class SufficientStats:
    """Достаточные статистики выборки: n, сумма, среднее, полная сумма квадратов отклонений.

    n хранится точным целым, сумма и TSS считаются компенсированным суммированием
    (math.fsum) и округляются один раз; для целочисленных данных сумма точна, пока
    не превышает 2^53. Гиперпараметры обновляются через _exact_sum.
    """

    n: int
    sum_y: float
    mean_y: float
    tss: float
    min_y: float = math.inf
    max_y: float = -math.inf
    integer_valued: bool = True

    @classmethod
    def empty(cls) -> "SufficientStats":
        return cls(n=0, sum_y=0.0, mean_y=0.0, tss=0.0)

    def sum_sq_dev_from(self, mu0: float) -> float:
        """Сумма (y_i - mu0)^2 через TSS и сдвиг среднего."""
        return self.tss + self.n * (self.mean_y - mu0) ** 2


def sufficient_stats(data: Sequence[float]) -> SufficientStats:
    """Двухпроходный подсчёт статистик с компенсированным суммированием."""
    y = np.asarray(data, dtype=float).ravel()
    if y.size == 0:
        raise EmptyDataError("выборка пуста")
    if not np.all(np.isfinite(y)):
        raise DomainError("выборка содержит нечисловые значения")
    n = int(y.size)
    total = math.fsum(y)
    mean = total / n
    tss = math.fsum((y - mean) ** 2)
    return SufficientStats(
        n=n,
        sum_y=total,
        mean_y=mean,
        tss=tss,
        min_y=float(y.min()),
        max_y=float(y.max()),
        integer_valued=bool(np.all(np.mod(y, 1.0) == 0.0)),
    )


def combine(a: SufficientStats, b: SufficientStats) -> SufficientStats:
    """Статистики объединения двух выборок (параллельная формула для TSS)."""
    if a.n == 0:
        return b
    if b.n == 0:
        return a
    n = a.n + b.n
    total = math.fsum([a.sum_y, b.sum_y])
    delta = b.mean_y - a.mean_y
    tss = a.tss + b.tss + delta ** 2 * a.n * b.n / n
    return SufficientStats(
        n=n,
        sum_y=total,
        mean_y=total / n,
        tss=tss,
        min_y=min(a.min_y, b.min_y),
        max_y=max(a.max_y, b.max_y),
        integer_valued=a.integer_valued and b.integer_valued,
    )


def _as_stats(data) -> SufficientStats:
    return data if isinstance(data, SufficientStats) else sufficient_stats(data)


def _positive(**values):
    for name, value in values.items():
        if not value > 0:
            raise ParameterError(f"{name}={value} должно быть > 0")


def _exact_sum(*terms) -> float:
    """Сумма в рациональной арифметике с одним округлением в конце.

    При счётчиках порядка 10^6 и выше сложение во float теряет младшие
    разряды гиперпараметра; здесь результат равен точной сумме, округлённой один раз.
    """
    total = Fraction(0)
    for t in terms:
        total += Fraction(int(t)) if isinstance(t, numbers.Integral) else Fraction(t)
    return float(total)


# ---------------------------------------------------------------------------
# Однопараметрические модели
# ---------------------------------------------------------------------------

def beta_binomial_update(alpha: float, beta: float, y: int, n: int) -> Beta:
    _positive(alpha=alpha, beta=beta)
    if not 0 <= y <= n:
        raise DomainError(f"требуется 0 <= y <= n, получено y={y}, n={n}")
    return Beta(_exact_sum(alpha, y), _exact_sum(beta, n, -y))


def beta_binomial_posterior_variance(alpha: float, beta: float, y: int, n: int) -> float:
    """Апостериорная дисперсия в сопряжённой форме; при alpha=beta=1 это равномерный случай."""
    a, b = _exact_sum(alpha, y), _exact_sum(beta, n, -y)
    s = a + b
    return a * b / (s ** 2 * (s + 1.0))


def rule_of_succession(y: int, n: int) -> Fraction:
    """Правило следования Лапласа (y+1)/(n+2), точная рациональная дробь."""
    if not 0 <= y <= n:
        raise DomainError(f"требуется 0 <= y <= n, получено y={y}, n={n}")
    return Fraction(int(y) + 1, int(n) + 2)


def prior_predictive_binomial_uniform(n: int) -> DiscretePrior:
    if n < 0:
        raise DomainError(f"n={n} должно быть >= 0")
    return DiscretePrior(tuple(range(n + 1)), np.full(n + 1, 1.0 / (n + 1)))


def beta_binomial_predictive(alpha: float, beta: float, m: int) -> DiscretePrior:
    """Предсказательное число успехов в m новых испытаниях при Beta(alpha, beta)."""
    _positive(alpha=alpha, beta=beta)
    if m < 0:
        raise DomainError(f"m={m} должно быть >= 0")
    probs = stats.betabinom(m, alpha, beta).pmf(np.arange(m + 1))
    return DiscretePrior(tuple(range(m + 1)), probs / probs.sum())


def gamma_poisson_update(alpha: float, beta: float, stats_: SufficientStats) -> Gamma:
    _positive(alpha=alpha, beta=beta)
    if stats_.n > 0 and (stats_.min_y < 0 or not stats_.integer_valued):
        raise DomainError("данные Пуассона должны быть неотрицательными целыми")
    return Gamma(_exact_sum(alpha, stats_.sum_y), _exact_sum(beta, stats_.n))


def gamma_poisson_predictive(alpha: float, beta: float) -> NegativeBinomial:
    """Предсказательное число событий при Gamma(alpha, beta) для интенсивности."""
    _positive(alpha=alpha, beta=beta)
    return NegativeBinomial(alpha, beta / (beta + 1.0))


def gauss_known_variance_update(m0: float, s0: float, sigma0: float, stats_: SufficientStats) -> Gauss:
    """Апостериорное для среднего Гаусса при известной дисперсии sigma0^2.

    Args:
        m0: априорное среднее
        s0: априорное стандартное отклонение
        sigma0: известное стандартное отклонение данных
        stats_: достаточные статистики выборки

    Returns:
        Gauss{mu1, sigma1}, где 1/sigma1^2 = 1/s0^2 + n/sigma0^2
    """
    _positive(s0=s0, sigma0=sigma0)
    if stats_.n < 1:
        raise EmptyDataError("выборка пуста")
    var1 = 1.0 / (1.0 / s0 ** 2 + stats_.n / sigma0 ** 2)
    mu1 = var1 * (m0 / s0 ** 2 + stats_.n * stats_.mean_y / sigma0 ** 2)
    return Gauss(mu1, math.sqrt(var1))


def gauss_known_mean_update(alpha0: float, beta0: float, mu0: float, data) -> InverseGamma:
    """Апостериорное для дисперсии Гаусса при известном среднем mu0."""
    _positive(alpha0=alpha0, beta0=beta0)
    if isinstance(data, SufficientStats):
        if data.n < 1:
            raise EmptyDataError("выборка пуста")
        n, ss = data.n, data.sum_sq_dev_from(mu0)
    else:
        y = np.asarray(data, dtype=float).ravel()
        if y.size == 0:
            raise EmptyDataError("выборка пуста")
        n, ss = int(y.size), math.fsum((y - mu0) ** 2)
    return InverseGamma(_exact_sum(alpha0, Fraction(n, 2)), _exact_sum(beta0, Fraction(ss) / 2))


def exponential_gamma_update(alpha: float, beta: float, stats_: SufficientStats) -> Gamma:
    _positive(alpha=alpha, beta=beta)
    if stats_.n > 0 and stats_.min_y < 0:
        raise DomainError("данные экспоненциальной модели должны быть неотрицательными")
    return Gamma(_exact_sum(alpha, stats_.n), _exact_sum(beta, stats_.sum_y))


# ---------------------------------------------------------------------------
# Двухпараметрическая модель Гаусса
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GaussInverseGammaPosterior:
    mu_n: float
    kappa: float
    alpha_n: float
    beta_n: float

    def __post_init__(self):
        _positive(kappa=self.kappa, alpha_n=self.alpha_n, beta_n=self.beta_n)


class JointPosterior(NamedTuple):
    sigma2_marginal: InverseGamma
    mu_marginal: NoncentralT
    joint: GaussInverseGammaPosterior


def _joint(mu_n: float, kappa: float, alpha_n: float, beta_n: float) -> JointPosterior:
    joint = GaussInverseGammaPosterior(mu_n, kappa, alpha_n, beta_n)
    return JointPosterior(
        sigma2_marginal=InverseGamma(alpha_n, beta_n),
        mu_marginal=NoncentralT(mu_n, math.sqrt(beta_n / alpha_n / kappa), 2.0 * alpha_n),
        joint=joint,
    )


def gauss_joint_uniform(stats_: SufficientStats) -> JointPosterior:
    """Совместное апостериорное (mu, sigma^2) при равномерном совместном априорном."""
    if stats_.n < 2 or stats_.tss <= 0:
        raise ImproperPosteriorError(
            f"апостериорное не нормируемо: n={stats_.n}, TSS={stats_.tss}"
        )
    n = stats_.n
    # (beta_n/alpha_n)/kappa = TSS/((n-1) n)
    return _joint(stats_.mean_y, float(n), (n - 1) / 2.0, stats_.tss / 2.0)


def gauss_joint_conditional_conjugate(m0: float, alpha0: float, beta0: float, stats_: SufficientStats) -> JointPosterior:
    """Модель Гаусс–обратная Гамма с априорным mu|sigma^2 ~ N(m0, sigma^2)."""
    _positive(alpha0=alpha0, beta0=beta0)
    if stats_.n < 1:
        raise EmptyDataError("выборка пуста")
    n = stats_.n
    mu_n = m0 / (n + 1) + n * stats_.mean_y / (n + 1)
    alpha_n = _exact_sum(alpha0, Fraction(n, 2))
    beta_n = beta0 + stats_.tss / 2.0 + 0.5 * (n / (n + 1)) * (m0 - stats_.mean_y) ** 2
    return _joint(mu_n, float(n + 1), alpha_n, beta_n)


def gauss_joint_predictive(joint: GaussInverseGammaPosterior) -> NoncentralT:
    """Апостериорное предсказательное для нового наблюдения."""
    scale = math.sqrt(joint.beta_n / joint.alpha_n * (1.0 + 1.0 / joint.kappa))
    return NoncentralT(joint.mu_n, scale, 2.0 * joint.alpha_n)


def conditional_conjugate_target(m0: float, alpha0: float, beta0: float, data: Sequence[float]) -> LogTarget:
    """Цель (mu, log_sigma) модели Гаусс–обратная Гамма с полными условными.

    mu | sigma^2 ~ N((m0 + sum y)/(n+1), sigma^2/(n+1)),
    sigma^2 | mu ~ IG(alpha0 + (n+1)/2, beta0 + Q/2), Q = sum (y - mu)^2 + (mu - m0)^2.
    """
    _positive(alpha0=alpha0, beta0=beta0)
    y = np.asarray(data, dtype=float).ravel()
    if y.size == 0:
        raise EmptyDataError("выборка пуста")
    n = y.size
    sum_y = math.fsum(y)
    shape = n + 1 + 2.0 * alpha0

    def quad(mu: float) -> float:
        return float(np.sum((y - mu) ** 2) + (mu - m0) ** 2)

    def log_density(theta):
        mu, s = theta
        return -shape * s - (quad(mu) / 2.0 + beta0) * math.exp(-2.0 * s)

    def gradient(theta):
        mu, s = theta
        v = math.exp(2.0 * s)
        d_mu = (float(np.sum(y - mu)) - (mu - m0)) / v
        d_s = -shape + 2.0 * (quad(mu) / 2.0 + beta0) / v
        return np.array([d_mu, d_s])

    def draw_mu(theta, gen):
        v = math.exp(2.0 * theta[1])
        return gen.normal((m0 + sum_y) / (n + 1), math.sqrt(v / (n + 1)))

    def draw_log_sigma(theta, gen):
        rate = beta0 + quad(theta[0]) / 2.0
        sigma2 = rate / gen.standard_gamma(alpha0 + (n + 1) / 2.0)
        return 0.5 * math.log(sigma2)

    def init(gen):
        sigma2 = beta0 / gen.standard_gamma(alpha0)
        return np.array([gen.normal(m0, math.sqrt(sigma2)), 0.5 * math.log(sigma2)])

    def pointwise(theta):
        return stats.norm.logpdf(y, theta[0], math.exp(theta[1]))

    return LogTarget(
        dimension=2,
        param_names=("mu", "log_sigma"),
        log_density=log_density,
        gradient=gradient,
        full_conditionals=(draw_mu, draw_log_sigma),
        derived_names=("sigma2",),
        derive=lambda theta: np.array([math.exp(2.0 * theta[1])]),
        init=init,
        log_likelihood=lambda theta: float(np.sum(pointwise(theta))),
        pointwise_log_lik=pointwise,
    )
