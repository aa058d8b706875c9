"""
Зоопарк распределений: плотность в лог-форме, моменты, квантили, выборки
"""
import dataclasses
import logging
import math
from dataclasses import dataclass, field
from typing import ClassVar, NamedTuple

import numpy as np
from scipy import stats

from ..utils.errors import DimensionError, DomainError, ParameterError
from .rng import Rng

logger = logging.getLogger("bayescore")


class Moments(NamedTuple):
    """Среднее и дисперсия; None означает, что момент не существует."""

    mean: float | np.ndarray | None
    variance: float | np.ndarray | None


def _is_integer(x: np.ndarray) -> np.ndarray:
    return np.isfinite(x) & (np.mod(x, 1.0) == 0.0)


def _generator(rng) -> np.random.Generator:
    return rng.generator if isinstance(rng, Rng) else rng


def _require(condition: bool, message: str):
    if not condition:
        raise ParameterError(message)


class Distribution:
    """Базовый класс семейства распределений."""

    family: ClassVar[str] = ""
    discrete: ClassVar[bool] = False
    multivariate: ClassVar[bool] = False

    # --- переопределяется в семействах ---
    def _frozen(self):
        raise ParameterError(f"{self.family}: нет одномерного представления")

    def _in_support(self, x: np.ndarray) -> np.ndarray:
        return np.isfinite(x)

    def moments(self) -> Moments:
        raise NotImplementedError

    def grad_log_density(self, x):
        raise ParameterError(f"{self.family}: градиент плотности не определён")

    @property
    def has_gradient(self) -> bool:
        return type(self).grad_log_density is not Distribution.grad_log_density

    # --- общие операции ---
    def log_density(self, x):
        """Натуральный логарифм плотности (функции вероятности) в точке x.

        Args:
            x: скаляр или массив значений

        Returns:
            float для скаляра, массив для массива

        Raises:
            DomainError: если хотя бы одно значение вне носителя
        """
        arr = np.asarray(x, dtype=float)
        if not np.all(self._in_support(arr)):
            raise DomainError(f"{self.family}: значение {x!r} вне носителя")
        frozen = self._frozen()
        out = frozen.logpmf(arr) if self.discrete else frozen.logpdf(arr)
        return float(out) if np.ndim(out) == 0 else np.asarray(out, dtype=float)

    def in_support(self, x) -> np.ndarray:
        """Маска значений, лежащих в носителе."""
        return self._in_support(np.asarray(x, dtype=float))

    def support_bounds(self) -> tuple[float, float]:
        lower, upper = self._frozen().support()
        return float(lower), float(upper)

    def cdf(self, x):
        out = self._frozen().cdf(np.asarray(x, dtype=float))
        return float(out) if np.ndim(out) == 0 else out

    def interval_mass(self, lower: float, upper: float) -> float:
        """Вероятностная масса отрезка [lower, upper]."""
        if self.discrete:
            return float(self.cdf(upper) - self.cdf(math.ceil(lower) - 1))
        return float(self.cdf(upper) - self.cdf(lower))

    def quantile(self, p: float):
        if not 0.0 < p < 1.0:
            raise DomainError(f"уровень квантили должен лежать в (0, 1), получено {p}")
        value = float(self._frozen().ppf(p))
        return int(value) if self.discrete else value

    def sample(self, rng: Rng, count: int) -> np.ndarray:
        if count < 1:
            raise ParameterError("число выборок должно быть не меньше 1")
        return np.asarray(self._frozen().rvs(size=count, random_state=_generator(rng)))

    def to_dict(self) -> dict:
        out = {"family": self.family}
        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            out[f.name] = value.tolist() if isinstance(value, np.ndarray) else value
        return out


# ---------------------------------------------------------------------------
# Дискретные семейства
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Bernoulli(Distribution):
    theta: float

    family: ClassVar[str] = "bernoulli"
    discrete: ClassVar[bool] = True

    def __post_init__(self):
        _require(0.0 <= self.theta <= 1.0, f"bernoulli: theta={self.theta} вне [0, 1]")

    def _frozen(self):
        return stats.bernoulli(self.theta)

    def _in_support(self, x):
        return (x == 0) | (x == 1)

    def moments(self):
        return Moments(self.theta, self.theta * (1.0 - self.theta))


@dataclass(frozen=True)
class Binomial(Distribution):
    n: int
    theta: float

    family: ClassVar[str] = "binomial"
    discrete: ClassVar[bool] = True

    def __post_init__(self):
        _require(float(self.n) == int(self.n) and self.n >= 0, f"binomial: n={self.n} не целое неотрицательное")
        _require(0.0 <= self.theta <= 1.0, f"binomial: theta={self.theta} вне [0, 1]")

    def _frozen(self):
        return stats.binom(int(self.n), self.theta)

    def _in_support(self, x):
        return _is_integer(x) & (x >= 0) & (x <= self.n)

    def moments(self):
        return Moments(self.n * self.theta, self.n * self.theta * (1.0 - self.theta))


@dataclass(frozen=True)
class Poisson(Distribution):
    theta: float

    family: ClassVar[str] = "poisson"
    discrete: ClassVar[bool] = True

    def __post_init__(self):
        _require(self.theta > 0.0, f"poisson: theta={self.theta} должно быть > 0")

    def _frozen(self):
        return stats.poisson(self.theta)

    def _in_support(self, x):
        return _is_integer(x) & (x >= 0)

    def moments(self):
        return Moments(self.theta, self.theta)


@dataclass(frozen=True)
class NegativeBinomial(Distribution):
    """Параметризация (n, theta) как у dnbinom(y, n, theta) в R."""

    n: float
    theta: float

    family: ClassVar[str] = "negative_binomial"
    discrete: ClassVar[bool] = True

    def __post_init__(self):
        _require(self.n > 0.0, f"negative_binomial: n={self.n} должно быть > 0")
        _require(0.0 < self.theta <= 1.0, f"negative_binomial: theta={self.theta} вне (0, 1]")

    def _frozen(self):
        return stats.nbinom(self.n, self.theta)

    def _in_support(self, x):
        return _is_integer(x) & (x >= 0)

    def moments(self):
        q = 1.0 - self.theta
        return Moments(self.n * q / self.theta, self.n * q / self.theta ** 2)


@dataclass(frozen=True)
class DiscreteUniform(Distribution):
    """Равномерное распределение на {1, ..., k}."""

    k: int

    family: ClassVar[str] = "discrete_uniform"
    discrete: ClassVar[bool] = True

    def __post_init__(self):
        _require(float(self.k) == int(self.k) and self.k >= 1, f"discrete_uniform: k={self.k} должно быть целым >= 1")

    def _frozen(self):
        return stats.randint(1, int(self.k) + 1)

    def _in_support(self, x):
        return _is_integer(x) & (x >= 1) & (x <= self.k)

    def moments(self):
        return Moments((self.k + 1) / 2.0, (self.k ** 2 - 1) / 12.0)


# ---------------------------------------------------------------------------
# Непрерывные одномерные семейства
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Gauss(Distribution):
    mu: float
    sigma: float

    family: ClassVar[str] = "gauss"

    def __post_init__(self):
        _require(self.sigma > 0.0, f"gauss: sigma={self.sigma} должно быть > 0")

    def _frozen(self):
        return stats.norm(self.mu, self.sigma)

    def moments(self):
        return Moments(self.mu, self.sigma ** 2)

    def grad_log_density(self, x):
        return -(np.asarray(x, dtype=float) - self.mu) / self.sigma ** 2


@dataclass(frozen=True)
class NoncentralT(Distribution):
    """Нецентральное t: положение mu, масштаб sigma, степени свободы nu."""

    mu: float
    sigma: float
    nu: float

    family: ClassVar[str] = "noncentral_t"

    def __post_init__(self):
        _require(self.sigma > 0.0, f"noncentral_t: sigma={self.sigma} должно быть > 0")
        _require(self.nu >= 1.0, f"noncentral_t: nu={self.nu} должно быть >= 1")

    def _frozen(self):
        return stats.t(self.nu, loc=self.mu, scale=self.sigma)

    def moments(self):
        mean = self.mu if self.nu > 1.0 else None
        variance = self.nu / (self.nu - 2.0) * self.sigma ** 2 if self.nu > 2.0 else None
        return Moments(mean, variance)

    def grad_log_density(self, x):
        d = np.asarray(x, dtype=float) - self.mu
        return -(self.nu + 1.0) * d / (self.nu * self.sigma ** 2 + d ** 2)


@dataclass(frozen=True)
class Exponential(Distribution):
    theta: float

    family: ClassVar[str] = "exponential"

    def __post_init__(self):
        _require(self.theta > 0.0, f"exponential: theta={self.theta} должно быть > 0")

    def _frozen(self):
        return stats.expon(scale=1.0 / self.theta)

    def _in_support(self, x):
        return np.isfinite(x) & (x >= 0)

    def moments(self):
        return Moments(1.0 / self.theta, 1.0 / self.theta ** 2)

    def grad_log_density(self, x):
        return np.full_like(np.asarray(x, dtype=float), -self.theta)


@dataclass(frozen=True)
class Pareto(Distribution):
    """theta называется параметром масштаба, хотя управляет формой хвоста."""

    theta: float
    y_min: float

    family: ClassVar[str] = "pareto"

    def __post_init__(self):
        _require(self.theta > 0.0, f"pareto: theta={self.theta} должно быть > 0")
        _require(self.y_min > 0.0, f"pareto: y_min={self.y_min} должно быть > 0")

    def _frozen(self):
        return stats.pareto(self.theta, scale=self.y_min)

    def _in_support(self, x):
        return np.isfinite(x) & (x >= self.y_min)

    def moments(self):
        t, y = self.theta, self.y_min
        mean = t / (t - 1.0) * y if t > 1.0 else None
        variance = t / ((t - 1.0) ** 2 * (t - 2.0)) * y ** 2 if t > 2.0 else None
        return Moments(mean, variance)

    def grad_log_density(self, x):
        return -(self.theta + 1.0) / np.asarray(x, dtype=float)


@dataclass(frozen=True)
class Beta(Distribution):
    alpha: float
    beta: float

    family: ClassVar[str] = "beta"

    def __post_init__(self):
        _require(self.alpha > 0.0 and self.beta > 0.0, f"beta: alpha={self.alpha}, beta={self.beta} должны быть > 0")

    def _frozen(self):
        return stats.beta(self.alpha, self.beta)

    def _in_support(self, x):
        return (x >= 0) & (x <= 1)

    def moments(self):
        s = self.alpha + self.beta
        return Moments(self.alpha / s, self.alpha * self.beta / (s ** 2 * (s + 1.0)))

    def grad_log_density(self, x):
        x = np.asarray(x, dtype=float)
        return (self.alpha - 1.0) / x - (self.beta - 1.0) / (1.0 - x)


@dataclass(frozen=True)
class Gamma(Distribution):
    """Gamma с формой alpha и интенсивностью beta."""

    alpha: float
    beta: float

    family: ClassVar[str] = "gamma"

    def __post_init__(self):
        _require(self.alpha > 0.0 and self.beta > 0.0, f"gamma: alpha={self.alpha}, beta={self.beta} должны быть > 0")

    def _frozen(self):
        return stats.gamma(self.alpha, scale=1.0 / self.beta)

    def _in_support(self, x):
        return np.isfinite(x) & (x >= 0)

    def moments(self):
        return Moments(self.alpha / self.beta, self.alpha / self.beta ** 2)

    def grad_log_density(self, x):
        return (self.alpha - 1.0) / np.asarray(x, dtype=float) - self.beta


@dataclass(frozen=True)
class InverseGamma(Distribution):
    alpha: float
    beta: float

    family: ClassVar[str] = "inverse_gamma"

    def __post_init__(self):
        _require(self.alpha > 0.0 and self.beta > 0.0, f"inverse_gamma: alpha={self.alpha}, beta={self.beta} должны быть > 0")

    def _frozen(self):
        return stats.invgamma(self.alpha, scale=self.beta)

    def _in_support(self, x):
        return np.isfinite(x) & (x > 0)

    def moments(self):
        a, b = self.alpha, self.beta
        mean = b / (a - 1.0) if a > 1.0 else None
        variance = b ** 2 / ((a - 1.0) ** 2 * (a - 2.0)) if a > 2.0 else None
        return Moments(mean, variance)

    def grad_log_density(self, x):
        x = np.asarray(x, dtype=float)
        return -(self.alpha + 1.0) / x + self.beta / x ** 2


@dataclass(frozen=True)
class Cauchy(Distribution):
    x0: float
    gamma: float

    family: ClassVar[str] = "cauchy"

    def __post_init__(self):
        _require(self.gamma > 0.0, f"cauchy: gamma={self.gamma} должно быть > 0")

    def _frozen(self):
        return stats.cauchy(self.x0, self.gamma)

    def moments(self):
        return Moments(None, None)

    def grad_log_density(self, x):
        d = np.asarray(x, dtype=float) - self.x0
        return -2.0 * d / (self.gamma ** 2 + d ** 2)


@dataclass(frozen=True)
class HalfCauchy(Distribution):
    """Половинное Коши на [0, inf) для параметров масштаба."""

    scale: float

    family: ClassVar[str] = "half_cauchy"

    def __post_init__(self):
        _require(self.scale > 0.0, f"half_cauchy: scale={self.scale} должно быть > 0")

    def _frozen(self):
        return stats.halfcauchy(scale=self.scale)

    def _in_support(self, x):
        return np.isfinite(x) & (x >= 0)

    def moments(self):
        return Moments(None, None)

    def grad_log_density(self, x):
        x = np.asarray(x, dtype=float)
        return -2.0 * x / (self.scale ** 2 + x ** 2)


@dataclass(frozen=True)
class Laplace(Distribution):
    mu: float
    b: float

    family: ClassVar[str] = "laplace"

    def __post_init__(self):
        _require(self.b > 0.0, f"laplace: b={self.b} должно быть > 0")

    def _frozen(self):
        return stats.laplace(self.mu, self.b)

    def moments(self):
        return Moments(self.mu, 2.0 * self.b ** 2)

    def grad_log_density(self, x):
        return -np.sign(np.asarray(x, dtype=float) - self.mu) / self.b


@dataclass(frozen=True)
class ContinuousUniform(Distribution):
    a: float
    b: float

    family: ClassVar[str] = "continuous_uniform"

    def __post_init__(self):
        _require(self.a < self.b, f"continuous_uniform: требуется a < b, получено a={self.a}, b={self.b}")

    def _frozen(self):
        return stats.uniform(self.a, self.b - self.a)

    def _in_support(self, x):
        return (x >= self.a) & (x <= self.b)

    def moments(self):
        return Moments((self.a + self.b) / 2.0, (self.b - self.a) ** 2 / 12.0)

    def grad_log_density(self, x):
        return np.zeros_like(np.asarray(x, dtype=float))


@dataclass(frozen=True)
class TruncatedJeffreys(Distribution):
    """Плотность 1/(ln(b/a) x) на [a, b]."""

    a: float
    b: float

    family: ClassVar[str] = "truncated_jeffreys"

    def __post_init__(self):
        _require(0.0 < self.a < self.b, f"truncated_jeffreys: требуется 0 < a < b, получено a={self.a}, b={self.b}")

    def _frozen(self):
        return stats.loguniform(self.a, self.b)

    def _in_support(self, x):
        return (x >= self.a) & (x <= self.b)

    def moments(self):
        log_ratio = math.log(self.b / self.a)
        mean = (self.b - self.a) / log_ratio
        second = (self.b ** 2 - self.a ** 2) / (2.0 * log_ratio)
        return Moments(mean, second - mean ** 2)

    def grad_log_density(self, x):
        return -1.0 / np.asarray(x, dtype=float)


@dataclass(frozen=True)
class TruncatedGauss(Distribution):
    """Гаусс, усечённый на [lower, upper]."""

    mu: float
    sigma: float
    lower: float = -math.inf
    upper: float = math.inf

    family: ClassVar[str] = "truncated_gauss"

    def __post_init__(self):
        _require(self.sigma > 0.0, f"truncated_gauss: sigma={self.sigma} должно быть > 0")
        _require(self.lower < self.upper, "truncated_gauss: требуется lower < upper")
        _require(math.isfinite(self.lower) or math.isfinite(self.upper), "truncated_gauss: нужна хотя бы одна конечная граница")

    def _frozen(self):
        lo = (self.lower - self.mu) / self.sigma
        hi = (self.upper - self.mu) / self.sigma
        return stats.truncnorm(lo, hi, loc=self.mu, scale=self.sigma)

    def _in_support(self, x):
        return (x >= self.lower) & (x <= self.upper)

    def moments(self):
        frozen = self._frozen()
        return Moments(float(frozen.mean()), float(frozen.var()))

    def grad_log_density(self, x):
        return -(np.asarray(x, dtype=float) - self.mu) / self.sigma ** 2


# ---------------------------------------------------------------------------
# Многомерные семейства
# ---------------------------------------------------------------------------

def _check_matrix(name: str, mu: np.ndarray, matrix: np.ndarray) -> np.ndarray:
    _require(mu.ndim == 1 and mu.size >= 1, f"{name}: вектор положения должен быть одномерным")
    _require(matrix.shape == (mu.size, mu.size), f"{name}: матрица должна иметь размер {mu.size}x{mu.size}")
    _require(np.all(np.isfinite(matrix)), f"{name}: матрица содержит нечисловые значения")
    _require(np.allclose(matrix, matrix.T, rtol=1e-12, atol=1e-14), f"{name}: матрица несимметрична")
    try:
        return np.linalg.cholesky(matrix)
    except np.linalg.LinAlgError:
        raise ParameterError(f"{name}: матрица не положительно определена (вырождена)")


@dataclass(frozen=True, eq=False)
class MultivariateGauss(Distribution):
    mu_vec: np.ndarray
    cov_matrix: np.ndarray
    _chol: np.ndarray = field(init=False, repr=False)

    family: ClassVar[str] = "multivariate_gauss"
    multivariate: ClassVar[bool] = True

    def __post_init__(self):
        mu = np.asarray(self.mu_vec, dtype=float)
        cov = np.asarray(self.cov_matrix, dtype=float)
        object.__setattr__(self, "mu_vec", mu)
        object.__setattr__(self, "cov_matrix", cov)
        object.__setattr__(self, "_chol", _check_matrix(self.family, mu, cov))

    @property
    def dim(self) -> int:
        return self.mu_vec.size

    def log_density(self, x):
        arr = np.asarray(x, dtype=float)
        if arr.shape[-1:] != (self.dim,):
            raise DimensionError(f"{self.family}: ожидалась размерность {self.dim}, получено {arr.shape}")
        out = stats.multivariate_normal(self.mu_vec, self.cov_matrix).logpdf(arr)
        return float(out) if np.ndim(out) == 0 else out

    def moments(self):
        return Moments(self.mu_vec.copy(), self.cov_matrix.copy())

    def sample(self, rng, count):
        if count < 1:
            raise ParameterError("число выборок должно быть не меньше 1")
        z = _generator(rng).standard_normal((count, self.dim))
        return self.mu_vec + z @ self._chol.T

    def quantile(self, p):
        raise ParameterError(f"{self.family}: квантили определены только для одномерных семейств")

    def to_dict(self):
        return {"family": self.family, "mu_vec": self.mu_vec.tolist(), "cov_matrix": self.cov_matrix.tolist()}


@dataclass(frozen=True, eq=False)
class MultivariateT(Distribution):
    mu_vec: np.ndarray
    scale_matrix: np.ndarray
    nu: float
    _chol: np.ndarray = field(init=False, repr=False)

    family: ClassVar[str] = "multivariate_t"
    multivariate: ClassVar[bool] = True

    def __post_init__(self):
        mu = np.asarray(self.mu_vec, dtype=float)
        scale = np.asarray(self.scale_matrix, dtype=float)
        _require(self.nu >= 1.0, f"{self.family}: nu={self.nu} должно быть >= 1")
        object.__setattr__(self, "mu_vec", mu)
        object.__setattr__(self, "scale_matrix", scale)
        object.__setattr__(self, "_chol", _check_matrix(self.family, mu, scale))

    @property
    def dim(self) -> int:
        return self.mu_vec.size

    def log_density(self, x):
        arr = np.asarray(x, dtype=float)
        if arr.shape[-1:] != (self.dim,):
            raise DimensionError(f"{self.family}: ожидалась размерность {self.dim}, получено {arr.shape}")
        out = stats.multivariate_t(self.mu_vec, self.scale_matrix, df=self.nu).logpdf(arr)
        return float(out) if np.ndim(out) == 0 else out

    def moments(self):
        mean = self.mu_vec.copy() if self.nu > 1.0 else None
        variance = self.nu / (self.nu - 2.0) * self.scale_matrix if self.nu > 2.0 else None
        return Moments(mean, variance)

    def sample(self, rng, count):
        # смесь Гаусса по масштабу: z / sqrt(chi2_nu / nu)
        if count < 1:
            raise ParameterError("число выборок должно быть не меньше 1")
        gen = _generator(rng)
        z = gen.standard_normal((count, self.dim)) @ self._chol.T
        w = gen.chisquare(self.nu, size=count) / self.nu
        return self.mu_vec + z / np.sqrt(w)[:, None]

    def quantile(self, p):
        raise ParameterError(f"{self.family}: квантили определены только для одномерных семейств")

    def to_dict(self):
        return {
            "family": self.family,
            "mu_vec": self.mu_vec.tolist(),
            "scale_matrix": self.scale_matrix.tolist(),
            "nu": self.nu,
        }


# ---------------------------------------------------------------------------
# Реестр и функции модуля
# ---------------------------------------------------------------------------

FAMILIES: dict[str, type[Distribution]] = {
    cls.family: cls
    for cls in (
        Bernoulli, Binomial, Poisson, NegativeBinomial, DiscreteUniform,
        Gauss, NoncentralT, Exponential, Pareto, Beta, Gamma, InverseGamma,
        Cauchy, HalfCauchy, Laplace, ContinuousUniform, TruncatedJeffreys,
        TruncatedGauss, MultivariateGauss, MultivariateT,
    )
}

ALIASES = {"normal": "gauss", "student_t": "noncentral_t", "t": "noncentral_t", "uniform": "continuous_uniform"}


def from_dict(obj: dict) -> Distribution:
    """Строит распределение из JSON-формы {"family": имя, параметры...}.

    Raises:
        ParameterError: неизвестное семейство, лишние или недостающие параметры
    """
    if not isinstance(obj, dict) or "family" not in obj:
        raise ParameterError("описание распределения должно содержать поле 'family'")
    name = str(obj["family"]).lower()
    name = ALIASES.get(name, name)
    cls = FAMILIES.get(name)
    if cls is None:
        raise ParameterError(f"неизвестное семейство распределений '{obj['family']}'")
    allowed = {f.name for f in dataclasses.fields(cls) if f.init}
    params = {k: v for k, v in obj.items() if k != "family"}
    unknown = set(params) - allowed
    if unknown:
        raise ParameterError(f"{name}: неизвестные параметры {sorted(unknown)}")
    try:
        return cls(**params)
    except TypeError as e:
        raise ParameterError(f"{name}: {e}")


def log_density(d: Distribution, x):
    return d.log_density(x)


def moments(d: Distribution) -> Moments:
    return d.moments()


def sample(d: Distribution, rng: Rng, count: int) -> np.ndarray:
    return d.sample(rng, count)


def quantile(d: Distribution, p: float):
    return d.quantile(p)


def cdf(d: Distribution, x):
    return d.cdf(x)
