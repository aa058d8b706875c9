"""
Обобщённые линейные модели: стандартизация, компиляция описания модели в LogTarget,
обратное преобразование параметров и предсказательная симуляция
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np
import pandas as pd
from scipy.special import digamma, expit, gammaln

from ..config import settings
from ..distributions.families import Exponential, Gamma, Gauss, HalfCauchy, InverseGamma
from ..mcmc.targets import ChainSet, LogTarget
from ..utils.errors import (
    DataError,
    DimensionError,
    DomainError,
    ImproperPriorError,
    MetaMismatchError,
    SpecError,
    ZeroVarianceError,
)
from .spec import (
    AdaptivePrior,
    DesignMatrix,
    FixedPrior,
    FlatPrior,
    ModelSpec,
    TruncatedGaussPrior,
    apply_inverse_link,
    model_spec_to_dict,
    parse_model_spec,
)

logger = logging.getLogger("bayescore")

LOG_2PI = math.log(2.0 * math.pi)

# семейства с адаптивным интерсептом вокруг гиперсреднего zeta;
# у остальных интерсепты групп центрированы в нуле плюс константа b_const
CENTRED_FAMILIES = ("gauss", "student_t", "bernoulli", "binomial")
GAMMA_HYPERPRIOR = Gamma(2.0, 1.0)


# ---------------------------------------------------------------------------
# Стандартизация
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Standardization:
    """Средние и стандартные отклонения столбцов, использованные при обучении."""

    x_names: tuple
    x_mean: np.ndarray
    x_sd: np.ndarray
    x_flags: tuple
    y_mean: float = 0.0
    y_sd: float = 1.0
    y_standardized: bool = False
    has_sigma: bool = False

    def __post_init__(self):
        object.__setattr__(self, "x_names", tuple(self.x_names))
        object.__setattr__(self, "x_mean", np.asarray(self.x_mean, dtype=float).reshape(-1))
        object.__setattr__(self, "x_sd", np.asarray(self.x_sd, dtype=float).reshape(-1))
        object.__setattr__(self, "x_flags", tuple(bool(f) for f in self.x_flags))
        k = len(self.x_names)
        if not (self.x_mean.size == self.x_sd.size == len(self.x_flags) == k):
            raise MetaMismatchError("длины полей стандартизации не совпадают")

    @classmethod
    def identity(cls, names=(), has_sigma: bool = False) -> "Standardization":
        k = len(names)
        return cls(tuple(names), np.zeros(k), np.ones(k), (False,) * k, has_sigma=has_sigma)

    @property
    def x_scale(self) -> np.ndarray:
        return np.where(self.x_flags, self.x_sd, 1.0)

    @property
    def x_shift(self) -> np.ndarray:
        return np.where(self.x_flags, self.x_mean, 0.0)

    @property
    def y_scale(self) -> float:
        return self.y_sd if self.y_standardized else 1.0

    @property
    def y_shift(self) -> float:
        return self.y_mean if self.y_standardized else 0.0

    def transform_design(self, X: DesignMatrix) -> np.ndarray:
        """Стандартизованные столбцы предикторов (без столбца единиц)."""
        if X.predictor_names != self.x_names:
            raise DimensionError(
                f"столбцы {list(X.predictor_names)} не совпадают с обучающими {list(self.x_names)}"
            )
        return (X.predictors - self.x_shift) / self.x_scale

    def transform_y(self, y) -> np.ndarray:
        return (np.asarray(y, dtype=float) - self.y_shift) / self.y_scale

    def inverse_y(self, zy) -> np.ndarray:
        return np.asarray(zy, dtype=float) * self.y_scale + self.y_shift

    def to_dict(self) -> dict:
        return {
            "x_names": list(self.x_names),
            "x_mean": self.x_mean.tolist(),
            "x_sd": self.x_sd.tolist(),
            "x_flags": list(self.x_flags),
            "y_mean": self.y_mean,
            "y_sd": self.y_sd,
            "y_standardized": self.y_standardized,
            "has_sigma": self.has_sigma,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "Standardization":
        try:
            return cls(**obj)
        except TypeError as e:
            raise MetaMismatchError(f"повреждённые метаданные стандартизации: {e}")


class Standardized(NamedTuple):
    zy: np.ndarray
    zX: DesignMatrix
    meta: Standardization


def _is_indicator(col: np.ndarray) -> bool:
    return bool(np.all((col == 0.0) | (col == 1.0)))


def standardize(y, X: DesignMatrix, metric: bool = True, response: str = "y") -> Standardized:
    """z-преобразование столбцов (n-1 в знаменателе дисперсии).

    Столбец единиц и индикаторные (0/1) столбцы не меняются; y
    стандартизуется только для метрической переменной отклика.

    Raises:
        ZeroVarianceError: стандартизуемый столбец постоянен
    """
    y = np.asarray(y, dtype=float)
    if y.shape != (X.n_rows,):
        raise DimensionError(f"длина отклика {y.shape} не равна числу строк {X.n_rows}")
    k = len(X.predictor_names)
    means, sds, flags = np.zeros(k), np.ones(k), []
    zx = X.values.copy()
    for j, name in enumerate(X.predictor_names):
        col = X.predictors[:, j]
        if _is_indicator(col):
            flags.append(False)
            continue
        sd = float(np.std(col, ddof=1)) if col.size > 1 else 0.0
        if not sd > 0.0:
            raise ZeroVarianceError(name)
        means[j], sds[j] = float(col.mean()), sd
        zx[:, j + 1] = (col - means[j]) / sd
        flags.append(True)

    y_mean, y_sd = 0.0, 1.0
    zy = y.copy()
    if metric:
        y_sd = float(np.std(y, ddof=1)) if y.size > 1 else 0.0
        if not y_sd > 0.0:
            raise ZeroVarianceError(response)
        y_mean = float(y.mean())
        zy = (y - y_mean) / y_sd
    meta = Standardization(X.predictor_names, means, sds, tuple(flags), y_mean, y_sd, metric, metric)
    return Standardized(zy, DesignMatrix(zx, X.column_names), meta)


def _destandardize_rows(meta: Standardization, z: np.ndarray) -> np.ndarray:
    """Построчное обратное преобразование матрицы [b0, b..., (sigma)]."""
    k = len(meta.x_names)
    expected = 1 + k + int(meta.has_sigma)
    if z.ndim != 2 or z.shape[1] != expected:
        raise MetaMismatchError(f"ожидалось {expected} параметров, получено {z.shape[-1]}")
    c, m = meta.y_scale, meta.y_shift
    scale, shift = meta.x_scale, meta.x_shift
    out = np.empty_like(z)
    slopes = z[:, 1: 1 + k]
    out[:, 1: 1 + k] = slopes * c / scale
    out[:, 0] = z[:, 0] * c + m - c * (slopes @ (shift / scale))
    if meta.has_sigma:
        out[:, -1] = z[:, -1] * c
    return out


def destandardize(meta: Standardization, z_params) -> np.ndarray:
    """Параметры на исходной шкале: b_j = zb_j*c/sd_j, b0 = zb0*c + m - c*sum(zb_j*mean_j/sd_j),
    sigma = zsigma*c, где c и m равны sd и среднему y (1 и 0, если y не стандартизован).

    Raises:
        MetaMismatchError: число параметров не соответствует метаданным
    """
    z = np.asarray(z_params, dtype=float)
    if z.ndim != 1:
        raise MetaMismatchError("ожидается вектор параметров")
    return _destandardize_rows(meta, z[None, :])[0]


class AnovaEffects(NamedTuple):
    a0: float
    a: np.ndarray


def anova_recenter(mu0: float, mu_g) -> AnovaEffects:
    """Общее среднее и отклонения ячеек с нулевой суммой."""
    cells = float(mu0) + np.asarray(mu_g, dtype=float)
    a0 = float(cells.mean())
    return AnovaEffects(a0, cells - a0)


# ---------------------------------------------------------------------------
# Априорные слагаемые
# ---------------------------------------------------------------------------

def _location_term(prior, x, want_grad: bool):
    """Лог-априорное параметра положения и его градиент."""
    x = np.asarray(x, dtype=float)
    if isinstance(prior, FlatPrior):
        return 0.0, np.zeros_like(x)
    dist = prior.dist
    if not np.all(dist.in_support(x)):
        return -math.inf, None
    lp = float(np.sum(dist.log_density(x)))
    return lp, (dist.grad_log_density(x) if want_grad else None)


def _positive_term(prior, s: float, want_grad: bool):
    """Лог-априорное положительной величины, хранимой как s = log(sigma), с якобианом.

    on="variance" относит распределение к sigma^2, on="precision" к 1/sigma^2,
    on="value" и on="sd" к самой величине.
    """
    if isinstance(prior, FlatPrior):
        return s, 1.0
    power = {"variance": 2.0, "precision": -2.0}.get(prior.on, 1.0)
    try:
        x = math.exp(power * s)
    except OverflowError:
        return -math.inf, None
    dist = prior.dist
    if not bool(dist.in_support(x)):
        return -math.inf, None
    # x = exp(power * s), |dx/ds| = |power| * x
    lp = float(dist.log_density(x)) + math.log(abs(power)) + power * s
    grad = (float(dist.grad_log_density(x)) * x + 1.0) * power if want_grad else None
    return lp, grad


def _normal_block(a: np.ndarray, center: float, log_scale: float):
    """Гауссово адаптивное априорное N(center, exp(log_scale)^2) для блока групп.

    Returns:
        lp, d/da, d/dcenter, d/dlog_scale
    """
    w = math.exp(log_scale)
    r = (a - center) / w
    lp = float(np.sum(-0.5 * LOG_2PI - log_scale - 0.5 * r ** 2))
    return lp, -r / w, float(np.sum(r) / w), float(np.sum(r ** 2) - a.size)


def _sample_location(prior, gen: np.random.Generator, n: int) -> np.ndarray:
    if isinstance(prior, FlatPrior):
        raise ImproperPriorError("плоское априорное нельзя использовать для симуляции")
    return np.asarray(prior.dist.sample(gen, n), dtype=float)


def _sample_log_positive(prior, gen: np.random.Generator, n: int) -> np.ndarray:
    if isinstance(prior, FlatPrior):
        raise ImproperPriorError("плоское априорное нельзя использовать для симуляции")
    x = np.asarray(prior.dist.sample(gen, n), dtype=float)
    with np.errstate(divide="ignore"):
        if prior.on == "variance":
            return 0.5 * np.log(x)
        if prior.on == "precision":
            return -0.5 * np.log(x)
        return np.log(x)


def _check_location_prior(prior, where: str):
    if isinstance(prior, FlatPrior | TruncatedGaussPrior):
        return
    if not isinstance(prior, FixedPrior) or prior.on != "value" or prior.dist.multivariate:
        raise SpecError(f"{where}: требуется одномерное априорное для коэффициента", field=where)


def _check_scale_prior(prior, where: str):
    if isinstance(prior, FlatPrior):
        return
    if not isinstance(prior, FixedPrior) or prior.dist.multivariate:
        raise SpecError(f"{where}: требуется одномерное априорное для параметра масштаба", field=where)


def _resolve_priors(spec: ModelSpec, cfg: dict) -> dict:
    """Априорные по блокам с подстановкой значений по умолчанию из секции priors."""
    fam = spec.family
    given = spec.priors
    used = set()

    def take(key, default):
        if key in given:
            used.add(key)
            return given[key]
        return default

    intercept_sd = cfg["coefficient_sd"] if spec.standardizes_y else cfg["intercept_sd"]
    slope_sd = cfg["coefficient_sd"] if spec.standardizes_x else cfg["intercept_sd"]
    if fam == "exponential":
        mu0 = cfg["exp_intercept_mu"]
        default_intercept = TruncatedGaussPrior(mu0, cfg["exp_intercept_sigma"], mu0)
        default_slope = TruncatedGaussPrior(0.0, cfg["exp_slope_sigma"], 0.0)
    else:
        default_intercept = FixedPrior(Gauss(0.0, intercept_sd))
        default_slope = FixedPrior(Gauss(0.0, slope_sd))
    default_sigma = FixedPrior(Gamma(cfg["precision_alpha"], cfg["precision_beta"]), on="precision")
    hetero = fam == "anova" and spec.likelihood.heteroscedastic

    out = {"slopes": tuple(take(name, default_slope) for name in spec.predictors)}
    if fam == "anova":
        cell = FixedPrior(Gauss(0.0, cfg["anova_sigma0"]))
        if hetero:
            out["intercept"] = take("mu0", cell)
            out["tau"] = take("tau", FixedPrior(HalfCauchy(cfg["anova_sigma0"]), on="sd"))
            out["alpha"] = take("alpha", FixedPrior(GAMMA_HYPERPRIOR))
            out["beta"] = take("beta", FixedPrior(GAMMA_HYPERPRIOR))
        else:
            out["group"] = take("cell_mean", cell)
            out["sigma"] = take("sigma", default_sigma)
    elif spec.hierarchical:
        location = Gauss(0.0, intercept_sd) if fam in CENTRED_FAMILIES else None
        adaptive = take(
            "group_intercept",
            AdaptivePrior(scale=FixedPrior(HalfCauchy(cfg["group_scale"]), on="sd"), location=location),
        )
        out["group"] = adaptive
        out["omega"] = adaptive.scale
        if adaptive.location is not None:
            out["zeta"] = FixedPrior(adaptive.location)
        else:
            out["intercept"] = take("const", default_intercept)
    else:
        out["intercept"] = take("intercept", default_intercept)

    if fam in ("gauss", "student_t"):
        out["sigma"] = take("sigma", default_sigma)
    if fam == "student_t" or hetero:
        nu_prior = spec.likelihood.nu_prior
        out["nu"] = nu_prior if nu_prior is not None else take("nu", FixedPrior(Exponential(cfg["nu_rate"])))
    if fam == "negative_binomial":
        out["size"] = take("size", FixedPrior(Exponential(cfg["size_rate"])))

    unused = set(given) - used
    if unused:
        logger.warning(f"Априорные {sorted(unused)} не используются моделью {fam}")

    for key in ("intercept", "zeta"):
        if key in out:
            _check_location_prior(out[key], f"priors.{key}")
    for name, prior in zip(spec.predictors, out["slopes"]):
        _check_location_prior(prior, f"priors.{name}")
    if fam == "anova" and not hetero:
        _check_location_prior(out["group"], "priors.cell_mean")
    for key in ("sigma", "omega", "nu", "size", "tau", "alpha", "beta"):
        if key in out:
            _check_scale_prior(out[key], f"priors.{key}")
    return out


def _prior_has_gradient(prior) -> bool:
    if isinstance(prior, FlatPrior | TruncatedGaussPrior):
        return True
    if isinstance(prior, AdaptivePrior):
        return _prior_has_gradient(prior.scale)
    return prior.dist.has_gradient


# ---------------------------------------------------------------------------
# Правдоподобие одного наблюдения
# ---------------------------------------------------------------------------

class _ObservationTerms(NamedTuple):
    ll: np.ndarray
    d_eta: np.ndarray | None = None
    d_log_sigma: np.ndarray | None = None
    d_nu: np.ndarray | None = None
    d_size: np.ndarray | None = None


def _observation_terms(family, y, eta, const, trials, sigma=None, nu=None, size=None) -> _ObservationTerms:
    """Лог-правдоподобие по наблюдениям и производные по линейной форме и дисперсии."""
    if family == "gauss":
        r = (y - eta) / sigma
        ll = -0.5 * LOG_2PI - np.log(sigma) - 0.5 * r ** 2
        return _ObservationTerms(ll, r / sigma, r ** 2 - 1.0)
    if family == "student_t":
        r = (y - eta) / sigma
        r2 = r ** 2
        ll = (
            gammaln(0.5 * (nu + 1.0)) - gammaln(0.5 * nu) - 0.5 * np.log(nu * math.pi)
            - np.log(sigma) - 0.5 * (nu + 1.0) * np.log1p(r2 / nu)
        )
        d_eta = (nu + 1.0) * r / (sigma * (nu + r2))
        d_ls = (nu + 1.0) * r2 / (nu + r2) - 1.0
        d_nu = (
            0.5 * (digamma(0.5 * (nu + 1.0)) - digamma(0.5 * nu)) - 0.5 / nu
            - 0.5 * np.log1p(r2 / nu) + (nu + 1.0) * r2 / (2.0 * nu * (nu + r2))
        )
        return _ObservationTerms(ll, d_eta, d_ls, d_nu)
    if family == "binomial":
        ll = const + y * eta - trials * np.logaddexp(0.0, eta)
        return _ObservationTerms(ll, y - trials * expit(eta))
    if family == "poisson":
        rate = np.exp(eta)
        return _ObservationTerms(const + y * eta - rate, y - rate)
    if family == "negative_binomial":
        t = eta - math.log(size)
        soft = np.logaddexp(0.0, t)
        ll = gammaln(y + size) - gammaln(size) + const - size * soft + y * (t - soft)
        share = expit(-t)  # r / (r + mu)
        d_eta = (y - np.exp(eta)) * share
        d_size = digamma(y + size) - digamma(size) - soft + 1.0 - (size + y) * share / size
        return _ObservationTerms(ll, d_eta, d_size=d_size)
    if family == "exponential":
        if np.any(eta >= 0.0):
            return _ObservationTerms(np.full_like(eta, -math.inf))
        ll = -np.log(-eta) + y / eta
        return _ObservationTerms(ll, -1.0 / eta - y / eta ** 2)
    raise SpecError(f"неизвестное семейство '{family}'")


# ---------------------------------------------------------------------------
# Раскладка параметров и скомпилированная модель
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ParameterLayout:
    names: tuple
    blocks: dict
    derived: tuple

    @property
    def dimension(self) -> int:
        return len(self.names)


def _build_layout(spec: ModelSpec, labels: tuple, priors: dict) -> ParameterLayout:
    p = "z" if spec.standardizes_x else ""
    fam = spec.family
    names, blocks, derived = [], {}, []

    def add(block, items):
        blocks[block] = slice(len(names), len(names) + len(items))
        names.extend(items)

    if fam == "anova":
        if spec.likelihood.heteroscedastic:
            add("intercept", [f"{p}mu0"])
            add("group", [f"{p}mu[{g}]" for g in labels])
            add("log_sigma", [f"log_sigma[{g}]" for g in labels])
            add("log_tau", ["log_tau"])
            add("log_alpha", ["log_alpha"])
            add("log_beta", ["log_beta"])
            add("log_nu", ["log_nu_minus_2"])
            derived += [f"{p}sigma[{g}]" for g in labels] + [f"{p}tau", "alpha", "beta", "nu"]
        else:
            add("group", [f"{p}mu[{g}]" for g in labels])
            add("log_sigma", ["log_sigma"])
            derived.append(f"{p}sigma")
        derived += [f"{p}a0"] + [f"{p}a[{g}]" for g in labels]
        return ParameterLayout(tuple(names), blocks, tuple(derived))

    if spec.hierarchical:
        if "intercept" in priors:
            add("intercept", [f"{p}b_const"])
    else:
        add("intercept", [f"{p}b0"])
    if spec.predictors:
        add("slopes", [f"{p}b[{name}]" for name in spec.predictors])
    if spec.hierarchical:
        add("group", [f"{p}b0[{g}]" for g in labels])
        if "zeta" in priors:
            add("zeta", [f"{p}zeta"])
        add("log_omega", ["log_omega"])
        derived.append(f"{p}omega")
    if fam in ("gauss", "student_t"):
        add("log_sigma", ["log_sigma"])
        derived.append(f"{p}sigma")
    if fam == "student_t":
        add("log_nu", ["log_nu_minus_2"])
        derived.append("nu")
    if fam == "negative_binomial":
        add("log_size", ["log_size"])
        derived.append("size")
    return ParameterLayout(tuple(names), blocks, tuple(derived))


@dataclass(eq=False)
class CompiledModel:
    """Описание модели вместе со стандартизацией и метками групп.

    Не хранит обучающие данные, поэтому восстанавливается из сохранённой подгонки
    и используется для предсказаний.
    """

    spec: ModelSpec
    meta: Standardization
    group_labels: tuple = ()
    priors: dict = field(init=False)
    layout: ParameterLayout = field(init=False)

    def __post_init__(self):
        self.group_labels = tuple(str(g) for g in self.group_labels)
        if self.spec.group is not None and not self.group_labels:
            raise DataError("для групповой модели нужна хотя бы одна группа")
        self.priors = _resolve_priors(self.spec, settings.get_section("priors"))
        self.layout = _build_layout(self.spec, self.group_labels, self.priors)

    # --- свойства ---
    @property
    def dimension(self) -> int:
        return self.layout.dimension

    @property
    def n_groups(self) -> int:
        return len(self.group_labels)

    @property
    def heteroscedastic(self) -> bool:
        return self.spec.family == "anova" and self.spec.likelihood.heteroscedastic

    @property
    def observation_family(self) -> str:
        fam = self.spec.family
        if fam == "anova":
            return "student_t" if self.heteroscedastic else "gauss"
        return "binomial" if fam == "bernoulli" else fam

    @property
    def has_gradient(self) -> bool:
        priors = [v for k, v in self.priors.items() if k != "slopes"] + list(self.priors["slopes"])
        return all(_prior_has_gradient(p) for p in priors)

    @property
    def prefix(self) -> str:
        return "z" if self.spec.standardizes_x else ""

    # --- разбор вектора параметров ---
    def unpack(self, theta) -> dict:
        """Блоки вектора параметров; работает и для матрицы выборок (S x d)."""
        theta = np.asarray(theta, dtype=float)
        blocks = self.layout.blocks

        def take(name, scalar=True):
            if name not in blocks:
                return None
            value = theta[..., blocks[name]]
            return value[..., 0] if scalar else value

        intercept = take("intercept")
        return {
            "intercept": intercept if intercept is not None else np.zeros(theta.shape[:-1]),
            "slopes": take("slopes", scalar=False),
            "group": take("group", scalar=False),
            "zeta": take("zeta"),
            "log_omega": take("log_omega"),
            "log_sigma": take("log_sigma", scalar=not self.heteroscedastic),
            "log_nu": take("log_nu"),
            "log_size": take("log_size"),
            "log_tau": take("log_tau"),
            "log_alpha": take("log_alpha"),
            "log_beta": take("log_beta"),
        }

    def linear_predictor(self, parts: dict, predictors: np.ndarray, gidx: np.ndarray | None, group=None) -> np.ndarray:
        eta = np.asarray(parts["intercept"], dtype=float)[..., None]
        if parts["slopes"] is not None:
            eta = eta + parts["slopes"] @ predictors.T
        group = parts["group"] if group is None else group
        if group is not None and gidx is not None:
            eta = eta + group[..., gidx]
        return eta

    def derive(self, theta) -> np.ndarray:
        parts = self.unpack(theta)
        values = []
        if self.spec.family == "anova":
            if self.heteroscedastic:
                values += list(np.exp(parts["log_sigma"]))
                values += [math.exp(parts["log_tau"]), math.exp(parts["log_alpha"]), math.exp(parts["log_beta"])]
                values.append(2.0 + math.exp(parts["log_nu"]))
                effects = anova_recenter(parts["intercept"], parts["group"])
            else:
                values.append(math.exp(parts["log_sigma"]))
                effects = anova_recenter(0.0, parts["group"])
            values += [effects.a0] + list(effects.a)
            return np.array(values, dtype=float)
        if parts["log_omega"] is not None:
            values.append(math.exp(parts["log_omega"]))
        if parts["log_sigma"] is not None:
            values.append(math.exp(parts["log_sigma"]))
        if parts["log_nu"] is not None:
            values.append(2.0 + math.exp(parts["log_nu"]))
        if parts["log_size"] is not None:
            values.append(math.exp(parts["log_size"]))
        return np.array(values, dtype=float)

    def initial_point(self, gen: np.random.Generator) -> np.ndarray:
        """Равномерно на [-1, 1], усечённые коэффициенты из своих априорных."""
        theta = gen.uniform(-1.0, 1.0, self.dimension)
        blocks = self.layout.blocks
        if isinstance(self.priors.get("intercept"), TruncatedGaussPrior):
            theta[blocks["intercept"].start] = self.priors["intercept"].dist.sample(gen, 1)[0]
        if "slopes" in blocks:
            for j, prior in enumerate(self.priors["slopes"]):
                if isinstance(prior, TruncatedGaussPrior):
                    theta[blocks["slopes"].start + j] = prior.dist.sample(gen, 1)[0]
        return theta

    # --- групповые индексы ---
    def group_index(self, groups, n: int, allow_new: bool = False) -> tuple[np.ndarray | None, tuple]:
        """Индексы групп для строк; новые метки получают номера после известных."""
        if self.spec.group is None:
            return None, ()
        if groups is None or len(groups) != n:
            raise DimensionError(f"нужна метка группы для каждой из {n} строк")
        lookup = {label: i for i, label in enumerate(self.group_labels)}
        new_labels = []
        index = np.empty(n, dtype=int)
        for row, label in enumerate(str(g) for g in groups):
            if label not in lookup:
                if not allow_new:
                    raise DataError(f"группа '{label}' отсутствует в модели")
                lookup[label] = len(lookup)
                new_labels.append(label)
            index[row] = lookup[label]
        return index, tuple(new_labels)

    # --- симуляция ---
    def _new_groups(self, parts: dict, count: int, gen: np.random.Generator):
        """Параметры новых групп из популяционного распределения для каждой выборки."""
        s = np.asarray(parts["intercept"]).shape[0]
        if self.spec.family == "anova" and not self.heteroscedastic:
            raise DataError("в модели ANOVA без иерархии нельзя предсказывать для новых групп")
        noise = gen.standard_normal((s, count))
        if self.heteroscedastic:
            mu = np.exp(parts["log_tau"])[:, None] * noise
            shape = np.exp(parts["log_alpha"])[:, None]
            rate = np.exp(parts["log_beta"])[:, None]
            sigma = gen.gamma(shape, 1.0 / rate, size=(s, count))
            return mu, np.log(sigma)
        center = parts["zeta"][:, None] if parts["zeta"] is not None else 0.0
        return center + np.exp(parts["log_omega"])[:, None] * noise, None

    def predictive_parameters(
        self,
        free: np.ndarray,
        X_new: DesignMatrix,
        gen: np.random.Generator,
        groups=None,
        exposure=None,
    ) -> dict:
        """Линейная форма и параметры дисперсии для новых строк по каждой выборке.

        Returns:
            dict с ключами eta (S x m), sigma (S x m или None), nu и size (S или None)
        """
        free = np.atleast_2d(np.asarray(free, dtype=float))
        if free.shape[1] != self.dimension:
            raise DimensionError(f"выборки размерности {free.shape[1]}, модель {self.dimension}")
        predictors = self.meta.transform_design(X_new)
        parts = self.unpack(free)
        m = X_new.n_rows
        gidx, new_labels = self.group_index(groups, m, allow_new=True)
        group, log_sigma = parts["group"], parts["log_sigma"]
        if new_labels:
            logger.info(f"Новые группы {list(new_labels)} моделируются из популяционного распределения")
            new_group, new_log_sigma = self._new_groups(parts, len(new_labels), gen)
            group = np.concatenate([group, new_group], axis=1)
            if new_log_sigma is not None:
                log_sigma = np.concatenate([log_sigma, new_log_sigma], axis=1)
        eta = self.linear_predictor(parts, predictors, gidx, group=group)
        if exposure is not None:
            exposure = np.asarray(exposure, dtype=float)
            if exposure.shape != (m,) or np.any(exposure <= 0.0):
                raise DomainError("exposure должен быть положительным для каждой строки")
            eta = eta - np.log(exposure)[None, :]
        sigma = None
        if self.heteroscedastic:
            sigma = np.exp(log_sigma)[:, gidx]
        elif log_sigma is not None:
            sigma = np.broadcast_to(np.exp(log_sigma)[:, None], eta.shape)
        return {
            "eta": eta,
            "sigma": sigma,
            "nu": 2.0 + np.exp(parts["log_nu"]) if parts["log_nu"] is not None else None,
            "size": np.exp(parts["log_size"]) if parts["log_size"] is not None else None,
        }

    def draw_observations(self, params: dict, column: int, gen: np.random.Generator, trials: int = 1) -> np.ndarray:
        """По одному новому наблюдению на выборку для столбца column (на исходной шкале y)."""
        eta = params["eta"][:, column]
        fam = self.observation_family
        if fam == "gauss":
            z = gen.normal(eta, params["sigma"][:, column])
        elif fam == "student_t":
            z = eta + params["sigma"][:, column] * gen.standard_t(params["nu"])
        else:
            mean = apply_inverse_link(self.spec.link, eta)
            if fam == "binomial":
                return gen.binomial(int(trials), mean).astype(float)
            if fam == "poisson":
                return gen.poisson(mean).astype(float)
            if fam == "negative_binomial":
                size = params["size"]
                return gen.negative_binomial(size, size / (size + mean)).astype(float)
            return gen.exponential(1.0 / mean)
        return self.meta.inverse_y(z)

    def sample_prior(self, gen: np.random.Generator, n: int) -> np.ndarray:
        """Выборки вектора параметров из априорных (n x d).

        Raises:
            ImproperPriorError: среди априорных есть плоское
        """
        blocks, priors = self.layout.blocks, self.priors
        out = np.empty((n, self.dimension))

        def put(block, values):
            out[:, blocks[block]] = np.asarray(values, dtype=float).reshape(n, -1)

        if "intercept" in blocks:
            put("intercept", _sample_location(priors["intercept"], gen, n))
        if "slopes" in blocks:
            put("slopes", np.column_stack([_sample_location(p, gen, n) for p in priors["slopes"]]))
        if self.spec.family == "anova":
            if self.heteroscedastic:
                log_tau = _sample_log_positive(priors["tau"], gen, n)
                alpha = np.exp(_sample_log_positive(priors["alpha"], gen, n))
                beta = np.exp(_sample_log_positive(priors["beta"], gen, n))
                put("log_tau", log_tau)
                put("log_alpha", np.log(alpha))
                put("log_beta", np.log(beta))
                put("group", np.exp(log_tau)[:, None] * gen.standard_normal((n, self.n_groups)))
                sigma = gen.gamma(alpha[:, None], 1.0 / beta[:, None], size=(n, self.n_groups))
                put("log_sigma", np.log(sigma))
            else:
                put("group", np.column_stack([_sample_location(priors["group"], gen, n) for _ in self.group_labels]))
        elif self.spec.hierarchical:
            center = np.zeros(n)
            if "zeta" in blocks:
                center = _sample_location(priors["zeta"], gen, n)
                put("zeta", center)
            log_omega = _sample_log_positive(priors["omega"], gen, n)
            put("log_omega", log_omega)
            put("group", center[:, None] + np.exp(log_omega)[:, None] * gen.standard_normal((n, self.n_groups)))
        if "log_sigma" in blocks and not self.heteroscedastic:
            put("log_sigma", _sample_log_positive(priors["sigma"], gen, n))
        if "log_nu" in blocks:
            put("log_nu", _sample_log_positive(priors["nu"], gen, n))
        if "log_size" in blocks:
            put("log_size", _sample_log_positive(priors["size"], gen, n))
        return out

    # --- сериализация ---
    def to_dict(self) -> dict:
        return {
            "spec": model_spec_to_dict(self.spec),
            "standardization": self.meta.to_dict(),
            "group_labels": list(self.group_labels),
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "CompiledModel":
        try:
            spec = parse_model_spec(obj["spec"])
            meta = Standardization.from_dict(obj["standardization"])
            labels = tuple(obj.get("group_labels", ()))
        except KeyError as e:
            raise MetaMismatchError(f"в описании подгонки нет поля {e}")
        if meta.x_names != spec.predictors:
            raise MetaMismatchError("предикторы стандартизации не совпадают с описанием модели")
        return cls(spec, meta, labels)


# ---------------------------------------------------------------------------
# Апостериорная плотность на обучающих данных
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class _TrainingData:
    y: np.ndarray
    predictors: np.ndarray
    gidx: np.ndarray | None
    trials: np.ndarray
    offset: np.ndarray | float
    const: np.ndarray | float


class _GlmDensity:
    """Лог-плотность, градиент и поточечное правдоподобие для одного набора данных."""

    def __init__(self, model: CompiledModel, data: _TrainingData):
        self.model = model
        self.data = data

    def _likelihood(self, parts: dict) -> _ObservationTerms:
        d = self.data
        eta = self.model.linear_predictor(parts, d.predictors, d.gidx) + d.offset
        sigma = None
        if parts["log_sigma"] is not None:
            sigma = np.exp(parts["log_sigma"])
            if self.model.heteroscedastic:
                sigma = sigma[d.gidx]
        nu = 2.0 + math.exp(parts["log_nu"]) if parts["log_nu"] is not None else None
        size = math.exp(parts["log_size"]) if parts["log_size"] is not None else None
        with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
            return _observation_terms(
                self.model.observation_family, d.y, eta, d.const, d.trials, sigma=sigma, nu=nu, size=size
            )

    def _prior(self, parts: dict, grad: np.ndarray | None) -> float:
        """Сумма лог-априорных всех блоков; градиент накапливается в grad."""
        model, blocks, priors = self.model, self.model.layout.blocks, self.model.priors
        want = grad is not None
        total = 0.0

        def add(value, block, g):
            nonlocal total
            total += value
            if want and math.isfinite(value):
                grad[blocks[block]] += g

        if "intercept" in blocks:
            lp, g = _location_term(priors["intercept"], parts["intercept"], want)
            add(lp, "intercept", g)
        if "slopes" in blocks:
            start = blocks["slopes"].start
            for j, prior in enumerate(priors["slopes"]):
                lp, g = _location_term(prior, parts["slopes"][j], want)
                total += lp
                if want and math.isfinite(lp):
                    grad[start + j] += g
        if not math.isfinite(total):
            return -math.inf

        if model.heteroscedastic:
            # mu[g] ~ N(0, tau^2), sigma[g] ~ Gamma(alpha, beta)
            lp, da, _, dlt = _normal_block(parts["group"], 0.0, parts["log_tau"])
            add(lp, "group", da)
            add(0.0, "log_tau", dlt)
            lp, g = _positive_term(priors["tau"], parts["log_tau"], want)
            add(lp, "log_tau", g)
            ls, log_beta = parts["log_sigma"], parts["log_beta"]
            alpha, beta = math.exp(parts["log_alpha"]), math.exp(log_beta)
            sigma = np.exp(ls)
            lp = float(np.sum(alpha * log_beta - gammaln(alpha) + alpha * ls - beta * sigma))
            add(lp, "log_sigma", alpha - beta * sigma)
            add(0.0, "log_alpha", alpha * float(np.sum(log_beta - digamma(alpha) + ls)))
            add(0.0, "log_beta", float(np.sum(alpha - beta * sigma)))
            for key, block in (("alpha", "log_alpha"), ("beta", "log_beta")):
                lp, g = _positive_term(priors[key], parts[block], want)
                add(lp, block, g)
        elif model.spec.family == "anova":
            lp, g = _location_term(priors["group"], parts["group"], want)
            add(lp, "group", g)
        elif model.spec.hierarchical:
            center = parts["zeta"] if parts["zeta"] is not None else 0.0
            lp, da, dc, dlw = _normal_block(parts["group"], center, parts["log_omega"])
            add(lp, "group", da)
            add(0.0, "log_omega", dlw)
            if "zeta" in blocks:
                lp, g = _location_term(priors["zeta"], center, want)
                add(lp, "zeta", g)
                add(0.0, "zeta", dc)
            lp, g = _positive_term(priors["omega"], parts["log_omega"], want)
            add(lp, "log_omega", g)

        for key, block in (("sigma", "log_sigma"), ("nu", "log_nu"), ("size", "log_size")):
            if block in blocks and not (block == "log_sigma" and model.heteroscedastic):
                lp, g = _positive_term(priors[key], parts[block], want)
                add(lp, block, g)
        return total if math.isfinite(total) else -math.inf

    def _evaluate(self, theta, want_grad: bool):
        theta = np.asarray(theta, dtype=float)
        model, blocks, d = self.model, self.model.layout.blocks, self.data
        parts = model.unpack(theta)
        grad = np.zeros_like(theta) if want_grad else None
        lp = self._prior(parts, grad)
        if not math.isfinite(lp):
            return -math.inf, (np.full_like(theta, np.nan) if want_grad else None)
        terms = self._likelihood(parts)
        total = lp + float(np.sum(terms.ll))
        if not math.isfinite(total):
            return -math.inf, (np.full_like(theta, np.nan) if want_grad else None)
        if not want_grad:
            return total, None

        d_eta = terms.d_eta
        if "intercept" in blocks:
            grad[blocks["intercept"]] += float(np.sum(d_eta))
        if "slopes" in blocks:
            grad[blocks["slopes"]] += d.predictors.T @ d_eta
        if "group" in blocks:
            grad[blocks["group"]] += np.bincount(d.gidx, weights=d_eta, minlength=model.n_groups)
        if terms.d_log_sigma is not None:
            if model.heteroscedastic:
                grad[blocks["log_sigma"]] += np.bincount(d.gidx, weights=terms.d_log_sigma, minlength=model.n_groups)
            else:
                grad[blocks["log_sigma"]] += float(np.sum(terms.d_log_sigma))
        if terms.d_nu is not None:
            grad[blocks["log_nu"]] += float(np.sum(terms.d_nu)) * math.exp(parts["log_nu"])
        if terms.d_size is not None:
            grad[blocks["log_size"]] += float(np.sum(terms.d_size)) * math.exp(parts["log_size"])
        return total, grad

    def log_density(self, theta) -> float:
        return self._evaluate(theta, False)[0]

    def gradient(self, theta) -> np.ndarray:
        return self._evaluate(theta, True)[1]

    def pointwise(self, theta) -> np.ndarray:
        return np.asarray(self._likelihood(self.model.unpack(theta)).ll, dtype=float)

    def log_likelihood(self, theta) -> float:
        return float(np.sum(self.pointwise(theta)))

    # --- полные условные для Гиббса ---
    def full_conditionals(self) -> tuple | None:
        """Условные распределения для гомоскедастичной Гауссовой регрессии и ANOVA.

        Коэффициенты положения должны иметь Гауссовы или плоские априорные,
        дисперсия: Gamma на точность или InverseGamma на дисперсию.
        """
        model, priors, blocks = self.model, self.model.priors, self.model.layout.blocks
        fam = model.spec.family
        if model.heteroscedastic or model.spec.hierarchical or fam not in ("gauss", "anova"):
            return None
        sigma_prior = priors["sigma"]
        if not isinstance(sigma_prior, FixedPrior):
            return None
        if sigma_prior.on == "precision" and isinstance(sigma_prior.dist, Gamma):
            shape0, rate0 = sigma_prior.dist.alpha, sigma_prior.dist.beta
        elif sigma_prior.on == "variance" and isinstance(sigma_prior.dist, InverseGamma):
            shape0, rate0 = sigma_prior.dist.alpha, sigma_prior.dist.beta
        else:
            return None

        y = self.data.y
        if fam == "anova":
            design = np.zeros((y.size, model.n_groups))
            design[np.arange(y.size), self.data.gidx] = 1.0
            location = [priors["group"]] * model.n_groups
            loc_slice = blocks["group"]
        else:
            design = np.column_stack([np.ones(y.size), self.data.predictors])
            location = [priors["intercept"], *priors["slopes"]]
            loc_slice = slice(0, design.shape[1])
        prior_mean, prior_prec = [], []
        for prior in location:
            if isinstance(prior, FlatPrior):
                prior_mean.append(0.0)
                prior_prec.append(0.0)
            elif isinstance(prior, FixedPrior) and isinstance(prior.dist, Gauss):
                prior_mean.append(prior.dist.mu)
                prior_prec.append(1.0 / prior.dist.sigma ** 2)
            else:
                return None
        sigma_index = blocks["log_sigma"].start
        col_sq = np.einsum("ij,ij->j", design, design)

        def location_draw(j: int) -> Callable:
            col = design[:, j]

            def draw(theta, gen):
                sigma2 = math.exp(2.0 * theta[sigma_index])
                beta = theta[loc_slice]
                partial = y - design @ beta + col * beta[j]
                prec = col_sq[j] / sigma2 + prior_prec[j]
                mean = (col @ partial / sigma2 + prior_prec[j] * prior_mean[j]) / prec
                return gen.normal(mean, 1.0 / math.sqrt(prec))

            return draw

        def sigma_draw(theta, gen):
            resid = y - design @ theta[loc_slice]
            shape = shape0 + 0.5 * y.size
            rate = rate0 + 0.5 * float(resid @ resid)
            return 0.5 * math.log(rate / gen.standard_gamma(shape))

        # блок положения, затем log_sigma последней координатой
        return tuple(location_draw(j) for j in range(design.shape[1])) + (sigma_draw,)


def _check_support(family: str, y: np.ndarray, trials: np.ndarray):
    if not np.all(np.isfinite(y)):
        raise DomainError("отклик содержит нечисловые значения")
    integer = np.all(y == np.round(y))
    if family in ("bernoulli", "binomial"):
        if not integer or np.any(y < 0) or np.any(y > trials):
            raise DomainError(f"{family}: отклик должен быть целым в [0, trials]")
    elif family in ("poisson", "negative_binomial"):
        if not integer or np.any(y < 0):
            raise DomainError(f"{family}: отклик должен быть неотрицательным целым")
    elif family == "exponential" and np.any(y < 0):
        raise DomainError("exponential: отклик должен быть неотрицательным")


def compile(spec: ModelSpec, y, X: DesignMatrix, groups=None, trials=None, exposure=None) -> LogTarget:
    """Компилирует описание модели и данные в апостериорную LogTarget.

    Args:
        spec: описание модели
        y: отклик длины n
        X: матрица плана со столбцами ("intercept", *spec.predictors)
        groups: метки групп по строкам (для групповых моделей)
        trials: число испытаний по строкам (binomial)
        exposure: экспозиция по строкам (poisson), входит смещением -ln(exposure)

    Returns:
        LogTarget с model=CompiledModel
    """
    y = np.asarray(y, dtype=float)
    n = X.n_rows
    if y.shape != (n,):
        raise DimensionError(f"длина отклика {y.shape} не равна числу строк {n}")
    if X.column_names != ("intercept",) + tuple(spec.predictors):
        raise DimensionError(f"столбцы матрицы {list(X.column_names)} не совпадают с описанием модели")
    X.require_varying()

    fam = spec.family
    if trials is None:
        trials = np.ones(n)
    trials = np.asarray(trials, dtype=float)
    if trials.shape != (n,) or np.any(trials < 1) or np.any(trials != np.round(trials)):
        raise DomainError("trials должен быть положительным целым для каждой строки")
    if fam == "bernoulli" and np.any(trials != 1):
        raise DomainError("bernoulli не принимает trials")
    _check_support(fam, y, trials)

    offset = 0.0
    if exposure is not None:
        exposure = np.asarray(exposure, dtype=float)
        if exposure.shape != (n,) or np.any(exposure <= 0.0):
            raise DomainError("exposure должен быть положительным для каждой строки")
        offset = -np.log(exposure)

    labels = ()
    if spec.group is not None:
        if groups is None or len(groups) != n:
            raise DimensionError(f"нужна метка группы для каждой из {n} строк")
        labels = tuple(sorted({str(g) for g in groups}))

    if spec.standardize and fam != "exponential":
        zy, zX, meta = standardize(y, X, metric=spec.standardizes_y, response=spec.response)
    else:
        zy, zX = y, X
        meta = Standardization.identity(X.predictor_names, has_sigma=fam in ("gauss", "student_t"))

    model = CompiledModel(spec, meta, labels)
    gidx, _ = model.group_index(groups, n)
    obs = model.observation_family
    if obs == "binomial":
        const = gammaln(trials + 1.0) - gammaln(y + 1.0) - gammaln(trials - y + 1.0)
    elif obs in ("poisson", "negative_binomial"):
        const = -gammaln(y + 1.0)
    else:
        const = 0.0
    data = _TrainingData(zy, zX.predictors, gidx, trials, offset, const)
    density = _GlmDensity(model, data)

    conditionals = density.full_conditionals()
    logger.info(
        f"Модель {fam}/{spec.link.value}: {n} наблюдений, {model.dimension} параметров"
        + (f", {model.n_groups} групп" if labels else "")
        + (", доступен Гиббс" if conditionals else "")
    )
    return LogTarget(
        dimension=model.dimension,
        param_names=model.layout.names,
        log_density=density.log_density,
        gradient=density.gradient if model.has_gradient else None,
        full_conditionals=conditionals,
        derived_names=model.layout.derived,
        derive=model.derive,
        init=model.initial_point,
        log_likelihood=density.log_likelihood,
        pointwise_log_lik=density.pointwise,
        model=model,
    )


# ---------------------------------------------------------------------------
# Параметры на исходной шкале
# ---------------------------------------------------------------------------

def raw_scale_draws(model: CompiledModel, column: Callable[[str], np.ndarray]) -> dict:
    """Выборки параметров на исходной шкале данных.

    column(name) возвращает выборки параметра или производной величины по имени.
    """
    meta, spec, p = model.meta, model.spec, model.prefix
    c, m = meta.y_scale, meta.y_shift
    out = {}
    if spec.family == "anova":
        for g in model.group_labels:
            cell = column(f"{p}mu[{g}]")
            if model.heteroscedastic:
                cell = cell + column(f"{p}mu0")
            out[f"mu[{g}]"] = cell * c + m
        out["a0"] = column(f"{p}a0") * c + m
        for g in model.group_labels:
            out[f"a[{g}]"] = column(f"{p}a[{g}]") * c
        if model.heteroscedastic:
            for g in model.group_labels:
                out[f"sigma[{g}]"] = column(f"{p}sigma[{g}]") * c
            out["tau"] = column(f"{p}tau") * c
            out["nu"] = column("nu")
        else:
            out["sigma"] = column(f"{p}sigma") * c
        return out

    slopes = [column(f"{p}b[{name}]") for name in spec.predictors]
    sigma = [column(f"{p}sigma")] if meta.has_sigma else []

    def rows(intercept):
        return _destandardize_rows(meta, np.column_stack([intercept, *slopes, *sigma]))

    if spec.hierarchical:
        base = column(f"{p}b_const") if "intercept" in model.layout.blocks else 0.0
        for g in model.group_labels:
            out[f"b0[{g}]"] = rows(column(f"{p}b0[{g}]") + base)[:, 0]
        center = column(f"{p}zeta") if "zeta" in model.layout.blocks else column(f"{p}b_const")
        raw = rows(center)
        out["omega"] = column(f"{p}omega") * c
    else:
        raw = rows(column(f"{p}b0"))
    out["b0"] = raw[:, 0]
    for j, name in enumerate(spec.predictors):
        out[f"b[{name}]"] = raw[:, 1 + j]
    if meta.has_sigma:
        out["sigma"] = raw[:, -1]
    if spec.family == "student_t":
        out["nu"] = column("nu")
    if spec.family == "negative_binomial":
        out["size"] = column("size")
    return out


def destandardize_draws(model: CompiledModel, chains: ChainSet) -> pd.DataFrame:
    """Таблица выборок на исходной шкале: chain, iteration и параметры."""
    values = raw_scale_draws(model, chains.pooled)
    frame = pd.DataFrame(values)
    frame.insert(0, "iteration", np.tile(np.arange(1, chains.n_draws + 1), chains.n_chains))
    frame.insert(0, "chain", np.repeat(np.arange(1, chains.n_chains + 1), chains.n_draws))
    return frame
