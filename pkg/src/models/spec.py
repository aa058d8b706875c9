"""
Декларативное описание GLM: правдоподобие, связь, матрица плана, априорные
"""
import logging
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.special import expit

from ..distributions.families import Distribution, Gauss, TruncatedGauss, from_dict
from ..utils.errors import DimensionError, DomainError, ParameterError, SpecError, ZeroVarianceError

logger = logging.getLogger("bayescore")


class LinkFunction(str, Enum):
    IDENTITY = "identity"
    LOGISTIC = "logistic"
    NATURAL_EXP = "natural_exp"
    NEGATIVE_INVERSE = "negative_inverse"


def apply_inverse_link(link: LinkFunction, z):
    """Обратная функция связи f^-1(z)."""
    arr = np.asarray(z, dtype=float)
    link = LinkFunction(link)
    if link is LinkFunction.IDENTITY:
        out = arr
    elif link is LinkFunction.LOGISTIC:
        out = expit(arr)
    elif link is LinkFunction.NATURAL_EXP:
        out = np.exp(arr)
    else:
        if np.any(arr >= 0):
            raise DomainError("отрицательная обратная связь требует z < 0")
        out = -1.0 / arr
    return float(out) if out.ndim == 0 else out


# семейство правдоподобия -> допустимая связь
PAIRINGS = {
    "gauss": LinkFunction.IDENTITY,
    "student_t": LinkFunction.IDENTITY,
    "anova": LinkFunction.IDENTITY,
    "bernoulli": LinkFunction.LOGISTIC,
    "binomial": LinkFunction.LOGISTIC,
    "poisson": LinkFunction.NATURAL_EXP,
    "negative_binomial": LinkFunction.NATURAL_EXP,
    "exponential": LinkFunction.NEGATIVE_INVERSE,
}
METRIC_FAMILIES = ("gauss", "student_t", "anova")
DISPERSION_SCALES = ("value", "sd", "variance", "precision")


# --- априорные ---

@dataclass(frozen=True)
class FixedPrior:
    """Фиксированное распределение; для параметров масштаба on задаёт,
    к какой величине оно относится: sd, variance или precision."""

    dist: Distribution
    on: str = "value"

    def __post_init__(self):
        if self.on not in DISPERSION_SCALES:
            raise SpecError(f"неизвестная шкала априорного '{self.on}'")


@dataclass(frozen=True)
class AdaptivePrior:
    """Адаптивное Гауссово априорное для блока групповых интерсептов.

    location = None означает нулевой центр и отдельную константу b_const.
    """

    scale: FixedPrior
    location: Distribution | None = None


@dataclass(frozen=True)
class TruncatedGaussPrior:
    mu0: float
    sigma0: float
    upper_bound: float

    def __post_init__(self):
        if not math.isfinite(self.upper_bound):
            raise SpecError("граница усечения должна быть конечной")
        if not self.sigma0 > 0:
            raise SpecError("sigma0 усечённого Гаусса должно быть > 0")

    @property
    def dist(self) -> TruncatedGauss:
        return TruncatedGauss(self.mu0, self.sigma0, upper=self.upper_bound)


@dataclass(frozen=True)
class FlatPrior:
    """Несобственное равномерное априорное."""


PriorSpec = FixedPrior | AdaptivePrior | TruncatedGaussPrior | FlatPrior


@dataclass(frozen=True)
class Likelihood:
    family: str
    nu_prior: FixedPrior | None = None
    trials: str | None = None
    exposure: str | None = None
    heteroscedastic: bool = False


@dataclass(frozen=True, eq=False)
class ModelSpec:
    likelihood: Likelihood
    link: LinkFunction
    response: str
    predictors: tuple = ()
    group: str | None = None
    priors: dict = field(default_factory=dict)
    sampler: dict = field(default_factory=dict)
    standardize: bool = True

    @property
    def family(self) -> str:
        return self.likelihood.family

    @property
    def hierarchical(self) -> bool:
        return self.group is not None and self.family != "anova"

    @property
    def standardizes_x(self) -> bool:
        return self.standardize and self.family != "exponential"

    @property
    def standardizes_y(self) -> bool:
        return self.standardize and self.family in METRIC_FAMILIES


@dataclass(frozen=True, eq=False)
class DesignMatrix:
    """Матрица плана n x (k+1), первый столбец из единиц."""

    values: np.ndarray
    column_names: tuple

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "column_names", tuple(self.column_names))
        if values.ndim != 2 or values.shape[1] != len(self.column_names):
            raise DimensionError(f"матрица плана {values.shape} не согласована с {len(self.column_names)} именами")
        if values.shape[1] < 1 or not np.all(values[:, 0] == 1.0):
            raise DimensionError("первый столбец матрицы плана должен состоять из единиц")
        if not np.all(np.isfinite(values)):
            raise DomainError("матрица плана содержит нечисловые значения")

    @classmethod
    def from_columns(cls, columns, names) -> "DesignMatrix":
        """Добавляет столбец единиц к предикторам (n x k)."""
        x = np.asarray(columns, dtype=float)
        if x.ndim == 1:
            x = x[:, None] if len(names) == 1 else x.reshape(-1, len(names))
        n = x.shape[0]
        return cls(np.column_stack([np.ones(n), x]) if x.size else np.ones((n, 1)), ("intercept",) + tuple(names))

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    @property
    def predictors(self) -> np.ndarray:
        return self.values[:, 1:]

    @property
    def predictor_names(self) -> tuple:
        return self.column_names[1:]

    def require_varying(self):
        """Кроме первого, ни один столбец не должен быть константой."""
        for j, name in enumerate(self.predictor_names, start=1):
            col = self.values[:, j]
            if col.size < 2 or np.all(col == col[0]):
                raise ZeroVarianceError(name)


# ---------------------------------------------------------------------------
# Разбор JSON-описания модели
# ---------------------------------------------------------------------------

TOP_LEVEL_FIELDS = {"likelihood", "link", "response", "predictors", "group", "priors", "sampler", "standardize"}
LIKELIHOOD_FIELDS = {"family", "nu_prior", "trials", "exposure", "heteroscedastic"}
SAMPLER_FIELDS = {
    "n_chains", "n_iter", "n_warmup", "thin", "algorithm", "step_scale",
    "step_size", "n_leapfrog", "seed", "max_init_attempts",
}
SPECIAL_PRIOR_KEYS = {
    "intercept", "sigma", "nu", "size", "group_intercept", "const",
    "cell_mean", "mu0", "tau", "alpha", "beta",
}


def _parse_distribution(obj, where: str) -> Distribution:
    try:
        return from_dict(obj)
    except ParameterError as e:
        raise SpecError(f"{where}: {e}", field=where)


def parse_prior(obj, where: str) -> PriorSpec:
    """Разбор одного априорного.

    Формы:
        "flat"
        {"family": ...}                            фиксированное
        {"precision" | "variance" | "sd": {...}}   фиксированное для масштаба
        {"adaptive": {"location": {...} | null, "scale": {...}}}
        {"truncated_gauss": {"mu0", "sigma0", "upper_bound"}}
    """
    if obj == "flat":
        return FlatPrior()
    if not isinstance(obj, dict):
        raise SpecError(f"{where}: неверная форма априорного", field=where)
    if "family" in obj:
        return FixedPrior(_parse_distribution(obj, where))
    if len(obj) != 1:
        raise SpecError(f"{where}: ожидается ровно один ключ, получено {sorted(obj)}", field=where)
    key, value = next(iter(obj.items()))
    if key in ("precision", "variance", "sd", "value"):
        return FixedPrior(_parse_distribution(value, where), on=key)
    if key == "adaptive":
        if not isinstance(value, dict) or set(value) - {"location", "scale"} or "scale" not in value:
            raise SpecError(f"{where}: adaptive требует поля scale и location", field=where)
        scale = parse_prior(value["scale"], f"{where}.scale")
        if not isinstance(scale, FixedPrior):
            raise SpecError(f"{where}.scale: требуется фиксированное распределение", field=f"{where}.scale")
        location = value.get("location")
        location = _parse_distribution(location, f"{where}.location") if location is not None else None
        if location is not None and not isinstance(location, Gauss):
            raise SpecError(f"{where}.location: гиперприорное центра должно быть Гауссовым", field=f"{where}.location")
        return AdaptivePrior(scale=scale, location=location)
    if key == "truncated_gauss":
        if not isinstance(value, dict) or set(value) != {"mu0", "sigma0", "upper_bound"}:
            raise SpecError(f"{where}: truncated_gauss требует mu0, sigma0, upper_bound", field=where)
        return TruncatedGaussPrior(float(value["mu0"]), float(value["sigma0"]), float(value["upper_bound"]))
    raise SpecError(f"{where}: неизвестный вид априорного '{key}'", field=where)


def _parse_likelihood(obj) -> Likelihood:
    if isinstance(obj, str):
        obj = {"family": obj}
    if not isinstance(obj, dict) or "family" not in obj:
        raise SpecError("likelihood: требуется имя семейства", field="likelihood")
    unknown = set(obj) - LIKELIHOOD_FIELDS
    if unknown:
        raise SpecError(f"likelihood: неизвестные поля {sorted(unknown)}", field="likelihood")
    family = str(obj["family"]).lower()
    if family not in PAIRINGS:
        raise SpecError(f"likelihood: неизвестное семейство '{obj['family']}'", field="likelihood")
    nu_prior = obj.get("nu_prior")
    if nu_prior is not None:
        if family != "student_t":
            raise SpecError("likelihood.nu_prior допустимо только для student_t", field="likelihood.nu_prior")
        nu_prior = parse_prior(nu_prior, "likelihood.nu_prior")
    if obj.get("trials") is not None and family != "binomial":
        raise SpecError("likelihood.trials допустимо только для binomial", field="likelihood.trials")
    if obj.get("exposure") is not None and family != "poisson":
        raise SpecError("likelihood.exposure допустимо только для poisson", field="likelihood.exposure")
    if obj.get("heteroscedastic") and family != "anova":
        raise SpecError("likelihood.heteroscedastic допустимо только для anova", field="likelihood.heteroscedastic")
    return Likelihood(
        family=family,
        nu_prior=nu_prior,
        trials=obj.get("trials"),
        exposure=obj.get("exposure"),
        heteroscedastic=bool(obj.get("heteroscedastic", False)),
    )


def parse_model_spec(obj: dict) -> ModelSpec:
    """Разбирает JSON-описание модели, отвергая неизвестные поля.

    Args:
        obj: словарь из JSON-файла модели

    Returns:
        ModelSpec

    Raises:
        SpecError: с именем проблемного поля в field
    """
    if not isinstance(obj, dict):
        raise SpecError("описание модели должно быть JSON-объектом")
    unknown = set(obj) - TOP_LEVEL_FIELDS
    if unknown:
        name = sorted(unknown)[0]
        raise SpecError(f"неизвестное поле '{name}'", field=name)
    if "likelihood" not in obj:
        raise SpecError("не задано поле likelihood", field="likelihood")
    if "response" not in obj or not isinstance(obj["response"], str):
        raise SpecError("не задано поле response", field="response")
    likelihood = _parse_likelihood(obj["likelihood"])

    link_name = obj.get("link", PAIRINGS[likelihood.family].value)
    try:
        link = LinkFunction(str(link_name).lower())
    except ValueError:
        raise SpecError(f"link: неизвестная функция связи '{link_name}'", field="link")
    if PAIRINGS[likelihood.family] is not link:
        raise SpecError(
            f"link: семейство {likelihood.family} сочетается только со связью {PAIRINGS[likelihood.family].value}",
            field="link",
        )

    predictors = obj.get("predictors", [])
    if not isinstance(predictors, list) or not all(isinstance(p, str) for p in predictors):
        raise SpecError("predictors должен быть списком имён столбцов", field="predictors")
    if len(set(predictors)) != len(predictors):
        raise SpecError("predictors содержит повторы", field="predictors")
    group = obj.get("group")
    if group is not None and not isinstance(group, str):
        raise SpecError("group должен быть именем столбца", field="group")
    if group is not None and likelihood.family == "exponential":
        raise SpecError("group недоступен для exponential", field="group")
    if likelihood.family == "anova":
        if predictors:
            raise SpecError("anova не принимает предикторы, только group", field="predictors")
        if group is None:
            raise SpecError("anova требует столбец group", field="group")

    priors_obj = obj.get("priors", {})
    if not isinstance(priors_obj, dict):
        raise SpecError("priors должен быть объектом", field="priors")
    priors = {}
    for key, value in priors_obj.items():
        if key not in SPECIAL_PRIOR_KEYS and key not in predictors:
            raise SpecError(f"priors.{key}: нет такого параметра", field=f"priors.{key}")
        prior = parse_prior(value, f"priors.{key}")
        if isinstance(prior, AdaptivePrior) and key != "group_intercept":
            raise SpecError(f"priors.{key}: адаптивное априорное допустимо только для group_intercept", field=f"priors.{key}")
        if key == "group_intercept" and not isinstance(prior, AdaptivePrior):
            raise SpecError("priors.group_intercept: требуется адаптивное априорное", field="priors.group_intercept")
        priors[key] = prior
    if "group_intercept" in priors and (group is None or likelihood.family == "anova"):
        raise SpecError("priors.group_intercept требует group", field="priors.group_intercept")

    sampler = obj.get("sampler", {})
    if not isinstance(sampler, dict):
        raise SpecError("sampler должен быть объектом", field="sampler")
    unknown = set(sampler) - SAMPLER_FIELDS
    if unknown:
        name = sorted(unknown)[0]
        raise SpecError(f"sampler.{name}: неизвестное поле", field=f"sampler.{name}")

    standardize = obj.get("standardize", True)
    if not isinstance(standardize, bool):
        raise SpecError("standardize должен быть true/false", field="standardize")

    return ModelSpec(
        likelihood=likelihood,
        link=link,
        response=obj["response"],
        predictors=tuple(predictors),
        group=group,
        priors=priors,
        sampler=dict(sampler),
        standardize=standardize,
    )


def prior_to_dict(prior: PriorSpec):
    if isinstance(prior, FlatPrior):
        return "flat"
    if isinstance(prior, FixedPrior):
        return prior.dist.to_dict() if prior.on == "value" else {prior.on: prior.dist.to_dict()}
    if isinstance(prior, TruncatedGaussPrior):
        return {"truncated_gauss": {"mu0": prior.mu0, "sigma0": prior.sigma0, "upper_bound": prior.upper_bound}}
    return {
        "adaptive": {
            "location": prior.location.to_dict() if prior.location is not None else None,
            "scale": prior_to_dict(prior.scale),
        }
    }


def model_spec_to_dict(spec: ModelSpec) -> dict:
    lik = {"family": spec.family}
    if spec.likelihood.nu_prior is not None:
        lik["nu_prior"] = prior_to_dict(spec.likelihood.nu_prior)
    if spec.likelihood.trials is not None:
        lik["trials"] = spec.likelihood.trials
    if spec.likelihood.exposure is not None:
        lik["exposure"] = spec.likelihood.exposure
    if spec.likelihood.heteroscedastic:
        lik["heteroscedastic"] = True
    out = {
        "likelihood": lik,
        "link": spec.link.value,
        "response": spec.response,
        "predictors": list(spec.predictors),
        "priors": {k: prior_to_dict(v) for k, v in spec.priors.items()},
        "sampler": dict(spec.sampler),
        "standardize": spec.standardize,
    }
    if spec.group is not None:
        out["group"] = spec.group
    return out
