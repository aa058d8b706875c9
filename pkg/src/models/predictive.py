"""
Априорные и апостериорные предсказательные распределения и калибровочный отчёт
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import pandas as pd
from scipy import stats

from ..config import settings
from ..distributions.families import Distribution
from ..distributions.rng import Rng
from ..inference.conjugate import GaussInverseGammaPosterior, JointPosterior
from ..mcmc.targets import ChainSet, LogTarget
from ..utils.errors import DimensionError, DomainError, ImproperPriorError, ParameterError
from .glm import CompiledModel
from .spec import DesignMatrix, FlatPrior

logger = logging.getLogger("bayescore")


@dataclass(frozen=True, eq=False)
class PredictiveSample:
    """Матрица предсказательных выборок: строка на выборку параметров, столбец на новый случай."""

    draws: np.ndarray
    new_design: DesignMatrix | None
    source: str

    def __post_init__(self):
        draws = np.asarray(self.draws, dtype=float)
        if draws.ndim == 1:
            draws = draws[:, None]
        object.__setattr__(self, "draws", draws)
        if self.new_design is not None and draws.shape[1] != self.new_design.n_rows:
            raise DimensionError(f"столбцов {draws.shape[1]}, а новых случаев {self.new_design.n_rows}")

    @property
    def n_draws(self) -> int:
        return self.draws.shape[0]

    @property
    def n_cases(self) -> int:
        return self.draws.shape[1]

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame(self.draws, columns=[f"y_new[{j + 1}]" for j in range(self.n_cases)])
        frame.insert(0, "draw", np.arange(1, self.n_draws + 1))
        return frame


def _as_rng(rng) -> Rng:
    if isinstance(rng, Rng):
        return rng
    return Rng(rng)


# --- априорное предсказательное ---

def prior_predictive(prior: Distribution, likelihood: str, rng, n_sim: int, **params) -> PredictiveSample:
    """Симуляция: theta из априорного, затем y из правдоподобия при этом theta.

    Правдоподобия: bernoulli, binomial (n), poisson, exponential (theta = интенсивность),
    gauss (theta = среднее, sigma).

    Raises:
        ImproperPriorError: априорное несобственное
    """
    if prior is None or isinstance(prior, FlatPrior):
        raise ImproperPriorError("априорное предсказательное требует собственного априорного")
    if n_sim < 1:
        raise ParameterError("n_sim должно быть >= 1")
    gen = _as_rng(rng).generator
    theta = np.asarray(prior.sample(gen, n_sim), dtype=float)
    name = likelihood.lower()
    if name in ("bernoulli", "binomial"):
        if np.any((theta < 0.0) | (theta > 1.0)):
            raise DomainError(f"{name}: априорное должно лежать в [0, 1]")
        trials = int(params.get("n", 1)) if name == "binomial" else 1
        y = gen.binomial(trials, theta)
    elif name in ("poisson", "exponential"):
        if np.any(theta < 0.0):
            raise DomainError(f"{name}: априорное должно лежать в [0, inf)")
        y = gen.poisson(theta) if name == "poisson" else gen.exponential(1.0 / theta)
    elif name == "gauss":
        sigma = float(params.get("sigma", 1.0))
        if not sigma > 0.0:
            raise ParameterError("gauss: sigma должно быть > 0")
        y = gen.normal(theta, sigma)
    else:
        raise ParameterError(f"неизвестное правдоподобие '{likelihood}'")
    return PredictiveSample(np.asarray(y, dtype=float), None, f"prior:{prior.family}")


def _simulate(
    model: CompiledModel,
    free: np.ndarray,
    X_new: DesignMatrix,
    rng: Rng,
    groups=None,
    trials=None,
    exposure=None,
) -> np.ndarray:
    m = X_new.n_rows
    if m < 1:
        raise DimensionError("нет новых случаев для предсказания")
    if trials is not None and len(trials) != m:
        raise DimensionError(f"trials длины {len(trials)}, а новых случаев {m}")
    params = model.predictive_parameters(free, X_new, rng.child(0).generator, groups=groups, exposure=exposure)
    # столбец j использует свой поток, независимо от порядка вычисления
    streams = rng.child(1).spawn(m)
    trials = [1] * m if trials is None else [int(t) for t in trials]

    def column(j: int) -> np.ndarray:
        return model.draw_observations(params, j, streams[j].generator, trials[j])

    workers = max(1, min(int(settings.THREADS), m))
    with ThreadPoolExecutor(max_workers=workers) as pool:
        columns = list(pool.map(column, range(m)))
    return np.column_stack(columns)


def prior_predictive_model(
    model: CompiledModel,
    X: DesignMatrix,
    rng,
    n_sim: int,
    groups=None,
    trials=None,
    exposure=None,
) -> PredictiveSample:
    """Априорное предсказательное для GLM на заданной матрице плана.

    Raises:
        ImproperPriorError: у модели есть плоские априорные
    """
    rng = _as_rng(rng)
    free = model.sample_prior(rng.child(2).generator, n_sim)
    draws = _simulate(model, free, X, rng, groups, trials, exposure)
    return PredictiveSample(draws, X, "prior")


# --- апостериорное предсказательное ---

def posterior_predictive(
    chains: ChainSet,
    model: CompiledModel | LogTarget,
    X_new: DesignMatrix,
    rng,
    groups=None,
    trials=None,
    exposure=None,
) -> PredictiveSample:
    """Одно новое наблюдение на каждую апостериорную выборку и каждый новый случай.

    Для каждой выборки: линейная форма X_new*beta, обратная связь, затем
    наблюдение из правдоподобия с параметрами дисперсии этой выборки.

    Raises:
        DimensionError: столбцы X_new или параметры цепочек не совпадают с моделью
    """
    if isinstance(model, LogTarget):
        model = model.model
    if tuple(chains.free_names) != tuple(model.layout.names):
        raise DimensionError("параметры цепочек не совпадают с раскладкой модели")
    rng = _as_rng(rng)
    free = chains.free_draws()
    draws = _simulate(model, free, X_new, rng, groups, trials, exposure)
    logger.info(f"Апостериорное предсказательное: {draws.shape[0]} выборок x {draws.shape[1]} случаев")
    return PredictiveSample(draws, X_new, f"posterior:{chains.algorithm or 'chains'}")


def posterior_predictive_conjugate(posterior, rng, n_sim: int) -> PredictiveSample:
    """Предсказательное для точного нормально-обратно-гамма апостериорного.

    sigma^2 ~ InverseGamma, mu | sigma^2 ~ N(mu_n, sigma^2/kappa), y ~ N(mu, sigma^2).
    """
    joint = posterior.joint if isinstance(posterior, JointPosterior) else posterior
    if not isinstance(joint, GaussInverseGammaPosterior):
        raise ParameterError("ожидается нормально-обратно-гамма апостериорное")
    gen = _as_rng(rng).generator
    sigma2 = joint.beta_n / gen.standard_gamma(joint.alpha_n, size=n_sim)
    mu = gen.normal(joint.mu_n, np.sqrt(sigma2 / joint.kappa))
    return PredictiveSample(gen.normal(mu, np.sqrt(sigma2)), None, "conjugate")


# --- калибровка ---

@dataclass
class PredictiveCheck:
    observed_mean: float
    predictive_mean: list
    pit: np.ndarray
    ks_distance: float
    histograms: list

    def to_dict(self) -> dict:
        return {
            "observed_mean": self.observed_mean,
            "predictive_mean": self.predictive_mean,
            "pit": self.pit.tolist(),
            "ks_distance": self.ks_distance,
            "histograms": self.histograms,
        }


def predictive_check_report(pred: PredictiveSample, y_observed) -> PredictiveCheck:
    """Гистограммы по случаям (бины Фридмана–Диакониса), среднее наблюдений и PIT.

    PIT случая i: доля предсказательных выборок строго меньше y_i. Если столбцов
    столько же, сколько наблюдений, сравнение идёт попарно, иначе с объединёнными
    выборками всех столбцов.
    """
    y = np.asarray(y_observed, dtype=float).ravel()
    draws = pred.draws
    if draws.shape[1] == y.size:
        pit = np.mean(draws < y[None, :], axis=0)
    else:
        pooled = np.sort(draws.ravel())
        pit = np.searchsorted(pooled, y, side="left") / pooled.size
    histograms = []
    for j in range(draws.shape[1]):
        counts, edges = np.histogram(draws[:, j], bins="fd")
        histograms.append({"edges": edges.tolist(), "counts": counts.astype(int).tolist()})
    ks = float(stats.kstest(pit, "uniform").statistic) if pit.size else math.nan
    return PredictiveCheck(
        observed_mean=float(y.mean()) if y.size else math.nan,
        predictive_mean=draws.mean(axis=0).tolist(),
        pit=pit,
        ks_distance=ks,
        histograms=histograms,
    )
