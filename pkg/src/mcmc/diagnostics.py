"""
Диагностика цепочек: R-hat, ESS, автокорреляция, HPD-интервалы, сводки
"""
import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np
import pandas as pd

from ..utils.errors import DegenerateError, ParameterError
from .targets import ChainSet

logger = logging.getLogger("bayescore")


def _autocov(x: np.ndarray) -> np.ndarray:
    """Смещённая автоковариация по последней оси через БПФ."""
    n = x.shape[-1]
    centered = x - x.mean(axis=-1, keepdims=True)
    size = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(centered, n=size, axis=-1)
    acov = np.fft.irfft(f * np.conjugate(f), n=size, axis=-1)[..., :n]
    return acov / n


def _draws_for_diagnostics(chains: ChainSet, param: str, min_chains: int) -> np.ndarray:
    x = chains.draws(param)
    if x.shape[0] < min_chains:
        raise ParameterError(f"нужно не меньше {min_chains} цепочек, получено {x.shape[0]}")
    if x.shape[1] < 4:
        raise ParameterError(f"нужно не меньше 4 выборок на цепочку, получено {x.shape[1]}")
    return x


def rhat(chains: ChainSet, param: str) -> float:
    """R-hat по расщеплённым цепочкам: sqrt(V/W)."""
    x = _draws_for_diagnostics(chains, param, 2)
    n = x.shape[1]
    half = n // 2
    # при нечётной длине средняя выборка отбрасывается
    split = np.concatenate([x[:, :half], x[:, n - half:]])
    within = float(np.mean(np.var(split, axis=1, ddof=1)))
    if within == 0.0:
        raise DegenerateError(f"'{param}': нулевая внутрицепочечная дисперсия")
    between = half * float(np.var(split.mean(axis=1), ddof=1))
    v_hat = (half - 1) / half * within + between / half
    return math.sqrt(v_hat / within)


def ess(chains: ChainSet, param: str) -> float:
    """Эффективный размер выборки с усечением Гейера по парным суммам.

    Args:
        chains: набор цепочек
        param: имя параметра

    Returns:
        ESS, ограниченный сверху общим числом выборок
    """
    x = _draws_for_diagnostics(chains, param, 1)
    m, n = x.shape
    total = m * n
    acov = _autocov(x)
    mean_var = float(np.mean(acov[:, 0])) * n / (n - 1.0)
    if mean_var == 0.0:
        raise DegenerateError(f"'{param}': нулевая дисперсия")
    var_plus = mean_var * (n - 1.0) / n
    if m > 1:
        var_plus += float(np.var(x.mean(axis=1), ddof=1))
    rho = 1.0 - (mean_var - acov.mean(axis=0)) / var_plus
    rho[0] = 1.0

    pair_sum = 0.0
    previous = math.inf
    k = 0
    while 2 * k + 1 < n:
        pair = rho[2 * k] + rho[2 * k + 1]
        if pair <= 0.0:
            break
        # монотонная оценка начальной последовательности
        pair = min(pair, previous)
        pair_sum += pair
        previous = pair
        k += 1
    tau = -1.0 + 2.0 * pair_sum
    tau = max(tau, 1.0 / math.log10(total)) if total > 1 else max(tau, 1.0)
    return float(min(total / tau, total))


def autocorr(draws: Sequence[float], max_lag: int) -> np.ndarray:
    """Нормированная смещённая автокорреляция для лагов 0..max_lag."""
    x = np.asarray(draws, dtype=float).ravel()
    if not 0 <= max_lag < x.size / 2:
        raise ParameterError(f"max_lag={max_lag} должен быть меньше N/2={x.size / 2}")
    acov = _autocov(x)
    if acov[0] == 0.0:
        raise DegenerateError("нулевая дисперсия ряда")
    rho = acov[: max_lag + 1] / acov[0]
    rho[0] = 1.0
    return rho


def hpd_interval(draws: Sequence[float], mass: float = 0.95) -> tuple[float, float]:
    """Кратчайший интервал, содержащий ceil(mass*N) упорядоченных выборок."""
    if not 0.0 < mass < 1.0:
        raise ParameterError(f"mass={mass} должно лежать в (0, 1)")
    x = np.sort(np.asarray(draws, dtype=float).ravel())
    n = x.size
    if n < 100:
        raise ParameterError(f"для HPD нужно не меньше 100 выборок, получено {n}")
    k = max(1, math.ceil(mass * n - 1e-9))
    widths = x[k - 1:] - x[: n - k + 1]
    i = int(np.argmin(widths))
    return float(x[i]), float(x[i + k - 1])


def mcse(chains: ChainSet, param: str) -> float:
    """Стандартная ошибка Монте-Карло среднего: sd / sqrt(ESS)."""
    sd = float(np.std(chains.pooled(param), ddof=1))
    return sd / math.sqrt(ess(chains, param))


@dataclass
class PosteriorSummary:
    name: str
    mean: float
    sd: float
    quantiles: dict
    hpd: tuple
    ess: float | None
    rhat: float | None
    mcse: float | None
    hpd_mass: float = 0.95
    warnings: list = field(default_factory=list)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["hpd"] = list(self.hpd)
        return out


def summarize_param(
    chains: ChainSet,
    param: str,
    hpd_mass: float = 0.95,
    quantiles: Sequence[float] = (0.025, 0.25, 0.5, 0.75, 0.975),
    rhat_warn: float = 1.01,
    ess_warn: float = 400,
) -> PosteriorSummary:
    pooled = chains.pooled(param)
    sd = float(np.std(pooled, ddof=1)) if pooled.size > 1 else 0.0
    try:
        ess_value = ess(chains, param)
        mcse_value = sd / math.sqrt(ess_value)
    except (DegenerateError, ParameterError):
        ess_value, mcse_value = None, None
    try:
        rhat_value = rhat(chains, param) if chains.n_chains >= 2 else None
    except (DegenerateError, ParameterError):
        rhat_value = None
    hpd = hpd_interval(pooled, hpd_mass) if pooled.size >= 100 else (float(pooled.min()), float(pooled.max()))
    summary = PosteriorSummary(
        name=param,
        mean=float(pooled.mean()),
        sd=sd,
        quantiles={f"{q:g}": float(np.quantile(pooled, q)) for q in quantiles},
        hpd=hpd,
        ess=ess_value,
        rhat=rhat_value,
        mcse=mcse_value,
        hpd_mass=hpd_mass,
    )
    if rhat_value is not None and rhat_value > rhat_warn:
        summary.warnings.append(f"rhat {rhat_value:.4f} > {rhat_warn}")
        logger.warning(f"'{param}': R-hat {rhat_value:.4f} > {rhat_warn}")
    if ess_value is not None and ess_value < ess_warn:
        summary.warnings.append(f"ess {ess_value:.0f} < {ess_warn}")
        logger.warning(f"'{param}': ESS {ess_value:.0f} < {ess_warn}")
    return summary


def summarize(chains: ChainSet, params: Sequence[str] | None = None, **options) -> dict[str, PosteriorSummary]:
    """Сводка по всем (или выбранным) параметрам в порядке объявления."""
    names = params if params is not None else chains.param_names
    return {name: summarize_param(chains, name, **options) for name in names}


def correlation_matrix(chains: ChainSet, params: Sequence[str] | None = None) -> pd.DataFrame:
    """Апостериорная матрица корреляций по объединённым выборкам."""
    names = list(params) if params is not None else list(chains.param_names)
    data = np.column_stack([chains.pooled(p) for p in names])
    return pd.DataFrame(data, columns=names).corr()
