"""
Типы движка MCMC: целевая лог-плотность, набор цепочек, настройки сэмплера
"""
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np
import pandas as pd

from ..utils.errors import DimensionError, ParameterError

Conditional = Callable[[np.ndarray, np.random.Generator], float]


@dataclass(frozen=True, eq=False)
class LogTarget:
    """Ненормированная лог-плотность на неограниченном векторе параметров.

    derive отображает вектор параметров в производные величины (sigma, nu и т.п.),
    которые сохраняются в цепочках рядом с самими параметрами.
    log_likelihood и pointwise_log_lik содержат только часть правдоподобия
    (для DIC и WAIC).
    """

    dimension: int
    param_names: tuple
    log_density: Callable[[np.ndarray], float]
    gradient: Callable[[np.ndarray], np.ndarray] | None = None
    full_conditionals: tuple | None = None
    derived_names: tuple = ()
    derive: Callable[[np.ndarray], np.ndarray] | None = None
    init: Callable[[np.random.Generator], np.ndarray] | None = None
    log_likelihood: Callable[[np.ndarray], float] | None = None
    pointwise_log_lik: Callable[[np.ndarray], np.ndarray] | None = None
    model: Any = None

    def __post_init__(self):
        object.__setattr__(self, "param_names", tuple(self.param_names))
        object.__setattr__(self, "derived_names", tuple(self.derived_names))
        if len(self.param_names) != self.dimension:
            raise DimensionError(
                f"имён параметров {len(self.param_names)}, а размерность {self.dimension}"
            )
        if self.full_conditionals is not None:
            object.__setattr__(self, "full_conditionals", tuple(self.full_conditionals))

    @property
    def output_names(self) -> tuple:
        return self.param_names + self.derived_names

    def outputs(self, theta: np.ndarray) -> np.ndarray:
        if self.derive is None:
            return np.array(theta, dtype=float)
        return np.concatenate([theta, np.atleast_1d(self.derive(theta))])


# --- алгоритмы ---

@dataclass(frozen=True)
class MH:
    step_scale: float | tuple = 0.1
    name = "mh"

    def __post_init__(self):
        scale = np.atleast_1d(np.asarray(self.step_scale, dtype=float))
        if np.any(scale <= 0) or np.any(~np.isfinite(scale)):
            raise ParameterError("step_scale должен быть положительным")


@dataclass(frozen=True)
class Gibbs:
    name = "gibbs"


@dataclass(frozen=True)
class HMC:
    step_size: float = 0.05
    n_leapfrog: int = 20
    name = "hmc"

    def __post_init__(self):
        if not self.step_size > 0:
            raise ParameterError("step_size должен быть > 0")
        if int(self.n_leapfrog) < 1:
            raise ParameterError("n_leapfrog должен быть >= 1")


ALGORITHMS = {"mh": MH, "gibbs": Gibbs, "hmc": HMC}


@dataclass(frozen=True, eq=False)
class SamplerConfig:
    n_chains: int = 4
    n_iter: int = 3000
    n_warmup: int = 1000
    thin: int = 1
    algorithm: MH | Gibbs | HMC = field(default_factory=MH)
    seed: int | None = None
    inits: Sequence[Sequence[float]] | None = None
    max_init_attempts: int = 1000

    def __post_init__(self):
        if self.n_chains < 1:
            raise ParameterError("n_chains должно быть >= 1")
        if self.thin < 1:
            raise ParameterError("thin должно быть >= 1")
        if not 0 <= self.n_warmup < self.n_iter:
            raise ParameterError(f"требуется 0 <= n_warmup < n_iter, получено {self.n_warmup}, {self.n_iter}")
        if self.n_iter - self.n_warmup < self.thin:
            raise ParameterError("после прогрева не остаётся ни одной выборки")
        if self.inits is not None and len(self.inits) != self.n_chains:
            raise ParameterError(f"начальных точек {len(self.inits)}, а цепочек {self.n_chains}")

    @property
    def n_kept(self) -> int:
        return (self.n_iter - self.n_warmup) // self.thin

    @classmethod
    def from_settings(cls, section: dict, **overrides) -> "SamplerConfig":
        """Собирает конфигурацию из секции "sampler" и явных переопределений."""
        merged = {**section, **{k: v for k, v in overrides.items() if v is not None}}
        name = str(merged.get("algorithm", "mh")).lower()
        if name == "mh":
            algorithm = MH(merged.get("step_scale", 0.1))
        elif name == "gibbs":
            algorithm = Gibbs()
        elif name == "hmc":
            algorithm = HMC(float(merged.get("step_size", 0.05)), int(merged.get("n_leapfrog", 20)))
        else:
            raise ParameterError(f"неизвестный алгоритм '{name}'")
        return cls(
            n_chains=int(merged.get("n_chains", 4)),
            n_iter=int(merged.get("n_iter", 3000)),
            n_warmup=int(merged.get("n_warmup", 1000)),
            thin=int(merged.get("thin", 1)),
            algorithm=algorithm,
            seed=merged.get("seed"),
            inits=merged.get("inits"),
            max_init_attempts=int(merged.get("max_init_attempts", 1000)),
        )


@dataclass(eq=False)
class ChainSet:
    """Выборки после прогрева по цепочкам.

    Первые n_free столбцов каждой матрицы: сам вектор параметров цели,
    остальные: производные величины.
    """

    chains: list
    param_names: tuple
    warmup_used: int
    thin: int
    seeds: list
    acceptance_rate: list
    n_free: int
    divergences: list = field(default_factory=list)
    algorithm: str = ""
    seed: int | None = None

    def __post_init__(self):
        self.param_names = tuple(self.param_names)
        self.chains = [np.asarray(c, dtype=float) for c in self.chains]
        if not self.chains:
            raise ParameterError("набор цепочек пуст")
        shapes = {c.shape for c in self.chains}
        if len(shapes) != 1:
            raise DimensionError(f"цепочки разной формы: {sorted(shapes)}")
        rows, cols = self.chains[0].shape
        if rows < 1 or cols != len(self.param_names):
            raise DimensionError(f"форма цепочки {(rows, cols)} не согласована с {len(self.param_names)} параметрами")

    @property
    def n_chains(self) -> int:
        return len(self.chains)

    @property
    def n_draws(self) -> int:
        return self.chains[0].shape[0]

    @property
    def free_names(self) -> tuple:
        return self.param_names[: self.n_free]

    def index(self, param: str) -> int:
        try:
            return self.param_names.index(param)
        except ValueError:
            raise ParameterError(f"неизвестный параметр '{param}'")

    def draws(self, param: str) -> np.ndarray:
        """Матрица (цепочки x выборки) для одного параметра."""
        j = self.index(param)
        return np.stack([c[:, j] for c in self.chains])

    def pooled(self, param: str) -> np.ndarray:
        return self.draws(param).ravel()

    def free_draws(self) -> np.ndarray:
        """Все выборки вектора параметров цели, (S x n_free)."""
        return np.concatenate([c[:, : self.n_free] for c in self.chains])

    def pooled_matrix(self) -> np.ndarray:
        return np.concatenate(self.chains)

    def to_frame(self) -> pd.DataFrame:
        """Таблица для экспорта: chain, iteration, затем параметры по порядку."""
        frames = []
        for i, c in enumerate(self.chains):
            df = pd.DataFrame(c, columns=list(self.param_names))
            df.insert(0, "iteration", np.arange(1, c.shape[0] + 1))
            df.insert(0, "chain", i + 1)
            frames.append(df)
        return pd.concat(frames, ignore_index=True)

    @classmethod
    def from_frame(cls, df: pd.DataFrame, n_free: int, **meta) -> "ChainSet":
        names = [c for c in df.columns if c not in ("chain", "iteration")]
        chains = [g[names].to_numpy(dtype=float) for _, g in df.groupby("chain", sort=True)]
        defaults = {"warmup_used": 0, "thin": 1, "seeds": [], "acceptance_rate": []}
        defaults.update(meta)
        return cls(chains=chains, param_names=tuple(names), n_free=n_free, **defaults)
