"""
Сэмплеры MCMC: случайное блуждание Метрополиса–Гастингса, Гиббс, гамильтонов Монте-Карло
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from typing import Callable

import numpy as np

from ..config import settings
from ..distributions.rng import Rng
from ..utils.errors import DimensionError, DomainError, InitError, MissingConditionalError, ParameterError
from .targets import HMC, MH, ChainSet, Gibbs, LogTarget, SamplerConfig

logger = logging.getLogger("bayescore")

DIVERGENCE_THRESHOLD = 1000.0


def _safe_eval(target: LogTarget, theta: np.ndarray) -> float:
    """Лог-плотность; вне области определения возвращает -inf."""
    try:
        with np.errstate(all="ignore"):
            value = float(target.log_density(theta))
    except (DomainError, OverflowError, ZeroDivisionError):
        return -math.inf
    return value if not math.isnan(value) else -math.inf


def _initial_point(target: LogTarget, cfg: SamplerConfig, rng: Rng, chain: int) -> tuple[np.ndarray, float]:
    """Стартовая точка: заданная пользователем, из априорных или стандартный Гаусс."""
    gen = rng.generator
    if cfg.inits is not None:
        theta = np.asarray(cfg.inits[chain], dtype=float)
        if theta.shape != (target.dimension,):
            raise DimensionError(f"начальная точка цепочки {chain + 1}: размерность {theta.shape}")
        lp = _safe_eval(target, theta)
        if not math.isfinite(lp):
            raise InitError(f"начальная точка цепочки {chain + 1} имеет нулевую плотность")
        return theta, lp
    for _ in range(cfg.max_init_attempts):
        if target.init is not None:
            theta = np.asarray(target.init(gen), dtype=float)
        else:
            theta = gen.standard_normal(target.dimension)
        lp = _safe_eval(target, theta)
        if math.isfinite(lp):
            return theta, lp
    raise InitError(
        f"цепочка {chain + 1}: не найдена точка с конечной плотностью за {cfg.max_init_attempts} попыток"
    )


class _Recorder:
    """Собирает выборки после прогрева с прореживанием."""

    def __init__(self, target: LogTarget, cfg: SamplerConfig):
        self.target = target
        self.cfg = cfg
        self.draws = np.empty((cfg.n_kept, len(target.output_names)))
        self.count = 0

    def record(self, iteration: int, theta: np.ndarray):
        offset = iteration - self.cfg.n_warmup
        if offset < 0 or offset % self.cfg.thin != 0 or self.count >= self.cfg.n_kept:
            return
        self.draws[self.count] = self.target.outputs(theta)
        self.count += 1


def _mh_chain(target: LogTarget, cfg: SamplerConfig, rng: Rng, chain: int):
    gen = rng.generator
    theta, lp = _initial_point(target, cfg, rng, chain)
    scale = np.broadcast_to(np.asarray(cfg.algorithm.step_scale, dtype=float), (target.dimension,))
    recorder = _Recorder(target, cfg)
    accepted = 0
    for it in range(cfg.n_iter):
        proposal = theta + scale * gen.standard_normal(target.dimension)
        lp_new = _safe_eval(target, proposal)
        u = gen.random()
        delta = lp_new - lp
        if math.isfinite(lp_new) and (delta >= 0 or u < math.exp(delta)):
            theta, lp = proposal, lp_new
            if it >= cfg.n_warmup:
                accepted += 1
        recorder.record(it, theta)
    return recorder.draws, accepted / (cfg.n_iter - cfg.n_warmup), 0


def _gibbs_chain(target: LogTarget, cfg: SamplerConfig, rng: Rng, chain: int):
    gen = rng.generator
    theta, _ = _initial_point(target, cfg, rng, chain)
    theta = theta.copy()
    recorder = _Recorder(target, cfg)
    conditionals = target.full_conditionals
    for it in range(cfg.n_iter):
        # фиксированный порядок обхода 0..d-1
        for j, draw in enumerate(conditionals):
            theta[j] = draw(theta, gen)
        recorder.record(it, theta)
    return recorder.draws, 1.0, 0


def leapfrog(
    theta: np.ndarray,
    momentum: np.ndarray,
    grad_log_density: Callable[[np.ndarray], np.ndarray],
    step_size: float,
    n_steps: int,
) -> tuple[np.ndarray, np.ndarray]:
    """n_steps шагов интегратора leapfrog для потенциала -log target (единичная масса)."""
    q = np.array(theta, dtype=float)
    p = np.array(momentum, dtype=float) + 0.5 * step_size * grad_log_density(q)
    for step in range(n_steps):
        q = q + step_size * p
        g = grad_log_density(q)
        if not np.all(np.isfinite(g)):
            return q, np.full_like(p, np.nan)
        p = p + (step_size if step < n_steps - 1 else 0.5 * step_size) * g
    return q, p


def hamiltonian(log_density_value: float, momentum: np.ndarray) -> float:
    return -log_density_value + 0.5 * float(momentum @ momentum)


def _hmc_chain(target: LogTarget, cfg: SamplerConfig, rng: Rng, chain: int):
    gen = rng.generator
    algo: HMC = cfg.algorithm
    theta, lp = _initial_point(target, cfg, rng, chain)
    recorder = _Recorder(target, cfg)
    accepted = 0
    divergences = 0
    for it in range(cfg.n_iter):
        p0 = gen.standard_normal(target.dimension)
        with np.errstate(all="ignore"):
            try:
                q1, p1 = leapfrog(theta, p0, target.gradient, algo.step_size, int(algo.n_leapfrog))
            except (DomainError, OverflowError, ZeroDivisionError):
                q1, p1 = theta, np.full_like(p0, np.nan)
        lp1 = _safe_eval(target, q1) if np.all(np.isfinite(q1)) else -math.inf
        delta_h = hamiltonian(lp1, p1) - hamiltonian(lp, p0)
        u = gen.random()
        if not math.isfinite(delta_h) or abs(delta_h) > DIVERGENCE_THRESHOLD:
            divergences += 1
        elif delta_h <= 0 or u < math.exp(-delta_h):
            theta, lp = q1, lp1
            if it >= cfg.n_warmup:
                accepted += 1
        recorder.record(it, theta)
    return recorder.draws, accepted / (cfg.n_iter - cfg.n_warmup), divergences


def _run_chains(chain_fn, algorithm: str, target: LogTarget, cfg: SamplerConfig) -> ChainSet:
    """Запускает независимые цепочки, каждая со своим потоком ГСЧ."""
    root = Rng(cfg.seed)
    streams = root.spawn(cfg.n_chains)
    workers = max(1, min(int(settings.THREADS), cfg.n_chains))
    logger.info(
        f"Запуск {algorithm}: {cfg.n_chains} цепочек x {cfg.n_iter} итераций "
        f"(прогрев {cfg.n_warmup}, thin {cfg.thin}), seed={root.seed}, потоков {workers}"
    )
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(chain_fn, target, cfg, streams[i], i) for i in range(cfg.n_chains)]
        results = [f.result() for f in futures]
    draws, acceptance, divergences = zip(*results)
    total_div = sum(divergences)
    if total_div:
        logger.warning(f"{algorithm}: {total_div} расходящихся переходов (|dH| > {DIVERGENCE_THRESHOLD:g})")
    logger.info(f"{algorithm} завершён, доля принятия по цепочкам: {[round(a, 3) for a in acceptance]}")
    return ChainSet(
        chains=list(draws),
        param_names=target.output_names,
        warmup_used=cfg.n_warmup,
        thin=cfg.thin,
        seeds=[[root.seed, i] for i in range(cfg.n_chains)],
        acceptance_rate=list(acceptance),
        n_free=target.dimension,
        divergences=list(divergences),
        algorithm=algorithm,
        seed=root.seed,
    )


def run_mh(target: LogTarget, cfg: SamplerConfig) -> ChainSet:
    if not isinstance(cfg.algorithm, MH):
        raise ParameterError("run_mh требует алгоритм MH в конфигурации")
    return _run_chains(_mh_chain, "mh", target, cfg)


def run_gibbs(target: LogTarget, cfg: SamplerConfig) -> ChainSet:
    conditionals = target.full_conditionals
    if conditionals is None or len(conditionals) != target.dimension or any(c is None for c in conditionals):
        raise MissingConditionalError("у цели нет полных условных распределений для всех координат")
    return _run_chains(_gibbs_chain, "gibbs", target, cfg)


def run_hmc(target: LogTarget, cfg: SamplerConfig) -> ChainSet:
    if target.gradient is None:
        raise ParameterError("HMC требует градиент лог-плотности")
    if not isinstance(cfg.algorithm, HMC):
        raise ParameterError("run_hmc требует алгоритм HMC в конфигурации")
    return _run_chains(_hmc_chain, "hmc", target, cfg)


def run(target: LogTarget, cfg: SamplerConfig) -> ChainSet:
    """Выбор сэмплера по алгоритму из конфигурации."""
    if isinstance(cfg.algorithm, Gibbs):
        return run_gibbs(target, cfg)
    if isinstance(cfg.algorithm, HMC):
        return run_hmc(target, cfg)
    return run_mh(target, cfg)
