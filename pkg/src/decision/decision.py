"""
Статические одношаговые задачи решения: лотереи, матрица решений,
ожидаемая полезность и проверка аксиом рационального выбора
"""
import logging
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from ..distributions.rng import Rng
from ..inference.prob_calc import NORMALIZATION_TOL, DiscretePrior, bayes_grid
from ..utils.errors import DimensionError, ParameterError, UnknownActError

logger = logging.getLogger("bayescore")

PREFERENCE_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class Lottery:
    """Дискретное распределение над множеством исходов."""

    probs: np.ndarray

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=float)
        object.__setattr__(self, "probs", probs)
        if probs.ndim != 1 or probs.size == 0:
            raise DimensionError("лотерея должна быть непустым вектором")
        if np.any(~np.isfinite(probs)) or np.any(probs < 0.0):
            raise ParameterError("вероятности лотереи должны быть неотрицательными")
        if abs(math.fsum(probs) - 1.0) > NORMALIZATION_TOL:
            raise ParameterError(f"вероятности лотереи в сумме дают {math.fsum(probs)!r}")

    def __len__(self):
        return self.probs.size

    def utility(self, utilities: np.ndarray) -> float:
        return float(self.probs @ utilities)


def mix(p: Lottery, q: Lottery, alpha: float) -> Lottery:
    """[alpha p + (1 - alpha) q](x) = alpha p(x) + (1 - alpha) q(x)."""
    if len(p) != len(q):
        raise DimensionError(f"лотереи над разными множествами исходов: {len(p)} и {len(q)}")
    if not 0.0 <= alpha <= 1.0:
        raise ParameterError(f"alpha={alpha} должно лежать в [0, 1]")
    probs = alpha * p.probs + (1.0 - alpha) * q.probs
    return Lottery(probs / probs.sum())


def mix_acts(f: Sequence[Lottery], g: Sequence[Lottery], alpha: float) -> tuple:
    """Поштатное смешивание двух действий."""
    if len(f) != len(g):
        raise DimensionError("действия заданы для разного числа состояний")
    return tuple(mix(a, b, alpha) for a, b in zip(f, g))


@dataclass(frozen=True, eq=False)
class DecisionMatrix:
    """Матрица решений: действия x состояния, в клетках лотереи над исходами."""

    states: tuple
    acts: tuple
    state_prior: DiscretePrior
    cells: tuple
    outcomes: tuple
    utilities: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "states", tuple(self.states))
        object.__setattr__(self, "acts", tuple(self.acts))
        object.__setattr__(self, "outcomes", tuple(self.outcomes))
        object.__setattr__(self, "cells", tuple(tuple(row) for row in self.cells))
        utilities = np.asarray(self.utilities, dtype=float)
        object.__setattr__(self, "utilities", utilities)
        if not self.acts:
            raise ParameterError("нужно хотя бы одно действие")
        if len(set(self.acts)) != len(self.acts):
            raise ParameterError("имена действий повторяются")
        if self.state_prior.support != self.states:
            raise DimensionError("априорное задано не над состояниями матрицы")
        if utilities.shape != (len(self.outcomes),) or not np.all(np.isfinite(utilities)):
            raise DimensionError("нужна конечная полезность для каждого исхода")
        if len(self.cells) != len(self.acts):
            raise DimensionError(f"строк {len(self.cells)}, а действий {len(self.acts)}")
        for act, row in zip(self.acts, self.cells):
            if len(row) != len(self.states):
                raise DimensionError(f"действие '{act}': {len(row)} лотерей на {len(self.states)} состояний")
            for lottery in row:
                if len(lottery) != len(self.outcomes):
                    raise DimensionError(f"действие '{act}': лотерея не над множеством исходов")

    def act(self, label) -> tuple:
        try:
            return self.cells[self.acts.index(label)]
        except ValueError:
            raise UnknownActError(f"действие '{label}' отсутствует в матрице")

    def state_utilities(self, cells: Sequence[Lottery]) -> np.ndarray:
        """Ожидаемая полезность действия в каждом состоянии."""
        return np.array([lottery.utility(self.utilities) for lottery in cells])

    def with_prior(self, prior: DiscretePrior) -> "DecisionMatrix":
        return DecisionMatrix(self.states, self.acts, prior, self.cells, self.outcomes, self.utilities)

    def with_utilities(self, utilities) -> "DecisionMatrix":
        return DecisionMatrix(self.states, self.acts, self.state_prior, self.cells, self.outcomes, utilities)

    @classmethod
    def from_dict(cls, obj: dict) -> "DecisionMatrix":
        """{states[], prior[], outcomes[], utilities[], acts: {имя: [[лотерея по состоянию]]}}."""
        missing = {"states", "prior", "outcomes", "utilities", "acts"} - set(obj)
        if missing:
            raise ParameterError(f"в описании задачи нет полей {sorted(missing)}")
        acts = obj["acts"]
        if not isinstance(acts, dict):
            raise ParameterError("acts должен быть объектом имя -> лотереи по состояниям")
        return cls(
            states=tuple(obj["states"]),
            acts=tuple(acts),
            state_prior=DiscretePrior(tuple(obj["states"]), obj["prior"]),
            cells=tuple(tuple(Lottery(p) for p in row) for row in acts.values()),
            outcomes=tuple(obj["outcomes"]),
            utilities=obj["utilities"],
        )

    def to_dict(self) -> dict:
        return {
            "states": list(self.states),
            "prior": self.state_prior.probs.tolist(),
            "outcomes": list(self.outcomes),
            "utilities": self.utilities.tolist(),
            "acts": {a: [c.probs.tolist() for c in row] for a, row in zip(self.acts, self.cells)},
        }


def _expected_utility(m: DecisionMatrix, cells: Sequence[Lottery]) -> float:
    return float(m.state_utilities(cells) @ m.state_prior.probs)


def expected_utility(m: DecisionMatrix, act) -> float:
    """sum_w (sum_x U(x) f(w)(x)) P(w).

    Raises:
        UnknownActError: действия нет в матрице
    """
    return _expected_utility(m, m.act(act))


class BestAct(NamedTuple):
    act: str
    eu: float
    full_ranking: list


def best_act(m: DecisionMatrix) -> BestAct:
    """Действие с максимальной ожидаемой полезностью; при равенстве побеждает объявленное раньше."""
    scored = [(act, _expected_utility(m, cells)) for act, cells in zip(m.acts, m.cells)]
    # sorted устойчива, порядок объявления сохраняется при равенстве
    ranking = sorted(scored, key=lambda item: -item[1])
    return BestAct(ranking[0][0], ranking[0][1], ranking)


def update_prior(m: DecisionMatrix, log_likelihoods: Sequence[float]) -> DecisionMatrix:
    """Апостериорное над состояниями становится новым априорным матрицы."""
    return m.with_prior(bayes_grid(m.state_prior, log_likelihoods))


# ---------------------------------------------------------------------------
# Аксиомы
# ---------------------------------------------------------------------------

@dataclass
class AxiomCheck:
    passed: bool = True
    checked: int = 0
    counterexamples: list = field(default_factory=list)

    def fail(self, example, limit: int = 10):
        self.passed = False
        if len(self.counterexamples) < limit:
            self.counterexamples.append(example)

    def to_dict(self) -> dict:
        return {"passed": self.passed, "checked": self.checked, "counterexamples": self.counterexamples}


def _sign(x: float, tol: float) -> int:
    return 0 if abs(x) <= tol else (1 if x > 0 else -1)


def check_axioms(m: DecisionMatrix, samples: int = 1000, rng=None, tol: float = PREFERENCE_TOL) -> dict:
    """Проверка отношения предпочтения, индуцированного ожидаемой полезностью.

    Набор действий: объявленные плюс samples случайных смесей пар объявленных.
    Полнота и транзитивность (слабый порядок), независимость (смешивание с
    общим третьим действием), монотонность (поштатное доминирование).
    Непрерывность задаётся существованием весов и не проверяется.
    """
    if samples < 0:
        raise ParameterError("samples должно быть >= 0")
    gen = (rng if isinstance(rng, Rng) else Rng(rng)).generator
    pool = {act: cells for act, cells in zip(m.acts, m.cells)}
    k = len(m.acts)
    for i in range(samples):
        a, b = gen.integers(0, k, size=2)
        pool[f"mix#{i + 1}"] = mix_acts(m.cells[a], m.cells[b], float(gen.random()))
    names = list(pool)
    eu = {name: _expected_utility(m, cells) for name, cells in pool.items()}
    statewise = {name: m.state_utilities(cells) for name, cells in pool.items()}

    def prefers(f, g) -> bool:
        return eu[f] >= eu[g] - tol

    completeness, transitivity = AxiomCheck(), AxiomCheck()
    independence, monotonicity = AxiomCheck(), AxiomCheck()
    n_checks = max(samples, 1)
    for _ in range(n_checks):
        f, g, h = (names[i] for i in gen.integers(0, len(names), size=3))
        completeness.checked += 1
        if not (prefers(f, g) or prefers(g, f)):
            completeness.fail([f, g])

        transitivity.checked += 1
        if prefers(f, g) and prefers(g, h) and not prefers(f, h):
            transitivity.fail([f, g, h])

        alpha = float(gen.uniform(0.01, 0.99))
        left = _expected_utility(m, mix_acts(pool[f], pool[h], alpha))
        right = _expected_utility(m, mix_acts(pool[g], pool[h], alpha))
        independence.checked += 1
        if _sign(left - right, alpha * tol) != _sign(eu[f] - eu[g], tol):
            independence.fail({"f": f, "g": g, "h": h, "alpha": alpha})

        if np.all(statewise[f] >= statewise[g] - tol):
            monotonicity.checked += 1
            if not prefers(f, g):
                monotonicity.fail([f, g])

    report = {
        "completeness": completeness.to_dict(),
        "transitivity": transitivity.to_dict(),
        "independence": independence.to_dict(),
        "monotonicity": monotonicity.to_dict(),
        "continuity": "not checked",
    }
    failed = [name for name, r in report.items() if isinstance(r, dict) and not r["passed"]]
    if failed:
        logger.warning(f"Нарушены аксиомы: {failed}")
    return report


def random_decision_matrix(rng, n_states: int = 3, n_acts: int = 4, n_outcomes: int = 3) -> DecisionMatrix:
    """Случайная матрица: априорное и лотереи из Дирихле, полезности из U(0, 1)."""
    if min(n_states, n_acts, n_outcomes) < 1:
        raise ParameterError("размеры матрицы должны быть положительными")
    gen = (rng if isinstance(rng, Rng) else Rng(rng)).generator
    states = tuple(f"w{i + 1}" for i in range(n_states))
    prior = gen.dirichlet(np.ones(n_states))
    cells = tuple(
        tuple(Lottery(p / p.sum()) for p in gen.dirichlet(np.ones(n_outcomes), size=n_states))
        for _ in range(n_acts)
    )
    return DecisionMatrix(
        states=states,
        acts=tuple(f"f{j + 1}" for j in range(n_acts)),
        state_prior=DiscretePrior(states, prior / prior.sum()),
        cells=cells,
        outcomes=tuple(f"x{i + 1}" for i in range(n_outcomes)),
        utilities=gen.uniform(0.0, 1.0, n_outcomes),
    )
