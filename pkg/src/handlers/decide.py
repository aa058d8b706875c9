"""
Обработчик команды decide: ранжирование действий матрицы решений
"""
import argparse
import logging

from ..config.translations import TRANSLATIONS as T
from ..decision.decision import DecisionMatrix, best_act, check_axioms, update_prior
from ..distributions.rng import Rng
from ..storage.artifacts import read_json, write_json
from ..utils.errors import ParameterError
from ..utils.validators import validate_decision_file, validate_log_likelihoods, validate_seed

logger = logging.getLogger("bayescore")


def parse_log_likelihoods(text: str) -> list[float]:
    """'-1.2,-0.5,-inf' -> список чисел."""
    try:
        return [float(v) for v in text.split(",")]
    except ValueError:
        raise ParameterError(f"--update ожидает числа через запятую, получено '{text}'")


def cmd_decide(args: argparse.Namespace) -> int:
    obj = read_json(args.decision)
    ok, message = validate_decision_file(obj)
    if not ok:
        raise ParameterError(message)
    matrix = DecisionMatrix.from_dict(obj)

    if args.update:
        values = parse_log_likelihoods(args.update)
        ok, message = validate_log_likelihoods(values, len(matrix.states))
        if not ok:
            raise ParameterError(message)
        matrix = update_prior(matrix, values)
        prior = {s: round(float(p), 6) for s, p in zip(matrix.states, matrix.state_prior.probs)}
        print(T["decide_updated"].format(prior=prior))

    result = best_act(matrix)
    print(T["decide_best"].format(act=result.act, eu=result.eu))
    for rank, (act, eu) in enumerate(result.full_ranking, start=1):
        print(T["decide_row"].format(rank=rank, act=act, eu=eu))

    report = {
        "best_act": result.act,
        "eu": result.eu,
        "ranking": [{"act": act, "eu": eu} for act, eu in result.full_ranking],
        "prior": matrix.state_prior.probs.tolist(),
    }
    if args.check_axioms:
        ok, message = validate_seed(args.seed)
        if not ok:
            raise ParameterError(message)
        rng = Rng(args.seed)
        axioms = check_axioms(matrix, samples=args.check_axioms, rng=rng)
        for axiom, outcome in axioms.items():
            status = outcome if isinstance(outcome, str) else T["passed" if outcome["passed"] else "failed"]
            print(T["decide_axiom"].format(axiom=axiom, status=status))
        report["axioms"] = axioms
        report["seed"] = rng.seed
    if args.out:
        write_json(args.out, report)
    return 0


def register_decide_handlers(subparsers) -> None:
    """Регистрирует подкоманду decide"""
    parser = subparsers.add_parser("decide", help=T["help_decide"])
    parser.add_argument("--decision", required=True, help="JSON-файл задачи решения")
    parser.add_argument("--update", default=None, help="логарифмы правдоподобия состояний через запятую")
    parser.add_argument("--check-axioms", type=int, default=0, metavar="N", help="проверить аксиомы на N смесях")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--out", default=None, help="JSON-отчёт")
    parser.set_defaults(handler=cmd_decide)
