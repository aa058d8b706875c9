"""
Обработчик команды dist: справка по распределениям
"""
import argparse
import json
import logging

import numpy as np

from ..config.translations import TRANSLATIONS as T
from ..distributions.families import from_dict
from ..distributions.rng import Rng
from ..utils.errors import ParameterError

logger = logging.getLogger("bayescore")


def _as_list(value):
    return value.tolist() if isinstance(value, np.ndarray) else value


def cmd_dist(args: argparse.Namespace) -> int:
    try:
        params = json.loads(args.params)
    except json.JSONDecodeError as e:
        raise ParameterError(f"--params должен быть JSON-объектом: {e}")
    if not isinstance(params, dict):
        raise ParameterError("--params должен быть JSON-объектом")
    d = from_dict({"family": args.family, **params})

    result = {"distribution": d.to_dict()}
    if args.density is not None:
        result["log_density"] = d.log_density(args.density)
        result["density"] = float(np.exp(result["log_density"]))
    if args.cdf is not None:
        result["cdf"] = d.cdf(args.cdf)
    if args.quantile is not None:
        result["quantile"] = d.quantile(args.quantile)
    if args.moments:
        m = d.moments()
        result["moments"] = {"mean": _as_list(m.mean), "variance": _as_list(m.variance)}
    if args.sample:
        rng = Rng(args.seed)
        result["sample"] = _as_list(d.sample(rng, args.sample))
        result["seed"] = rng.seed
    if len(result) == 1:
        raise ParameterError(T["dist_need_query"])
    print(json.dumps(result, ensure_ascii=False, indent=2))
    return 0


def register_dist_handlers(subparsers) -> None:
    """Регистрирует подкоманду dist"""
    parser = subparsers.add_parser("dist", help=T["help_dist"])
    parser.add_argument("family", help="имя семейства, например gauss или beta")
    parser.add_argument("--params", default="{}", help='параметры в JSON, например \'{"mu": 0, "sigma": 1}\'')
    parser.add_argument("--density", type=float, default=None, metavar="X")
    parser.add_argument("--cdf", type=float, default=None, metavar="X")
    parser.add_argument("--quantile", type=float, default=None, metavar="P")
    parser.add_argument("--moments", action="store_true")
    parser.add_argument("--sample", type=int, default=0, metavar="N")
    parser.add_argument("--seed", type=int, default=None)
    parser.set_defaults(handler=cmd_dist)
