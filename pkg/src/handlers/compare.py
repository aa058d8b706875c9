"""
Обработчик команды compare: сравнение подгонок по WAIC и DIC
"""
import argparse
import logging
import os

import numpy as np

from ..config.translations import TRANSLATIONS as T
from ..inference.evidence import DicResult, WaicResult, compare_models
from ..storage.artifacts import load_fit, write_json
from ..utils.errors import DataError, ParameterError

logger = logging.getLogger("bayescore")


def _criteria(raw: dict) -> tuple[WaicResult, DicResult | None]:
    try:
        w = raw["waic"]
        waic_result = WaicResult(
            waic=float(w["waic"]),
            lppd=float(w["lppd"]),
            p_waic=float(w["p_waic"]),
            se=float(w["se"]),
            pointwise=np.asarray(w["pointwise"], dtype=float),
        )
    except (KeyError, TypeError) as e:
        raise DataError(f"criteria.json без поточечного WAIC: {e}")
    d = raw.get("dic")
    dic_result = DicResult(**{k: float(d[k]) for k in ("dic", "p_dic", "mean_deviance", "deviance_at_mean")}) if d else None
    return waic_result, dic_result


def _unique_name(fit_dir: str, taken: dict) -> str:
    name = os.path.basename(os.path.normpath(fit_dir)) or fit_dir
    candidate, k = name, 1
    while candidate in taken:
        k += 1
        candidate = f"{name}#{k}"
    return candidate


def cmd_compare(args: argparse.Namespace) -> int:
    if len(args.fits) < 2:
        raise ParameterError(T["compare_too_few"])
    results, hashes = {}, {}
    for fit_dir in args.fits:
        fit = load_fit(fit_dir)
        name = _unique_name(fit_dir, results)
        results[name] = _criteria(fit.criteria)
        hashes[name] = fit.response_hash
    if len(set(hashes.values())) != 1:
        raise DataError(T["compare_hash_mismatch"].format(fits=", ".join(hashes)))

    rows = compare_models(results)
    table = [row.to_dict() for row in rows]
    if args.out:
        write_json(args.out, {"models": table})
    print(T["compare_header"])
    for row in table:
        dic_text = f"{row['dic']:.2f}" if "dic" in row else "-"
        print(T["compare_row"].format(**{**row, "dic": dic_text}))
    logger.info(f"Сравнено моделей: {len(rows)}, лучшая: {rows[0].name}")
    return 0


def register_compare_handlers(subparsers) -> None:
    """Регистрирует подкоманду compare"""
    parser = subparsers.add_parser("compare", help=T["help_compare"])
    parser.add_argument("fits", nargs="+", help="каталоги подгонок")
    parser.add_argument("--out", default=None, help="JSON с таблицей сравнения")
    parser.set_defaults(handler=cmd_compare)
