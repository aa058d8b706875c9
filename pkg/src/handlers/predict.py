"""
Обработчик команды predict: апостериорное предсказание по сохранённой подгонке
"""
import argparse
import logging
import os

import numpy as np

from ..config.translations import TRANSLATIONS as T
from ..distributions.rng import Rng
from ..models.predictive import posterior_predictive, predictive_check_report
from ..storage.artifacts import load_fit, write_frame, write_json
from ..storage.datasets import label_columns, load_dataset, model_inputs
from ..utils.errors import ParameterError
from ..utils.validators import validate_seed

logger = logging.getLogger("bayescore")


def report_path(out_path: str) -> str:
    root, _ = os.path.splitext(out_path)
    return root + ".json"


def cmd_predict(args: argparse.Namespace) -> int:
    ok, message = validate_seed(args.seed)
    if not ok:
        raise ParameterError(message)
    fit = load_fit(args.fit)
    spec = fit.model.spec
    dataset = load_dataset(args.newdata, drop_na=args.drop_na, label_columns=label_columns(spec))
    inputs = model_inputs(dataset, spec, with_response=False)
    rng = Rng(args.seed)
    pred = posterior_predictive(
        fit.chains,
        fit.model,
        inputs["X"],
        rng,
        groups=inputs["groups"],
        trials=inputs["trials"],
        exposure=inputs["exposure"],
    )
    write_frame(args.out, pred.to_frame())

    # отклик в новых данных необязателен; если он есть, считаем PIT
    observed = dataset.column(spec.response) if spec.response in dataset.columns else np.array([])
    check = predictive_check_report(pred, observed)
    report = {"seed": rng.seed, "fit": args.fit, "n_draws": pred.n_draws, "n_cases": pred.n_cases, **check.to_dict()}
    write_json(args.report or report_path(args.out), report)

    lower, upper = np.quantile(pred.draws, [0.025, 0.975], axis=0)
    for j in range(pred.n_cases):
        print(T["predict_row"].format(case=j + 1, mean=check.predictive_mean[j], lower=lower[j], upper=upper[j]))
    print(T["predict_done"].format(draws=pred.n_draws, cases=pred.n_cases, out_path=args.out))
    return 0


def register_predict_handlers(subparsers) -> None:
    """Регистрирует подкоманду predict"""
    parser = subparsers.add_parser("predict", help=T["help_predict"])
    parser.add_argument("--fit", required=True, help="каталог подгонки")
    parser.add_argument("--newdata", required=True, help="CSV с новыми случаями")
    parser.add_argument("--out", required=True, help="CSV предсказательных выборок")
    parser.add_argument("--report", default=None, help="JSON-отчёт (по умолчанию рядом с --out)")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--drop-na", action="store_true")
    parser.set_defaults(handler=cmd_predict)
