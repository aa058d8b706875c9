"""
Обработчик команды fit: подгонка модели к набору данных
"""
import argparse
import logging
import os

from ..config import settings
from ..config.translations import TRANSLATIONS as T
from ..inference.evidence import dic, pointwise_log_lik, waic
from ..mcmc.diagnostics import summarize
from ..mcmc.samplers import run
from ..mcmc.targets import ChainSet, SamplerConfig
from ..models import glm
from ..models.spec import parse_model_spec
from ..storage.artifacts import SUMMARY_FILE, read_json, save_fit
from ..storage.datasets import label_columns, load_dataset, model_inputs
from ..utils.errors import ParameterError
from ..utils.validators import validate_seed

logger = logging.getLogger("bayescore")


def _summary_options() -> dict:
    report = settings.get_section("report")
    return {
        "hpd_mass": float(report.get("hpd_mass", 0.95)),
        "quantiles": tuple(report.get("quantiles", (0.025, 0.25, 0.5, 0.75, 0.975))),
        "rhat_warn": float(report.get("rhat_warn", 1.01)),
        "ess_warn": float(report.get("ess_warn", 400)),
    }


def sampler_config(spec_sampler: dict, args: argparse.Namespace) -> SamplerConfig:
    """Флаги командной строки важнее описания модели, описание важнее config.json."""
    ok, message = validate_seed(args.seed)
    if not ok:
        raise ParameterError(message)
    section = {**settings.get_section("sampler"), **spec_sampler}
    return SamplerConfig.from_settings(
        section,
        n_chains=args.chains,
        n_iter=args.iter,
        n_warmup=args.warmup,
        thin=args.thin,
        seed=args.seed,
        algorithm=args.algorithm,
    )


def cmd_fit(args: argparse.Namespace) -> int:
    spec = parse_model_spec(read_json(args.model))
    dataset = load_dataset(args.data, drop_na=args.drop_na, label_columns=label_columns(spec))
    inputs = model_inputs(dataset, spec)
    target = glm.compile(spec, **inputs)
    model = target.model
    print(T["fit_start"].format(
        family=spec.family, link=spec.link.value, n_obs=dataset.n_rows, dimension=model.dimension
    ))

    chains = run(target, sampler_config(spec.sampler, args))
    options = _summary_options()
    summary = {name: s.to_dict() for name, s in summarize(chains, **options).items()}

    raw = glm.destandardize_draws(model, chains)
    raw_chains = ChainSet.from_frame(raw, n_free=raw.shape[1] - 2, seed=chains.seed)
    destandardized = {name: s.to_dict() for name, s in summarize(raw_chains, **options).items()}

    waic_result = waic(pointwise_log_lik(chains, target))
    dic_result = dic(chains, target)
    criteria = {"waic": waic_result.to_dict(with_pointwise=True), "dic": dic_result.to_dict()}
    logger.info(f"WAIC = {waic_result.waic:.3f} (se {waic_result.se:.3f}), DIC = {dic_result.dic:.3f}")

    save_fit(
        args.out,
        model,
        chains,
        summary,
        destandardized,
        criteria,
        response_hash=dataset.fingerprint(spec.response),
        n_obs=dataset.n_rows,
    )
    flagged = [name for name, s in summary.items() if s["warnings"]]
    if flagged:
        print(T["fit_warnings"].format(count=len(flagged), file=os.path.join(args.out, SUMMARY_FILE)))
    if sum(chains.divergences):
        print(T["fit_divergences"].format(count=sum(chains.divergences)))
    print(T["fit_done"].format(out_dir=args.out))
    return 0


def register_fit_handlers(subparsers) -> None:
    """Регистрирует подкоманду fit"""
    parser = subparsers.add_parser("fit", help=T["help_fit"])
    parser.add_argument("--data", required=True, help="CSV с данными")
    parser.add_argument("--model", required=True, help="JSON-описание модели")
    parser.add_argument("--out", required=True, help="каталог результатов")
    parser.add_argument("--chains", type=int, default=None)
    parser.add_argument("--iter", type=int, default=None)
    parser.add_argument("--warmup", type=int, default=None)
    parser.add_argument("--thin", type=int, default=None)
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--algorithm", choices=["mh", "gibbs", "hmc"], default=None)
    parser.add_argument("--drop-na", action="store_true", help="удалять строки с пропусками")
    parser.set_defaults(handler=cmd_fit)
