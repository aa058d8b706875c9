"""
Каталог результатов подгонки: выборки, сводки, описание модели и метаданные
"""
import json
import logging
import math
import os
from dataclasses import dataclass

import numpy as np
import pandas as pd

from ..config import settings
from ..mcmc.targets import ChainSet
from ..models.glm import CompiledModel
from ..utils.errors import DataError, MetaMismatchError

logger = logging.getLogger("bayescore")

DRAWS_FILE = "draws.csv"
SUMMARY_FILE = "summary.json"
DESTANDARDIZED_FILE = "destandardized.json"
MODEL_FILE = "model.json"
META_FILE = "meta.json"
CRITERIA_FILE = "criteria.json"

FLOAT_FORMAT = "%.17g"


def _plain(obj):
    """JSON-совместимый вид: numpy -> python, NaN/inf -> null."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        value = float(obj)
        return value if math.isfinite(value) else None
    return obj


def write_json(path: str, obj) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(_plain(obj), f, ensure_ascii=False, indent=2)
        f.write("\n")


def read_json(path: str):
    """
    Читает JSON-файл

    Raises:
        DataError: файл отсутствует или содержит некорректный JSON
    """
    try:
        with open(path, encoding="utf-8") as f:
            return json.load(f)
    except FileNotFoundError:
        raise DataError(f"Файл не найден: {path}")
    except json.JSONDecodeError as e:
        raise DataError(f"Некорректный JSON в {path}: {e}")


def write_frame(path: str, frame: pd.DataFrame) -> None:
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, encoding="utf-8", lineterminator="\n")


@dataclass(eq=False)
class FitArtifacts:
    """Содержимое каталога подгонки."""

    model: CompiledModel
    chains: ChainSet
    meta: dict
    summary: dict
    criteria: dict

    @property
    def response_hash(self) -> str:
        return self.meta.get("response_hash", "")


def save_fit(
    out_dir: str,
    model: CompiledModel,
    chains: ChainSet,
    summary: dict,
    destandardized: dict,
    criteria: dict,
    response_hash: str,
    n_obs: int,
) -> None:
    """Записывает каталог подгонки (один писатель, файлы перезаписываются)."""
    os.makedirs(out_dir, exist_ok=True)
    write_frame(os.path.join(out_dir, DRAWS_FILE), chains.to_frame())
    write_json(os.path.join(out_dir, SUMMARY_FILE), {"seed": chains.seed, "parameters": summary})
    write_json(os.path.join(out_dir, DESTANDARDIZED_FILE), destandardized)
    write_json(os.path.join(out_dir, MODEL_FILE), model.to_dict())
    write_json(os.path.join(out_dir, CRITERIA_FILE), criteria)
    write_json(
        os.path.join(out_dir, META_FILE),
        {
            "version": settings.APP_VERSION,
            "algorithm": chains.algorithm,
            "seed": chains.seed,
            "chain_seeds": chains.seeds,
            "n_free": chains.n_free,
            "warmup_used": chains.warmup_used,
            "thin": chains.thin,
            "acceptance_rate": chains.acceptance_rate,
            "divergences": chains.divergences,
            "response_hash": response_hash,
            "n_obs": n_obs,
        },
    )
    logger.info(f"Результаты подгонки записаны в {out_dir}")


def load_fit(fit_dir: str) -> FitArtifacts:
    """
    Восстанавливает подгонку из каталога

    Raises:
        DataError: нет файлов подгонки
        MetaMismatchError: выборки не согласуются с описанием модели
    """
    if not os.path.isdir(fit_dir):
        raise DataError(f"Каталог подгонки не найден: {fit_dir}")
    meta = read_json(os.path.join(fit_dir, META_FILE))
    model = CompiledModel.from_dict(read_json(os.path.join(fit_dir, MODEL_FILE)))
    draws_path = os.path.join(fit_dir, DRAWS_FILE)
    try:
        frame = pd.read_csv(draws_path, encoding="utf-8", float_precision="round_trip")
    except FileNotFoundError:
        raise DataError(f"Файл выборок не найден: {draws_path}")
    chains = ChainSet.from_frame(
        frame,
        n_free=int(meta["n_free"]),
        warmup_used=int(meta.get("warmup_used", 0)),
        thin=int(meta.get("thin", 1)),
        seeds=meta.get("chain_seeds", []),
        acceptance_rate=meta.get("acceptance_rate", []),
        divergences=meta.get("divergences", []),
        algorithm=meta.get("algorithm", ""),
        seed=meta.get("seed"),
    )
    if tuple(chains.free_names) != tuple(model.layout.names):
        raise MetaMismatchError(f"Столбцы {DRAWS_FILE} не совпадают с параметрами модели")
    summary = read_json(os.path.join(fit_dir, SUMMARY_FILE))
    criteria = read_json(os.path.join(fit_dir, CRITERIA_FILE))
    return FitArtifacts(model, chains, meta, summary, criteria)
