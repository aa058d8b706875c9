"""
Конфигурация и настройки bayescore
"""

import copy
import os
import json
import logging
from dotenv import load_dotenv

# Загружаем переменные окружения
load_dotenv()

logger = logging.getLogger("bayescore")

# Основные настройки
THREADS = max(1, int(os.getenv("BAYESCORE_THREADS", str(os.cpu_count() or 1))))
LOG_DIR = os.getenv("BAYESCORE_LOG_DIR", "logs")
LOG_LEVEL = os.getenv("BAYESCORE_LOG_LEVEL", "INFO")
CONFIG_PATH = os.getenv("BAYESCORE_CONFIG", "config.json")
APP_VERSION = "0.4.1"

# Конфигурация по умолчанию
DEFAULT_CONFIG = {
    "sampler": {
        "n_chains": 4,
        "n_iter": 3000,
        "n_warmup": 1000,
        "thin": 1,
        "algorithm": "mh",
        "step_scale": 0.1,
        "step_size": 0.05,
        "n_leapfrog": 20,
        "max_init_attempts": 1000,
    },
    "priors": {
        "coefficient_sd": 1.0,
        "intercept_sd": 5.0,
        "precision_alpha": 1.0,
        "precision_beta": 1.0,
        "nu_rate": 0.1,
        "size_rate": 0.1,
        "anova_sigma0": 2.0,
        "group_scale": 2.0,
        "exp_intercept_mu": 0.0,
        "exp_intercept_sigma": 2.0,
        "exp_slope_sigma": 2.0,
    },
    "report": {
        "hpd_mass": 0.95,
        "quantiles": [0.025, 0.25, 0.5, 0.75, 0.975],
        "rhat_warn": 1.01,
        "ess_warn": 400,
    },
    "evidence": {
        "quadrature_grid": 2001,
        "maxent_tol": 1e-10,
        "maxent_max_iter": 200,
    },
}

# Глобальная переменная конфигурации
CONFIG = copy.deepcopy(DEFAULT_CONFIG)


def _merge(base: dict, override: dict) -> dict:
    """Рекурсивно накладывает override на base (base не изменяется)."""
    result = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(result.get(key), dict):
            result[key] = _merge(result[key], value)
        else:
            result[key] = value
    return result


def load_config(path: str | None = None) -> dict:
    """Загружает конфигурацию из config.json поверх значений по умолчанию."""
    global CONFIG
    path = path or CONFIG_PATH
    try:
        if os.path.exists(path):
            with open(path, encoding="utf-8") as f:
                CONFIG = _merge(DEFAULT_CONFIG, json.load(f))
            logger.info(f"Конфигурация успешно загружена из {path}")
        else:
            CONFIG = copy.deepcopy(DEFAULT_CONFIG)
            logger.warning(
                f"Файл {path} не найден, используются настройки по умолчанию"
            )
    except json.JSONDecodeError as e:
        CONFIG = copy.deepcopy(DEFAULT_CONFIG)
        logger.error(
            f"Ошибка чтения {path}: {e}, используются настройки по умолчанию"
        )
    return CONFIG


def get_section(name: str) -> dict:
    """Возвращает секцию текущей конфигурации (копию)."""
    return copy.deepcopy(CONFIG.get(name, DEFAULT_CONFIG.get(name, {})))
