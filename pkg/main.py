"""
Точка входа командной строки bayescore
"""
import argparse
import logging
import os
import sys
from logging.handlers import TimedRotatingFileHandler

from src.config import settings
from src.config.translations import TRANSLATIONS as T
from src.handlers.compare import register_compare_handlers
from src.handlers.decide import register_decide_handlers
from src.handlers.dist import register_dist_handlers
from src.handlers.fit import register_fit_handlers
from src.handlers.predict import register_predict_handlers
from src.utils.errors import BayesError, SpecError

EXIT_OK = 0
EXIT_USER = 2
EXIT_RUNTIME = 3


def setup_logging(level: str | None = None):
    """Настройка логирования"""
    logger = logging.getLogger("bayescore")
    logger.setLevel(getattr(logging, (level or settings.LOG_LEVEL).upper(), logging.INFO))
    if logger.handlers:
        return logger

    fmt = logging.Formatter("%(asctime)s | %(levelname)s | %(message)s")
    os.makedirs(settings.LOG_DIR, exist_ok=True)

    # Обработчик для основного лога
    h_info = TimedRotatingFileHandler(
        os.path.join(settings.LOG_DIR, "bayescore.log"), when="midnight", backupCount=7, encoding="utf-8"
    )
    h_info.setLevel(logging.INFO)
    h_info.setFormatter(fmt)
    logger.addHandler(h_info)

    # Обработчик для ошибок
    h_err = TimedRotatingFileHandler(
        os.path.join(settings.LOG_DIR, "error.log"), when="midnight", backupCount=7, encoding="utf-8"
    )
    h_err.setLevel(logging.ERROR)
    h_err.setFormatter(fmt)
    logger.addHandler(h_err)

    # Консольный вывод
    console = logging.StreamHandler(sys.stderr)
    console.setFormatter(fmt)
    logger.addHandler(console)

    return logger


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bayescore", description=T["description"])
    parser.add_argument("--config", default=None, help="путь к config.json")
    parser.add_argument("--log-level", default=None, help="DEBUG, INFO, WARNING, ERROR")
    parser.add_argument("--version", action="version", version=f"{T['version_pre']}{settings.APP_VERSION}")
    subparsers = parser.add_subparsers(dest="command", required=True)

    # Регистрация подкоманд
    register_fit_handlers(subparsers)
    register_predict_handlers(subparsers)
    register_compare_handlers(subparsers)
    register_decide_handlers(subparsers)
    register_dist_handlers(subparsers)
    return parser


def main(argv: list[str] | None = None) -> int:
    """Разбирает аргументы, выполняет подкоманду и возвращает код выхода"""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        # argparse завершает работу с кодом 2 при ошибке разбора
        return int(e.code or 0)

    logger = setup_logging(args.log_level)
    settings.load_config(args.config)
    logger.info(f"bayescore {settings.APP_VERSION}: команда {args.command}")

    try:
        return args.handler(args)
    except SpecError as e:
        logger.error(f"Ошибка в описании модели ({e.field}): {e}")
        text = T["err_field"].format(field=e.field, error=e) if e.field else T["err_user"].format(error=e)
        print(text, file=sys.stderr)
        return EXIT_USER
    except BayesError as e:
        if e.user_error:
            logger.error(f"Ошибка входных данных: {e}")
            print(T["err_user"].format(error=e), file=sys.stderr)
            return EXIT_USER
        logger.error(f"Ошибка выполнения: {e}")
        print(T["err_runtime"].format(error=e), file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as e:
        logger.exception(f"Непредвиденная ошибка: {e}")
        print(T["err_unexpected"].format(error=e), file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
