"""
Главный файл для запуска экспериментов layerlab.

Этот файл содержит точку входа командной строки: разбор аргументов,
настройку логирования, запуск обработчика эксперимента и запись
отчётов (report.json, data/*.csv, необязательный report.xlsx, узлы границ).
"""

import argparse
import logging
import os
import sys
from typing import List, Optional

import colorlog

from config import EXPORT_XLSX, LOG_FILE, LOG_LEVEL
from handlers.regularity_lab import ExperimentConfig, RegularityReport, run_experiment
from utils.exceptions import LayerLabError
from utils.report_generator import generate_excel_report, write_report_json, write_tables_csv

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'

# Подкоманды CLI и соответствующие им эксперименты
COMMANDS = {
    "verify-identities": "identities",
    "measure-gain": "gain",
    "kernel-norms": "kernel_norms",
    "decompose-fs": "decomposition",
}

logger = logging.getLogger(__name__)


def setup_logging(level: str = LOG_LEVEL, log_file: Optional[str] = LOG_FILE) -> None:
    """Настраивает корневой логгер: файл (utf-8) и цветной вывод в консоль."""
    root = logging.getLogger()
    root.setLevel(level)
    for handler in list(root.handlers):
        root.removeHandler(handler)

    console = colorlog.StreamHandler()
    console.setFormatter(colorlog.ColoredFormatter(
        '%(log_color)s' + LOG_FORMAT,
        log_colors={
            'DEBUG': 'cyan',
            'INFO': 'green',
            'WARNING': 'yellow',
            'ERROR': 'red',
            'CRITICAL': 'bold_red',
        },
    ))
    root.addHandler(console)

    if log_file:
        file_handler = logging.FileHandler(log_file, encoding='utf-8')
        file_handler.setFormatter(logging.Formatter(LOG_FORMAT))
        root.addHandler(file_handler)


def build_parser() -> argparse.ArgumentParser:
    """Парсер аргументов с подкомандами экспериментов."""
    parser = argparse.ArgumentParser(
        prog="layerlab",
        description="Численные эксперименты с потенциалами слоя и их касательными производными",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)
    for command in COMMANDS:
        sub = subparsers.add_parser(command)
        sub.add_argument("--config", help="JSON-файл конфигурации эксперимента")
        sub.add_argument("--output-dir", help="Каталог для отчётов (перекрывает output_dir)")
        sub.add_argument("--seed", type=int, help="Зерно выборок (перекрывает seed)")
        sub.add_argument("--workers", type=int, help="Число потоков для независимых случаев")
        sub.add_argument("--xlsx", action="store_true", help="Сохранить таблицы в report.xlsx")
        sub.add_argument("--log-level", default=None, help="Уровень логирования")
    return parser


def load_config(args: argparse.Namespace) -> ExperimentConfig:
    """Конфигурация из файла (или значения по умолчанию) с перекрытиями из CLI."""
    experiment = COMMANDS[args.command]
    config = (ExperimentConfig.from_file(args.config, experiment) if args.config
              else ExperimentConfig.from_dict({}, experiment))
    if args.output_dir:
        config.output_dir = args.output_dir
    if args.seed is not None:
        config.seed = args.seed
    if args.workers is not None:
        config.workers = max(1, args.workers)
    return config


def write_outputs(report: RegularityReport, output_dir: str, xlsx: bool = False) -> None:
    """Записывает report.json, data/*.csv, узлы границ и, при запросе, report.xlsx."""
    write_report_json(report.to_dict(), os.path.join(output_dir, "report.json"))
    write_tables_csv(report.tables, os.path.join(output_dir, "data"))
    if report.surfaces:
        write_tables_csv(report.surfaces, os.path.join(output_dir, "nodes"))
    if xlsx:
        generate_excel_report(report.tables, os.path.join(output_dir, "report.xlsx"))


def main(argv: Optional[List[str]] = None) -> int:
    """
    Запускает эксперимент из командной строки.

    Эта функция:
    1. Разбирает аргументы и настраивает логирование
    2. Читает конфигурацию эксперимента
    3. Запускает обработчик эксперимента
    4. Записывает отчёты в каталог вывода
    5. Возвращает код выхода: 0 - все проверки пройдены, 1 - есть
       непройденные, 2 - ошибка предметной области или конфигурации
    """
    args = build_parser().parse_args(argv)
    setup_logging(args.log_level or LOG_LEVEL)

    try:
        config = load_config(args)
        logger.info(f"Эксперимент {config.experiment}: seed={config.seed}, вывод в {config.output_dir}")
        report = run_experiment(config)
        write_outputs(report, config.output_dir, xlsx=args.xlsx or EXPORT_XLSX)
    except LayerLabError as e:
        logger.error(f"Эксперимент прерван: {e}")
        return 2

    failed = [v.name for v in report.verdicts if not v.passed]
    if failed:
        logger.warning(f"Не пройдено проверок: {len(failed)} из {len(report.verdicts)}")
        return 1
    logger.info(f"Все проверки пройдены: {len(report.verdicts)}")
    return 0


def run() -> None:
    """Точка входа консольного скрипта layerlab."""
    try:
        sys.exit(main())
    except KeyboardInterrupt:
        logger.info("Эксперимент остановлен пользователем")
        sys.exit(130)


if __name__ == '__main__':
    run()
