"""
Генератор отчетов по результатам экспериментов.

Этот модуль предоставляет функции для записи отчета в JSON,
таблиц в CSV с фиксированным форматом чисел, необязательной
книги Excel и выгрузки узлов границы.
"""

import json
import logging
import os
from typing import Any, Dict, Optional

import numpy as np
import pandas as pd

from config import CSV_FLOAT_FORMAT

try:
    from openpyxl import Workbook
    from openpyxl.styles import Alignment, Border, Font, PatternFill, Side
    from openpyxl.utils import get_column_letter
    REPORTS_AVAILABLE = True
except ImportError:
    REPORTS_AVAILABLE = False

logger = logging.getLogger(__name__)


def _jsonable(value: Any) -> Any:
    """Приводит numpy-типы и комплексные числа к виду, пригодному для JSON."""
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return _jsonable(value.tolist())
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating,)):
        value = float(value)
    if isinstance(value, (complex, np.complexfloating)):
        return {"re": float(value.real), "im": float(value.imag)}
    if isinstance(value, float) and not np.isfinite(value):
        return str(value)
    return value


def write_report_json(report: Dict[str, Any], path: str) -> str:
    """
    Записывает отчет в JSON с отсортированными ключами.

    Args:
        report: Словарь отчета
        path: Путь к файлу

    Returns:
        Путь к записанному файлу
    """
    os.makedirs(os.path.dirname(path) or '.', exist_ok=True)
    with open(path, 'w', encoding='utf-8') as f:
        json.dump(_jsonable(report), f, ensure_ascii=False, indent=2, sort_keys=True)
    logger.info(f"Отчет записан: {path}")
    return path


def write_tables_csv(tables: Dict[str, pd.DataFrame], directory: str) -> Dict[str, str]:
    """
    Записывает каждую таблицу в отдельный CSV.

    Числа форматируются через CSV_FLOAT_FORMAT, чтобы при одинаковом
    seed файлы совпадали побайтно.

    Returns:
        Словарь имя таблицы → путь
    """
    os.makedirs(directory, exist_ok=True)
    paths = {}
    for name, frame in sorted(tables.items()):
        path = os.path.join(directory, f"{name}.csv")
        frame.to_csv(path, index=False, float_format=CSV_FLOAT_FORMAT, lineterminator='\n')
        paths[name] = path
    logger.info(f"Записано таблиц CSV: {len(paths)} в {directory}")
    return paths


def generate_excel_report(tables: Dict[str, pd.DataFrame], path: str) -> Optional[str]:
    """
    Генерирует книгу Excel: по листу на таблицу.

    Returns:
        Путь к файлу или None, если openpyxl не установлен
    """
    if not REPORTS_AVAILABLE:
        logger.warning("openpyxl не установлен, отчет Excel пропущен")
        return None

    wb = Workbook()
    wb.remove(wb.active)
    header_font = Font(bold=True, color="FFFFFF")
    header_fill = PatternFill(start_color="4472C4", end_color="4472C4", fill_type="solid")
    border = Border(left=Side(style='thin'), right=Side(style='thin'),
                    top=Side(style='thin'), bottom=Side(style='thin'))

    for name, frame in sorted(tables.items()):
        # Excel ограничивает имя листа 31 символом
        ws = wb.create_sheet(title=name[:31])
        for col, header in enumerate(frame.columns, 1):
            cell = ws.cell(row=1, column=col, value=str(header))
            cell.font = header_font
            cell.fill = header_fill
            cell.border = border
            cell.alignment = Alignment(horizontal="center")
        for row_idx, row in enumerate(frame.itertuples(index=False), 2):
            for col, value in enumerate(row, 1):
                if isinstance(value, (np.floating, np.integer)):
                    value = value.item()
                elif isinstance(value, complex):
                    value = str(value)
                ws.cell(row=row_idx, column=col, value=value).border = border
        for col in range(1, len(frame.columns) + 1):
            letter = get_column_letter(col)
            width = max((len(str(c.value)) for c in ws[letter] if c.value is not None), default=8)
            ws.column_dimensions[letter].width = min(width + 2, 40)

    os.makedirs(os.path.dirname(path) or '.', exist_ok=True)
    wb.save(path)
    logger.info(f"Отчет Excel записан: {path}")
    return path


# Имена осей в выгрузке узлов
AXIS_NAMES = ("x", "y", "z")


def surface_to_frame(surface) -> pd.DataFrame:
    """Узлы, нормали и веса границы в виде таблицы (x, y[, z], nu_x, nu_y[, nu_z], w)."""
    axes = AXIS_NAMES[:surface.n]
    data = {}
    for k, axis in enumerate(axes):
        data[axis] = surface.nodes[:, k]
    for k, axis in enumerate(axes):
        data[f"nu_{axis}"] = surface.normals[:, k]
    data["w"] = surface.weights
    return pd.DataFrame(data)
