"""
Утилиты для отображения прогресса экспериментов в логах.

Этот модуль предоставляет функции для создания текстового
прогресс-бара и форматирования строк о прохождении лестницы разрешений.
"""

from typing import Optional, Sequence


def create_progress_bar(current: int, total: int, width: int = 10) -> str:
    """
    Создает текстовый прогресс-бар.

    Args:
        current: Текущая позиция
        total: Общее количество шагов
        width: Ширина прогресс-бара в символах

    Returns:
        Строка с прогресс-баром
    """
    if total <= 0:
        return f"{'░' * width} 0%"
    current = min(max(current, 0), total)
    filled = int(width * current / total)
    bar = "█" * filled + "░" * (width - filled)
    percentage = int(100 * current / total)
    return f"{bar} {percentage}%"


def format_ladder_progress(
    experiment: str,
    case: str,
    ladder: Sequence[int],
    level: int,
    residual: Optional[float] = None
) -> str:
    """
    Форматирует строку о прохождении уровня лестницы.

    Args:
        experiment: Название эксперимента
        case: Описание случая (оператор, геометрия, плотность)
        ladder: Лестница разрешений
        level: Индекс завершённого уровня (0-based)
        residual: Невязка на этом уровне

    Returns:
        Строка для лога
    """
    progress = create_progress_bar(level + 1, len(ladder))
    line = f"[{experiment}] {case} N={ladder[level]} {progress}"
    if residual is not None:
        line += f" невязка={residual:.3e}"
    return line
