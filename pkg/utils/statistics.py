"""
Модуль статистической обработки результатов экспериментов.

Предоставляет функции для:
- Расчёта эмпирических порядков сходимости по лестнице разрешений
- Максимумов частных по диадическим полосам расстояний
- Подгонки наклона в логарифмических координатах
- Оценки роста частных при уменьшении расстояния (рост ω₁)
"""

import logging
from typing import List, Optional, Sequence

import numpy as np
import pandas as pd

from config import MIN_FIT_BANDS, MIN_PAIRS_PER_BAND

logger = logging.getLogger(__name__)


def empirical_orders(ns: Sequence[int], residuals: Sequence[float]) -> List[Optional[float]]:
    """
    Порядки log(r_k/r_{k+1}) / log(N_{k+1}/N_k) между соседними уровнями лестницы.

    Args:
        ns: Число узлов на каждом уровне
        residuals: Невязки на тех же уровнях

    Returns:
        Список длины len(ns) − 1; None, если одна из невязок нулевая
    """
    orders: List[Optional[float]] = []
    for k in range(len(ns) - 1):
        r0, r1 = float(residuals[k]), float(residuals[k + 1])
        if r0 <= 0 or r1 <= 0:
            orders.append(None)
            continue
        orders.append(float(np.log(r0 / r1) / np.log(ns[k + 1] / ns[k])))
    return orders


def dyadic_band_maxima(distances: np.ndarray, quotients: np.ndarray,
                       min_pairs: int = MIN_PAIRS_PER_BAND,
                       d_min: float = 0.0, d_max: float = np.inf) -> pd.DataFrame:
    """
    Максимум частного в каждой полосе [2^{−k−1}, 2^{−k}) расстояний.

    Полосы с числом пар меньше min_pairs отбрасываются.

    Returns:
        DataFrame со столбцами band, pairs, max_quotient, separation
    """
    distances = np.asarray(distances, dtype=float)
    quotients = np.asarray(quotients, dtype=float)
    keep = (distances > 0) & (distances >= d_min) & (distances <= d_max) & np.isfinite(quotients)
    distances, quotients = distances[keep], quotients[keep]
    rows = []
    if distances.size:
        bands = np.floor(-np.log2(distances)).astype(int)
        for k in np.unique(bands):
            members = np.flatnonzero(bands == k)
            if members.size < min_pairs:
                continue
            best = members[np.argmax(quotients[members])]
            rows.append({
                "band": int(k),
                "pairs": int(members.size),
                "max_quotient": float(quotients[best]),
                "separation": float(distances[best]),
            })
    frame = pd.DataFrame(rows, columns=["band", "pairs", "max_quotient", "separation"])
    return frame.sort_values("band").reset_index(drop=True)


def fit_loglog_slope(bands: pd.DataFrame, min_bands: int = MIN_FIT_BANDS) -> Optional[float]:
    """
    Наклон прямой log(max_quotient) от log(separation) методом наименьших квадратов.

    Returns:
        Наклон или None, если полос меньше min_bands
    """
    usable = bands[bands["max_quotient"] > 0]
    if len(usable) < min_bands:
        logger.warning(f"Недостаточно полос для подгонки: {len(usable)} < {min_bands}")
        return None
    slope, _ = np.polyfit(np.log(usable["separation"].to_numpy()),
                          np.log(usable["max_quotient"].to_numpy()), 1)
    return float(slope)


def holder_exponent(bands: pd.DataFrame, min_bands: int = MIN_FIT_BANDS) -> Optional[float]:
    """
    Эмпирический показатель Гёльдера по максимумам |f(x)−f(y)|/|x−y|.

    Частное ведёт себя как d^{β−1}, поэтому показатель равен наклону плюс один.
    """
    slope = fit_loglog_slope(bands, min_bands)
    return None if slope is None else slope + 1.0


def omega_blowup_ratio(bands: pd.DataFrame, finest: int = MIN_FIT_BANDS) -> Optional[float]:
    """
    Отношение максимального частного по finest самым мелким полосам к частному
    самой грубой из них; ограниченность отношения означает отсутствие роста.
    """
    if len(bands) < finest:
        return None
    tail = bands.sort_values("band").tail(finest)
    reference = float(tail["max_quotient"].iloc[0])
    if reference <= 0:
        return None
    return float(tail["max_quotient"].max() / reference)


def refinement_delta(coarse: float, fine: float) -> float:
    """Относительное изменение величины между двумя уровнями лестницы."""
    scale = max(abs(coarse), abs(fine))
    return 0.0 if scale == 0 else abs(fine - coarse) / scale
