"""
Конфигурационный файл layerlab.

Содержит численные допуски, параметры квадратур, настройки выборок,
именованные пресеты операторов и форм, пороги приёмки экспериментов
и тексты сообщений об ошибках.

Любой параметр можно переопределить через переменные окружения
или файл .env в корне проекта.
"""

import os
from typing import Any, Dict
from dotenv import load_dotenv

# Загружаем переменные окружения из файла .env
load_dotenv()


def _env_float(name: str, default: float) -> float:
    """Читает число с плавающей точкой из окружения."""
    return float(os.getenv(name, str(default)))


def _env_int(name: str, default: int) -> int:
    """Читает целое число из окружения."""
    return int(os.getenv(name, str(default)))


def _env_bool(name: str, default: bool) -> bool:
    """Читает логический флаг из окружения ('1', 'true', 'yes')."""
    return os.getenv(name, str(default)).strip().lower() in ('1', 'true', 'yes', 'on')


# =============================================================================
# ЛОГИРОВАНИЕ И ВЫВОД
# =============================================================================

LOG_LEVEL = os.getenv('LOG_LEVEL', 'INFO')
LOG_FILE = os.getenv('LOG_FILE', 'layerlab.log')

# Каталог для report.json и data/*.csv, если не задан в конфиге эксперимента
OUTPUT_DIR = os.getenv('OUTPUT_DIR', 'results')

# Зерно генератора случайных чисел по умолчанию
DEFAULT_SEED = _env_int('DEFAULT_SEED', 20240601)

# Дополнительно сохранять таблицы в Excel
EXPORT_XLSX = _env_bool('EXPORT_XLSX', False)

# Формат чисел в CSV
CSV_FLOAT_FORMAT = '%.12e'

# =============================================================================
# ЧИСЛЕННЫЕ ДОПУСКИ ОПЕРАТОРА
# =============================================================================

# Собственные значения a² не выше этого порога считаются неэллиптичными
ELLIPTICITY_TOL = _env_float('ELLIPTICITY_TOL', 1e-12)

# Допустимая относительная невязка разложения Холецкого
CHOLESKY_RESIDUAL_TOL = _env_float('CHOLESKY_RESIDUAL_TOL', 1e-13)

# |T⁻¹x| меньше порога считается началом координат
ORIGIN_GUARD = _env_float('ORIGIN_GUARD', 1e-300)

# |λ| меньше порога считается нулём (лапласовское семейство)
LAMBDA_ZERO_TOL = _env_float('LAMBDA_ZERO_TOL', 1e-14)

# =============================================================================
# КВАДРАТУРЫ
# =============================================================================

# Число пар соседей для экстраполяции диагонали ядра на кривой
DIAGONAL_STENCIL = _env_int('DIAGONAL_STENCIL', 4)

# Порядок Гаусса в каждом подтреугольнике правила Даффи
DUFFY_ORDER = _env_int('DUFFY_ORDER', 3)

# Порядок правила для ближних (несингулярных) треугольников
NEAR_FIELD_ORDER = _env_int('NEAR_FIELD_ORDER', 4)

# Треугольники ближе NEAR_FIELD_FACTOR длин ребра считаются ближними
NEAR_FIELD_FACTOR = _env_float('NEAR_FIELD_FACTOR', 2.0)

# Размер блока целевых узлов при матрично-свободном применении в 3D
CHUNK_SIZE = _env_int('CHUNK_SIZE', 256)

# Максимальный уровень подразбиения икосаэдра
MAX_SPHERE_LEVEL = 6

# Минимальное число узлов на кривой
MIN_CURVE_NODES = 16

# =============================================================================
# ВЫБОРКИ ПАР И ТРОЕК
# =============================================================================

# До этого числа узлов перебираются все пары
EXHAUSTIVE_PAIR_LIMIT = _env_int('EXHAUSTIVE_PAIR_LIMIT', 512)

# Число пар в одной диадической полосе при стратифицированной выборке
PAIRS_PER_BAND = _env_int('PAIRS_PER_BAND', 1000)

# Полосы с меньшим числом пар отбрасываются при подгонке показателя
MIN_PAIRS_PER_BAND = _env_int('MIN_PAIRS_PER_BAND', 30)

# Минимальное число полос для подгонки показателя
MIN_FIT_BANDS = 4

# Коэффициент раздувания выборочных норм в проверках неравенств
NORM_INFLATION = _env_float('NORM_INFLATION', 1.05)

# Число троек (x′, x″, y) по умолчанию
TRIPLE_COUNT = _env_int('TRIPLE_COUNT', 10000)

# =============================================================================
# ПРЕСЕТЫ ОПЕРАТОРОВ И ФОРМ
# =============================================================================

# Параметры именованных операторов; см. operators.elliptic_operator.operator_from_preset
OPERATOR_PRESETS: Dict[str, Dict[str, Any]] = {
    "laplace": {},
    "helmholtz": {"kappa": 1.0},
    "modified_helmholtz": {"mu": 1.0},
    "drift": {"b": [1.0, 0.0]},
    "anisotropic": {"a2": [[4.0, 0.0], [0.0, 1.0]]},
}

# Параметры форм по умолчанию
SHAPE_DEFAULTS: Dict[str, Dict[str, Any]] = {
    "circle": {"r": 1.0},
    "ellipse": {"a": 2.0, "b": 1.0},
    "kite": {},
    "star": {"k": 5, "eps": 0.3},
    "sphere": {"r": 1.0},
    "ellipsoid": {"a": 1.0, "b": 1.0, "c": 1.0},
}

# =============================================================================
# ПОРОГИ ПРИЁМКИ
# =============================================================================

ACCEPTANCE: Dict[str, float] = {
    # Невязка тождеств при наибольшем N лестницы
    "identity_tolerance": 1e-5,
    # То же для триангуляций: правило низкого порядка
    "identity_tolerance_3d": 2e-2,
    # Минимальный эмпирический порядок сходимости
    "min_order": 2.0,
    # Невязки ниже этого уровня считаются машинным нулём, порядок не проверяется
    "noise_floor": 1e-11,
    # Допуск самопроверки показателя входной плотности
    "input_exponent_tol": 0.05,
    # Допустимый диапазон показателя выхода
    "output_exponent_min": 0.4,
    "output_exponent_max": 1.05,
    # Допустимый рост отношений для модуля ω₁
    "omega_ratio_max": 2.0,
    # Относительный рост супремумов при измельчении
    "refinement_growth": 0.05,
    # Различие остатка в точках 1e-4 и 1e-6 (предел в 2D)
    "limit_difference": 1e-3,
}

# =============================================================================
# СООБЩЕНИЯ ОБ ОШИБКАХ
# =============================================================================

ERROR_MESSAGES: Dict[str, str] = {
    "non_real_principal_part": "Коэффициент старшей части {gamma} имеет мнимую часть {imag}",
    "bad_multi_index": "Недопустимый мультииндекс {gamma} для размерности {n}",
    "not_elliptic": "Оператор не эллиптичен: минимальное собственное значение a² равно {value}",
    "eval_at_origin": "Фундаментальное решение не определено в начале координат",
    "unsupported_family": "Семейство не поддерживается: n={n}, λ={lam}",
    "unsupported_dimension": "Размерность {n} не поддерживается (допустимы 2 и 3)",
    "bad_shape_params": "Некорректные параметры формы {shape}: {reason}",
    "needs_ambient_form": "Операция '{operation}' требует объемлющей формы плотности",
    "degenerate_node_set": "Все узлы совпадают, полунорма не определена",
    "non_finite_integrand": "Подынтегральная функция содержит нечисловые значения",
    "missing_split": "Для логарифмической квадратуры нужно разложение ядра (KernelSplit)",
    "missing_singularity": "Для правила Даффи нужно объявить особенность ядра",
    "non_finite_kernel": "Ядро '{label}' вернуло нечисловое значение вне диагонали",
    "rough_density_unsupported": "Грубые плотности поддерживаются только на кривых (n=2)",
    "config_error": "Ошибка конфигурации: {reason}",
}
