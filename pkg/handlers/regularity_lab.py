"""
Обработчики экспериментов layerlab.

Предоставляет функции для:
- Проверки тождеств для касательных производных потенциалов по лестнице N
- Измерения выигрыша гладкости двойного слоя (показатель Гёльдера, модуль ω₁)
- Отчётов по нормам ядер потенциального типа
- Исследования разложения фундаментального решения на главную часть и остаток

Каждый обработчик возвращает RegularityReport с таблицами (experiment, N,
quantity, value) и вердиктами, в которых записаны измеренное значение и допуск.
"""

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Mapping, Optional, Sequence

import numpy as np
import pandas as pd

from config import ACCEPTANCE, DEFAULT_SEED, MIN_PAIRS_PER_BAND, OUTPUT_DIR, TRIPLE_COUNT
from geometry.boundary_geometry import (
    SURFACE_SHAPES,
    BoundarySurface,
    Density,
    Modulus,
    PairSampler,
    coordinate_density,
    density_from_spec,
    make_surface,
    tangential_M,
)
from geometry.quadrature import rule_for
from operators.elliptic_operator import CoefficientVector, load_coefficients, operator_from_preset
from operators.fundamental_solution import (
    Family,
    gradient_parity_probe,
    make_fundamental_solution,
    remainder,
    remainder_limit,
)
from potentials.kernel_classes import (
    KernelHandle,
    TripleSampler,
    check_product_inequality,
    embedding_check,
    frozen_direction_check,
    gradient_kernel,
    hessian_kernel,
    homogeneous_kernel,
    norm_Ks1s2s3,
    sharp_norm,
    tangential_gradient_kernel,
    xi_kernel,
    zero_kernel,
)
from potentials.layer_potentials import (
    LayerContext,
    double_layer_W,
    gauss_truncated_sup,
    residual_gradQ,
    residual_pljr,
    residual_slay2,
    residual_wregn,
    residual_wstar,
)
from utils.exceptions import ConfigError, NeedsAmbientForm, RoughDensityUnsupported
from utils.progress_bar import format_ladder_progress
from utils.report_generator import surface_to_frame
from utils.statistics import (
    dyadic_band_maxima,
    empirical_orders,
    holder_exponent,
    omega_blowup_ratio,
    refinement_delta,
)

logger = logging.getLogger(__name__)

IDENTITIES = ("slay2", "wregn", "wstar", "gradQ", "pljr")
EXPERIMENTS = ("identities", "gain", "kernel_norms", "decomposition")
TABLE_COLUMNS = ["experiment", "N", "quantity", "value"]


# =============================================================================
# КОНФИГУРАЦИЯ И ОТЧЁТ
# =============================================================================

def _as_list(data: Mapping[str, Any], single: str, plural: str, default: List[Any]) -> List[Any]:
    """Берёт список из ключа plural или одиночное значение из ключа single."""
    if plural in data:
        value = data[plural]
        return list(value) if isinstance(value, (list, tuple)) else [value]
    if single in data:
        return [data[single]]
    return list(default)


@dataclass
class ExperimentConfig:
    """Конфигурация одного запуска эксперимента."""
    experiment: str
    operators: List[Any] = field(default_factory=lambda: ["laplace"])
    geometries: List[Any] = field(default_factory=lambda: [{"kind": "circle"}])
    densities: List[Any] = field(default_factory=lambda: ["one"])
    identities: List[str] = field(default_factory=lambda: list(IDENTITIES))
    ladder: List[int] = field(default_factory=lambda: [64, 128, 256])
    levels: List[int] = field(default_factory=lambda: [2, 3])
    moduli: List[Dict[str, Any]] = field(default_factory=list)
    tolerances: Dict[str, float] = field(default_factory=lambda: dict(ACCEPTANCE))
    seed: int = DEFAULT_SEED
    output_dir: str = OUTPUT_DIR
    workers: int = 1
    max_separation: float = 0.25
    triple_count: int = TRIPLE_COUNT
    sharp_geometry: Optional[Dict[str, Any]] = None
    sharp_ladder: List[int] = field(default_factory=lambda: [256, 1024])
    raw: Dict[str, Any] = field(default_factory=dict)

    @classmethod
    def from_dict(cls, data: Mapping[str, Any], experiment: Optional[str] = None) -> 'ExperimentConfig':
        """
        Строит конфигурацию из словаря (разобранного JSON).

        Raises:
            ConfigError: Неизвестный эксперимент, тождество или неубывающая лестница
        """
        data = dict(data)
        experiment = experiment or data.get("experiment")
        if experiment not in EXPERIMENTS:
            raise ConfigError(reason=f"неизвестный эксперимент '{experiment}'")
        defaults = _EXPERIMENT_DEFAULTS[experiment]

        ladder = [int(v) for v in data.get("ladder", defaults.get("ladder", [64, 128, 256]))]
        if not ladder or any(b <= a for a, b in zip(ladder, ladder[1:])):
            raise ConfigError(reason=f"лестница {ladder} должна строго возрастать")
        levels = [int(v) for v in data.get("levels", [2, 3])]
        if any(b <= a for a, b in zip(levels, levels[1:])):
            raise ConfigError(reason=f"уровни {levels} должны строго возрастать")

        identities = [str(v) for v in data.get("identities", IDENTITIES)]
        unknown = sorted(set(identities) - set(IDENTITIES))
        if unknown:
            raise ConfigError(reason=f"неизвестные тождества {unknown}")

        tolerances = dict(ACCEPTANCE)
        tolerances.update({k: float(v) for k, v in data.get("tolerances", {}).items()})
        if "tolerance" in data:
            tolerances["identity_tolerance"] = float(data["tolerance"])

        workers = int(data.get("workers", 1))
        if workers < 1:
            raise ConfigError(reason=f"workers={workers} должно быть положительным")

        return cls(
            experiment=experiment,
            operators=_as_list(data, "operator", "operators", defaults.get("operators", ["laplace"])),
            geometries=_as_list(data, "geometry", "geometries", defaults.get("geometries", [{"kind": "circle"}])),
            densities=_as_list(data, "density", "densities", defaults.get("densities", ["one"])),
            identities=identities,
            ladder=ladder,
            levels=levels,
            moduli=list(data.get("moduli", [])),
            tolerances=tolerances,
            seed=int(data.get("seed", DEFAULT_SEED)),
            output_dir=str(data.get("output_dir", OUTPUT_DIR)),
            workers=workers,
            max_separation=float(data.get("max_separation", 0.25)),
            triple_count=int(data.get("triple_count", TRIPLE_COUNT)),
            sharp_geometry=data.get("sharp_geometry", defaults.get("sharp_geometry")),
            sharp_ladder=[int(v) for v in data.get("sharp_ladder", [256, 1024])],
            raw=data,
        )

    @classmethod
    def from_file(cls, path: str, experiment: Optional[str] = None) -> 'ExperimentConfig':
        """Читает конфигурацию из JSON-файла."""
        try:
            with open(path, 'r', encoding='utf-8') as f:
                data = json.load(f)
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(reason=f"не удалось прочитать {path}: {e}")
        return cls.from_dict(data, experiment)

    def to_dict(self) -> Dict[str, Any]:
        """Эхо конфигурации для report.json."""
        return {
            "experiment": self.experiment,
            "operators": self.operators,
            "geometries": self.geometries,
            "densities": self.densities,
            "identities": self.identities,
            "ladder": self.ladder,
            "levels": self.levels,
            "moduli": self.moduli,
            "tolerances": self.tolerances,
            "seed": self.seed,
            "workers": self.workers,
            "max_separation": self.max_separation,
            "triple_count": self.triple_count,
            "sharp_geometry": self.sharp_geometry,
            "sharp_ladder": self.sharp_ladder,
        }


_EXPERIMENT_DEFAULTS: Dict[str, Dict[str, Any]] = {
    "identities": {},
    "gain": {
        "geometries": [{"kind": "kite"}],
        "ladder": [1024],
        "densities": [
            {"kind": "rough_antiderivative", "beta": 0.5, "theta0": float(np.pi)},
            {"kind": "rough_abs_sin", "beta": 1.0, "theta0": float(np.pi)},
        ],
    },
    "kernel_norms": {
        "ladder": [128, 256],
        "sharp_geometry": {"kind": "ellipse", "a": 2.0, "b": 1.0},
    },
    "decomposition": {
        "operators": [
            {"preset": "laplace", "n": 2},
            {"preset": "helmholtz", "n": 2, "kappa": 1.0},
            {"preset": "drift", "n": 2},
            {"preset": "laplace", "n": 3},
            {"preset": "modified_helmholtz", "n": 3, "mu": 1.0},
            {"preset": "helmholtz", "n": 3, "kappa": 1.0},
        ],
    },
}


@dataclass
class Verdict:
    """Результат проверки: измеренное значение, допуск и способ сравнения."""
    name: str
    measured: float
    tolerance: Any
    comparison: str
    passed: bool

    @classmethod
    def check(cls, name: str, measured: Optional[float], tolerance: Any, comparison: str) -> 'Verdict':
        """
        Сравнивает measured с tolerance.

        comparison: '<=', '>=', '<', '==' или 'in' (tolerance - пара границ).
        Отсутствующее значение (None) считается непройденной проверкой.
        """
        if measured is None or not np.isfinite(measured):
            passed = False
        elif comparison == '<=':
            passed = measured <= tolerance
        elif comparison == '<':
            passed = measured < tolerance
        elif comparison == '>=':
            passed = measured >= tolerance
        elif comparison == '==':
            passed = measured == tolerance
        elif comparison == 'in':
            passed = tolerance[0] <= measured <= tolerance[1]
        else:
            raise ConfigError(reason=f"неизвестное сравнение '{comparison}'")
        verdict = cls(name, float('nan') if measured is None else float(measured),
                      list(tolerance) if comparison == 'in' else tolerance, comparison, bool(passed))
        if not verdict.passed:
            logger.warning(f"Проверка не пройдена: {name}: {measured} {comparison} {tolerance}")
        return verdict

    def to_dict(self) -> Dict[str, Any]:
        return {"name": self.name, "measured": self.measured, "tolerance": self.tolerance,
                "comparison": self.comparison, "passed": self.passed}


@dataclass
class RegularityReport:
    """Итог эксперимента: вердикты, таблицы, подогнанные показатели."""
    experiment: str
    seed: int
    verdicts: List[Verdict] = field(default_factory=list)
    tables: Dict[str, pd.DataFrame] = field(default_factory=dict)
    fitted: Dict[str, Any] = field(default_factory=dict)
    illustrative: Dict[str, Any] = field(default_factory=dict)
    skipped: List[str] = field(default_factory=list)
    norms: List[Dict[str, Any]] = field(default_factory=list)
    surfaces: Dict[str, pd.DataFrame] = field(default_factory=dict)
    config: Dict[str, Any] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(v.passed for v in self.verdicts)

    def to_dict(self) -> Dict[str, Any]:
        """Содержимое report.json (без отметок времени)."""
        return {
            "experiment": self.experiment,
            "seed": self.seed,
            "passed": self.passed,
            "verdicts": [v.to_dict() for v in self.verdicts],
            "fitted": self.fitted,
            "illustrative": self.illustrative,
            "skipped": self.skipped,
            "norms": self.norms,
            "tables": sorted(self.tables),
            "config": self.config,
        }


def _table(rows: List[Dict[str, Any]]) -> pd.DataFrame:
    """Таблица с фиксированными столбцами experiment, N, quantity, value."""
    frame = pd.DataFrame(rows, columns=TABLE_COLUMNS)
    frame["value"] = frame["value"].astype(float)
    return frame


def _row(experiment: str, N: int, quantity: str, value: float) -> Dict[str, Any]:
    return {"experiment": experiment, "N": int(N), "quantity": quantity, "value": float(value)}


# =============================================================================
# РАЗБОР ОПИСАНИЙ
# =============================================================================

def build_operator(spec: Any, n: int) -> CoefficientVector:
    """
    Оператор по описанию: имя пресета, {"preset": ..., параметры}
    или {"n": ..., "coeffs": [...]} в формате load_coefficients.
    """
    if isinstance(spec, str):
        return operator_from_preset(spec, n)
    spec = dict(spec)
    if "coeffs" in spec:
        return load_coefficients(spec)
    name = spec.pop("preset", spec.pop("name", None))
    if name is None:
        raise ConfigError(reason=f"оператор без имени пресета: {spec}")
    dimension = int(spec.pop("n", n))
    return operator_from_preset(name, dimension, **spec)


def _label(spec: Any) -> str:
    """Короткая подпись описания для таблиц."""
    if isinstance(spec, str):
        return spec
    spec = dict(spec)
    name = spec.pop("kind", None) or spec.pop("preset", None) or spec.pop("name", None) or "custom"
    if "coeffs" in spec:
        return f"custom(n={spec.get('n')})"
    params = ",".join(f"{k}={spec[k]}" for k in sorted(spec) if k != "n")
    return f"{name}({params})" if params else name


def _geometry_kind(spec: Any) -> str:
    return spec if isinstance(spec, str) else dict(spec).get("kind", "")


def _resolution(config: ExperimentConfig, geometry: Any) -> List[int]:
    """Лестница N для кривых или уровней подразбиения для поверхностей."""
    return config.levels if _geometry_kind(geometry) in SURFACE_SHAPES else config.ladder


def _surface(geometry: Any, N: int) -> BoundarySurface:
    spec = {"kind": geometry} if isinstance(geometry, str) else dict(geometry)
    return make_surface(spec, N)


def _context(operator: Any, surface: BoundarySurface) -> LayerContext:
    return LayerContext(build_operator(operator, surface.n), surface)


def _map(config: ExperimentConfig, fn: Callable, items: Sequence[Any]) -> List[Any]:
    """Последовательный или параллельный map с сохранением порядка."""
    if config.workers > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            return list(pool.map(fn, items))
    return [fn(item) for item in items]


# =============================================================================
# ТОЖДЕСТВА
# =============================================================================

def identity_residual(ctx: LayerContext, name: str, mu: Density) -> float:
    """
    Невязка тождества name; для тождеств с индексами берётся максимум
    по выбранным индексам, g = ν₁.
    """
    g = ctx.normal(0)
    if name == "slay2":
        return residual_slay2(ctx, mu, 0, 1)
    if name == "wregn":
        return residual_wregn(ctx, mu, 0, 1)
    if name == "wstar":
        return residual_wstar(ctx, mu)
    if name == "gradQ":
        return max(residual_gradQ(ctx, g, mu, j, h) for j in range(ctx.n) for h in range(ctx.n))
    if name == "pljr":
        return max(residual_pljr(ctx, g, mu, 0, 1, r) for r in range(ctx.n))
    raise ConfigError(reason=f"неизвестное тождество '{name}'")


def _identity_case(config: ExperimentConfig, case) -> Dict[str, Any]:
    """Все тождества одного (оператор, геометрия, плотность) по лестнице."""
    operator, geometry, density = case
    label = f"{_label(operator)}/{_label(geometry)}/{_label(density)}"
    ladder = _resolution(config, geometry)
    residuals: Dict[str, List[float]] = {name: [] for name in config.identities}
    skipped: List[str] = []
    surfaces: Dict[str, pd.DataFrame] = {}
    node_counts: List[int] = []
    for level, N in enumerate(ladder):
        surface = _surface(geometry, N)
        node_counts.append(surface.N)
        ctx = _context(operator, surface)
        mu = density_from_spec(surface, density)
        for name in config.identities:
            if name in skipped:
                continue
            try:
                residuals[name].append(identity_residual(ctx, name, mu))
            except NeedsAmbientForm as e:
                logger.info(f"{name} пропущено для {label}: {e}")
                skipped.append(name)
        surfaces[f"{_label(geometry)}_N{surface.N}"] = surface_to_frame(surface)
        worst = max((r[-1] for r in residuals.values() if len(r) == level + 1), default=None)
        logger.info(format_ladder_progress("identities", label, ladder, level, worst))
    return {"label": label, "ladder": node_counts, "residuals": residuals,
            "skipped": skipped, "surfaces": surfaces, "n": surface.n, "rule": rule_for(surface).kind}


def run_identity_suite(config: ExperimentConfig) -> RegularityReport:
    """
    Невязки тождеств по лестнице разрешений с эмпирическими порядками.

    Проверка пройдена, если невязка на последнем уровне не выше допуска
    (своего для кривых и для триангуляций); порядок проверяется только на
    кривых и только между уровнями, где обе невязки выше шума.
    """
    report = RegularityReport("identities", config.seed, config=config.to_dict())
    tol = config.tolerances
    cases = [(o, g, d) for o in config.operators for g in config.geometries for d in config.densities]
    logger.info(f"Проверка тождеств: {len(cases)} случаев, тождества {config.identities}")
    try:
        results = _map(config, lambda case: _identity_case(config, case), cases)
    except Exception as e:
        logger.error(f"Ошибка проверки тождеств: {e}")
        raise

    residual_rows, order_rows = [], []
    for result in results:
        label, ladder = result["label"], result["ladder"]
        curve = result["n"] == 2
        tolerance = tol["identity_tolerance"] if curve else tol["identity_tolerance_3d"]
        report.surfaces.update(result["surfaces"])
        report.skipped.extend(f"{name}/{label}" for name in result["skipped"])
        for name, values in result["residuals"].items():
            if name in result["skipped"] or not values:
                continue
            quantity = f"{name}/{label}"
            for N, value in zip(ladder, values):
                residual_rows.append(_row("identities", N, quantity, value))
            orders = empirical_orders(ladder, values)
            usable = []
            for k, order in enumerate(orders):
                if order is None:
                    continue
                order_rows.append(_row("identities", ladder[k + 1], quantity, order))
                if min(values[k], values[k + 1]) > tol["noise_floor"]:
                    usable.append(order)
            report.verdicts.append(Verdict.check(
                f"residual/{quantity}", values[-1], tolerance, '<='))
            if usable and curve:
                report.verdicts.append(Verdict.check(
                    f"order/{quantity}", min(usable), tol["min_order"], '>='))
            report.fitted[quantity] = {"residuals": values, "orders": orders, "quadrature": result["rule"]}

    report.tables["residuals"] = _table(residual_rows)
    report.tables["orders"] = _table(order_rows)
    logger.info(f"Проверка тождеств завершена: {sum(v.passed for v in report.verdicts)}"
                f" из {len(report.verdicts)} проверок пройдено")
    return report


# =============================================================================
# ВЫИГРЫШ ГЛАДКОСТИ
# =============================================================================

def _band_table(surface: BoundarySurface, values: np.ndarray, I: np.ndarray, J: np.ndarray,
                d: np.ndarray, modulus: Optional[Modulus], d_max: float) -> pd.DataFrame:
    """
    Максимумы частных по полосам, целиком лежащим в [шаг сетки, d_max].

    Без модуля частное |Δf|/|x−y|, иначе |Δf|/ω(|x−y|).
    """
    difference = np.abs(values[I] - values[J])
    quotient = difference / (d if modulus is None else modulus(d))
    bands = dyadic_band_maxima(d, quotient, MIN_PAIRS_PER_BAND, d_max=d_max)
    lower = 2.0 ** (-bands["band"] - 1)
    upper = 2.0 ** (-bands["band"])
    return bands[(lower >= surface.spacing) & (upper <= d_max)].reset_index(drop=True)


def _gain_case(config: ExperimentConfig, case) -> Dict[str, Any]:
    operator, geometry, density = case
    label = f"{_label(operator)}/{_label(geometry)}/{_label(density)}"
    tol = config.tolerances
    N = config.ladder[-1]
    surface = _surface(geometry, N)
    if surface.n != 2:
        raise RoughDensityUnsupported()
    ctx = _context(operator, surface)
    mu = density_from_spec(surface, density)

    # входная функция - производная для C^{1,β}, иначе сама плотность
    order = 1 if mu.param_derivative is not None else 0
    beta = (mu.exponent if mu.exponent is not None else float(order + 1)) - order
    source = tangential_M(surface, 0, 1, mu).values if order else mu.values
    output = tangential_M(surface, 0, 1, double_layer_W(ctx, mu)).values
    second = tangential_M(surface, 0, 1, Density(output)).values

    d_max = config.max_separation
    I, J = PairSampler(config.seed, max_separation=d_max).pairs(surface.nodes)
    d = np.linalg.norm(surface.nodes[I] - surface.nodes[J], axis=1)
    bands = {
        "input": _band_table(surface, source, I, J, d, None, d_max),
        "output": _band_table(surface, output, I, J, d, None, d_max),
        "second": _band_table(surface, second, I, J, d, None, d_max),
    }
    fitted = {key: holder_exponent(frame) for key, frame in bands.items()}
    verdicts = []
    ratios: Dict[str, Optional[float]] = {}

    verdicts.append(Verdict.check(f"input_exponent/{label}",
                                  None if fitted["input"] is None else abs(fitted["input"] - min(beta, 1.0)),
                                  tol["input_exponent_tol"], '<='))
    if beta < 1.0 - 1e-9:
        verdicts.append(Verdict.check(f"output_exponent/{label}", fitted["output"],
                                      (tol["output_exponent_min"], tol["output_exponent_max"]), 'in'))
    moduli = [Modulus.from_spec(m) for m in config.moduli] or ([Modulus.omega(1.0)] if beta >= 1.0 - 1e-9 else [])
    for modulus in moduli:
        frame = _band_table(surface, output, I, J, d, modulus, d_max)
        bands[f"output_{modulus.label}"] = frame
        ratio = omega_blowup_ratio(frame)
        ratios[modulus.label] = ratio
        verdicts.append(Verdict.check(f"blowup_ratio/{modulus.label}/{label}", ratio,
                                      tol["omega_ratio_max"], '<='))

    rows = []
    for key, frame in bands.items():
        for item in frame.itertuples(index=False):
            rows.append(_row("gain", N, f"{label}/{key}/band{item.band}/max_quotient", item.max_quotient))
            rows.append(_row("gain", N, f"{label}/{key}/band{item.band}/separation", item.separation))
    for key, value in fitted.items():
        if value is not None:
            rows.append(_row("gain", N, f"{label}/{key}/fitted_exponent", value))
    for key, value in ratios.items():
        if value is not None:
            rows.append(_row("gain", N, f"{label}/output/{key}/blowup_ratio", value))
    logger.info(f"Выигрыш гладкости {label}: β={beta}, показатели {fitted}")
    return {
        "label": label, "rows": rows, "verdicts": verdicts, "beta": beta,
        "fitted": {"input": fitted["input"], "output": fitted["output"], "ratios": ratios},
        "second": fitted["second"],
        "surface": (f"{_label(geometry)}_N{surface.N}", surface_to_frame(surface)),
    }


def measure_regularity_gain(config: ExperimentConfig) -> RegularityReport:
    """
    Показатель Гёльдера касательной производной W[μ] для грубой μ на кривой.

    Для μ класса C^{1,β} входной функцией служит точная M₁₂[μ], для
    липшицевой μ (β = 1) - сама μ, а выход сравнивается с модулем ω₁.
    Оценка точности (sharpness) не сертифицируется и помечается как иллюстрация.

    Raises:
        RoughDensityUnsupported: Для поверхностей
    """
    report = RegularityReport("gain", config.seed, config=config.to_dict())
    cases = [(o, g, d) for o in config.operators for g in config.geometries for d in config.densities]
    logger.info(f"Измерение выигрыша гладкости: {len(cases)} случаев")
    try:
        results = _map(config, lambda case: _gain_case(config, case), cases)
    except Exception as e:
        logger.error(f"Ошибка измерения выигрыша гладкости: {e}")
        raise

    rows = []
    for result in results:
        rows.extend(result["rows"])
        report.verdicts.extend(result["verdicts"])
        report.fitted[result["label"]] = {"beta": result["beta"], **result["fitted"]}
        report.illustrative[result["label"]] = {
            "second_derivative_exponent": result["second"],
            "note": "точность показателя не сертифицируется конечной выборкой",
        }
        name, frame = result["surface"]
        report.surfaces[name] = frame
    report.tables["gain"] = _table(rows)
    return report


# =============================================================================
# НОРМЫ ЯДЕР
# =============================================================================

def _kernel_menagerie(ctx: LayerContext) -> Dict[str, KernelHandle]:
    """Ядра отчёта: Ξ[x₁], ∂₁S, ∂₁∂₁S, касательный градиент ∂₁S и нулевое ядро."""
    return {
        "xi_x1": xi_kernel(coordinate_density(ctx.surface, 0)),
        "gradient": gradient_kernel(ctx, 0),
        "hessian": hessian_kernel(ctx, 0, 0),
        "tangential_gradient": tangential_gradient_kernel(ctx, 0, 0),
        "zero": zero_kernel(),
    }


def _odd_kernel(z: np.ndarray) -> np.ndarray:
    """k(z) = z₁/|z|², нечётная и однородная степени −1."""
    with np.errstate(divide='ignore', invalid='ignore'):
        return z[..., 0] / np.sum(z ** 2, axis=-1)


# Сдвиги показателей для проверки вложения классов
EMBEDDING_SHIFTS = (0.25, 0.5, 1.0)


def _frozen_profile(theta: np.ndarray, r: np.ndarray) -> np.ndarray:
    """F(θ, r) = θ₁e^{−r}, липшицева с константой 1 по каждому аргументу."""
    return theta[:, 0] * np.exp(-r)


def _class_check_rows(ctx: LayerContext, triples, report: RegularityReport) -> List[Dict[str, Any]]:
    """Произведение Ξ[x₁]·∂₁S, вложение классов ∂₁S и ядро с замороженным направлением."""
    surface = ctx.surface
    rows = []
    K1 = xi_kernel(coordinate_density(surface, 0))
    K2 = gradient_kernel(ctx, 0)
    product = check_product_inequality(surface, K1, K1.exponents, K2, K2.exponents, triples=triples)
    rows.append(_row("kernel_norms", surface.N, "product/xi_x1*gradient/max_ratio", product["max_ratio"]))
    report.verdicts.append(Verdict.check("product/xi_x1*gradient/violations", product["violations"], 0, '=='))

    for a in EMBEDDING_SHIFTS:
        embedding = embedding_check(surface, K2, K2.exponents, a, triples=triples)
        rows.append(_row("kernel_norms", surface.N, f"embedding/gradient/a={a}/violations",
                         embedding["violations"]))
        report.verdicts.append(Verdict.check(f"embedding/gradient/a={a}/violations",
                                             embedding["violations"], 0, '=='))

    frozen = frozen_direction_check(surface, _frozen_profile, 1.0, triples=triples)
    rows.append(_row("kernel_norms", surface.N, "frozen_direction/max_quotient", frozen["max_quotient"]))
    report.verdicts.append(Verdict.check("frozen_direction/violations", frozen["violations"], 0, '=='))
    logger.info(f"Проверки классов ядер: произведение {product['violations']} нарушений"
                f" из {product['samples']}, замороженное направление {frozen['violations']}")
    return rows


def kernel_norm_report(config: ExperimentConfig) -> RegularityReport:
    """
    Выборочные нормы стандартных ядер по лестнице N, их изменение при
    измельчении и проверки произведения, вложения и замороженного направления
    на последнем уровне; острые компоненты нечётного и гауссова ядер на отдельной
    геометрии (по умолчанию эллипс 2×1).
    """
    report = RegularityReport("kernel_norms", config.seed, config=config.to_dict())
    tol = config.tolerances
    operator = config.operators[0]
    geometry = config.geometries[0]
    rows = []
    first: Dict[str, List[float]] = {}
    try:
        for level, N in enumerate(config.ladder):
            surface = _surface(geometry, N)
            ctx = _context(operator, surface)
            triples = TripleSampler(config.seed, config.triple_count).sample(surface)
            sampler = PairSampler(config.seed)
            for name, K in _kernel_menagerie(ctx).items():
                norm = norm_Ks1s2s3(surface, K, K.exponents, sampler, triples)
                entry = {"kernel": name, "N": surface.N, **norm.to_dict()}
                report.norms.append(entry)
                first.setdefault(name, []).append(norm.first)
                rows.append(_row("kernel_norms", surface.N, f"{name}/first", norm.first))
                rows.append(_row("kernel_norms", surface.N, f"{name}/second", norm.second))
                if name == "xi_x1":
                    report.verdicts.append(Verdict.check(f"xi_x1/first/N{surface.N}", norm.first, 1.01, '<='))
                    report.verdicts.append(Verdict.check(f"xi_x1/second/N{surface.N}", norm.second, 1.01, '<='))
                if name == "zero":
                    report.verdicts.append(Verdict.check(f"zero/norm/N{surface.N}", norm.norm, 0.0, '=='))
            report.surfaces[f"{_label(geometry)}_N{surface.N}"] = surface_to_frame(surface)
            logger.info(format_ladder_progress("kernel_norms", _label(geometry), config.ladder, level))

        # на самом подробном уровне лестницы
        rows.extend(_class_check_rows(ctx, triples, report))

        for name in ("gradient", "hessian", "tangential_gradient"):
            values = first[name]
            if len(values) > 1:
                delta = refinement_delta(values[-2], values[-1])
                rows.append(_row("kernel_norms", config.ladder[-1], f"{name}/first/delta", delta))
                report.verdicts.append(Verdict.check(f"{name}/first/refinement_delta", delta,
                                                     tol["refinement_growth"], '<'))

        if config.sharp_geometry:
            rows.extend(_sharp_rows(config, operator, report))
    except Exception as e:
        logger.error(f"Ошибка расчёта норм ядер: {e}")
        raise
    report.tables["norms"] = _table(rows)
    return report


def _sharp_rows(config: ExperimentConfig, operator: Any, report: RegularityReport) -> List[Dict[str, Any]]:
    """Острые компоненты нечётного ядра и гауссова ядра с проверкой роста."""
    tol = config.tolerances
    rows = []
    odd: List[float] = []
    gauss: List[float] = []
    label = _label(config.sharp_geometry)
    for N in config.sharp_ladder:
        surface = _surface(config.sharp_geometry, N)
        ctx = _context(operator, surface)
        K = homogeneous_kernel(_odd_kernel, -1.0, parity="odd", label="z1/|z|^2")
        triples = TripleSampler(config.seed, min(config.triple_count, 2000)).sample(surface)
        norm = sharp_norm(surface, K, K.exponents, sampler=PairSampler(config.seed), triples=triples)
        odd.append(norm.sharp)
        gauss.append(gauss_truncated_sup(ctx, 0, 0, 0))
        report.norms.append({"kernel": "odd_sharp", "N": surface.N, **norm.to_dict()})
        rows.append(_row("kernel_norms", surface.N, f"odd_kernel/{label}/sharp", odd[-1]))
        rows.append(_row("kernel_norms", surface.N, f"gauss_kernel/{label}/sharp", gauss[-1]))
        report.surfaces[f"{label}_N{surface.N}"] = surface_to_frame(surface)
    if len(odd) > 1:
        for name, values in (("odd_kernel", odd), ("gauss_kernel", gauss)):
            growth = values[-1] / values[0] - 1.0 if values[0] > 0 else 0.0
            rows.append(_row("kernel_norms", config.sharp_ladder[-1], f"{name}/{label}/growth", growth))
            report.verdicts.append(Verdict.check(f"{name}/sharp_growth", growth, tol["refinement_growth"], '<'))
    return rows


# =============================================================================
# РАЗЛОЖЕНИЕ ФУНДАМЕНТАЛЬНОГО РЕШЕНИЯ
# =============================================================================

RADII = np.logspace(-8, 0, 33)


def decomposition_probe(config: ExperimentConfig) -> RegularityReport:
    """
    Остаток S_a − главная часть на сетке r ∈ [1e−8, 1] по направлению e₁.

    Вердикты: тождественный ноль для лапласиана без сноса; конечный предел
    в 2D (значения при r=1e−4 и 1e−6 и их близость к аналитическому пределу);
    явная граница остатка в 3D на r ≤ 0.1; чётность направленной части градиента вблизи нуля.
    """
    report = RegularityReport("decomposition", config.seed, config=config.to_dict())
    tol = config.tolerances
    rows = []
    try:
        for spec in config.operators:
            n = int(spec.get("n", 2)) if isinstance(spec, Mapping) else 2
            coefficients = build_operator(spec, n)
            fs = make_fundamental_solution(coefficients)
            label = f"{_label(spec)}/n{fs.n}"
            direction = np.eye(fs.n)[0]
            points = RADII[:, None] * direction
            values = np.abs(remainder(fs, points))
            for r, value in zip(RADII, values):
                rows.append(_row("decomposition", fs.n, f"{label}/remainder/r={r:.3e}", value))

            if fs.family is Family.LAPLACE and not fs.has_drift:
                report.verdicts.append(Verdict.check(f"{label}/remainder_max", float(values.max()), 0.0, '=='))
            elif fs.n == 2:
                pair = remainder(fs, np.array([1e-4, 1e-6])[:, None] * direction)
                report.verdicts.append(Verdict.check(f"{label}/limit_difference", float(abs(pair[0] - pair[1])),
                                                     tol["limit_difference"], '<'))
                limit = remainder_limit(fs)
                rows.append(_row("decomposition", fs.n, f"{label}/remainder_limit", abs(limit)))
                report.verdicts.append(Verdict.check(f"{label}/limit_value", float(abs(pair[1] - limit)),
                                                     tol["limit_difference"], '<'))
            else:
                b = np.linalg.norm(fs.reduced.b)
                rho = np.linalg.norm(points @ fs.reduced.T_inv.T, axis=1)
                bound = fs.scale * np.exp(b * rho / 2) * (abs(fs.k) + b / 2) / (4 * np.pi) * (1 + RADII)
                near = RADII <= 0.1
                excess = float(np.max(values[near] / bound[near]))
                report.verdicts.append(Verdict.check(f"{label}/remainder_bound_ratio", excess, 1.0, '<='))

            plus, minus = gradient_parity_probe(fs, direction, 1e-3)
            parity = float(np.linalg.norm(plus - minus))
            rows.append(_row("decomposition", fs.n, f"{label}/parity_gap", parity))
            if fs.n == 3:
                report.verdicts.append(Verdict.check(f"{label}/parity_gap", parity, 1e-4, '<='))
            else:
                report.illustrative[f"{label}/parity_gap"] = parity
            logger.info(f"Разложение {label}: max|остаток|={values.max():.3e}, чётность={parity:.3e}")
    except Exception as e:
        logger.error(f"Ошибка исследования разложения: {e}")
        raise
    report.tables["remainder"] = _table(rows)
    return report


HANDLERS: Dict[str, Callable[[ExperimentConfig], RegularityReport]] = {
    "identities": run_identity_suite,
    "gain": measure_regularity_gain,
    "kernel_norms": kernel_norm_report,
    "decomposition": decomposition_probe,
}


def run_experiment(config: ExperimentConfig) -> RegularityReport:
    """Запускает обработчик эксперимента из конфигурации."""
    return HANDLERS[config.experiment](config)
