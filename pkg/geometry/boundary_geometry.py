"""
Модуль геометрии границы ∂Ω.

Предоставляет функции для:
- Построения замкнутых кривых (окружность, эллипс, «воздушный змей», звезда)
- Построения икосаэдрических триангуляций сферы и эллипсоида
- Работы с плотностями на границе (узловые значения или объемлющая форма)
- Касательных операторов M_lr и касательного градиента
- Модулей непрерывности и дискретных полунорм Гёльдера
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Mapping, Optional, Tuple, Union

import numpy as np
from scipy import integrate, special
from scipy.spatial import ConvexHull, cKDTree
from scipy.spatial.distance import pdist

from config import (
    DEFAULT_SEED,
    EXHAUSTIVE_PAIR_LIMIT,
    MAX_SPHERE_LEVEL,
    MIN_CURVE_NODES,
    PAIRS_PER_BAND,
    SHAPE_DEFAULTS,
)
from utils.exceptions import (
    BadShapeParams,
    ConfigError,
    DegenerateNodeSet,
    NeedsAmbientForm,
    RoughDensityUnsupported,
)

logger = logging.getLogger(__name__)

AmbientFunction = Callable[[np.ndarray], np.ndarray]

CURVE_SHAPES = ("circle", "ellipse", "kite", "star")
SURFACE_SHAPES = ("sphere", "ellipsoid")


# =============================================================================
# ПОВЕРХНОСТИ
# =============================================================================

@dataclass(eq=False)
class BoundarySurface:
    """Дискретизированная замкнутая граница с нормалями и весами."""
    n: int
    shape: str
    params: Dict[str, Any]
    nodes: np.ndarray
    normals: np.ndarray
    weights: np.ndarray
    smoothness: Tuple[int, float] = (2, 1.0)
    # только для кривых
    t: Optional[np.ndarray] = None
    dx: Optional[np.ndarray] = None
    ddx: Optional[np.ndarray] = None
    # только для поверхностей: вершины треугольников на единичной сфере и полуоси
    triangles: Optional[np.ndarray] = None
    radii: Optional[np.ndarray] = None
    _cache: Dict[str, Any] = field(default_factory=dict, repr=False)

    @property
    def N(self) -> int:
        return self.nodes.shape[0]

    @property
    def speed(self) -> np.ndarray:
        """|x′(t)| в узлах кривой."""
        return np.linalg.norm(self.dx, axis=1)

    @property
    def tangents(self) -> np.ndarray:
        """Единичная касательная t = (−ν₂, ν₁) на кривой."""
        return np.column_stack([-self.normals[:, 1], self.normals[:, 0]])

    @property
    def measure(self) -> float:
        return float(np.sum(self.weights))

    @property
    def spacing(self) -> float:
        """Характерный шаг сетки."""
        if self.n == 2:
            return self.measure / self.N
        return float(np.sqrt(self.measure / self.N))

    @property
    def diam(self) -> float:
        """Диаметр множества узлов."""
        if 'diam' not in self._cache:
            points = self.nodes
            if self.N > 2048:
                points = points[ConvexHull(points).vertices]
            self._cache['diam'] = float(pdist(points).max()) if len(points) > 1 else 0.0
        return self._cache['diam']

    def describe(self) -> Dict[str, Any]:
        """Описание формы для отчётов."""
        return {"kind": self.shape, **self.params, "N": self.N}


def _curve_derivatives(shape: str, params: Mapping[str, float], t: np.ndarray):
    """Возвращает x(t), x′(t), x″(t) аналитической параметризации."""
    c, s = np.cos(t), np.sin(t)
    if shape == "circle":
        r = params["r"]
        x = r * np.column_stack([c, s])
        return x, r * np.column_stack([-s, c]), -x
    if shape == "ellipse":
        a, b = params["a"], params["b"]
        return (np.column_stack([a * c, b * s]),
                np.column_stack([-a * s, b * c]),
                np.column_stack([-a * c, -b * s]))
    if shape == "kite":
        c2, s2 = np.cos(2 * t), np.sin(2 * t)
        return (np.column_stack([c + 0.65 * c2 - 0.65, 1.5 * s]),
                np.column_stack([-s - 1.3 * s2, 1.5 * c]),
                np.column_stack([-c - 2.6 * c2, -1.5 * s]))
    k, eps = params["k"], params["eps"]
    r = 1 + eps * np.cos(k * t)
    r1 = -eps * k * np.sin(k * t)
    r2 = -eps * k * k * np.cos(k * t)
    radial = np.column_stack([c, s])
    angular = np.column_stack([-s, c])
    x = r[:, None] * radial
    dx = r1[:, None] * radial + r[:, None] * angular
    ddx = r2[:, None] * radial + 2 * r1[:, None] * angular - r[:, None] * radial
    return x, dx, ddx


def _split_shape(shape: Union[str, Mapping[str, Any]], params: Mapping[str, Any]):
    """Разбирает описание формы: имя или словарь {"kind": ..., параметры}."""
    if isinstance(shape, Mapping):
        spec = dict(shape)
        name = spec.pop("kind", None)
        spec.pop("N", None)
        spec.pop("level", None)
        spec.update(params)
    else:
        name, spec = shape, dict(params)
    if name not in SHAPE_DEFAULTS:
        raise BadShapeParams(shape=name, reason="неизвестная форма")
    return name, {**SHAPE_DEFAULTS[name], **spec}


def make_curve(shape: Union[str, Mapping[str, Any]], N: int, **params) -> BoundarySurface:
    """
    Строит замкнутую кривую с равномерными узлами по параметру.

    Args:
        shape: circle | ellipse | kite | star или словарь {"kind": ..., ...}
        N: Число узлов (чётное, не меньше 16)
        **params: r; a, b; k, eps

    Returns:
        BoundarySurface с весами |x′(t)|·2π/N

    Raises:
        BadShapeParams: Некорректные параметры или N
    """
    name, spec = _split_shape(shape, params)
    if name not in CURVE_SHAPES:
        raise BadShapeParams(shape=name, reason="ожидается кривая")
    if N % 2 or N < MIN_CURVE_NODES:
        raise BadShapeParams(shape=name, reason=f"N={N} должно быть чётным и не меньше {MIN_CURVE_NODES}")
    if name == "circle" and spec["r"] <= 0:
        raise BadShapeParams(shape=name, reason="радиус должен быть положительным")
    if name == "ellipse" and (spec["a"] <= 0 or spec["b"] <= 0):
        raise BadShapeParams(shape=name, reason="полуоси должны быть положительными")
    if name == "star":
        if abs(spec["eps"]) >= 1:
            raise BadShapeParams(shape=name, reason=f"|eps|={abs(spec['eps'])} делает кривую несвязной")
        if int(spec["k"]) != spec["k"] or spec["k"] < 1:
            raise BadShapeParams(shape=name, reason="k должно быть натуральным")
        spec["k"] = int(spec["k"])

    t = 2 * np.pi * np.arange(N) / N
    x, dx, ddx = _curve_derivatives(name, spec, t)
    speed = np.linalg.norm(dx, axis=1)
    if name == "circle":
        normals = np.column_stack([np.cos(t), np.sin(t)])
    else:
        normals = np.column_stack([dx[:, 1], -dx[:, 0]]) / speed[:, None]

    logger.debug(f"Кривая {name} {spec}: N={N}")
    return BoundarySurface(
        n=2, shape=name, params=spec, nodes=x, normals=normals,
        weights=speed * 2 * np.pi / N, t=t, dx=dx, ddx=ddx,
    )


def _icosahedron() -> Tuple[np.ndarray, np.ndarray]:
    """Вершины (на единичной сфере) и грани икосаэдра, ориентированные наружу."""
    phi = (1 + np.sqrt(5)) / 2
    vertices = np.array([
        [-1, phi, 0], [1, phi, 0], [-1, -phi, 0], [1, -phi, 0],
        [0, -1, phi], [0, 1, phi], [0, -1, -phi], [0, 1, -phi],
        [phi, 0, -1], [phi, 0, 1], [-phi, 0, -1], [-phi, 0, 1],
    ], dtype=float)
    faces = np.array([
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ])
    return vertices / np.linalg.norm(vertices, axis=1)[:, None], faces


def _subdivide(vertices: np.ndarray, faces: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Делит каждый треугольник на четыре, проецируя середины рёбер на сферу."""
    points = [v for v in vertices]
    midpoint: Dict[Tuple[int, int], int] = {}

    def middle(i: int, j: int) -> int:
        key = (min(i, j), max(i, j))
        if key not in midpoint:
            m = vertices[i] + vertices[j]
            points.append(m / np.linalg.norm(m))
            midpoint[key] = len(points) - 1
        return midpoint[key]

    new_faces = []
    for a, b, c in faces:
        ab, bc, ca = middle(a, b), middle(b, c), middle(c, a)
        new_faces.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]])
    return np.array(points), np.array(new_faces)


def spherical_triangle_area(a: np.ndarray, b: np.ndarray, c: np.ndarray) -> np.ndarray:
    """Телесный угол треугольника с вершинами на единичной сфере."""
    triple = np.abs(np.einsum('...i,...i->...', a, np.cross(b, c)))
    denominator = 1 + np.einsum('...i,...i->...', a, b) \
        + np.einsum('...i,...i->...', b, c) + np.einsum('...i,...i->...', c, a)
    return 2 * np.arctan2(triple, denominator)


def make_sphere(kind: Union[str, Mapping[str, Any]], level: int, **params) -> BoundarySurface:
    """
    Строит триангуляцию сферы или эллипсоида подразбиением икосаэдра.

    Узлы - образы центроидов плоских граней на поверхности, веса - площади
    соответствующих криволинейных треугольников.

    Args:
        kind: sphere | ellipsoid или словарь {"kind": ..., ...}
        level: Число подразбиений (0..6)
        **params: r или a, b, c

    Returns:
        BoundarySurface размерности 3

    Raises:
        BadShapeParams: Уровень вне диапазона или неположительные полуоси
    """
    name, spec = _split_shape(kind, params)
    if name not in SURFACE_SHAPES:
        raise BadShapeParams(shape=name, reason="ожидается поверхность")
    if not 0 <= level <= MAX_SPHERE_LEVEL:
        raise BadShapeParams(shape=name, reason=f"уровень {level} вне диапазона 0..{MAX_SPHERE_LEVEL}")
    radii = np.full(3, float(spec["r"])) if name == "sphere" else \
        np.array([spec["a"], spec["b"], spec["c"]], dtype=float)
    if np.any(radii <= 0):
        raise BadShapeParams(shape=name, reason="полуоси должны быть положительными")

    vertices, faces = _icosahedron()
    for _ in range(level):
        vertices, faces = _subdivide(vertices, faces)

    triangles = vertices[faces]
    centroid = triangles.mean(axis=1)
    u = centroid / np.linalg.norm(centroid, axis=1)[:, None]
    scaled = u / radii
    scaled_norm = np.linalg.norm(scaled, axis=1)
    solid_angle = spherical_triangle_area(triangles[:, 0], triangles[:, 1], triangles[:, 2])

    logger.debug(f"Поверхность {name} {spec}: уровень {level}, {len(faces)} треугольников")
    return BoundarySurface(
        n=3, shape=name, params=spec, nodes=u * radii,
        normals=scaled / scaled_norm[:, None],
        weights=solid_angle * np.prod(radii) * scaled_norm,
        triangles=triangles, radii=radii,
    )


def make_surface(spec: Mapping[str, Any], N: Optional[int] = None) -> BoundarySurface:
    """Строит кривую или поверхность по словарю геометрии; N - узлы или уровень."""
    kind = spec.get("kind")
    if kind in SURFACE_SHAPES:
        level = int(N if N is not None else spec.get("level", 3))
        return make_sphere(spec, level)
    return make_curve(spec, int(N if N is not None else spec.get("N", 256)))


# =============================================================================
# ПЛОТНОСТИ
# =============================================================================

@dataclass(eq=False)
class Density:
    """Функция на границе: узловые значения и, при наличии, объемлющая форма."""
    values: np.ndarray
    ambient: Optional[AmbientFunction] = None
    gradient: Optional[AmbientFunction] = None
    exponent: Optional[float] = None
    label: str = ''
    # производная по параметру кривой, если известна точно
    param_derivative: Optional[np.ndarray] = None

    @property
    def has_ambient(self) -> bool:
        return self.ambient is not None and self.gradient is not None

    def at(self, points: np.ndarray) -> np.ndarray:
        """Значения объемлющей формы в произвольных точках."""
        if self.ambient is None:
            raise NeedsAmbientForm(operation=f"вычисление '{self.label}' вне узлов")
        return np.asarray(self.ambient(points), dtype=complex)

    def grad_at(self, points: np.ndarray) -> np.ndarray:
        """Градиент объемлющей формы в произвольных точках."""
        if self.gradient is None:
            raise NeedsAmbientForm(operation=f"градиент '{self.label}'")
        return np.asarray(self.gradient(points), dtype=complex)

    def _combine(self, other, op: str) -> 'Density':
        if isinstance(other, Density):
            values = {'+': np.add, '-': np.subtract, '*': np.multiply}[op](self.values, other.values)
            label = f"({self.label}{op}{other.label})"
            if not (self.has_ambient and other.has_ambient):
                return Density(values, label=label)
            f, g, df, dg = self.ambient, other.ambient, self.gradient, other.gradient
            if op == '+':
                return Density(values, lambda X: f(X) + g(X), lambda X: df(X) + dg(X), label=label)
            if op == '-':
                return Density(values, lambda X: f(X) - g(X), lambda X: df(X) - dg(X), label=label)
            return Density(
                values,
                lambda X: f(X) * g(X),
                lambda X: df(X) * np.asarray(g(X))[..., None] + np.asarray(f(X))[..., None] * dg(X),
                label=label,
            )

        scalar = complex(other)
        label = f"({self.label}{op}{other})"
        if op == '*':
            values = self.values * scalar
            if not self.has_ambient:
                return Density(values, label=label, exponent=self.exponent)
            f, df = self.ambient, self.gradient
            return Density(values, lambda X: scalar * f(X), lambda X: scalar * df(X),
                           exponent=self.exponent, label=label)
        shift = scalar if op == '+' else -scalar
        values = self.values + shift
        if not self.has_ambient:
            return Density(values, label=label, exponent=self.exponent)
        f = self.ambient
        return Density(values, lambda X: f(X) + shift, self.gradient, exponent=self.exponent, label=label)

    def __add__(self, other):
        return self._combine(other, '+')

    __radd__ = __add__

    def __sub__(self, other):
        return self._combine(other, '-')

    def __mul__(self, other):
        return self._combine(other, '*')

    __rmul__ = __mul__

    def __neg__(self):
        return self._combine(-1.0, '*')


def as_density(surface: BoundarySurface, value) -> Density:
    """Приводит число, массив или Density к плотности на данной поверхности."""
    if isinstance(value, Density):
        return value
    array = np.asarray(value, dtype=complex)
    if array.ndim == 0:
        return constant_density(surface, complex(array))
    if array.shape != (surface.N,):
        raise ConfigError(reason=f"ожидалось {surface.N} узловых значений, получено {array.shape}")
    return Density(array, label='nodal')


def ambient_density(surface: BoundarySurface, f: AmbientFunction, grad: AmbientFunction,
                    label: str = '', exponent: Optional[float] = None) -> Density:
    """Плотность по объемлющей функции и её градиенту."""
    return Density(np.asarray(f(surface.nodes), dtype=complex), f, grad, exponent=exponent, label=label)


def constant_density(surface: BoundarySurface, value: complex = 1.0) -> Density:
    """Постоянная плотность с нулевым градиентом."""
    n = surface.n
    return ambient_density(
        surface,
        lambda X: np.full(np.shape(X)[:-1], value, dtype=complex),
        lambda X: np.zeros(np.shape(X)[:-1] + (n,), dtype=complex),
        label=f"{value}", exponent=1.0,
    )


def coordinate_density(surface: BoundarySurface, axis: int) -> Density:
    """Координатная функция x_axis."""
    n = surface.n
    unit = np.eye(n)[axis]
    return ambient_density(
        surface,
        lambda X: np.asarray(X)[..., axis] + 0j,
        lambda X: np.broadcast_to(unit, np.shape(X)).astype(complex),
        label=f"x{axis}", exponent=1.0,
    )


def normal_density(surface: BoundarySurface, l: int) -> Density:
    """
    Компонента нормали ν_l как плотность.

    На сфере и эллипсоиде добавляется объемлющая форма ν̃ = D⁻²X/|D⁻²X|,
    на кривых плотность узловая.
    """
    values = surface.normals[:, l].astype(complex)
    if surface.n == 2:
        return Density(values, label=f"nu{l}", exponent=1.0)

    d = 1.0 / surface.radii ** 2

    def f(X):
        q = np.asarray(X) * d
        return q[..., l] / np.linalg.norm(q, axis=-1) + 0j

    def grad(X):
        q = np.asarray(X) * d
        norm = np.linalg.norm(q, axis=-1)[..., None]
        g = -q[..., l][..., None] * q * d / norm ** 3
        g[..., l] += d[l] / norm[..., 0]
        return g + 0j

    return Density(values, f, grad, exponent=1.0, label=f"nu{l}")


def cos_theta_density(surface: BoundarySurface) -> Density:
    """cos θ: на кривой - cos параметра, на поверхности - x₁/|x|."""
    if surface.n == 2:
        return Density(np.cos(surface.t) + 0j, label="cos_theta", exponent=1.0,
                       param_derivative=-np.sin(surface.t) + 0j)

    def f(X):
        X = np.asarray(X)
        return X[..., 0] / np.linalg.norm(X, axis=-1) + 0j

    def grad(X):
        X = np.asarray(X)
        r = np.linalg.norm(X, axis=-1)[..., None]
        g = -X[..., 0][..., None] * X / r ** 3
        g[..., 0] += 1.0 / r[..., 0]
        return g + 0j

    return ambient_density(surface, f, grad, label="cos_theta", exponent=1.0)


def _snap_angle(surface: BoundarySurface, theta0: float) -> float:
    """Ближайшее к θ₀ значение параметра в узлах."""
    step = 2 * np.pi / surface.N
    return float(np.round(theta0 / step) * step)


def rough_abs_sin_density(surface: BoundarySurface, beta: float, theta0: float = 0.0,
                          snap: bool = True) -> Density:
    """Плотность |sin(θ−θ₀)|^β класса C^{0,β}."""
    if surface.n != 2:
        raise RoughDensityUnsupported()
    theta0 = _snap_angle(surface, theta0) if snap else theta0
    values = np.abs(np.sin(surface.t - theta0)) ** beta
    return Density(values + 0j, exponent=beta, label=f"abs_sin^{beta}")


def rough_distance_density(surface: BoundarySurface, beta: float, x0=0) -> Density:
    """Плотность |x−x₀|^β; x₀ - индекс узла или точка."""
    if surface.n != 2:
        raise RoughDensityUnsupported()
    point = surface.nodes[int(x0)] if np.ndim(x0) == 0 else np.asarray(x0, dtype=float)
    values = np.linalg.norm(surface.nodes - point, axis=1) ** beta
    return Density(values + 0j, exponent=beta, label=f"dist^{beta}")


def rough_antiderivative_density(surface: BoundarySurface, beta: float, theta0: float = 0.0,
                                 snap: bool = True) -> Density:
    """
    Плотность класса C^{1,β}: первообразная |sin(τ−θ₀)|^β − m_β по параметру.

    m_β - среднее |sin|^β, поэтому первообразная периодична. Точная
    производная по параметру сохраняется в param_derivative.
    """
    if surface.n != 2:
        raise RoughDensityUnsupported()
    theta0 = _snap_angle(surface, theta0) if snap else theta0
    mean = special.gamma((beta + 1) / 2) / (np.sqrt(np.pi) * special.gamma(beta / 2 + 1))

    def integrand(tau):
        return abs(np.sin(tau - theta0)) ** beta - mean

    t = surface.t
    edges = np.append(t, 2 * np.pi)
    pieces = np.zeros(surface.N)
    for i in range(surface.N):
        lo, hi = edges[i], edges[i + 1]
        zeros = [z for z in theta0 + np.pi * np.arange(-2, 4) if lo < z < hi]
        pieces[i] = integrate.quad(integrand, lo, hi, points=zeros or None, limit=100)[0]
    values = np.concatenate([[0.0], np.cumsum(pieces)[:-1]])
    derivative = np.abs(np.sin(t - theta0)) ** beta - mean
    return Density(values + 0j, exponent=1.0 + beta, label=f"antiderivative^{beta}",
                   param_derivative=derivative + 0j)


def density_from_spec(surface: BoundarySurface, spec: Union[str, Mapping[str, Any]]) -> Density:
    """
    Строит плотность по описанию из конфигурации эксперимента.

    Поддерживаются: one, zero, cos_theta, coordinate(axis), normal(axis),
    rough_abs_sin(beta, theta0), rough_distance(beta, x0),
    rough_antiderivative(beta, theta0).
    """
    spec = {"kind": spec} if isinstance(spec, str) else dict(spec)
    kind = spec.get("kind")
    if kind == "one":
        return constant_density(surface, 1.0)
    if kind == "zero":
        return constant_density(surface, 0.0)
    if kind == "cos_theta":
        return cos_theta_density(surface)
    if kind == "coordinate":
        return coordinate_density(surface, int(spec.get("axis", 0)))
    if kind == "normal":
        return normal_density(surface, int(spec.get("axis", 0)))
    if kind == "rough_abs_sin":
        return rough_abs_sin_density(surface, float(spec["beta"]), float(spec.get("theta0", 0.0)))
    if kind == "rough_distance":
        return rough_distance_density(surface, float(spec["beta"]), spec.get("x0", 0))
    if kind == "rough_antiderivative":
        return rough_antiderivative_density(surface, float(spec["beta"]), float(spec.get("theta0", 0.0)))
    raise ConfigError(reason=f"неизвестная плотность '{kind}'")


# =============================================================================
# КАСАТЕЛЬНОЕ ИСЧИСЛЕНИЕ
# =============================================================================

def spectral_derivative(surface: BoundarySurface, values) -> np.ndarray:
    """Спектральная производная по параметру t периодических узловых значений."""
    values = np.asarray(values, dtype=complex)
    N = values.shape[0]
    wave = np.fft.fftfreq(N, 1.0 / N)
    wave[N // 2] = 0.0
    return np.fft.ifft(1j * wave * np.fft.fft(values))


def arclength_derivative(surface: BoundarySurface, f: Density) -> np.ndarray:
    """df/ds в узлах кривой: точная производная по параметру, если известна."""
    if f.param_derivative is not None:
        return f.param_derivative / surface.speed
    return spectral_derivative(surface, f.values) / surface.speed


def tangential_M(surface: BoundarySurface, l: int, r: int, f) -> Density:
    """
    Касательная производная M_lr[f] = ν_l ∂_r f̃ − ν_r ∂_l f̃ в узлах.

    Args:
        surface: Граница
        l, r: Оси (нумерация с нуля)
        f: Плотность; в 2D допускаются узловые значения

    Returns:
        Узловая плотность

    Raises:
        NeedsAmbientForm: В 3D без объемлющей формы
    """
    f = as_density(surface, f)
    if l == r:
        return Density(np.zeros(surface.N, dtype=complex), label=f"M{l}{r}")
    if f.has_ambient:
        grad = f.grad_at(surface.nodes)
        nu = surface.normals
        values = nu[:, l] * grad[:, r] - nu[:, r] * grad[:, l]
        return Density(values, label=f"M{l}{r}[{f.label}]")
    if surface.n != 2:
        raise NeedsAmbientForm(operation="tangential_M")
    ds = arclength_derivative(surface, f)
    sign = 1.0 if (l, r) == (0, 1) else -1.0
    return Density(sign * ds, label=f"M{l}{r}[{f.label}]")


def tangential_gradient(surface: BoundarySurface, f) -> np.ndarray:
    """
    Касательный градиент grad f̃ − (ν·grad f̃)ν в узлах, форма (N, n).

    Raises:
        NeedsAmbientForm: В 3D без объемлющей формы
    """
    f = as_density(surface, f)
    nu = surface.normals
    if f.has_ambient:
        grad = f.grad_at(surface.nodes)
        return grad - np.sum(grad * nu, axis=1)[:, None] * nu
    if surface.n != 2:
        raise NeedsAmbientForm(operation="tangential_gradient")
    return arclength_derivative(surface, f)[:, None] * surface.tangents


def conormal_factor(surface: BoundarySurface, a2: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Конормаль a²ν и νᵗa²ν в узлах."""
    w = surface.normals @ np.asarray(a2).T
    return w, np.sum(w * surface.normals, axis=1)


# =============================================================================
# МОДУЛИ НЕПРЕРЫВНОСТИ И ПОЛУНОРМЫ
# =============================================================================

@dataclass(frozen=True)
class Modulus:
    """Модуль непрерывности: степенной r^α или ω_θ(r) = r^θ|ln r|."""
    kind: str
    param: float

    def __post_init__(self):
        if self.kind not in ("power", "omega"):
            raise ConfigError(reason=f"неизвестный модуль '{self.kind}'")
        if not 0 < self.param <= 1:
            raise ConfigError(reason=f"параметр модуля {self.param} вне (0, 1]")

    @classmethod
    def power(cls, alpha: float) -> 'Modulus':
        return cls("power", alpha)

    @classmethod
    def omega(cls, theta: float = 1.0) -> 'Modulus':
        return cls("omega", theta)

    @classmethod
    def from_spec(cls, spec: Mapping[str, Any]) -> 'Modulus':
        if spec.get("kind") == "power":
            return cls.power(float(spec.get("alpha", 1.0)))
        return cls.omega(float(spec.get("theta", 1.0)))

    @property
    def breakpoint(self) -> float:
        """r_θ = e^{−1/θ} (для степенного модуля - бесконечность)."""
        return float(np.exp(-1.0 / self.param)) if self.kind == "omega" else np.inf

    @property
    def label(self) -> str:
        return f"{self.kind}({self.param})"

    def _log_branch(self, r):
        return r ** self.param * np.abs(np.log(r))

    def __call__(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        if self.kind == "power":
            return r ** self.param
        r_theta = self.breakpoint
        tail = self._log_branch(r_theta)
        with np.errstate(divide='ignore', invalid='ignore'):
            inner = self._log_branch(np.clip(r, np.finfo(float).tiny, r_theta))
        return np.where(r <= 0, 0.0, np.where(r <= r_theta, inner, tail))


def modulus_scaling_constant(modulus: Modulus, grid=None) -> float:
    """sup ω(a t)/(a ω(t)) по a ≥ 1 и t на логарифмической сетке."""
    grid = np.logspace(-8, 1, 91) if grid is None else np.asarray(grid, dtype=float)
    scales = grid[grid >= 1.0] if np.any(grid >= 1.0) else np.array([1.0])
    t = grid[:, None]
    a = scales[None, :]
    return float(np.max(modulus(a * t) / (a * modulus(t))))


class PairSampler:
    """
    Детерминированная выборка пар узлов для оценки супремумов.

    До exhaustive_limit узлов перебираются все пары; иначе пары стратифицируются
    по диадическим полосам расстояний [2^{−k−1}, 2^{−k}) по per_band на полосу.
    Если задан max_separation, берутся все пары не дальше этого расстояния.
    """

    def __init__(self, seed: int = DEFAULT_SEED, per_band: int = PAIRS_PER_BAND,
                 exhaustive_limit: int = EXHAUSTIVE_PAIR_LIMIT,
                 max_separation: Optional[float] = None):
        self.seed = seed
        self.per_band = per_band
        self.exhaustive_limit = exhaustive_limit
        self.max_separation = max_separation

    def pairs(self, nodes: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Возвращает массивы индексов (I, J), I < J."""
        N = nodes.shape[0]
        if self.max_separation is not None:
            found = cKDTree(nodes).query_pairs(self.max_separation, output_type='ndarray')
            if len(found) == 0:
                return np.zeros(0, dtype=int), np.zeros(0, dtype=int)
            found = found[np.lexsort((found[:, 1], found[:, 0]))]
            return found[:, 0], found[:, 1]
        if N <= self.exhaustive_limit:
            return np.triu_indices(N, 1)

        rng = np.random.default_rng(self.seed)
        if N <= 4096:
            I, J = np.triu_indices(N, 1)
        else:
            I = rng.integers(0, N, 400_000)
            J = rng.integers(0, N, 400_000)
            _, near = cKDTree(nodes).query(nodes, k=17)
            I = np.concatenate([I, np.repeat(np.arange(N), 16)])
            J = np.concatenate([J, near[:, 1:].ravel()])
            keep = I != J
            I, J = np.minimum(I[keep], J[keep]), np.maximum(I[keep], J[keep])
            code = np.unique(I * N + J)
            I, J = code // N, code % N

        d = np.linalg.norm(nodes[I] - nodes[J], axis=1)
        positive = d > 0
        band = np.full(d.shape, np.iinfo(np.int64).max)
        band[positive] = np.floor(-np.log2(d[positive])).astype(np.int64)
        chosen: List[np.ndarray] = []
        for k in np.unique(band[positive]):
            members = np.flatnonzero(band == k)
            if members.size > self.per_band:
                members = np.sort(rng.choice(members, self.per_band, replace=False))
            chosen.append(members)
        index = np.concatenate(chosen) if chosen else np.zeros(0, dtype=int)
        return I[index], J[index]


def holder_seminorm(surface: BoundarySurface, values, modulus: Modulus,
                    sampler: Optional[PairSampler] = None, min_separation: float = 0.0) -> float:
    """
    Дискретная полунорма max |f(x)−f(y)|/ω(|x−y|) по выборке пар.

    Args:
        surface: Граница с узлами
        values: Узловые значения или Density
        modulus: Модуль непрерывности
        sampler: Выборка пар (по умолчанию PairSampler())
        min_separation: Учитывать только пары с |x−y| ≥ min_separation

    Raises:
        DegenerateNodeSet: Если все узлы совпадают
    """
    f = values.values if isinstance(values, Density) else np.asarray(values)
    nodes = surface.nodes
    if nodes.shape[0] < 2 or np.all(np.ptp(nodes, axis=0) == 0):
        raise DegenerateNodeSet()
    I, J = (sampler or PairSampler()).pairs(nodes)
    d = np.linalg.norm(nodes[I] - nodes[J], axis=1)
    keep = (d > 0) & (d >= min_separation)
    if not np.any(keep):
        return 0.0
    quotients = np.abs(f[I[keep]] - f[J[keep]]) / modulus(d[keep])
    return float(np.max(quotients))


def taylor_defect(surface: BoundarySurface, f, modulus: Modulus,
                  sampler: Optional[PairSampler] = None) -> float:
    """
    max |f(y) − f(x) − grad_∂Ω f(x)·(y−x)| / (|x−y|·ω(|x−y|)) по упорядоченным парам.

    Raises:
        NeedsAmbientForm: Если у f нет объемлющей формы
    """
    f = as_density(surface, f)
    if not f.has_ambient:
        raise NeedsAmbientForm(operation="taylor_defect")
    grad = tangential_gradient(surface, f)
    nodes = surface.nodes
    I, J = (sampler or PairSampler()).pairs(nodes)
    I, J = np.concatenate([I, J]), np.concatenate([J, I])
    diff = nodes[J] - nodes[I]
    d = np.linalg.norm(diff, axis=1)
    keep = d > 0
    if not np.any(keep):
        return 0.0
    I, J, diff, d = I[keep], J[keep], diff[keep], d[keep]
    defect = np.abs(f.values[J] - f.values[I] - np.sum(grad[I] * diff, axis=1))
    return float(np.max(defect / (d * modulus(d))))
