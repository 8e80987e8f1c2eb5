"""
Модуль граничных квадратур.

Предоставляет функции для:
- Гладкой квадратуры (периодическая трапеция, центроидное правило)
- Логарифмической квадратуры Кресса для слабо сингулярных ядер на кривых
- Разложения ядра на логарифмическую и гладкую части с пределом на диагонали
- Усечённых интегралов по ∂Ω∖B(x,r) и их супремумов
- Правила Даффи и ближнего поля на триангуляциях сферы и эллипсоида
"""

import logging
from dataclasses import dataclass
from typing import Callable, Dict, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg
from scipy.spatial import cKDTree

from config import (
    CHUNK_SIZE,
    DIAGONAL_STENCIL,
    DUFFY_ORDER,
    NEAR_FIELD_FACTOR,
    NEAR_FIELD_ORDER,
)
from geometry.boundary_geometry import BoundarySurface, Density
from utils.exceptions import (
    MissingSingularityDeclaration,
    MissingSplit,
    NonFiniteIntegrand,
    UnsupportedDimension,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class QuadratureRule:
    """Описание правила квадратуры для отчётов."""
    kind: str
    order: int
    accuracy: str


PERIODIC_TRAPEZOID = QuadratureRule("periodic-trapezoid", 0, "спектральная для аналитических функций")
KRESS_LOG = QuadratureRule("kress-log", 0, "спектральная для логарифмических ядер")
DUFFY_TRIANGLE = QuadratureRule("duffy-triangle", DUFFY_ORDER, "около 1% на уровне 4")
TRUNCATED = QuadratureRule("truncated", 0, "точная по набору узлов")


def rule_for(surface: BoundarySurface, integral: str = "singular") -> QuadratureRule:
    """
    Правило для интеграла данного вида на границе.

    Args:
        integral: singular (слабо особое ядро), smooth или truncated
    """
    if integral == "truncated":
        return TRUNCATED
    if surface.n == 3:
        return DUFFY_TRIANGLE
    return KRESS_LOG if integral == "singular" else PERIODIC_TRAPEZOID


@dataclass(eq=False)
class KernelSplit:
    """Ядро кривой в виде K(t,τ) = L(t,τ)·ln(4 sin²((t−τ)/2)) + M(t,τ) на сетке узлов."""
    L: np.ndarray
    M: np.ndarray


# =============================================================================
# ГЛАДКИЕ ИНТЕГРАЛЫ
# =============================================================================

def integrate_smooth(surface: BoundarySurface, values) -> complex:
    """
    Σ w_i f_i - трапеция на кривой, центроидное правило на поверхности.

    Raises:
        NonFiniteIntegrand: Если среди значений есть inf или nan
    """
    f = values.values if isinstance(values, Density) else np.asarray(values)
    if not np.all(np.isfinite(f)):
        raise NonFiniteIntegrand()
    return complex(np.sum(surface.weights * f))


def singular_moment_sup(surface: BoundarySurface, gamma: Optional[float] = None,
                        log: bool = False) -> float:
    """
    Дискретный sup по узлам x от Σ w_i|x−x_i|^{−γ} (или Σ w_i|ln|x−x_i||).

    Args:
        surface: Граница
        gamma: Показатель особенности (по умолчанию n − 1.5)
        log: Логарифмическая особенность вместо степенной
    """
    gamma = surface.n - 1.5 if gamma is None else gamma
    best = 0.0
    for block in _blocks(surface.N, CHUNK_SIZE):
        d = np.linalg.norm(surface.nodes[block, None, :] - surface.nodes[None, :, :], axis=-1)
        d[np.arange(len(block)), block] = np.inf
        terms = np.abs(np.log(d)) if log else d ** (-gamma)
        terms[np.arange(len(block)), block] = 0.0
        best = max(best, float(np.max(terms @ surface.weights)))
    return best


def _blocks(N: int, size: int):
    """Разбивает 0..N−1 на последовательные блоки индексов."""
    for start in range(0, N, size):
        yield np.arange(start, min(start + size, N))


# =============================================================================
# ЛОГАРИФМИЧЕСКАЯ КВАДРАТУРА НА КРИВЫХ
# =============================================================================

def kress_weights(N: int) -> np.ndarray:
    """
    Веса R(t_k) логарифмического правила Кресса, N = 2n.

    R(t) = −(2π/n)Σ_{m=1}^{n−1} cos(mt)/m − (π/n²)cos(nt).
    """
    n = N // 2
    t = 2 * np.pi * np.arange(N) / N
    m = np.arange(1, n)
    R = -(2 * np.pi / n) * (np.cos(np.outer(t, m)) / m).sum(axis=1)
    return R - (np.pi / n ** 2) * np.cos(n * t)


def kress_matrix(N: int) -> np.ndarray:
    """Циркулянтная матрица R_ij = R(t_i − t_j)."""
    return linalg.circulant(kress_weights(N))


def log_kernel_grid(N: int) -> np.ndarray:
    """ln(4 sin²((t_i−t_j)/2)) вне диагонали, ноль на диагонали."""
    t = 2 * np.pi * np.arange(N) / N
    diff = t[:, None] - t[None, :]
    with np.errstate(divide='ignore'):
        grid = np.log(4 * np.sin(diff / 2) ** 2)
    np.fill_diagonal(grid, 0.0)
    return grid


def extrapolation_coefficients(p: int = DIAGONAL_STENCIL) -> np.ndarray:
    """Коэффициенты c_k = Π_{m≠k} m²/(m²−k²) чётной экстраполяции в ноль."""
    c = np.ones(p)
    for k in range(1, p + 1):
        for m in range(1, p + 1):
            if m != k:
                c[k - 1] *= m * m / (m * m - k * k)
    return c


def extrapolate_diagonal(grid: np.ndarray, p: int = DIAGONAL_STENCIL) -> np.ndarray:
    """Предел на диагонали по p парам симметричных соседей вдоль строки."""
    N = grid.shape[0]
    idx = np.arange(N)
    coefficients = extrapolation_coefficients(p)
    limit = np.zeros(N, dtype=grid.dtype)
    for k, c in enumerate(coefficients, start=1):
        limit += c * 0.5 * (grid[idx, (idx + k) % N] + grid[idx, (idx - k) % N])
    return limit


def split_from_log_coefficient(surface: BoundarySurface, K: np.ndarray, C: np.ndarray,
                               diagonal: Optional[np.ndarray] = None,
                               log_diagonal: Optional[np.ndarray] = None) -> KernelSplit:
    """
    Строит разложение по ядру K и его коэффициенту C при ln|T⁻¹(x−y)|.

    L = C/2, M = K − L·ln(4 sin²((t−τ)/2)). Диагонали L и M берутся как
    предел по параметру, если не переданы готовые diagonal (для M) и
    log_diagonal (для L).
    """
    if surface.n != 2:
        raise UnsupportedDimension(n=surface.n)
    L = np.array(C, dtype=complex) / 2.0
    M = np.array(K, dtype=complex) - L * log_kernel_grid(surface.N)
    np.fill_diagonal(L, extrapolate_diagonal(L) if log_diagonal is None else log_diagonal)
    np.fill_diagonal(M, extrapolate_diagonal(M) if diagonal is None else diagonal)
    return KernelSplit(L=L, M=M)


def weakly_singular_matrix(surface: BoundarySurface, split: KernelSplit) -> np.ndarray:
    """Матрица Нистрёма (R∘L·|x′| + M·w)."""
    if not isinstance(split, KernelSplit):
        raise MissingSplit()
    key = f'kress_{surface.N}'
    if key not in surface._cache:
        surface._cache[key] = kress_matrix(surface.N)
    R = surface._cache[key]
    return R * split.L * surface.speed[None, :] + split.M * surface.weights[None, :]


def integrate_weakly_singular_2d(surface: BoundarySurface, split: KernelSplit, x: int,
                                 values=None) -> complex:
    """
    ∫ K(x, y) f(y) dσ_y в узле x по правилу Кресса.

    Raises:
        MissingSplit: Если вместо KernelSplit переданы сырые значения ядра
    """
    if not isinstance(split, KernelSplit):
        raise MissingSplit()
    R = kress_weights(surface.N)
    row_R = np.roll(R, x)
    f = np.ones(surface.N) if values is None else (
        values.values if isinstance(values, Density) else np.asarray(values))
    row = row_R * split.L[x] * surface.speed + split.M[x] * surface.weights
    return complex(np.sum(row * f))


def curvature_limit(surface: BoundarySurface, a2: np.ndarray) -> np.ndarray:
    """
    Диагональ ядра главной части двойного слоя на кривой:
    −ν·x″ / (4π√det a² · x′ᵗ(a²)⁻¹x′); для лапласиана это κ/(4π).
    """
    a2 = np.asarray(a2, dtype=float)
    inverse = np.linalg.inv(a2)
    quad = np.einsum('ij,jk,ik->i', surface.dx, inverse, surface.dx)
    curvature_term = np.sum(surface.normals * surface.ddx, axis=1)
    return -curvature_term / (4 * np.pi * np.sqrt(np.linalg.det(a2)) * quad)


# =============================================================================
# УСЕЧЁННЫЕ ИНТЕГРАЛЫ
# =============================================================================

def integrate_truncated(surface: BoundarySurface, kernel: Callable, x: int, r: float) -> complex:
    """
    Σ w_i K(x, x_i) по узлам с |x_i − x| ≥ r; сам узел x пропускается.

    Args:
        surface: Граница
        kernel: Вызываемый объект kernel(surface, I, J) → значения
        x: Индекс узла
        r: Радиус исключаемого шара
    """
    d = np.linalg.norm(surface.nodes - surface.nodes[x], axis=1)
    mask = d >= r
    mask[x] = False
    if not np.any(mask):
        return 0j
    J = np.flatnonzero(mask)
    values = np.asarray(kernel(surface, np.full(J.size, x), J), dtype=complex)
    return complex(np.sum(surface.weights[J] * values))


def truncated_sup(surface: BoundarySurface, kernel: Callable,
                  radii: Optional[Sequence[float]] = None,
                  targets: Optional[Sequence[int]] = None) -> Tuple[float, int, float]:
    """
    sup по узлам x и радиусам r от |Σ_{|x_i−x|≥r} w_i K(x, x_i)|.

    Без сетки радиусов берутся все точки разрыва (все расстояния до узлов).

    Returns:
        (супремум, узел, радиус), на которых он достигнут
    """
    targets = np.arange(surface.N) if targets is None else np.asarray(targets)
    radii = None if radii is None else np.sort(np.asarray(radii, dtype=float))
    best, best_x, best_r = 0.0, int(targets[0]), np.inf
    nodes = surface.nodes
    for block in np.array_split(targets, max(1, len(targets) // CHUNK_SIZE)):
        I = np.repeat(block, surface.N)
        J = np.tile(np.arange(surface.N), block.size)
        values = np.asarray(kernel(surface, I, J), dtype=complex).reshape(block.size, surface.N)
        values = values * surface.weights[None, :]
        d = np.linalg.norm(nodes[block, None, :] - nodes[None, :, :], axis=-1)
        values[np.arange(block.size), block] = 0.0
        order = np.argsort(-d, axis=1, kind='stable')
        d_sorted = np.take_along_axis(d, order, axis=1)
        partial = np.cumsum(np.take_along_axis(values, order, axis=1), axis=1)
        if radii is None:
            # частичная сумма допустима только после всей группы равноудалённых узлов
            tol = 1e-12 * max(surface.diam, 1.0)
            complete = np.ones_like(d_sorted, dtype=bool)
            complete[:, :-1] = (d_sorted[:, :-1] - d_sorted[:, 1:]) > tol
            magnitude = np.where(complete, np.abs(partial), 0.0)
            row_best = magnitude.argmax(axis=1)
            local = magnitude[np.arange(block.size), row_best]
            local_r = d_sorted[np.arange(block.size), row_best]
        else:
            # число узлов с расстоянием ≥ r для каждого r
            counts = np.stack([(d_sorted >= r).sum(axis=1) for r in radii], axis=1)
            padded = np.concatenate([np.zeros((block.size, 1), dtype=complex), partial], axis=1)
            magnitude = np.abs(np.take_along_axis(padded, counts, axis=1))
            flat = magnitude.argmax(axis=1)
            local = magnitude[np.arange(block.size), flat]
            local_r = radii[flat]
        k = int(np.argmax(local))
        if local[k] > best:
            best, best_x, best_r = float(local[k]), int(block[k]), float(local_r[k])
    return best, best_x, best_r


# =============================================================================
# ПРАВИЛА НА ТРИАНГУЛЯЦИЯХ
# =============================================================================

@dataclass(eq=False)
class PointKernel:
    """Ядро на точках: fn(t, Y, NY) с индексами целевых узлов t и точками Y с нормалями NY."""
    fn: Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]
    singularity: Optional[str] = None
    label: str = ''


def gauss_legendre_01(order: int) -> Tuple[np.ndarray, np.ndarray]:
    """Узлы и веса Гаусса–Лежандра на [0, 1]."""
    x, w = np.polynomial.legendre.leggauss(order)
    return (x + 1) / 2, w / 2


def collapsed_rule(order: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Правило Даффи на квадрате: p = v0 + s(v1−v0) + st(v2−v1), якобиан s.

    Returns:
        (s, t, веса) с учётом множителя s
    """
    x, w = gauss_legendre_01(order)
    s, t = np.meshgrid(x, x, indexing='ij')
    weights = np.outer(w, w) * s
    return s.ravel(), t.ravel(), weights.ravel()


def triangle_rule(v0: np.ndarray, v1: np.ndarray, v2: np.ndarray, order: int):
    """
    Точки и веса правила Даффи на плоских треугольниках с вершиной v0.

    Вершины - массивы формы (..., 3); особенность допустима в v0.
    """
    s, t, w = collapsed_rule(order)
    e1 = v1 - v0
    e2 = v2 - v1
    points = v0[..., None, :] + s[:, None] * e1[..., None, :] + (s * t)[:, None] * e2[..., None, :]
    jac = np.linalg.norm(np.cross(e1, e2), axis=-1)
    return points, jac[..., None] * w


def apex_rule(triangles: np.ndarray, apex: np.ndarray, order: int):
    """Разбиение треугольников на три подтреугольника вокруг apex и правило Даффи в каждом."""
    parts = [triangle_rule(apex, triangles[..., k, :], triangles[..., (k + 1) % 3, :], order)
             for k in range(3)]
    points = np.concatenate([p for p, _ in parts], axis=-2)
    weights = np.concatenate([w for _, w in parts], axis=-1)
    return points, weights


def project_rule(surface: BoundarySurface, triangles: np.ndarray, flat_points: np.ndarray,
                 flat_weights: np.ndarray):
    """
    Переносит правило с плоских граней на поверхность X = D·p/|p|.

    dσ = (n_f·p)/|p|³ · abc·|D⁻¹u| dA_flat.

    Returns:
        (точки, нормали, веса) на поверхности
    """
    face_normal = np.cross(triangles[..., 1, :] - triangles[..., 0, :],
                           triangles[..., 2, :] - triangles[..., 0, :])
    face_normal /= np.linalg.norm(face_normal, axis=-1)[..., None]
    orientation = np.sign(np.sum(face_normal * triangles.mean(axis=-2), axis=-1))
    face_normal *= orientation[..., None]

    norm = np.linalg.norm(flat_points, axis=-1)
    u = flat_points / norm[..., None]
    solid = np.sum(face_normal[..., None, :] * flat_points, axis=-1) / norm ** 3
    radii = surface.radii
    scaled = u / radii
    scaled_norm = np.linalg.norm(scaled, axis=-1)
    weights = flat_weights * solid * np.prod(radii) * scaled_norm
    return u * radii, scaled / scaled_norm[..., None], weights


@dataclass(eq=False)
class SurfaceRule:
    """Предвычисленные правила для самосингулярных и ближних пар на триангуляции."""
    self_points: np.ndarray
    self_normals: np.ndarray
    self_weights: np.ndarray
    near_targets: np.ndarray
    near_sources: np.ndarray
    near_points: np.ndarray
    near_normals: np.ndarray
    near_weights: np.ndarray


def surface_rule(surface: BoundarySurface) -> SurfaceRule:
    """Строит (и кэширует) правила Даффи и ближнего поля для поверхности."""
    if surface.n != 3:
        raise UnsupportedDimension(n=surface.n)
    if 'surface_rule' in surface._cache:
        return surface._cache['surface_rule']

    triangles = surface.triangles
    centroid = triangles.mean(axis=1)
    flat, weights = apex_rule(triangles, centroid, DUFFY_ORDER)
    self_points, self_normals, self_weights = project_rule(surface, triangles, flat, weights)

    tree = cKDTree(surface.nodes)
    radius = NEAR_FIELD_FACTOR * surface.spacing
    neighbours = tree.query_ball_point(surface.nodes, radius)
    targets = np.concatenate([np.full(len(nb), i) for i, nb in enumerate(neighbours)]).astype(int)
    sources = np.concatenate([np.sort(nb) for nb in neighbours]).astype(int)
    keep = targets != sources
    targets, sources = targets[keep], sources[keep]
    near_tri = triangles[sources]
    flat, weights = triangle_rule(near_tri[:, 0], near_tri[:, 1], near_tri[:, 2], NEAR_FIELD_ORDER)
    near_points, near_normals, near_weights = project_rule(surface, near_tri, flat, weights)

    rule = SurfaceRule(self_points, self_normals, self_weights,
                       targets, sources, near_points, near_normals, near_weights)
    surface._cache['surface_rule'] = rule
    logger.debug(f"Правило поверхности: {surface.N} граней, {targets.size} ближних пар")
    return rule


def _source_values(density: Optional[Density], points: np.ndarray, sources: np.ndarray) -> np.ndarray:
    """Значения плотности в квадратурных точках: объемлющая форма или значение грани."""
    if density is None:
        return np.ones(points.shape[:-1])
    if density.has_ambient:
        return density.at(points)
    return np.broadcast_to(density.values[sources][..., None], points.shape[:-1])


def apply_surface_kernel(surface: BoundarySurface, kernel: PointKernel,
                         density: Optional[Density] = None,
                         targets: Optional[np.ndarray] = None) -> np.ndarray:
    """
    ∫ K(x_t, y) μ(y) dσ_y для целевых узлов на триангуляции, без хранения матрицы.

    Дальние грани - центроидное правило, ближние - правило Даффи порядка
    NEAR_FIELD_ORDER, собственная грань - разбиение на три подтреугольника.
    """
    if kernel.singularity is None:
        raise MissingSingularityDeclaration()
    rule = surface_rule(surface)
    N = surface.N
    targets = np.arange(N) if targets is None else np.asarray(targets, dtype=int)
    position = -np.ones(N, dtype=int)
    position[targets] = np.arange(targets.size)
    result = np.zeros(targets.size, dtype=complex)
    mu_nodes = np.ones(N) if density is None else density.values
    weighted = surface.weights * mu_nodes

    near_mask = position[rule.near_targets] >= 0
    near_t = rule.near_targets[near_mask]
    near_s = rule.near_sources[near_mask]

    offset = np.full(surface.n, max(surface.diam, 1.0))
    for block in _blocks(targets.size, CHUNK_SIZE):
        t_idx = targets[block]
        rows = np.arange(t_idx.size)
        # собственный узел заменяется далёкой точкой, его вклад затем обнуляется
        sources = np.broadcast_to(surface.nodes, (t_idx.size, N, surface.n)).copy()
        sources[rows, t_idx] = surface.nodes[t_idx] + offset
        values = np.asarray(kernel.fn(t_idx[:, None], sources, surface.normals[None, :, :]), dtype=complex)
        values = np.broadcast_to(values, (t_idx.size, N)).copy()
        values[rows, t_idx] = 0.0
        in_block = (position[near_t] >= block[0]) & (position[near_t] <= block[-1])
        values[position[near_t[in_block]] - block[0], near_s[in_block]] = 0.0
        result[block] += values @ weighted

    if near_t.size:
        points = rule.near_points[near_mask]
        normals = rule.near_normals[near_mask]
        weights = rule.near_weights[near_mask]
        values = kernel.fn(near_t[:, None], points, normals)
        contribution = np.sum(values * weights * _source_values(density, points, near_s), axis=1)
        np.add.at(result, position[near_t], contribution)

    points = rule.self_points[targets]
    values = kernel.fn(targets[:, None], points, rule.self_normals[targets])
    result += np.sum(values * rule.self_weights[targets] * _source_values(density, points, targets), axis=1)
    return result


def duffy_integrate_3d(surface: BoundarySurface, kernel: PointKernel, x: int,
                       density: Optional[Density] = None) -> complex:
    """
    ∫ K(x, y) μ(y) dσ_y в узле x триангуляции.

    Raises:
        MissingSingularityDeclaration: Если у ядра не объявлена особенность
    """
    return complex(apply_surface_kernel(surface, kernel, density, np.array([x]))[0])
