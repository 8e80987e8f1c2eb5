"""
Модуль классов ядер потенциального типа.

Предоставляет функции для:
- Оценки выборочных норм классов K_s, K_{s1,s2,s3} и «острого» класса
- Построения ядра разностей Ξ[μ] и однородных ядер свёртки
- Стандартных ядер, построенных из S_a (градиент, гессиан, касательный градиент)
- Проверки неравенства для произведения ядер, леммы о вложении
  и оценки для ядер с «замороженным» направлением

Выборочные нормы - нижние оценки истинных супремумов, поэтому проверки
неравенств только опровергают, но не доказывают.
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Optional, Sequence, Tuple

import numpy as np

from config import DEFAULT_SEED, NORM_INFLATION, TRIPLE_COUNT
from geometry.boundary_geometry import BoundarySurface, Density, PairSampler, as_density
from geometry.quadrature import truncated_sup
from operators.fundamental_solution import evaluate
from utils.exceptions import NonFiniteKernelValue

logger = logging.getLogger(__name__)

Exponents = Tuple[float, float, float]
Triples = Tuple[np.ndarray, np.ndarray, np.ndarray]


@dataclass(eq=False)
class KernelHandle:
    """Функция двух точек границы вне диагонали с объявленными показателями."""
    evaluator: Callable[[BoundarySurface, np.ndarray, np.ndarray], np.ndarray]
    exponents: Exponents
    label: str = ''
    degree: Optional[float] = None
    parity: Optional[str] = None

    def __call__(self, surface: BoundarySurface, I, J) -> np.ndarray:
        I = np.asarray(I, dtype=int)
        J = np.asarray(J, dtype=int)
        values = np.asarray(self.evaluator(surface, I, J), dtype=complex)
        values = np.broadcast_to(values, np.broadcast(I, J).shape)
        off = I != J
        if not np.all(np.isfinite(values[off])):
            raise NonFiniteKernelValue(label=self.label)
        return values

    @classmethod
    def from_points(cls, fn: Callable[[np.ndarray, np.ndarray], np.ndarray], exponents: Exponents,
                    label: str = '', **kwargs) -> 'KernelHandle':
        """Ядро по функции fn(x, y) точек."""
        def evaluator(surface, I, J):
            with np.errstate(divide='ignore', invalid='ignore'):
                return fn(surface.nodes[I], surface.nodes[J])

        return cls(evaluator, tuple(exponents), label, **kwargs)


@dataclass
class KernelNormReport:
    """Компоненты выборочной нормы ядра и точки, на которых достигнуты супремумы."""
    label: str
    exponents: Exponents
    first: float
    second: float
    sharp: Optional[float] = None
    first_sample: Optional[Tuple[int, int]] = None
    second_sample: Optional[Tuple[int, int, int]] = None
    sharp_sample: Optional[Tuple[int, float]] = None
    pair_count: int = 0
    triple_count: int = 0
    seed: Optional[int] = None
    coordinates: Dict[str, Any] = field(default_factory=dict)

    @property
    def norm(self) -> float:
        total = self.first + self.second
        return total + self.sharp if self.sharp is not None else total

    def to_dict(self) -> Dict[str, Any]:
        """Словарь для JSON-отчёта."""
        return {
            "label": self.label,
            "exponents": list(self.exponents),
            "first": self.first,
            "second": self.second,
            "sharp": self.sharp,
            "first_sample": self.first_sample,
            "second_sample": self.second_sample,
            "sharp_sample": self.sharp_sample,
            "pair_count": self.pair_count,
            "triple_count": self.triple_count,
            "seed": self.seed,
            "coordinates": self.coordinates,
        }


# =============================================================================
# ВЫБОРКИ
# =============================================================================

class TripleSampler:
    """
    Детерминированная выборка троек (x′, x″, y).

    x′ равномерно по узлам, x″ - в случайной диадической полосе расстояний
    от x′, y - равномерно по узлам вне шара B(x′, 2|x′−x″|).
    """

    def __init__(self, seed: int = DEFAULT_SEED, count: int = TRIPLE_COUNT):
        self.seed = seed
        self.count = count

    def sample(self, surface: BoundarySurface) -> Triples:
        rng = np.random.default_rng(self.seed)
        nodes = surface.nodes
        diam = surface.diam
        spacing = surface.spacing
        bands = max(1, int(np.floor(np.log2(diam / spacing))))
        first, second, third = [], [], []
        attempts = 0
        while len(first) < self.count and attempts < 20 * self.count:
            attempts += 1
            i = int(rng.integers(surface.N))
            d = np.linalg.norm(nodes - nodes[i], axis=1)
            k = int(rng.integers(1, bands + 1))
            candidates = np.flatnonzero((d > diam * 2.0 ** (-k - 1)) & (d <= diam * 2.0 ** (-k)))
            if candidates.size == 0:
                continue
            j = int(candidates[rng.integers(candidates.size)])
            admissible = np.flatnonzero(d >= 2 * d[j])
            if admissible.size == 0:
                continue
            first.append(i)
            second.append(j)
            third.append(int(admissible[rng.integers(admissible.size)]))
        logger.debug(f"Выборка троек: {len(first)} из {attempts} попыток")
        return np.array(first, dtype=int), np.array(second, dtype=int), np.array(third, dtype=int)


def _pairs_with_triples(surface: BoundarySurface, sampler: Optional[PairSampler],
                        triples: Optional[Triples]) -> Tuple[np.ndarray, np.ndarray]:
    """Пары из выборки в обоих порядках плюс пары (x′,y), (x″,y) из троек."""
    I, J = (sampler or PairSampler()).pairs(surface.nodes)
    I, J = np.concatenate([I, J]), np.concatenate([J, I])
    if triples is not None:
        x1, x2, y = triples
        I = np.concatenate([I, x1, x2])
        J = np.concatenate([J, y, y])
    return I, J


def _resolve_triples(surface: BoundarySurface, triples) -> Triples:
    if triples is None:
        return TripleSampler().sample(surface)
    if isinstance(triples, TripleSampler):
        return triples.sample(surface)
    return triples


# =============================================================================
# НОРМЫ
# =============================================================================

def _first_component(surface: BoundarySurface, K: KernelHandle, s: float,
                     I: np.ndarray, J: np.ndarray) -> Tuple[float, Optional[Tuple[int, int]]]:
    d = np.linalg.norm(surface.nodes[I] - surface.nodes[J], axis=1)
    keep = d > 0
    if not np.any(keep):
        return 0.0, None
    I, J, d = I[keep], J[keep], d[keep]
    values = np.abs(K(surface, I, J)) * d ** s
    k = int(np.argmax(values))
    return float(values[k]), (int(I[k]), int(J[k]))


def _second_quotients(surface: BoundarySurface, K: KernelHandle, s2: float, s3: float,
                      triples: Triples) -> np.ndarray:
    x1, x2, y = triples
    nodes = surface.nodes
    d_y = np.linalg.norm(nodes[x1] - nodes[y], axis=1)
    d_x = np.linalg.norm(nodes[x1] - nodes[x2], axis=1)
    difference = np.abs(K(surface, x1, y) - K(surface, x2, y))
    return difference * d_y ** s2 / d_x ** s3


def norm_Ks(surface: BoundarySurface, K: KernelHandle, s: float,
            sampler: Optional[PairSampler] = None) -> float:
    """
    max |K(x,y)|·|x−y|^s по выборке пар.

    Raises:
        NonFiniteKernelValue: Если ядро не конечно на выборке
    """
    I, J = _pairs_with_triples(surface, sampler, None)
    return _first_component(surface, K, s, I, J)[0]


def norm_Ks1s2s3(surface: BoundarySurface, K: KernelHandle, exponents: Optional[Exponents] = None,
                 sampler: Optional[PairSampler] = None, triples=None) -> KernelNormReport:
    """
    Обе компоненты нормы K_{s1,s2,s3}: sup |x−y|^{s1}|K| и
    sup |x′−y|^{s2}/|x′−x″|^{s3}·|K(x′,y) − K(x″,y)| по y вне B(x′, 2|x′−x″|).
    """
    s1, s2, s3 = exponents or K.exponents
    triples = _resolve_triples(surface, triples)
    I, J = _pairs_with_triples(surface, sampler, triples)
    first, first_sample = _first_component(surface, K, s1, I, J)

    second, second_sample = 0.0, None
    if triples[0].size:
        quotients = _second_quotients(surface, K, s2, s3, triples)
        k = int(np.argmax(quotients))
        second = float(quotients[k])
        second_sample = (int(triples[0][k]), int(triples[1][k]), int(triples[2][k]))

    coordinates = {}
    if first_sample is not None:
        coordinates["first"] = [surface.nodes[i].tolist() for i in first_sample]
    if second_sample is not None:
        coordinates["second"] = [surface.nodes[i].tolist() for i in second_sample]
    seed = (sampler or PairSampler()).seed
    return KernelNormReport(
        label=K.label, exponents=(s1, s2, s3), first=first, second=second,
        first_sample=first_sample, second_sample=second_sample,
        pair_count=int(I.size), triple_count=int(triples[0].size), seed=seed,
        coordinates=coordinates,
    )


def sharp_norm(surface: BoundarySurface, K: KernelHandle, exponents: Optional[Exponents] = None,
               radii: Optional[Sequence[float]] = None, sampler: Optional[PairSampler] = None,
               triples=None) -> KernelNormReport:
    """
    Норма K_{s1,s2,s3} плюс sup по (x, r) |∫_{∂Ω∖B(x,r)} K(x,y) dσ_y|.

    Без сетки радиусов супремум берётся по всем точкам разрыва r ∈ (0, diam].
    """
    report = norm_Ks1s2s3(surface, K, exponents, sampler, triples)
    value, x, r = truncated_sup(surface, K, radii)
    report.sharp = value
    report.sharp_sample = (x, r)
    return report


def check_product_inequality(surface: BoundarySurface, K1: KernelHandle, e1: Exponents,
                             K2: KernelHandle, e2: Exponents, triples=None,
                             inflation: float = NORM_INFLATION,
                             sampler: Optional[PairSampler] = None) -> Dict[str, Any]:
    """
    Считает тройки, нарушающие оценку для произведения ядер:
    |K1K2(x′,y) − K1K2(x″,y)| ≤ ‖K1‖‖K2‖(|x′−x″|^{s3}/|x′−y|^{s2+t1}
    + 2^{|s1|}|x′−x″|^{t3}/|x′−y|^{t2+s1}).

    Нормы оцениваются на тех же тройках и раздуваются на inflation.
    """
    triples = _resolve_triples(surface, triples)
    s1, s2, s3 = e1
    t1, t2, t3 = e2
    norm1 = norm_Ks1s2s3(surface, K1, e1, sampler, triples).norm * inflation
    norm2 = norm_Ks1s2s3(surface, K2, e2, sampler, triples).norm * inflation

    x1, x2, y = triples
    if x1.size == 0:
        return {"violations": 0, "samples": 0, "max_ratio": 0.0, "norms": (norm1, norm2)}
    nodes = surface.nodes
    d_y = np.linalg.norm(nodes[x1] - nodes[y], axis=1)
    d_x = np.linalg.norm(nodes[x1] - nodes[x2], axis=1)
    left = np.abs(K1(surface, x1, y) * K2(surface, x1, y) - K1(surface, x2, y) * K2(surface, x2, y))
    bound = norm1 * norm2 * (d_x ** s3 / d_y ** (s2 + t1) + 2.0 ** abs(s1) * d_x ** t3 / d_y ** (t2 + s1))
    with np.errstate(divide='ignore', invalid='ignore'):
        ratio = np.where(bound > 0, left / bound, np.where(left > 0, np.inf, 0.0))
    violations = int(np.sum(left > bound))
    logger.info(f"Произведение {K1.label}·{K2.label}: нарушений {violations} из {x1.size}")
    return {"violations": violations, "samples": int(x1.size),
            "max_ratio": float(np.max(ratio)), "norms": (norm1, norm2)}


def embedding_check(surface: BoundarySurface, K: KernelHandle, exponents: Exponents,
                    a: float, triples=None) -> Dict[str, Any]:
    """
    Поточечная проверка леммы о вложении: частное с показателями (s2−a, s3−a)
    не превосходит 2^{−a}·частное с (s2, s3), так как |x′−y| ≥ 2|x′−x″|.
    """
    triples = _resolve_triples(surface, triples)
    _, s2, s3 = exponents
    original = _second_quotients(surface, K, s2, s3, triples)
    shifted = _second_quotients(surface, K, s2 - a, s3 - a, triples)
    bound = 2.0 ** (-a) * original
    violations = int(np.sum(shifted > bound * (1 + 1e-12) + 1e-300))
    return {"violations": violations, "samples": int(original.size)}


def frozen_direction_check(surface: BoundarySurface, F: Callable[[np.ndarray, np.ndarray], np.ndarray],
                           lip: float, triples=None) -> Dict[str, Any]:
    """
    Частное |F(dir(x′,y),|x′−y|) − F(dir(x″,y),|x″−y|)|·|x′−y|/|x′−x″| и его
    граница Lip(F)·(2 + diam).
    """
    triples = _resolve_triples(surface, triples)
    x1, x2, y = triples
    nodes = surface.nodes
    z1 = nodes[x1] - nodes[y]
    z2 = nodes[x2] - nodes[y]
    r1 = np.linalg.norm(z1, axis=1)
    r2 = np.linalg.norm(z2, axis=1)
    d_x = np.linalg.norm(nodes[x1] - nodes[x2], axis=1)
    quotient = np.abs(F(z1 / r1[:, None], r1) - F(z2 / r2[:, None], r2)) * r1 / d_x
    bound = lip * (2 + surface.diam)
    return {"max_quotient": float(np.max(quotient)) if quotient.size else 0.0,
            "bound": bound, "violations": int(np.sum(quotient > bound * (1 + 1e-12)))}


# =============================================================================
# КОНКРЕТНЫЕ ЯДРА
# =============================================================================

def zero_kernel(exponents: Exponents = (0.0, 0.0, 1.0)) -> KernelHandle:
    """Нулевое ядро."""
    return KernelHandle(lambda surface, I, J: np.zeros(np.broadcast(I, J).shape), exponents, "zero")


def constant_kernel(value: complex = 1.0, exponents: Exponents = (0.0, 0.0, 1.0)) -> KernelHandle:
    """Постоянное ядро."""
    return KernelHandle(lambda surface, I, J: np.full(np.broadcast(I, J).shape, value, dtype=complex),
                        exponents, f"const({value})")


def power_kernel(h: float) -> KernelHandle:
    """|x−y|^{−h} с показателями (h, h+1, 1)."""
    return KernelHandle.from_points(lambda X, Y: np.linalg.norm(X - Y, axis=-1) ** (-h),
                                    (h, h + 1, 1.0), f"|x-y|^-{h}", degree=-h, parity="even")


def xi_kernel(mu) -> KernelHandle:
    """Ξ[μ](x,y) = μ(x) − μ(y) с показателями (−α, 0, α)."""
    values = mu.values if isinstance(mu, Density) else np.asarray(mu)
    alpha = min(1.0, mu.exponent) if isinstance(mu, Density) and mu.exponent else 1.0
    label = mu.label if isinstance(mu, Density) else 'mu'
    return KernelHandle(lambda surface, I, J: values[I] - values[J],
                        (-alpha, 0.0, alpha), f"Xi[{label}]", parity="odd")


def homogeneous_kernel(k: Callable[[np.ndarray], np.ndarray], degree: float,
                       parity: Optional[str] = None, label: str = '') -> KernelHandle:
    """Ядро свёртки k(x−y) с положительно однородной k степени degree = −h."""
    h = -degree
    return KernelHandle.from_points(lambda X, Y: k(X - Y), (h, h + 1, 1.0),
                                    label or f"k_h{h}", degree=degree, parity=parity)


def sphere_maximum(k: Callable[[np.ndarray], np.ndarray], n: int, resolution: int = 3600) -> float:
    """max |k(θ)| по сетке направлений единичной сферы."""
    if n == 2:
        angle = 2 * np.pi * np.arange(resolution) / resolution
        theta = np.column_stack([np.cos(angle), np.sin(angle)])
    else:
        count = resolution * 6
        index = np.arange(count) + 0.5
        polar = np.arccos(1 - 2 * index / count)
        azimuth = np.pi * (1 + 5 ** 0.5) * index
        theta = np.column_stack([np.cos(azimuth) * np.sin(polar),
                                 np.sin(azimuth) * np.sin(polar), np.cos(polar)])
    return float(np.max(np.abs(k(theta))))


def homogeneous_membership(surface: BoundarySurface, K: KernelHandle,
                           k: Callable[[np.ndarray], np.ndarray],
                           sampler: Optional[PairSampler] = None) -> Dict[str, float]:
    """Первая компонента нормы (h, h+1, 1) и max_{|θ|=1}|k(θ)| для сравнения."""
    first = norm_Ks(surface, K, K.exponents[0], sampler)
    return {"first": first, "sphere_max": sphere_maximum(k, surface.n)}


def gradient_kernel(ctx, j: int) -> KernelHandle:
    """∂_jS_a(x−y), класс (n−1, n, 1)."""
    n = ctx.n

    def evaluator(surface, I, J):
        return _at_pairs(ctx, surface, I, J, lambda S, G, H: G[:, j], order=1)

    return KernelHandle(evaluator, (n - 1.0, float(n), 1.0), f"dS/dx{j}")


def hessian_kernel(ctx, h: int, j: int) -> KernelHandle:
    """∂_h∂_jS_a(x−y), класс (n, n+1, 1)."""
    n = ctx.n

    def evaluator(surface, I, J):
        return _at_pairs(ctx, surface, I, J, lambda S, G, H: H[:, h, j], order=2)

    return KernelHandle(evaluator, (float(n), n + 1.0, 1.0), f"d2S/dx{h}dx{j}")


def tangential_gradient_kernel(ctx, j: int, h: int, alpha: float = 1.0) -> KernelHandle:
    """(grad_{∂Ω,x}∂_jS_a(x−y))_h, класс (n, n+α, α)."""
    n = ctx.n

    def evaluator(surface, I, J):
        nu = surface.normals

        def pick(S, G, H):
            off = I != J
            nx = nu[I[off]]
            column = H[:, :, j]
            return column[:, h] - nx[:, h] * np.sum(nx * column, axis=1)

        return _at_pairs(ctx, surface, I, J, pick, order=2)

    return KernelHandle(evaluator, (float(n), n + alpha, alpha), f"gradT dS/dx{j} [{h}]")


def double_layer_kernel(ctx) -> KernelHandle:
    """Ядро двойного слоя −[(a²ν(y))·∇S_a(x−y) + (ν(y)·a¹)S_a(x−y)], класс (n−2, n−1, 1)."""
    n = ctx.n

    def evaluator(surface, I, J):
        off = I != J
        ny = surface.normals[J[off]]

        def pick(S, G, H):
            return -(np.sum(G * (ny @ ctx.a2.T), axis=1) + (ny @ ctx.a1) * S)

        return _at_pairs(ctx, surface, I, J, pick, order=1)

    return KernelHandle(evaluator, (n - 2.0, n - 1.0, 1.0), "double_layer")


def _at_pairs(ctx, surface: BoundarySurface, I, J, pick, order: int) -> np.ndarray:
    """Вычисляет выражение от S, ∇S, гессиана на парах I ≠ J; на диагонали ноль."""
    I = np.asarray(I, dtype=int).ravel()
    J = np.asarray(J, dtype=int).ravel()
    values = np.zeros(I.size, dtype=complex)
    off = I != J
    if np.any(off):
        S, G, H = evaluate(ctx.fs, surface.nodes[I[off]] - surface.nodes[J[off]], order=order)
        values[off] = pick(S, G, H)
    return values
