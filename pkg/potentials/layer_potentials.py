"""
Модуль граничных операторов потенциалов.

Предоставляет функции для:
- Потенциалов простого и двойного слоя V, W и конормально-сопряжённого W_*
- Вспомогательных операторов Q_j, R, T_lj и правой части P_ljr
- Невязок точных тождеств для касательных производных потенциалов
- Супремума усечённых интегралов ядра гауссова типа

На кривых операторы собираются в матрицы Нистрёма с логарифмическим
разложением ядра; на триангуляциях применяются без хранения матрицы
(правило Даффи для собственной грани).
"""

import logging
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from geometry.boundary_geometry import (
    BoundarySurface,
    Density,
    as_density,
    conormal_factor,
    normal_density,
    spectral_derivative,
    tangential_gradient,
    tangential_M,
)
from geometry.quadrature import (
    PointKernel,
    apply_surface_kernel,
    curvature_limit,
    split_from_log_coefficient,
    truncated_sup,
    weakly_singular_matrix,
)
from operators.elliptic_operator import CoefficientVector
from operators.fundamental_solution import (
    FundamentalSolution,
    evaluate,
    log_coefficients,
    log_coefficients_at_origin,
    make_fundamental_solution,
    remainder_limit,
)
from utils.exceptions import ConfigError, NeedsAmbientForm, UnsupportedDimension

logger = logging.getLogger(__name__)


class LayerContext:
    """
    Оператор, его фундаментальное решение и граница с кэшем сеток ядер.

    Для кривых кэшируются S_a, ∇S_a, гессиан и их логарифмические
    коэффициенты на всех парах узлов, а также матрицы V, W, W_*.
    """

    def __init__(self, coefficients: CoefficientVector, surface: BoundarySurface):
        if coefficients.n not in (2, 3):
            raise UnsupportedDimension(n=coefficients.n)
        if coefficients.n != surface.n:
            raise ConfigError(reason=f"размерность оператора {coefficients.n} и границы {surface.n} различны")
        self.coefficients = coefficients
        self.surface = surface
        self.fs: FundamentalSolution = make_fundamental_solution(coefficients)
        self._grids: Dict[str, np.ndarray] = {}
        self._matrices: Dict[str, np.ndarray] = {}
        self._normals = [normal_density(surface, l) for l in range(surface.n)]
        logger.debug(f"Контекст: {surface.shape}, N={surface.N}, семейство={self.fs.family.value}")

    @property
    def n(self) -> int:
        return self.surface.n

    @property
    def a2(self) -> np.ndarray:
        return self.coefficients.a2

    @property
    def a1(self) -> np.ndarray:
        return self.coefficients.a1

    @property
    def a0(self) -> complex:
        return self.coefficients.a0

    def normal(self, l: int) -> Density:
        """ν_l как плотность."""
        return self._normals[l]

    def normal_drift(self) -> Density:
        """Плотность ν·a¹."""
        total = self._normals[0] * complex(self.a1[0])
        for s in range(1, self.n):
            total = total + self._normals[s] * complex(self.a1[s])
        return total

    # -------------------------------------------------------------------------
    # Сетки ядер на кривых
    # -------------------------------------------------------------------------

    def _differences(self) -> np.ndarray:
        """x_i − x_j; на диагонали - единичный вектор-заглушка."""
        if 'Z' not in self._grids:
            nodes = self.surface.nodes
            Z = nodes[:, None, :] - nodes[None, :, :]
            idx = np.arange(self.surface.N)
            Z[idx, idx] = np.eye(self.n)[0]
            self._grids['Z'] = Z
        return self._grids['Z']

    def grid(self, name: str) -> np.ndarray:
        """
        Сетка ядра по всем парам узлов кривой; диагональ обнулена.

        Args:
            name: S, G, H (значение, градиент, гессиан) или cS, cG, cH
                  (коэффициенты при ln|T⁻¹(x−y)|)
        """
        if self.n != 2:
            raise UnsupportedDimension(n=self.n)
        if name not in self._grids:
            Z = self._differences()
            idx = np.arange(self.surface.N)
            if name in ('S', 'G', 'H'):
                S, G, H = evaluate(self.fs, Z, order=2 if name == 'H' else 1)
                parts = {'S': S, 'G': G, 'H': H}
            else:
                cS, cG, cH = log_coefficients(self.fs, Z)
                parts = {'cS': cS, 'cG': cG, 'cH': cH}
            for key, value in parts.items():
                if value is None or key in self._grids:
                    continue
                value = np.array(value)
                value[idx, idx] = 0.0
                self._grids[key] = value
        return self._grids[name]

    def kernel_grid(self, name: str) -> np.ndarray:
        """Ядра V, W, Wstar на парах узлов (диагональ обнулена)."""
        return self._kernel_and_coefficient(name)[0]

    def _kernel_and_coefficient(self, name: str) -> Tuple[np.ndarray, np.ndarray]:
        nu = self.surface.normals
        w, _ = conormal_factor(self.surface, self.a2)
        if name == 'V':
            return self.grid('S'), self.grid('cS')
        if name == 'W':
            drift = nu @ self.a1
            K = -(np.einsum('jk,ijk->ij', w, self.grid('G')) + drift[None, :] * self.grid('S'))
            C = -(np.einsum('jk,ijk->ij', w, self.grid('cG')) + drift[None, :] * self.grid('cS'))
            return K, C
        if name == 'Wstar':
            K = np.einsum('ik,ijk->ij', w, self.grid('G'))
            C = np.einsum('ik,ijk->ij', w, self.grid('cG'))
            return K, C
        raise ConfigError(reason=f"неизвестное ядро '{name}'")

    def diagonal_limits(self, name: str) -> Tuple[np.ndarray, np.ndarray]:
        """
        Пределы L(t,t) и M(t,t) разложения Кресса для V, W или Wstar.

        Ядро равно C·ln|T⁻¹(x−y)| + D, поэтому M(t,t) = (C/2)·ln|T⁻¹x′|² + D(t,t).
        D(t,t) складывается из предела главной части по кривизне и предела
        гладкого остатка β = lim (S_a − главная часть).

        Returns:
            Пара массивов (L на диагонали, M на диагонали)
        """
        surface = self.surface
        red = self.fs.reduced
        quad = np.einsum('ij,jk,ik->i', surface.dx, red.a2_inv, surface.dx)
        beta = remainder_limit(self.fs)
        cS0, cG0 = log_coefficients_at_origin(self.fs)
        if name == 'V':
            log_diagonal = np.full(surface.N, cS0 / 2.0)
            return log_diagonal, log_diagonal * np.log(quad) + beta

        w, _ = conormal_factor(surface, self.a2)
        # ∇e^{−b·T⁻¹x/2} в нуле равен −T⁻ᵗb/2
        drift_gradient = w @ (red.b @ red.T_inv)
        curvature = curvature_limit(surface, self.a2)
        if name == 'W':
            drift = surface.normals @ self.a1
            log_diagonal = -(w @ cG0 + drift * cS0) / 2.0
            smooth = curvature + beta * drift_gradient / 2.0 - drift * beta
        elif name == 'Wstar':
            log_diagonal = (w @ cG0) / 2.0
            smooth = curvature - beta * drift_gradient / 2.0
        else:
            raise ConfigError(reason=f"неизвестное ядро '{name}'")
        return log_diagonal, log_diagonal * np.log(quad) + smooth

    def matrix(self, name: str) -> np.ndarray:
        """Кэшированная матрица Нистрёма оператора V, W или Wstar на кривой."""
        if name not in self._matrices:
            K, C = self._kernel_and_coefficient(name)
            log_diagonal, diagonal = self.diagonal_limits(name)
            split = split_from_log_coefficient(self.surface, K, C, diagonal=diagonal,
                                               log_diagonal=log_diagonal)
            self._matrices[name] = weakly_singular_matrix(self.surface, split)
            logger.debug(f"Собрана матрица {name}: N={self.surface.N}")
        return self._matrices[name]

    # -------------------------------------------------------------------------
    # Ядра на триангуляциях
    # -------------------------------------------------------------------------

    def point_kernel(self, name: str, j: int = 0, g: Optional[Density] = None) -> PointKernel:
        """Ядро V, W, Wstar или Q (с плотностью g и осью j) для правил на поверхности."""
        fs = self.fs
        nodes = self.surface.nodes
        normals = self.surface.normals
        a2, a1 = self.a2, self.a1

        if name == 'V':
            def fn(t, Y, NY):
                return evaluate(fs, nodes[t] - Y, order=0)[0]
        elif name == 'W':
            def fn(t, Y, NY):
                S, G, _ = evaluate(fs, nodes[t] - Y, order=1)
                return -(np.sum(G * (NY @ a2.T), axis=-1) + (NY @ a1) * S)
        elif name == 'Wstar':
            def fn(t, Y, NY):
                G = evaluate(fs, nodes[t] - Y, order=1)[1]
                return np.sum(G * (normals[t] @ a2.T), axis=-1)
        elif name == 'Q':
            if g is None or not g.has_ambient:
                raise NeedsAmbientForm(operation="Q_op на поверхности")

            def fn(t, Y, NY):
                G = evaluate(fs, nodes[t] - Y, order=1)[1]
                return (g.values[t] - g.at(Y)) * G[..., j]
        else:
            raise ConfigError(reason=f"неизвестное ядро '{name}'")
        return PointKernel(fn=fn, singularity='1/r', label=name)

    def apply(self, name: str, mu) -> Density:
        """Применяет V, W или Wstar к плотности."""
        mu = as_density(self.surface, mu)
        if self.n == 2:
            values = self.matrix(name) @ mu.values
        else:
            values = apply_surface_kernel(self.surface, self.point_kernel(name), mu)
        return Density(values, label=f"{name}[{mu.label}]")


# =============================================================================
# ОСНОВНЫЕ ОПЕРАТОРЫ
# =============================================================================

def single_layer_V(ctx: LayerContext, mu) -> Density:
    """V[μ](x) = ∫ S_a(x−y) μ(y) dσ_y в узлах."""
    return ctx.apply('V', mu)


def double_layer_W(ctx: LayerContext, mu) -> Density:
    """W[μ](x) = −∫ μ(y)[(a²ν(y))·∇S_a(x−y) + (ν(y)·a¹) S_a(x−y)] dσ_y."""
    return ctx.apply('W', mu)


def conormal_adjoint_Wstar(ctx: LayerContext, mu) -> Density:
    """W_*[μ](x) = ∫ μ(y) ∇S_a(x−y)·a²ν(x) dσ_y."""
    return ctx.apply('Wstar', mu)


def _param_derivative(surface: BoundarySurface, f: Density) -> np.ndarray:
    """df/dt в узлах кривой: по объемлющей форме, известной производной или спектрально."""
    if f.has_ambient:
        return np.sum(f.grad_at(surface.nodes) * surface.dx, axis=1)
    if f.param_derivative is not None:
        return np.asarray(f.param_derivative)
    return spectral_derivative(surface, f.values)


def _q_diagonal(ctx: LayerContext, j: int, g: Density) -> np.ndarray:
    """Предел (g(x)−g(y))∂_jS_a(x−y) при y → x вдоль кривой: ġ·((a²)⁻¹x′)_j/(2π√det a²·x′ᵗ(a²)⁻¹x′)."""
    surface = ctx.surface
    inverse = ctx.fs.reduced.a2_inv
    g_dot = _param_derivative(surface, g)
    direction = surface.dx @ inverse.T
    quad = np.sum(surface.dx * direction, axis=1)
    return g_dot * direction[:, j] / (2 * np.pi * np.sqrt(ctx.fs.reduced.det_a2) * quad)


def _gradq_diagonal(ctx: LayerContext, g: Density, mu: Density, j: int, h: int) -> np.ndarray:
    """
    Предел (g(x)−g(y))(μ(y)−μ(x))(grad_{∂Ω,x}∂_jS_a)_h при y → x вдоль кривой.

    Множитель ведёт себя как −(t−τ)²ġμ̇, поэтому выживает только старший
    однородный член гессиана c/(2π)·[(a²)⁻¹/q − 2vvᵗ/q²], v = (a²)⁻¹x′.
    """
    surface = ctx.surface
    inverse = ctx.fs.reduced.a2_inv
    v = surface.dx @ inverse.T
    quad = np.sum(surface.dx * v, axis=1)
    column = (inverse[None, :, j] / quad[:, None]
              - 2.0 * v * v[:, j:j + 1] / quad[:, None] ** 2) * ctx.fs.scale / (2 * np.pi)
    nu = surface.normals
    tangential = column - nu * np.sum(nu * column, axis=1)[:, None]
    return -_param_derivative(surface, g) * _param_derivative(surface, mu) * tangential[:, h]


def Q_op(ctx: LayerContext, j: int, g, mu) -> Density:
    """
    Q_j[g,μ](x) = ∫ (g(x)−g(y)) ∂_jS_a(x−y) μ(y) dσ_y.

    На кривой диагональ ядра - аналитический предел, производная g по
    параметру берётся из объемлющей формы или спектрально.
    """
    surface = ctx.surface
    g = as_density(surface, g)
    mu = as_density(surface, mu)
    if ctx.n == 3:
        values = apply_surface_kernel(surface, ctx.point_kernel('Q', j, g), mu)
        return Density(values, label=f"Q{j}[{g.label},{mu.label}]")

    dg = g.values[:, None] - g.values[None, :]
    K = dg * ctx.grid('G')[:, :, j]
    C = dg * ctx.grid('cG')[:, :, j]
    diagonal = _q_diagonal(ctx, j, g)
    split = split_from_log_coefficient(surface, K, C, diagonal=diagonal, log_diagonal=0.0)
    values = weakly_singular_matrix(surface, split) @ mu.values
    return Density(values, label=f"Q{j}[{g.label},{mu.label}]")


def R_op(ctx: LayerContext, g, h, mu) -> Density:
    """
    R[g,h,μ] = Σ_r a_r{Q_r[gh,μ] − g Q_r[h,μ] − Q_r[h,gμ]} + a{g V[hμ] − h V[gμ]}.

    Слагаемые с нулевыми коэффициентами пропускаются, поэтому для главной
    части R ≡ 0 точно.
    """
    surface = ctx.surface
    g, h, mu = (as_density(surface, v) for v in (g, h, mu))
    total = np.zeros(surface.N, dtype=complex)
    for r in range(ctx.n):
        a_r = complex(ctx.a1[r])
        if a_r == 0:
            continue
        brace = Q_op(ctx, r, g * h, mu).values - g.values * Q_op(ctx, r, h, mu).values \
            - Q_op(ctx, r, h, g * mu).values
        total += a_r * brace
    if ctx.a0 != 0:
        brace = g.values * single_layer_V(ctx, h * mu).values - h.values * single_layer_V(ctx, g * mu).values
        total += ctx.a0 * brace
    return Density(total, label=f"R[{g.label},{h.label},{mu.label}]")


def T_op(ctx: LayerContext, l: int, j: int, mu) -> Density:
    """
    Правая часть формулы для M_lj[W[μ]]:

    W[M_lj μ] + Σ_{b,r} a_br{Q_b[ν_l, M_jr μ] − Q_b[ν_j, M_lr μ]}
    + ν_l Q_j[ν·a¹, μ] − ν_j Q_l[ν·a¹, μ] + (ν·a¹){Q_l[ν_j,μ] − Q_j[ν_l,μ]}
    − (ν·a¹)V[M_lj μ] + V[(ν·a¹)M_lj μ] + R[ν_l, ν_j, μ].

    Raises:
        NeedsAmbientForm: В 3D, если у μ нет объемлющей формы
    """
    surface = ctx.surface
    mu = as_density(surface, mu)
    if ctx.n == 3 and not mu.has_ambient:
        raise NeedsAmbientForm(operation="T_op")
    nu_l, nu_j = ctx.normal(l), ctx.normal(j)
    M_lj = tangential_M(surface, l, j, mu)

    total = double_layer_W(ctx, M_lj).values
    for b in range(ctx.n):
        for r in range(ctx.n):
            a_br = ctx.a2[b, r]
            if a_br == 0:
                continue
            total = total + a_br * (Q_op(ctx, b, nu_l, tangential_M(surface, j, r, mu)).values
                                    - Q_op(ctx, b, nu_j, tangential_M(surface, l, r, mu)).values)

    if np.any(ctx.a1):
        drift = ctx.normal_drift()
        total = total + nu_l.values * Q_op(ctx, j, drift, mu).values \
            - nu_j.values * Q_op(ctx, l, drift, mu).values
        total = total + drift.values * (Q_op(ctx, l, nu_j, mu).values - Q_op(ctx, j, nu_l, mu).values)
        total = total - drift.values * single_layer_V(ctx, M_lj).values \
            + single_layer_V(ctx, drift * M_lj).values
    if np.any(ctx.a1) or ctx.a0 != 0:
        total = total + R_op(ctx, nu_l, nu_j, mu).values
    return Density(total, label=f"T{l}{j}[{mu.label}]")


def P_op(ctx: LayerContext, g, mu, l: int, j: int, r: int) -> Density:
    """
    Правая часть формулы для M_lj[Q_r[g,μ]].

    Обозначения: N = νᵗa²ν, w = a²ν, G - касательный градиент g.
    Последнее слагаемое с конормалью обращается в ноль, если a²ν ∥ ν.
    """
    surface = ctx.surface
    g = as_density(surface, g)
    mu = as_density(surface, mu)
    if ctx.n == 3:
        raise NeedsAmbientForm(operation="P_op на поверхности")
    n = ctx.n
    nu = [ctx.normal(s) for s in range(n)]
    w_vec, N_ = conormal_factor(surface, ctx.a2)
    G = tangential_gradient(surface, g)
    scaled = Density(mu.values / N_, label=f"{mu.label}/N")

    def nodal(values, label=''):
        return Density(np.asarray(values, dtype=complex), label=label)

    def Q(axis, first, second):
        return Q_op(ctx, axis, first, second).values

    def M_sum(axis):
        # Σ_s M_s,axis[w_s μ/N]
        total = np.zeros(surface.N, dtype=complex)
        for s in range(n):
            total += tangential_M(surface, s, axis, nodal(w_vec[:, s] * scaled.values)).values
        return nodal(total)

    nl, nj = nu[l].values, nu[j].values
    total = nl * Q(r, nodal(G[:, j]), mu) - nj * Q(r, nodal(G[:, l]), mu)
    total = total + nl * Q(r, g, M_sum(j)) - nj * Q(r, g, M_sum(l))

    for s in range(n):
        for h in range(n):
            a_sh = ctx.a2[s, h]
            if a_sh == 0:
                continue
            M_hr_g = tangential_M(surface, h, r, g).values
            first = nodal(M_hr_g * scaled.values)
            total = total + a_sh * nl * (Q(s, nu[j], first)
                                         + Q(s, g, tangential_M(surface, h, r, nu[j] * scaled)))
            total = total - a_sh * nj * (Q(s, nu[l], first)
                                         + Q(s, g, tangential_M(surface, h, r, nu[l] * scaled)))

    for s in range(n):
        a_s = complex(ctx.a1[s])
        if a_s == 0:
            continue
        total = total - a_s * (nl * Q(s, g, nu[j] * nu[r] * scaled) - nj * Q(s, g, nu[l] * nu[r] * scaled))

    if ctx.a0 != 0:
        jr = nu[j] * nu[r] * scaled
        lr = nu[l] * nu[r] * scaled
        V = lambda density: single_layer_V(ctx, density).values
        brace = g.values * (nl * V(jr) - nj * V(lr)) - (nl * V(g * jr) - nj * V(g * lr))
        total = total - ctx.a0 * brace

    conormal_g = nodal(np.sum(w_vec * G, axis=1) * scaled.values)
    if np.any(np.abs(conormal_g.values) > 0):
        total = total - (nl * Q(r, nu[j], conormal_g) - nj * Q(r, nu[l], conormal_g))
    return Density(total, label=f"P{l}{j}{r}[{g.label},{mu.label}]")


def tangential_kernel_gradient(ctx: LayerContext, j: int, log_part: bool = False) -> np.ndarray:
    """
    (grad_{∂Ω,x} ∂_jS_a(x−y))_h = ∂_h∂_jS_a − ν_h(x)Σ_l ν_l(x)∂_l∂_jS_a на парах узлов.

    Returns:
        Массив (N, N, n); при log_part - его коэффициент при ln|T⁻¹(x−y)|
    """
    H = ctx.grid('cH' if log_part else 'H')[:, :, :, j]
    nu = ctx.surface.normals
    normal_part = np.einsum('il,ijl->ij', nu, H)
    return H - nu[:, None, :] * normal_part[:, :, None]


def gradQ_rhs(ctx: LayerContext, g, mu, j: int, h: int) -> Tuple[Density, Dict[str, np.ndarray]]:
    """
    Правая часть формулы для (grad_∂Ω Q_j[g,μ])_h и её три слагаемых:
    −(grad_∂Ω g)_h·Q_j[μ,1], ∫(g(x)−g(y))(grad_{∂Ω,x}∂_jS)_h(μ(y)−μ(x))dσ_y
    и μ·(grad_∂Ω Q_j[g,1])_h.
    """
    surface = ctx.surface
    if ctx.n == 3:
        raise NeedsAmbientForm(operation="gradQ на поверхности")
    g = as_density(surface, g)
    mu = as_density(surface, mu)
    one = as_density(surface, 1.0)

    G = tangential_gradient(surface, g)
    first = -G[:, h] * Q_op(ctx, j, mu, one).values

    dg = g.values[:, None] - g.values[None, :]
    dmu = mu.values[None, :] - mu.values[:, None]
    K = dg * dmu * tangential_kernel_gradient(ctx, j)[:, :, h]
    C = dg * dmu * tangential_kernel_gradient(ctx, j, log_part=True)[:, :, h]
    split = split_from_log_coefficient(surface, K, C, diagonal=_gradq_diagonal(ctx, g, mu, j, h),
                                       log_diagonal=0.0)
    second = weakly_singular_matrix(surface, split) @ np.ones(surface.N)

    q_one = Q_op(ctx, j, g, one)
    third = mu.values * tangential_gradient(surface, q_one)[:, h]

    parts = {"gradient_term": first, "kernel_term": second, "product_term": third}
    return Density(first + second + third, label=f"gradQ{j}{h}"), parts


# =============================================================================
# НЕВЯЗКИ ТОЖДЕСТВ
# =============================================================================

def _sup(values: np.ndarray) -> float:
    return float(np.max(np.abs(values))) if values.size else 0.0


def residual_slay2(ctx: LayerContext, mu, j: int, l: int) -> float:
    """‖M_jl[V[μ]] − (Q_l[ν_j,μ] − Q_j[ν_l,μ] + V[M_jl μ])‖_∞."""
    surface = ctx.surface
    mu = as_density(surface, mu)
    left = tangential_M(surface, j, l, single_layer_V(ctx, mu)).values
    right = Q_op(ctx, l, ctx.normal(j), mu).values - Q_op(ctx, j, ctx.normal(l), mu).values \
        + single_layer_V(ctx, tangential_M(surface, j, l, mu)).values
    return _sup(left - right)


def residual_wregn(ctx: LayerContext, mu, l: int, j: int) -> float:
    """‖M_lj[W[μ]] − T_lj[μ]‖_∞."""
    surface = ctx.surface
    left = tangential_M(surface, l, j, double_layer_W(ctx, mu)).values
    return _sup(left - T_op(ctx, l, j, mu).values)


def residual_wstar(ctx: LayerContext, mu) -> float:
    """‖W_*[μ] − (Σ_{b,r} a_br Q_b[ν_r,μ] − W[μ] − V[(a¹·ν)μ])‖_∞."""
    surface = ctx.surface
    mu = as_density(surface, mu)
    right = -double_layer_W(ctx, mu).values
    for b in range(ctx.n):
        for r in range(ctx.n):
            if ctx.a2[b, r] != 0:
                right = right + ctx.a2[b, r] * Q_op(ctx, b, ctx.normal(r), mu).values
    if np.any(ctx.a1):
        right = right - single_layer_V(ctx, ctx.normal_drift() * mu).values
    return _sup(conormal_adjoint_Wstar(ctx, mu).values - right)


def residual_gradQ(ctx: LayerContext, g, mu, j: int, h: int) -> float:
    """‖(grad_∂Ω Q_j[g,μ])_h − правая часть‖_∞ (только на кривых)."""
    surface = ctx.surface
    if ctx.n == 3:
        raise NeedsAmbientForm(operation="residual_gradQ на поверхности")
    left = tangential_gradient(surface, Q_op(ctx, j, g, mu))[:, h]
    right, _ = gradQ_rhs(ctx, g, mu, j, h)
    return _sup(left - right.values)


def residual_pljr(ctx: LayerContext, g, mu, l: int, j: int, r: int) -> float:
    """‖M_lj[Q_r[g,μ]] − P_ljr[g,μ]‖_∞ (только на кривых)."""
    surface = ctx.surface
    if ctx.n == 3:
        raise NeedsAmbientForm(operation="residual_pljr на поверхности")
    left = tangential_M(surface, l, j, Q_op(ctx, r, g, mu)).values
    return _sup(left - P_op(ctx, g, mu, l, j, r).values)


def gauss_kernel(ctx: LayerContext, z: int, h: int, j: int):
    """Ядро (x_z − y_z)·∂_h∂_jS_a(x−y) в виде kernel(surface, I, J)."""
    fs = ctx.fs

    def kernel(surface: BoundarySurface, I: np.ndarray, J: np.ndarray) -> np.ndarray:
        diff = surface.nodes[I] - surface.nodes[J]
        values = np.zeros(len(I), dtype=complex)
        off = I != J
        if np.any(off):
            H = evaluate(fs, diff[off], order=2)[2]
            values[off] = diff[off, z] * H[:, h, j]
        return values

    return kernel


def gauss_truncated_sup(ctx: LayerContext, z: int, h: int, j: int,
                        radii: Optional[Sequence[float]] = None) -> float:
    """sup по узлам и радиусам |∫_{∂Ω∖B(x,r)} (x_z−y_z)∂_h∂_jS_a(x−y) dσ_y|."""
    value, x, r = truncated_sup(ctx.surface, gauss_kernel(ctx, z, h, j), radii)
    logger.debug(f"Гауссово ядро ({z},{h},{j}): sup={value:.6e} в узле {x}, r={r:.3e}")
    return value
