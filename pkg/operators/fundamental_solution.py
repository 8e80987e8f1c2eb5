"""
Модуль фундаментальных решений.

Предоставляет функции для:
- Классификации семейства оператора (лапласовское, гельмгольцевское, модифицированное)
- Вычисления S_a, ∇S_a и гессиана S_a в замкнутой форме
- Разложения S_a на главную часть и остаток
- Вычисления гладких коэффициентов при ln|T⁻¹x| в двумерном случае

Все вычислители векторизованы: точка x может быть массивом формы (..., n).
В приведённых переменных y = T⁻¹x, ρ = |y| фундаментальное решение равно
    S_a(x) = c·e^{−b·y/2}·F(ρ),  c = 1/√det a²,
где F - радиальное фундаментальное решение Δ + λ.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Tuple

import numpy as np
from scipy import special

from config import LAMBDA_ZERO_TOL, ORIGIN_GUARD
from operators.elliptic_operator import (
    CoefficientVector,
    ReducedOperator,
    apply_operator,
    reduce,
)
from utils.exceptions import EvalAtOrigin, UnsupportedDimension, UnsupportedFamily

logger = logging.getLogger(__name__)

# Площадь единичной сферы s_n
UNIT_SPHERE_AREA = {2: 2.0 * np.pi, 3: 4.0 * np.pi}


class Family(str, Enum):
    """Семейство радиального профиля."""
    LAPLACE = "laplace"
    HELMHOLTZ = "helmholtz"
    MODIFIED = "modified_helmholtz"


@dataclass(frozen=True, eq=False)
class FundamentalSolution:
    """Набор вычислителей для S_a конкретного оператора."""
    coefficients: CoefficientVector
    reduced: ReducedOperator
    family: Family
    n: int
    k: complex
    scale: float

    @property
    def has_drift(self) -> bool:
        return bool(np.any(self.reduced.b))


def make_fundamental_solution(c: CoefficientVector) -> FundamentalSolution:
    """
    Строит фундаментальное решение для оператора с постоянными коэффициентами.

    Args:
        c: Коэффициенты оператора

    Returns:
        FundamentalSolution

    Raises:
        UnsupportedDimension: Если n не 2 и не 3
        UnsupportedFamily: Если n = 2 и λ не вещественно
    """
    if c.n not in (2, 3):
        raise UnsupportedDimension(n=c.n)
    reduced = reduce(c)
    lam = reduced.lam

    if abs(lam) <= LAMBDA_ZERO_TOL:
        family, k = Family.LAPLACE, 0j
    elif c.n == 2:
        if abs(lam.imag) > LAMBDA_ZERO_TOL:
            raise UnsupportedFamily(n=c.n, lam=lam)
        if lam.real > 0:
            family, k = Family.HELMHOLTZ, complex(np.sqrt(lam.real))
        else:
            # для K₀ храним μ = √(−λ) в k
            family, k = Family.MODIFIED, complex(np.sqrt(-lam.real))
    else:
        k = complex(np.sqrt(lam + 0j))
        family = Family.MODIFIED if (lam.imag == 0 and lam.real < 0) else Family.HELMHOLTZ

    fs = FundamentalSolution(
        coefficients=c,
        reduced=reduced,
        family=family,
        n=c.n,
        k=k,
        scale=1.0 / np.sqrt(reduced.det_a2),
    )
    logger.debug(f"Фундаментальное решение: n={c.n}, семейство={family.value}, k={k}")
    return fs


def _radial_profile(fs: FundamentalSolution, rho: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Возвращает F, F′, F″ радиального профиля."""
    k = fs.k
    if fs.n == 2:
        if fs.family is Family.LAPLACE:
            F = np.log(rho) / (2 * np.pi) + 0j
            F1 = 1.0 / (2 * np.pi * rho) + 0j
            F2 = -1.0 / (2 * np.pi * rho ** 2) + 0j
        elif fs.family is Family.HELMHOLTZ:
            kr = k.real
            z = kr * rho
            h0 = special.y0(z) - 1j * special.j0(z)
            h1 = special.y1(z) - 1j * special.j1(z)
            F = h0 / 4.0
            F1 = -kr * h1 / 4.0
            F2 = -(kr ** 2 / 4.0) * (h0 - h1 / z)
        else:
            mu = k.real
            z = mu * rho
            k0, k1 = special.k0(z), special.k1(z)
            F = -k0 / (2 * np.pi) + 0j
            F1 = mu * k1 / (2 * np.pi) + 0j
            F2 = -(mu ** 2 / (2 * np.pi)) * (k0 + k1 / z) + 0j
        return F, F1, F2

    if fs.family is Family.LAPLACE:
        F = -1.0 / (4 * np.pi * rho) + 0j
        F1 = 1.0 / (4 * np.pi * rho ** 2) + 0j
        F2 = -2.0 / (4 * np.pi * rho ** 3) + 0j
        return F, F1, F2
    e = np.exp(1j * k * rho)
    F = -e / (4 * np.pi * rho)
    F1 = e * (1 - 1j * k * rho) / (4 * np.pi * rho ** 2)
    F2 = (e / (4 * np.pi)) * (k ** 2 / rho + 2j * k / rho ** 2 - 2.0 / rho ** 3)
    return F, F1, F2


def _reduced_points(fs: FundamentalSolution, x) -> Tuple[np.ndarray, np.ndarray]:
    """Переводит x в y = T⁻¹x и проверяет, что точка не в начале координат."""
    X = np.asarray(x, dtype=float)
    Y = X @ fs.reduced.T_inv.T
    rho = np.linalg.norm(Y, axis=-1)
    if np.any(rho < ORIGIN_GUARD):
        raise EvalAtOrigin()
    return Y, rho


def evaluate(fs: FundamentalSolution, x, order: int = 2):
    """
    Вычисляет S_a и, при необходимости, градиент и гессиан.

    Args:
        fs: Фундаментальное решение
        x: Точки формы (..., n), отличные от нуля
        order: 0 - только S, 1 - S и ∇S, 2 - S, ∇S и гессиан

    Returns:
        Кортеж (S, G, H) массивов; отсутствующие элементы равны None
    """
    red = fs.reduced
    Y, rho = _reduced_points(fs, x)
    F, F1, F2 = _radial_profile(fs, rho)
    E = np.exp(-(Y @ red.b) / 2.0)
    cE = fs.scale * E
    S = cE * F
    if order == 0:
        return S, None, None

    yhat = Y / rho[..., None]
    b = red.b
    Gy = cE[..., None] * (F1[..., None] * yhat - 0.5 * b * F[..., None])
    G = Gy @ red.T_inv
    if order == 1:
        return S, G, None

    n = fs.n
    outer = yhat[..., :, None] * yhat[..., None, :]
    eye = np.eye(n)
    cross = b[:, None] * yhat[..., None, :] + yhat[..., :, None] * b[None, :]
    Hy = cE[..., None, None] * (
        F2[..., None, None] * outer
        + (F1 / rho)[..., None, None] * (eye - outer)
        - 0.5 * F1[..., None, None] * cross
        + 0.25 * np.outer(b, b) * F[..., None, None]
    )
    H = np.einsum('ki,...kl,lj->...ij', red.T_inv, Hy, red.T_inv)
    H = 0.5 * (H + np.swapaxes(H, -1, -2))
    return S, G, H


def eval_S(fs: FundamentalSolution, x):
    """Значение S_a(x); x ≠ 0."""
    return evaluate(fs, x, order=0)[0]


def eval_gradS(fs: FundamentalSolution, x):
    """Градиент ∇S_a(x); x ≠ 0."""
    return evaluate(fs, x, order=1)[1]


def eval_hessS(fs: FundamentalSolution, x):
    """Гессиан S_a(x), симметричный по построению; x ≠ 0."""
    return evaluate(fs, x, order=2)[2]


def principal_part(fs: FundamentalSolution, x):
    """Главная часть S_n(T⁻¹x)/√det a²."""
    _, rho = _reduced_points(fs, x)
    if fs.n == 2:
        return fs.scale * np.log(rho) / (2 * np.pi) + 0j
    return -fs.scale / (4 * np.pi * rho) + 0j


def remainder(fs: FundamentalSolution, x):
    """Остаток S_a − главная часть; тождественно ноль для чистого лапласиана."""
    if fs.family is Family.LAPLACE and not fs.has_drift:
        _reduced_points(fs, x)
        return np.zeros(np.shape(np.asarray(x))[:-1], dtype=complex)
    return eval_S(fs, x) - principal_part(fs, x)


def principal_gradient(fs: FundamentalSolution, x):
    """Старший член градиента (1/(s_n√det a²))·|T⁻¹x|^{−n}·(a²)⁻¹x."""
    X = np.asarray(x, dtype=float)
    _, rho = _reduced_points(fs, X)
    factor = fs.scale / (UNIT_SPHERE_AREA[fs.n] * rho ** fs.n)
    return factor[..., None] * (X @ fs.reduced.a2_inv.T)


def log_coefficients(fs: FundamentalSolution, x):
    """
    Гладкие коэффициенты при ln|T⁻¹x| у S_a, ∇S_a и гессиана (n = 2).

    Для n = 3 все коэффициенты равны нулю.

    Returns:
        Кортеж (cS, cG, cH) форм (...), (..., 2), (..., 2, 2)
    """
    X = np.asarray(x, dtype=float)
    shape = X.shape[:-1]
    n = fs.n
    if n != 2:
        return (np.zeros(shape, dtype=complex),
                np.zeros(shape + (n,), dtype=complex),
                np.zeros(shape + (n, n), dtype=complex))

    red = fs.reduced
    Y, rho = _reduced_points(fs, X)
    if fs.family is Family.LAPLACE:
        A = np.ones_like(rho)
        A1_over = np.zeros_like(rho)
        A2_minus = np.zeros_like(rho)
    elif fs.family is Family.HELMHOLTZ:
        kr = fs.k.real
        z = kr * rho
        j0, j1 = special.j0(z), special.j1(z)
        A = j0
        A1_over = -kr * j1 / rho
        A2_minus = -kr ** 2 * j0 + 2 * kr * j1 / rho
    else:
        mu = fs.k.real
        z = mu * rho
        i0, i1 = special.i0(z), special.i1(z)
        A = i0
        A1_over = mu * i1 / rho
        A2_minus = mu ** 2 * i0 - 2 * mu * i1 / rho

    b = red.b
    E = np.exp(-(Y @ b) / 2.0) / (2 * np.pi)
    P = E * A
    gradP = E[..., None] * (-0.5 * b * A[..., None] + A1_over[..., None] * Y)

    yhat = Y / rho[..., None]
    by = b[:, None] * Y[..., None, :] + Y[..., :, None] * b[None, :]
    hessP = E[..., None, None] * (
        0.25 * np.outer(b, b) * A[..., None, None]
        - 0.5 * A1_over[..., None, None] * by
        + A1_over[..., None, None] * np.eye(n)
        + A2_minus[..., None, None] * (yhat[..., :, None] * yhat[..., None, :])
    )

    c = fs.scale
    cS = c * P
    cG = c * (gradP @ red.T_inv)
    cH = c * np.einsum('ki,...kl,lj->...ij', red.T_inv, hessP, red.T_inv)
    return cS + 0j, cG + 0j, cH + 0j


def remainder_limit(fs: FundamentalSolution) -> complex:
    """
    Предел остатка S_a − главная часть при x → 0 (n = 2).

    Остаток равен c·[(e^{−b·y/2}A(ρ) − 1)·ln ρ/(2π) + e^{−b·y/2}B(ρ)],
    первое слагаемое стремится к нулю, B(0) берётся из разложений Y₀ и K₀.

    Raises:
        UnsupportedDimension: Для n ≠ 2 (в 3D предел зависит от направления)
    """
    if fs.n != 2:
        raise UnsupportedDimension(n=fs.n)
    if fs.family is Family.LAPLACE:
        return 0j
    shift = np.log(fs.k.real / 2.0) + np.euler_gamma
    if fs.family is Family.HELMHOLTZ:
        return complex(fs.scale * (shift / (2 * np.pi) - 0.25j))
    return complex(fs.scale * shift / (2 * np.pi))


def log_coefficients_at_origin(fs: FundamentalSolution) -> Tuple[complex, np.ndarray]:
    """
    Значения cS и cG из log_coefficients в x = 0 (n = 2).

    Returns:
        Пара (c/(2π), −c·T⁻ᵗb/(4π))
    """
    if fs.n != 2:
        return 0j, np.zeros(fs.n, dtype=complex)
    c = fs.scale
    cG = -c * (fs.reduced.b @ fs.reduced.T_inv) / (4 * np.pi)
    return complex(c / (2 * np.pi)), cG + 0j


def gradient_parity_probe(fs: FundamentalSolution, direction, r: float):
    """
    Направленная часть |x|^{n−2}(∇S_a(x) − старший член) в точках x и −x.

    Args:
        fs: Фундаментальное решение
        direction: Направление (нормируется)
        r: Расстояние до начала координат

    Returns:
        Пара векторов (в x, в −x)
    """
    d = np.asarray(direction, dtype=float)
    x = r * d / np.linalg.norm(d)
    weight = r ** (fs.n - 2)
    plus = weight * (eval_gradS(fs, x) - principal_gradient(fs, x))
    minus = weight * (eval_gradS(fs, -x) - principal_gradient(fs, -x))
    return plus, minus


def pde_residual(fs: FundamentalSolution, x) -> float:
    """
    Относительная невязка P[a,D]S_a(x) по аналитическим производным.

    Нормировка - наибольшая из величин |S|, |x|·|∇S|, |x|²·|гессиан|:
    у S_a есть нули (ln 1 = 0), где деление на |S| теряет смысл.
    """
    S, G, H = evaluate(fs, x, order=2)
    residual = apply_operator(fs.coefficients, complex(S), G, H)
    r = float(np.linalg.norm(x))
    scale = max(abs(S), r * np.linalg.norm(G), r * r * np.linalg.norm(H), np.finfo(float).tiny)
    return abs(residual) / scale
