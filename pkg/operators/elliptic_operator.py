"""
Модуль эллиптического оператора с постоянными коэффициентами.

Предоставляет функции для:
- Построения вектора коэффициентов из мультииндексной формы и из блоков
- Проверки эллиптичности старшей части
- Приведения оператора к каноническому виду (фактор T, снос b, λ)
- Чтения и записи коэффициентов в JSON и именованных пресетов

Оператор записывается как
    P[a,D]u = Σ_{l,j} a_lj ∂_l∂_j u + Σ_l a_l ∂_l u + a u,
где a_lj = a_{e_l+e_j}/2 при l ≠ j.
"""

import json
import logging
from dataclasses import dataclass
from itertools import combinations_with_replacement
from typing import Any, Dict, Mapping, Sequence, Tuple

import numpy as np
from scipy import linalg

from config import (
    CHOLESKY_RESIDUAL_TOL,
    ELLIPTICITY_TOL,
    OPERATOR_PRESETS,
)
from utils.exceptions import (
    BadMultiIndex,
    ConfigError,
    NonRealPrincipalPart,
    NotElliptic,
    UnsupportedDimension,
)

logger = logging.getLogger(__name__)

MultiIndex = Tuple[int, ...]


@dataclass(frozen=True, eq=False)
class CoefficientVector:
    """Коэффициенты оператора: блоки a², a¹ и a."""
    n: int
    a2: np.ndarray
    a1: np.ndarray
    a0: complex

    @property
    def is_principal_only(self) -> bool:
        """Истина, если младшие коэффициенты равны нулю."""
        return not np.any(self.a1) and self.a0 == 0


@dataclass(frozen=True, eq=False)
class ReducedOperator:
    """Канонический вид оператора после замены y = T⁻¹x."""
    T: np.ndarray
    T_inv: np.ndarray
    a2_inv: np.ndarray
    b: np.ndarray
    lam: complex
    det_a2: float
    ellipticity: float


def build_coefficients(n: int, gamma_map: Mapping[Sequence[int], complex]) -> CoefficientVector:
    """
    Строит вектор коэффициентов из отображения мультииндекс → коэффициент.

    Args:
        n: Размерность пространства
        gamma_map: Словарь {γ: a_γ}, γ - кортеж длины n с |γ| ≤ 2

    Returns:
        CoefficientVector с блоками a², a¹, a

    Raises:
        BadMultiIndex: Если |γ| > 2, длина не равна n или есть отрицательные элементы
        NonRealPrincipalPart: Если коэффициент с |γ| = 2 не вещественный
    """
    if n < 1:
        raise UnsupportedDimension(n=n)

    a2 = np.zeros((n, n), dtype=float)
    a1 = np.zeros(n, dtype=complex)
    a0 = 0j

    for raw_gamma, raw_value in gamma_map.items():
        gamma = tuple(int(g) for g in raw_gamma)
        if len(gamma) != n or any(g < 0 for g in gamma) or sum(gamma) > 2:
            raise BadMultiIndex(gamma=gamma, n=n)
        value = complex(raw_value)
        order = sum(gamma)

        if order == 2:
            if value.imag != 0.0:
                raise NonRealPrincipalPart(gamma=gamma, imag=value.imag)
            axes = [axis for axis, g in enumerate(gamma) for _ in range(g)]
            l, j = axes
            if l == j:
                a2[l, l] = value.real
            else:
                # a_lj = a_{e_l+e_j}/2, деление ровно один раз
                a2[l, j] = a2[j, l] = value.real / 2.0
        elif order == 1:
            a1[gamma.index(1)] = value
        else:
            a0 = value

    logger.debug(f"Построены коэффициенты: n={n}, a²={a2.tolist()}, a¹={a1.tolist()}, a={a0}")
    return CoefficientVector(n=n, a2=a2, a1=a1, a0=a0)


def coefficients_from_blocks(a2: Any, a1: Any = None, a0: complex = 0.0) -> CoefficientVector:
    """
    Строит вектор коэффициентов из готовых блоков через мультииндексную форму.

    Args:
        a2: Симметричная вещественная матрица n×n
        a1: Вектор коэффициентов первого порядка (по умолчанию 0)
        a0: Свободный коэффициент

    Returns:
        CoefficientVector
    """
    a2 = np.asarray(a2, dtype=complex)
    n = a2.shape[0]
    if a2.shape != (n, n):
        raise BadMultiIndex(gamma=a2.shape, n=n)
    a1 = np.zeros(n, dtype=complex) if a1 is None else np.asarray(a1, dtype=complex)
    gamma_map: Dict[MultiIndex, complex] = {}
    for l, j in combinations_with_replacement(range(n), 2):
        gamma = [0] * n
        gamma[l] += 1
        gamma[j] += 1
        if l == j:
            gamma_map[tuple(gamma)] = a2[l, l]
        else:
            if a2[l, j] != a2[j, l]:
                raise BadMultiIndex(gamma=(l, j), n=n)
            gamma_map[tuple(gamma)] = 2.0 * a2[l, j]
    for l in range(n):
        gamma = [0] * n
        gamma[l] = 1
        gamma_map[tuple(gamma)] = a1[l]
    gamma_map[tuple([0] * n)] = a0
    return build_coefficients(n, gamma_map)


def to_gamma_map(c: CoefficientVector) -> Dict[MultiIndex, complex]:
    """Восстанавливает мультииндексную форму (ненулевые коэффициенты)."""
    gamma_map: Dict[MultiIndex, complex] = {}
    for l, j in combinations_with_replacement(range(c.n), 2):
        gamma = [0] * c.n
        gamma[l] += 1
        gamma[j] += 1
        value = c.a2[l, l] if l == j else 2.0 * c.a2[l, j]
        if value != 0:
            gamma_map[tuple(gamma)] = complex(value)
    for l in range(c.n):
        if c.a1[l] != 0:
            gamma = [0] * c.n
            gamma[l] = 1
            gamma_map[tuple(gamma)] = complex(c.a1[l])
    if c.a0 != 0:
        gamma_map[tuple([0] * c.n)] = complex(c.a0)
    return gamma_map


def coefficients_to_json(c: CoefficientVector) -> str:
    """Сериализует коэффициенты в формат {"n":..,"coeffs":[{"gamma":..,"re":..,"im":..}]}."""
    coeffs = [
        {"gamma": list(gamma), "re": value.real, "im": value.imag}
        for gamma, value in sorted(to_gamma_map(c).items(), reverse=True)
    ]
    return json.dumps({"n": c.n, "coeffs": coeffs})


def load_coefficients(payload: Any) -> CoefficientVector:
    """
    Читает коэффициенты из JSON-строки или уже разобранного словаря.

    Raises:
        ConfigError: Если структура не соответствует формату
    """
    data = json.loads(payload) if isinstance(payload, str) else payload
    try:
        n = int(data["n"])
        gamma_map = {
            tuple(item["gamma"]): complex(item.get("re", 0.0), item.get("im", 0.0))
            for item in data["coeffs"]
        }
    except (KeyError, TypeError, ValueError) as e:
        raise ConfigError(reason=f"коэффициенты оператора: {e}")
    return build_coefficients(n, gamma_map)


def operator_from_preset(name: str, n: int, **params) -> CoefficientVector:
    """
    Строит оператор по имени пресета.

    Args:
        name: laplace | helmholtz | modified_helmholtz | drift | anisotropic
        n: Размерность
        **params: kappa, mu, b или a2 (иначе берутся из OPERATOR_PRESETS)

    Returns:
        CoefficientVector
    """
    if name not in OPERATOR_PRESETS:
        raise ConfigError(reason=f"неизвестный оператор '{name}'")
    settings = {**OPERATOR_PRESETS[name], **params}
    identity = np.eye(n)

    if name == "laplace":
        return coefficients_from_blocks(identity)
    if name == "helmholtz":
        kappa = complex(settings["kappa"])
        return coefficients_from_blocks(identity, a0=kappa * kappa)
    if name == "modified_helmholtz":
        mu = float(settings["mu"])
        return coefficients_from_blocks(identity, a0=-mu * mu)
    if name == "drift":
        b = np.zeros(n, dtype=complex)
        given = np.asarray(settings["b"], dtype=complex)
        b[:min(n, given.size)] = given[:n]
        # a = b·b/4 сохраняет λ = 0
        return coefficients_from_blocks(identity, a1=b, a0=np.dot(b, b) / 4.0)
    a2 = np.asarray(settings["a2"], dtype=float)
    if a2.shape != (n, n):
        raise ConfigError(reason=f"матрица a2 размера {a2.shape} для n={n}")
    return coefficients_from_blocks(a2)


def check_ellipticity(c: CoefficientVector) -> float:
    """
    Возвращает константу эллиптичности - минимальное собственное значение a².

    Raises:
        NotElliptic: Если минимум не превосходит ELLIPTICITY_TOL
    """
    smallest = float(linalg.eigvalsh(c.a2)[0])
    if smallest <= ELLIPTICITY_TOL:
        raise NotElliptic(value=smallest)
    return smallest


def reduce(c: CoefficientVector) -> ReducedOperator:
    """
    Приводит оператор к виду Δ_y + b·∇_y + a заменой x = Ty.

    После подстановки u = e^{−b·y/2}v остаётся Δv + λv с λ = a − b·b/4
    (билинейный квадрат без сопряжения).

    Returns:
        ReducedOperator с нижнетреугольным фактором Холецкого T

    Raises:
        NotElliptic: Если a² не положительно определена
    """
    ellipticity = check_ellipticity(c)
    T = linalg.cholesky(c.a2, lower=True)
    residual = np.linalg.norm(T @ T.T - c.a2) / np.linalg.norm(c.a2)
    if residual > CHOLESKY_RESIDUAL_TOL:
        logger.warning(f"Невязка разложения Холецкого {residual:.2e} превышает допуск")

    T_inv = linalg.solve_triangular(T, np.eye(c.n), lower=True)
    b = T_inv @ c.a1
    lam = complex(c.a0 - np.dot(b, b) / 4.0)
    det_a2 = float(np.prod(np.diag(T))) ** 2

    logger.debug(f"Приведение: b={b.tolist()}, λ={lam}, det a²={det_a2}")
    return ReducedOperator(
        T=T,
        T_inv=T_inv,
        a2_inv=T_inv.T @ T_inv,
        b=b,
        lam=lam,
        det_a2=det_a2,
        ellipticity=ellipticity,
    )


def apply_operator(c: CoefficientVector, value: complex, gradient: np.ndarray, hessian: np.ndarray) -> complex:
    """Применяет P[a,D] к функции, заданной значением, градиентом и гессианом в точке."""
    return complex(np.sum(c.a2 * hessian) + np.dot(c.a1, gradient) + c.a0 * value)
