import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from operators.elliptic_operator import build_coefficients, coefficients_from_blocks, operator_from_preset
from operators.fundamental_solution import (
    Family,
    eval_gradS,
    eval_hessS,
    eval_S,
    gradient_parity_probe,
    log_coefficients,
    log_coefficients_at_origin,
    make_fundamental_solution,
    pde_residual,
    principal_gradient,
    principal_part,
    remainder,
    remainder_limit,
)
from utils.exceptions import EvalAtOrigin, UnsupportedDimension, UnsupportedFamily

OPERATORS = [
    ("laplace", 2, {}),
    ("helmholtz", 2, {"kappa": 1.0}),
    ("modified_helmholtz", 2, {"mu": 1.0}),
    ("drift", 2, {"b": [1.0, 0.0]}),
    ("anisotropic", 2, {"a2": [[4.0, 0.0], [0.0, 1.0]]}),
    ("laplace", 3, {}),
    ("helmholtz", 3, {"kappa": 1.0}),
    ("modified_helmholtz", 3, {"mu": 1.0}),
    ("drift", 3, {"b": [1.0, 0.0, 0.5]}),
]


def fs_of(name, n, params):
    return make_fundamental_solution(operator_from_preset(name, n, **params))


def test_laplace_values():
    assert eval_S(fs_of("laplace", 3, {}), [1.0, 0.0, 0.0]) == pytest.approx(-1 / (4 * np.pi))
    assert eval_S(fs_of("laplace", 2, {}), [0.6, 0.8]) == pytest.approx(0.0, abs=1e-16)


def test_modified_helmholtz_3d_value():
    fs = fs_of("modified_helmholtz", 3, {"mu": 1.0})
    assert fs.family is Family.MODIFIED
    assert eval_S(fs, [0.0, 1.0, 0.0]) == pytest.approx(-np.exp(-1) / (4 * np.pi))


def test_helmholtz_2d_is_hankel_combination():
    fs = fs_of("helmholtz", 2, {"kappa": 2.0})
    from scipy import special
    x = np.array([0.3, 0.4])
    assert eval_S(fs, x) == pytest.approx(-0.25j * special.hankel1(0, 1.0))


def test_laplace_3d_gradient():
    grad = eval_gradS(fs_of("laplace", 3, {}), [1.0, 0.0, 0.0])
    assert np.allclose(grad, [1 / (4 * np.pi), 0, 0])


def test_laplace_3d_hessian_entry():
    H = eval_hessS(fs_of("laplace", 3, {}), [1.0, 0.0, 0.0])
    assert H[0, 0] == pytest.approx(-1 / (2 * np.pi))


def test_errors():
    with pytest.raises(EvalAtOrigin):
        eval_S(fs_of("laplace", 2, {}), [0.0, 0.0])
    with pytest.raises(UnsupportedDimension):
        make_fundamental_solution(operator_from_preset("laplace", 4))
    with pytest.raises(UnsupportedFamily):
        make_fundamental_solution(coefficients_from_blocks(np.eye(2), a0=1j))


def test_complex_lambda_allowed_in_3d():
    fs = make_fundamental_solution(coefficients_from_blocks(np.eye(3), a0=1 + 1j))
    assert pde_residual(fs, np.array([0.3, -0.2, 0.5])) <= 1e-8


@pytest.mark.parametrize("name, n, params", OPERATORS)
def test_pde_annihilation(name, n, params):
    fs = fs_of(name, n, params)
    rng = np.random.default_rng(7)
    directions = rng.normal(size=(100, n))
    directions /= np.linalg.norm(directions, axis=1)[:, None]
    radii = np.logspace(-3, 1, 100)
    for x in radii[:, None] * directions:
        assert pde_residual(fs, x) <= 1e-8


@pytest.mark.parametrize("name, n, params", OPERATORS)
def test_finite_difference_consistency(name, n, params):
    fs = fs_of(name, n, params)
    rng = np.random.default_rng(3)
    h = 1e-5
    for _ in range(20):
        x = rng.normal(size=n)
        x *= rng.uniform(0.3, 2.0) / np.linalg.norm(x)
        grad = eval_gradS(fs, x)
        hess = eval_hessS(fs, x)
        for k in range(n):
            e = np.zeros(n)
            e[k] = h
            # Ричардсон по двум шагам
            d1 = (eval_S(fs, x + e) - eval_S(fs, x - e)) / (2 * h)
            d2 = (eval_S(fs, x + 2 * e) - eval_S(fs, x - 2 * e)) / (4 * h)
            fd = (4 * d1 - d2) / 3
            assert abs(fd - grad[k]) <= 1e-7 * max(1.0, np.linalg.norm(grad))
            fd_h = (eval_gradS(fs, x + e) - eval_gradS(fs, x - e)) / (2 * h)
            assert np.allclose(fd_h, hess[:, k], rtol=1e-6, atol=1e-6 * np.abs(hess).max())


@pytest.mark.parametrize("name, n, params", OPERATORS)
def test_hessian_symmetric(name, n, params):
    H = eval_hessS(fs_of(name, n, params), np.linspace(0.2, 0.7, n))
    assert np.array_equal(H, H.T)


def test_anisotropic_leading_gradient():
    fs = fs_of("anisotropic", 2, {"a2": [[4.0, 0.0], [0.0, 1.0]]})
    lead = principal_gradient(fs, np.array([1.0, 0.0]))
    assert np.allclose(lead, [1 / (4 * np.pi), 0.0])
    assert np.allclose(eval_gradS(fs, [1.0, 0.0]), lead)


def test_principal_gradient_homogeneity():
    for n in (2, 3):
        fs = fs_of("laplace", n, {})
        x = np.linspace(0.3, 0.9, n)
        assert np.allclose(principal_gradient(fs, 2 * x), 2.0 ** (1 - n) * principal_gradient(fs, x))


def test_laplace_remainder_is_zero():
    for n in (2, 3):
        fs = fs_of("laplace", n, {})
        points = np.logspace(-8, 0, 9)[:, None] * np.eye(n)[0]
        assert np.all(remainder(fs, points) == 0)


def test_helmholtz_2d_remainder_limit():
    fs = fs_of("helmholtz", 2, {"kappa": 1.0})
    values = remainder(fs, np.array([[1e-4, 0.0], [1e-6, 0.0]]))
    assert abs(values[0] - values[1]) < 1e-3


def test_modified_3d_remainder_bound():
    fs = fs_of("modified_helmholtz", 3, {"mu": 1.0})
    r = np.logspace(-8, -1, 30)
    values = np.abs(remainder(fs, r[:, None] * np.array([0.0, 0.0, 1.0])))
    assert np.all(values <= (1 + r) / (4 * np.pi))


def test_principal_part_plus_remainder():
    fs = fs_of("helmholtz", 3, {"kappa": 2.0})
    x = np.array([0.1, 0.2, -0.3])
    assert principal_part(fs, x) + remainder(fs, x) == pytest.approx(eval_S(fs, x))


def test_gradient_parity_3d_modified():
    fs = fs_of("modified_helmholtz", 3, {"mu": 1.0})
    plus, minus = gradient_parity_probe(fs, [1.0, 1.0, 0.0], 1e-3)
    assert np.linalg.norm(plus - minus) <= 1e-4


@pytest.mark.parametrize("name,n,params", OPERATORS[:5], ids=[op[0] for op in OPERATORS[:5]])
def test_remainder_limit_matches_small_radius(name, n, params):
    fs = fs_of(name, n, params)
    x = 1e-7 * np.array([0.6, 0.8])
    assert remainder(fs, x) == pytest.approx(remainder_limit(fs), abs=1e-5)


def test_remainder_limit_of_helmholtz():
    fs = fs_of("helmholtz", 2, {"kappa": 2.0})
    expected = np.euler_gamma / (2 * np.pi) - 0.25j
    assert remainder_limit(fs) == pytest.approx(expected)


def test_remainder_limit_needs_two_dimensions():
    with pytest.raises(UnsupportedDimension):
        remainder_limit(fs_of("helmholtz", 3, {"kappa": 1.0}))


@pytest.mark.parametrize("name,n,params", OPERATORS[:5], ids=[op[0] for op in OPERATORS[:5]])
def test_log_coefficients_at_origin(name, n, params):
    fs = fs_of(name, n, params)
    cS0, cG0 = log_coefficients_at_origin(fs)
    cS, cG, _ = log_coefficients(fs, 1e-7 * np.array([[0.6, 0.8]]))
    assert cS[0] == pytest.approx(cS0, abs=1e-7)
    assert np.allclose(cG[0], cG0, atol=1e-7)


def test_gradient_parity_gap_shrinks_linearly_in_3d():
    # вес |x|^{n−2}: нечётная часть порядка |x|
    fs = fs_of("modified_helmholtz", 3, {"mu": 1.0})
    gaps = [np.linalg.norm(np.subtract(*gradient_parity_probe(fs, [1.0, 0.0, 0.0], r))) for r in (1e-2, 1e-3)]
    assert 8.0 <= gaps[0] / gaps[1] <= 12.0
    assert gaps[1] == pytest.approx(1e-3 / (4 * np.pi), rel=0.05)


def test_log_coefficients_laplace_2d():
    fs = fs_of("laplace", 2, {})
    cS, cG, cH = log_coefficients(fs, np.array([[0.3, 0.1], [0.0, 1.0]]))
    assert np.allclose(cS, 1 / (2 * np.pi))
    assert np.allclose(cG, 0)
    assert np.allclose(cH, 0)


def test_log_coefficients_vanish_in_3d():
    cS, cG, cH = log_coefficients(fs_of("laplace", 3, {}), np.ones((4, 3)))
    assert cS.shape == (4,) and cG.shape == (4, 3) and cH.shape == (4, 3, 3)
    assert not np.any(cS) and not np.any(cG) and not np.any(cH)


@given(
    kappa=st.floats(min_value=0.2, max_value=5.0),
    r=st.floats(min_value=1e-3, max_value=10.0),
    angle=st.floats(min_value=0.0, max_value=2 * np.pi),
)
@settings(max_examples=100, deadline=None)
def test_helmholtz_2d_annihilation_property(kappa, r, angle):
    fs = make_fundamental_solution(build_coefficients(2, {(2, 0): 1, (0, 2): 1, (0, 0): kappa ** 2}))
    x = r * np.array([np.cos(angle), np.sin(angle)])
    assert pde_residual(fs, x) <= 1e-8
