import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import special

from geometry.boundary_geometry import (
    Density,
    Modulus,
    PairSampler,
    ambient_density,
    as_density,
    constant_density,
    coordinate_density,
    cos_theta_density,
    density_from_spec,
    holder_seminorm,
    make_curve,
    make_sphere,
    make_surface,
    modulus_scaling_constant,
    normal_density,
    rough_abs_sin_density,
    rough_antiderivative_density,
    rough_distance_density,
    spectral_derivative,
    tangential_M,
    tangential_gradient,
    taylor_defect,
)
from utils.exceptions import (
    BadShapeParams,
    ConfigError,
    DegenerateNodeSet,
    NeedsAmbientForm,
    RoughDensityUnsupported,
)


# -- кривые ----------------------------------------------------------------

def test_unit_circle_circumference():
    surface = make_curve("circle", 64)
    assert surface.measure == pytest.approx(2 * np.pi, abs=1e-12)


def test_unit_circle_normals_are_nodes():
    surface = make_curve("circle", 64)
    assert np.allclose(surface.normals, surface.nodes, atol=1e-15)


def test_ellipse_perimeter_matches_elliptic_integral(ellipse):
    # 4a·E(1 − b²/a²)
    perimeter = 4 * 2.0 * special.ellipe(1 - 1.0 / 4.0)
    assert ellipse.measure == pytest.approx(perimeter, abs=1e-10)
    assert perimeter == pytest.approx(9.688448, abs=1e-6)


@pytest.mark.parametrize("shape", ["circle", "ellipse", "kite", "star"])
def test_curve_normals_are_unit_and_balanced(shape):
    surface = make_curve(shape, 128)
    assert np.allclose(np.linalg.norm(surface.normals, axis=1), 1.0, atol=1e-14)
    assert np.allclose(surface.weights @ surface.normals, 0.0, atol=1e-10)


def test_kite_normals_point_outward(kite):
    # ∫ x·ν dσ = 2·площадь > 0 для внешней нормали
    flux = np.sum(kite.weights * np.sum(kite.nodes * kite.normals, axis=1))
    assert flux > 0


def test_describe_includes_resolution(ellipse):
    info = ellipse.describe()
    assert info["kind"] == "ellipse"
    assert info["a"] == 2.0
    assert info["N"] == 128


@pytest.mark.parametrize("shape, N, params", [
    ("circle", 63, {}),
    ("circle", 8, {}),
    ("circle", 64, {"r": -1.0}),
    ("ellipse", 64, {"a": 0.0, "b": 1.0}),
    ("star", 64, {"k": 5, "eps": 1.2}),
    ("star", 64, {"k": 2.5, "eps": 0.1}),
    ("hexagon", 64, {}),
    ("sphere", 64, {}),
])
def test_bad_curve_params(shape, N, params):
    with pytest.raises(BadShapeParams):
        make_curve(shape, N, **params)


def test_make_surface_from_json_spec():
    surface = make_surface({"kind": "ellipse", "a": 2, "b": 1, "N": 32})
    assert surface.n == 2
    assert surface.N == 32
    assert make_surface({"kind": "sphere", "r": 1}, 1).n == 3


# -- поверхности -----------------------------------------------------------

def test_sphere_area_and_balance(sphere):
    assert sphere.measure == pytest.approx(4 * np.pi, rel=2e-3)
    assert np.allclose(sphere.weights @ sphere.normals, 0.0, atol=1e-3)
    assert np.allclose(np.linalg.norm(sphere.normals, axis=1), 1.0, atol=1e-14)


def test_sphere_node_count_grows_by_four():
    assert make_sphere("sphere", 0).N == 20
    assert make_sphere("sphere", 2).N == 320


def test_degenerate_ellipsoid_is_the_sphere(sphere):
    ellipsoid = make_sphere({"kind": "ellipsoid", "a": 1, "b": 1, "c": 1}, 3)
    assert np.array_equal(ellipsoid.nodes, sphere.nodes)


def test_ellipsoid_area_converges():
    # площадь эллипсоида вращения a = b = 1, c = 2
    e = np.sqrt(1 - 1 / 4)
    exact = 2 * np.pi * (1 + 2 * np.arcsin(e) / e)
    surface = make_sphere({"kind": "ellipsoid", "a": 1, "b": 1, "c": 2}, 4)
    assert surface.measure == pytest.approx(exact, rel=1e-2)
    assert np.allclose(np.linalg.norm(surface.normals, axis=1), 1.0, atol=1e-14)


@pytest.mark.parametrize("kind, level, params", [
    ("sphere", 7, {}),
    ("sphere", -1, {}),
    ("ellipsoid", 2, {"a": 1, "b": -1, "c": 1}),
    ("circle", 2, {}),
])
def test_bad_surface_params(kind, level, params):
    with pytest.raises(BadShapeParams):
        make_sphere(kind, level, **params)


# -- плотности -------------------------------------------------------------

def test_constant_density_has_zero_gradient(ellipse):
    one = constant_density(ellipse, 2.0)
    assert np.all(one.values == 2.0)
    assert not np.any(one.grad_at(ellipse.nodes))
    assert one.exponent == 1.0


def test_density_arithmetic_keeps_ambient_form(ellipse):
    x = coordinate_density(ellipse, 0)
    y = coordinate_density(ellipse, 1)
    product = x * y + 3.0
    assert product.has_ambient
    assert np.allclose(product.values, ellipse.nodes[:, 0] * ellipse.nodes[:, 1] + 3.0)
    grad = product.grad_at(ellipse.nodes)
    assert np.allclose(grad[:, 0], ellipse.nodes[:, 1])
    assert np.allclose(grad[:, 1], ellipse.nodes[:, 0])
    assert np.allclose((x - x).values, 0.0)
    assert np.allclose((-x).values, -ellipse.nodes[:, 0])
    assert np.allclose((2 * x).grad_at(ellipse.nodes)[:, 0], 2.0)


def test_nodal_density_has_no_ambient_form(circle):
    nodal = as_density(circle, np.ones(circle.N))
    assert not nodal.has_ambient
    with pytest.raises(NeedsAmbientForm):
        nodal.at(circle.nodes)
    assert not (nodal + coordinate_density(circle, 0)).has_ambient


def test_as_density_rejects_wrong_length(circle):
    with pytest.raises(ConfigError):
        as_density(circle, np.ones(circle.N + 1))


def test_ambient_gradient_matches_finite_differences(sphere):
    nu = normal_density(sphere, 2)
    points = sphere.nodes[:20] * 1.1
    h = 1e-6
    grad = nu.grad_at(points)
    for axis in range(3):
        step = np.zeros(3)
        step[axis] = h
        fd = (nu.at(points + step) - nu.at(points - step)) / (2 * h)
        assert np.allclose(grad[:, axis], fd, atol=1e-7)


def test_normal_density_matches_surface_normals(sphere, circle):
    assert np.allclose(normal_density(sphere, 0).values, sphere.normals[:, 0])
    assert normal_density(sphere, 0).has_ambient
    assert not normal_density(circle, 0).has_ambient


def test_cos_theta_on_curve_and_surface(circle, sphere):
    curve = cos_theta_density(circle)
    assert np.allclose(curve.values, np.cos(circle.t))
    assert np.allclose(curve.param_derivative, -np.sin(circle.t))
    surface = cos_theta_density(sphere)
    assert np.allclose(surface.values, sphere.nodes[:, 0])


def test_rough_densities(circle):
    abs_sin = rough_abs_sin_density(circle, 0.5)
    assert abs_sin.exponent == 0.5
    assert abs_sin.values[0] == 0
    dist = rough_distance_density(circle, 0.5, x0=3)
    assert dist.values[3] == 0
    anti = rough_antiderivative_density(make_curve("circle", 64), 0.5, theta0=np.pi)
    assert anti.exponent == pytest.approx(1.5)
    assert anti.param_derivative is not None
    assert np.all(np.isfinite(anti.values))
    assert anti.values[0] == 0


def test_rough_antiderivative_is_periodic():
    surface = make_curve("circle", 64)
    anti = rough_antiderivative_density(surface, 0.5)
    # шаг от последнего узла к первому согласован со средней производной
    step = 2 * np.pi / surface.N
    jump = anti.values[0] - anti.values[-1]
    assert abs(jump) <= step * np.max(np.abs(anti.param_derivative)) + 1e-12


@pytest.mark.parametrize("builder", [rough_abs_sin_density, rough_distance_density,
                                     rough_antiderivative_density])
def test_rough_densities_are_curve_only(sphere, builder):
    with pytest.raises(RoughDensityUnsupported):
        builder(sphere, 0.5)


def test_density_from_spec(circle):
    assert np.allclose(density_from_spec(circle, "one").values, 1.0)
    assert np.allclose(density_from_spec(circle, {"kind": "coordinate", "axis": 1}).values,
                       circle.nodes[:, 1])
    assert density_from_spec(circle, {"kind": "rough_abs_sin", "beta": 0.3}).exponent == 0.3
    with pytest.raises(ConfigError):
        density_from_spec(circle, {"kind": "gaussian"})


# -- касательное исчисление ------------------------------------------------

def test_M12_of_first_coordinate_on_circle(circle):
    M = tangential_M(circle, 0, 1, coordinate_density(circle, 0))
    assert np.allclose(M.values, -np.sin(circle.t), atol=1e-14)
    assert abs(M.values[0]) < 1e-14


def test_M_is_antisymmetric_and_kills_constants(ellipse):
    f = coordinate_density(ellipse, 0) * coordinate_density(ellipse, 1)
    assert np.allclose(tangential_M(ellipse, 1, 0, f).values, -tangential_M(ellipse, 0, 1, f).values)
    assert not np.any(tangential_M(ellipse, 0, 0, f).values)
    assert np.allclose(tangential_M(ellipse, 0, 1, constant_density(ellipse, 5.0)).values, 0.0)


def test_nodal_M_matches_ambient_M(ellipse):
    f = coordinate_density(ellipse, 0) * coordinate_density(ellipse, 0)
    nodal = as_density(ellipse, f.values)
    assert np.allclose(tangential_M(ellipse, 0, 1, nodal).values,
                       tangential_M(ellipse, 0, 1, f).values, atol=1e-10)


def test_spectral_derivative_of_trigonometric_polynomial(circle):
    values = np.cos(3 * circle.t) + 0.5 * np.sin(7 * circle.t)
    expected = -3 * np.sin(3 * circle.t) + 3.5 * np.cos(7 * circle.t)
    assert np.allclose(spectral_derivative(circle, values), expected, atol=1e-12)


def test_integration_by_parts():
    surface = make_curve({"kind": "ellipse", "a": 2.0, "b": 1.0}, 256)
    x = coordinate_density(surface, 0)
    y = coordinate_density(surface, 1)
    phi = x * y + 1.0
    psi = x * x * y
    total = (np.sum(surface.weights * tangential_M(surface, 0, 1, phi).values * psi.values)
             + np.sum(surface.weights * phi.values * tangential_M(surface, 0, 1, psi).values))
    assert abs(total) <= 1e-8


def test_M_needs_ambient_form_in_3d(sphere):
    with pytest.raises(NeedsAmbientForm):
        tangential_M(sphere, 0, 1, np.ones(sphere.N))
    with pytest.raises(NeedsAmbientForm):
        tangential_gradient(sphere, np.ones(sphere.N))


def test_tangential_gradient_examples(sphere):
    circle = make_curve("circle", 64)
    grad = tangential_gradient(circle, coordinate_density(circle, 0))
    top = circle.N // 4
    assert np.allclose(grad[top], [1.0, 0.0], atol=1e-14)

    radial = ambient_density(sphere, lambda X: np.sum(X ** 2, axis=-1) + 0j, lambda X: 2 * X + 0j)
    assert np.allclose(tangential_gradient(sphere, radial), 0.0, atol=1e-12)

    f = cos_theta_density(sphere)
    g = tangential_gradient(sphere, f)
    assert np.allclose(np.sum(g * sphere.normals, axis=1), 0.0, atol=1e-12)


def test_tangential_gradient_along_tangent_is_M12(ellipse):
    f = coordinate_density(ellipse, 0) * coordinate_density(ellipse, 1)
    along = np.sum(tangential_gradient(ellipse, f) * ellipse.tangents, axis=1)
    assert np.allclose(along, tangential_M(ellipse, 0, 1, f).values, atol=1e-10)


# -- модули и полунормы ----------------------------------------------------

def test_modulus_breakpoint_and_values():
    omega = Modulus.omega(1.0)
    assert omega.breakpoint == pytest.approx(np.exp(-1.0))
    assert omega(0.0) == 0.0
    r = np.exp(-2.0)
    assert omega(r) == pytest.approx(2 * r)
    assert omega(5.0) == pytest.approx(np.exp(-1.0))
    assert Modulus.power(0.5)(4.0) == pytest.approx(2.0)
    assert Modulus.from_spec({"kind": "power", "alpha": 0.3}) == Modulus.power(0.3)


@pytest.mark.parametrize("kind, param", [("power", 1.5), ("omega", 0.0), ("log", 0.5)])
def test_bad_modulus(kind, param):
    with pytest.raises(ConfigError):
        Modulus(kind, param)


@given(theta=st.floats(min_value=0.05, max_value=1.0))
@settings(max_examples=50, deadline=None)
def test_omega_modulus_properties(theta):
    omega = Modulus.omega(theta)
    grid = np.logspace(-10, 1, 400)
    values = omega(grid)
    assert omega(0.0) == 0.0
    assert np.all(np.diff(values) >= -1e-14 * values[1:])
    r = omega.breakpoint
    assert omega(r * (1 - 1e-12)) == pytest.approx(omega(r * (1 + 1e-12)), rel=1e-9)
    assert modulus_scaling_constant(omega) <= 1 + 1 / (theta * np.e)


def test_constant_has_zero_seminorm(circle):
    assert holder_seminorm(circle, constant_density(circle, 3.0), Modulus.power(0.5)) == 0.0


def test_coordinate_lipschitz_constant(circle):
    value = holder_seminorm(circle, coordinate_density(circle, 0), Modulus.power(1.0))
    assert 0.999 <= value <= 1 + 1e-12


def test_bounded_function_remark(circle):
    f = rough_abs_sin_density(circle, 0.3)
    modulus = Modulus.power(0.5)
    a = 0.2
    value = holder_seminorm(circle, f, modulus, min_separation=a)
    assert value <= 2 / modulus(a) * np.max(np.abs(f.values))


def test_seminorm_monotone_in_pair_set(circle):
    f = rough_abs_sin_density(circle, 0.5)
    modulus = Modulus.power(0.5)
    near = holder_seminorm(circle, f, modulus, PairSampler(max_separation=0.1))
    full = holder_seminorm(circle, f, modulus)
    assert near <= full


def test_degenerate_node_set(circle):
    collapsed = make_curve("circle", 16)
    collapsed.nodes = np.zeros_like(collapsed.nodes)
    with pytest.raises(DegenerateNodeSet):
        holder_seminorm(collapsed, np.ones(16), Modulus.power(1.0))


def test_pair_sampler_is_deterministic():
    surface = make_curve("kite", 1024)
    I1, J1 = PairSampler(seed=7, per_band=200).pairs(surface.nodes)
    I2, J2 = PairSampler(seed=7, per_band=200).pairs(surface.nodes)
    assert np.array_equal(I1, I2) and np.array_equal(J1, J2)
    assert np.all(I1 < J1)
    assert len(I1) < surface.N * (surface.N - 1) // 2


def test_small_sets_use_all_pairs(circle):
    I, J = PairSampler().pairs(circle.nodes)
    assert len(I) == circle.N * (circle.N - 1) // 2


def test_taylor_defect_examples(circle):
    modulus = Modulus.power(1.0)
    f = coordinate_density(circle, 0)
    defect = taylor_defect(circle, f, modulus)
    assert 0 < defect <= 2
    assert taylor_defect(circle, 2 * f, modulus) == pytest.approx(2 * defect, rel=1e-12)
    assert taylor_defect(circle, constant_density(circle), modulus) == 0.0
    with pytest.raises(NeedsAmbientForm):
        taylor_defect(circle, np.ones(circle.N), modulus)


def test_density_is_plain_dataclass():
    d = Density(np.zeros(4) + 0j, label="z")
    assert not d.has_ambient
    assert d.label == "z"
