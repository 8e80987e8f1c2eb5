import json

import numpy as np
import pytest

from handlers.regularity_lab import (
    IDENTITIES,
    TABLE_COLUMNS,
    ExperimentConfig,
    Verdict,
    build_operator,
    decomposition_probe,
    kernel_norm_report,
    measure_regularity_gain,
    run_experiment,
    run_identity_suite,
)
from utils.exceptions import ConfigError, RoughDensityUnsupported, UnsupportedDimension


# -- конфигурация ----------------------------------------------------------

def test_defaults_per_experiment():
    gain = ExperimentConfig.from_dict({}, "gain")
    assert gain.ladder == [1024]
    assert gain.geometries == [{"kind": "kite"}]
    identities = ExperimentConfig.from_dict({}, "identities")
    assert identities.identities == list(IDENTITIES)
    assert identities.ladder == [64, 128, 256]


def test_single_keys_and_tolerance_override():
    config = ExperimentConfig.from_dict(
        {"experiment": "identities", "operator": "helmholtz", "geometry": {"kind": "kite"},
         "density": "cos_theta", "tolerance": 1e-6, "seed": 7})
    assert config.operators == ["helmholtz"]
    assert config.geometries == [{"kind": "kite"}]
    assert config.densities == ["cos_theta"]
    assert config.tolerances["identity_tolerance"] == 1e-6
    assert config.seed == 7
    assert config.to_dict()["experiment"] == "identities"


@pytest.mark.parametrize("data", [
    {"experiment": "fourier"},
    {"experiment": "identities", "ladder": [128, 64]},
    {"experiment": "identities", "levels": [3, 3]},
    {"experiment": "identities", "identities": ["slay3"]},
    {"experiment": "identities", "workers": 0},
])
def test_invalid_configs(data):
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict(data)


def test_config_from_file(tmp_path):
    path = tmp_path / "config.json"
    path.write_text(json.dumps({"ladder": [32, 64], "operators": ["laplace"]}), encoding="utf-8")
    config = ExperimentConfig.from_file(str(path), "identities")
    assert config.ladder == [32, 64]
    with pytest.raises(ConfigError):
        ExperimentConfig.from_file(str(tmp_path / "missing.json"), "identities")


def test_build_operator_forms():
    assert build_operator("laplace", 3).n == 3
    helmholtz = build_operator({"preset": "helmholtz", "kappa": 2.0}, 2)
    assert helmholtz.a0 == pytest.approx(4.0)
    custom = build_operator({"n": 2, "coeffs": [{"gamma": [2, 0], "re": 1}, {"gamma": [0, 2], "re": 1}]}, 2)
    assert np.array_equal(custom.a2, np.eye(2))
    with pytest.raises(ConfigError):
        build_operator({"kappa": 1.0}, 2)


def test_verdict_comparisons():
    assert Verdict.check("a", 1e-6, 1e-5, '<=').passed
    assert not Verdict.check("b", None, 1e-5, '<=').passed
    assert not Verdict.check("c", float("nan"), 1.0, '<=').passed
    assert Verdict.check("d", 0.7, (0.4, 1.05), 'in').passed
    assert Verdict.check("e", 0.0, 0.0, '==').passed
    assert Verdict.check("f", 3.0, 2.0, '>=').passed
    with pytest.raises(ConfigError):
        Verdict.check("g", 1.0, 1.0, '~')


# -- тождества -------------------------------------------------------------

def test_identity_suite_on_ellipse():
    config = ExperimentConfig.from_dict({
        "operators": ["laplace", {"preset": "drift", "b": [1.0, 0.5]}],
        "geometry": {"kind": "ellipse", "a": 2.0, "b": 1.0},
        "density": "cos_theta",
        "ladder": [64, 128, 256],
        "tolerances": {"noise_floor": 1e-9},
    }, "identities")
    report = run_identity_suite(config)
    assert report.passed, [v.to_dict() for v in report.verdicts if not v.passed]
    assert list(report.tables["residuals"].columns) == TABLE_COLUMNS
    assert len(report.tables["residuals"]) == 2 * len(IDENTITIES) * 3
    assert not report.skipped
    assert "ellipse(a=2.0,b=1.0)_N256" in report.surfaces
    assert all(entry["quadrature"] == "kress-log" for entry in report.fitted.values())


def test_identity_suite_on_sphere_skips_nodal_identities():
    config = ExperimentConfig.from_dict({
        "geometry": {"kind": "sphere"}, "density": "cos_theta", "levels": [1, 2],
    }, "identities")
    report = run_identity_suite(config)
    skipped = {entry.split("/")[0] for entry in report.skipped}
    assert skipped == {"slay2", "wregn", "gradQ", "pljr"}
    residuals = report.tables["residuals"]
    assert sorted(residuals["N"].unique()) == [80, 320]
    wstar = [v for v in report.verdicts if v.name.startswith("residual/wstar")]
    assert len(wstar) == 1 and wstar[0].tolerance == pytest.approx(2e-2)
    assert not any(v.name.startswith("order/") for v in report.verdicts)
    assert all(entry["quadrature"] == "duffy-triangle" for entry in report.fitted.values())


def test_unsupported_dimension_is_reported():
    config = ExperimentConfig.from_dict({"operator": {"preset": "laplace", "n": 4}, "ladder": [32]},
                                        "identities")
    with pytest.raises(UnsupportedDimension):
        run_identity_suite(config)


def test_parallel_workers_give_the_same_tables():
    data = {"operators": ["laplace", "helmholtz"], "density": "cos_theta", "ladder": [32, 64],
            "identities": ["slay2", "wstar"]}
    serial = run_identity_suite(ExperimentConfig.from_dict(data, "identities"))
    parallel = run_identity_suite(ExperimentConfig.from_dict({**data, "workers": 2}, "identities"))
    assert serial.tables["residuals"].equals(parallel.tables["residuals"])


# -- выигрыш гладкости -----------------------------------------------------

def test_gain_rejects_surfaces():
    config = ExperimentConfig.from_dict({"geometry": {"kind": "sphere"}, "ladder": [2]}, "gain")
    with pytest.raises(RoughDensityUnsupported):
        measure_regularity_gain(config)


@pytest.mark.slow
def test_gain_on_kite():
    report = measure_regularity_gain(ExperimentConfig.from_dict({}, "gain"))
    assert report.passed, [v.to_dict() for v in report.verdicts if not v.passed]
    fitted = report.fitted["laplace/kite/rough_antiderivative(beta=0.5,theta0=3.141592653589793)"]
    assert fitted["input"] == pytest.approx(0.5, abs=0.05)
    assert 0.4 <= fitted["output"] <= 1.05
    assert all("second_derivative_exponent" in entry for entry in report.illustrative.values())


# -- нормы ядер ------------------------------------------------------------

def test_kernel_norm_report():
    config = ExperimentConfig.from_dict({"ladder": [64, 128], "triple_count": 500, "sharp_geometry": None},
                                        "kernel_norms")
    report = kernel_norm_report(config)
    assert report.passed, [v.to_dict() for v in report.verdicts if not v.passed]
    kernels = {entry["kernel"] for entry in report.norms}
    assert kernels == {"xi_x1", "gradient", "hessian", "tangential_gradient", "zero"}
    names = {v.name for v in report.verdicts}
    assert "product/xi_x1*gradient/violations" in names
    assert "frozen_direction/violations" in names
    assert sum(name.startswith("embedding/") for name in names) == 3
    quantities = set(report.tables["norms"]["quantity"])
    assert "product/xi_x1*gradient/max_ratio" in quantities
    assert all(entry["seed"] == config.seed for entry in report.norms)


@pytest.mark.slow
def test_sharp_norms_are_stable():
    report = kernel_norm_report(ExperimentConfig.from_dict({"ladder": [128, 256], "triple_count": 1000},
                                                           "kernel_norms"))
    growth = [v for v in report.verdicts if v.name.endswith("sharp_growth")]
    assert len(growth) == 2
    assert all(v.passed for v in growth)


# -- разложение ------------------------------------------------------------

def test_decomposition_probe_defaults():
    report = decomposition_probe(ExperimentConfig.from_dict({}, "decomposition"))
    assert report.passed, [v.to_dict() for v in report.verdicts if not v.passed]
    names = [v.name for v in report.verdicts]
    assert "laplace/n2/remainder_max" in names
    assert "laplace/n3/remainder_max" in names
    assert any(name.endswith("limit_difference") for name in names)
    assert any(name.endswith("limit_value") for name in names)
    assert any(name.endswith("remainder_bound_ratio") for name in names)
    assert any(key.endswith("parity_gap") for key in report.illustrative)


def test_run_experiment_dispatch():
    report = run_experiment(ExperimentConfig.from_dict({"operators": [{"preset": "laplace", "n": 3}]},
                                                       "decomposition"))
    assert report.experiment == "decomposition"
    assert report.to_dict()["tables"] == ["remainder"]
