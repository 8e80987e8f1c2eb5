import json

import numpy as np
import pandas as pd
import pytest

from utils.progress_bar import create_progress_bar, format_ladder_progress
from utils.report_generator import (
    generate_excel_report,
    surface_to_frame,
    write_report_json,
    write_tables_csv,
)
from utils.statistics import (
    dyadic_band_maxima,
    empirical_orders,
    fit_loglog_slope,
    holder_exponent,
    omega_blowup_ratio,
    refinement_delta,
)


def power_law_pairs(beta, count=4000, seed=0):
    rng = np.random.default_rng(seed)
    distances = 2.0 ** rng.uniform(-10, 0, count)
    return distances, distances ** (beta - 1)


def test_empirical_orders():
    orders = empirical_orders([64, 128, 256], [1e-4, 2.5e-5, 0.0])
    assert orders[0] == pytest.approx(2.0)
    assert orders[1] is None


def test_band_maxima_drop_sparse_bands():
    distances, quotients = power_law_pairs(0.5)
    bands = dyadic_band_maxima(distances, quotients, min_pairs=30)
    assert list(bands.columns) == ["band", "pairs", "max_quotient", "separation"]
    assert bands["band"].is_monotonic_increasing
    assert (bands["pairs"] >= 30).all()
    sparse = dyadic_band_maxima(distances[:20], quotients[:20], min_pairs=30)
    assert sparse.empty


def test_band_window_limits():
    distances, quotients = power_law_pairs(0.5)
    bands = dyadic_band_maxima(distances, quotients, d_min=2.0 ** -6, d_max=2.0 ** -2)
    assert bands["band"].min() >= 2
    assert bands["band"].max() <= 6


@pytest.mark.parametrize("beta", [0.3, 0.5, 0.8])
def test_holder_exponent_recovers_power_law(beta):
    distances, quotients = power_law_pairs(beta)
    bands = dyadic_band_maxima(distances, quotients)
    assert holder_exponent(bands) == pytest.approx(beta, abs=0.05)


def test_fit_needs_enough_bands():
    bands = pd.DataFrame({"band": [1, 2], "pairs": [40, 40], "max_quotient": [1.0, 2.0],
                          "separation": [0.4, 0.2]})
    assert fit_loglog_slope(bands, min_bands=4) is None


def test_omega_blowup_ratio():
    distances, quotients = power_law_pairs(1.0)
    flat = dyadic_band_maxima(distances, quotients)
    assert omega_blowup_ratio(flat) == pytest.approx(1.0)
    distances, quotients = power_law_pairs(0.5)
    growing = dyadic_band_maxima(distances, quotients)
    assert omega_blowup_ratio(growing) > 2


def test_refinement_delta():
    assert refinement_delta(0.0, 0.0) == 0.0
    assert refinement_delta(1.0, 1.02) == pytest.approx(0.02 / 1.02)


def test_progress_bar():
    assert create_progress_bar(5, 10) == "█████░░░░░ 50%"
    assert create_progress_bar(0, 0).endswith("0%")
    line = format_ladder_progress("identities", "laplace/circle/one", [64, 128], 1, 1e-9)
    assert "N=128" in line and "100%" in line


def test_report_json_is_sorted_and_jsonable(tmp_path):
    path = write_report_json({"b": np.float64(1.5), "a": [1 + 2j, np.inf], "c": np.int64(3)},
                             str(tmp_path / "report.json"))
    text = open(path, encoding="utf-8").read()
    data = json.loads(text)
    assert list(data) == ["a", "b", "c"]
    assert data["a"] == [{"re": 1.0, "im": 2.0}, "inf"]
    assert data["c"] == 3


def test_tables_csv_are_reproducible(tmp_path):
    table = pd.DataFrame({"N": [64, 128], "residual": [1.0 / 3.0, 2.0 / 7.0]})
    first = write_tables_csv({"residuals": table}, str(tmp_path / "one"))
    second = write_tables_csv({"residuals": table.copy()}, str(tmp_path / "two"))
    a = open(first["residuals"], "rb").read()
    assert a == open(second["residuals"], "rb").read()
    assert b"3.333333333333e-01" in a


def test_excel_report(tmp_path):
    pytest.importorskip("openpyxl")
    table = pd.DataFrame({"N": [64], "residual": [1e-9]})
    path = generate_excel_report({"residuals": table}, str(tmp_path / "report.xlsx"))
    assert path is not None
    from openpyxl import load_workbook
    sheet = load_workbook(path)["residuals"]
    assert sheet["A1"].value == "N"
    assert sheet["B2"].value == pytest.approx(1e-9)


def test_surface_frame_columns(sphere):
    frame = surface_to_frame(sphere)
    assert list(frame.columns) == ["x", "y", "z", "nu_x", "nu_y", "nu_z", "w"]
    assert len(frame) == sphere.N


def test_curve_frame_columns(circle):
    frame = surface_to_frame(circle)
    assert list(frame.columns) == ["x", "y", "nu_x", "nu_y", "w"]
    assert frame["w"].sum() == pytest.approx(2 * np.pi)
