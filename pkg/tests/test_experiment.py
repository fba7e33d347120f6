import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dirmax.directions import equispaced_slopes
from dirmax.experiment import (CSV_FIELDS, ConfigError, besicovitch_stack, disc,
                               estimate_norm, least_squares, norm_ratio, point_mass,
                               run_experiment, sheared_segment, slope_family,
                               validate_config, write_report)
from dirmax.gridops import dyadic_scales


def test_test_grids():
    assert disc(32, 4).sum() == sum(1 for i in range(-16, 16) for j in range(-16, 16)
                                    if i * i + j * j <= 16)
    seg = sheared_segment(32, 0.5, 4)
    assert seg.sum() == 9 and seg[16, 16] == 1 and seg[20, 18] == 1
    assert besicovitch_stack(32, [0.1, 0.9], 4, 2).sum() >= 2 * 9
    assert point_mass(32).argmax() == 16 * 32 + 16


def test_constant_ratio_is_one():
    assert norm_ratio(np.ones((16, 16)), [0.2, 0.7], dyadic_scales(16)) == 1.0


@settings(max_examples=20, deadline=None)
@given(st.lists(st.floats(0.0, 0.99), min_size=1, max_size=5), st.integers(1, 8))
def test_lower_bound_at_least_one(omega, budget):
    est = estimate_norm(omega, 32, budget=budget)
    assert est.lower_bound >= 1.0
    r, wid = est
    assert r == est.lower_bound and isinstance(wid, str)


def test_single_slope():
    est = estimate_norm([0.5], 32, budget=4)
    assert est.lower_bound >= 1.0
    assert est.grid.shape == (32, 32)
    # the recorded ratio is the ratio of the recorded witness grid
    assert norm_ratio(est.grid, [0.5], dyadic_scales(32)) == est.lower_bound


def test_empty_omega_rejected():
    with pytest.raises(ValueError):
        estimate_norm([], 32)


def test_warm_start_is_free_and_monotone():
    f = disc(32, 3)
    r0 = norm_ratio(f, [0.3], dyadic_scales(32))
    est = estimate_norm([0.3], 32, budget=1, warm_start=[("w", f)])
    assert est.lower_bound >= r0
    assert len(est.trace) == 2


def test_nested_rows_nondecreasing():
    cfg = {"seed": 3, "sizes": [32], "budget": 3,
           "families": [{"type": "built", "id": "b", "rows": "levels",
                         "base": {"ratio": 0.4, "count": 3, "anchor": 0.9},
                         "levels": [{"ratio": 0.4, "count": 2},
                                    {"ratio": 0.4, "count": 1, "toward": "right"}]}]}
    rep = run_experiment(cfg)
    ratios = [r["best_ratio"] for r in rep.rows]
    assert [r["family_id"] for r in rep.rows] == ["b:N1", "b:N2", "b:N3"]
    assert [r["lac_order"] for r in rep.rows] == [1, 2, 3]
    assert all(a <= b for a, b in zip(ratios, ratios[1:]))
    assert not any(r["witness"].startswith("warm:warm:") for r in rep.rows)


def test_empty_families():
    rep = run_experiment({"families": [], "sizes": [32]})
    assert rep.rows == [] and rep.csv_text() == ",".join(CSV_FIELDS) + "\n"


def small_cfg():
    return {"seed": 5, "sizes": [32], "budget": 3,
            "families": [{"type": "equispaced", "count": 4},
                         {"type": "geometric", "ratio": 0.4, "count": 3}]}


def test_deterministic_csv(tmp_path):
    a = run_experiment(small_cfg())
    b = run_experiment(small_cfg())
    assert a.csv_text() == b.csv_text()
    assert all(r["wall_ms"] == "" for r in a.rows)
    c, j = write_report(a, tmp_path, "small")
    assert c.read_text() == a.csv_text()
    d = json.loads(j.read_text())
    assert d["rows"][0]["family_id"] == "equispaced:4" and "pinned_constants" in d


def test_timing_opt_in():
    cfg = dict(small_cfg(), record_timing=True)
    assert all(r["wall_ms"] != "" for r in run_experiment(cfg).rows)


@pytest.mark.parametrize("bad", [
    {"seed": -1}, {"seed": 1.5}, {"sizes": [100]}, {"sizes": [8]}, {"budget": 0},
    {"families": {}}, [],
])
def test_config_validation(bad):
    with pytest.raises(ConfigError):
        validate_config(bad)


def test_unknown_family():
    with pytest.raises(ConfigError):
        slope_family({"type": "spiral"})


def test_file_family(tmp_path):
    (tmp_path / "s.json").write_text(equispaced_slopes(8).to_json())
    rows = slope_family({"type": "file", "path": "s.json"}, tmp_path)
    assert rows[0][0] == "s" and len(rows[0][1]) == 8
    assert rows[0][1].certificate is not None


def test_least_squares_exact_line():
    fit = least_squares([1, 2, 3], [3, 5, 7])
    assert fit["slope"] == pytest.approx(2) and fit["intercept"] == pytest.approx(1)
    assert fit["rss"] <= 1e-20
