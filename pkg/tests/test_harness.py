import json
import math
from pathlib import Path

import pytest

from cltlab.harness import experiments as ex
from cltlab.harness.cli import main
from cltlab.harness.records import (CSV_FIELDS, ExperimentRecord, RateFit, emit_outputs, read_records_json,
                                    records_csv)

CONFIGS = Path(__file__).parent.parent / "configs"


def rec(n, wp, **kw):
    return ExperimentRecord("s", 1, n, 2.0, 0, "quantile_exact", wp, **kw)


def test_sqrt_n_scaled():
    r = rec(1024, 0.0180440340165)
    assert abs(r.sqrt_n_scaled - 32 * 0.0180440340165) < 1e-12


def test_records_frozen():
    with pytest.raises(Exception):
        rec(4, 0.1).n = 5


def test_empty_csv_header_only():
    assert records_csv([]) == ",".join(CSV_FIELDS) + "\n"


def test_three_records_round_trip(tmp_path):
    recs = [rec(4, 0.1 + 1e-17 * k, std_error=1 / 3, bound_total=math.pi) for k in range(3)]
    paths = emit_outputs(recs, tmp_path / "out")
    assert len(paths["csv"].read_text().splitlines()) == 4
    back = read_records_json(paths["json"])
    for a, b in zip(recs, back):
        assert a.wp_estimate == b.wp_estimate and a.std_error == b.std_error and a.bound_total == b.bound_total


def test_rate_file_monotone(tmp_path):
    recs = [rec(n, 1 / math.sqrt(n)) for n in (4, 16, 64, 256)]
    lines = emit_outputs(recs, tmp_path / "r")["dat"].read_text().splitlines()
    xs = [float(line.split()[0]) for line in lines if not line.startswith("#")]
    assert xs == sorted(xs) and xs[0] == 2.0


def test_unwritable_path():
    with pytest.raises(OSError, match="/proc"):
        emit_outputs([rec(4, 0.1)], "/proc/nope/out")


def test_rate_fit_needs_four_points():
    with pytest.raises(ValueError):
        RateFit.from_records([rec(n, 0.1) for n in (4, 8, 16)], None)


def test_rate_fit_constant_top_half():
    recs = [rec(n, c / math.sqrt(n)) for n, c in ((4, 9.0), (16, 9.0), (64, 1.0), (256, 3.0))]
    fit = RateFit.from_records(recs, 2.0)
    assert fit.fitted_constant == pytest.approx(2.0)
    assert fit.relative_gap == pytest.approx(0.0)


def test_rademacher_exact_slope():
    spec = ex.builtin_specs()["rademacher_1d"]
    fit = ex.run_rate_experiment({"spec": spec, "route": "quantile_exact", "n_grid": [2**k for k in range(6, 13)]})
    assert abs(fit.fitted_slope + 0.5) < 0.03
    assert "slope_flag" not in fit.extras


def test_gaussian_source_flagged():
    spec = ex.builtin_specs()["gaussian_2d"]
    fit = ex.run_rate_experiment({"spec": spec, "n_grid": [4, 16, 64, 256], "m": 128, "reps": 4})
    assert "degenerate" in fit.extras
    assert "slope_flag" in fit.extras


def test_route_errors():
    with pytest.raises(ex.RouteError):
        ex.check_route(ex.builtin_specs()["exponential_1d"], "quantile_exact")
    with pytest.raises(ex.RouteError):
        ex.check_route(ex.builtin_specs()["uniform_2d"], "product_exact")


def test_product_route_matches_scaled_1d():
    S = ex.builtin_specs()
    v2, _ = ex.estimate_wp(S["rademacher_2d"], 64, 2.0, "product_exact")
    v1, _ = ex.estimate_wp(S["rademacher_1d"], 64, 2.0, "quantile_exact")
    assert v2 == pytest.approx(math.sqrt(2) * v1, rel=1e-12)


def test_deterministic_csv():
    cfg = {"spec": ex.builtin_specs()["rademacher_2d"], "n_grid": [4, 8, 16, 32], "m": 64, "reps": 3, "seed": 5}
    a = records_csv(ex.run_rate_experiment(cfg).records)
    b = records_csv(ex.run_rate_experiment(dict(cfg, workers=2)).records)
    assert a == b


def test_beta_sweep():
    cmp = ex.run_bound_comparison(ex.load_config(CONFIGS / "bound_rademacher_2d.json") | {"n_grid": [64]})
    status = {e["beta_sq_X"]: e["status"] for e in cmp.sweep}
    assert status == {1.0: "rejected", 4.0: "accepted", 8.0: "accepted"}
    assert cmp.rows[0]["status"] == "ok" and math.isfinite(cmp.rows[0]["ratio"])


def test_lattice_candidates():
    lat = ex.lattice_candidates(ex.builtin_specs()["rademacher_1d"], 2.0)
    assert lat["printed"] == pytest.approx(2 / math.sqrt(12) / 6, rel=0.01)
    assert lat["regrouped"] == pytest.approx(2 / math.sqrt(12), rel=0.01)
    assert lat["quoted_lower_bound"] == 0.5


def test_cli_moments(capsys):
    assert main(["moments", "--spec", "exponential_1d", "--q", "3"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0] == "index,value" and float(out[1].split(",")[1]) == pytest.approx(2.0)


def test_cli_bound_json(capsys):
    assert main(["bound", "--spec", str(CONFIGS / "specs" / "rademacher_1d.json"), "--n", "64", "--p", "2",
                 "--beta-sq", "4", "--wq", "0.1"]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["total"] == pytest.approx(0.695748947795455, rel=1e-10)


def test_cli_rate_writes_files(tmp_path, capsys):
    assert main(["rate", "--spec", "rademacher_1d", "--p", "2", "--n-grid", "16,32,64,128",
                 "--route", "quantile_exact", "--out", str(tmp_path), "--plot"]) == 0
    names = {p.suffix for p in tmp_path.iterdir()}
    assert names == {".csv", ".json", ".dat", ".png"}


def test_cli_errors_exit_2(capsys):
    assert main(["wp", "--spec", '{"family": "discrete"}', "--n", "2"]) == 2
    assert main(["terms", "--spec", "rademacher_1d", "--n", "4", "--beta-sq", "1"]) == 2


def test_shipped_configs_load():
    for f in CONFIGS.glob("*.json"):
        cfg = ex.load_config(f)
        assert cfg["n_grid"] and cfg["spec"].standardized
