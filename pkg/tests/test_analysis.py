"""Coverage grids, wide-domain convergence tables, closure reports."""

import numpy as np
import pytest

from chromalocus import SensorDataError
from chromalocus.analysis import (
    ClosureReport,
    ConvergenceTable,
    CoverageReport,
    closure_report,
    coverage_map,
    gaussian_convergence,
    simplex_lattice,
)

from conftest import uniform_ref


# -- lattice ---------------------------------------------------------------------

def test_simplex_lattice_counts():
    for res in (1, 3, 16):
        pts = simplex_lattice(res)
        assert pts.shape == ((res + 1) * (res + 2) // 2, 3)
        assert np.allclose(pts.sum(axis=1), 1.0, atol=1e-12)
        assert pts.min() >= 0.0


def test_simplex_lattice_deterministic_order():
    pts = simplex_lattice(3)
    assert np.allclose(pts[0], [0.0, 0.0, 1.0])
    assert np.allclose(pts[-1], [1.0, 0.0, 0.0])
    again = simplex_lattice(3)
    assert np.array_equal(pts, again)


def test_simplex_lattice_rejects_bad_resolution():
    with pytest.raises(SensorDataError):
        simplex_lattice(0)


# -- coverage -------------------------------------------------------------------------

def test_coverage_requires_minimum_resolution(cie):
    with pytest.raises(SensorDataError):
        coverage_map(cie, uniform_ref(cie), "von_mises", 8)


def test_coverage_rejects_unknown_model(cie):
    with pytest.raises(SensorDataError):
        coverage_map(cie, uniform_ref(cie), "mystery", 16)


def test_coverage_cie_von_mises(cie):
    rep = coverage_map(cie, uniform_ref(cie), "von_mises", 16)
    assert isinstance(rep, CoverageReport)
    assert rep.n_targets > 50
    assert rep.n_solved == rep.n_targets
    assert rep.failures == ()
    assert rep.max_residual <= 1e-8
    assert rep.solved_fraction == 1.0


def test_coverage_step_kind(wheel):
    rep = coverage_map(wheel, uniform_ref(wheel), "step", 16)
    assert rep.model_kind == "step"
    assert rep.n_solved == rep.n_targets
    assert rep.max_residual <= 1e-8


def test_coverage_accepts_hyphenated_kind(wheel):
    rep = coverage_map(wheel, uniform_ref(wheel), "von-mises", 16)
    assert rep.model_kind == "von_mises"


def test_coverage_grows_with_resolution(cie):
    ref = uniform_ref(cie)
    n16 = coverage_map(cie, ref, "von_mises", 16).n_targets
    n24 = coverage_map(cie, ref, "von_mises", 24).n_targets
    assert n16 < n24


def test_coverage_d90_pocket_failures(d90):
    # without gluing, lattice nodes deep in the concave pocket stall
    rep = coverage_map(d90, uniform_ref(d90), "von_mises", 32)
    assert rep.n_solved < rep.n_targets
    assert rep.n_solved + len(rep.failures) == rep.n_targets
    assert {kind for _, kind in rep.failures} == {"no_convergence"}
    assert rep.solved_fraction > 0.9


def test_coverage_d90_glued_full(d90):
    from chromalocus.geometry import classify_convexity, glue_segments, sample_locus

    loc = sample_locus(d90, d90.grid.n)
    glue = glue_segments(loc, classify_convexity(loc))
    rep = coverage_map(d90, uniform_ref(d90), "von_mises", 32, gluing=glue)
    assert rep.n_solved == rep.n_targets
    assert rep.max_residual <= 1e-8


def test_coverage_threads_match_serial(cie):
    ref = uniform_ref(cie)
    one = coverage_map(cie, ref, "von_mises", 16, threads=1)
    two = coverage_map(cie, ref, "von_mises", 16, threads=2)
    assert one.max_residual == two.max_residual
    assert one.heatmap_rows() == two.heatmap_rows()


def test_coverage_json_shape(cie):
    rep = coverage_map(cie, uniform_ref(cie), "von_mises", 16)
    d = rep.to_json_dict()
    assert d["model_kind"] == "von_mises"
    assert d["n_targets"] == rep.n_targets
    assert d["failures"] == []
    rows = rep.heatmap_rows()
    assert len(rows) == rep.n_targets
    assert len(rows[0]) == 6 and rows[0][2] in (0, 1)


# -- wide-domain convergence --------------------------------------------------------------

def test_gaussian_convergence_zero_amplitude():
    table = gaussian_convergence(0.0, (4.0, 8.0), (0.0, 1.0))
    assert isinstance(table, ConvergenceTable)
    assert [r.sup_gap for r in table.rows] == [0.0, 0.0]
    assert all(r.ratio is None for r in table.rows)


def test_gaussian_convergence_cubic_decay():
    table = gaussian_convergence(1.0, (4.0, 8.0, 16.0, 32.0), (0.0, 1.0))
    gaps = [r.sup_gap for r in table.rows]
    assert all(a > b for a, b in zip(gaps, gaps[1:]))
    for r in table.rows[1:]:
        assert r.ratio is not None
        assert r.ratio <= 0.2


def test_gaussian_convergence_reproducible():
    a = gaussian_convergence(1.5, (4.0, 8.0), (0.0, 2.0))
    b = gaussian_convergence(1.5, (4.0, 8.0), (0.0, 2.0))
    assert [r.sup_gap for r in a.rows] == [r.sup_gap for r in b.rows]


def test_gaussian_convergence_validation():
    with pytest.raises(SensorDataError):
        gaussian_convergence(-1.0, (4.0,), (0.0, 1.0))
    with pytest.raises(SensorDataError):
        gaussian_convergence(1.0, (4.0, 4.0), (0.0, 1.0))
    with pytest.raises(SensorDataError):
        gaussian_convergence(1.0, (0.5,), (0.0, 1.0))
    with pytest.raises(SensorDataError):
        gaussian_convergence(1.0, (4.0,), (1.0, 0.0))


def test_gaussian_convergence_sorts_widths():
    table = gaussian_convergence(1.0, (16.0, 4.0, 8.0), (0.0, 1.0))
    assert [r.width for r in table.rows] == [4.0, 8.0, 16.0]


def test_gaussian_convergence_serialization():
    table = gaussian_convergence(1.0, (4.0, 8.0), (0.0, 1.0))
    d = table.to_json_dict()
    assert d["amplitude_bound"] == 1.0
    assert len(d["rows"]) == 2
    rows = table.csv_rows()
    assert rows[0][0] == 4.0


# -- closure --------------------------------------------------------------------------------

def test_closure_report_verdicts():
    rep = closure_report(["banded", "von_mises", "linear3"], trials=20)
    assert isinstance(rep, ClosureReport)
    got = {(r.family, r.operation): r.verdict for r in rep.rows}
    assert got[("banded", "product")] == "closed"
    assert got[("banded", "sum")] == "closed"
    assert got[("von_mises", "product")] == "closed"
    assert got[("von_mises", "sum")] == "open"
    assert got[("linear3", "product")] == "open"
    assert got[("linear3", "sum")] == "closed"


def test_closure_report_unknown_family():
    with pytest.raises(SensorDataError) as err:
        closure_report(["mystery"], trials=5)
    assert "banded" in str(err.value)


def test_closure_report_json():
    rep = closure_report(["banded"], trials=5)
    d = rep.to_json_dict()
    assert d["trials"] == 5
    assert len(d["rows"]) == 2
    assert {"family", "operation", "max_residual", "median_residual", "verdict"} <= set(
        d["rows"][0])
