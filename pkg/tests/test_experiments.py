# tests/test_experiments.py
"""
Unit tests for operating-point evaluation, the transmissivity optimizer,
frontier searches and the sweep drivers. Tests marked `slow` replay the
distance and crossover orderings on coarse squeezing grids.
"""

import math
from dataclasses import replace
from unittest.mock import patch

import numpy as np
import pytest

from src.core.analytic_states import StateKind, coeffs, from_db
from src.core.exceptions import DomainError, NumericalError
from src.core.experiments import (
    DEFAULT_OPTIONS,
    ExperimentOptions,
    _largest_feasible,
    crossover,
    frontier,
    frontier_from_sweep,
    golden_section_max,
    logneg_scan,
    max_distance,
    max_noise,
    optimize_T,
    skr_point,
    sweep,
)
from src.schemas.data_models import FrontierPoint, SweepCell, SweepConfig, SweepResult

### Test search helpers ###


def test_golden_section_finds_interior_maximum():
    peak = golden_section_max(lambda x: -(x - 0.3) ** 2, 0.0, 1.0, tol=1e-6)
    assert peak == pytest.approx(0.3, abs=1e-5)


def test_golden_section_returns_endpoint_for_monotone_function():
    assert golden_section_max(lambda x: x, 0.2, 0.4, tol=1e-6) == pytest.approx(0.4, abs=1e-5)


def test_largest_feasible_bisects_to_resolution():
    threshold = 37.23
    found = _largest_feasible(lambda x: x <= threshold, 10.0, 400.0, 0.1)
    assert threshold - 0.1 <= found <= threshold


def test_largest_feasible_caps_at_upper_bound():
    assert _largest_feasible(lambda x: True, 10.0, 400.0, 0.1) == 400.0


def test_experiment_options_validation(settings):
    with pytest.raises(DomainError):
        ExperimentOptions(t_min=0.5, t_max=0.4)
    with pytest.raises(DomainError):
        ExperimentOptions(t_scan_points=10)
    options = ExperimentOptions.from_settings(settings.simulation)
    assert options.t_scan_points == settings.simulation.t_scan_points
    assert options.alpha == settings.simulation.alpha_db_per_km

### Test single operating points ###


@pytest.mark.parametrize("r_db", [1.0, 2.0, 3.0])
def test_tmsv_lossless_point_is_pure(r_db):
    """Zero loss, zero noise: Eve learns nothing and SKR = γ I_AB."""
    report = skr_point(StateKind.TMSV, r_db, None, 0.0, 0.0, 0.95)
    assert abs(report.chi_be) < 1e-9
    assert report.skr == pytest.approx(0.95 * report.i_ab, abs=1e-9)
    assert report.success_prob == 1.0


def test_tmsv_noisy_point_small_positive():
    """1 dB, ξ = 0.004, L = 0: a small positive key survives the noise."""
    report = skr_point(StateKind.TMSV, 1.0, None, 0.0, 0.004, 0.95)
    assert 0.0 < report.skr < 1e-3
    assert report.chi_be > 0.0


@pytest.mark.parametrize("kind, T", [(StateKind.TMSV, None), (StateKind.PAS1, 0.5), (StateKind.PR2, 0.5)])
def test_no_squeezing_no_key(kind, T):
    """r = 0 carries no correlations, so the key rate is exactly zero."""
    report = skr_point(kind, 0.0, T, 0.0, 0.0, 0.95)
    assert report.skr == pytest.approx(0.0, abs=1e-15)


def test_heralded_point_uses_series_probability():
    report = skr_point(StateKind.PAS1, 2.0, 0.7, 10.0, 0.004, 0.95)
    assert report.success_prob == pytest.approx(coeffs(StateKind.PAS1, from_db(2.0), 0.7).success_prob)


def test_tmsv_key_rate_decreases_with_distance_and_noise():
    rates_l = [skr_point(StateKind.TMSV, 2.0, None, L, 0.004).skr for L in (0.0, 1.0, 2.0, 3.0)]
    rates_xi = [skr_point(StateKind.TMSV, 2.0, None, 1.0, xi).skr for xi in (0.0, 0.002, 0.004, 0.008)]
    assert all(b < a for a, b in zip(rates_l, rates_l[1:]))
    assert all(b < a for a, b in zip(rates_xi, rates_xi[1:]))


def test_bob_squeezing_override_changes_rate():
    tied = skr_point(StateKind.TMSV, 1.0, None, 5.0, 0.004)
    fixed_bob = skr_point(StateKind.TMSV, 1.0, None, 5.0, 0.004,
                          options=replace(DEFAULT_OPTIONS, bob_r_db=3.0))
    assert fixed_bob.skr != pytest.approx(tied.skr)

### Test the transmissivity optimizer ###


def test_optimize_T_rejects_tmsv():
    with pytest.raises(DomainError):
        optimize_T(StateKind.TMSV, 1.0, 10.0, 0.004)


def test_optimize_T_deterministic_and_bounded():
    first = optimize_T(StateKind.PAS1, 2.0, 20.0, 0.004)
    second = optimize_T(StateKind.PAS1, 2.0, 20.0, 0.004)
    assert first == second
    assert DEFAULT_OPTIONS.t_min <= first.T_star <= DEFAULT_OPTIONS.t_max
    assert first.evaluations >= DEFAULT_OPTIONS.t_scan_points


@pytest.mark.parametrize("kind", [StateKind.PAS1, StateKind.PAS2, StateKind.PR2])
def test_optimize_T_beats_scan_and_reference_points(kind):
    """The optimum is at least as good as every scanned T and the reference points 0.5, 0.9."""
    result = optimize_T(kind, 1.0, 5.0, 0.004)
    grid = np.linspace(DEFAULT_OPTIONS.t_min, DEFAULT_OPTIONS.t_max, DEFAULT_OPTIONS.t_scan_points)
    scanned = max(skr_point(kind, 1.0, float(T), 5.0, 0.004).skr for T in grid)
    assert result.report.skr >= scanned
    for T in (0.5, 0.9):
        assert result.report.skr >= skr_point(kind, 1.0, T, 5.0, 0.004).skr - 1e-12
    assert result.feasible == (result.report.skr > 0.0)


def test_optimize_T_infeasible_far_away():
    """Past the maximum distance the least negative rate comes back flagged infeasible."""
    result = optimize_T(StateKind.PAS1, 1.0, 300.0, 0.004)
    assert not result.feasible
    assert result.report.skr <= 0.0

### Test frontiers ###


@pytest.mark.parametrize("kind", list(StateKind))
def test_max_distance_zero_without_squeezing(kind):
    assert max_distance(kind, 0.0, 0.004) == 0.0


def test_max_distance_non_increasing_in_noise():
    near = max_distance(StateKind.TMSV, 2.0, 0.002)
    far = max_distance(StateKind.TMSV, 2.0, 0.01)
    assert near >= far
    assert near > 0.0


def test_max_noise_non_increasing_in_distance():
    assert max_noise(StateKind.TMSV, 2.0, 2.0) >= max_noise(StateKind.TMSV, 2.0, 10.0)


def test_frontier_rejects_unknown_mode():
    with pytest.raises(DomainError):
        frontier([StateKind.TMSV], [1.0], "time")


def test_frontier_defaults_fixed_parameter():
    points = frontier(["TMSV"], [0.0, 1.0], "noise", options=DEFAULT_OPTIONS)
    assert [p.r_db for p in points] == [0.0, 1.0]
    assert all(p.fixed == 25.0 and p.mode == "noise" for p in points)
    assert points[0].value == 0.0


def _point(kind, r_db, value):
    return FrontierPoint(kind=kind, r_db=r_db, mode="distance", value=value, fixed=0.004)


def test_crossover_detects_overtake():
    points = [
        _point("PAS2", 0.5, 10.0), _point("PAS1", 0.5, 8.0),
        _point("PAS2", 1.0, 12.0), _point("PAS1", 1.0, 11.0),
        _point("PAS2", 1.5, 13.0), _point("PAS1", 1.5, 14.0),
        _point("PAS2", 2.0, 13.5), _point("PAS1", 2.0, 16.0),
    ]
    assert crossover(points, "2PAS", "1PAS") == 1.5


def test_crossover_requires_prior_lead():
    points = [_point("PAS2", 0.5, 1.0), _point("PAS1", 0.5, 2.0),
              _point("PAS2", 1.0, 1.0), _point("PAS1", 1.0, 3.0)]
    assert crossover(points, "PAS2", "PAS1") is None


def test_frontier_from_sweep_reads_largest_feasible_cell():
    config = SweepConfig(kinds=["TMSV"], r_db_grid=[1.0], L_grid=[0.0, 5.0, 10.0], xi_grid=[0.004])
    cells = [
        SweepCell(kind="TMSV", r_db=1.0, L=0.0, xi=0.004, skr=1e-4),
        SweepCell(kind="TMSV", r_db=1.0, L=5.0, xi=0.004, skr=1e-8),
        SweepCell(kind="TMSV", r_db=1.0, L=10.0, xi=0.004, skr=-1e-3),
    ]
    (point,) = frontier_from_sweep(SweepResult(config=config, cells=cells), "distance")
    assert point.value == 5.0
    assert point.fixed == 0.004

### Test sweeps ###


def _small_config(**overrides):
    base = dict(kinds=["TMSV", "PAS1"], r_db_grid=[1.0, 2.0], L_grid=[0.0, 10.0], xi_grid=[0.004])
    base.update(overrides)
    return SweepConfig(**base)


def test_single_cell_sweep_equals_optimizer():
    config = SweepConfig(kinds=["PAS1"], r_db_grid=[2.0], L_grid=[10.0], xi_grid=[0.004])
    (cell,) = sweep(config).cells
    expected = optimize_T(StateKind.PAS1, 2.0, 10.0, 0.004)
    assert cell.skr == expected.report.skr
    assert cell.T_star == expected.T_star
    assert cell.feasible == expected.feasible


def test_sweep_is_deterministic_and_ordered():
    """Identical configs give identical results; threading does not change them or their order."""
    serial = sweep(_small_config())
    again = sweep(_small_config())
    threaded = sweep(_small_config(threads=3))
    assert serial.model_dump() == again.model_dump()
    assert serial.cells == threaded.cells
    assert [(c.kind, c.r_db, c.L) for c in serial.cells[:4]] == [
        ("TMSV", 1.0, 0.0), ("TMSV", 1.0, 10.0), ("TMSV", 2.0, 0.0), ("TMSV", 2.0, 10.0)]
    assert all(c.T_star is None for c in serial.cells if c.kind == "TMSV")
    assert all(c.T_star is not None for c in serial.cells if c.kind == "PAS1")


def test_sweep_records_failed_cells():
    """A failing cell carries its error and the rest of the grid still completes."""
    real = optimize_T

    def flaky(kind, r_db, L, xi, gamma=0.95, **kwargs):
        if L == 10.0:
            raise NumericalError("synthetic failure")
        return real(kind, r_db, L, xi, gamma, **kwargs)

    with patch("src.core.experiments.optimize_T", side_effect=flaky):
        result = sweep(_small_config())
    assert result.failed == 2
    failed = [c for c in result.cells if c.error]
    assert all(c.kind == "PAS1" and c.L == 10.0 and c.skr is None for c in failed)
    assert "synthetic failure" in failed[0].error


def test_sweep_config_rejects_unsorted_grid():
    with pytest.raises(ValueError):
        _small_config(L_grid=[10.0, 0.0])

@pytest.mark.slow
def test_every_sweep_cell_is_physical():
    """All symplectic eigenvalues stay above 1 - 1e-9 across a mixed distance grid."""
    config = SweepConfig(kinds=["TMSV", "PAS1", "PAS2", "PR2"], r_db_grid=[0.5, 1.0, 2.0, 3.0],
                         L_grid=[0.0, 10.0, 25.0, 50.0], xi_grid=[0.004], threads=2)
    result = sweep(config)
    assert result.failed == 0
    assert all(c.v_min >= 1.0 - 1e-9 for c in result.cells)


@pytest.mark.slow
def test_every_noise_sweep_cell_is_physical():
    config = SweepConfig(kinds=["TMSV", "PAS2", "PR2"], r_db_grid=[1.0, 2.0],
                         L_grid=[25.0], xi_grid=[0.0, 0.004, 0.02, 0.05], threads=2)
    result = sweep(config)
    assert result.failed == 0
    assert all(c.v_min >= 1.0 - 1e-9 for c in result.cells)

### Test log-negativity scans ###


def test_logneg_scan_tmsv_baseline():
    curves = logneg_scan(["TMSV"], 1.0, [0.2, 0.5, 0.8])
    values = [p.E_N for p in curves["TMSV"]]
    assert values == pytest.approx([0.332193] * 3, abs=1e-6)
    assert all(p.success_prob == 1.0 for p in curves["TMSV"])


def test_logneg_orderings_at_one_db():
    """2PAS and 2PR peak at almost the same E_N, both above 1PAS, which beats TMSV."""
    grid = np.linspace(0.01, 0.999, 200)
    curves = logneg_scan(["TMSV", "1PAS", "2PAS", "2PR"], 1.0, grid)
    peak = {kind: max(p.E_N for p in points) for kind, points in curves.items()}
    assert abs(peak["PAS2"] - peak["PR2"]) < 0.1 * peak["PAS2"]
    assert min(peak["PAS2"], peak["PR2"]) > peak["PAS1"] > peak["TMSV"]


def test_logneg_orderings_at_two_db():
    grid = np.linspace(0.01, 0.999, 200)
    curves = logneg_scan(["1PAS", "2PAS"], 2.0, grid)
    assert max(p.E_N for p in curves["PAS2"]) > max(p.E_N for p in curves["PAS1"])


def test_logneg_scan_reports_success_probability():
    (point,) = logneg_scan(["1PAS"], 1.0, [0.6])["PAS1"]
    assert point.success_prob == pytest.approx(coeffs(StateKind.PAS1, from_db(1.0), 0.6).success_prob)
    assert math.isfinite(point.E_N)

### Replica orderings (slow) ###


@pytest.mark.slow
def test_distance_orderings():
    """At 1 dB 2PAS reaches furthest, ahead of 1PAS, which beats TMSV; at 2 dB 1PAS leads both two-photon states."""
    at_one = {k: max_distance(k, 1.0, 0.004) for k in StateKind}
    assert at_one[StateKind.PAS2] > at_one[StateKind.PAS1] > at_one[StateKind.TMSV]
    assert at_one[StateKind.PAS2] > at_one[StateKind.PR2]

    at_two = {k: max_distance(k, 2.0, 0.004) for k in (StateKind.PAS1, StateKind.PAS2, StateKind.PR2)}
    assert at_two[StateKind.PAS1] > at_two[StateKind.PAS2]
    assert at_two[StateKind.PAS1] > at_two[StateKind.PR2]


@pytest.mark.slow
def test_single_photon_overtakes_two_photon_between_one_and_two_db():
    r_grid = [0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0, 2.25, 2.5]
    points = frontier(["PAS1", "PAS2"], r_grid, "distance", fixed=0.004, threads=2)
    r_cross = crossover(points, "PAS2", "PAS1")
    assert r_cross is not None
    assert 1.0 <= r_cross <= 2.0


@pytest.mark.slow
def test_noise_tolerance_crossover_at_25_km():
    r_grid = [0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0, 2.25, 2.5]
    points = frontier(["PAS1", "PAS2"], r_grid, "noise", fixed=25.0, threads=2)
    r_cross = crossover(points, "PAS2", "PAS1")
    assert r_cross is not None
    assert 1.0 <= r_cross <= 2.0


@pytest.mark.parametrize("kind", ["1PAS", "2PAS", "2PR"])
@pytest.mark.parametrize("r_db", [1.0, 2.0])
def test_logneg_curve_is_continuous(kind, r_db):
    """Each midpoint lies within one neighbour step of the chord: no truncation jumps."""
    grid = np.linspace(0.05, 0.95, 226)
    midpoints = (grid[:-1] + grid[1:]) / 2
    curve = np.array([p.E_N for p in logneg_scan([kind], r_db, grid)[StateKind.parse(kind).value]])
    between = np.array([p.E_N for p in logneg_scan([kind], r_db, midpoints)[StateKind.parse(kind).value]])
    steps = np.abs(np.diff(curve))
    chord = (curve[:-1] + curve[1:]) / 2
    assert np.all(np.abs(between - chord) <= steps + 1e-4)


@pytest.mark.slow
@pytest.mark.parametrize("kind", [StateKind.PAS1, StateKind.PAS2, StateKind.PR2])
def test_heralded_key_rate_non_increasing_in_distance_and_noise(kind):
    """At the optimized T the key rate never grows with distance or excess noise."""
    rates_l = [optimize_T(kind, 1.0, L, 0.004).report.skr for L in (0.0, 5.0, 10.0, 20.0)]
    rates_xi = [optimize_T(kind, 1.0, 5.0, xi).report.skr for xi in (0.0, 0.002, 0.004, 0.008)]
    assert all(b <= a + 1e-12 for a, b in zip(rates_l, rates_l[1:]))
    assert all(b <= a + 1e-12 for a, b in zip(rates_xi, rates_xi[1:]))
