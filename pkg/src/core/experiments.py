"""
src/core/experiments.py

Operating-point evaluation, beam-splitter transmissivity optimization, and
the grid drivers behind the CLI: key-rate sweeps, log-negativity scans,
maximum-distance / maximum-noise frontiers and squeezing crossovers.

Every search here is deterministic: fixed scan grids, golden-section
refinement, and bisection. Parallel sweeps merge results in grid order.
"""

from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, replace
from itertools import product
from typing import Callable, Dict, Iterable, List, Optional, Sequence
import logging
import math

import numpy as np
from tqdm import tqdm

from src.core.analytic_states import StateKind, coeffs, from_db
from src.core.exceptions import DomainError, NumericalError, SimulationError
from src.core.gaussian_core import apply_channel, channel_params, prepared_cov, swap
from src.core.security import log_negativity, security_report
from src.schemas.data_models import (
    FrontierPoint,
    LogNegPoint,
    OptimizationResult,
    SecurityReport,
    SweepCell,
    SweepConfig,
    SweepResult,
)
from src.utils.config_manager import SimulationSettings

logger = logging.getLogger("cvmdi_qkd")

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0
DISTANCE_START_KM = 10.0
NOISE_START = 0.01


@dataclass(frozen=True)
class ExperimentOptions:
    """Numerical knobs shared by every search; physical inputs are passed explicitly."""
    alpha: float = 0.2
    bob_r_db: Optional[float] = None
    cutoff: Optional[int] = None
    t_min: float = 0.01
    t_max: float = 0.999
    t_scan_points: int = 60
    t_tolerance: float = 1e-4
    distance_resolution_km: float = 0.1
    max_distance_km: float = 400.0
    noise_resolution: float = 1e-5
    max_noise: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.t_min < self.t_max < 1.0:
            raise DomainError(f"T search domain [{self.t_min}, {self.t_max}] must lie inside (0, 1)")
        if self.t_scan_points < 50:
            raise DomainError(f"coarse scan needs at least 50 points, got {self.t_scan_points}")

    @classmethod
    def from_settings(cls, sim: SimulationSettings) -> "ExperimentOptions":
        return cls(
            alpha=sim.alpha_db_per_km,
            bob_r_db=sim.bob_r_db,
            cutoff=sim.initial_cutoff,
            t_min=sim.t_min,
            t_max=sim.t_max,
            t_scan_points=sim.t_scan_points,
            t_tolerance=sim.t_tolerance,
            distance_resolution_km=sim.distance_resolution_km,
            max_distance_km=sim.max_distance_km,
            noise_resolution=sim.noise_resolution,
            max_noise=sim.max_noise,
        )


DEFAULT_OPTIONS = ExperimentOptions()


def skr_point(kind: "StateKind | str", r_db: float, T: Optional[float], L: float,
              xi_total: float, gamma: float = 0.95, *,
              options: ExperimentOptions = DEFAULT_OPTIONS) -> SecurityReport:
    """
    Key rate at one operating point: Schmidt coefficients -> covariances ->
    lossy channel -> entanglement swap -> security quantities.
    T is ignored for TMSV.
    """
    kind = StateKind.parse(kind)
    alice = coeffs(kind, from_db(r_db), T if kind.heralded else None, options.cutoff)
    bob = from_db(r_db if options.bob_r_db is None else options.bob_r_db)
    prep = prepared_cov(alice, bob.variance)
    lossy = apply_channel(prep, channel_params(L, xi_total, options.alpha))
    return security_report(swap(lossy), alice.success_prob, gamma)


def golden_section_max(f: Callable[[float], float], a: float, b: float,
                       tol: float = 1e-4) -> float:
    """
    Golden-section search for the maximum of a unimodal f on [a, b].

    Returns the best evaluated abscissa (the smaller one on ties) once the
    bracket is narrower than `tol`.
    """
    a, b = min(a, b), max(a, b)
    best_x, best_y = a, f(a)
    right = f(b)
    if right > best_y:
        best_x, best_y = b, right
    if b - a <= tol:
        return best_x

    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    yc, yd = f(c), f(d)
    while b - a > tol:
        for x, y in ((c, yc), (d, yd)):
            if y > best_y or (y == best_y and x < best_x):
                best_x, best_y = x, y
        if yc >= yd:
            b, d, yd = d, c, yc
            c = b - INV_PHI * (b - a)
            yc = f(c)
        else:
            a, c, yc = c, d, yd
            d = a + INV_PHI * (b - a)
            yd = f(d)
    for x, y in ((c, yc), (d, yd)):
        if y > best_y or (y == best_y and x < best_x):
            best_x, best_y = x, y
    return best_x


def optimize_T(kind: "StateKind | str", r_db: float, L: float, xi_total: float,
               gamma: float = 0.95, *,
               options: ExperimentOptions = DEFAULT_OPTIONS) -> OptimizationResult:
    """
    Maximize the key rate over the beam-splitter transmissivity.

    A coarse scan over [t_min, t_max] picks the best grid point (smallest T on
    ties); golden-section search then refines inside the neighbouring grid
    cells, and the refined point is kept only if it is strictly better.
    When no scanned point gives a positive rate, the least negative one is
    returned with feasible=False.
    """
    kind = StateKind.parse(kind)
    if not kind.heralded:
        raise DomainError("TMSV has no beam-splitter transmissivity to optimize")

    reports: Dict[float, Optional[SecurityReport]] = {}

    def evaluate(T: float) -> float:
        if T not in reports:
            try:
                reports[T] = skr_point(kind, r_db, T, L, xi_total, gamma, options=options)
            except SimulationError as e:
                logger.debug(f"{kind.label} at T={T:.6f} not evaluable: {e}")
                reports[T] = None
        report = reports[T]
        if report is None or not math.isfinite(report.skr):
            return -math.inf
        return report.skr

    grid = np.linspace(options.t_min, options.t_max, options.t_scan_points)
    values = np.array([evaluate(float(T)) for T in grid])
    if not np.isfinite(values).any():
        raise NumericalError(
            f"{kind.label}: no evaluable transmissivity at r_dB={r_db}, L={L}, xi={xi_total}")

    best = int(np.argmax(values))
    T_star, skr_star = float(grid[best]), float(values[best])
    lo = float(grid[max(best - 1, 0)])
    hi = float(grid[min(best + 1, grid.size - 1)])
    refined = golden_section_max(evaluate, lo, hi, options.t_tolerance)
    if evaluate(refined) > skr_star:
        T_star, skr_star = refined, evaluate(refined)

    result = OptimizationResult(
        T_star=T_star, report=reports[T_star], feasible=skr_star > 0.0,
        evaluations=len(reports))
    logger.debug(
        f"optimize_T {kind.label} r_dB={r_db} L={L} xi={xi_total}: "
        f"T*={T_star:.6f} SKR={skr_star:.6e} ({len(reports)} evaluations)")
    return result


def best_skr(kind: "StateKind | str", r_db: float, L: float, xi_total: float,
             gamma: float = 0.95, *, options: ExperimentOptions = DEFAULT_OPTIONS) -> float:
    """Key rate with T optimized (heralded kinds) or fixed (TMSV); -inf if not evaluable."""
    kind = StateKind.parse(kind)
    try:
        if kind.heralded:
            return optimize_T(kind, r_db, L, xi_total, gamma, options=options).report.skr
        return skr_point(kind, r_db, None, L, xi_total, gamma, options=options).skr
    except SimulationError as e:
        logger.debug(f"{kind.label} not evaluable at r_dB={r_db}, L={L}, xi={xi_total}: {e}")
        return -math.inf


def _largest_feasible(feasible: Callable[[float], bool], start: float,
                      upper: float, resolution: float) -> float:
    """
    Largest x in [0, upper] with feasible(x), assuming feasibility is
    monotone non-increasing in x and feasible(0) holds.
    """
    lo, hi = 0.0, min(start, upper)
    while feasible(hi):
        lo = hi
        if hi >= upper:
            return upper
        hi = min(2.0 * hi, upper)
    while hi - lo > resolution:
        mid = 0.5 * (lo + hi)
        if feasible(mid):
            lo = mid
        else:
            hi = mid
    return lo


def max_distance(kind: "StateKind | str", r_db: float, xi_total: float,
                 gamma: float = 0.95, skr_floor: float = 1e-10, *,
                 options: ExperimentOptions = DEFAULT_OPTIONS) -> float:
    """
    Largest Alice-Charlie distance (km) with optimized SKR ≥ skr_floor,
    bisected to `distance_resolution_km`. Returns 0 when the floor is missed at L = 0.
    """
    def feasible(L: float) -> bool:
        return best_skr(kind, r_db, L, xi_total, gamma, options=options) >= skr_floor

    if not feasible(0.0):
        return 0.0
    return _largest_feasible(feasible, DISTANCE_START_KM, options.max_distance_km,
                             options.distance_resolution_km)


def max_noise(kind: "StateKind | str", r_db: float, L: float,
              gamma: float = 0.95, skr_floor: float = 1e-10, *,
              options: ExperimentOptions = DEFAULT_OPTIONS) -> float:
    """
    Largest total excess noise (SNU) with optimized SKR ≥ skr_floor at distance L,
    bisected to `noise_resolution`. Returns 0 when the floor is missed at ξ = 0.
    """
    def feasible(xi: float) -> bool:
        return best_skr(kind, r_db, L, xi, gamma, options=options) >= skr_floor

    if not feasible(0.0):
        return 0.0
    return _largest_feasible(feasible, NOISE_START, options.max_noise, options.noise_resolution)


def options_for(config: SweepConfig, base: ExperimentOptions = DEFAULT_OPTIONS) -> ExperimentOptions:
    """Search options with the sweep config's T domain, attenuation and Bob squeezing."""
    return replace(base, alpha=config.alpha, bob_r_db=config.bob_r_db,
                   t_min=config.t_min, t_max=config.t_max,
                   t_scan_points=config.t_scan_points, t_tolerance=config.t_tolerance)


def _compute_cell(kind: StateKind, r_db: float, L: float, xi: float, gamma: float,
                  options: ExperimentOptions) -> SweepCell:
    cell = SweepCell(kind=kind.value, r_db=r_db, L=L, xi=xi)
    try:
        if kind.heralded:
            result = optimize_T(kind, r_db, L, xi, gamma, options=options)
            report, cell.T_star, cell.feasible = result.report, result.T_star, result.feasible
        else:
            report = skr_point(kind, r_db, None, L, xi, gamma, options=options)
            cell.feasible = report.skr > 0.0
        cell.skr = report.skr
        cell.success_prob = report.success_prob
        cell.i_ab = report.i_ab
        cell.chi_be = report.chi_be
        cell.v_min = min(report.v1, report.v2, report.v_bar)
    except SimulationError as e:
        cell.error = f"{type(e).__name__}: {e}"
        logger.warning(f"Sweep cell ({kind.label}, r_dB={r_db}, L={L}, xi={xi}) failed: {e}")
    return cell


def _run_ordered(tasks: Sequence[Callable[[], object]], threads: int, desc: str,
                 show_progress: bool) -> List[object]:
    """Run independent tasks, optionally on a thread pool, returning results in task order."""
    results: List[object] = [None] * len(tasks)
    if threads <= 1:
        for i, task in enumerate(tqdm(tasks, desc=desc, disable=not show_progress)):
            results[i] = task()
        return results
    with ThreadPoolExecutor(max_workers=threads) as executor:
        futures_map = {executor.submit(task): i for i, task in enumerate(tasks)}
        for future in tqdm(as_completed(futures_map), total=len(futures_map),
                           desc=desc, disable=not show_progress):
            results[futures_map[future]] = future.result()
    return results


def sweep(config: SweepConfig, *, options: Optional[ExperimentOptions] = None,
          show_progress: bool = False) -> SweepResult:
    """
    Fill every (kind, r_dB, L, ξ) cell, kind-major then r_dB, L, ξ.

    Heralded cells carry the optimized T; TMSV cells are evaluated directly.
    Failing cells record their error and never abort the sweep.
    """
    options = options_for(config, options or DEFAULT_OPTIONS)
    kinds = [StateKind.parse(k) for k in config.kinds]
    keys = list(product(kinds, config.r_db_grid, config.L_grid, config.xi_grid))
    logger.info(f"Starting sweep of {len(keys)} cells on {config.threads} thread(s).")

    tasks = [
        (lambda k=k, r=r, L=L, xi=xi: _compute_cell(k, r, L, xi, config.gamma, options))
        for k, r, L, xi in keys
    ]
    cells = _run_ordered(tasks, config.threads, "Sweep", show_progress)
    failed = sum(1 for c in cells if c.error)
    if failed:
        logger.warning(f"Sweep finished with {failed} failed cell(s) out of {len(cells)}.")
    else:
        logger.info(f"Sweep finished: {len(cells)} cells.")
    return SweepResult(config=config, cells=cells, failed=failed)


def logneg_scan(kinds: Iterable["StateKind | str"], r_db: float, T_grid: Sequence[float], *,
                cutoff: Optional[int] = None) -> Dict[str, List[LogNegPoint]]:
    """
    E_N and heralding probability versus T for each kind; TMSV is a constant
    baseline sampled on the same grid with probability 1.
    """
    sq = from_db(r_db)
    curves: Dict[str, List[LogNegPoint]] = {}
    for kind in (StateKind.parse(k) for k in kinds):
        points = []
        if not kind.heralded:
            baseline = log_negativity(coeffs(kind, sq, None, cutoff))
            points = [LogNegPoint(kind=kind.value, T=float(T), E_N=baseline, success_prob=1.0)
                      for T in T_grid]
        else:
            for T in T_grid:
                state = coeffs(kind, sq, float(T), cutoff)
                points.append(LogNegPoint(kind=kind.value, T=float(T),
                                          E_N=log_negativity(state),
                                          success_prob=state.success_prob))
        curves[kind.value] = points
    return curves


def frontier(kinds: Iterable["StateKind | str"], r_db_grid: Sequence[float], mode: str, *,
             fixed: Optional[float] = None, gamma: float = 0.95, skr_floor: float = 1e-10,
             options: ExperimentOptions = DEFAULT_OPTIONS, threads: int = 1,
             show_progress: bool = False) -> List[FrontierPoint]:
    """
    Maximum distance (mode='distance', ξ held at `fixed`, default 0.004) or maximum
    total excess noise (mode='noise', L held at `fixed`, default 25 km) per kind
    and squeezing, in kind-major order.
    """
    if mode not in ("distance", "noise"):
        raise DomainError(f"frontier mode must be 'distance' or 'noise', got '{mode}'")
    if fixed is None:
        fixed = 0.004 if mode == "distance" else 25.0
    kinds = [StateKind.parse(k) for k in kinds]
    keys = list(product(kinds, r_db_grid))

    def compute(kind: StateKind, r_db: float) -> FrontierPoint:
        if mode == "distance":
            value = max_distance(kind, r_db, fixed, gamma, skr_floor, options=options)
        else:
            value = max_noise(kind, r_db, fixed, gamma, skr_floor, options=options)
        return FrontierPoint(kind=kind.value, r_db=float(r_db), mode=mode, value=value, fixed=fixed)

    tasks = [(lambda k=k, r=r: compute(k, r)) for k, r in keys]
    return _run_ordered(tasks, threads, f"Frontier ({mode})", show_progress)


def frontier_from_sweep(result: SweepResult, mode: str, skr_floor: float = 1e-10) -> List[FrontierPoint]:
    """
    Grid-resolution frontier read off a sweep: the largest L (mode='distance')
    or ξ (mode='noise') whose cell reaches the floor, per kind and squeezing.
    """
    points = []
    config = result.config
    for kind in config.kinds:
        kind_value = StateKind.parse(kind).value
        for r_db in config.r_db_grid:
            cells = [c for c in result.cells if c.kind == kind_value and c.r_db == r_db]
            ok = [c for c in cells if c.skr is not None and c.skr >= skr_floor]
            axis = (lambda c: c.L) if mode == "distance" else (lambda c: c.xi)
            fixed = config.xi_grid[0] if mode == "distance" else config.L_grid[0]
            points.append(FrontierPoint(kind=kind_value, r_db=r_db, mode=mode,
                                        value=max((axis(c) for c in ok), default=0.0),
                                        fixed=fixed))
    return points


def crossover(points: Sequence[FrontierPoint], leader: "StateKind | str",
              challenger: "StateKind | str") -> Optional[float]:
    """
    Smallest squeezing at which `challenger` strictly exceeds `leader` after
    `leader` had strictly led at some smaller squeezing; None if it never happens.
    """
    leader, challenger = StateKind.parse(leader).value, StateKind.parse(challenger).value
    lead = {p.r_db: p.value for p in points if p.kind == leader}
    chase = {p.r_db: p.value for p in points if p.kind == challenger}
    has_led = False
    for r_db in sorted(set(lead) & set(chase)):
        if lead[r_db] > chase[r_db]:
            has_led = True
        elif has_led and chase[r_db] > lead[r_db]:
            return r_db
    return None
