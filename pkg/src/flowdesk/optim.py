"""Latin hypercube sampling and simulated annealing with box constraints.

The annealer uses Gaussian proposals scaled by 0.3 * range * T/T0, geometric
cooling T_k = T0 * c^k per temperature stage, Metropolis acceptance
exp(-delta/T), and an optional Nelder-Mead polish from the best point. All
evaluated points are hard-clipped to the bounds.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from . import geometry as geo


@dataclass(frozen=True)
class Bounds:
    """Per-dimension (low, high) box."""

    box: tuple  # ((low, high), ...)

    def __post_init__(self):
        box = tuple((float(lo), float(hi)) for lo, hi in self.box)
        object.__setattr__(self, "box", box)
        for lo, hi in box:
            if not lo < hi:
                raise ValueError(f"invalid bounds ({lo}, {hi})")

    @property
    def dim(self) -> int:
        return len(self.box)

    @property
    def low(self) -> np.ndarray:
        return np.array([lo for lo, _ in self.box])

    @property
    def high(self) -> np.ndarray:
        return np.array([hi for _, hi in self.box])

    @property
    def span(self) -> np.ndarray:
        return self.high - self.low

    def clip(self, x: np.ndarray) -> np.ndarray:
        return np.clip(x, self.low, self.high)

    def contains(self, x: np.ndarray) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= self.low) and np.all(x <= self.high))


def latin_hypercube(n: int, bounds: Bounds, seed: int) -> np.ndarray:
    """One sample per axis stratum per dimension; deterministic per seed."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    rng = np.random.default_rng(seed)
    d = bounds.dim
    u = np.empty((n, d))
    for j in range(d):
        # stratified uniforms, then shuffled across strata
        strata = (np.arange(n) + rng.random(n)) / n
        u[:, j] = rng.permutation(strata)
    return bounds.low + u * bounds.span


@dataclass
class TrajectoryStep:
    iteration: int
    point: np.ndarray
    value: float
    accepted: bool
    temperature: float


@dataclass
class OptResult:
    best_point: np.ndarray
    best_value: float
    trajectory: list
    evaluations: int
    stage_acceptance: list = field(default_factory=list)  # (T, accept ratio)

    def trajectory_csv(self, dim_names=("m", "p")) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(["iter", *dim_names, "objective", "accepted", "T"])
        for step in self.trajectory:
            writer.writerow(
                [step.iteration, *[f"{x:.12g}" for x in step.point],
                 f"{step.value:.12g}", int(step.accepted), f"{step.temperature:.6g}"]
            )
        return buf.getvalue()


@dataclass
class AnnealConfig:
    max_iters: int = 2000
    t0: float = 1.0
    cooling: float = 0.95
    moves_per_temp: int = 20
    seed: int = 0
    polish: bool = True
    step_scale: float = 0.3  # proposal sigma = step_scale * range * T/T0
    x0: np.ndarray | None = None


def anneal(objective, bounds: Bounds, config: AnnealConfig | None = None) -> OptResult:
    """Minimize a scalar objective over a box via simulated annealing.

    Non-finite objective values are treated as +inf (proposal rejected). The
    best point ever seen is tracked independently of the current point.
    """
    config = config or AnnealConfig()
    rng = np.random.default_rng(config.seed)
    x = bounds.clip(np.asarray(config.x0, dtype=float)) if config.x0 is not None \
        else bounds.low + 0.5 * bounds.span
    trajectory: list[TrajectoryStep] = []
    evals = 0

    def evaluate(pt, it, accepted, temp):
        nonlocal evals
        val = objective(pt)
        evals += 1
        val = float(val) if np.isfinite(val) else float("inf")
        trajectory.append(TrajectoryStep(it, pt.copy(), val, accepted, temp))
        return val

    f_x = evaluate(x, 0, True, config.t0)
    if not np.isfinite(f_x):
        raise ValueError("objective is non-finite at the initial point")
    best_x, best_f = x.copy(), f_x

    temp = config.t0
    it = 0
    stage_accepts, stage_total = 0, 0
    stage_stats = []
    while it < config.max_iters:
        sigma = config.step_scale * bounds.span * temp / config.t0
        proposal = bounds.clip(x + rng.normal(size=bounds.dim) * sigma)
        it += 1
        f_new = evaluate(proposal, it, False, temp)
        delta = f_new - f_x
        accept = delta <= 0 or rng.random() < np.exp(-delta / max(temp, 1e-300))
        if accept and np.isfinite(f_new):
            x, f_x = proposal, f_new
            trajectory[-1].accepted = True
            stage_accepts += 1
            if f_new < best_f:
                best_x, best_f = proposal.copy(), f_new
        stage_total += 1
        if stage_total >= config.moves_per_temp:
            stage_stats.append((temp, stage_accepts / stage_total))
            temp *= config.cooling
            stage_accepts, stage_total = 0, 0

    if config.polish:
        def clipped(pt):
            nonlocal evals
            pt = bounds.clip(pt)
            val = objective(pt)
            evals += 1
            val = float(val) if np.isfinite(val) else float("inf")
            trajectory.append(
                TrajectoryStep(len(trajectory), pt.copy(), val, False, 0.0)
            )
            return val

        res = minimize(
            clipped, best_x, method="Nelder-Mead",
            bounds=bounds.box, options={"xatol": 1e-8, "fatol": 1e-12},
        )
        if np.isfinite(res.fun) and res.fun < best_f:
            best_x, best_f = bounds.clip(res.x), float(res.fun)

    return OptResult(
        best_point=best_x,
        best_value=best_f,
        trajectory=trajectory,
        evaluations=evals,
        stage_acceptance=stage_stats,
    )


# ---------------------------------------------------------------------------
# airfoil shape optimization
# ---------------------------------------------------------------------------

AIRFOIL_BOUNDS = Bounds(((geo.M_RANGE[0], geo.M_RANGE[1]),
                         (geo.P_RANGE[0], geo.P_RANGE[1])))


@dataclass
class AirfoilOptResult:
    result: OptResult
    snapshots: list  # (iteration, AirfoilProfile) at each new-best event
    best_params: geo.AirfoilParams
    best_ld: float


def ld_objective(evaluator_factory, n_points: int = geo.DEFAULT_N_POINTS):
    """Objective (m, p) -> -L/D through the geometry/B-spline/field chain.

    Any failure (degenerate force, self-intersecting profile) maps to +inf so
    the optimizer simply rejects the move.
    """
    from . import synthflow as sf

    def objective(point):
        m, p = float(point[0]), float(point[1])
        try:
            profile = geo.naca_profile(geo.AirfoilParams(t=geo.DESIGN_T, m=m, p=p),
                                       n_points)
            evaluator = evaluator_factory(profile)
            force = sf.lift_drag(evaluator, profile)
            if force.degenerate or not np.isfinite(force.LD):
                return float("inf")
            return -force.LD
        except (geo.GeometryError, sf.FlowError):
            return float("inf")

    return objective


def optimize_airfoil(evaluator_factory, bounds: Bounds = AIRFOIL_BOUNDS,
                     config: AnnealConfig | None = None, n_lhs: int = 10,
                     progress=None) -> AirfoilOptResult:
    """Steps: LHS seeding, then annealing on -L/D, tracking shape snapshots.

    ``evaluator_factory(profile)`` returns a field evaluator (oracle or
    surrogate based). ``progress(iteration, best_value)`` fires on new-best
    events.
    """
    config = config or AnnealConfig()
    objective = ld_objective(evaluator_factory)
    # Step 1: Latin hypercube over the design box picks the starting point.
    seeds = latin_hypercube(n_lhs, bounds, seed=config.seed)
    seed_vals = [objective(pt) for pt in seeds]
    i_best = int(np.argmin(seed_vals))
    cfg = AnnealConfig(**{**config.__dict__, "x0": seeds[i_best]})

    snapshots = []
    best_seen = float("inf")

    def tracked(point):
        nonlocal best_seen
        val = objective(point)
        if np.isfinite(val) and val < best_seen:
            best_seen = val
            m, p = point
            snapshots.append(
                (len(snapshots), geo.naca_profile(geo.AirfoilParams(t=geo.DESIGN_T, m=m, p=p)))
            )
            if progress is not None:
                progress(len(snapshots), val)
        return val

    result = anneal(tracked, bounds, cfg)
    m, p = result.best_point
    return AirfoilOptResult(
        result=result,
        snapshots=snapshots,
        best_params=geo.AirfoilParams(t=geo.DESIGN_T, m=float(m), p=float(p)),
        best_ld=-result.best_value,
    )


def grid_scan(objective, bounds: Bounds, n: int = 31):
    """Brute-force n x n scan; returns (best_point, best_value, value_grid)."""
    axes = [np.linspace(lo, hi, n) for lo, hi in bounds.box]
    values = np.empty((n, n))
    for i, a in enumerate(axes[0]):
        for j, b in enumerate(axes[1]):
            v = objective(np.array([a, b]))
            values[i, j] = v if np.isfinite(v) else np.inf
    i, j = np.unravel_index(np.argmin(values), values.shape)
    return np.array([axes[0][i], axes[1][j]]), float(values[i, j]), values
