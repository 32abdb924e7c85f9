"""Synthetic flow oracle, surrogate training data, and surface force integration.

The closed-form oracle stands in for CFD training data: every downstream
number (fields, gradients, lift, drag) can be recomputed independently, so
surrogate accuracy and force integration carry brute-force checks.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from . import autodiff as ad
from . import geometry as geo
from . import neural as nn
from .geometry import ANALYSIS_BOX, DESIGN_T, M_RANGE, P_RANGE, AirfoilProfile

LENGTH_SCALE = 0.1       # decay length of the near-surface deficit
MU_DEFAULT = 0.01        # 1/Re at Re = 100
SURFACE_OFFSET = 1e-3    # evaluation offset along the outward normal
FIELDS = ("u", "v", "p_f")

FD_H_ORACLE = 1e-6       # step for oracle velocity gradients


class FlowError(ValueError):
    pass


@dataclass
class FlowSample:
    point: tuple
    u: float
    v: float
    p_f: float


@dataclass
class ForceResult:
    """Surface-integrated forces; LD flagged degenerate when |D| ~ 0."""

    L: float
    D: float
    LD: float
    degenerate: bool
    per_segment: dict = field(default_factory=dict)


def _min_sq_dist(profile: AirfoilProfile, pts: np.ndarray) -> np.ndarray:
    cloud = np.vstack([profile.upper, profile.lower])
    d, _ = cKDTree(cloud).query(pts)
    return d * d


def flow_arrays(profile: AirfoilProfile, pts: np.ndarray):
    """Vectorized oracle fields (u, v, p_f) at a batch of points."""
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    r2 = _min_sq_dist(profile, pts)
    decay = np.exp(-r2 / LENGTH_SCALE**2)
    x_t = np.clip(pts[:, 0], 0.0, 1.0)
    m, p = profile.params.m, profile.params.p
    u = 1.0 - decay
    v = 2.0 * m * np.sin(np.pi * x_t) * np.sign(pts[:, 1]) * decay + 0.5 * (p - 0.35)
    p_f = (1.0 - u**2 - v**2) / 2.0
    return u, v, p_f


def synthetic_flow(profile: AirfoilProfile, point) -> FlowSample:
    """Closed-form flow state at one point of the analysis box exterior."""
    x, y = float(point[0]), float(point[1])
    xmin, xmax, ymin, ymax = ANALYSIS_BOX
    if not (xmin <= x <= xmax and ymin <= y <= ymax):
        raise FlowError(f"point {(x, y)} outside analysis box {ANALYSIS_BOX}")
    if bool(geo.point_in_polygon(np.array([[x, y]]), profile.closed_polygon())[0]):
        raise FlowError(f"point {(x, y)} lies inside the profile")
    u, v, p_f = flow_arrays(profile, np.array([[x, y]]))
    return FlowSample(point=(x, y), u=float(u[0]), v=float(v[0]), p_f=float(p_f[0]))


class OracleFlowEvaluator:
    """Field evaluator backed by the closed-form oracle; FD velocity gradients."""

    def __init__(self, profile: AirfoilProfile, h: float = FD_H_ORACLE):
        self.profile = profile
        self.h = h

    def fields(self, pts: np.ndarray):
        return flow_arrays(self.profile, pts)

    def velocity_gradients(self, pts: np.ndarray) -> np.ndarray:
        """(n, 4) array of (u_x, u_y, v_x, v_y) by central differences."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        h = self.h
        ux_p, vx_p, _ = flow_arrays(self.profile, pts + [h, 0.0])
        ux_m, vx_m, _ = flow_arrays(self.profile, pts - [h, 0.0])
        uy_p, vy_p, _ = flow_arrays(self.profile, pts + [0.0, h])
        uy_m, vy_m, _ = flow_arrays(self.profile, pts - [0.0, h])
        return np.column_stack([
            (ux_p - ux_m) / (2 * h),
            (uy_p - uy_m) / (2 * h),
            (vx_p - vx_m) / (2 * h),
            (vy_p - vy_m) / (2 * h),
        ])


# ---------------------------------------------------------------------------
# dataset generation and surrogate training
# ---------------------------------------------------------------------------

@dataclass
class FlowGeometrySample:
    """One geometry: branch encoding, exterior query points, and oracle targets."""

    params: geo.AirfoilParams
    branch_input: np.ndarray  # (2 * n_ctrl,)
    queries: np.ndarray       # (q, 2)
    targets: dict             # field -> (q,)


def generate_dataset(n_geometries: int, n_queries: int, seed: int,
                     n_ctrl: int = geo.DEFAULT_N_CTRL) -> list:
    """Latin-hypercube sweep of the (p, m) design box with oracle targets."""
    if n_geometries < 2:
        raise FlowError("need at least 2 geometries")
    from .optim import Bounds, latin_hypercube

    box = Bounds(((P_RANGE[0], P_RANGE[1]), (M_RANGE[0], M_RANGE[1])))
    points = latin_hypercube(n_geometries, box, seed=seed)
    samples = []
    for i, (p, m) in enumerate(points):
        params = geo.AirfoilParams(t=DESIGN_T, m=m, p=p)
        profile = geo.naca_profile(params)
        spec = geo.DomainSpec(kind="airfoil_exterior_box", profile=profile)
        queries = geo.sample_domain(spec, n_queries, seed=seed + 1000 + i)
        u, v, p_f = flow_arrays(profile, queries)
        samples.append(
            FlowGeometrySample(
                params=params,
                branch_input=geo.branch_input(profile, n_ctrl=n_ctrl),
                queries=queries,
                targets={"u": u, "v": v, "p_f": p_f},
            )
        )
    return samples


def field_samples(dataset: list, field_name: str) -> list:
    """View a geometry dataset as OperatorSamples for one output field."""
    return [
        nn.OperatorSample(
            u_sensors=s.branch_input, queries=s.queries, targets=s.targets[field_name]
        )
        for s in dataset
    ]


@dataclass
class SurrogateTrainConfig:
    n_geometries: int = 40
    n_heldout: int = 8
    n_queries: int = 64
    seed: int = 0
    epochs: int = 2000
    lr: float = 2e-3
    lr_decay: float = 0.9988
    batch: int = 4
    latent_dim: int = 64
    branch_hidden: tuple = (64,)
    trunk_hidden: tuple = (64, 64)
    init: str = "fan_in"
    multi_head: bool = False  # one model for all three fields
    history_every: int = 20


@dataclass
class SurrogateFieldSet:
    """Trained per-field operator models plus held-out error metrics."""

    models: dict               # field -> DeepONetModel
    metrics: dict              # field -> held-out relative L2
    histories: dict            # field -> LossHistory
    config: SurrogateTrainConfig


def heldout_rel_l2(model: nn.DeepONetModel, samples: list) -> float:
    num = den = 0.0
    for s in samples:
        pred = nn.deeponet_eval(model, s.u_sensors, s.queries)
        num += np.sum((pred - s.targets) ** 2)
        den += np.sum(s.targets**2)
    return float(np.sqrt(num / den))


def train_surrogate(config: SurrogateTrainConfig, progress=None) -> SurrogateFieldSet:
    """Train one operator model per flow field on oracle data.

    ``progress(field, epoch, loss)`` fires from the training thread.
    """
    train_set = generate_dataset(config.n_geometries, config.n_queries, seed=config.seed)
    heldout_set = generate_dataset(
        config.n_heldout, 4 * config.n_queries, seed=config.seed + 7919
    )
    op_config = nn.OperatorTrainConfig(
        epochs=config.epochs,
        lr=config.lr,
        lr_decay=config.lr_decay,
        batch=config.batch,
        seed=config.seed,
        latent_dim=config.latent_dim,
        branch_hidden=config.branch_hidden,
        trunk_hidden=config.trunk_hidden,
        init=config.init,
        history_every=config.history_every,
    )
    models, metrics, histories = {}, {}, {}
    for field_name in FIELDS:
        cb = None
        if progress is not None:
            cb = lambda e, l, _m, f=field_name: progress(f, e, l)
        model, history = nn.train_deeponet(
            field_samples(train_set, field_name), op_config, callback=cb
        )
        model.sensor_layout = {"kind": "bspline_control_points",
                               "n_ctrl": geo.DEFAULT_N_CTRL}
        models[field_name] = model
        histories[field_name] = history
        metrics[field_name] = heldout_rel_l2(model, field_samples(heldout_set, field_name))
    return SurrogateFieldSet(models=models, metrics=metrics, histories=histories,
                             config=config)


class SurrogateFlowEvaluator:
    """Field evaluator backed by trained operator models for one geometry."""

    def __init__(self, models: dict, branch_input: np.ndarray):
        self.models = models
        self.branch_input = np.asarray(branch_input, dtype=float)

    @classmethod
    def for_profile(cls, models: dict, profile: AirfoilProfile):
        return cls(models, geo.branch_input(profile))

    def fields(self, pts: np.ndarray):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        return tuple(
            nn.deeponet_eval(self.models[f], self.branch_input, pts) for f in FIELDS
        )

    def velocity_gradients(self, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        grads = flow_gradients(self.models, self.branch_input, pts)
        return np.column_stack([grads["u_x"], grads["u_y"], grads["v_x"], grads["v_y"]])


def flow_gradients(models: dict, branch_input: np.ndarray, pts: np.ndarray) -> dict:
    """Spatial derivatives of the surrogate velocity fields via trunk jets."""
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    out = {}
    for field_name in ("u", "v"):
        model = models[field_name]

        def net(_params, xy, model=model):
            return nn.deeponet_eval(model, branch_input, xy)

        jet = ad.spatial_jet_batch(net, None, pts)
        out[f"{field_name}_x"] = jet.d1[..., 0]
        out[f"{field_name}_y"] = jet.d1[..., 1]
    return out


# ---------------------------------------------------------------------------
# force integration
# ---------------------------------------------------------------------------

def normal_velocity_derivative(grads, theta):
    """dU/dn = (v_y - u_x) sin(t)cos(t) - v_x sin^2(t) + u_y cos^2(t)."""
    u_x, u_y, v_x, v_y = (np.asarray(grads[k], dtype=float)
                          for k in ("u_x", "u_y", "v_x", "v_y"))
    s, c = np.sin(theta), np.cos(theta)
    return (v_y - u_x) * s * c - v_x * s**2 + u_y * c**2


def wall_shear(grads, n_hat, mu: float):
    """Traction mu * (grad u + grad u^T) . n_hat for a single point or batch."""
    n_hat = np.asarray(n_hat, dtype=float)
    norms = np.linalg.norm(n_hat, axis=-1)
    if np.any(np.abs(norms - 1.0) > 1e-9):
        raise FlowError("normals must be unit length")
    u_x, u_y, v_x, v_y = (np.asarray(grads[k], dtype=float)
                          for k in ("u_x", "u_y", "v_x", "v_y"))
    sxx = 2.0 * u_x
    sxy = u_y + v_x
    syy = 2.0 * v_y
    n_hat = np.atleast_2d(n_hat)
    tx = mu * (sxx * n_hat[..., 0] + sxy * n_hat[..., 1])
    ty = mu * (sxy * n_hat[..., 0] + syy * n_hat[..., 1])
    return np.stack([tx, ty], axis=-1)


def lift_drag(evaluator, profile_or_frames, mu: float = MU_DEFAULT,
              offset: float = SURFACE_OFFSET) -> ForceResult:
    """Discrete surface integral of pressure and tangential shear forces.

    x-force is drag D, y-force is lift L. The evaluator is queried at segment
    midpoints displaced by ``offset`` along the outward normal.
    """
    if isinstance(profile_or_frames, geo.SurfaceFrames):
        fr = profile_or_frames
    else:
        fr = geo.surface_frames(profile_or_frames)
    pts = fr.midpoints + offset * fr.normals
    _, _, p_f = evaluator.fields(pts)
    gv = evaluator.velocity_gradients(pts)
    grads = {"u_x": gv[:, 0], "u_y": gv[:, 1], "v_x": gv[:, 2], "v_y": gv[:, 3]}
    traction = wall_shear(grads, fr.normals, mu)
    tau_t = (traction * fr.tangents).sum(axis=1)  # tangential shear magnitude
    pressure_x = p_f * fr.normals[:, 0] * fr.ds
    pressure_y = p_f * fr.normals[:, 1] * fr.ds
    shear_x = tau_t * fr.tangents[:, 0] * fr.ds
    shear_y = tau_t * fr.tangents[:, 1] * fr.ds
    D = float(pressure_x.sum() + shear_x.sum())
    L = float(pressure_y.sum() + shear_y.sum())
    degenerate = abs(D) <= 1e-12
    return ForceResult(
        L=L,
        D=D,
        LD=(L / D) if not degenerate else float("nan"),
        degenerate=degenerate,
        per_segment={
            "pressure_x": pressure_x, "pressure_y": pressure_y,
            "shear_x": shear_x, "shear_y": shear_y,
        },
    )


# ---------------------------------------------------------------------------
# field grids for plotting / export
# ---------------------------------------------------------------------------

def field_grid(evaluator, field_name: str, bounds=ANALYSIS_BOX, nx: int = 96,
               ny: int = 96, mask_profile: AirfoilProfile | None = None) -> dict:
    """Sample one field on a lattice; interior-of-profile cells become None."""
    if field_name not in FIELDS:
        raise FlowError(f"unknown field {field_name!r}, expected one of {FIELDS}")
    xmin, xmax, ymin, ymax = bounds
    xs = np.linspace(xmin, xmax, nx)
    ys = np.linspace(ymin, ymax, ny)
    xx, yy = np.meshgrid(xs, ys)
    pts = np.column_stack([xx.ravel(), yy.ravel()])
    values = np.asarray(evaluator.fields(pts)[FIELDS.index(field_name)], dtype=float)
    grid = values.reshape(ny, nx)
    mask = None
    if mask_profile is not None:
        inside = geo.point_in_polygon(pts, mask_profile.closed_polygon())
        mask = inside.reshape(ny, nx)
        grid = grid.copy()
        grid[mask] = np.nan
    rows = [[None if np.isnan(v) else float(v) for v in row] for row in grid]
    return {
        "nx": nx,
        "ny": ny,
        "bounds": list(bounds),
        "field": field_name,
        "values": rows,
    }


def grid_to_json(grid: dict) -> str:
    return json.dumps(grid)


def grid_values(grid: dict) -> np.ndarray:
    """Dense array view of an exported grid; None -> NaN."""
    return np.array(
        [[np.nan if v is None else v for v in row] for row in grid["values"]],
        dtype=float,
    )
