"""Physics-informed solver for the steady lid-driven cavity, plus an FD oracle.

The reference solver uses the streamfunction-vorticity formulation, so its
velocity field is discretely divergence-free by construction; PINN runs are
validated against it along the cavity centerlines.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import eye, kron, diags
from scipy.sparse.linalg import splu

from . import autodiff as ad
from . import geometry as geo
from . import neural as nn
from .autodiff import ParamVector

CORNER_MARGIN = 1e-3  # lid-corner exclusion for boundary sampling

# right triangles with a horizontal lid along y = 1
TRIANGLE_VERTICES = {
    "left": ((0.0, 0.0), (1.0, 1.0), (0.0, 1.0)),
    "right": ((1.0, 0.0), (1.0, 1.0), (0.0, 1.0)),
}


class CavityError(ValueError):
    pass


class CheckpointError(ValueError):
    pass


@dataclass
class CavityProblem:
    domain: str = "square"  # square | triangle
    triangle_orientation: str = "left"
    Re: float = 100.0
    lid_velocity: float = 1.0
    bc_weights: dict = field(default_factory=lambda: {"lid": 10.0, "walls": 10.0})
    n_collocation: int = 5000
    n_boundary: int = 600

    def __post_init__(self):
        if self.domain not in ("square", "triangle"):
            raise CavityError(f"unknown domain {self.domain!r}")
        if self.triangle_orientation not in TRIANGLE_VERTICES:
            raise CavityError(f"unknown orientation {self.triangle_orientation!r}")
        if not self.Re > 0:
            raise CavityError("Re must be positive")

    def gauge_point(self) -> np.ndarray:
        if self.domain == "square":
            return np.array([0.5, 0.5])
        verts = np.array(TRIANGLE_VERTICES[self.triangle_orientation])
        return verts.mean(axis=0)

    def domain_spec(self) -> geo.DomainSpec:
        if self.domain == "square":
            return geo.DomainSpec(kind="unit_square")
        return geo.DomainSpec(
            kind="unit_right_triangle",
            triangle=TRIANGLE_VERTICES[self.triangle_orientation],
        )

    def boundary_segments(self):
        """(group, start, end) wall segments; lid is the y=1 edge."""
        if self.domain == "square":
            return [
                ("lid", (0.0, 1.0), (1.0, 1.0)),
                ("walls", (0.0, 0.0), (0.0, 1.0)),
                ("walls", (1.0, 0.0), (1.0, 1.0)),
                ("walls", (0.0, 0.0), (1.0, 0.0)),
            ]
        a, b, c = TRIANGLE_VERTICES[self.triangle_orientation]
        # vertices ordered so (b, c) is the lid edge at y = 1
        return [("lid", c, b), ("walls", a, b), ("walls", a, c)]


def boundary_points(problem: CavityProblem, seed: int):
    """Seeded boundary samples: group -> (points (n,2), velocity targets (n,2)).

    Samples stay CORNER_MARGIN away from segment ends adjacent to the lid,
    keeping the discontinuous corner velocities out of the loss.
    """
    rng = np.random.default_rng(seed)
    segments = problem.boundary_segments()
    lengths = np.array([np.hypot(e[0] - s[0], e[1] - s[1]) for _, s, e in segments])
    counts = np.maximum(8, (problem.n_boundary * lengths / lengths.sum()).astype(int))
    out = {"lid": [], "walls": []}
    for (group, start, end), count in zip(segments, counts):
        t = rng.random(count)
        lo = CORNER_MARGIN
        t = lo + t * (1 - 2 * lo)
        pts = np.asarray(start) + t[:, None] * (np.asarray(end) - np.asarray(start))
        out[group].append(pts)
    lid = np.vstack(out["lid"])
    walls = np.vstack(out["walls"])
    lid_targets = np.column_stack(
        [np.full(len(lid), problem.lid_velocity), np.zeros(len(lid))]
    )
    return {
        "lid": (lid, lid_targets),
        "walls": (walls, np.zeros_like(walls)),
    }


@dataclass
class PinnModel:
    """(x, y) -> (u, v, p_f) network with a pressure gauge pin."""

    spec: nn.MlpSpec
    params: ParamVector
    gauge_point: np.ndarray

    def __post_init__(self):
        if self.spec.in_dim != 2 or self.spec.out_dim != 3:
            raise CavityError("cavity net must map 2 inputs to 3 outputs")

    def __call__(self, pts: np.ndarray) -> np.ndarray:
        return nn.mlp_forward(self.spec, self.params, np.atleast_2d(pts))

    def velocity(self, pts: np.ndarray) -> np.ndarray:
        return self(pts)[:, :2]


def ns_residual(jet, Re: float):
    """Steady incompressible residuals (r_u, r_v, r_div) from a field jet.

    ``jet`` is either a numeric SpatialJet of the (u, v, p_f) field or a Jet2
    whose components may be on the tape (training path).
    """
    if isinstance(jet, ad.SpatialJet):
        value = np.atleast_2d(jet.value)
        d1 = jet.d1.reshape(value.shape + (2,))
        d2 = jet.d2.reshape(value.shape + (3,))
        u, v = value[:, 0], value[:, 1]
        u_x, u_y = d1[:, 0, 0], d1[:, 0, 1]
        v_x, v_y = d1[:, 1, 0], d1[:, 1, 1]
        p_x, p_y = d1[:, 2, 0], d1[:, 2, 1]
        u_xx, u_yy = d2[:, 0, 0], d2[:, 0, 1]
        v_xx, v_yy = d2[:, 1, 0], d2[:, 1, 1]
        r_u = u * u_x + v * u_y + p_x - (u_xx + u_yy) / Re
        r_v = u * v_x + v * v_y + p_y - (v_xx + v_yy) / Re
        return r_u, r_v, u_x + v_y
    # Jet2 path: slice the three output columns, keep everything on the tape
    cols = [jet[:, i : i + 1] for i in range(3)]
    u, v, p = cols
    inv_re = 1.0 / Re
    r_u = ad.add(
        ad.sub(ad.add(ad.mul(u.f, u.fx), ad.mul(v.f, u.fy)),
               ad.mul(inv_re, ad.add(u.fxx, u.fyy))),
        p.fx,
    )
    r_v = ad.add(
        ad.sub(ad.add(ad.mul(u.f, v.fx), ad.mul(v.f, v.fy)),
               ad.mul(inv_re, ad.add(v.fxx, v.fyy))),
        p.fy,
    )
    r_div = ad.add(u.fx, v.fy)
    return r_u, r_v, r_div


def _mean_sq(x):
    return ad.mean(ad.mul(x, x))


def _loss_terms(spec, theta, problem, colloc, boundary, gauge_point):
    """Loss components on the tape (theta Var) or numerically (theta ndarray).

    Boundary groups and the gauge point share a single fused forward pass;
    the collocation jet skips the (unused) mixed second derivative.
    """
    jet = nn.mlp_forward(spec, theta, ad.jet_seed(colloc, mixed=False))
    r_u, r_v, r_div = ns_residual(jet, problem.Re)
    momentum = ad.add(_mean_sq(r_u), _mean_sq(r_v))
    continuity = _mean_sq(r_div)

    groups = list(boundary.items())
    stacked = np.vstack([pts for _, (pts, _) in groups] + [gauge_point.reshape(1, 2)])
    out = nn.mlp_forward(spec, theta, stacked)
    bc_total = None
    offset = 0
    for group, (pts, targets) in groups:
        rows = slice(offset, offset + len(pts))
        offset += len(pts)
        uv = ad.take(out, (rows, slice(0, 2)))
        term = ad.mul(problem.bc_weights[group], _mean_sq(ad.sub(uv, targets)))
        bc_total = term if bc_total is None else ad.add(bc_total, term)
    p_gauge = ad.take(out, (slice(offset, offset + 1), slice(2, 3)))
    gauge = ad.sum_(ad.mul(p_gauge, p_gauge))
    return momentum, continuity, bc_total, gauge


def pinn_loss(model: PinnModel, problem: CavityProblem, colloc: np.ndarray,
              boundary: dict):
    """Total loss and components for fixed point sets (numeric, not on tape)."""
    if len(np.atleast_2d(colloc)) == 0:
        raise CavityError("empty collocation set")
    momentum, continuity, bc, gauge = _loss_terms(
        model.spec, model.params.values, problem, np.atleast_2d(colloc), boundary,
        model.gauge_point,
    )
    components = {
        "residual_momentum": float(momentum),
        "residual_continuity": float(continuity),
        "boundary": float(bc),
        "gauge": float(gauge),
    }
    total = sum(components.values())
    return total, components


@dataclass
class LossHistory:
    """Per-iteration minibatch loss components plus sparse full-set marks."""

    iterations: list = field(default_factory=list)
    total: list = field(default_factory=list)
    residual_momentum: list = field(default_factory=list)
    residual_continuity: list = field(default_factory=list)
    boundary: list = field(default_factory=list)
    gauge: list = field(default_factory=list)
    full_marks: list = field(default_factory=list)  # (iteration, full total loss)

    def append(self, it, components):
        self.iterations.append(it)
        self.residual_momentum.append(components["residual_momentum"])
        self.residual_continuity.append(components["residual_continuity"])
        self.boundary.append(components["boundary"])
        self.gauge.append(components["gauge"])
        self.total.append(sum(components.values()))


@dataclass
class PinnTrainConfig:
    iters: int = 20000
    lr: float = 2e-3
    lr_decay: float = 0.99985  # per iteration
    widths: tuple = (64, 64, 64, 64)
    seed: int = 0
    resample_every: int = 2000
    batch: int = 512
    init: str = "fan_in"
    full_loss_every: int = 2000


def train_pinn(problem: CavityProblem, config: PinnTrainConfig, progress=None):
    """Adam-trained PINN; collocation pool resampled every ``resample_every``.

    ``progress(iteration, total_loss)`` fires every 100 iterations from the
    training thread. Aborts with TrainingDiverged (history attached) on NaN.
    """
    spec = nn.MlpSpec((2, *config.widths, 3))
    params = nn._INIT_SCHEMES[config.init](spec, config.seed)
    gauge = problem.gauge_point()
    rng = np.random.default_rng(config.seed)
    spec_domain = problem.domain_spec()

    pool_seed = config.seed
    pool = geo.sample_domain(spec_domain, problem.n_collocation, seed=pool_seed)
    boundary = boundary_points(problem, seed=config.seed + 1)

    theta = params.values
    state = nn.AdamState.zeros(theta.size)
    history = LossHistory()
    lr = config.lr
    pv = params

    def full_loss(th):
        model = PinnModel(spec=spec, params=pv.with_values(th), gauge_point=gauge)
        total, _ = pinn_loss(model, problem, pool, boundary)
        return total

    for it in range(config.iters):
        if it > 0 and config.resample_every and it % config.resample_every == 0:
            pool_seed += 100003
            pool = geo.sample_domain(spec_domain, problem.n_collocation, seed=pool_seed)
        take = min(config.batch, len(pool))
        idx = rng.choice(len(pool), take, replace=False)
        batch = pool[idx]
        terms = {}

        def loss_fn(th):
            momentum, continuity, bc, g = _loss_terms(
                spec, th, problem, batch, boundary, gauge
            )
            terms.update(momentum=momentum, continuity=continuity, bc=bc, gauge=g)
            return ad.add(ad.add(momentum, continuity), ad.add(bc, g))

        loss_val, grad = ad.value_and_grad(loss_fn, pv.with_values(theta))
        if not np.isfinite(loss_val):
            raise nn.TrainingDiverged(f"loss diverged at iteration {it}", history=history)
        history.append(it, {
            "residual_momentum": float(ad.value_of(terms["momentum"])),
            "residual_continuity": float(ad.value_of(terms["continuity"])),
            "boundary": float(ad.value_of(terms["bc"])),
            "gauge": float(ad.value_of(terms["gauge"])),
        })
        if it == 10 or (config.full_loss_every and it % config.full_loss_every == 0):
            history.full_marks.append((it, full_loss(theta)))
        theta, state = nn.adam_step(state, theta, grad.values, lr)
        lr *= config.lr_decay
        if progress is not None and it % 100 == 0:
            progress(it, history.total[-1])

    history.full_marks.append((config.iters, full_loss(theta)))
    model = PinnModel(spec=spec, params=pv.with_values(theta), gauge_point=gauge)
    return model, history


# ---------------------------------------------------------------------------
# finite-difference reference (streamfunction-vorticity)
# ---------------------------------------------------------------------------

@dataclass
class CavityReference:
    x: np.ndarray
    y: np.ndarray
    u: np.ndarray      # (n, n), row-major [j, i] = (y_j, x_i)
    v: np.ndarray
    psi: np.ndarray
    omega: np.ndarray
    Re: float
    iterations: int


def _poisson_solver(n: int, h: float):
    """Prefactored 5-point Laplacian on the (n-2)^2 interior, Dirichlet 0."""
    m = n - 2
    main = diags([-4.0] * m, 0) + diags([1.0] * (m - 1), 1) + diags([1.0] * (m - 1), -1)
    lap = kron(eye(m), main) + kron(diags([1.0] * (m - 1), 1)
                                    + diags([1.0] * (m - 1), -1), eye(m))
    return splu(lap.tocsc())


def fd_cavity_reference(Re: float, n_grid: int, tol: float = 1e-7,
                        max_iters: int = 400000, lid_velocity: float = 1.0) -> CavityReference:
    """Pseudo-time streamfunction-vorticity iteration to steady state.

    Converged when the per-step vorticity update infinity-norm falls below
    ``tol``. Velocities come from central differences of the streamfunction,
    so the interior discrete divergence vanishes identically.
    """
    if n_grid < 33:
        raise CavityError("n_grid must be >= 33")
    if Re > 1000:
        raise CavityError("reference solver is validated for Re <= 1000")
    n = n_grid
    h = 1.0 / (n - 1)
    xs = np.linspace(0.0, 1.0, n)
    ys = np.linspace(0.0, 1.0, n)
    psi = np.zeros((n, n))
    omega = np.zeros((n, n))
    solver = _poisson_solver(n, h)
    dt = 0.8 * min(0.25 * h * h * Re, h / max(lid_velocity, 1.0))

    u = np.zeros((n, n))
    v = np.zeros((n, n))
    u[-1, :] = lid_velocity

    it = 0
    while True:
        it += 1
        # wall vorticity (Thom), lid row includes the moving-wall term
        omega[0, :] = -2.0 * psi[1, :] / h**2
        omega[-1, :] = -2.0 * psi[-2, :] / h**2 - 2.0 * lid_velocity / h
        omega[:, 0] = -2.0 * psi[:, 1] / h**2
        omega[:, -1] = -2.0 * psi[:, -2] / h**2

        w = omega
        conv = (
            u[1:-1, 1:-1] * (w[1:-1, 2:] - w[1:-1, :-2])
            + v[1:-1, 1:-1] * (w[2:, 1:-1] - w[:-2, 1:-1])
        ) / (2 * h)
        lap = (
            w[1:-1, 2:] + w[1:-1, :-2] + w[2:, 1:-1] + w[:-2, 1:-1]
            - 4.0 * w[1:-1, 1:-1]
        ) / h**2
        delta = dt * (-conv + lap / Re)
        omega = omega.copy()
        omega[1:-1, 1:-1] += delta

        rhs = (-omega[1:-1, 1:-1] * h * h).ravel()
        psi = psi.copy()
        psi[1:-1, 1:-1] = solver.solve(rhs).reshape(n - 2, n - 2)

        u = np.zeros((n, n))
        v = np.zeros((n, n))
        u[1:-1, 1:-1] = (psi[2:, 1:-1] - psi[:-2, 1:-1]) / (2 * h)
        v[1:-1, 1:-1] = -(psi[1:-1, 2:] - psi[1:-1, :-2]) / (2 * h)
        u[-1, :] = lid_velocity

        update = np.abs(delta).max()
        if update < tol:
            break
        if it >= max_iters:
            raise CavityError(
                f"FD reference failed to converge in {max_iters} iterations "
                f"(last update {update:.3e})"
            )
    return CavityReference(x=xs, y=ys, u=u, v=v, psi=psi, omega=omega, Re=Re,
                           iterations=it)


def reference_centerlines(ref: CavityReference):
    """u along the vertical centerline x=0.5 and v along the horizontal y=0.5."""
    i_mid = (len(ref.x) - 1) // 2
    return {
        "y": ref.y,
        "u_centerline": ref.u[:, i_mid],
        "x": ref.x,
        "v_centerline": ref.v[i_mid, :],
    }


def validate_centerline(model_or_field, ref: CavityReference) -> dict:
    """Compare u(0.5, y) and v(x, 0.5) against the reference grid lines."""
    lines = reference_centerlines(ref)
    if isinstance(model_or_field, CavityReference):
        other = reference_centerlines(model_or_field)
        if len(other["y"]) != len(lines["y"]):
            # restrict to shared grid points (coarse grid nested in fine)
            u_pred = np.interp(lines["y"], other["y"], other["u_centerline"])
            v_pred = np.interp(lines["x"], other["x"], other["v_centerline"])
        else:
            u_pred, v_pred = other["u_centerline"], other["v_centerline"]
    else:
        pts_u = np.column_stack([np.full_like(lines["y"], 0.5), lines["y"]])
        pts_v = np.column_stack([lines["x"], np.full_like(lines["x"], 0.5)])
        out_u = model_or_field(pts_u)
        out_v = model_or_field(pts_v)
        u_pred, v_pred = out_u[:, 0], out_v[:, 1]
    u_err = u_pred - lines["u_centerline"]
    v_err = v_pred - lines["v_centerline"]
    return {
        "max_abs_err": float(np.abs(u_err).max()),
        "l2_err": float(np.sqrt(np.mean(u_err**2))),
        "v_max_abs_err": float(np.abs(v_err).max()),
        "profile": {
            "y": lines["y"].tolist(),
            "u_pred": np.asarray(u_pred).tolist(),
            "u_ref": lines["u_centerline"].tolist(),
        },
    }


def centerline_csv(validation: dict) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["y", "u_pinn", "u_ref"])
    prof = validation["profile"]
    for y, up, ur in zip(prof["y"], prof["u_pred"], prof["u_ref"]):
        writer.writerow([f"{y:.12g}", f"{up:.12g}", f"{ur:.12g}"])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# checkpoints
# ---------------------------------------------------------------------------

def save_params(model: PinnModel, path: str, seed: int | None = None,
                iters: int | None = None, extra: dict | None = None):
    header = {
        "kind": "pinn_cavity",
        "widths": list(model.spec.layer_widths),
        "gauge_point": model.gauge_point.tolist(),
        "seed": seed,
        "iters": iters,
    }
    if extra:
        header.update(extra)
    with open(path, "w") as fh:
        fh.write(model.params.to_json(**header))


def load_params(path: str, expect_widths: tuple | None = None) -> PinnModel:
    try:
        with open(path) as fh:
            params, header = ParamVector.from_json(fh.read())
    except (json.JSONDecodeError, KeyError, ValueError) as exc:
        raise CheckpointError(f"corrupt checkpoint {path}: {exc}") from exc
    if header.get("kind") != "pinn_cavity":
        raise CheckpointError(f"{path} is not a cavity checkpoint")
    widths = tuple(header["widths"])
    if expect_widths is not None and tuple(expect_widths) != widths:
        raise CheckpointError(
            f"checkpoint widths {widths} do not match expected {tuple(expect_widths)}"
        )
    spec = nn.MlpSpec(widths)
    if spec.param_count() != params.size:
        raise CheckpointError("parameter count does not match recorded widths")
    return PinnModel(spec=spec, params=params,
                     gauge_point=np.asarray(header["gauge_point"], dtype=float))


def field_grid(model: PinnModel, field_name: str, problem: CavityProblem,
               n: int = 96) -> dict:
    """PINN field on a lattice over the domain bounding box (outside -> None)."""
    idx = {"u": 0, "v": 1, "p_f": 2}[field_name]
    xs = np.linspace(0, 1, n)
    ys = np.linspace(0, 1, n)
    xx, yy = np.meshgrid(xs, ys)
    pts = np.column_stack([xx.ravel(), yy.ravel()])
    values = model(pts)[:, idx].reshape(n, n)
    if problem.domain == "triangle":
        verts = np.array(TRIANGLE_VERTICES[problem.triangle_orientation])
        inside = geo.point_in_polygon(pts, verts).reshape(n, n)
        values = values.copy()
        values[~inside] = np.nan
    rows = [[None if np.isnan(v) else float(v) for v in row] for row in values]
    return {"nx": n, "ny": n, "bounds": [0.0, 1.0, 0.0, 1.0],
            "field": field_name, "values": rows}


def reference_grid(ref: CavityReference, field_name: str) -> dict:
    arr = {"u": ref.u, "v": ref.v}[field_name]
    return {
        "nx": len(ref.x), "ny": len(ref.y),
        "bounds": [0.0, 1.0, 0.0, 1.0], "field": field_name,
        "values": [[float(v) for v in row] for row in arr],
    }
