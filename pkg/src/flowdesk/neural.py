"""Dense tanh MLPs, Adam, and the branch/trunk operator network.

All parameters live in flat :class:`~flowdesk.autodiff.ParamVector` storage so
the same forward code serves plain evaluation, tape gradients, and spatial
jets.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import ParamVector, Var


class TrainingDiverged(RuntimeError):
    def __init__(self, message, history=None):
        super().__init__(message)
        self.history = history


@dataclass(frozen=True)
class MlpSpec:
    """Layer widths of a fully connected net; tanh hidden, identity output."""

    layer_widths: tuple

    def __post_init__(self):
        widths = tuple(int(w) for w in self.layer_widths)
        object.__setattr__(self, "layer_widths", widths)
        if len(widths) < 2:
            raise ValueError("an MLP needs at least input and output layers")
        if any(w < 1 for w in widths):
            raise ValueError("layer widths must be >= 1")

    @property
    def in_dim(self) -> int:
        return self.layer_widths[0]

    @property
    def out_dim(self) -> int:
        return self.layer_widths[-1]

    def param_count(self) -> int:
        ws = self.layer_widths
        return sum(ws[i] * ws[i + 1] + ws[i + 1] for i in range(len(ws) - 1))

    def layout(self, prefix: str = "") -> tuple:
        entries, off = [], 0
        ws = self.layer_widths
        for i in range(len(ws) - 1):
            entries.append((f"{prefix}W{i}", off, (ws[i], ws[i + 1])))
            off += ws[i] * ws[i + 1]
            entries.append((f"{prefix}b{i}", off, (ws[i + 1],)))
            off += ws[i + 1]
        return tuple(entries)


def init_mlp(spec: MlpSpec, seed: int) -> ParamVector:
    """Glorot-uniform weights, zero biases; deterministic per seed."""
    rng = np.random.default_rng(seed)
    chunks = []
    ws = spec.layer_widths
    for i in range(len(ws) - 1):
        fan_in, fan_out = ws[i], ws[i + 1]
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        chunks.append(rng.uniform(-bound, bound, size=fan_in * fan_out))
        chunks.append(np.zeros(fan_out))
    return ParamVector(values=np.concatenate(chunks), layout=spec.layout())


def init_mlp_fan_in(spec: MlpSpec, seed: int) -> ParamVector:
    """U(+-1/sqrt(fan_in)) for weights and biases.

    Nonzero biases spread the tanh activation knees across the input range,
    which measurably speeds up training of low-dimensional trunk nets; the
    zero-bias Glorot scheme leaves every first-layer unit pinned to 0 at the
    origin.
    """
    rng = np.random.default_rng(seed)
    chunks = []
    ws = spec.layer_widths
    for i in range(len(ws) - 1):
        fan_in, fan_out = ws[i], ws[i + 1]
        bound = 1.0 / np.sqrt(fan_in)
        chunks.append(rng.uniform(-bound, bound, size=fan_in * fan_out))
        chunks.append(rng.uniform(-bound, bound, size=fan_out))
    return ParamVector(values=np.concatenate(chunks), layout=spec.layout())


_INIT_SCHEMES = {"glorot": init_mlp, "fan_in": init_mlp_fan_in}


def _unpack(spec: MlpSpec, theta):
    """Yield (W, b) pairs as views/slices of a flat vector (ndarray or Var)."""
    off = 0
    ws = spec.layer_widths
    for i in range(len(ws) - 1):
        n_w = ws[i] * ws[i + 1]
        W = ad.reshape(theta[off : off + n_w], (ws[i], ws[i + 1]))
        off += n_w
        b = theta[off : off + ws[i + 1]]
        off += ws[i + 1]
        yield W, b


def mlp_forward(spec: MlpSpec, params, x):
    """Forward pass; ``x`` may be an ndarray, a Var, or a Jet2 batch of rows.

    ``params`` is a ParamVector, a flat ndarray, or a Var slice of one.
    """
    theta = params.values if isinstance(params, ParamVector) else params
    if isinstance(theta, np.ndarray) and isinstance(x, np.ndarray):
        # fast numeric path, no tape
        h = x
        layers = list(_unpack(spec, theta))
        for i, (W, b) in enumerate(layers):
            h = h @ W + b
            if i < len(layers) - 1:
                h = np.tanh(h)
        return h
    h = x
    layers = list(_unpack(spec, theta))
    for i, (W, b) in enumerate(layers):
        h = ad.add(ad.matmul(h, W), b)
        if i < len(layers) - 1:
            h = ad.tanh(h)
    return h


def mlp_net(spec: MlpSpec):
    """Adapter matching the ``spatial_jet(net, params, xy)`` calling convention."""

    def net(params, xy):
        return mlp_forward(spec, params, xy)

    return net


# ---------------------------------------------------------------------------
# Adam
# ---------------------------------------------------------------------------

@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0

    @classmethod
    def zeros(cls, n: int) -> "AdamState":
        return cls(m=np.zeros(n), v=np.zeros(n), t=0)


def adam_step(state: AdamState, params: np.ndarray, grads: np.ndarray, lr: float,
              beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
    """One bias-corrected Adam update; returns (new_params, new_state)."""
    if not np.all(np.isfinite(grads)):
        raise TrainingDiverged("non-finite gradient in adam_step")
    t = state.t + 1
    m = beta1 * state.m + (1 - beta1) * grads
    v = beta2 * state.v + (1 - beta2) * grads * grads
    m_hat = m / (1 - beta1**t)
    v_hat = v / (1 - beta2**t)
    new_params = params - lr * m_hat / (np.sqrt(v_hat) + eps)
    return new_params, AdamState(m=m, v=v, t=t)


# ---------------------------------------------------------------------------
# operator network (branch/trunk)
# ---------------------------------------------------------------------------

@dataclass
class DeepONetModel:
    """Branch/trunk pair sharing a latent width; output is their dot product.

    ``use_bias`` appends a trainable scalar after the dot product (on by
    default). All weights (branch, trunk, bias) live in one flat vector.
    """

    branch_spec: MlpSpec
    trunk_spec: MlpSpec
    latent_dim: int
    params: ParamVector
    use_bias: bool = True
    sensor_layout: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.branch_spec.out_dim != self.latent_dim:
            raise ValueError("branch output width must equal latent_dim")
        if self.trunk_spec.out_dim != self.latent_dim:
            raise ValueError("trunk output width must equal latent_dim")

    @property
    def n_sensors(self) -> int:
        return self.branch_spec.in_dim

    def split(self, theta):
        nb = self.branch_spec.param_count()
        nt = self.trunk_spec.param_count()
        branch = theta[0:nb]
        trunk = theta[nb : nb + nt]
        bias = theta[nb + nt : nb + nt + 1] if self.use_bias else None
        return branch, trunk, bias


def build_deeponet(branch_spec: MlpSpec, trunk_spec: MlpSpec, seed: int,
                   use_bias: bool = True, sensor_layout: dict | None = None,
                   init: str = "glorot") -> DeepONetModel:
    latent = branch_spec.out_dim
    init_fn = _INIT_SCHEMES[init]
    bp = init_fn(branch_spec, seed)
    tp = init_fn(trunk_spec, seed + 1)
    values = [bp.values, tp.values]
    layout = list(branch_spec.layout("branch.")) + [
        (n, o + bp.size, s) for n, o, s in trunk_spec.layout("trunk.")
    ]
    if use_bias:
        layout.append(("bias", bp.size + tp.size, (1,)))
        values.append(np.zeros(1))
    params = ParamVector(values=np.concatenate(values), layout=tuple(layout))
    return DeepONetModel(
        branch_spec=branch_spec,
        trunk_spec=trunk_spec,
        latent_dim=latent,
        params=params,
        use_bias=use_bias,
        sensor_layout=sensor_layout or {},
    )


def deeponet_eval(model: DeepONetModel, u_sensors: np.ndarray, y, theta=None):
    """G(u)(y) = sum_k branch_k(u) * trunk_k(y) (+ bias).

    ``u_sensors`` is one sensor vector; ``y`` is (q, d) query points (a single
    point may be passed as shape (d,)). Returns (q,) values. ``theta``
    optionally substitutes a Var/ndarray for the stored parameters, and ``y``
    may be a Jet2 for spatial differentiation.
    """
    u = np.asarray(u_sensors, dtype=float).reshape(1, -1)
    if u.shape[1] != model.n_sensors:
        raise ValueError(
            f"expected {model.n_sensors} sensor values, got {u.shape[1]}"
        )
    if theta is None:
        theta = model.params.values
    branch_theta, trunk_theta, bias = model.split(theta)
    b_out = mlp_forward(model.branch_spec, branch_theta, u)  # (1, k)
    single = isinstance(y, np.ndarray) and np.asarray(y).ndim == 1
    pts = y
    if isinstance(y, np.ndarray):
        pts = y.reshape(-1, model.trunk_spec.in_dim)
    t_out = mlp_forward(model.trunk_spec, trunk_theta, pts)  # (q, k)
    out = ad.sum_(ad.mul(t_out, b_out), axis=-1)
    if bias is not None:
        out = ad.add(out, bias)
    if single and isinstance(out, np.ndarray):
        return float(out[0])
    return out


@dataclass
class OperatorSample:
    """One input function (at fixed sensors), its query points, and targets."""

    u_sensors: np.ndarray
    queries: np.ndarray  # (q, d)
    targets: np.ndarray  # (q,)

    def __post_init__(self):
        self.u_sensors = np.asarray(self.u_sensors, dtype=float).ravel()
        self.queries = np.atleast_2d(np.asarray(self.queries, dtype=float))
        self.targets = np.asarray(self.targets, dtype=float).ravel()
        if len(self.queries) != len(self.targets):
            raise ValueError("queries and targets must align")


def operator_loss(pred, target, norm: str = "L2", n_samples: int = 1):
    """Dataset loss: sum of |err| or err^2 over all (sample, query) pairs / n.

    Normalization divides by the sample count only, not by the query count.
    """
    if norm not in ("L1", "L2"):
        raise ValueError(f"norm must be 'L1' or 'L2', got {norm!r}")
    tv = np.asarray(target, dtype=float)
    pv = ad.value_of(pred) if isinstance(pred, Var) else np.asarray(pred, dtype=float)
    if pv.size != tv.size:
        raise ValueError(f"pred/target length mismatch: {pv.size} vs {tv.size}")
    diff = ad.sub(pred, target)
    err = ad.abs_(diff) if norm == "L1" else ad.mul(diff, diff)
    return ad.div(ad.sum_(err), float(n_samples))


@dataclass
class LossHistory:
    losses: list = field(default_factory=list)

    def append(self, value: float):
        self.losses.append(float(value))

    @property
    def initial(self) -> float:
        return self.losses[0]

    @property
    def final(self) -> float:
        return self.losses[-1]


@dataclass
class OperatorTrainConfig:
    epochs: int = 200
    lr: float = 1e-3
    lr_decay: float = 1.0  # multiplicative, applied once per epoch
    batch: int = 16
    seed: int = 0
    norm: str = "L2"
    latent_dim: int = 64
    branch_hidden: tuple = (64,)
    trunk_hidden: tuple = (64, 64)
    use_bias: bool = True
    init: str = "glorot"  # or "fan_in"
    history_every: int = 1  # record full-dataset loss every k epochs


def _dataset_loss(model, samples, theta, norm):
    """Eq-style loss over a list of samples: branch rows gathered per query."""
    U = np.stack([s.u_sensors for s in samples])
    pts = np.vstack([s.queries for s in samples])
    targets = np.concatenate([s.targets for s in samples])
    rows = np.repeat(np.arange(len(samples)), [len(s.queries) for s in samples])
    branch_theta, trunk_theta, bias = model.split(theta)
    b_out = mlp_forward(model.branch_spec, branch_theta, U)  # (n, k)
    b_rows = b_out[rows] if isinstance(b_out, np.ndarray) else ad.take(b_out, rows)
    t_out = mlp_forward(model.trunk_spec, trunk_theta, pts)  # (rows, k)
    pred = ad.sum_(ad.mul(b_rows, t_out), axis=-1)
    if bias is not None:
        pred = ad.add(pred, bias)
    return operator_loss(pred, targets, norm=norm, n_samples=len(samples))


def train_deeponet(dataset: list, config: OperatorTrainConfig, callback=None):
    """Adam training of a branch/trunk model on operator samples.

    Returns (model, LossHistory); the history records the full-dataset loss
    once per epoch. ``callback(epoch, loss, model)`` fires after each epoch
    from the training thread. Raises TrainingDiverged on NaN loss, carrying
    the history up to the last finite epoch.
    """
    if not dataset:
        raise ValueError("dataset must be nonempty")
    n_sensors = len(dataset[0].u_sensors)
    query_dim = dataset[0].queries.shape[1]
    if any(len(s.u_sensors) != n_sensors for s in dataset):
        raise ValueError("inconsistent sensor count across dataset")
    branch_spec = MlpSpec((n_sensors, *config.branch_hidden, config.latent_dim))
    trunk_spec = MlpSpec((query_dim, *config.trunk_hidden, config.latent_dim))
    model = build_deeponet(branch_spec, trunk_spec, seed=config.seed,
                           use_bias=config.use_bias, init=config.init)
    rng = np.random.default_rng(config.seed)
    theta = model.params.values
    state = AdamState.zeros(theta.size)
    history = LossHistory()
    pv = model.params

    lr = config.lr
    for epoch in range(config.epochs):
        order = rng.permutation(len(dataset))
        for start in range(0, len(dataset), config.batch):
            batch = [dataset[i] for i in order[start : start + config.batch]]
            loss, g = ad.value_and_grad(
                lambda th: _dataset_loss(model, batch, th, config.norm),
                pv.with_values(theta),
            )
            if not np.isfinite(loss):
                raise TrainingDiverged(
                    f"loss diverged at epoch {epoch}", history=history
                )
            theta, state = adam_step(state, theta, g.values, lr)
        lr *= config.lr_decay
        if epoch % config.history_every == 0 or epoch == config.epochs - 1:
            full = _dataset_loss(model, dataset, theta, config.norm)
            history.append(float(ad.value_of(full)))
            if callback is not None:
                model.params = pv.with_values(theta)
                callback(epoch, history.final, model)

    model.params = pv.with_values(theta)
    return model, history


# ---------------------------------------------------------------------------
# checkpoints
# ---------------------------------------------------------------------------

def save_deeponet(model: DeepONetModel, path: str):
    text = model.params.to_json(
        kind="deeponet",
        branch_widths=list(model.branch_spec.layer_widths),
        trunk_widths=list(model.trunk_spec.layer_widths),
        latent_dim=model.latent_dim,
        use_bias=model.use_bias,
        sensor_layout=model.sensor_layout,
    )
    with open(path, "w") as fh:
        fh.write(text)


def load_deeponet(path: str) -> DeepONetModel:
    with open(path) as fh:
        params, header = ParamVector.from_json(fh.read())
    if header.get("kind") != "deeponet":
        raise ValueError(f"{path} is not a deeponet checkpoint")
    return DeepONetModel(
        branch_spec=MlpSpec(tuple(header["branch_widths"])),
        trunk_spec=MlpSpec(tuple(header["trunk_widths"])),
        latent_dim=header["latent_dim"],
        params=params,
        use_bias=header["use_bias"],
        sensor_layout=header.get("sensor_layout", {}),
    )
