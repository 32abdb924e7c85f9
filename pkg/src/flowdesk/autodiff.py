"""Reverse-mode tape autodiff over numpy arrays, plus second-order spatial jets.

Two layers:

* ``Var`` — a node in a dynamically built computation graph. Calling
  :func:`grad` walks the graph in reverse topological order and accumulates
  gradients w.r.t. a flat parameter vector. Graphs are per-evaluation and
  never shared, so independent evaluations are safe to run concurrently.

* ``Jet2`` — truncated second-order Taylor algebra in two input variables
  (value, d/dx, d/dy, d2/dx2, d2/dxdy, d2/dy2). Jet components may be plain
  arrays (fast numeric path) or ``Var`` nodes, in which case the whole jet
  computation is recorded on the tape and remains differentiable w.r.t.
  parameters (reverse over forward).

Math primitives: + - * / power, tanh, exp, log, sqrt, sin, cos, and abs
(subgradient 0 at the kink). Structural ops: matmul, slicing/gather, reshape,
sum, mean.
"""
from __future__ import annotations

import base64
import json
from dataclasses import dataclass
from typing import Any, Callable

import numpy as np


class NonFiniteError(FloatingPointError):
    """Raised when an evaluation produced NaN/inf; names the offending op."""


# ---------------------------------------------------------------------------
# reverse-mode tape
# ---------------------------------------------------------------------------

class Var:
    __slots__ = ("v", "parents", "bwd", "op")

    def __init__(self, value, parents=(), bwd=None, op="leaf"):
        v = value if isinstance(value, np.ndarray) else np.asarray(value, dtype=float)
        if v.dtype != np.float64:
            v = v.astype(np.float64)
        self.v = v
        self.parents = parents
        self.bwd = bwd
        self.op = op

    @property
    def shape(self):
        return self.v.shape

    def __repr__(self):
        return f"Var(op={self.op}, shape={self.v.shape})"

    # operator sugar; all dispatch through the module-level generic ops
    def __add__(self, o):
        return add(self, o)

    __radd__ = __add__

    def __sub__(self, o):
        return sub(self, o)

    def __rsub__(self, o):
        return sub(o, self)

    def __mul__(self, o):
        return mul(self, o)

    __rmul__ = __mul__

    def __truediv__(self, o):
        return div(self, o)

    def __rtruediv__(self, o):
        return div(o, self)

    def __neg__(self):
        return neg(self)

    def __pow__(self, k):
        return power(self, k)

    def __matmul__(self, o):
        return matmul(self, o)

    def __rmatmul__(self, o):
        return matmul(o, self)

    def __getitem__(self, idx):
        return take(self, idx)


def value_of(x) -> np.ndarray:
    """Unwrap Var -> ndarray; pass arrays/scalars through."""
    if isinstance(x, Var):
        return x.v
    return np.asarray(x, dtype=float)


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Reduce a broadcasted gradient back to the operand's shape."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


def _binary(a, b, out_v, da: Callable, db: Callable, op: str) -> Var:
    parents = []
    if isinstance(a, Var):
        parents.append(a)
    if isinstance(b, Var):
        parents.append(b)

    def bwd(g):
        out = []
        if isinstance(a, Var):
            out.append((a, _unbroadcast(da(g), a.v.shape)))
        if isinstance(b, Var):
            out.append((b, _unbroadcast(db(g), b.v.shape)))
        return out

    return Var(out_v, tuple(parents), bwd, op)


def _unary(x: Var, out_v, dx: Callable, op: str) -> Var:
    def bwd(g):
        return [(x, dx(g))]

    return Var(out_v, (x,), bwd, op)


def _is_jet(x) -> bool:
    return isinstance(x, Jet2)


# -- arithmetic --------------------------------------------------------------

def add(a, b):
    if _is_jet(a) or _is_jet(b):
        return _jet_add(a, b)
    if not (isinstance(a, Var) or isinstance(b, Var)):
        return value_of(a) + value_of(b)
    av, bv = value_of(a), value_of(b)
    return _binary(a, b, av + bv, lambda g: g, lambda g: g, "add")


def sub(a, b):
    if _is_jet(a) or _is_jet(b):
        return _jet_add(a, _jet_neg(b))
    if not (isinstance(a, Var) or isinstance(b, Var)):
        return value_of(a) - value_of(b)
    av, bv = value_of(a), value_of(b)
    return _binary(a, b, av - bv, lambda g: g, lambda g: -g, "sub")


def neg(a):
    if _is_jet(a):
        return _jet_neg(a)
    if not isinstance(a, Var):
        return -value_of(a)
    return _unary(a, -a.v, lambda g: -g, "neg")


def mul(a, b):
    if _is_jet(a) or _is_jet(b):
        return _jet_mul(a, b)
    if not (isinstance(a, Var) or isinstance(b, Var)):
        return value_of(a) * value_of(b)
    av, bv = value_of(a), value_of(b)
    return _binary(a, b, av * bv, lambda g: g * bv, lambda g: g * av, "mul")


def div(a, b):
    if _is_jet(a) or _is_jet(b):
        return _jet_mul(a, _jet_recip(b))
    if not (isinstance(a, Var) or isinstance(b, Var)):
        return value_of(a) / value_of(b)
    av, bv = value_of(a), value_of(b)
    return _binary(
        a, b, av / bv, lambda g: g / bv, lambda g: -g * av / (bv * bv), "div"
    )


def power(a, k: float):
    """a**k for a constant exponent."""
    if _is_jet(a):
        return _jet_chain(
            a,
            lambda v: v**k,
            lambda v, f: k * v ** (k - 1),
            lambda v, f: k * (k - 1) * v ** (k - 2),
        )
    if not isinstance(a, Var):
        return value_of(a) ** k
    av = a.v
    return _unary(a, av**k, lambda g: g * k * av ** (k - 1), f"pow{k}")


def matmul(a, b):
    if _is_jet(a):
        return _jet_matmul(a, b)
    if not (isinstance(a, Var) or isinstance(b, Var)):
        return value_of(a) @ value_of(b)
    av, bv = value_of(a), value_of(b)
    return _binary(a, b, av @ bv, lambda g: g @ bv.T, lambda g: av.T @ g, "matmul")


def take(a, idx):
    """Slice / integer-gather; backward scatter-adds into the source."""
    if _is_jet(a):
        return Jet2(*(None if c is None else take(c, idx) for c in a.comps()))
    if not isinstance(a, Var):
        return value_of(a)[idx]
    av = a.v

    def dx(g):
        out = np.zeros_like(av)
        if isinstance(idx, np.ndarray) and idx.dtype.kind in "iu":
            np.add.at(out, idx, g)
        else:
            out[idx] += g
        return out

    return _unary(a, av[idx], dx, "take")


def reshape(a, shape):
    if not isinstance(a, Var):
        return value_of(a).reshape(shape)
    old = a.v.shape
    return _unary(a, a.v.reshape(shape), lambda g: g.reshape(old), "reshape")


def sum_(a, axis=None):
    if _is_jet(a):
        return Jet2(*(None if c is None else sum_(c, axis=axis) for c in a.comps()))
    if not isinstance(a, Var):
        return value_of(a).sum(axis=axis)
    av = a.v

    def dx(g):
        if axis is None:
            return np.broadcast_to(g, av.shape).copy()
        ge = np.expand_dims(g, axis)
        return np.broadcast_to(ge, av.shape).copy()

    return _unary(a, av.sum(axis=axis), dx, "sum")


def mean(a, axis=None):
    size = value_of(a).size if axis is None else value_of(a).shape[axis]
    return div(sum_(a, axis=axis), float(size))


def abs_(a):
    """|a| with subgradient sign(a) (0 at the kink)."""
    if not isinstance(a, Var):
        return np.abs(value_of(a))
    av = a.v
    s = np.sign(av)
    return _unary(a, np.abs(av), lambda g: g * s, "abs")


# -- transcendental ----------------------------------------------------------

def tanh(a):
    if _is_jet(a):
        return _tanh_jet(a)
    if not isinstance(a, Var):
        return np.tanh(value_of(a))
    fv = np.tanh(a.v)
    return _unary(a, fv, lambda g: g * (1.0 - fv * fv), "tanh")


def _tanh_jet(a: Jet2) -> Jet2:
    """Fused tanh chain rule over a jet: one node per component.

    With F = tanh(v), s = F' = 1 - F^2, q = F'' = -2 F s, the outputs are
    F, s*vx, s*vy, q*vx^2 + s*vxx, q*vx*vy + s*vxy, q*vy^2 + s*vyy; the
    hand-written VJPs below avoid a long chain of intermediate tape nodes.
    """
    comps = a.comps()
    on_tape = any(isinstance(c, Var) for c in comps)
    v, vx, vy, vxx, vxy, vyy = (
        c.v if isinstance(c, Var) else c for c in comps
    )
    F = np.tanh(v)
    s = 1.0 - F * F
    q = -2.0 * F * s
    f_out = F
    fx_out = s * vx
    fy_out = s * vy
    fxx_out = q * vx * vx + s * vxx
    fyy_out = q * vy * vy + s * vyy
    fxy_out = None if vxy is None else q * vx * vy + s * vxy
    if not on_tape:
        return Jet2(f_out, fx_out, fy_out, fxx_out, fxy_out, fyy_out)

    dqv = -2.0 * (s * s + F * q)  # dq/dv, shared by the second-order closures
    av, ax, ay, axx, axy, ayy = comps

    def node(value, parents, bwd, op):
        var_parents = tuple(p for p in parents if isinstance(p, Var))
        if not var_parents:
            return value
        return Var(value, var_parents, bwd, op)

    def bwd_f(g):
        return [(av, g * s)] if isinstance(av, Var) else []

    out_f = node(f_out, (av,), bwd_f, "tanh_jet.f")

    def make_d1(grad_src, d_comp):
        def bwd(g):
            out = []
            if isinstance(av, Var):
                out.append((av, g * d_comp * q))
            if isinstance(grad_src, Var):
                out.append((grad_src, g * s))
            return out

        return bwd

    out_fx = node(fx_out, (av, ax), make_d1(ax, vx), "tanh_jet.fx")
    out_fy = node(fy_out, (av, ay), make_d1(ay, vy), "tanh_jet.fy")

    def make_d2(d_first, d_second, dd):
        # output = q * d_first * d_second + s * dd_value
        def bwd(g):
            out = []
            if isinstance(av, Var):
                dd_val = 0.0 if dd is None else (dd.v if isinstance(dd, Var) else dd)
                out.append((av, g * (d_first * d_second * dqv + dd_val * q)))
            return out

        return bwd

    def bwd_fxx(g):
        out = make_d2(vx, vx, axx)(g)
        if isinstance(ax, Var):
            out.append((ax, g * 2.0 * q * vx))
        if isinstance(axx, Var):
            out.append((axx, g * s))
        return out

    out_fxx = node(fxx_out, (av, ax, axx), bwd_fxx, "tanh_jet.fxx")

    def bwd_fyy(g):
        out = make_d2(vy, vy, ayy)(g)
        if isinstance(ay, Var):
            out.append((ay, g * 2.0 * q * vy))
        if isinstance(ayy, Var):
            out.append((ayy, g * s))
        return out

    out_fyy = node(fyy_out, (av, ay, ayy), bwd_fyy, "tanh_jet.fyy")

    out_fxy = None
    if fxy_out is not None:
        def bwd_fxy(g):
            out = make_d2(vx, vy, axy)(g)
            if isinstance(ax, Var):
                out.append((ax, g * q * vy))
            if isinstance(ay, Var):
                out.append((ay, g * q * vx))
            if isinstance(axy, Var):
                out.append((axy, g * s))
            return out

        out_fxy = node(fxy_out, (av, ax, ay, axy), bwd_fxy, "tanh_jet.fxy")

    return Jet2(out_f, out_fx, out_fy, out_fxx, out_fxy, out_fyy)


def exp(a):
    if _is_jet(a):
        f = exp(a.f)
        return _jet_apply(a, f, f, f)
    if not isinstance(a, Var):
        return np.exp(value_of(a))
    fv = np.exp(a.v)
    return _unary(a, fv, lambda g: g * fv, "exp")


def log(a):
    if _is_jet(a):
        return _jet_chain(a, np.log if not isinstance(a.f, Var) else log,
                          lambda v, f: power(v, -1.0), lambda v, f: mul(-1.0, power(v, -2.0)))
    if not isinstance(a, Var):
        return np.log(value_of(a))
    av = a.v
    return _unary(a, np.log(av), lambda g: g / av, "log")


def sqrt(a):
    if _is_jet(a):
        return _jet_chain(
            a,
            lambda v: power(v, 0.5) if isinstance(v, Var) else np.sqrt(v),
            lambda v, f: mul(0.5, power(v, -0.5)),
            lambda v, f: mul(-0.25, power(v, -1.5)),
        )
    if not isinstance(a, Var):
        return np.sqrt(value_of(a))
    fv = np.sqrt(a.v)
    return _unary(a, fv, lambda g: g * 0.5 / fv, "sqrt")


def sin(a):
    if _is_jet(a):
        f = sin(a.f)
        return _jet_apply(a, f, cos(a.f), neg(f))
    if not isinstance(a, Var):
        return np.sin(value_of(a))
    av = a.v
    return _unary(a, np.sin(av), lambda g: g * np.cos(av), "sin")


def cos(a):
    if _is_jet(a):
        f = cos(a.f)
        return _jet_apply(a, f, neg(sin(a.f)), neg(f))
    if not isinstance(a, Var):
        return np.cos(value_of(a))
    av = a.v
    return _unary(a, np.cos(av), lambda g: -g * np.sin(av), "cos")


# ---------------------------------------------------------------------------
# gradient driver
# ---------------------------------------------------------------------------

def _topo(out: Var) -> list[Var]:
    order, seen, stack = [], set(), [(out, False)]
    while stack:
        node, done = stack.pop()
        if done:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node.parents:
            if id(p) not in seen:
                stack.append((p, False))
    return order


def backprop(out: Var) -> dict[int, np.ndarray]:
    """Gradients of ``out`` (summed if non-scalar) w.r.t. every graph node."""
    order = _topo(out)
    if not np.all(np.isfinite(out.v)):
        for node in order:
            if not np.all(np.isfinite(node.v)):
                raise NonFiniteError(f"non-finite value produced by op '{node.op}'")
        raise NonFiniteError("non-finite output")  # pragma: no cover
    grads: dict[int, np.ndarray] = {id(out): np.ones_like(out.v)}
    owned: set[int] = set()  # entries safe to accumulate into in place
    for node in reversed(order):
        g = grads.get(id(node))
        if g is None or node.bwd is None:
            continue
        for parent, pg in node.bwd(g):
            key = id(parent)
            cur = grads.get(key)
            if cur is None:
                grads[key] = pg  # may alias a forward buffer; copy on next add
            elif key in owned and np.shape(cur) == np.shape(pg):
                np.add(cur, pg, out=cur)
            else:
                grads[key] = cur + pg
                owned.add(key)
    return grads


@dataclass(frozen=True)
class ParamVector:
    """Flat parameter storage plus named (offset, shape) slices."""

    values: np.ndarray
    layout: tuple  # ((name, offset, shape), ...)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", vals)
        if not np.all(np.isfinite(vals)):
            raise ValueError("parameter vector contains non-finite values")
        off = 0
        for name, offset, shape in self.layout:
            if offset != off:
                raise ValueError(f"layout slice {name!r} does not start at {off}")
            off += int(np.prod(shape))
        if off != vals.size:
            raise ValueError(f"layout covers {off} values, vector has {vals.size}")

    @property
    def size(self) -> int:
        return self.values.size

    def slice(self, name: str) -> np.ndarray:
        for nm, offset, shape in self.layout:
            if nm == name:
                n = int(np.prod(shape))
                return self.values[offset : offset + n].reshape(shape)
        raise KeyError(name)

    def with_values(self, values: np.ndarray) -> "ParamVector":
        return ParamVector(values=values, layout=self.layout)

    def to_json(self, **header) -> str:
        payload = base64.b64encode(
            np.ascontiguousarray(self.values, dtype="<f8").tobytes()
        ).decode("ascii")
        return json.dumps(
            {
                "layout": [[n, o, list(s)] for n, o, s in self.layout],
                "values_b64": payload,
                **header,
            }
        )

    @classmethod
    def from_json(cls, text: str) -> tuple["ParamVector", dict]:
        obj = json.loads(text)
        raw = base64.b64decode(obj["values_b64"])
        values = np.frombuffer(raw, dtype="<f8").astype(np.float64)
        layout = tuple((n, o, tuple(s)) for n, o, s in obj["layout"])
        header = {k: v for k, v in obj.items() if k not in ("layout", "values_b64")}
        return cls(values=values, layout=layout), header


def value_and_grad(loss_fn: Callable[[Var], Var], params: ParamVector):
    """Evaluate a scalar loss and its gradient w.r.t. the flat parameters."""
    theta = Var(params.values, op="params")
    loss = loss_fn(theta)
    if not isinstance(loss, Var):
        # loss does not touch the parameters at all
        return float(loss), params.with_values(np.zeros_like(params.values))
    if loss.v.size != 1:
        raise ValueError("loss must be scalar")
    grads = backprop(loss)
    g = grads.get(id(theta))
    if g is None:
        g = np.zeros_like(params.values)
    return float(loss.v), params.with_values(g)


def grad(loss_fn: Callable[[Var], Var], params: ParamVector) -> ParamVector:
    """Reverse-mode gradient of a scalar loss w.r.t. a flat parameter vector."""
    return value_and_grad(loss_fn, params)[1]


# ---------------------------------------------------------------------------
# second-order 2D jets
# ---------------------------------------------------------------------------

class Jet2:
    """Value + first/second derivatives w.r.t. two spatial inputs (x, y).

    Components may be ndarrays or Vars; arithmetic composes through the
    generic ops above, so a jet built from Var components stays on the tape.
    A ``None`` mixed component means d2/dxdy is not tracked (cheaper when a
    downstream residual only needs the Laplacian).
    """

    __slots__ = ("f", "fx", "fy", "fxx", "fxy", "fyy")

    def __init__(self, f, fx, fy, fxx, fxy, fyy):
        self.f, self.fx, self.fy = f, fx, fy
        self.fxx, self.fxy, self.fyy = fxx, fxy, fyy

    def comps(self):
        return (self.f, self.fx, self.fy, self.fxx, self.fxy, self.fyy)

    def __add__(self, o):
        return add(self, o)

    __radd__ = __add__

    def __sub__(self, o):
        return sub(self, o)

    def __rsub__(self, o):
        return add(_jet_neg(self), o)

    def __mul__(self, o):
        return mul(self, o)

    __rmul__ = __mul__

    def __truediv__(self, o):
        return div(self, o)

    def __rtruediv__(self, o):
        return div(o, self)

    def __neg__(self):
        return _jet_neg(self)

    def __pow__(self, k):
        return power(self, k)

    def __matmul__(self, o):
        return matmul(self, o)

    def __getitem__(self, idx):
        return take(self, idx)


def _as_jet(x) -> Jet2:
    if isinstance(x, Jet2):
        return x
    return Jet2(x, 0.0, 0.0, 0.0, 0.0, 0.0)


def _jet_neg(a):
    if not isinstance(a, Jet2):
        return neg(a)
    return Jet2(*(None if c is None else neg(c) for c in a.comps()))


def _jet_add(a, b):
    if not isinstance(a, Jet2):
        a, b = b, a
    if not isinstance(b, Jet2):
        # constant w.r.t. (x, y): only the value shifts
        return Jet2(add(a.f, b), a.fx, a.fy, a.fxx, a.fxy, a.fyy)
    return Jet2(*(
        None if ca is None or cb is None else add(ca, cb)
        for ca, cb in zip(a.comps(), b.comps())
    ))


def _jet_mul(a, b):
    if not isinstance(a, Jet2):
        a, b = b, a
    if not isinstance(b, Jet2):
        return Jet2(*(None if c is None else mul(c, b) for c in a.comps()))
    f = mul(a.f, b.f)
    fx = add(mul(a.fx, b.f), mul(a.f, b.fx))
    fy = add(mul(a.fy, b.f), mul(a.f, b.fy))
    fxx = add(add(mul(a.fxx, b.f), mul(2.0, mul(a.fx, b.fx))), mul(a.f, b.fxx))
    fyy = add(add(mul(a.fyy, b.f), mul(2.0, mul(a.fy, b.fy))), mul(a.f, b.fyy))
    if a.fxy is None or b.fxy is None:
        fxy = None
    else:
        fxy = add(
            add(mul(a.fxy, b.f), mul(a.f, b.fxy)),
            add(mul(a.fx, b.fy), mul(a.fy, b.fx)),
        )
    return Jet2(f, fx, fy, fxx, fxy, fyy)


def _jet_apply(a: Jet2, f, d1, d2) -> Jet2:
    """Assemble the chain rule given f(v), f'(v), f''(v) evaluated at v=a.f."""
    fx = mul(d1, a.fx)
    fy = mul(d1, a.fy)
    fxx = add(mul(d2, mul(a.fx, a.fx)), mul(d1, a.fxx))
    fyy = add(mul(d2, mul(a.fy, a.fy)), mul(d1, a.fyy))
    if a.fxy is None:
        fxy = None
    else:
        fxy = add(mul(d2, mul(a.fx, a.fy)), mul(d1, a.fxy))
    return Jet2(f, fx, fy, fxx, fxy, fyy)


def _jet_chain(a: Jet2, f_of, d1_of, d2_of) -> Jet2:
    v = a.f
    return _jet_apply(a, f_of(v), d1_of(v, None), d2_of(v, None))


def _jet_recip(b):
    if not isinstance(b, Jet2):
        return div(1.0, b)
    f = power(b.f, -1.0)
    d1 = neg(mul(f, f))
    d2 = mul(2.0, mul(f, mul(f, f)))
    return _jet_apply(b, f, d1, d2)


def _jet_matmul(a: Jet2, w):
    """Right-multiplication by a matrix that does not depend on (x, y)."""
    if isinstance(w, Jet2):
        raise TypeError("matmul between two jets is not supported")
    return Jet2(*(None if c is None else matmul(c, w) for c in a.comps()))


def jet_seed(points: np.ndarray, mixed: bool = True) -> Jet2:
    """Identity jet for a batch of (x, y) rows: d(row)/dx = [1,0], d/dy = [0,1].

    ``mixed=False`` drops d2/dxdy tracking for cheaper Laplacian-only work.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    n = len(pts)
    zeros = np.zeros((n, 2))
    fx = np.tile([1.0, 0.0], (n, 1))
    fy = np.tile([0.0, 1.0], (n, 1))
    return Jet2(pts, fx, fy, zeros, zeros if mixed else None, zeros)


@dataclass
class SpatialJet:
    """Frozen numeric jet: value (out,), d1 (out, 2), d2 (out, 3) = [xx, yy, xy]."""

    value: np.ndarray
    d1: np.ndarray
    d2: np.ndarray


def _jet_numeric(out: Jet2):
    comps = [0.0 if c is None else value_of(c) for c in out.comps()]
    f, fx, fy, fxx, fxy, fyy = comps
    d1 = np.stack([fx, fy], axis=-1)
    d2 = np.stack([fxx, fyy, fxy], axis=-1)
    return f, d1, d2


def spatial_jet(net: Callable, params, xy) -> SpatialJet:
    """Evaluate a 2-input network together with its first/second space derivatives.

    ``net(params, xy_jet)`` must map a Jet2 whose value has shape (1, 2) to a
    Jet2 whose value has shape (1, n_out), composing only supported ops.
    """
    pts = np.asarray(xy, dtype=float).reshape(1, 2)
    out = net(params, jet_seed(pts))
    f, d1, d2 = _jet_numeric(out)
    return SpatialJet(value=f[0], d1=d1[0], d2=d2[0])


def spatial_jet_batch(net: Callable, params, points: np.ndarray) -> SpatialJet:
    """Batched variant: value (n, out), d1 (n, out, 2), d2 (n, out, 3)."""
    out = net(params, jet_seed(points))
    f, d1, d2 = _jet_numeric(out)
    return SpatialJet(value=f, d1=d1, d2=d2)


# ---------------------------------------------------------------------------
# finite-difference oracles (fixed step sizes, central stencils)
# ---------------------------------------------------------------------------

FD_STEP_GRAD = 1e-4
FD_STEP_HESS = 1e-3


def fd_gradient(f: Callable[[np.ndarray], float], x: np.ndarray, h: float = FD_STEP_GRAD):
    """Central-difference gradient of a scalar function of a flat vector."""
    x = np.asarray(x, dtype=float)
    g = np.zeros_like(x)
    for i in range(x.size):
        xp, xm = x.copy(), x.copy()
        xp[i] += h
        xm[i] -= h
        g[i] = (f(xp) - f(xm)) / (2 * h)
    return g


def fd_spatial(f: Callable[[float, float], np.ndarray], x: float, y: float,
               h1: float = FD_STEP_GRAD, h2: float = FD_STEP_HESS):
    """Central-difference first and second spatial derivatives of f(x, y)."""
    fx = (f(x + h1, y) - f(x - h1, y)) / (2 * h1)
    fy = (f(x, y + h1) - f(x, y - h1)) / (2 * h1)
    f0 = f(x, y)
    fxx = (f(x + h2, y) - 2 * f0 + f(x - h2, y)) / h2**2
    fyy = (f(x, y + h2) - 2 * f0 + f(x, y - h2)) / h2**2
    fxy = (
        f(x + h2, y + h2) - f(x + h2, y - h2) - f(x - h2, y + h2) + f(x - h2, y - h2)
    ) / (4 * h2**2)
    return np.stack([fx, fy], axis=-1), np.stack([fxx, fyy, fxy], axis=-1)
