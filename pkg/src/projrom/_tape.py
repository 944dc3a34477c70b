"""Minimal reverse-mode tape over numpy arrays (internal).

The ops here are matrix-level primitives: affine arithmetic, matmul,
matrix inverse, elementwise activations carrying their derivative order,
and full-order-model evaluations whose adjoints are supplied by the system
object.  Every op with at least one :class:`Var` argument records a node on
the enclosing :class:`Tape`; with plain arrays it degenerates to ordinary
numpy, so the same forward code serves both loss evaluation and gradient
computation (and both produce bitwise-identical values).

The reverse pass walks the tape once, in reverse creation order, which
fixes the accumulation order and makes gradients deterministic.
"""

from __future__ import annotations

import numpy as np

from . import act as _act

__all__ = ["Tape", "Var", "backward", "value_of"]


class Tape:
    """Ordered record of one forward evaluation's primitive operations."""

    __slots__ = ("nodes",)

    def __init__(self):
        self.nodes: list[Var] = []


class Var:
    """A taped value: numpy payload plus parent edges with their vjp rules."""

    __slots__ = ("value", "tape", "parents", "grad")
    __array_ufunc__ = None  # numpy defers binary ops to our reflected dunders

    def __init__(self, value, tape: Tape, parents=()):
        self.value = value
        self.tape = tape
        self.parents = parents
        self.grad = None
        tape.nodes.append(self)

    # -- convenience --------------------------------------------------
    @property
    def shape(self):
        return np.shape(self.value)

    @property
    def T(self):
        return transpose(self)

    def sum(self, axis=None):
        return vsum(self, axis=axis)

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __neg__(self):
        return neg(self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Var):
            raise TypeError("Var division only supports constant divisors")
        return mul(self, 1.0 / other)

    def __matmul__(self, other):
        return matmul(self, other)

    def __rmatmul__(self, other):
        return matmul(other, self)

    def __repr__(self):
        return f"Var(shape={self.shape})"


def value_of(x):
    return x.value if isinstance(x, Var) else x


def _tape_of(*args) -> Tape | None:
    for a in args:
        if isinstance(a, Var):
            return a.tape
    return None


def _unbroadcast(g, shape):
    """Sum a gradient down to ``shape`` (reverse of numpy broadcasting)."""
    g = np.asarray(g)
    if g.shape == shape:
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for i, (gs, ss) in enumerate(zip(g.shape, shape)):
        if ss == 1 and gs != 1:
            g = g.sum(axis=i, keepdims=True)
    return g.reshape(shape)


def _binary(a, b, out, vjp_a, vjp_b):
    edges = []
    tape = None
    if isinstance(a, Var):
        edges.append((a, vjp_a))
        tape = a.tape
    if isinstance(b, Var):
        edges.append((b, vjp_b))
        tape = b.tape if tape is None else tape
    return Var(out, tape, tuple(edges))


def add(a, b):
    va, vb = value_of(a), value_of(b)
    out = va + vb
    if not (isinstance(a, Var) or isinstance(b, Var)):
        return out
    sa, sb = np.shape(va), np.shape(vb)
    return _binary(a, b, out, lambda g: _unbroadcast(g, sa), lambda g: _unbroadcast(g, sb))


def sub(a, b):
    va, vb = value_of(a), value_of(b)
    out = va - vb
    if not (isinstance(a, Var) or isinstance(b, Var)):
        return out
    sa, sb = np.shape(va), np.shape(vb)
    return _binary(a, b, out, lambda g: _unbroadcast(g, sa), lambda g: _unbroadcast(-g, sb))


def neg(a):
    if not isinstance(a, Var):
        return -a
    return Var(-a.value, a.tape, ((a, lambda g: -g),))


def mul(a, b):
    va, vb = value_of(a), value_of(b)
    out = va * vb
    if not (isinstance(a, Var) or isinstance(b, Var)):
        return out
    sa, sb = np.shape(va), np.shape(vb)
    return _binary(
        a, b, out, lambda g: _unbroadcast(g * vb, sa), lambda g: _unbroadcast(g * va, sb)
    )


def matmul(a, b):
    va, vb = value_of(a), value_of(b)
    out = va @ vb
    if not (isinstance(a, Var) or isinstance(b, Var)):
        return out
    return _binary(a, b, out, lambda g: g @ vb.T, lambda g: va.T @ g)


def transpose(a):
    if not isinstance(a, Var):
        return a.T
    return Var(a.value.T, a.tape, ((a, lambda g: g.T),))


def reshape(a, shape):
    if not isinstance(a, Var):
        return a.reshape(shape)
    orig = a.value.shape
    return Var(a.value.reshape(shape), a.tape, ((a, lambda g: g.reshape(orig)),))


def vsum(a, axis=None):
    va = value_of(a)
    out = np.sum(va, axis=axis)
    if axis is None:
        out = float(out)
    if not isinstance(a, Var):
        return out
    shape = va.shape

    def vjp(g):
        if axis is None:
            return g * np.ones(shape)
        return np.broadcast_to(np.expand_dims(g, axis), shape).copy()

    return Var(out, a.tape, ((a, vjp),))


def inv(m):
    """Matrix inverse node; vjp uses d(M^-1) = -M^-1 dM M^-1."""
    if not isinstance(m, Var):
        return np.linalg.inv(m)
    out = np.linalg.inv(m.value)
    return Var(out, m.tape, ((m, lambda g: -out.T @ g @ out.T),))


def sigma(x, params: _act.ActivationParams, sign: int, order: int = 0):
    """Elementwise hyperbola-branch activation (or derivative) node.

    The vjp multiplies by the next-order derivative, so order-1 nodes created
    by forward tangent computations correctly pull in the second derivative.
    """
    if not isinstance(x, Var):
        return _act._eval(x, params, sign, order)
    out, dnext = _act._eval_pair(x.value, params, sign, order)
    return Var(out, x.tape, ((x, lambda g: g * dnext),))


def sigma_with_deriv(x, params: _act.ActivationParams, sign: int):
    """Activation value and first-derivative nodes sharing one evaluation.

    Tangent sweeps need both sigma(pre) and sigma'(pre); fusing them halves
    the branch evaluations on the hot path.
    """
    if not isinstance(x, Var):
        v0, v1 = _act._eval_pair(x, params, sign, 0)
        return v0, v1
    v0, v1, v2 = _act._eval_triple(x.value, params, sign)
    n0 = Var(v0, x.tape, ((x, lambda g: g * v1),))
    n1 = Var(v1, x.tape, ((x, lambda g: g * v2),))
    return n0, n1


def gelu(x, order: int = 0, *, gelu_eval=None):
    """Elementwise GeLU (or derivative) node; ``gelu_eval(x, order)`` supplied
    by the caller to avoid an import cycle with the network module."""
    if not isinstance(x, Var):
        return gelu_eval(x, order)
    out = gelu_eval(x.value, order)
    dnext = gelu_eval(x.value, order + 1)
    return Var(out, x.tape, ((x, lambda g: g * dnext),))


def fom_f(system, x, u=None):
    """Full-order-model right-hand side node; adjoint via system.vjp_f.

    The system's own parameters are treated as fixed: only the dependence
    on the state is differentiated.
    """
    if not isinstance(x, Var):
        return system.f(x, u)
    vx = x.value
    return Var(system.f(vx, u), x.tape, ((x, lambda g: system.vjp_f(vx, u, g)),))


def fom_g(system, x):
    """Full-order-model output map node; adjoint via system.vjp_g."""
    if not isinstance(x, Var):
        return system.g(x)
    vx = x.value
    return Var(system.g(vx), x.tape, ((x, lambda g: system.vjp_g(vx, g)),))


def backward(root: Var) -> None:
    """Reverse pass from a scalar root; accumulates ``grad`` on every node.

    Visits tape nodes exactly once in reverse creation order.
    """
    if np.ndim(root.value) != 0:
        raise ValueError("backward expects a scalar root")
    root.grad = 1.0
    for node in reversed(root.tape.nodes):
        g = node.grad
        if g is None:
            continue
        for parent, vjp in node.parents:
            pg = vjp(g)
            parent.grad = pg if parent.grad is None else parent.grad + pg
