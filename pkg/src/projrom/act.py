"""Smooth invertible activation pair built from a rotated hyperbola branch.

The increasing branch pair (sigma_plus, sigma_minus) are mutual inverses:
their graphs are the two branches of a hyperbola whose conjugate axis is the
line y = x, with asymptotes at angle ``alpha`` from that axis.  Both pass
through the origin with unit slope, and their slopes stay inside
[tan(pi/4 - alpha), tan(pi/4 + alpha)], so sigma_plus is convex and
sigma_minus concave.  Closed-form first and second derivatives are provided
because reverse-mode gradients of velocity-projection losses need the
second derivative.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import math

import numpy as np

__all__ = ["ActivationParams", "sigma_plus", "sigma_minus", "d_sigma"]

# Beyond this input magnitude the hyperbola is evaluated in its
# asymptote-plus-correction form: sqrt(u^2 + 2a) = |u| + a/|u| + O(|u|^-3).
# The naive square root loses precision (and eventually overflows) when
# u^2 dominates 2a.
_ASYMPTOTE_SWITCH = 1e8


@dataclass(frozen=True)
class ActivationParams:
    """Geometry of the activation pair: asymptote half-angle alpha in (0, pi/4).

    ``a = csc^2(alpha) - sec^2(alpha)`` and ``b = csc^2(alpha) + sec^2(alpha)``
    are the derived constants of the closed form; 0 < a < b always holds on
    the admissible alpha range.
    """

    alpha: float = math.pi / 8
    a: float = field(init=False)
    b: float = field(init=False)

    def __post_init__(self):
        if not 0.0 < self.alpha < math.pi / 4:
            raise ValueError(f"alpha must lie in (0, pi/4), got {self.alpha}")
        s, c = math.sin(self.alpha), math.cos(self.alpha)
        object.__setattr__(self, "a", 1.0 / s**2 - 1.0 / c**2)
        object.__setattr__(self, "b", 1.0 / s**2 + 1.0 / c**2)


def _branch_root(x, p: ActivationParams, sign: int):
    """u(x) and the stabilized sqrt(u^2 + 2a) for the chosen branch."""
    s, c = math.sin(p.alpha), math.cos(p.alpha)
    c1 = 2.0 / (s * c)  # du/dx
    u = c1 * x - sign * (math.sqrt(2.0) / c)
    if np.abs(x).max(initial=0.0) <= _ASYMPTOTE_SWITCH:
        root = np.sqrt(u * u + 2.0 * p.a)
    else:
        big = np.abs(x) > _ASYMPTOTE_SWITCH
        absu = np.abs(u)
        root = np.empty_like(u)
        au = absu[big]
        root[big] = au + p.a / au
        small = ~big
        us = u[small]
        root[small] = np.sqrt(us * us + 2.0 * p.a)
    return u, root, c1, s


def _from_root(x, p, sign, order, u, root, c1, s):
    a, b = p.a, p.b
    if order == 0:
        return (b * x) / a - sign * math.sqrt(2.0) / (a * s) + sign * root / a
    if order == 1:
        return b / a + sign * (u * c1) / (a * root)
    if order == 2:
        with np.errstate(over="ignore"):
            out = sign * 2.0 * c1 * c1 / (root * root * root)
        return np.where(np.isfinite(out), out, 0.0)
    if order == 3:
        # d/dx [ sign 2 c1^2 root^-3 ] = -sign 6 c1^3 u root^-5
        with np.errstate(over="ignore"):
            out = -sign * 6.0 * c1**3 * u / root**5
        return np.where(np.isfinite(out), out, 0.0)
    raise ValueError(f"derivative order must be in 0..3, got {order}")


def _eval(x, p: ActivationParams, sign: int, order: int):
    """Evaluate the chosen branch (sign=+1 upper, -1 lower) or a derivative."""
    x = np.asarray(x, dtype=np.float64)
    u, root, c1, s = _branch_root(x, p, sign)
    out = _from_root(x, p, sign, order, u, root, c1, s)
    if out.ndim == 0:
        return float(out)
    return out


def _eval_pair(x, p: ActivationParams, sign: int, order: int):
    """(value, next-order derivative) sharing one branch evaluation."""
    x = np.asarray(x, dtype=np.float64)
    u, root, c1, s = _branch_root(x, p, sign)
    return (
        _from_root(x, p, sign, order, u, root, c1, s),
        _from_root(x, p, sign, order + 1, u, root, c1, s),
    )


def _eval_triple(x, p: ActivationParams, sign: int):
    """(value, first, second derivative) sharing one branch evaluation."""
    x = np.asarray(x, dtype=np.float64)
    u, root, c1, s = _branch_root(x, p, sign)
    return (
        _from_root(x, p, sign, 0, u, root, c1, s),
        _from_root(x, p, sign, 1, u, root, c1, s),
        _from_root(x, p, sign, 2, u, root, c1, s),
    )


def sigma_plus(x, p: ActivationParams = ActivationParams()):
    """Convex branch: increasing, sigma_plus(0) = 0, sigma_plus'(0) = 1."""
    return _eval(x, p, +1, 0)


def sigma_minus(x, p: ActivationParams = ActivationParams()):
    """Concave branch, the functional inverse of :func:`sigma_plus`."""
    return _eval(x, p, -1, 0)


def d_sigma(x, p: ActivationParams, sign: int, order: int = 1):
    """Analytic derivative of the chosen branch.

    ``sign`` is +1 for sigma_plus, -1 for sigma_minus; ``order`` is 1 or 2.
    """
    if sign not in (+1, -1):
        raise ValueError("sign must be +1 or -1")
    if order not in (1, 2):
        raise ValueError("order must be 1 or 2")
    return _eval(x, p, sign, order)
