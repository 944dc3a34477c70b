"""Autoencoder architectures: the projection-constrained net and a baseline.

The constrained autoencoder builds its encoder/decoder from biorthogonal
layer pairs and the invertible activation branches, so decode-then-encode
telescopes to the identity and P = decode o encode is a smooth projection
onto the decoder's range.  The baseline is a standard fully connected
GeLU autoencoder with linear output maps; it has no projection property
and exists for comparison studies.

All forward, JVP and inner-layer helpers are written generically over a
"weights" mapping whose values may be numpy arrays or tape variables, so
the same code path serves plain evaluation and reverse-mode gradients.
States are column vectors; batched inputs are (n, N) matrices.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy.special import erf

from . import _tape as tp
from .act import ActivationParams
from .biortho import DomainError, PairRep

__all__ = [
    "LayerParams",
    "AutoencoderParams",
    "BaselineNetParams",
    "EvaluationError",
    "encode",
    "decode",
    "project_point",
    "jvp_encode",
    "jvp_decode",
    "jvp_project",
    "gelu_eval",
    "save_checkpoint",
    "load_checkpoint",
]

# 1/sqrt(Var(GeLU(Z))) for Z ~ N(0,1); rescales unit-norm weight rows so a
# GeLU layer approximately preserves activation variance (= 1/0.58791).
GELU_WEIGHT_SCALE = 1.7009262433633332

_SQRT2 = np.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


class EvaluationError(Exception):
    """Non-finite or out-of-domain intermediate; message names layer and op."""


def gelu_eval(x, order: int = 0):
    """Exact Gaussian-CDF GeLU and its derivatives up to third order."""
    x = np.asarray(x, dtype=np.float64)
    cdf = 0.5 * (1.0 + erf(x / _SQRT2))
    if order == 0:
        return x * cdf
    pdf = _INV_SQRT_2PI * np.exp(-0.5 * x * x)
    if order == 1:
        return cdf + x * pdf
    if order == 2:
        return pdf * (2.0 - x * x)
    if order == 3:
        return pdf * (x * x - 4.0) * x
    raise ValueError(f"unsupported GeLU derivative order {order}")


def _col(v):
    """Reshape a parameter vector (possibly taped) into a column."""
    n = np.shape(tp.value_of(v))[0]
    return tp.reshape(v, (n, 1))


def _as_batch(x, dim: int, name: str):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        if x.shape[0] != dim:
            raise ValueError(f"{name} must have length {dim}, got {x.shape[0]}")
        return x[:, None], True
    if x.ndim == 2 and x.shape[0] == dim:
        return x, False
    raise ValueError(f"{name} must be ({dim},) or ({dim}, N), got {x.shape}")


def _debatch(x, single: bool):
    return x[:, 0] if single else x


@dataclass(frozen=True)
class LayerParams:
    """One layer: representative pair (n_l x n_{l-1}) plus bias (n_l,)."""

    rep: PairRep
    bias: np.ndarray


class AutoencoderParams:
    """Projection-constrained autoencoder parameters and configuration.

    ``widths`` is the nondecreasing sequence (n_0, ..., n_L) from latent
    dimension r = n_0 to state dimension n = n_L.  Optional features:

    * ``pin_equilibrium``: state vector x_eq; the last-layer bias is then a
      derived quantity computed so that decode(0) = x_eq exactly.
    * ``constraint``: matrix L; last-layer phi_t columns and bias are
      parametrized in an orthonormal basis of Null(L), making
      L @ decode(z) = 0 automatic.
    * ``psi_row_mask``: boolean mask on last-layer psi_t rows; masked rows
      are held at exactly zero (used by encoder sparsification).
    """

    def __init__(
        self,
        widths,
        act: ActivationParams,
        raw: dict,
        pin_equilibrium=None,
        constraint=None,
        psi_row_mask=None,
        null_basis=None,
    ):
        widths = tuple(int(w) for w in widths)
        if len(widths) < 2:
            raise ValueError("need at least one layer (two widths)")
        if any(widths[i] > widths[i + 1] for i in range(len(widths) - 1)):
            raise ValueError(f"layer widths must be nondecreasing, got {widths}")
        self.widths = widths
        self.act = act
        self.pin_equilibrium = None if pin_equilibrium is None else np.asarray(
            pin_equilibrium, dtype=np.float64
        )
        self.constraint = None if constraint is None else np.asarray(constraint, dtype=np.float64)
        self.psi_row_mask = None if psi_row_mask is None else np.asarray(psi_row_mask, dtype=bool)
        if self.constraint is not None:
            if null_basis is None:
                null_basis = _null_space_basis(self.constraint)
            if null_basis.shape[1] < self.widths[-2]:
                raise ValueError("Null(constraint) is too small for the last layer's width")
            if self.pin_equilibrium is not None:
                if np.abs(self.constraint @ self.pin_equilibrium).max() > 1e-10:
                    raise ValueError("pinned equilibrium violates the linear constraint")
        self.null_basis = null_basis
        if self.pin_equilibrium is not None and self.pin_equilibrium.shape != (widths[-1],):
            raise ValueError("pin_equilibrium must be a state-dimension vector")
        if self.psi_row_mask is not None and self.psi_row_mask.shape != (widths[-1],):
            raise ValueError("psi_row_mask must be a state-dimension boolean vector")
        self._raw = {k: np.asarray(v, dtype=np.float64) for k, v in raw.items()}
        for name, shape in self.parameter_shapes().items():
            if name not in self._raw or self._raw[name].shape != shape:
                raise ValueError(f"parameter {name} missing or has wrong shape (want {shape})")

    # -- construction --------------------------------------------------
    @classmethod
    def random(
        cls,
        widths,
        seed,
        act: ActivationParams | None = None,
        pin_equilibrium=None,
        constraint=None,
    ) -> "AutoencoderParams":
        """Random init: each pair phi = psi = Haar-orthonormal columns
        (unit operator norm), all biases zero."""
        widths = tuple(int(w) for w in widths)
        act = act or ActivationParams()
        rng = np.random.default_rng(seed)
        null_basis = None if constraint is None else _null_space_basis(
            np.asarray(constraint, dtype=np.float64)
        )
        num_layers = len(widths) - 1
        raw: dict[str, np.ndarray] = {}
        from .matkit import random_orthonormal

        for layer in range(1, num_layers + 1):
            n_out, n_in = widths[layer], widths[layer - 1]
            q = random_orthonormal(n_out, n_in, rng.integers(0, 2**63 - 1))
            key = f"layer{layer}"
            last = layer == num_layers
            if last and constraint is not None:
                coef = null_basis.T @ q
                # membership in the det > 0 domain is generic but not
                # guaranteed after projecting onto Null(L); retry if needed
                while np.linalg.det(q.T @ (null_basis @ coef)) <= 0:
                    q = random_orthonormal(n_out, n_in, rng.integers(0, 2**63 - 1))
                    coef = null_basis.T @ q
                raw[key + ".phi_coef"] = coef
                raw[key + ".psi_t"] = q
                if pin_equilibrium is None:
                    raw[key + ".bias_coef"] = np.zeros(null_basis.shape[1])
            else:
                raw[key + ".phi_t"] = q
                raw[key + ".psi_t"] = q.copy()
                if not (last and pin_equilibrium is not None):
                    raw[key + ".bias"] = np.zeros(n_out)
        return cls(
            widths,
            act,
            raw,
            pin_equilibrium=pin_equilibrium,
            constraint=constraint,
            null_basis=null_basis,
        )

    # -- parameter plumbing ---------------------------------------------
    @property
    def num_layers(self) -> int:
        return len(self.widths) - 1

    @property
    def latent_dim(self) -> int:
        return self.widths[0]

    @property
    def state_dim(self) -> int:
        return self.widths[-1]

    def parameter_shapes(self) -> dict[str, tuple]:
        shapes: dict[str, tuple] = {}
        last = self.num_layers
        for layer in range(1, last + 1):
            n_out, n_in = self.widths[layer], self.widths[layer - 1]
            key = f"layer{layer}"
            if layer == last and self.constraint is not None:
                k = self.null_basis.shape[1]
                shapes[key + ".phi_coef"] = (k, n_in)
                if self.pin_equilibrium is None:
                    shapes[key + ".bias_coef"] = (k,)
            else:
                shapes[key + ".phi_t"] = (n_out, n_in)
                if not (layer == last and self.pin_equilibrium is not None):
                    shapes[key + ".bias"] = (n_out,)
            shapes[key + ".psi_t"] = (n_out, n_in)
        return shapes

    def parameter_arrays(self) -> dict[str, np.ndarray]:
        return self._raw

    def copy_parameters(self) -> dict[str, np.ndarray]:
        return {k: v.copy() for k, v in self._raw.items()}

    def replace_parameters(self, raw: dict) -> "AutoencoderParams":
        return AutoencoderParams(
            self.widths,
            self.act,
            raw,
            pin_equilibrium=self.pin_equilibrium,
            constraint=self.constraint,
            psi_row_mask=self.psi_row_mask,
            null_basis=self.null_basis,
        )

    def with_psi_row_mask(self, mask) -> "AutoencoderParams":
        return AutoencoderParams(
            self.widths,
            self.act,
            self.copy_parameters(),
            pin_equilibrium=self.pin_equilibrium,
            constraint=self.constraint,
            psi_row_mask=mask,
            null_basis=self.null_basis,
        )

    @property
    def layers(self) -> list[LayerParams]:
        """Effective per-layer representatives and biases (numpy view)."""
        resolved = _resolve_proj(self, self._raw, need_pairs=True)
        arrays = _layer_arrays(self, self._raw)
        out = []
        for (phi_t, psi_t, _), (_, _, bias_col) in zip(arrays, resolved):
            out.append(
                LayerParams(
                    rep=PairRep(phi_t=np.asarray(phi_t), psi_t=np.asarray(psi_t)),
                    bias=np.asarray(bias_col)[:, 0],
                )
            )
        return out

    def projected_pairs(self) -> list["PairRep"]:
        """Effective biorthogonal pairs (Phi_l, Psi_l) after the projection."""
        resolved = _resolve_proj(self, self._raw, need_pairs=True)
        return [
            PairRep(phi_t=np.asarray(phi), psi_t=np.asarray(psi_tr).T)
            for phi, psi_tr, _ in resolved
        ]

    # -- evaluation conveniences -----------------------------------------
    def encode(self, x):
        return encode(self, x)

    def decode(self, z):
        return decode(self, z)

    def project(self, x):
        return project_point(self, x)

    def min_gram_det(self) -> float:
        """Smallest det(psi_t^T phi_t) over layers; must stay positive."""
        dets = []
        for phi_t, psi_t, _ in _layer_arrays(self, self._raw):
            dets.append(np.linalg.det(np.asarray(psi_t).T @ np.asarray(phi_t)))
        return float(min(dets))

    def biorthogonality_residual(self) -> float:
        """max_l || psi_l^T phi_l - I ||_F of the projected (effective) pairs."""
        res = 0.0
        for phi, psi_tr, _ in _resolve_proj(self, self._raw, need_pairs=True):
            r = np.shape(phi)[1]
            res = max(res, float(np.linalg.norm(np.asarray(psi_tr) @ np.asarray(phi) - np.eye(r))))
        return res


def _null_space_basis(lmat: np.ndarray) -> np.ndarray:
    """Orthonormal basis of Null(L) from the SVD of L."""
    _, s, vt = np.linalg.svd(lmat)
    tol = max(lmat.shape) * np.finfo(np.float64).eps * (s[0] if s.size else 0.0)
    rank = int(np.count_nonzero(s > tol))
    return vt[rank:].T.copy()


def _layer_arrays(net: AutoencoderParams, w: dict):
    """Effective (phi_t, psi_t, bias-or-None) per layer; constraint basis and
    row mask applied; bias None for a pinned last layer."""
    out = []
    last = net.num_layers
    for layer in range(1, last + 1):
        key = f"layer{layer}"
        pinned = layer == last and net.pin_equilibrium is not None
        if layer == last and net.constraint is not None:
            phi_t = net.null_basis @ w[key + ".phi_coef"]
            bias = None if pinned else net.null_basis @ w[key + ".bias_coef"]
        else:
            phi_t = w[key + ".phi_t"]
            bias = None if pinned else w[key + ".bias"]
        psi_t = w[key + ".psi_t"]
        if layer == last and net.psi_row_mask is not None:
            psi_t = net.psi_row_mask[:, None].astype(np.float64) * psi_t
        out.append((phi_t, psi_t, bias))
    return out


def _resolve_proj(net: AutoencoderParams, w: dict, need_pairs: bool):
    """Per-layer (phi-or-None, psi^T, bias column) with the biorthogonal
    projection applied lazily; resolves the pinned last-layer bias."""
    arrays = _layer_arrays(net, w)
    pinned = net.pin_equilibrium is not None
    resolved = []
    for idx, (phi_t, psi_t, bias) in enumerate(arrays, start=1):
        phi = None
        psi_tr = psi_t.T
        if need_pairs or pinned:
            gram = psi_tr @ phi_t
            gval = np.asarray(tp.value_of(gram))
            if not np.all(np.isfinite(gval)):
                raise EvaluationError(f"layer {idx}: non-finite entries in psi_t^T phi_t")
            if not np.linalg.det(gval) > 0:
                raise DomainError(f"layer {idx}: det(psi_t^T phi_t) <= 0")
            phi = phi_t @ tp.inv(gram)
        bias_col = None if bias is None else _col(bias)
        resolved.append((phi, psi_tr, bias_col))
    if pinned:
        resolved[-1] = (resolved[-1][0], resolved[-1][1], _pinned_bias(net, resolved))
    return resolved


def _pinned_bias(net: AutoencoderParams, resolved):
    """Last-layer bias that places decode(0) exactly at the equilibrium."""
    h = np.zeros((net.latent_dim, 1))
    for phi, _, bias_col in resolved[:-1]:
        h = phi @ tp.sigma(h, net.act, +1) + bias_col
    phi_last = resolved[-1][0]
    return net.pin_equilibrium[:, None] - phi_last @ tp.sigma(h, net.act, +1)


def _enc_forward(resolved, act, x):
    h = x
    for phi, psi_tr, bias_col in reversed(resolved):
        h = tp.sigma(psi_tr @ (h - bias_col), act, -1)
    return h


def _dec_forward(resolved, act, z):
    h = z
    for phi, psi_tr, bias_col in resolved:
        h = phi @ tp.sigma(h, act, +1) + bias_col
    return h


def _enc_tangent(resolved, act, x, v):
    h, t = x, v
    for phi, psi_tr, bias_col in reversed(resolved):
        pre = psi_tr @ (h - bias_col)
        h, dh = tp.sigma_with_deriv(pre, act, -1)
        t = dh * (psi_tr @ t)
    return h, t


def _dec_tangent(resolved, act, z, w_tan):
    h, t = z, w_tan
    for phi, psi_tr, bias_col in resolved:
        s, ds = tp.sigma_with_deriv(h, act, +1)
        t = phi @ (ds * t)
        h = phi @ s + bias_col
    return h, t


class _ProjOps:
    """One evaluation's forward operations; the layer resolution (including
    the inverse nodes of the biorthogonal projection) is shared across all
    calls, so repeated uses within one objective build one subgraph."""

    __slots__ = ("net", "w", "_plain", "_pairs")

    def __init__(self, net: AutoencoderParams, w: dict):
        self.net = net
        self.w = w
        self._plain = None
        self._pairs = None

    def _resolved(self, need_pairs: bool):
        if self._pairs is not None:
            return self._pairs
        if need_pairs or self.net.pin_equilibrium is not None:
            self._pairs = _resolve_proj(self.net, self.w, True)
            return self._pairs
        if self._plain is None:
            self._plain = _resolve_proj(self.net, self.w, False)
        return self._plain

    def encode(self, x):
        return _enc_forward(self._resolved(False), self.net.act, x)

    def decode(self, z):
        return _dec_forward(self._resolved(True), self.net.act, z)

    def project(self, x):
        res = self._resolved(True)
        return _dec_forward(res, self.net.act, _enc_forward(res, self.net.act, x))

    def jvp_encode(self, x, v):
        return _enc_tangent(self._resolved(False), self.net.act, x, v)

    def jvp_decode(self, z, v):
        return _dec_tangent(self._resolved(True), self.net.act, z, v)

    def jvp_project(self, x, v):
        res = self._resolved(True)
        z, tz = _enc_tangent(res, self.net.act, x, v)
        return _dec_tangent(res, self.net.act, z, tz)


class _BaselineOps:
    __slots__ = ("net", "w")

    def __init__(self, net: "BaselineNetParams", w: dict):
        self.net = net
        self.w = w

    def encode(self, x):
        return _baseline_encode(self.net, self.w, x)

    def decode(self, z):
        return _baseline_decode(self.net, self.w, z)

    def project(self, x):
        return _baseline_decode(self.net, self.w, _baseline_encode(self.net, self.w, x))

    def jvp_encode(self, x, v):
        return _baseline_enc_tangent(self.net, self.w, x, v)

    def jvp_decode(self, z, v):
        return _baseline_dec_tangent(self.net, self.w, z, v)

    def jvp_project(self, x, v):
        z, tz = _baseline_enc_tangent(self.net, self.w, x, v)
        return _baseline_dec_tangent(self.net, self.w, z, tz)


def forward_ops(model, w):
    """Forward-operation bundle for one evaluation of ``model`` at weights
    ``w`` (numpy arrays or tape variables)."""
    if isinstance(model, AutoencoderParams):
        return _ProjOps(model, w)
    if isinstance(model, BaselineNetParams):
        return _BaselineOps(model, w)
    raise TypeError(f"unsupported model type {type(model)!r}")


# -- generic (weights-dict) entry points used by the loss/grad modules ----

def encode_with(model, w, x):
    return forward_ops(model, w).encode(x)


def decode_with(model, w, z):
    return forward_ops(model, w).decode(z)


def project_with(model, w, x):
    return forward_ops(model, w).project(x)


def jvp_encode_with(model, w, x, v):
    return forward_ops(model, w).jvp_encode(x, v)


def jvp_decode_with(model, w, z, v):
    return forward_ops(model, w).jvp_decode(z, v)


def jvp_project_with(model, w, x, v):
    """Primal P(x) and tangent DP(x) v in one pass."""
    return forward_ops(model, w).jvp_project(x, v)


# -- public single/batch API (spec operations) -----------------------------

def encode(params, x):
    """Latent coordinates z = encode(x); x of shape (n,) or (n, N)."""
    xb, single = _as_batch(x, params.state_dim, "x")
    return _debatch(encode_with(params, params.parameter_arrays(), xb), single)


def decode(params, z):
    """Reconstructed state decode(z); z of shape (r,) or (r, N)."""
    zb, single = _as_batch(z, params.latent_dim, "z")
    return _debatch(decode_with(params, params.parameter_arrays(), zb), single)


def project_point(params, x):
    """P(x) = decode(encode(x)): idempotent projection onto the range."""
    xb, single = _as_batch(x, params.state_dim, "x")
    return _debatch(project_with(params, params.parameter_arrays(), xb), single)


def jvp_encode(params, x, v):
    """Directional derivative D encode(x) @ v."""
    xb, single = _as_batch(x, params.state_dim, "x")
    vb, _ = _as_batch(v, params.state_dim, "v")
    _, t = jvp_encode_with(params, params.parameter_arrays(), xb, vb)
    return _debatch(t, single)


def jvp_decode(params, z, w):
    """Directional derivative D decode(z) @ w."""
    zb, single = _as_batch(z, params.latent_dim, "z")
    wb, _ = _as_batch(w, params.latent_dim, "w")
    _, t = jvp_decode_with(params, params.parameter_arrays(), zb, wb)
    return _debatch(t, single)


def jvp_project(params, x, v):
    """Directional derivative DP(x) @ v of the projection."""
    xb, single = _as_batch(x, params.state_dim, "x")
    vb, _ = _as_batch(v, params.state_dim, "v")
    _, t = jvp_project_with(params, params.parameter_arrays(), xb, vb)
    return _debatch(t, single)


# -- inner/outer layer split used by the efficient-ROM machinery ----------

def outer_affine(params: AutoencoderParams):
    """Effective (Phi_L, b_L) of the outermost decoder layer (numpy)."""
    resolved = _resolve_proj(params, params.parameter_arrays(), need_pairs=True)
    phi, _, bias_col = resolved[-1]
    return np.asarray(phi), np.asarray(bias_col)[:, 0]


def inner_decode(params: AutoencoderParams, z):
    """sigma_plus applied to the decoder composition through layer L-1.

    The full decoder is decode(z) = b_L + Phi_L @ inner_decode(z).
    """
    zb, single = _as_batch(z, params.latent_dim, "z")
    resolved = _resolve_proj(params, params.parameter_arrays(), need_pairs=True)
    h = zb
    for phi, _, bias_col in resolved[:-1]:
        h = phi @ tp.sigma(h, params.act, +1) + bias_col
    return _debatch(tp.sigma(h, params.act, +1), single)


def inner_encode_jvp(params: AutoencoderParams, s, t):
    """Value and tangent of the encoder composition inside the outer layer.

    ``s`` is the outer-layer pre-activation Psi_L^T (x - b_L); the full
    encoder is encode(x) = inner_encode(s).  Returns (z, dz).
    """
    sb, single = _as_batch(s, params.widths[-2], "s")
    tb, _ = _as_batch(t, params.widths[-2], "t")
    resolved = _resolve_proj(params, params.parameter_arrays(), need_pairs=False)
    h = tp.sigma(sb, params.act, -1)
    tt = tp.sigma(sb, params.act, -1, order=1) * tb
    for phi, psi_tr, bias_col in reversed(resolved[:-1]):
        pre = psi_tr @ (h - bias_col)
        tt = tp.sigma(pre, params.act, -1, order=1) * (psi_tr @ tt)
        h = tp.sigma(pre, params.act, -1)
    return _debatch(h, single), _debatch(tt, single)


# -- baseline (standard) autoencoder ---------------------------------------

class BaselineNetParams:
    """Fully connected GeLU autoencoder with linear output maps.

    ``enc_widths`` runs from state dimension n down to latent dimension r;
    ``dec_widths`` runs back up.  A trainable linear map follows each stack
    (W_e after the encoder layers, W_d after the decoder layers).
    """

    def __init__(self, enc_widths, dec_widths, raw: dict):
        self.enc_widths = tuple(int(v) for v in enc_widths)
        self.dec_widths = tuple(int(v) for v in dec_widths)
        if self.enc_widths[0] != self.dec_widths[-1] or self.enc_widths[-1] != self.dec_widths[0]:
            raise ValueError("encoder and decoder widths are inconsistent")
        self._raw = {k: np.asarray(v, dtype=np.float64) for k, v in raw.items()}
        for name, shape in self.parameter_shapes().items():
            if name not in self._raw or self._raw[name].shape != shape:
                raise ValueError(f"parameter {name} missing or has wrong shape (want {shape})")

    @classmethod
    def random(cls, enc_widths, dec_widths, seed) -> "BaselineNetParams":
        """Weight rows uniform on the unit hypersphere, scaled for GeLU
        variance preservation; linear output maps unscaled; zero biases."""
        rng = np.random.default_rng(seed)
        raw: dict[str, np.ndarray] = {}

        def sphere_rows(n_out, n_in):
            m = rng.standard_normal((n_out, n_in))
            return m / np.linalg.norm(m, axis=1, keepdims=True)

        enc_widths = tuple(int(v) for v in enc_widths)
        dec_widths = tuple(int(v) for v in dec_widths)
        for i in range(len(enc_widths) - 1):
            raw[f"enc{i + 1}.W"] = GELU_WEIGHT_SCALE * sphere_rows(enc_widths[i + 1], enc_widths[i])
            raw[f"enc{i + 1}.b"] = np.zeros(enc_widths[i + 1])
        raw["We"] = sphere_rows(enc_widths[-1], enc_widths[-1])
        for i in range(len(dec_widths) - 1):
            raw[f"dec{i + 1}.W"] = GELU_WEIGHT_SCALE * sphere_rows(dec_widths[i + 1], dec_widths[i])
            raw[f"dec{i + 1}.b"] = np.zeros(dec_widths[i + 1])
        raw["Wd"] = sphere_rows(dec_widths[-1], dec_widths[-1])
        return cls(enc_widths, dec_widths, raw)

    @property
    def latent_dim(self) -> int:
        return self.enc_widths[-1]

    @property
    def state_dim(self) -> int:
        return self.enc_widths[0]

    def parameter_shapes(self) -> dict[str, tuple]:
        shapes: dict[str, tuple] = {}
        for i in range(len(self.enc_widths) - 1):
            shapes[f"enc{i + 1}.W"] = (self.enc_widths[i + 1], self.enc_widths[i])
            shapes[f"enc{i + 1}.b"] = (self.enc_widths[i + 1],)
        shapes["We"] = (self.enc_widths[-1], self.enc_widths[-1])
        for i in range(len(self.dec_widths) - 1):
            shapes[f"dec{i + 1}.W"] = (self.dec_widths[i + 1], self.dec_widths[i])
            shapes[f"dec{i + 1}.b"] = (self.dec_widths[i + 1],)
        shapes["Wd"] = (self.dec_widths[-1], self.dec_widths[-1])
        return shapes

    def parameter_arrays(self) -> dict[str, np.ndarray]:
        return self._raw

    def copy_parameters(self) -> dict[str, np.ndarray]:
        return {k: v.copy() for k, v in self._raw.items()}

    def replace_parameters(self, raw: dict) -> "BaselineNetParams":
        return BaselineNetParams(self.enc_widths, self.dec_widths, raw)

    def encode(self, x):
        xb, single = _as_batch(x, self.state_dim, "x")
        return _debatch(_baseline_encode(self, self._raw, xb), single)

    def decode(self, z):
        zb, single = _as_batch(z, self.latent_dim, "z")
        return _debatch(_baseline_decode(self, self._raw, zb), single)

    def project(self, x):
        xb, single = _as_batch(x, self.state_dim, "x")
        return _debatch(_baseline_decode(self, self._raw, _baseline_encode(self, self._raw, xb)), single)


def _baseline_encode(model: BaselineNetParams, w, x):
    h = x
    for i in range(len(model.enc_widths) - 1):
        h = tp.gelu(w[f"enc{i + 1}.W"] @ h + _col(w[f"enc{i + 1}.b"]), gelu_eval=gelu_eval)
    return w["We"] @ h


def _baseline_decode(model: BaselineNetParams, w, z):
    h = z
    for i in range(len(model.dec_widths) - 1):
        h = tp.gelu(w[f"dec{i + 1}.W"] @ h + _col(w[f"dec{i + 1}.b"]), gelu_eval=gelu_eval)
    return w["Wd"] @ h


def _baseline_enc_tangent(model: BaselineNetParams, w, x, v):
    h, t = x, v
    for i in range(len(model.enc_widths) - 1):
        pre = w[f"enc{i + 1}.W"] @ h + _col(w[f"enc{i + 1}.b"])
        t = tp.gelu(pre, order=1, gelu_eval=gelu_eval) * (w[f"enc{i + 1}.W"] @ t)
        h = tp.gelu(pre, gelu_eval=gelu_eval)
    return w["We"] @ h, w["We"] @ t


def _baseline_dec_tangent(model: BaselineNetParams, w, z, v):
    h, t = z, v
    for i in range(len(model.dec_widths) - 1):
        pre = w[f"dec{i + 1}.W"] @ h + _col(w[f"dec{i + 1}.b"])
        t = tp.gelu(pre, order=1, gelu_eval=gelu_eval) * (w[f"dec{i + 1}.W"] @ t)
        h = tp.gelu(pre, gelu_eval=gelu_eval)
    return w["Wd"] @ h, w["Wd"] @ t


def baseline_encode(model: BaselineNetParams, x):
    return model.encode(x)


def baseline_decode(model: BaselineNetParams, z):
    return model.decode(z)


def baseline_jvp_project(model: BaselineNetParams, x, v):
    xb, single = _as_batch(x, model.state_dim, "x")
    vb, _ = _as_batch(v, model.state_dim, "v")
    _, t = jvp_project_with(model, model.parameter_arrays(), xb, vb)
    return _debatch(t, single)


# -- checkpoint I/O ---------------------------------------------------------

_CHECKPOINT_FORMAT = "projrom-checkpoint-1"


def save_checkpoint(model, path) -> None:
    """Write a self-describing JSON checkpoint; floats round-trip exactly."""
    if isinstance(model, AutoencoderParams):
        doc = {
            "format": _CHECKPOINT_FORMAT,
            "kind": "projection",
            "widths": list(model.widths),
            "alpha": model.act.alpha,
            "pin_equilibrium": None
            if model.pin_equilibrium is None
            else model.pin_equilibrium.tolist(),
            "constraint": None if model.constraint is None else model.constraint.tolist(),
            "psi_row_mask": None if model.psi_row_mask is None else model.psi_row_mask.tolist(),
        }
    elif isinstance(model, BaselineNetParams):
        doc = {
            "format": _CHECKPOINT_FORMAT,
            "kind": "baseline",
            "enc_widths": list(model.enc_widths),
            "dec_widths": list(model.dec_widths),
        }
    else:
        raise TypeError(f"cannot checkpoint object of type {type(model)!r}")
    doc["parameters"] = {k: v.tolist() for k, v in model.parameter_arrays().items()}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)


def load_checkpoint(path):
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("format") != _CHECKPOINT_FORMAT:
        raise ValueError(f"unrecognized checkpoint format in {path}")
    raw = {k: np.asarray(v, dtype=np.float64) for k, v in doc["parameters"].items()}
    if doc["kind"] == "projection":
        return AutoencoderParams(
            doc["widths"],
            ActivationParams(alpha=doc["alpha"]),
            raw,
            pin_equilibrium=doc["pin_equilibrium"],
            constraint=doc["constraint"],
            psi_row_mask=doc["psi_row_mask"],
        )
    if doc["kind"] == "baseline":
        return BaselineNetParams(doc["enc_widths"], doc["dec_widths"], raw)
    raise ValueError(f"unrecognized checkpoint kind {doc['kind']!r}")
