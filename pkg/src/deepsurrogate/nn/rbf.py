"""Gaussian radial-basis output head for the PDE surrogate.

A head network maps a parameter vector to 5K numbers that define K Gaussian
bases over the two-dimensional (x, t) domain: per basis a coefficient, two
means, and two scales. The expansion and its closed-form derivatives are
written over the dual-dispatch helpers, so the batched evaluator runs traced
(head outputs as Tensors) or untraced (numpy) through the same code.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .network import Jet

VOLTAMMETRY_DOMAIN = ((0.0, 200.0), (0.0, 20.0))
SCALE_FLOOR = 1e-6


@dataclass
class RbfExpansion:
    """K Gaussian bases: value(x) = sum_k c_k exp(-sum_j ((x_j-mu_kj)/s_kj)^2)."""

    coeffs: np.ndarray   # (K,)
    means: np.ndarray    # (K, 2), domain units
    scales: np.ndarray   # (K, 2), strictly positive

    def __post_init__(self):
        self.coeffs = np.atleast_1d(np.asarray(self.coeffs, dtype=np.float64))
        self.means = np.asarray(self.means, dtype=np.float64).reshape(-1, 2)
        self.scales = np.asarray(self.scales, dtype=np.float64).reshape(-1, 2)
        if not (self.coeffs.shape[0] == self.means.shape[0]
                == self.scales.shape[0]):
            raise ValueError("coefficient, mean, and scale counts must agree")
        if self.coeffs.size and not np.all(self.scales > 0):
            raise ValueError("all scales must be strictly positive")

    @property
    def k(self):
        return self.coeffs.shape[0]


def split_head_outputs(raw, domain=VOLTAMMETRY_DOMAIN):
    """Map raw 5K head outputs to expansion parameters.

    Layout: [K coefficients | 2K raw means | 2K raw scales]. Means are mapped
    affinely into the domain box (center + halfwidth*raw); raw scales are
    pre-conditioned to (halfwidth/2)*(raw+1) and pushed through
    softplus(.) + 1e-6 to enforce positivity. `raw` may be a (5K,) vector or
    an (n, 5K) batch, numpy or Tensor; results keep the type and batch shape
    with trailing dims (K,) / (K, 2) / (K, 2).
    """
    dims = np.asarray(ad.value_of(raw)).shape
    five_k = dims[-1]
    if five_k % 5 != 0:
        raise ValueError(f"head output dimension {five_k} is not divisible by 5")
    K = five_k // 5
    box = np.asarray(domain, dtype=np.float64)
    center = (box[:, 0] + box[:, 1]) / 2.0
    half = (box[:, 1] - box[:, 0]) / 2.0
    batched = len(dims) == 2
    lead = (dims[0],) if batched else ()
    coeffs = raw[..., :K]
    mu_raw = raw[..., K:3 * K].reshape(lead + (K, 2))
    s_raw = raw[..., 3 * K:].reshape(lead + (K, 2))
    means = center + half * mu_raw
    scales = ad.softplus((half / 2.0) * (s_raw + 1.0)) + SCALE_FLOOR
    return coeffs, means, scales


def rbf_head(net, theta, K, domain=VOLTAMMETRY_DOMAIN):
    """Run the head network on a parameter vector and build the expansion."""
    if net.output_dim != 5 * K:
        raise ValueError(f"head output_dim {net.output_dim} != 5K = {5 * K}")
    raw = net.eval(np.atleast_1d(np.asarray(theta, dtype=np.float64)))
    coeffs, means, scales = split_head_outputs(raw, domain)
    return RbfExpansion(coeffs=coeffs, means=means, scales=scales)


def rbf_eval_batch(coeffs, means, scales, X, coords=(), hess_coords=()):
    """Value and derivative columns of the expansion at points X (n, 2).

    coeffs/means/scales may carry a leading batch axis n (per-point
    expansions) or be unbatched (one shared expansion); numpy or Tensor.
    Returns (value (n,), {c: (n,)}, {c: (n,)}).
    """
    X = np.asarray(X, dtype=np.float64)
    n = X.shape[0]
    if np.asarray(ad.value_of(coeffs)).size == 0:
        zero = np.zeros(n)
        return zero, {c: zero.copy() for c in coords}, \
            {c: zero.copy() for c in hess_coords}
    # align: means/scales (..., K, 2) against X (n, 1, 2)
    diff0 = (X[:, None, 0] - means[..., 0]) / scales[..., 0]
    diff1 = (X[:, None, 1] - means[..., 1]) / scales[..., 1]
    g = coeffs * ad.exp(-(diff0 * diff0 + diff1 * diff1))   # (n, K)
    value = ad.vsum(g, axis=1)
    diffs = {0: diff0, 1: diff1}
    grad, hess = {}, {}
    for c in coords:
        u = diffs[c] / scales[..., c]     # (x_c - mu)/s^2
        grad[c] = ad.vsum(g * (-2.0 * u), axis=1)
    for c in hess_coords:
        u = diffs[c] / scales[..., c]
        grad_sq = 4.0 * u * u
        curv = 2.0 / (scales[..., c] * scales[..., c])
        hess[c] = ad.vsum(g * (grad_sq - curv), axis=1)
    return value, grad, hess


def rbf_eval(expansion, x, coords):
    """Jet of the expansion at a single 2-vector point."""
    x = np.asarray(x, dtype=np.float64).reshape(1, 2)
    coords = tuple(coords)
    value, grad, hess = rbf_eval_batch(expansion.coeffs, expansion.means,
                                       expansion.scales, x, coords, coords)
    return Jet(value=float(np.asarray(value)[0]),
               grad=np.array([np.asarray(grad[c])[0] for c in coords]),
               hess_diag=np.array([np.asarray(hess[c])[0] for c in coords]))
