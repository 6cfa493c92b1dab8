"""Dense tanh networks with exact input-derivative propagation (jets).

Weights are plain numpy arrays on the network object. The forward and jet
recursions are written once over the dual-dispatch helpers in ``autodiff``,
so the same code produces fast untraced numpy results or a traced graph when
the parameters are Tensor leaves.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad

CHECKPOINT_FORMAT_VERSION = 1


@dataclass
class Jet:
    """Value and first/second pure derivatives w.r.t. requested coordinates."""

    value: float
    grad: np.ndarray
    hess_diag: np.ndarray


@dataclass
class DenseNetwork:
    """Layered affine+tanh approximator; identity output layer.

    activation "identity" disables the hidden nonlinearity (test hook: it
    makes every second derivative exactly zero).
    """

    weights: list = field(default_factory=list)  # (out, in) per layer
    biases: list = field(default_factory=list)   # (out,) per layer
    activation: str = "tanh"

    def __post_init__(self):
        if self.activation not in ("tanh", "identity"):
            raise ValueError(f"unknown activation {self.activation!r}")
        for i in range(1, len(self.weights)):
            if self.weights[i].shape[1] != self.weights[i - 1].shape[0]:
                raise ValueError("adjacent layer dimensions are inconsistent")
        for W, b in zip(self.weights, self.biases):
            if W.shape[0] != b.shape[0]:
                raise ValueError("bias length must match layer output dimension")
            if not (np.all(np.isfinite(W)) and np.all(np.isfinite(b))):
                raise ValueError("network parameters must be finite")

    @property
    def input_dim(self):
        return self.weights[0].shape[1]

    @property
    def output_dim(self):
        return self.weights[-1].shape[0]

    @property
    def layer_dims(self):
        return [self.input_dim] + [W.shape[0] for W in self.weights]

    @property
    def n_params(self):
        return sum(W.size + b.size for W, b in zip(self.weights, self.biases))

    def params(self):
        """Flat parameter list [W0, b0, W1, b1, ...] (the arrays themselves)."""
        out = []
        for W, b in zip(self.weights, self.biases):
            out.append(W)
            out.append(b)
        return out

    def param_leaves(self):
        """Fresh Tensor leaves over the current parameters, same flat order."""
        return [ad.Tensor(p) for p in self.params()]

    def eval(self, x):
        """Forward pass for a single input vector; returns (output_dim,)."""
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 1 or x.shape[0] != self.input_dim:
            raise ValueError(
                f"input length {x.shape} does not match input_dim {self.input_dim}")
        return forward(self.weights, self.biases, x[None, :], self.activation)[0]

    def eval_batch(self, X):
        return forward(self.weights, self.biases, np.asarray(X, dtype=np.float64),
                       self.activation)

    def eval_jet(self, x, coords):
        """Jet (value, grad, hess_diag) at a point, for a scalar-output net."""
        if self.output_dim != 1:
            raise ValueError("eval_jet requires a scalar-output network")
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 1 or x.shape[0] != self.input_dim:
            raise ValueError(
                f"input length {x.shape} does not match input_dim {self.input_dim}")
        coords = tuple(coords)
        for c in coords:
            if not 0 <= c < self.input_dim:
                raise ValueError(f"coordinate {c} out of range for input_dim "
                                 f"{self.input_dim}")
        val, grad, hess = forward_jet(self.weights, self.biases, x[None, :],
                                      coords, coords, self.activation)
        return Jet(value=float(val[0, 0]),
                   grad=np.array([grad[c][0, 0] for c in coords]),
                   hess_diag=np.array([hess[c][0, 0] for c in coords]))


def init_dense(layer_dims, seed, activation="tanh"):
    """Symmetric-uniform init with per-layer half-width sqrt(6/(fan_in+fan_out))."""
    dims = list(layer_dims)
    if len(dims) < 2:
        raise ValueError("layer_dims needs at least an input and an output entry")
    if any((not float(d).is_integer()) or d < 1 for d in dims):
        raise ValueError("layer_dims entries must be positive integers")
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        hw = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-hw, hw, size=(fan_out, fan_in)))
        biases.append(rng.uniform(-hw, hw, size=fan_out))
    return DenseNetwork(weights=weights, biases=biases, activation=activation)


def _pairs(params):
    """Group a flat [W0, b0, W1, b1, ...] list into (W, b) pairs."""
    return list(zip(params[0::2], params[1::2]))


def forward(ws, bs, X, activation="tanh"):
    """Batched forward pass. X is a constant (n, input_dim) array; parameters
    may be numpy arrays or Tensor leaves. Returns (n, output_dim) of matching
    type."""
    pairs = list(zip(ws, bs))
    A = X
    last = len(pairs) - 1
    for i, (W, b) in enumerate(pairs):
        Z = A @ W.T + b
        A = ad.tanh(Z) if (i < last and activation == "tanh") else Z
    return A


def forward_flat(flat_params, X, activation="tanh"):
    """forward() over a flat [W0, b0, W1, b1, ...] parameter list."""
    pairs = _pairs(flat_params)
    return forward([W for W, _ in pairs], [b for _, b in pairs], X, activation)


def forward_jet(ws, bs, X, coords, hess_coords, activation="tanh"):
    """Value plus first/second derivative columns w.r.t. selected input coords.

    Propagates (A, dA/dx_c, d2A/dx_c2) through each layer using
    tanh' = 1 - tanh^2 and tanh'' = -2 tanh (1 - tanh^2). Returns
    (value (n,out), {c: (n,out)}, {c: (n,out)}); hess entries only for
    hess_coords. Parameters may be numpy arrays or Tensor leaves.
    """
    n, d = X.shape
    coords = tuple(coords)
    hess_coords = tuple(hess_coords)
    pairs = list(zip(ws, bs))
    A = X
    dA = {}
    for c in coords:
        e = np.zeros((1, d))
        e[0, c] = 1.0
        dA[c] = np.broadcast_to(e, (n, d))
    d2A = {c: np.zeros((1, d)) for c in hess_coords}
    last = len(pairs) - 1
    for i, (W, b) in enumerate(pairs):
        Z = A @ W.T + b
        dZ = {c: dA[c] @ W.T for c in coords}
        d2Z = {c: d2A[c] @ W.T for c in hess_coords}
        if i < last and activation == "tanh":
            T = ad.tanh(Z)
            S = 1.0 - T * T
            for c in hess_coords:
                d2A[c] = S * d2Z[c] - (2.0 * T) * S * (dZ[c] * dZ[c])
            for c in coords:
                dA[c] = S * dZ[c]
            A = T
        else:
            A, dA, d2A = Z, dZ, d2Z
    return A, dA, d2A


def param_gradient(loss, leaves):
    """Exact gradient of a traced scalar loss w.r.t. the given parameter leaves."""
    return ad.gradient(loss, leaves)


# -- checkpoints -----------------------------------------------------------

def save_checkpoint(net, path, extra=None, optimizer_state=None):
    """Write a network (plus optional extras) as JSON; value-exact round trip."""
    doc = {
        "format_version": CHECKPOINT_FORMAT_VERSION,
        "layer_dims": net.layer_dims,
        "activation": net.activation,
        "weights": [W.tolist() for W in net.weights],
        "biases": [b.tolist() for b in net.biases],
    }
    if optimizer_state is not None:
        doc["optimizer_state"] = optimizer_state
    if extra:
        for k, v in extra.items():
            doc[k] = v
    with open(path, "w", encoding="utf-8") as f:
        json.dump(doc, f, sort_keys=True, indent=1)
        f.write("\n")


def load_checkpoint(path):
    """Read a checkpoint; returns (DenseNetwork, full document dict)."""
    with open(path, encoding="utf-8") as f:
        doc = json.load(f)
    if doc.get("format_version") != CHECKPOINT_FORMAT_VERSION:
        raise ValueError(f"unsupported checkpoint format_version "
                         f"{doc.get('format_version')!r}")
    net = DenseNetwork(
        weights=[np.asarray(W, dtype=np.float64) for W in doc["weights"]],
        biases=[np.asarray(b, dtype=np.float64) for b in doc["biases"]],
        activation=doc.get("activation", "tanh"),
    )
    if net.layer_dims != list(doc["layer_dims"]):
        raise ValueError("checkpoint layer_dims do not match stored arrays")
    return net, doc
