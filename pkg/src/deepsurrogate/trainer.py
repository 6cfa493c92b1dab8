"""Collocation sampling, residual losses, and the training loops.

All losses run on plain numpy (fast evaluation) or on Tensor parameter
leaves (traced, for gradients) through the same code path: pass ``params``
(and ``w_params``) as leaves to trace. Network inputs are affinely mapped
from their recorded (domain x param_domain) boxes to [-1,1] before the raw
network; jet outputs are chain-scaled back to physical coordinates.
"""
from __future__ import annotations

import csv
import time
from collections import deque
from dataclasses import asdict, dataclass, field

import numpy as np

from .nn import autodiff as ad
from .nn.autodiff import NumericalError
from .nn.network import forward, forward_jet, init_dense, save_checkpoint, \
    load_checkpoint
from .nn.optimizer import OptimizerState, optimizer_step
from .nn.rbf import rbf_eval_batch, split_head_outputs
from .problems import Box, Dataset, IntegralProblem, LossWeights, PdeProblem


class TrainingDivergence(NumericalError):
    """The training loss became non-finite."""


@dataclass
class CollocationBatch:
    """One batch of sampled points.

    PDE problems fill interior/interior_theta/boundary; integral problems
    fill x/y/theta (pairs over the integration region).
    """

    interior: np.ndarray = None          # (N, d)
    interior_theta: np.ndarray = None    # (N, p)
    boundary: tuple = ()                 # ((name, pts (J_s, d), thetas (J_s, p)), ...)
    x: np.ndarray = None                 # (N,) integral collocation points
    y: np.ndarray = None                 # (N,) paired integration points
    theta: np.ndarray = None             # (N, p)


@dataclass
class TrainConfig:
    n_interior: int = 1024
    n_boundary: int = 256
    max_iterations: int = 20000
    loss_threshold: float = 0.0
    seed: int = 0
    weights: LossWeights = field(default_factory=LossWeights)
    mode: str = "mesh-free"              # or "fixed-mesh"
    parametric: bool = False
    hidden: tuple = (45, 45, 45, 45)
    w_hidden: tuple = None               # integrator net; defaults to hidden
    head: str = "dense"                  # "rbf" selects the RBF-head PDE path
    rbf_k: int = 100
    learning_rate: float = 1e-3
    lr_decay: float = 1.0                # total multiplicative decay over the run

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("iteration cap must be >= 1")
        if not 0.0 < self.lr_decay <= 1.0:
            raise ValueError("lr decay must be in (0, 1]")
        if self.loss_threshold < 0:
            raise ValueError("loss threshold must be >= 0")
        if self.n_interior < 1 or self.n_boundary < 1:
            raise ValueError("batch sizes must be >= 1")
        if self.mode not in ("mesh-free", "fixed-mesh"):
            raise ValueError(f"unknown training mode {self.mode!r}")
        if self.head not in ("dense", "rbf"):
            raise ValueError(f"unknown head {self.head!r}")
        self.hidden = tuple(self.hidden)
        if self.w_hidden is not None:
            self.w_hidden = tuple(self.w_hidden)
        if isinstance(self.weights, dict):
            self.weights = LossWeights(**self.weights)


class BatchJet:
    """Batched jet: value (n,), grad {coord: (n,)}, hess {coord: (n,)}."""

    __slots__ = ("value", "grad", "hess")

    def __init__(self, value, grad, hess):
        self.value = value
        self.grad = grad
        self.hess = hess


# -- input normalization ---------------------------------------------------

def _safe_halfwidth(box):
    h = box.halfwidth
    return np.where(h > 0, h, 1.0)


def normalize_inputs(X, box):
    """Affine map of columns from the box to [-1,1] (degenerate coords to 0)."""
    return (np.asarray(X, dtype=np.float64) - box.center) / _safe_halfwidth(box)


def _net_inputs(X, theta, domain, param_domain, input_dim):
    """Build the (possibly concatenated) normalized network input block."""
    d = X.shape[1]
    Xn = normalize_inputs(X, domain)
    if input_dim == d:
        return Xn
    p = param_domain.dim
    if input_dim != d + p:
        raise ValueError(f"network input_dim {input_dim} matches neither "
                         f"{d} nor {d + p}")
    if theta is None:
        raise ValueError("parameter-aware network needs parameter draws")
    theta = np.asarray(theta, dtype=np.float64)
    if theta.ndim == 1:
        theta = np.broadcast_to(theta, (X.shape[0], p))
    return np.concatenate([Xn, normalize_inputs(theta, param_domain)], axis=1)


def _dense_jet(net, params, X, theta, domain, param_domain, coords, hess_coords):
    """Physical-coordinate jet of a dense net at points X (theta appended
    when the net is parameter-aware)."""
    inputs = _net_inputs(X, theta, domain, param_domain, net.input_dim)
    ws, bs = (params[0::2], params[1::2]) if params is not None \
        else (net.weights, net.biases)
    val, grad, hess = forward_jet(ws, bs, inputs, coords, hess_coords,
                                  net.activation)
    h = _safe_halfwidth(domain)
    value = val[:, 0]
    grad = {c: grad[c][:, 0] * (1.0 / h[c]) for c in coords}
    hess = {c: hess[c][:, 0] * (1.0 / h[c] ** 2) for c in hess_coords}
    return BatchJet(value, grad, hess)


def _dense_value(net, params, X, theta, domain, param_domain):
    inputs = _net_inputs(X, theta, domain, param_domain, net.input_dim)
    ws, bs = (params[0::2], params[1::2]) if params is not None \
        else (net.weights, net.biases)
    return forward(ws, bs, inputs, net.activation)[:, 0]


# -- sampling --------------------------------------------------------------

def _boundary_counts(segments, j_total):
    """Allocate boundary points proportionally to segment measure
    (largest-remainder rounding, deterministic). Every segment keeps at
    least one point when the budget allows, so no target goes unenforced."""
    measures = np.array([s.measure for s in segments], dtype=np.float64)
    frac = j_total * measures / measures.sum()
    counts = np.floor(frac).astype(int)
    short = j_total - counts.sum()
    order = np.argsort(-(frac - counts), kind="stable")
    counts[order[:short]] += 1
    if j_total >= len(segments):
        while np.any(counts == 0):
            counts[np.argmax(counts)] -= 1
            counts[np.argmin(counts)] += 1
    return counts


def sample_batch(problem, config, rng):
    """Draw one collocation batch; see CollocationBatch for the layout."""
    n = config.n_interior
    if isinstance(problem, IntegralProblem):
        x = rng.uniform(problem.a, problem.b_star, n)
        if problem.volterra:
            # density toward the diagonal y -> x falls like sqrt(x - y) so
            # weakly singular kernels keep finite second moments in the loss
            upper = np.maximum(np.minimum(x, problem.b_star)
                               - problem.min_gap, problem.a)
            y = upper - (upper - problem.a) * rng.random(n) ** (2.0 / 3.0)
        else:
            y = problem.a + (problem.b_star - problem.a) * rng.random(n)
        theta = problem.param_domain.sample(rng, n)
        return CollocationBatch(x=x, y=y, theta=theta)
    interior = problem.domain.sample(rng, n)
    interior_theta = problem.param_domain.sample(rng, n)
    counts = _boundary_counts(problem.segments, config.n_boundary)
    boundary = []
    for seg, cnt in zip(problem.segments, counts):
        pts = seg.sample(rng, int(cnt))
        thetas = problem.param_domain.sample(rng, int(cnt))
        boundary.append((seg.name, pts, thetas))
    return CollocationBatch(interior=interior, interior_theta=interior_theta,
                            boundary=tuple(boundary))


# -- PDE losses ------------------------------------------------------------

def _check_residual_finite(residual, X):
    vals = ad.value_of(residual)
    if not np.all(np.isfinite(vals)):
        idx = int(np.argmax(~np.isfinite(vals)))
        raise NumericalError(
            f"non-finite residual at collocation point index {idx}, "
            f"x = {np.asarray(X)[idx]}")


def _pde_core(net, problem, batch, weights, params, theta_override):
    X = batch.interior
    override_arr = isinstance(theta_override, np.ndarray)
    if theta_override is not None and not override_arr \
            and net.input_dim != X.shape[1]:
        raise ValueError("a traced theta override requires a network that "
                         "does not take theta as input")
    theta_rows = theta_override if theta_override is not None \
        else batch.interior_theta
    input_theta = theta_override if override_arr else batch.interior_theta
    jet = _dense_jet(net, params, X, input_theta, problem.domain,
                     problem.param_domain, problem.jet_coords,
                     problem.hess_coords)
    residual = problem.residual(X, jet, theta_rows)
    _check_residual_finite(residual, X)
    loss = weights.nu1 * ad.vmean(ad.square(residual))
    seg_by_name = {s.name: s for s in problem.segments}
    boundary_total = 0.0
    for name, pts, phis in batch.boundary:
        if pts.shape[0] == 0:
            continue
        seg = seg_by_name[name]
        phi_rows = theta_override if theta_override is not None else phis
        phi_input = theta_override if override_arr else phis
        value = _dense_value(net, params, pts, phi_input, problem.domain,
                             problem.param_domain)
        mismatch = value - seg.target(pts, phi_rows)
        boundary_total = boundary_total + seg.weight * ad.vmean(
            ad.square(mismatch))
    return loss + weights.nu2 * boundary_total


def pde_loss(net, problem, batch, weights, params=None, theta=None):
    """Fixed-parameter residual loss: nu1 * mean squared interior residual
    + nu2 * per-segment weighted mean squared boundary mismatch. ``theta``
    optionally overrides the batch parameter draws in the residual and
    boundary evaluators (used by the augmented path)."""
    return _pde_core(net, problem, batch, weights, params, theta)


def parametric_pde_loss(net, problem, batch, weights, params=None):
    """Parametric residual loss: per-point parameter draws enter both the
    network input and the evaluators. Dispatches to the RBF-head path when
    given an RbfHead."""
    if isinstance(net, RbfHead):
        return _rbf_pde_core(net, problem, batch, weights, params)
    d, p = problem.dim, problem.param_dim
    if net.input_dim != d + p:
        raise ValueError(f"parametric network must take {d + p} inputs, "
                         f"got {net.input_dim}")
    return _pde_core(net, problem, batch, weights, params, None)


@dataclass
class RbfHead:
    """Marker for the RBF-head architecture: a head network mapping theta to
    the 5K raw outputs of a K-basis Gaussian expansion over the domain."""

    net: object
    k: int
    domain: Box

    def __post_init__(self):
        if self.net.output_dim != 5 * self.k:
            raise ValueError(f"head output_dim {self.net.output_dim} "
                             f"!= 5K = {5 * self.k}")

    @property
    def input_dim(self):
        return self.net.input_dim


def _rbf_expansions(head, params, theta, param_domain):
    ws, bs = (params[0::2], params[1::2]) if params is not None \
        else (head.net.weights, head.net.biases)
    tn = normalize_inputs(theta, param_domain)
    raw = forward(ws, bs, tn, head.net.activation)
    return split_head_outputs(raw, head.domain.bounds)


def _rbf_pde_core(head, problem, batch, weights, params):
    X = batch.interior
    coeffs, means, scales = _rbf_expansions(head, params, batch.interior_theta,
                                            problem.param_domain)
    value, grad, hess = rbf_eval_batch(coeffs, means, scales, X,
                                       problem.jet_coords, problem.hess_coords)
    jet = BatchJet(value, grad, hess)
    residual = problem.residual(X, jet, batch.interior_theta)
    _check_residual_finite(residual, X)
    loss = weights.nu1 * ad.vmean(ad.square(residual))
    seg_by_name = {s.name: s for s in problem.segments}
    boundary_total = 0.0
    for name, pts, phis in batch.boundary:
        if pts.shape[0] == 0:
            continue
        seg = seg_by_name[name]
        c, mu, s = _rbf_expansions(head, params, phis, problem.param_domain)
        value, _, _ = rbf_eval_batch(c, mu, s, pts)
        mismatch = value - seg.target(pts, phis)
        boundary_total = boundary_total + seg.weight * ad.vmean(
            ad.square(mismatch))
    return loss + weights.nu2 * boundary_total


# -- integral losses -------------------------------------------------------

def _integral_boxes(problem):
    interval = (problem.a, problem.b_star)
    return Box(interval), Box(interval, interval)


def integral_loss(u_net, w_net, problem, batch, weights, params=None,
                  w_params=None, theta_override=None):
    """Integrator-network loss: mean of nu1 (dw/dy - k u(y))^2 over (x,y)
    pairs, plus nu2 w(x,a)^2 and nu3 closure^2 at the x points, where the
    closure is v + w(x,b(x)) (first kind) or u(x) - v - w(x,b(x)) (second)."""
    u_box, w_box = _integral_boxes(problem)
    x, y = batch.x, batch.y
    n = x.shape[0]
    theta_rows = theta_override if theta_override is not None else batch.theta
    kernel = problem.k(x, y, theta_rows)
    kvals = ad.value_of(kernel)
    if not np.all(np.isfinite(kvals)):
        idx = int(np.argmax(~np.isfinite(kvals)))
        raise NumericalError(
            f"non-finite kernel value at pair index {idx}, "
            f"(x, y) = ({x[idx]}, {y[idx]})")
    v_vals = problem.v(x, theta_rows)
    # term 1 at (x, y): dw/dy must match k(x,y) u(y)
    pairs = np.column_stack([x, y])
    w_jet = _dense_jet(w_net, w_params, pairs, batch.theta, w_box,
                       problem.param_domain, (1,), ())
    u_at_y = _dense_value(u_net, params, y[:, None], batch.theta, u_box,
                          problem.param_domain)
    term1 = ad.vmean(ad.square(w_jet.grad[1] - kernel * u_at_y))
    # term 2 at x: w(x, a) = 0
    at_a = np.column_stack([x, np.full(n, problem.a)])
    w_at_a = _dense_value(w_net, w_params, at_a, batch.theta, w_box,
                          problem.param_domain)
    term2 = ad.vmean(ad.square(w_at_a))
    # term 3 at x: closure against v
    b_of_x = x if problem.volterra else np.full(n, problem.b_star)
    at_b = np.column_stack([x, b_of_x])
    w_at_b = _dense_value(w_net, w_params, at_b, batch.theta, w_box,
                          problem.param_domain)
    if problem.kind == "first":
        closure = v_vals + w_at_b
    else:
        u_at_x = _dense_value(u_net, params, x[:, None], batch.theta, u_box,
                              problem.param_domain)
        closure = u_at_x - v_vals - w_at_b
    term3 = ad.vmean(ad.square(closure))
    return weights.nu1 * term1 + weights.nu2 * term2 + weights.nu3 * term3


# -- augmented losses ------------------------------------------------------

def augmented_loss(nets, problem, batch, dataset, weights, params=None,
                   theta=None):
    """Base residual loss plus a squared data-mismatch term, for the
    simultaneous point-estimate over network parameters and theta.

    nets: a single network (PDE) or a (u_net, w_net) pair (integral);
    params correspondingly a flat leaf list or a pair of lists. theta is the
    current parameter iterate (vector or Tensor leaf); defaults to the batch
    draws when omitted.
    """
    if dataset is None or dataset.m == 0:
        raise ValueError("augmented loss requires a nonempty dataset")
    if isinstance(problem, IntegralProblem):
        u_net, w_net = nets
        u_params, w_params = params if params is not None else (None, None)
        base = integral_loss(u_net, w_net, problem, batch, weights,
                             params=u_params, w_params=w_params,
                             theta_override=theta)
        u_box, _ = _integral_boxes(problem)
        pred = _dense_value(u_net, u_params, dataset.x, theta, u_box,
                            problem.param_domain)
        data_term = ad.vmean(ad.square(pred - dataset.z))
        return base + weights.nu4 * data_term
    net = nets
    base = _pde_core(net, problem, batch, weights, params, theta)
    pred = _dense_value(net, params, dataset.x, theta, problem.domain,
                        problem.param_domain)
    data_term = ad.vmean(ad.square(pred - dataset.z))
    return base + weights.nu3 * data_term


# -- training --------------------------------------------------------------

@dataclass
class SurrogateModel:
    """A trained solution surrogate plus everything needed to evaluate it."""

    problem: object
    kind: str                    # "pde_dense" | "pde_rbf" | "integral"
    parametric: bool
    domain: Box
    param_domain: Box
    config: TrainConfig
    metadata: dict
    u_net: object = None
    w_net: object = None
    head: RbfHead = None

    @property
    def observable(self):
        """What predict() returns: the field value, or the electrode current."""
        return "current" if self.problem_id == "voltammetry_pde" else "value"

    @property
    def problem_id(self):
        return self.problem.problem_id

    def predict(self, X, theta):
        """Observable at points X (M,) or (M, d) for one parameter vector.
        For voltammetry PDE surrogates X holds times and the observable is
        the electrode current; otherwise it is the field value at X."""
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[:, None]
        theta = np.atleast_1d(np.asarray(theta, dtype=np.float64))
        if self.kind == "integral":
            u_box, _ = _integral_boxes(self.problem)
            return _dense_value(self.u_net, None, X, theta, u_box,
                                self.param_domain)
        if self.observable == "current":
            t = X[:, 0]
            pts = np.column_stack([np.zeros_like(t), t])
            if self.kind == "pde_rbf":
                coeffs, means, scales = _rbf_expansions(
                    self.head, None, theta[None, :], self.param_domain)
                _, grad, _ = rbf_eval_batch(coeffs[0], means[0], scales[0],
                                            pts, (0,), ())
            else:
                jet = _dense_jet(self.u_net, None, pts, theta, self.domain,
                                 self.param_domain, (0,), ())
                grad = jet.grad
            return grad[0]
        return _dense_value(self.u_net, None, X, theta, self.domain,
                            self.param_domain)

    def current(self, t, E0):
        """Electrode current: concentration slope at the electrode at time t
        under half-wave potential E0, for voltammetry PDE surrogates."""
        if self.problem_id != "voltammetry_pde":
            raise ValueError("current() is defined for voltammetry PDE "
                             "surrogates only")
        t_arr = np.atleast_1d(np.asarray(t, dtype=np.float64))
        out = self.predict(t_arr, np.atleast_1d(np.asarray(E0)))
        return float(out[0]) if np.asarray(t).ndim == 0 else out

    def save(self, paths, extra=None):
        """Write checkpoints; paths maps role ('u'|'w'|'head') to filenames.
        extra entries are merged into every checkpoint document."""
        extra_common = {
            "problem_id": self.problem_id,
            "domain": self.domain.tolist(),
            "param_domain": self.param_domain.tolist(),
            "train_config": asdict(self.config),
            "metadata": self.metadata,
            "kind": self.kind,
            "parametric": self.parametric,
        }
        if extra:
            extra_common.update(extra)
        nets = {"u": self.u_net, "w": self.w_net,
                "head": self.head.net if self.head else None}
        for role, path in paths.items():
            net = nets[role]
            doc = dict(extra_common, role=role)
            if role == "head":
                doc["rbf_k"] = self.head.k
            save_checkpoint(net, path, extra=doc)


def load_surrogate(problem, paths):
    """Rebuild a SurrogateModel from checkpoints written by save()."""
    docs = {}
    nets = {}
    for role, path in paths.items():
        nets[role], docs[role] = load_checkpoint(path)
    doc = next(iter(docs.values()))
    if doc["problem_id"] != problem.problem_id:
        raise ValueError(f"checkpoint problem_id {doc['problem_id']!r} does "
                         f"not match problem {problem.problem_id!r}")
    cfg_doc = dict(doc["train_config"])
    cfg_doc["weights"] = LossWeights(**cfg_doc["weights"])
    for key in ("hidden", "w_hidden"):
        if cfg_doc.get(key) is not None:
            cfg_doc[key] = tuple(cfg_doc[key])
    config = TrainConfig(**cfg_doc)
    domain = Box(doc["domain"])
    param_domain = Box(doc["param_domain"])
    kind = doc["kind"]
    head = None
    if kind == "pde_rbf":
        head = RbfHead(net=nets["head"], k=docs["head"]["rbf_k"], domain=domain)
    return SurrogateModel(problem=problem, kind=kind,
                          parametric=doc["parametric"], domain=domain,
                          param_domain=param_domain, config=config,
                          metadata=doc["metadata"], u_net=nets.get("u"),
                          w_net=nets.get("w"), head=head)


def _build_networks(problem, config, seeds):
    """Architecture per problem family and config."""
    p = problem.param_dim if config.parametric else 0
    hidden = list(config.hidden)
    w_hidden = list(config.w_hidden) if config.w_hidden is not None else hidden
    if isinstance(problem, IntegralProblem):
        u = init_dense([1 + p] + hidden + [1], seed=seeds[0])
        w = init_dense([2 + p] + w_hidden + [1], seed=seeds[1])
        return {"u": u, "w": w}
    if config.head == "rbf":
        if not config.parametric:
            raise ValueError("the RBF head is a parametric architecture")
        net = init_dense([problem.param_dim] + hidden + [5 * config.rbf_k],
                         seed=seeds[0])
        return {"head": RbfHead(net=net, k=config.rbf_k, domain=problem.domain)}
    u = init_dense([problem.dim + p] + hidden + [1], seed=seeds[0])
    return {"u": u}


def _adam_loop(problem, config, rng, flat_params, loss_fn, log_path,
               deterministic):
    """Shared optimization loop: mesh-free mode resamples the collocation
    batch every iteration, fixed-mesh samples once; stops at the iteration
    cap or when the 100-iteration moving average of the loss drops below the
    threshold. Streams an iteration,loss,wall_clock_ms log when asked."""
    state = OptimizerState(lr=config.learning_rate).init_like(flat_params)
    log_file = open(log_path, "w", newline="") if log_path else None
    writer = csv.writer(log_file) if log_file else None
    if writer:
        writer.writerow(["iteration", "loss", "wall_clock_ms"])
    window = deque(maxlen=100)
    t0 = time.perf_counter()
    batch = sample_batch(problem, config, rng)
    final_loss = np.inf
    iterations_run = 0
    try:
        for it in range(config.max_iterations):
            if config.lr_decay < 1.0:
                state.lr = config.learning_rate * config.lr_decay ** (
                    it / max(1, config.max_iterations - 1))
            if config.mode == "mesh-free" and it > 0:
                batch = sample_batch(problem, config, rng)
            leaves = [ad.Tensor(p) for p in flat_params]
            loss = loss_fn(batch, leaves)
            lval = float(loss.data)
            if not np.isfinite(lval):
                raise TrainingDivergence(
                    f"training loss became non-finite at iteration {it}")
            grads = ad.gradient(loss, leaves)
            optimizer_step(flat_params, grads, state)
            window.append(lval)
            final_loss = lval
            iterations_run = it + 1
            if writer:
                ms = 0.0 if deterministic \
                    else (time.perf_counter() - t0) * 1000.0
                writer.writerow([it, repr(lval), f"{ms:.3f}"])
            if len(window) == window.maxlen and \
                    sum(window) / len(window) < config.loss_threshold:
                break
    finally:
        if log_file:
            log_file.close()
    return final_loss, iterations_run


def _split_leaves(leaves, sizes):
    split = []
    off = 0
    for s in sizes:
        split.append(leaves[off:off + s])
        off += s
    return split


def train(problem, config, log_path=None, deterministic=False):
    """Train a surrogate for the problem under the config; see _adam_loop
    for the iteration/stopping behavior."""
    seeds = np.random.SeedSequence(config.seed).generate_state(4)
    rng = np.random.default_rng(seeds[2])
    nets = _build_networks(problem, config, seeds)
    if "head" in nets:
        net_list = [nets["head"].net]
    else:
        net_list = [nets[r] for r in ("u", "w") if r in nets]
    flat_params = [p for net in net_list for p in net.params()]
    sizes = [len(net.params()) for net in net_list]

    def loss_fn(batch, leaves):
        split = _split_leaves(leaves, sizes)
        if isinstance(problem, IntegralProblem):
            return integral_loss(nets["u"], nets["w"], problem, batch,
                                 config.weights, params=split[0],
                                 w_params=split[1])
        if "head" in nets:
            return parametric_pde_loss(nets["head"], problem, batch,
                                       config.weights, params=split[0])
        if config.parametric:
            return parametric_pde_loss(nets["u"], problem, batch,
                                       config.weights, params=split[0])
        return pde_loss(nets["u"], problem, batch, config.weights,
                        params=split[0])

    final_loss, iterations_run = _adam_loop(
        problem, config, rng, flat_params, loss_fn, log_path, deterministic)
    metadata = {"final_loss": final_loss, "iterations": iterations_run,
                "seed": config.seed}
    if isinstance(problem, IntegralProblem):
        kind = "integral"
        domain = Box((problem.a, problem.b_star))
    else:
        kind = "pde_rbf" if "head" in nets else "pde_dense"
        domain = problem.domain
    return SurrogateModel(problem=problem, kind=kind,
                          parametric=config.parametric, domain=domain,
                          param_domain=problem.param_domain, config=config,
                          metadata=metadata, u_net=nets.get("u"),
                          w_net=nets.get("w"), head=nets.get("head"))


def train_augmented(problem, dataset, config, log_path=None,
                    deterministic=False):
    """Simultaneous point estimate: one Adam run over the network parameters
    and theta together, on the residual loss plus the data-mismatch term.
    theta starts at the parameter-box center and is not constrained to the
    box during optimization. Returns (nets, theta_hat, metadata)."""
    if config.parametric or config.head != "dense":
        raise ValueError("augmented training uses a fixed-input dense "
                         "network; set parametric=False, head='dense'")
    seeds = np.random.SeedSequence(config.seed).generate_state(4)
    rng = np.random.default_rng(seeds[2])
    nets = _build_networks(problem, config, seeds)
    net_list = [nets[r] for r in ("u", "w") if r in nets]
    theta = problem.param_domain.center.copy()
    flat_params = [p for net in net_list for p in net.params()] + [theta]
    sizes = [len(net.params()) for net in net_list]

    def loss_fn(batch, leaves):
        split = _split_leaves(leaves, sizes)
        theta_leaf = leaves[-1]
        if isinstance(problem, IntegralProblem):
            return augmented_loss((nets["u"], nets["w"]), problem, batch,
                                  dataset, config.weights,
                                  params=(split[0], split[1]),
                                  theta=theta_leaf)
        return augmented_loss(nets["u"], problem, batch, dataset,
                              config.weights, params=split[0],
                              theta=theta_leaf)

    final_loss, iterations_run = _adam_loop(
        problem, config, rng, flat_params, loss_fn, log_path, deterministic)
    metadata = {"final_loss": final_loss, "iterations": iterations_run,
                "seed": config.seed}
    return nets, theta, metadata
