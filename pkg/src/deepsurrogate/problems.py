"""Declarative problem definitions and the shipped instances.

A PdeProblem carries a residual evaluator over jets plus boundary segments;
an IntegralProblem carries the kernel/forcing pair and the integration rule.
Residual and forcing evaluators are written over plain operators so they run
on numpy arrays or traced Tensors alike (the augmented loss differentiates
through theta).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

E_START_DEFAULT = -10.0
VOLTAMMETRY_DOMAIN = ((0.0, 200.0), (0.0, 20.0))
ABEL_GAP_FRACTION = 1e-8


@dataclass(frozen=True)
class Box:
    """Axis-aligned box of per-coordinate (lower, upper) bounds.

    Degenerate coordinates (lower == upper) are allowed so a parameter domain
    can collapse to a single point; sampling then returns the bound exactly.
    """

    bounds: tuple

    def __init__(self, *bounds):
        if len(bounds) == 1 and hasattr(bounds[0], "__len__") and \
                len(bounds[0]) and hasattr(bounds[0][0], "__len__"):
            bounds = tuple(bounds[0])
        clean = []
        for lo, hi in bounds:
            lo, hi = float(lo), float(hi)
            if not (np.isfinite(lo) and np.isfinite(hi) and lo <= hi):
                raise ValueError(f"invalid box coordinate ({lo}, {hi})")
            clean.append((lo, hi))
        object.__setattr__(self, "bounds", tuple(clean))

    @property
    def dim(self):
        return len(self.bounds)

    @property
    def lo(self):
        return np.array([b[0] for b in self.bounds])

    @property
    def hi(self):
        return np.array([b[1] for b in self.bounds])

    @property
    def center(self):
        return (self.lo + self.hi) / 2.0

    @property
    def halfwidth(self):
        return (self.hi - self.lo) / 2.0

    def sample(self, rng, n):
        """n uniform points; exact at the lower bound for degenerate coords."""
        u = rng.random((n, self.dim))
        return self.lo + (self.hi - self.lo) * u

    def contains(self, pts, atol=0.0):
        pts = np.atleast_2d(np.asarray(pts, dtype=np.float64))
        return np.all((pts >= self.lo - atol) & (pts <= self.hi + atol), axis=1)

    def tolist(self):
        return [list(b) for b in self.bounds]


@dataclass(frozen=True)
class BoundarySegment:
    """One face of the boundary: a sampler, a target, a weight, a measure."""

    name: str
    sample: object          # sample(rng, n) -> (n, d) points on the face
    target: object          # target(X, theta) -> (n,) target values
    weight: float = 1.0
    measure: float = 1.0


@dataclass(frozen=True)
class PdeProblem:
    problem_id: str
    domain: Box
    param_domain: Box
    residual: object        # residual(X, jet, theta) -> (n,)
    segments: tuple
    jet_coords: tuple       # coordinates needing first derivatives
    hess_coords: tuple      # subset needing second derivatives

    @property
    def dim(self):
        return self.domain.dim

    @property
    def param_dim(self):
        return self.param_domain.dim


@dataclass(frozen=True)
class IntegralProblem:
    """0 = v + int k u (first kind) or u = v + int k u (second kind), over
    [a, b(x)] with b(x) = x (Volterra) or b* (Fredholm)."""

    problem_id: str
    kind: str               # "first" | "second"
    volterra: bool          # upper limit rule: x if True, b* if False
    a: float
    b_star: float
    v: object               # v(x, theta) -> (n,)
    k: object               # k(x, y, theta) -> (n,)
    param_domain: Box

    def __post_init__(self):
        if self.kind not in ("first", "second"):
            raise ValueError(f"unknown equation kind {self.kind!r}")
        if not self.a < self.b_star:
            raise ValueError("interval requires a < b*")

    @property
    def min_gap(self):
        """Minimum x - y gap enforced when sampling Volterra pairs."""
        return ABEL_GAP_FRACTION * (self.b_star - self.a)

    def upper(self, x):
        return x if self.volterra else np.full_like(np.asarray(x), self.b_star)

    @property
    def domain(self):
        return Box((self.a, self.b_star))

    @property
    def dim(self):
        return 1

    @property
    def param_dim(self):
        return self.param_domain.dim


@dataclass(frozen=True)
class Dataset:
    """Observed pairs (x_i, z_i)."""

    x: np.ndarray           # (M, d)
    z: np.ndarray           # (M,)

    def __post_init__(self):
        x = np.asarray(self.x, dtype=np.float64)
        if x.ndim == 1:
            x = x[:, None]
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "z",
                           np.atleast_1d(np.asarray(self.z, dtype=np.float64)))
        if self.x.shape[0] != self.z.shape[0]:
            raise ValueError("point and value counts must agree")

    @property
    def m(self):
        return self.z.shape[0]


@dataclass(frozen=True)
class LossWeights:
    nu1: float = 1.0
    nu2: float = 1.0
    nu3: float = 1.0
    nu4: float = 1.0

    def __post_init__(self):
        vals = (self.nu1, self.nu2, self.nu3, self.nu4)
        if any(v < 0 for v in vals):
            raise ValueError("loss weights must be nonnegative")
        if not any(v > 0 for v in vals):
            raise ValueError("at least one loss weight must be positive")


# -- voltammetry -----------------------------------------------------------

def voltammetry_boundary(t, E0, E_start=E_START_DEFAULT):
    """Electrode-surface concentration 1/(1+exp(E_start+t-E0))."""
    from .nn import autodiff as ad
    z = E_start + t - E0
    if isinstance(z, ad.Tensor):
        return 1.0 / (1.0 + ad.exp(z))
    with np.errstate(over="ignore"):
        return 1.0 / (1.0 + np.exp(z))


def _as_box(bounds, default):
    if bounds is None:
        return default
    return bounds if isinstance(bounds, Box) else Box(bounds)


def voltammetry_pde(e0_range=None, e_start=E_START_DEFAULT):
    """Diffusion PDE dC/dt = d2C/dx2 on [0,200]x[0,20] with logistic electrode
    boundary, far-field 1, initial value 1; parametric over E0."""
    e0_range = _as_box(e0_range, Box((-6.0, 6.0)))
    domain = Box(*VOLTAMMETRY_DOMAIN)
    x_hi = VOLTAMMETRY_DOMAIN[0][1]
    t_hi = VOLTAMMETRY_DOMAIN[1][1]

    def residual(X, jet, theta):
        return jet.grad[1] - jet.hess[0]

    def sample_initial(rng, n):
        pts = np.zeros((n, 2))
        pts[:, 0] = rng.uniform(0.0, x_hi, n)
        return pts

    def sample_far(rng, n):
        pts = np.empty((n, 2))
        pts[:, 0] = x_hi
        pts[:, 1] = rng.uniform(0.0, t_hi, n)
        return pts

    def sample_electrode(rng, n):
        pts = np.zeros((n, 2))
        pts[:, 1] = rng.uniform(0.0, t_hi, n)
        return pts

    def ones_target(X, theta):
        return np.ones(X.shape[0])

    def electrode_target(X, theta):
        theta = np.asarray(theta, dtype=np.float64)
        e0 = theta[..., 0]
        return voltammetry_boundary(X[:, 1], e0, e_start)

    segments = (
        BoundarySegment("initial", sample_initial, ones_target, measure=x_hi),
        BoundarySegment("far_field", sample_far, ones_target, measure=t_hi),
        BoundarySegment("electrode", sample_electrode, electrode_target,
                        measure=t_hi),
    )
    return PdeProblem(problem_id="voltammetry_pde", domain=domain,
                      param_domain=e0_range, residual=residual,
                      segments=segments, jet_coords=(0, 1), hess_coords=(0,))


def voltammetry_integral(e0_range=None, e_start=E_START_DEFAULT):
    """Abel Volterra equation of the first kind for the current I(t):
    0 = v(t|E0) + int_0^t I(tau)/sqrt(t-tau) dtau."""
    from .nn import autodiff as ad
    e0_range = _as_box(e0_range, Box((-6.0, 6.0)))

    def v(x, theta):
        theta = np.asarray(theta, dtype=np.float64)
        e0 = theta[..., 0]
        z = -(e_start + x - e0)
        with np.errstate(over="ignore"):
            return -np.sqrt(np.pi) / (1.0 + np.exp(z))

    def k(x, y, theta):
        return 1.0 / ad.sqrt(x - y)

    return IntegralProblem(problem_id="voltammetry_integral", kind="first",
                           volterra=True, a=0.0, b_star=20.0, v=v, k=k,
                           param_domain=e0_range)


# -- Fin / Biot ------------------------------------------------------------

def biot_eval(theta, x):
    """Polynomial Biot number sum_n theta_n x^n, n = 0..15, by Horner's rule.

    theta may be a 16-vector, an (n, 16) batch of rows, or a traced Tensor;
    x a scalar or array broadcastable against the leading shape.
    """
    acc = theta[..., 15]
    for n in range(14, -1, -1):
        acc = acc * x + theta[..., n]
    return acc


def biot_prior_domain():
    """Decaying prior box: theta_n in [-d_n/4, d_n], d_0=d_1=20, d_{n+1}=d_n/2."""
    d = [20.0, 20.0]
    while len(d) < 16:
        d.append(d[-1] / 2.0)
    return Box(*[(-dn / 4.0, dn) for dn in d])


def fin_problem(theta_domain=None, a=0.1, u_a=1.0, u_1=0.5):
    """Fin equation u'' + u'/x - Bi(x|theta) u = 0 on [a,1], Dirichlet ends."""
    if not 0.0 < a < 1.0:
        raise ValueError("fin problem requires 0 < a < 1 (1/x term)")
    theta_domain = _as_box(theta_domain, biot_prior_domain())
    domain = Box((a, 1.0))

    def residual(X, jet, theta):
        x = X[:, 0]
        return jet.hess[0] + jet.grad[0] / x - biot_eval(theta, x) * jet.value

    def sample_inner(rng, n):
        return np.full((n, 1), a)

    def sample_outer(rng, n):
        return np.ones((n, 1))

    segments = (
        BoundarySegment("inner", sample_inner,
                        lambda X, theta: np.full(X.shape[0], u_a)),
        BoundarySegment("outer", sample_outer,
                        lambda X, theta: np.full(X.shape[0], u_1)),
    )
    return PdeProblem(problem_id="fin", domain=domain, param_domain=theta_domain,
                      residual=residual, segments=segments,
                      jet_coords=(0,), hess_coords=(0,))
