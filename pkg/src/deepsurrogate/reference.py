"""Classical reference solvers and synthetic-data generation.

Product-midpoint quadrature for Volterra equations (first kind by forward
substitution on the lower-triangular system, second kind by forward
marching), a central-difference tridiagonal solver for the fin equation,
current extraction from voltammetry surrogates, and noisy data sampling.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .nn.autodiff import NumericalError
from .problems import Dataset, biot_eval

# sub-midpoint count for the quadrature cell touching the upper limit; the
# kernel may be weakly singular there, so that cell's weight is the mean of
# kernel values at interior sub-midpoints (exact for constant kernels,
# sharper than the plain midpoint for integrable singularities)
DIAGONAL_SUBDIVISIONS = 16


@dataclass
class GridSolution:
    """A solution sampled on a uniform, strictly increasing grid."""

    grid: np.ndarray
    values: np.ndarray
    problem_id: str = ""
    theta: np.ndarray = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=np.float64)
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.grid.ndim != 1 or self.grid.shape != self.values.shape:
            raise ValueError("grid and values must be matching 1-d arrays")
        if not np.all(np.diff(self.grid) > 0):
            raise ValueError("grid must be strictly increasing")
        if not np.all(np.isfinite(self.values)):
            raise NumericalError("solution values are not finite")
        if self.theta is not None:
            self.theta = np.atleast_1d(np.asarray(self.theta,
                                                  dtype=np.float64))

    @property
    def spacing(self):
        return float(self.grid[1] - self.grid[0])

    def interpolate(self, x):
        """Linear interpolation; rejects points outside the grid range."""
        x = np.asarray(x, dtype=np.float64)
        if np.any(x < self.grid[0]) or np.any(x > self.grid[-1]):
            raise ValueError("requested points fall outside the grid range")
        return np.interp(x, self.grid, self.values)

    def save(self, path):
        """Write coordinate,value CSV plus a .meta.json provenance sidecar."""
        path = Path(path)
        with open(path, "w") as f:
            f.write("coordinate,value\n")
            for x, u in zip(self.grid, self.values):
                f.write(f"{float(x)!r},{float(u)!r}\n")
        meta = {"problem_id": self.problem_id,
                "theta": None if self.theta is None else self.theta.tolist(),
                "metadata": self.metadata}
        sidecar = path.with_suffix(".meta.json")
        with open(sidecar, "w") as f:
            json.dump(meta, f, sort_keys=True, indent=1)
            f.write("\n")

    @classmethod
    def load(cls, path):
        path = Path(path)
        rows = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        sidecar = path.with_suffix(".meta.json")
        meta = {"problem_id": "", "theta": None, "metadata": {}}
        if sidecar.exists():
            with open(sidecar) as f:
                meta.update(json.load(f))
        theta = meta["theta"]
        return cls(grid=rows[:, 0], values=rows[:, 1],
                   problem_id=meta["problem_id"],
                   theta=None if theta is None else np.asarray(theta),
                   metadata=meta["metadata"])


def _grid_steps(a, b, dt):
    m = int(round((b - a) / dt))
    if m < 1:
        raise ValueError("dt larger than the integration interval")
    return m


def solve_volterra_first_kind(problem, theta, dt):
    """March the first-kind Volterra equation v(t) + int_a^t k u = 0 on
    midpoint unknowns: the product-midpoint weights give a lower-triangular
    system solved by forward substitution. The cell adjacent to the upper
    limit uses a sub-midpoint mean so weakly singular kernels stay finite
    (midpoints always sit strictly below t_i). Solution reported at the
    midpoints."""
    if problem.kind != "first" or not problem.volterra:
        raise ValueError("first-kind Volterra problems only")
    if dt <= 0:
        raise ValueError("dt must be positive")
    theta = np.atleast_1d(np.asarray(theta, dtype=np.float64))
    a, b = problem.a, problem.b_star
    m = _grid_steps(a, b, dt)
    nodes = a + dt * np.arange(m + 1)
    mids = a + dt * (np.arange(m) + 0.5)
    sub_offsets = dt * (np.arange(DIAGONAL_SUBDIVISIONS) + 0.5) \
        / DIAGONAL_SUBDIVISIONS
    g = -problem.v(nodes[1:], theta)
    u = np.empty(m)
    for i in range(1, m + 1):
        t_i = nodes[i]
        acc = 0.0
        if i > 1:
            weights = np.broadcast_to(
                np.asarray(dt * problem.k(t_i, mids[:i - 1], theta),
                           dtype=np.float64), (i - 1,))
            acc = weights @ u[:i - 1]
        diag = dt * np.mean(problem.k(t_i, nodes[i - 1] + sub_offsets, theta))
        if not np.isfinite(diag) or abs(diag) < 1e-30:
            raise NumericalError(
                f"singular system: vanishing diagonal quadrature weight at "
                f"step {i} (t = {t_i})")
        u[i - 1] = (g[i - 1] - acc) / diag
    return GridSolution(grid=mids, values=u, problem_id=problem.problem_id,
                        theta=theta, metadata={"solver": "volterra_first_kind",
                                               "dt": dt})


def solve_volterra_second_kind(problem, theta, dt):
    """Forward-march the second-kind equation u = v + int_a^t k u with the
    product-midpoint rule, midpoint values taken as adjacent-node averages.
    Solution reported at the grid nodes."""
    if problem.kind != "second" or not problem.volterra:
        raise ValueError("second-kind Volterra problems only")
    if dt <= 0:
        raise ValueError("dt must be positive")
    theta = np.atleast_1d(np.asarray(theta, dtype=np.float64))
    a, b = problem.a, problem.b_star
    m = _grid_steps(a, b, dt)
    nodes = a + dt * np.arange(m + 1)
    mids = a + dt * (np.arange(m) + 0.5)
    v_nodes = np.broadcast_to(np.asarray(problem.v(nodes, theta),
                                         dtype=np.float64), nodes.shape)
    u = np.empty(m + 1)
    u[0] = v_nodes[0]
    for i in range(1, m + 1):
        t_i = nodes[i]
        kernel = dt * problem.k(t_i, mids[:i], theta)
        kernel = np.broadcast_to(np.asarray(kernel, dtype=np.float64),
                                 (i,))
        acc = 0.0
        if i > 1:
            acc = kernel[:-1] @ ((u[:i - 1] + u[1:i]) / 2.0)
        k_last = kernel[-1]
        u[i] = (v_nodes[i] + acc + 0.5 * k_last * u[i - 1]) \
            / (1.0 - 0.5 * k_last)
    return GridSolution(grid=nodes, values=u, problem_id=problem.problem_id,
                        theta=theta,
                        metadata={"solver": "volterra_second_kind", "dt": dt})


def _thomas(lower, diag, upper, rhs):
    """Tridiagonal elimination; lower[0] and upper[-1] are ignored."""
    n = diag.shape[0]
    c = np.empty(n)
    d = np.empty(n)
    c[0] = upper[0] / diag[0]
    d[0] = rhs[0] / diag[0]
    for i in range(1, n):
        denom = diag[i] - lower[i] * c[i - 1]
        c[i] = upper[i] / denom if i < n - 1 else 0.0
        d[i] = (rhs[i] - lower[i] * d[i - 1]) / denom
    x = np.empty(n)
    x[-1] = d[-1]
    for i in range(n - 2, -1, -1):
        x[i] = d[i] - c[i] * x[i + 1]
    return x


def solve_fin_fd(theta, a=0.1, u_a=1.0, u_1=0.5, n_nodes=4097):
    """Central-difference solve of u'' + u'/x - Bi(x) u = 0 on [a, 1] with
    Dirichlet values u(a) = u_a, u(1) = u_1 and polynomial Bi given by
    theta."""
    if a <= 0:
        raise ValueError("inner radius a must be positive (1/x coefficient)")
    if a >= 1:
        raise ValueError("inner radius a must be below the outer radius 1")
    if n_nodes < 3:
        raise ValueError("n_nodes must be at least 3")
    theta = np.atleast_1d(np.asarray(theta, dtype=np.float64))
    x = np.linspace(a, 1.0, n_nodes)
    h = (1.0 - a) / (n_nodes - 1)
    xi = x[1:-1]
    bi = biot_eval(theta, xi)
    lower = 1.0 / h ** 2 - 1.0 / (2.0 * h * xi)
    diag = -2.0 / h ** 2 - bi
    upper = 1.0 / h ** 2 + 1.0 / (2.0 * h * xi)
    rhs = np.zeros(n_nodes - 2)
    rhs[0] -= lower[0] * u_a
    rhs[-1] -= upper[-1] * u_1
    interior = _thomas(lower, diag, upper, rhs)
    values = np.concatenate([[u_a], interior, [u_1]])
    return GridSolution(grid=x, values=values, problem_id="fin", theta=theta,
                        metadata={"solver": "fin_fd", "n_nodes": n_nodes,
                                  "a": a, "u_a": u_a, "u_1": u_1})


def surrogate_current(model, t, E0):
    """Electrode current of a voltammetry PDE surrogate at time t, half-wave
    potential E0; t must lie inside the recorded time domain."""
    if model.problem_id != "voltammetry_pde":
        raise ValueError("surrogate_current needs a voltammetry PDE surrogate")
    lo, hi = model.domain.bounds[1]
    t_arr = np.atleast_1d(np.asarray(t, dtype=np.float64))
    if np.any(t_arr < lo) or np.any(t_arr > hi):
        raise ValueError(f"time outside the surrogate domain [{lo}, {hi}]")
    return model.current(t, E0)


def gen_synthetic_data(source, n_points, sigma, rng, placement=None,
                       theta=None):
    """Sample noisy observations of a reference solution or surrogate.

    Placement defaults to equidistant for the fin problem and uniform-random
    otherwise; Gaussian noise with standard deviation sigma is added i.i.d.
    For a surrogate source, theta selects the parameter vector.
    """
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    if n_points < 1:
        raise ValueError("n_points must be at least 1")
    if isinstance(source, GridSolution):
        lo, hi = float(source.grid[0]), float(source.grid[-1])
        problem_id = source.problem_id
    else:
        lo, hi = source.domain.bounds[-1]
        problem_id = source.problem_id
    if placement is None:
        placement = "equidistant" if problem_id == "fin" else "uniform"
    if placement == "uniform":
        x = rng.uniform(lo, hi, n_points)
    elif placement == "equidistant":
        x = np.linspace(lo, hi, n_points)
    else:
        raise ValueError(f"unknown placement {placement!r}")
    if isinstance(source, GridSolution):
        clean = source.interpolate(x)
    else:
        if theta is None:
            raise ValueError("surrogate sources need a theta vector")
        clean = source.predict(x, theta)
    z = clean + rng.normal(0.0, sigma, n_points)
    return Dataset(x=x[:, None], z=z)


def write_dataset(dataset, path, meta=None):
    """Write x,z CSV with a .meta.json provenance sidecar."""
    path = Path(path)
    with open(path, "w") as f:
        f.write("x,z\n")
        for x, z in zip(dataset.x[:, 0], dataset.z):
            f.write(f"{float(x)!r},{float(z)!r}\n")
    with open(path.with_suffix(".meta.json"), "w") as f:
        json.dump(meta or {}, f, sort_keys=True, indent=1)
        f.write("\n")


def read_dataset(path):
    path = Path(path)
    rows = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    meta = {}
    sidecar = path.with_suffix(".meta.json")
    if sidecar.exists():
        with open(sidecar) as f:
            meta = json.load(f)
    return Dataset(x=rows[:, 0][:, None], z=rows[:, 1]), meta
