"""Surrogate-likelihood Bayesian inference.

Gaussian log-likelihood over a surrogate's predictions, uniform box priors
over (theta, sigma), random-walk Metropolis-Hastings with burn-in-only
proposal adaptation toward a target acceptance rate, independent per-chain
random streams, pooled posterior summaries, kernel density estimates, and
pointwise credible bands for function-valued parameters.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .nn.autodiff import NumericalError

ADAPTATION_GAIN = 1.0


@dataclass
class InferenceSpec:
    surrogate: object
    dataset: object
    theta_prior: object
    sigma_prior: object
    n_chains: int = 10
    iterations: int = 50_000
    burn_in: int = 10_000
    initial_scales: np.ndarray = None
    adapt_interval: int = 100
    target_accept: float = 0.4
    seed: int = 0

    def __post_init__(self):
        if self.sigma_prior.lo[0] < 0:
            raise ValueError("sigma prior lower bound must be >= 0")
        if not self.iterations > self.burn_in >= 0:
            raise ValueError("need iterations > burn_in >= 0")
        if self.n_chains < 1:
            raise ValueError("need at least one chain")
        if self.adapt_interval < 1:
            raise ValueError("adaptation interval must be >= 1")
        if self.initial_scales is None:
            widths = np.concatenate([self.theta_prior.hi - self.theta_prior.lo,
                                     self.sigma_prior.hi - self.sigma_prior.lo])
            self.initial_scales = 0.1 * widths
        self.initial_scales = np.asarray(self.initial_scales,
                                         dtype=np.float64)
        if self.initial_scales.shape != (self.dim,):
            raise ValueError(f"initial_scales must have shape ({self.dim},)")

    @property
    def dim(self):
        return self.theta_prior.dim + 1


@dataclass
class Chain:
    """Retained samples of one chain, with adaptation bookkeeping."""

    samples: np.ndarray              # (iterations - burn_in, p + 1)
    window_accepts: np.ndarray       # accept counts per burn-in window
    window_size: int
    acceptance_rate: float           # post-burn-in accepted fraction
    final_scales: np.ndarray
    seed: tuple                      # (spec seed, chain index)


@dataclass
class MhState:
    x: np.ndarray                    # current (theta..., sigma)
    log_post: float
    scales: np.ndarray


def log_likelihood(surrogate, dataset, theta, sigma):
    """Gaussian i.i.d. log-likelihood of the dataset under the surrogate's
    prediction at theta with noise standard deviation sigma."""
    if sigma <= 0:
        return -np.inf
    m = dataset.m
    if m == 0:
        return 0.0
    resid = dataset.z - surrogate.predict(dataset.x, theta)
    return -0.5 * m * np.log(2.0 * np.pi * sigma ** 2) \
        - 0.5 * float(resid @ resid) / sigma ** 2


def log_prior(theta, sigma, spec):
    """0 inside the closed prior boxes, -inf outside (uniform, unnormalized)."""
    inside = spec.theta_prior.contains(theta) \
        and spec.sigma_prior.contains([sigma])
    return 0.0 if inside else -np.inf


def log_posterior(x, spec):
    theta, sigma = x[:-1], x[-1]
    lp = log_prior(theta, sigma, spec)
    if lp == -np.inf:
        return -np.inf
    return lp + log_likelihood(spec.surrogate, spec.dataset, theta, sigma)


def mh_step(state, spec, rng):
    """One random-walk step: joint Gaussian proposal with per-coordinate
    scales, accepted with probability min(1, exp(delta log-posterior))."""
    proposal = state.x + rng.normal(size=state.x.shape) * state.scales
    log_post = log_posterior(proposal, spec)
    if np.log(rng.random()) < log_post - state.log_post:
        return MhState(proposal, log_post, state.scales), True
    return state, False


def adapt_proposals(acc_rate, scales, spec):
    """Burn-in-only scale update toward the target acceptance rate."""
    return scales * np.exp(ADAPTATION_GAIN * (acc_rate - spec.target_accept))


def _initial_state(spec, rng):
    for _ in range(100):
        theta = spec.theta_prior.sample(rng, 1)[0]
        sigma = spec.sigma_prior.sample(rng, 1)[0, 0]
        x = np.concatenate([theta, [sigma]])
        lp = log_posterior(x, spec)
        if np.isfinite(lp):
            return MhState(x, lp, spec.initial_scales.copy())
    raise NumericalError("could not draw a finite-posterior initial state")


def run_chain(spec, chain_index):
    """Run one chain on its own stream seeded by (seed, chain_index)."""
    rng = np.random.default_rng([spec.seed, chain_index])
    state = _initial_state(spec, rng)
    n_keep = spec.iterations - spec.burn_in
    retained = np.empty((n_keep, spec.dim))
    window_accepts = []
    accepted_in_window = 0
    accepted_post = 0
    for it in range(spec.iterations):
        state, accepted = mh_step(state, spec, rng)
        if it < spec.burn_in:
            accepted_in_window += accepted
            if (it + 1) % spec.adapt_interval == 0:
                window_accepts.append(accepted_in_window)
                rate = accepted_in_window / spec.adapt_interval
                state = MhState(state.x, state.log_post,
                                adapt_proposals(rate, state.scales, spec))
                accepted_in_window = 0
        else:
            retained[it - spec.burn_in] = state.x
            accepted_post += accepted
    return Chain(samples=retained,
                 window_accepts=np.asarray(window_accepts, dtype=int),
                 window_size=spec.adapt_interval,
                 acceptance_rate=accepted_post / n_keep,
                 final_scales=state.scales,
                 seed=(spec.seed, chain_index))


def run_chains(spec):
    """All chains; streams are independent, so order does not matter."""
    p = spec.theta_prior.dim
    if spec.surrogate.param_domain.dim != p:
        raise ValueError(
            f"surrogate parameter dimension {spec.surrogate.param_domain.dim}"
            f" does not match the prior dimension {p}")
    return [run_chain(spec, c) for c in range(spec.n_chains)]


def pooled_samples(chains):
    if not chains or any(c.samples.shape[0] == 0 for c in chains):
        raise ValueError("need at least one retained sample per chain")
    return np.vstack([c.samples for c in chains])


def summarize(chains):
    """Pooled per-coordinate mean, std, and equal-tailed 95% interval."""
    pooled = pooled_samples(chains)
    return {
        "means": pooled.mean(axis=0).tolist(),
        "stds": pooled.std(axis=0).tolist(),
        "ci_low": np.percentile(pooled, 2.5, axis=0).tolist(),
        "ci_high": np.percentile(pooled, 97.5, axis=0).tolist(),
        "acceptance_rates": [c.acceptance_rate for c in chains],
        "seed": chains[0].seed[0],
    }


def kde(samples, grid):
    """Gaussian kernel density with Silverman bandwidth
    0.9 * min(std, IQR/1.34) * n^(-1/5), evaluated on the grid."""
    samples = np.asarray(samples, dtype=np.float64).ravel()
    n = samples.shape[0]
    if n < 2:
        raise ValueError("kde needs at least 2 samples")
    std = samples.std(ddof=1)
    if std == 0:
        raise ValueError("kde needs samples with nonzero variance")
    q25, q75 = np.percentile(samples, [25.0, 75.0])
    iqr = q75 - q25
    spread = min(std, iqr / 1.34) if iqr > 0 else std
    bw = 0.9 * spread * n ** (-0.2)
    grid = np.asarray(grid, dtype=np.float64)
    density = np.zeros_like(grid)
    norm = 1.0 / (n * bw * np.sqrt(2.0 * np.pi))
    for start in range(0, n, 10_000):
        block = samples[start:start + 10_000]
        z = (grid[:, None] - block[None, :]) / bw
        density += norm * np.exp(-0.5 * z ** 2).sum(axis=1)
    return density


def function_band(chains, evaluator, x_grid):
    """Pointwise posterior mean and central 95% band of a function of theta.

    evaluator(theta_rows (S, p), x scalar) -> (S,) must be vectorized over
    the sample rows.
    """
    pooled = pooled_samples(chains)
    thetas = pooled[:, :-1]
    x_grid = np.asarray(x_grid, dtype=np.float64)
    mean = np.empty_like(x_grid)
    lo = np.empty_like(x_grid)
    hi = np.empty_like(x_grid)
    for i, x in enumerate(x_grid):
        vals = evaluator(thetas, x)
        mean[i] = vals.mean()
        lo[i], hi[i] = np.percentile(vals, [2.5, 97.5])
    return {"x": x_grid, "mean": mean, "lo": lo, "hi": hi}


def split_rhat(chains):
    """Split-half rank-free potential-scale-reduction diagnostic, per
    coordinate (informational only)."""
    halves = []
    for c in chains:
        n = c.samples.shape[0] // 2
        if n < 2:
            raise ValueError("split-rhat needs at least 4 samples per chain")
        halves.append(c.samples[:n])
        halves.append(c.samples[n:2 * n])
    seqs = np.stack(halves)                  # (2m, n, dim)
    n = seqs.shape[1]
    within = seqs.var(axis=1, ddof=1).mean(axis=0)
    between = n * seqs.mean(axis=1).var(axis=0, ddof=1)
    var_hat = (n - 1) / n * within + between / n
    # frozen coordinates: trivially converged unless the halves disagree
    out = np.ones_like(within)
    moving = within > 0
    out[moving] = np.sqrt(var_hat[moving] / within[moving])
    out[~moving & (between > 0)] = np.inf
    return out


# -- writers ---------------------------------------------------------------

def write_samples_csv(chains, path):
    """One row per retained sample: theta0..theta{p-1}, sigma, chain_id."""
    dim = chains[0].samples.shape[1]
    names = [f"theta{i}" for i in range(dim - 1)] + ["sigma", "chain_id"]
    with open(path, "w") as f:
        f.write(",".join(names) + "\n")
        for c_idx, chain in enumerate(chains):
            for row in chain.samples:
                f.write(",".join(repr(float(v)) for v in row) + f",{c_idx}\n")


def read_samples_csv(path):
    rows = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return rows[:, :-1], rows[:, -1].astype(int)


def write_summary_json(summary, path, extra=None):
    doc = dict(summary)
    if extra:
        doc.update(extra)
    with open(path, "w") as f:
        json.dump(doc, f, sort_keys=True, indent=1)
        f.write("\n")


def write_curve_csv(path, columns):
    """columns: ordered (name, array) pairs of equal length."""
    names = [name for name, _ in columns]
    arrays = [np.asarray(a) for _, a in columns]
    with open(path, "w") as f:
        f.write(",".join(names) + "\n")
        for i in range(arrays[0].shape[0]):
            f.write(",".join(repr(float(a[i])) for a in arrays) + "\n")
