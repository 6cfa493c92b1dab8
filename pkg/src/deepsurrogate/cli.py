"""Command-line orchestration of the shipped experiments.

Verbs: train, solve-ref, gen-data, infer, compare-augmented. A JSON config
file selects one of the experiments (voltammetry_integral, voltammetry_pde,
biot) and may override any default field; --out, --seed, and
--deterministic override config values from the command line. Exit codes:
0 success, 2 config error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
from pathlib import Path

import numpy as np

from .mcmc import InferenceSpec, function_band, kde, read_samples_csv, \
    run_chains, split_rhat, summarize, write_curve_csv, write_samples_csv, \
    write_summary_json
from .nn.autodiff import NumericalError
from .problems import Box, biot_eval, biot_prior_domain, fin_problem, \
    voltammetry_integral, voltammetry_pde
from .reference import gen_synthetic_data, read_dataset, solve_fin_fd, \
    solve_volterra_first_kind, write_dataset
from .trainer import TrainConfig, load_surrogate, train, train_augmented

ARTIFACT_FORMAT_VERSION = 1

# truth for the fin experiment: Bi(x) = 18 e^{x-0.3} as its degree-15
# Taylor polynomial (remainder ~ 5e/16! < 1e-12 on [0,1], inside the prior)
BIOT_TRUE_THETA = [18.0 * math.exp(-0.3) / math.factorial(n)
                   for n in range(16)]


class ConfigError(Exception):
    """Invalid or inconsistent run configuration."""


def _train_defaults(**overrides):
    base = {
        "n_interior": 1024,
        "n_boundary": 256,
        "max_iterations": 20000,
        "loss_threshold": 0.0,
        "mode": "mesh-free",
        "parametric": True,
        "hidden": [45, 45, 45, 45],
        "w_hidden": None,
        "head": "dense",
        "rbf_k": 100,
        "learning_rate": 1e-3,
        "lr_decay": 1.0,
        "weights": {"nu1": 1.0, "nu2": 1.0, "nu3": 1.0, "nu4": 1.0},
    }
    base.update(overrides)
    return base


def _inference_defaults(**overrides):
    base = {
        "checkpoints": {},
        "dataset": None,
        "n_chains": 10,
        "iterations": 50000,
        "burn_in": 10000,
        "adapt_interval": 100,
        "target_accept": 0.4,
        "initial_scales": None,
        "sigma_lo": 0.0,
        "sigma_hi": 3.0,
        "kde_points": 256,
        "band_points": 200,
    }
    base.update(overrides)
    return base


DEFAULTS = {
    "voltammetry_integral": {
        "experiment": "voltammetry_integral",
        "seed": 0,
        "out": "out",
        "problem": {"e0_lo": -6.0, "e0_hi": 6.0, "e_start": -10.0},
        "train": _train_defaults(n_interior=512, max_iterations=150000,
                                 learning_rate=3e-3, lr_decay=1e-2),
        "reference": {"dt": 1e-3, "theta": None},
        "data": {"n_points": 100, "sigma": 0.1, "theta_true": [0.0],
                 "placement": "uniform"},
        "inference": _inference_defaults(),
        "compare": {},
    },
    "voltammetry_pde": {
        "experiment": "voltammetry_pde",
        "seed": 0,
        "out": "out",
        "problem": {"e0_lo": -6.0, "e0_hi": 6.0, "e_start": -10.0},
        "train": _train_defaults(head="rbf", hidden=[45, 45, 45],
                                 max_iterations=8000),
        "reference": {"dt": 1e-3, "theta": None},
        "data": {"n_points": 100, "sigma": 0.1, "theta_true": [0.0],
                 "placement": "uniform"},
        "inference": _inference_defaults(),
        "compare": {},
    },
    "biot": {
        "experiment": "biot",
        "seed": 0,
        "out": "out",
        "problem": {"a": 0.1, "u_a": 1.0, "u_1": 0.5},
        "train": _train_defaults(max_iterations=25000),
        "reference": {"n_nodes": 4097, "theta": None},
        "data": {"n_points": 30, "sigma": 0.003,
                 "theta_true": BIOT_TRUE_THETA, "placement": "equidistant"},
        "inference": _inference_defaults(sigma_hi=0.1),
        "compare": {"samples": None, "dataset": None,
                    "max_iterations": 20000, "learning_rate": 1e-3,
                    "x_points": 200},
    },
}

# free-form sections whose keys are not validated against the defaults
_OPEN_SECTIONS = {"inference.checkpoints"}


def deep_merge(base, override, path=""):
    out = dict(base)
    for key, value in override.items():
        here = f"{path}.{key}" if path else key
        if key not in base and path not in _OPEN_SECTIONS:
            raise ConfigError(f"unknown config key {here!r}")
        if isinstance(value, dict) and isinstance(base.get(key), dict):
            out[key] = deep_merge(base[key], value, here)
        else:
            out[key] = value
    return out


def resolve_config(config_path, out_override=None, seed_override=None):
    """Load the JSON config, apply experiment defaults and CLI overrides."""
    if config_path is None:
        raise ConfigError("--config PATH is required")
    try:
        doc = json.loads(Path(config_path).read_text())
    except OSError as e:
        raise ConfigError(f"cannot read config file: {e}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"config is not valid JSON: {e}") from e
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    experiment = doc.get("experiment")
    if experiment == "custom":
        raise ConfigError(
            "the CLI ships voltammetry_integral, voltammetry_pde, and biot; "
            "custom experiments are assembled through the library API")
    if experiment not in DEFAULTS:
        raise ConfigError(
            f"experiment must be one of {sorted(DEFAULTS)} or custom, "
            f"got {experiment!r}")
    resolved = deep_merge(DEFAULTS[experiment], doc)
    if out_override is not None:
        resolved["out"] = out_override
    if seed_override is not None:
        resolved["seed"] = seed_override
    return resolved


def config_hash(resolved, input_paths=()):
    """sha256 of the canonical resolved config (output dir excluded) plus
    the byte content of every consumed input file."""
    doc = {k: v for k, v in resolved.items() if k != "out"}
    h = hashlib.sha256(json.dumps(doc, sort_keys=True,
                                  separators=(",", ":")).encode())
    for p in sorted(str(p) for p in input_paths):
        h.update(Path(p).read_bytes())
    return h.hexdigest()


def _checkpoint_roles(experiment):
    return {"voltammetry_integral": ("u", "w"),
            "voltammetry_pde": ("head",),
            "biot": ("u",)}[experiment]


def build_problem(resolved):
    experiment = resolved["experiment"]
    pr = resolved["problem"]
    if experiment == "voltammetry_integral":
        return voltammetry_integral((pr["e0_lo"], pr["e0_hi"]),
                                    e_start=pr["e_start"])
    if experiment == "voltammetry_pde":
        return voltammetry_pde((pr["e0_lo"], pr["e0_hi"]),
                               e_start=pr["e_start"])
    return fin_problem(biot_prior_domain(), a=pr["a"], u_a=pr["u_a"],
                       u_1=pr["u_1"])


def make_train_config(resolved, section="train", **overrides):
    doc = dict(resolved[section])
    doc.update(overrides)
    doc["hidden"] = tuple(doc["hidden"])
    if doc.get("w_hidden") is not None:
        doc["w_hidden"] = tuple(doc["w_hidden"])
    return TrainConfig(seed=resolved["seed"], **doc)


def _out_dir(resolved):
    out = Path(resolved["out"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_meta(path, resolved, chash, extra=None):
    doc = {"seed": resolved["seed"], "config_hash": chash,
           "format_version": ARTIFACT_FORMAT_VERSION}
    if extra:
        doc.update(extra)
    with open(Path(path).with_suffix(".meta.json"), "w") as f:
        json.dump(doc, f, sort_keys=True, indent=1)
        f.write("\n")


def _reference_solution(resolved, theta):
    experiment = resolved["experiment"]
    theta = np.atleast_1d(np.asarray(theta, dtype=np.float64))
    if experiment == "biot":
        if theta.shape != (16,):
            raise ConfigError(f"biot theta must have 16 entries, "
                              f"got {theta.shape[0]}")
        pr = resolved["problem"]
        return solve_fin_fd(theta, a=pr["a"], u_a=pr["u_a"], u_1=pr["u_1"],
                            n_nodes=resolved["reference"]["n_nodes"])
    if theta.shape != (1,):
        raise ConfigError(f"voltammetry theta must have 1 entry, "
                          f"got {theta.shape[0]}")
    pr = resolved["problem"]
    problem = voltammetry_integral((pr["e0_lo"], pr["e0_hi"]),
                                   e_start=pr["e_start"])
    return solve_volterra_first_kind(problem, theta,
                                     resolved["reference"]["dt"])


def cmd_train(resolved, deterministic=False):
    problem = build_problem(resolved)
    config = make_train_config(resolved)
    out = _out_dir(resolved)
    chash = config_hash(resolved)
    log_path = out / "training_log.csv"
    model = train(problem, config, log_path=log_path,
                  deterministic=deterministic)
    _write_meta(log_path, resolved, chash)
    paths = {role: out / f"{role}_checkpoint.json"
             for role in _checkpoint_roles(resolved["experiment"])}
    model.save(paths, extra={"seed": resolved["seed"], "config_hash": chash})
    for path in [log_path, *paths.values()]:
        print(f"wrote {path}")


def cmd_solve_ref(resolved, deterministic=False):
    theta = resolved["reference"]["theta"]
    if theta is None:
        theta = resolved["data"]["theta_true"]
    solution = _reference_solution(resolved, theta)
    out = _out_dir(resolved)
    chash = config_hash(resolved)
    solution.metadata.update(seed=resolved["seed"], config_hash=chash,
                             format_version=ARTIFACT_FORMAT_VERSION)
    path = out / "reference.csv"
    solution.save(path)
    print(f"wrote {path}")


def cmd_gen_data(resolved, deterministic=False):
    data = resolved["data"]
    solution = _reference_solution(resolved, data["theta_true"])
    rng = np.random.default_rng(resolved["seed"])
    dataset = gen_synthetic_data(solution, data["n_points"], data["sigma"],
                                 rng, placement=data["placement"])
    out = _out_dir(resolved)
    chash = config_hash(resolved)
    path = out / "dataset.csv"
    write_dataset(dataset, path, meta={
        "sigma_true": data["sigma"],
        "theta_true": list(np.atleast_1d(data["theta_true"]).tolist()),
        "placement": data["placement"],
        "seed": resolved["seed"],
        "config_hash": chash,
        "format_version": ARTIFACT_FORMAT_VERSION,
    })
    print(f"wrote {path}")


def _resolve_artifact(configured, default_path, what):
    path = Path(configured) if configured else default_path
    if not path.exists():
        raise ConfigError(f"{what} not found at {path}")
    return path


def cmd_infer(resolved, deterministic=False):
    problem = build_problem(resolved)
    inf = resolved["inference"]
    out = _out_dir(resolved)
    dataset_path = _resolve_artifact(inf["dataset"], out / "dataset.csv",
                                     "dataset")
    roles = _checkpoint_roles(resolved["experiment"])
    ckpt_paths = {role: _resolve_artifact(inf["checkpoints"].get(role),
                                          out / f"{role}_checkpoint.json",
                                          f"{role} checkpoint")
                  for role in roles}
    chash = config_hash(resolved, [dataset_path, *ckpt_paths.values()])
    try:
        surrogate = load_surrogate(problem, ckpt_paths)
    except ValueError as e:
        raise ConfigError(str(e)) from e
    dataset, _ = read_dataset(dataset_path)
    sigma_prior = Box((inf["sigma_lo"], inf["sigma_hi"]))
    scales = inf["initial_scales"]
    spec = InferenceSpec(
        surrogate=surrogate, dataset=dataset,
        theta_prior=problem.param_domain, sigma_prior=sigma_prior,
        n_chains=inf["n_chains"], iterations=inf["iterations"],
        burn_in=inf["burn_in"],
        initial_scales=None if scales is None else np.asarray(scales),
        adapt_interval=inf["adapt_interval"],
        target_accept=inf["target_accept"], seed=resolved["seed"])
    chains = run_chains(spec)
    samples_path = out / "samples.csv"
    write_samples_csv(chains, samples_path)
    _write_meta(samples_path, resolved, chash,
                extra={"split_rhat": split_rhat(chains).tolist()})
    summary = summarize(chains)
    summary_path = out / "summary.json"
    write_summary_json(summary, summary_path,
                       extra={"config_hash": chash,
                              "format_version": ARTIFACT_FORMAT_VERSION})
    written = [samples_path, summary_path]
    pooled = np.vstack([c.samples for c in chains])
    coord_boxes = list(problem.param_domain.bounds) + [sigma_prior.bounds[0]]
    names = [f"theta{i}" for i in range(problem.param_domain.dim)] + ["sigma"]
    for j, (name, (lo, hi)) in enumerate(zip(names, coord_boxes)):
        if hi <= lo:
            continue
        grid = np.linspace(lo, hi, inf["kde_points"])
        try:
            density = kde(pooled[:, j], grid)
        except ValueError:
            continue
        path = out / f"kde_{name}.csv"
        write_curve_csv(path, [("grid", grid), ("density", density)])
        _write_meta(path, resolved, chash)
        written.append(path)
    if resolved["experiment"] == "biot":
        x_grid = np.linspace(resolved["problem"]["a"], 1.0,
                             inf["band_points"])
        band = function_band(chains, biot_eval, x_grid)
        path = out / "band.csv"
        write_curve_csv(path, [("x", band["x"]), ("mean", band["mean"]),
                               ("lo", band["lo"]), ("hi", band["hi"])])
        _write_meta(path, resolved, chash)
        written.append(path)
    for path in written:
        print(f"wrote {path}")


def cmd_compare_augmented(resolved, deterministic=False):
    if resolved["experiment"] != "biot":
        raise ConfigError("compare-augmented is defined for the biot "
                          "experiment")
    cmp_cfg = resolved["compare"]
    out = _out_dir(resolved)
    dataset_path = _resolve_artifact(cmp_cfg["dataset"], out / "dataset.csv",
                                     "dataset")
    samples_path = _resolve_artifact(cmp_cfg["samples"], out / "samples.csv",
                                     "posterior samples")
    chash = config_hash(resolved, [dataset_path, samples_path])
    dataset, _ = read_dataset(dataset_path)
    samples, _ = read_samples_csv(samples_path)
    thetas = samples[:, :-1]
    problem = build_problem(resolved)
    config = make_train_config(
        resolved, parametric=False, head="dense",
        max_iterations=cmp_cfg["max_iterations"],
        learning_rate=cmp_cfg["learning_rate"],
        weights={"nu1": 1.0, "nu2": 1.0, "nu3": 1.0, "nu4": 1.0})
    log_path = out / "augmented_log.csv"
    nets, theta_hat, info = train_augmented(problem, dataset, config,
                                            log_path=log_path,
                                            deterministic=deterministic)
    _write_meta(log_path, resolved, chash)
    x_grid = np.linspace(resolved["problem"]["a"], 1.0, cmp_cfg["x_points"])
    theta_true = np.asarray(resolved["data"]["theta_true"])
    theta_bayes = thetas.mean(axis=0)
    curve_aug = biot_eval(theta_hat, x_grid)
    curve_bayes = biot_eval(theta_bayes, x_grid)
    curve_true = biot_eval(theta_true, x_grid)
    lo = np.empty_like(x_grid)
    hi = np.empty_like(x_grid)
    for i, x in enumerate(x_grid):
        lo[i], hi[i] = np.percentile(biot_eval(thetas, x), [2.5, 97.5])

    def rms(curve):
        return float(np.sqrt(np.mean((curve - curve_true) ** 2)))

    report = {
        "x_grid": x_grid.tolist(),
        "augmented_curve": curve_aug.tolist(),
        "bayes_mean_curve": curve_bayes.tolist(),
        "band_lo": lo.tolist(),
        "band_hi": hi.tolist(),
        "true_curve": curve_true.tolist(),
        "l2_augmented": rms(curve_aug),
        "l2_bayes_mean": rms(curve_bayes),
        "theta_augmented": theta_hat.tolist(),
        "theta_bayes_mean": theta_bayes.tolist(),
        "final_loss": info["final_loss"],
        "iterations": info["iterations"],
        "seed": resolved["seed"],
        "config_hash": chash,
        "format_version": ARTIFACT_FORMAT_VERSION,
    }
    path = out / "augmented_report.json"
    with open(path, "w") as f:
        json.dump(report, f, sort_keys=True, indent=1)
        f.write("\n")
    for p in (log_path, path):
        print(f"wrote {p}")


_VERBS = {
    "train": cmd_train,
    "solve-ref": cmd_solve_ref,
    "gen-data": cmd_gen_data,
    "infer": cmd_infer,
    "compare-augmented": cmd_compare_augmented,
}


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="deepsurrogate",
        description="Neural surrogates for integral and differential "
                    "equations, classical reference solvers, and "
                    "surrogate-accelerated Bayesian inference.")
    sub = parser.add_subparsers(dest="verb", required=True)
    helps = {
        "train": "train a surrogate and write checkpoints plus a loss log",
        "solve-ref": "run the classical reference solver and write its CSV",
        "gen-data": "sample noisy synthetic observations from the reference",
        "infer": "run MCMC against a trained surrogate and write posteriors",
        "compare-augmented": "joint point estimate vs the Bayesian posterior",
    }
    for verb, help_text in helps.items():
        p = sub.add_parser(verb, help=help_text)
        p.add_argument("--config", help="JSON run configuration")
        p.add_argument("--out", help="output directory (overrides config)")
        p.add_argument("--seed", type=int, help="seed (overrides config)")
        p.add_argument("--deterministic", action="store_true",
                       help="zero wall-clock columns for byte-stable logs")
    args = parser.parse_args(argv)
    try:
        resolved = resolve_config(args.config, args.out, args.seed)
        _VERBS[args.verb](resolved, deterministic=args.deterministic)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except NumericalError as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
