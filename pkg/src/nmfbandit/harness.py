"""Experiment harness: JSON configuration, instance construction/ingestion,
multi-seed sweeps, trace/summary files, and factor-quality reports.

File contracts: traces are CSV with header ``t,context,arm,reward,explore,
cum_regret`` (floats printed at 17 significant digits so parsing round-trips
exactly); instances are a plain CSV of U plus ``<name>.meta.json`` carrying
{L, K, reward_model, beta}; each experiment directory gets a ``summary.json``.
"""

from __future__ import annotations

import copy
import json
import os
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .algorithms import NmfBandit, NmfBanditConfig, Thompson, Ucb1, run_policy
from .environment import RegretTrace
from .errors import CapabilityError, ParameterError, ParseError
from .genmodel import (
    BanditInstance,
    RewardModel,
    TheoryModelParams,
    check_wstrip_l1,
    check_wstrip_l2,
    generate_lower_bound,
    generate_simple,
    generate_theory,
    wstrip_l1_values,
    wstrip_l2_values,
)

__all__ = [
    "default_config",
    "load_config",
    "build_instance",
    "ingest_reward_matrix",
    "write_instance",
    "run_experiment",
    "check_rip",
    "write_trace",
    "read_trace",
]

TRACE_HEADER = "t,context,arm,reward,explore,cum_regret"


def default_config():
    """Full configuration with every default explicit (see --print-config)."""
    return {
        "setting": "S1",
        "T": 1000,
        "seeds": [0],
        "out_dir": "runs",
        "threads": 1,
        "policies": ["nmf_bandit", "ucb1", "thompson"],
        "instance": {
            "source": "simple",  # simple | theory | lower_bound | file
            "L": 60,
            "K": 30,
            "m": 3,
            "corrupt_frac": 0.05,
            "seed": 0,
            "reward_model": {"kind": "bernoulli", "width": 0.0},
            # theory-model extras
            "det_col_frac": 0.01,
            "det_row_frac": 1.0 / 18.0,
            "gamma": 0.65,
            "q": 0.003,
            "noise_perturbation_norm": 0.2,
            "trunc_radius": None,
            # file source
            "path": None,
            "has_header": False,
        },
        "nmf_bandit": {
            "m": 3,
            "m_prime": 4,
            "theta": 10.0,
            "beta_min": None,
            "refit": "geometric",
            "refit_ratio": 1.1,
            "anchor_method": "lp_hottopix",
            "anchor_threshold": 0.5,
            "lp_max_rows": 200,
            "seed": None,
        },
        "thompson": {"r_max": None},
        "rip": {"m_prime": 20, "trials": 200, "seed": 0, "threshold_l1": None, "threshold_l2": None},
        "sweep": {"theta": [], "m_prime": []},
    }


def _merge(base, override):
    out = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = value
    return out


def load_config(path=None, overrides=None):
    """Defaults, overlaid with the JSON file, overlaid with CLI overrides."""
    cfg = default_config()
    if path is not None:
        try:
            with open(path) as fh:
                user = json.load(fh)
        except json.JSONDecodeError as err:
            raise ParseError(f"config {path} is not valid JSON: {err}") from err
        if not isinstance(user, dict):
            raise ParseError(f"config {path} must hold a JSON object")
        cfg = _merge(cfg, user)
    if overrides:
        cfg = _merge(cfg, overrides)
    if cfg["T"] < 1:
        raise ParameterError("T must be >= 1")
    if not cfg["seeds"]:
        raise ParameterError("seeds must be nonempty")
    if cfg["setting"] not in ("S1", "S2"):
        raise ParameterError(f"unknown setting {cfg['setting']!r}")
    for policy in cfg["policies"]:
        if policy not in ("nmf_bandit", "ucb1", "thompson"):
            raise ParameterError(f"unknown policy {policy!r}")
    return cfg


def _reward_model_from(cfg):
    return RewardModel(kind=cfg["kind"], width=cfg.get("width", 0.0))


def build_instance(cfg):
    """Construct the instance described by the config's instance section."""
    spec = cfg["instance"]
    source = spec["source"]
    model = _reward_model_from(spec["reward_model"])
    if source == "simple":
        return generate_simple(
            spec["L"], spec["K"], spec["m"], spec["corrupt_frac"], spec["seed"],
            reward_model=model,
        )
    if source == "theory":
        inst = generate_theory(
            TheoryModelParams(
                L=spec["L"],
                K=spec["K"],
                m=spec["m"],
                det_col_frac=spec["det_col_frac"],
                det_row_frac=spec["det_row_frac"],
                gamma=spec["gamma"],
                q=spec["q"],
                noise_perturbation_norm=spec["noise_perturbation_norm"],
                trunc_radius=spec["trunc_radius"],
                seed=spec["seed"],
            )
        )
        inst.reward_model = model
        inst.reward_model.validate(inst.U)
        return inst
    if source == "lower_bound":
        return generate_lower_bound(spec["L"], spec["K"], spec["m"], spec["seed"])
    if source == "file":
        if not spec.get("path"):
            raise ParameterError("file source requires instance.path")
        return ingest_reward_matrix(
            spec["path"], reward_model=model, has_header=spec.get("has_header", False)
        )
    raise ParameterError(f"unknown instance source {source!r}")


def _meta_path(path):
    name = str(path)
    if name.endswith(".csv"):
        name = name[: -len(".csv")]
    return Path(name + ".meta.json")


def ingest_reward_matrix(path, reward_model=None, has_header=False):
    """Instance from a plain CSV of U: uniform beta, no ground-truth factors.

    A companion <name>.meta.json (written by `generate`) supplies the reward
    model when none is passed. Zero-gap rows are tolerated with a warning.
    """
    path = Path(path)
    if not path.exists():
        raise ParseError(f"no such file: {path}")
    meta_path = _meta_path(path)
    if reward_model is None and meta_path.exists():
        with open(meta_path) as fh:
            meta = json.load(fh)
        reward_model = _reward_model_from(meta["reward_model"])
    rows = []
    width = None
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            if lineno == 1 and has_header:
                continue
            line = line.strip()
            if not line:
                continue
            cells = line.split(",")
            if width is None:
                width = len(cells)
            elif len(cells) != width:
                raise ParseError(
                    f"{path}: row {lineno} has {len(cells)} cells, expected {width}",
                    row=lineno,
                )
            try:
                rows.append([float(c) for c in cells])
            except ValueError:
                bad = next(i for i, c in enumerate(cells) if not _is_float(c))
                raise ParseError(
                    f"{path}: non-numeric cell at row {lineno}, column {bad + 1}",
                    row=lineno,
                    col=bad + 1,
                ) from None
    if not rows:
        raise ParseError(f"{path}: file holds no data rows")
    U = np.asarray(rows)
    inst = BanditInstance(U=U, reward_model=reward_model or RewardModel("bernoulli"))
    return inst.validate(require_gap=False)


def _is_float(cell):
    try:
        float(cell)
        return True
    except ValueError:
        return False


def write_instance(inst: BanditInstance, path):
    """Write U as CSV plus the companion meta JSON; returns both paths."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        for row in inst.U:
            fh.write(",".join(_fmt(v) for v in row) + "\n")
    meta_path = _meta_path(path)
    meta = {
        "L": inst.L,
        "K": inst.K,
        "reward_model": {"kind": inst.reward_model.kind, "width": inst.reward_model.width},
        "beta": inst.beta.tolist(),
    }
    with open(meta_path, "w") as fh:
        json.dump(meta, fh, indent=2)
    return path, meta_path


def _fmt(value):
    """17 significant digits: exact round-trip for 64-bit floats."""
    return format(float(value), ".17g")


def write_trace(trace: RegretTrace, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        fh.write(TRACE_HEADER + "\n")
        for i in range(len(trace)):
            fh.write(
                f"{trace.t[i]},{trace.context[i]},{trace.arm[i]},"
                f"{_fmt(trace.reward[i])},{int(trace.explore[i])},"
                f"{_fmt(trace.cum_regret[i])}\n"
            )
    return path


def read_trace(path):
    path = Path(path)
    with open(path) as fh:
        header = fh.readline().strip()
        if header != TRACE_HEADER:
            raise ParseError(f"{path}: unexpected trace header {header!r}", row=1)
        cols = {name: [] for name in TRACE_HEADER.split(",")}
        for lineno, line in enumerate(fh, start=2):
            cells = line.strip().split(",")
            if len(cells) != 6:
                raise ParseError(f"{path}: row {lineno} has {len(cells)} cells", row=lineno)
            cols["t"].append(int(cells[0]))
            cols["context"].append(int(cells[1]))
            cols["arm"].append(int(cells[2]))
            cols["reward"].append(float(cells[3]))
            cols["explore"].append(bool(int(cells[4])))
            cols["cum_regret"].append(float(cells[5]))
    return RegretTrace(
        t=np.asarray(cols["t"], dtype=np.int64),
        context=np.asarray(cols["context"], dtype=np.int64),
        arm=np.asarray(cols["arm"], dtype=np.int64),
        reward=np.asarray(cols["reward"]),
        explore=np.asarray(cols["explore"], dtype=bool),
        cum_regret=np.asarray(cols["cum_regret"]),
    )


def _make_policy(name, cfg, inst):
    if name == "nmf_bandit":
        section = cfg["nmf_bandit"]
        return NmfBandit(NmfBanditConfig(**section))
    if name == "ucb1":
        return Ucb1()
    if name == "thompson":
        r_max = cfg["thompson"].get("r_max")
        if r_max is None:
            model = inst.reward_model
            r_max = 1.0 if model.kind == "bernoulli" else 1.0 + model.width / 2.0
        return Thompson(r_max=r_max)
    raise ParameterError(f"unknown policy {name!r}")


def _run_cell(cfg, policy_name, seed):
    """One (policy, seed) cell; regenerates the instance so cells are
    independent across processes."""
    inst = build_instance(cfg)
    policy = _make_policy(policy_name, cfg, inst)
    trace = run_policy(inst, policy, cfg["T"], setting=cfg["setting"], seed=seed)
    out = Path(cfg["out_dir"])
    path = out / f"trace_{policy_name}_seed{seed}.csv"
    write_trace(trace, path)
    return {
        "policy": policy_name,
        "seed": seed,
        "final_regret": trace.final_regret,
        "explore_count": trace.explore_count,
        "wall_time": trace.wall_time,
        "trace_file": path.name,
    }


def run_experiment(cfg):
    """Run every (policy, seed) cell, write traces, and aggregate a summary."""
    out = Path(cfg["out_dir"])
    out.mkdir(parents=True, exist_ok=True)
    cells = [(name, seed) for name in cfg["policies"] for seed in cfg["seeds"]]
    threads = int(cfg.get("threads") or 1)
    if threads > 1 and len(cells) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            records = list(pool.map(_run_cell, *zip(*[(cfg, n, s) for n, s in cells])))
    else:
        records = [_run_cell(cfg, name, seed) for name, seed in cells]

    summary = {"config": cfg, "policies": {}}
    for name in cfg["policies"]:
        finals = [r["final_regret"] for r in records if r["policy"] == name]
        summary["policies"][name] = {
            "mean_final_regret": float(np.mean(finals)),
            "std_final_regret": float(np.std(finals)),
            "per_seed": [
                {k: r[k] for k in ("seed", "final_regret", "explore_count", "wall_time", "trace_file")}
                for r in records
                if r["policy"] == name
            ],
        }
    with open(out / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=2)
    return summary


def run_sweep(cfg):
    """Grid over nmf_bandit theta / m' values; one experiment per combo."""
    thetas = cfg["sweep"]["theta"] or [cfg["nmf_bandit"]["theta"]]
    m_primes = cfg["sweep"]["m_prime"] or [cfg["nmf_bandit"]["m_prime"]]
    root = Path(cfg["out_dir"])
    results = []
    for theta in thetas:
        for m_prime in m_primes:
            sub = copy.deepcopy(cfg)
            sub["nmf_bandit"]["theta"] = theta
            sub["nmf_bandit"]["m_prime"] = m_prime
            sub["out_dir"] = str(root / f"theta{theta}subm{m_prime}".replace(".", "_"))
            summary = run_experiment(sub)
            results.append(
                {
                    "theta": theta,
                    "m_prime": m_prime,
                    "out_dir": sub["out_dir"],
                    "policies": {
                        name: info["mean_final_regret"]
                        for name, info in summary["policies"].items()
                    },
                }
            )
    root.mkdir(parents=True, exist_ok=True)
    with open(root / "sweep.json", "w") as fh:
        json.dump(results, fh, indent=2)
    return results


def check_rip(cfg):
    """Factor-quality report for an instance that carries its ground truth."""
    rip = cfg["rip"]
    if rip["trials"] < 1:
        raise ParameterError("rip.trials must be >= 1")
    inst = build_instance(cfg)
    if inst.A is None or inst.W is None:
        raise CapabilityError(
            "factor checks need ground-truth A and W; file-sourced instances "
            "carry only U"
        )
    m_prime, trials, seed = rip["m_prime"], rip["trials"], rip["seed"]
    w_vals = wstrip_l1_values(inst.W, m_prime, trials, seed)
    a_vals = wstrip_l2_values(inst.A, m_prime, trials, seed)
    rho_w, fail_w = check_wstrip_l1(
        inst.W, m_prime, trials, seed, threshold=rip["threshold_l1"]
    )
    rho_a, fail_a = check_wstrip_l2(
        inst.A, m_prime, trials, seed, threshold=rip["threshold_l2"]
    )
    percentiles = [5, 25, 50]
    report = {
        "m_prime": m_prime,
        "trials": trials,
        "W": {
            "empirical_rho": rho_w,
            "failure_frequency": fail_w,
            "percentiles": {str(p): float(np.percentile(w_vals, p)) for p in percentiles},
        },
        "A": {
            "empirical_rho": rho_a,
            "failure_frequency": fail_a,
            "percentiles": {str(p): float(np.percentile(a_vals, p)) for p in percentiles},
        },
    }
    return report


def thread_count(cli_value=None):
    """--threads flag, else NMFBANDIT_THREADS, else 1."""
    if cli_value is not None:
        return int(cli_value)
    env = os.environ.get("NMFBANDIT_THREADS")
    return int(env) if env else 1
