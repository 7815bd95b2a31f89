"""Config-driven runs: traces, manifests, comparisons and iid baselines."""

from __future__ import annotations

import csv
import json
import logging
import platform
import time
from pathlib import Path

import numpy as np

from . import __version__
from .algorithms import iid_baseline, run_method
from .candidates import CandidateSet, generate_points
from .config import ConfigError, RunConfig
from .kernels import KernelSpec
from .linalg import certified_mc2
from .metrics import BoundSpec, bound_curve, bound_tag, theta_heuristic
from .targets import make_target

log = logging.getLogger(__name__)

TRACE_COLUMNS = ["n", "support_size", "mmd2", "mmd", "bound_upper", "bound_lower", "alpha", "chosen_index", "cum_time_s"]
BASELINE_COLUMNS = ["n", "mean_mmd2", "sd_mmd2", "theory_mean"]
BOUND_MARGIN = 1e-12


def _fmt(x):
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def setup(cfg: RunConfig):
    """Build target, kernel and candidate set for a config.

    Returns ``(kernel, target, candidates, source)``.
    """
    try:
        target = make_target(cfg.target)
        source = cfg.source()
        C = cfg.candidates.get("C")
        points = generate_points(source, C, target)
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"bad target/candidate settings: {exc}") from exc
    except FileNotFoundError as exc:
        raise ConfigError(str(exc)) from exc
    theta = cfg.kernel.get("theta", 1.0)
    if theta == "heuristic":
        theta = theta_heuristic(points, cfg.n_max, seed=source.seed)
    kernel = KernelSpec(cfg.kernel["family"], float(theta))
    try:
        cs = CandidateSet(points, kernel, target)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return kernel, target, cs, source


def bound_spec_for(cfg: RunConfig, kernel, target, cs, source, budget=None):
    """Bound constants and the M_C^2 bracket for a run.

    With per-iteration resampling no single candidate set exists, so the
    bracket is replaced by [0, (tau_1 - E)/C], the bound on the expected
    value of M_C^2 for iid candidates.
    """
    tag = bound_tag(cfg.method_name, cfg.step_rule, cfg.variant)
    if tag is None:
        return None, "none"
    moments = target.moments(kernel)
    if source.resample_each_iteration:
        lo, hi, kind = 0.0, (moments.tau_one - moments.energy) / len(cs), "expected"
    else:
        lo, hi, _ = certified_mc2(cs, budget or cfg.mc2_budget)
        kind = "certified"
    spec = BoundSpec(tag, kernel.kbar, cs.kbar_c, moments.tau_half, kernel.is_positive, lo, hi)
    return spec, kind


def execute(cfg: RunConfig):
    """Run one configuration; returns ``(rows, manifest, result)``."""
    t0 = time.perf_counter()
    kernel, target, cs, source = setup(cfg)
    t_setup = time.perf_counter() - t0
    t0 = time.perf_counter()
    spec, mc2_kind = bound_spec_for(cfg, kernel, target, cs, source) if cfg.bound_check else (None, "skipped")
    t_mc2 = time.perf_counter() - t0
    try:
        res = run_method(
            cfg.method_name, cs, cfg.n_max, step_rule=cfg.step_rule, variant=cfg.variant,
            source=source, audit_every=cfg.audit_every,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    n_done = len(res.trace)
    if spec is not None and n_done:
        curve = bound_curve(spec, n_done)
        upper, lower = curve["upper"], curve["lower"]
    else:
        upper = lower = np.full(n_done, np.nan)
    rows = []
    for i, rec in enumerate(res.trace):
        rows.append([
            rec.k, rec.support_size, rec.mmd2, np.sqrt(max(rec.mmd2, 0.0)), upper[i], lower[i],
            rec.alpha, rec.index, rec.time_s,
        ])
    mmd2 = res.mmd2
    violations = int(np.sum(mmd2 > upper - BOUND_MARGIN)) if spec is not None else 0
    manifest = {
        "version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "config": cfg.to_dict(),
        "resolved": {"kernel": kernel.to_dict(), "target": target.to_dict(), "candidates": source.to_dict(),
                     "C": len(cs), "method": res.method},
        "status": res.status,
        "iterations": n_done,
        "final": {"mmd2": float(mmd2[-1]) if n_done else None,
                  "mmd": float(np.sqrt(max(mmd2[-1], 0.0))) if n_done else None,
                  "total_mass": res.measure.total_mass},
        "mc2_interval": None if spec is None else [spec.mc2_lower, spec.mc2_upper],
        "mc2_kind": mc2_kind,
        "bound": None if spec is None else {
            "tag": spec.tag, "A_C": spec.a_c, "B_C": spec.b_c, "violations": violations,
        },
        "beta_floor_hits": res.floor_hits,
        "timing_s": {"setup": t_setup, "mc2": t_mc2, "algorithm": res.trace[-1].time_s if n_done else 0.0},
    }
    return rows, manifest, res


def write_csv(path, header, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(x) if not isinstance(x, str) else x for x in row])
    return path


def run(cfg: RunConfig, csv_path=None):
    """Run, write trace CSV plus manifest JSON; returns the manifest."""
    rows, manifest, _ = execute(cfg)
    out = Path(csv_path) if csv_path else cfg.resolve(cfg.output.get("csv", f"{cfg.label}.csv"))
    write_csv(out, TRACE_COLUMNS, rows)
    man_path = out.with_suffix(".json")
    manifest["outputs"] = {"csv": str(out), "manifest": str(man_path)}
    man_path.write_text(json.dumps(manifest, indent=2, default=float))
    log.info("wrote %s (%d rows, status %s)", out, len(rows), manifest["status"])
    return manifest


def compare(cfgs, out_path, baseline_reps=0, baseline_seed=0):
    """Run several configs sharing kernel/target/candidates into one long CSV."""
    if not cfgs:
        raise ConfigError("compare needs at least one config")
    key = cfgs[0].shared_key()
    for c in cfgs[1:]:
        if c.shared_key() != key:
            raise ConfigError("compared configs must share kernel, target and candidates")
    header = ["method"] + TRACE_COLUMNS + ["sd_mmd2"]
    rows = []
    for c in cfgs:
        crow, _, _ = execute(c)
        rows.extend([c.label] + r + [float("nan")] for r in crow)
    if baseline_reps:
        n_max = max(c.n_max for c in cfgs)
        for r in baseline_rows(cfgs[0], baseline_reps, n_max, baseline_seed):
            n, mean, sd, _ = r
            nan = float("nan")
            rows.append(["iid_baseline", n, n, mean, np.sqrt(max(mean, 0.0)), nan, nan, nan, -1, nan, sd])
    write_csv(out_path, header, rows)
    return len(rows)


def baseline_rows(cfg: RunConfig, reps, n_max=None, seed=None):
    kernel, target, _, source = setup(cfg)
    n_max = n_max or cfg.n_max
    try:
        mean, sd = iid_baseline(target, kernel, n_max, reps, seed=source.seed if seed is None else seed)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    m = target.moments(kernel)
    n = np.arange(1, n_max + 1)
    theory = (m.tau_one - m.energy) / n
    return [[int(i), float(a), float(b), float(c)] for i, a, b, c in zip(n, mean, sd, theory)]


def baseline(cfg: RunConfig, reps, csv_path=None):
    rows = baseline_rows(cfg, reps)
    out = Path(csv_path) if csv_path else cfg.resolve(cfg.output.get("baseline_csv", "baseline.csv"))
    write_csv(out, BASELINE_COLUMNS, rows)
    return out
