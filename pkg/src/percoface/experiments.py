"""Desk-scale statistical experiments over the coupled chain.

Each experiment runs one or more independent replicas (seeds split from the
master seed with numpy's SeedSequence), produces a flat record stream with a
fixed schema, and aggregates a summary with binomial confidence intervals.
Outputs are a CSV (one record per line), a JSON summary, and a JSON manifest
sufficient to reproduce the run byte for byte.

All thresholds are reported in lattice units.  Logarithmic thresholds use
ln|Lambda| with |Lambda| the vertex count (L+1)^d; time scales use the edge
count N_E.  Cut-distance style events are computed against S+/S- and the
minimal cuts extracted from them, a sufficient proxy for "all cuts" (full cut
enumeration is out of scope); summaries carry that label.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from . import __version__
from .connectivity import Config
from .dynamics import History, RngStream, burn_in, init_state, run, step
from .errors import ConfigurationError, ContractViolation, WindowTooSmall
from .lattice import BoxLattice, alpha, build_box
from . import observables as obs
from . import stp as stp_mod

SCHEMA_VERSION = 1

SCHEMAS = {
    "isolation": [
        "replica", "step", "n_pivotal", "n_interface", "max_isolation", "rng_draws",
    ],
    "localization": [
        "replica", "step", "n_pivotal", "n_interface", "empty", "max_dist", "rng_draws",
    ],
    "speed": [
        "replica", "step", "span", "ell", "variant", "value", "rng_draws",
    ],
    "empty_pivotal": [
        "replica", "step", "n_pivotal", "empty", "rng_draws",
    ],
    "stp_validity": [
        "replica", "trial", "constructor", "edge", "t_hi", "t_lo", "status",
        "detail", "n_time_edges", "path_length", "boundary_exit",
    ],
}

EXPERIMENTS = tuple(SCHEMAS)


@dataclass
class ExperimentConfig:
    """Knobs shared by every experiment; unused fields are ignored per experiment."""

    experiment: str
    d: int = 2
    L: int = 8
    p: float = 0.95
    seed: int = 0
    replicas: int = 1
    samples: int = 1000
    burn_multiplier: float = 16.0
    cadence: int = 0  # 0 means one sweep (N_E steps) between measurements
    ell_grid: tuple = ()
    s_grid: tuple = ()
    window_sweeps: int = 0  # union-window half width in sweeps; 0 -> ceil(ln N_E)
    trials: int = 1000
    span_max: int = 0  # stp trials: max t - s; 0 -> 4 * N_E
    jobs: int = 1
    out_dir: str = ""

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigurationError(
                f"unknown experiment {self.experiment!r}; expected one of {EXPERIMENTS}"
            )
        if not 0.0 < self.p < 1.0:
            raise ConfigurationError(f"p must lie in (0, 1), got {self.p}")
        if self.replicas < 1:
            raise ConfigurationError("replicas must be >= 1")
        if self.samples < 1 or self.trials < 1:
            raise ConfigurationError("samples and trials must be >= 1")
        if any(x <= 0 for x in self.ell_grid):
            raise ConfigurationError("ell grid entries must be positive")
        if self.d < 2 or self.L < 1:
            raise ConfigurationError("need d >= 2 and L >= 1")

    # Derived geometry ------------------------------------------------------
    @property
    def n_edges(self) -> int:
        return self.d * self.L * (self.L + 1) ** (self.d - 1)

    @property
    def log_lambda(self) -> float:
        """ln of the vertex count (L+1)^d."""
        return self.d * math.log(self.L + 1)

    def effective_cadence(self) -> int:
        return self.cadence if self.cadence else self.n_edges

    def effective_ell_grid(self) -> tuple:
        if self.ell_grid:
            return tuple(self.ell_grid)
        ll = self.log_lambda
        mults = sorted({0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 4.0, float(2 * self.d)})
        return tuple(round(m * ll, 6) for m in mults)

    def effective_s_grid(self) -> tuple:
        if self.s_grid:
            return tuple(int(s) for s in self.s_grid)
        out = []
        s = 1
        while s < self.n_edges:
            out.append(s)
            s *= 4
        out.append(self.n_edges)
        return tuple(out)

    def effective_window_sweeps(self) -> int:
        return self.window_sweeps or math.ceil(math.log(self.n_edges))

    def effective_span_max(self) -> int:
        return self.span_max or 4 * self.n_edges

    def replica_seed(self, replica: int) -> int:
        children = np.random.SeedSequence(self.seed).spawn(self.replicas)
        return int(children[replica].generate_state(1, dtype=np.uint64)[0])

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)


def wilson_interval(k: int, n: int, z: float = 1.96) -> tuple:
    """Wilson score interval for a binomial proportion."""
    if n == 0:
        return (0.0, 1.0)
    phat = k / n
    denom = 1 + z * z / n
    center = (phat + z * z / (2 * n)) / denom
    half = z * math.sqrt(phat * (1 - phat) / n + z * z / (4 * n * n)) / denom
    return (max(0.0, center - half), min(1.0, center + half))


def percentile_ci(sorted_vals, q: float, z: float = 1.96) -> tuple:
    """Order-statistic confidence interval for the q-th percentile."""
    n = len(sorted_vals)
    if n == 0:
        return (math.nan, math.nan)
    frac = q / 100.0
    half = z * math.sqrt(n * frac * (1 - frac))
    lo = int(np.clip(math.floor(n * frac - half), 0, n - 1))
    hi = int(np.clip(math.ceil(n * frac + half), 0, n - 1))
    return (float(sorted_vals[lo]), float(sorted_vals[hi]))


def envelope_fit(sizes, values) -> dict:
    """Least upper envelope a + b*ln^2|Lambda| over the given points, b >= 0.

    Slope from least squares, clipped at zero; intercept lifted so every
    margin (envelope minus observation) is non-negative.
    """
    x = np.array([math.log(s) ** 2 for s in sizes], dtype=float)
    y = np.array(values, dtype=float)
    if len(x) >= 2 and np.ptp(x) > 0:
        b = float(np.polyfit(x, y, 1)[0])
    else:
        b = 0.0
    b = max(0.0, b)
    a = float(np.max(y - b * x))
    margins = (a + b * x - y).tolist()
    return {"a": a, "b": b, "x_ln2_lambda": x.tolist(), "margins": margins}


# ---------------------------------------------------------------------------
# Per-replica workers
# ---------------------------------------------------------------------------

def _fresh_chain(cfg: ExperimentConfig, replica: int):
    lat = build_box(cfg.d, cfg.L)
    rng = RngStream(cfg.replica_seed(replica))
    state = init_state(lat, cfg.p, rng)
    burn_in(state, cfg.burn_multiplier, rng)
    return lat, rng, state


def _pivotal_now(state) -> np.ndarray:
    return obs.pivotal(Config(state.lattice, state.Y))


def _isolation_replica(cfg: ExperimentConfig, replica: int) -> list:
    lat, rng, state = _fresh_chain(cfg, replica)
    cad = cfg.effective_cadence()
    bd = lat.boundary_distances()
    records = []
    for _ in range(cfg.samples):
        run(state, cad, rng)
        piv = _pivotal_now(state)
        n_i = int(np.count_nonzero(state.X & ~state.Y))
        if piv.size == 0:
            radius = math.nan
        else:
            mid = lat.midpoints[piv]
            dm = cdist(mid, mid)
            np.fill_diagonal(dm, np.inf)
            radius = float(np.minimum(dm.min(axis=1), bd[piv]).max())
        records.append({
            "replica": replica, "step": state.t, "n_pivotal": int(piv.size),
            "n_interface": n_i, "max_isolation": radius, "rng_draws": rng.n_draws,
        })
    return records


def _localization_replica(cfg: ExperimentConfig, replica: int) -> list:
    lat, rng, state = _fresh_chain(cfg, replica)
    cad = cfg.effective_cadence()
    bd = lat.boundary_distances()
    records = []
    for _ in range(cfg.samples):
        run(state, cad, rng)
        piv = _pivotal_now(state)
        iface = np.nonzero(state.X & ~state.Y)[0]
        union = np.union1d(piv, iface)
        if union.size == 0:
            val, empty = math.nan, 1
        else:
            base = bd[union]
            if piv.size:
                dm = cdist(lat.midpoints[union], lat.midpoints[piv])
                same = union[:, None] == piv[None, :]
                dm[same] = np.inf
                base = np.minimum(base, dm.min(axis=1))
            val, empty = float(base.max()), 0
        records.append({
            "replica": replica, "step": state.t, "n_pivotal": int(piv.size),
            "n_interface": int(iface.size), "empty": empty, "max_dist": val,
            "rng_draws": rng.n_draws,
        })
    return records


def _speed_replica(cfg: ExperimentConfig, replica: int) -> list:
    lat, rng, state = _fresh_chain(cfg, replica)
    sweep = lat.n_edges
    s_grid = cfg.effective_s_grid()
    ells = cfg.effective_ell_grid()
    w_sweeps = cfg.effective_window_sweeps()
    records = []
    sweep_sets = []  # pivotal set at the start of every window
    windows = []
    for _ in range(cfg.samples):
        p0 = _pivotal_now(state)
        t0 = state.t
        sweep_sets.append(p0)
        caps = {}
        prev = 0
        for s in s_grid:
            run(state, s - prev, rng)
            prev = s
            caps[s] = _pivotal_now(state)
        if prev < sweep:
            run(state, sweep - prev, rng)
        windows.append((t0, p0, caps, rng.n_draws))
    for t0, p0, caps, draws in windows:
        for s in s_grid:
            for ell in ells:
                val = obs.hausdorff_semi(lat, p0, caps[s], ell)
                records.append({
                    "replica": replica, "step": t0, "span": s, "ell": ell,
                    "variant": "pair", "value": _finite(val), "rng_draws": draws,
                })
    # Windowed-union variant over +-w_sweeps sweeps around each interior window.
    for i in range(w_sweeps, len(sweep_sets) - w_sweeps):
        past = np.unique(np.concatenate(sweep_sets[i - w_sweeps : i + 1]))
        future = np.unique(np.concatenate(sweep_sets[i : i + w_sweeps + 1]))
        t0 = windows[i][0]
        for ell in ells:
            val = obs.hausdorff_semi(lat, past, future, ell)
            records.append({
                "replica": replica, "step": t0, "span": w_sweeps * sweep, "ell": ell,
                "variant": "window_union", "value": _finite(val),
                "rng_draws": windows[i][3],
            })
    return records


def _finite(x: float) -> float:
    return x if math.isfinite(x) else math.inf


def _empty_pivotal_replica(cfg: ExperimentConfig, replica: int) -> list:
    lat, rng, state = _fresh_chain(cfg, replica)
    cad = cfg.effective_cadence()
    records = []
    for _ in range(cfg.samples):
        run(state, cad, rng)
        piv = _pivotal_now(state)
        records.append({
            "replica": replica, "step": state.t, "n_pivotal": int(piv.size),
            "empty": int(piv.size == 0), "rng_draws": rng.n_draws,
        })
    return records


_STP_VALIDATORS = {
    "decreasing": (
        ("well_formed", lambda p, h, e: p.well_formed(h.lattice)),
        ("decreasing", lambda p, h, e: stp_mod.is_decreasing(p)),
        ("simple_in_Y", lambda p, h, e: stp_mod.is_simple(p, h, "Y")),
        ("closed_in_Y", lambda p, h, e: stp_mod.is_closed_in(p, h, "Y")),
    ),
    "impatient": (
        ("well_formed", lambda p, h, e: p.well_formed(h.lattice)),
        ("decreasing", lambda p, h, e: stp_mod.is_decreasing(p)),
        ("simple_in_X", lambda p, h, e: stp_mod.is_simple(p, h, "X")),
        ("impatient", lambda p, h, e: stp_mod.is_impatient(p, h)),
        ("x_closed_moving", lambda p, h, e: stp_mod.is_x_closed_moving(p, h, except_edge=e)),
    ),
}


def _stp_endpoint_ok(path, history, constructor, e, s) -> bool:
    if path.boundary_exit:
        last_e, last_t = path.steps[-1]
        return history.lattice.meets_boundary(last_e) and last_t >= s
    last_e, last_t = path.steps[-1]
    if last_t != s:
        return False
    target = set(history.pivotal_at(s).tolist())
    if constructor == "impatient":
        target |= set(history.interface_at(s).tolist())
        target.discard(e)
    return last_e in target


def _stp_validity_replica(cfg: ExperimentConfig, replica: int) -> list:
    lat, rng, state = _fresh_chain(cfg, replica)
    span_max = cfg.effective_span_max()
    # Agreement gaps of interface edges have scale N_E / (1-p); retain enough
    # of the past that backward searches rarely fall out of the window.
    window = 4 * span_max + int(8 * lat.n_edges / (1.0 - cfg.p))
    history = History(state, window=window, snapshot_every=lat.n_edges)
    run(state, window // 2, rng, history=history)
    picker = np.random.Generator(np.random.PCG64(cfg.replica_seed(replica) ^ 0x5B))
    records = []
    for trial in range(cfg.trials):
        run(state, lat.n_edges, rng, history=history)
        constructor = "decreasing" if trial % 2 == 0 else "impatient"
        t = state.t
        s = t - int(picker.integers(1, span_max))
        piv = history.pivotal_at(t)
        base = {
            "replica": replica, "trial": trial, "constructor": constructor,
            "t_hi": t, "t_lo": s, "n_time_edges": 0, "path_length": 0,
            "boundary_exit": 0,
        }
        if piv.size == 0:
            records.append({**base, "edge": -1, "status": "skipped",
                            "detail": "pivotal_empty_at_t"})
            continue
        e = int(piv[picker.integers(0, piv.size)])
        base["edge"] = e
        try:
            if constructor == "decreasing":
                path = stp_mod.construct_decreasing_stp(history, e, t, s)
            else:
                path = stp_mod.construct_impatient_stp(history, e, t, s)
        except (WindowTooSmall, ContractViolation) as exc:
            status = "skipped" if _skippable(exc) else "failed"
            records.append({**base, "status": status, "detail": _reason(exc)})
            continue
        failed = [name for name, fn in _STP_VALIDATORS[constructor]
                  if not fn(path, history, e)]
        if not _stp_endpoint_ok(path, history, constructor, e, s):
            failed.append("endpoint")
        if failed:
            # Failure forensics: the failing validators plus the serialized path.
            detail = ";".join(failed) + ";" + json.dumps(
                path.to_json(), separators=(",", ":"))
        else:
            detail = ""
        records.append({
            **base,
            "status": "failed" if failed else "passed",
            "detail": detail,
            "n_time_edges": len(path.steps),
            "path_length": path.length,
            "boundary_exit": int(path.boundary_exit),
        })
    return records


def _skippable(exc) -> bool:
    return isinstance(exc, WindowTooSmall) or "pivotal set empty" in str(exc)


def _reason(exc) -> str:
    if isinstance(exc, WindowTooSmall):
        return "window_too_small"
    return str(exc).split(",")[0].replace(",", ";")[:80]


_REPLICA_FN = {
    "isolation": _isolation_replica,
    "localization": _localization_replica,
    "speed": _speed_replica,
    "empty_pivotal": _empty_pivotal_replica,
    "stp_validity": _stp_validity_replica,
}


def _worker(args):
    cfg_dict, replica = args
    cfg = ExperimentConfig(**cfg_dict)
    return replica, _REPLICA_FN[cfg.experiment](cfg, replica)


# ---------------------------------------------------------------------------
# Aggregation and summaries
# ---------------------------------------------------------------------------

def _summarize(cfg: ExperimentConfig, records: list) -> dict:
    base = {
        "experiment": cfg.experiment,
        "config": cfg.as_dict(),
        "schema_version": SCHEMA_VERSION,
        "package_version": __version__,
        "n_records": len(records),
        "log_lambda": cfg.log_lambda,
        "lambda_convention": "vertex count (L+1)^d for thresholds; N_E for time scales",
        "cut_events": "S+/S- proxy (minimal cuts extracted from boundary sets)",
        "burn_in": {
            "multiplier": cfg.burn_multiplier,
            "steps": math.ceil(cfg.burn_multiplier * cfg.n_edges * math.log(cfg.n_edges)),
            "note": "empirical burn-in; adequacy checked by dynamics.burn_in_diagnostic, not assumed",
        },
    }
    ells = cfg.effective_ell_grid()
    if cfg.experiment == "isolation":
        vals = [r["max_isolation"] for r in records]
        n = len(vals)
        tail = []
        for ell in ells:
            k = sum(1 for v in vals if not math.isnan(v) and v >= ell)
            lo, hi = wilson_interval(k, n)
            tail.append({"ell": ell, "p_hat": k / n if n else 0.0, "k": k, "n": n,
                         "ci_lo": lo, "ci_hi": hi,
                         "peierls_reference": min(1.0, (alpha(cfg.d) * (1 - cfg.p)) ** (ell / (2 * cfg.d)))})
        base["tail"] = tail
    elif cfg.experiment == "localization":
        vals = sorted(r["max_dist"] for r in records if not r["empty"])
        base["n_nonempty"] = len(vals)
        base["percentiles"] = {
            q: (float(np.percentile(vals, q)) if vals else math.nan) for q in (50, 90, 99)
        }
        base["percentile_ci"] = {q: percentile_ci(vals, q) for q in (50, 90, 99)}
        # Tails against thresholds proportional to ln|Lambda| and ln^2|Lambda|.
        n_all = len(records)
        for key, scale in (("tail_log", cfg.log_lambda),
                           ("tail_log2", cfg.log_lambda ** 2)):
            rows = []
            for mult in (0.25, 0.5, 1.0, 2.0):
                thr = mult * scale
                k = sum(1 for r in records
                        if not r["empty"] and r["max_dist"] >= thr)
                lo, hi = wilson_interval(k, n_all)
                rows.append({"multiplier": mult, "threshold": thr, "k": k,
                             "n": n_all, "p_hat": k / n_all if n_all else 0.0,
                             "ci_lo": lo, "ci_hi": hi})
            base[key] = rows
    elif cfg.experiment == "speed":
        threshold = 2 * cfg.d * cfg.log_lambda
        base["threshold"] = threshold
        excee = []
        for variant in ("pair", "window_union"):
            for ell in ells:
                rel = [r for r in records if r["variant"] == variant and r["ell"] == ell]
                if not rel:
                    continue
                by_window = {}
                for r in rel:
                    key = (r["replica"], r["step"])
                    by_window[key] = max(by_window.get(key, 0.0), r["value"])
                n = len(by_window)
                k = sum(1 for v in by_window.values() if v > threshold)
                lo, hi = wilson_interval(k, n)
                excee.append({"variant": variant, "ell": ell, "k": k, "n": n,
                              "p_hat": k / n if n else 0.0, "ci_lo": lo, "ci_hi": hi})
        base["exceedance"] = excee
    elif cfg.experiment == "empty_pivotal":
        k = sum(r["empty"] for r in records)
        n = len(records)
        lo, hi = wilson_interval(k, n)
        base["empty_frequency"] = {"k": k, "n": n, "p_hat": k / n if n else 0.0,
                                   "ci_lo": lo, "ci_hi": hi}
        base["regime"] = "near_one" if cfg.p >= 0.9 else "out_of_regime"
    elif cfg.experiment == "stp_validity":
        by = {"passed": 0, "failed": 0, "skipped": 0}
        for r in records:
            by[r["status"]] += 1
        base["outcomes"] = by
        returned = by["passed"] + by["failed"]
        lo, hi = wilson_interval(by["passed"], returned)
        base["pass_rate"] = {"k": by["passed"], "n": returned,
                             "p_hat": by["passed"] / returned if returned else 0.0,
                             "ci_lo": lo, "ci_hi": hi}
        base["failures"] = [r for r in records if r["status"] == "failed"][:20]
    return base


def _format_cell(v) -> str:
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf"
        return repr(v)
    return str(v)


def run_experiment(cfg: ExperimentConfig, out_dir: str = None) -> dict:
    """Run all replicas, aggregate, optionally write CSV + summary + manifest.

    Returns {"records", "summary", "paths"}; identical inputs give identical
    outputs regardless of the worker count.
    """
    tasks = [(cfg.as_dict(), r) for r in range(cfg.replicas)]
    if cfg.jobs > 1 and cfg.replicas > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            parts = dict(pool.map(_worker, tasks))
    else:
        parts = dict(map(_worker, tasks))
    records = []
    for r in range(cfg.replicas):
        records.extend(parts[r])
    summary = _summarize(cfg, records)
    paths = {}
    target = out_dir if out_dir is not None else (cfg.out_dir or None)
    if target:
        paths = write_outputs(cfg, records, summary, target)
    return {"records": records, "summary": summary, "paths": paths}


def output_stem(cfg: ExperimentConfig) -> str:
    return f"{cfg.experiment}_{cfg.d}d_L{cfg.L}_p{cfg.p}_seed{cfg.seed}"


def write_outputs(cfg: ExperimentConfig, records, summary, out_dir) -> dict:
    os.makedirs(out_dir, exist_ok=True)
    stem = output_stem(cfg)
    csv_path = os.path.join(out_dir, stem + ".csv")
    cols = SCHEMAS[cfg.experiment]
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(cols)
        for rec in records:
            writer.writerow([_format_cell(rec[c]) for c in cols])
    summary_path = os.path.join(out_dir, stem + "_summary.json")
    with open(summary_path, "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True, allow_nan=True)
        fh.write("\n")
    manifest_path = os.path.join(out_dir, stem + "_manifest.json")
    manifest = {
        "config": cfg.as_dict(),
        "schema_version": SCHEMA_VERSION,
        "package_version": __version__,
        "rng_algorithm": "pcg64",
        "seed_splitting": "numpy SeedSequence(seed).spawn(replicas), first uint64",
        "outputs": {"csv": os.path.basename(csv_path),
                    "summary": os.path.basename(summary_path)},
    }
    with open(manifest_path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return {"csv": csv_path, "summary": summary_path, "manifest": manifest_path}


def run_from_manifest(manifest_path: str, out_dir: str = None) -> dict:
    """Reproduce an experiment from its manifest (byte-identical CSV)."""
    with open(manifest_path) as fh:
        manifest = json.load(fh)
    cfg_dict = dict(manifest["config"])
    cfg_dict["ell_grid"] = tuple(cfg_dict.get("ell_grid") or ())
    cfg_dict["s_grid"] = tuple(cfg_dict.get("s_grid") or ())
    cfg = ExperimentConfig(**cfg_dict)
    if out_dir is None:
        out_dir = os.path.dirname(os.path.abspath(manifest_path))
    return run_experiment(cfg, out_dir=out_dir)


def emit_schemas() -> dict:
    """Machine-readable description of every external format."""
    return {
        "schema_version": SCHEMA_VERSION,
        "package_version": __version__,
        "csv": {name: {"columns": cols} for name, cols in SCHEMAS.items()},
        "event_log": "t,edge_index,coin,y_outcome",
        "file_naming": "{experiment}_{d}d_L{L}_p{p}_seed{seed}.csv",
        "summary": "JSON beside the CSV; keys depend on the experiment",
        "manifest": ["config", "schema_version", "package_version",
                     "rng_algorithm", "seed_splitting", "outputs"],
    }


def sample_conditioned(lattice: BoxLattice, p: float, n: int, seed: int,
                       burn_multiplier: float = 16.0, cadence: int = 0):
    """Yield n decorrelated Y snapshots from the conditioned dynamics."""
    rng = RngStream(seed)
    state = init_state(lattice, p, rng)
    burn_in(state, burn_multiplier, rng)
    cad = cadence or lattice.n_edges
    for _ in range(n):
        run(state, cad, rng)
        yield state.y_config()
