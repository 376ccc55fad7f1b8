"""Config-driven scenario runner with deterministic CSV output.

Every random stream is derived from ``(master_seed, scenario, n, replicate)``
by :func:`derive_seed`, so results do not depend on task order or on the
number of worker processes.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from . import __version__
from .ensembles import build_ensemble
from .haar import Observable, observable, orbital_windows
from .matrix_core import COMPLEX, HERMITIAN
from .spectral import (
    audit_frobenius_inequality_h,
    audit_tau_inequality_z,
    audit_trace_identity,
    boundedness_verdict,
    radial_profile,
)
from .weak import default_test_family, precompactness_from_values, recurrence_from_values

log = logging.getLogger(__name__)

SCENARIOS = ("identity-audit", "radial-survey", "orbital-convergence", "recurrence-probe")
COLUMNS = ("scenario", "parameters", "n", "statistic", "value", "stderr", "pass")
DEFAULT_SCHEDULE = (4, 8, 16, 32, 64, 128, 256)
DEFAULT_SAMPLES = 10_000


class ConfigError(ValueError):
    def __init__(self, field_name: str, message: str):
        super().__init__(f"invalid config field {field_name!r}: {message}")
        self.field = field_name


def derive_seed(master_seed: int, task_coordinates: tuple[str, int, int]) -> int:
    """64-bit stream seed for the task at ``(scenario, n, replicate)``."""
    scenario, n, replicate = task_coordinates
    msg = f"{int(master_seed)}|{scenario}|{int(n)}|{int(replicate)}".encode()
    return int.from_bytes(hashlib.blake2b(msg, digest_size=8).digest(), "little")


@dataclass
class ExperimentConfig:
    scenario: str
    ensemble: dict[str, Any] = field(default_factory=lambda: {"name": "gaussian_hermitian",
                                                              "parameters": {"sigma": 1.0}})
    n_schedule: list[int] = field(default_factory=lambda: list(DEFAULT_SCHEDULE))
    samples: int = DEFAULT_SAMPLES
    m: list[int] = field(default_factory=lambda: [1])
    observables: list[Any] = field(default_factory=list)
    master_seed: int = 0
    output_path: str = "results.csv"
    workers: int = 1
    family_window: int = 1
    family_count: int = 3

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "ExperimentConfig":
        known = set(cls.__dataclass_fields__)
        for key in d:
            if key not in known:
                raise ConfigError(key, "unknown field")
        if "scenario" not in d:
            raise ConfigError("scenario", "missing")
        d = dict(d)
        if "m" in d and not isinstance(d["m"], list):
            d["m"] = [d["m"]]
        cfg = cls(**d)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        if self.scenario not in SCENARIOS:
            raise ConfigError("scenario", f"must be one of {SCENARIOS}, got {self.scenario!r}")
        sched = self.n_schedule
        if (not isinstance(sched, list) or not sched or not all(isinstance(n, int) and n >= 1 for n in sched)
                or any(b <= a for a, b in zip(sched, sched[1:]))):
            raise ConfigError("n_schedule", f"must be a strictly increasing list of positive integers, got {sched}")
        for name in ("samples", "workers", "family_window", "family_count"):
            v = getattr(self, name)
            if not isinstance(v, int) or v < 1:
                raise ConfigError(name, f"must be a positive integer, got {v!r}")
        if not isinstance(self.master_seed, int) or self.master_seed < 0:
            raise ConfigError("master_seed", f"must be a nonnegative integer, got {self.master_seed!r}")
        if not self.m or not all(isinstance(v, int) and v >= 1 for v in self.m):
            raise ConfigError("m", f"must be a positive integer or list of them, got {self.m!r}")
        try:
            kind = build_ensemble(self.ensemble, seed=0).kind
        except (TypeError, ValueError, KeyError, AttributeError) as exc:
            raise ConfigError("ensemble", str(exc)) from None
        try:
            obs = self.observable_list()
        except (TypeError, ValueError) as exc:
            raise ConfigError("observables", str(exc)) from None
        if self.scenario == "identity-audit":
            factor = 2 if kind == HERMITIAN else 3
            bad = [n for n in sched if n <= factor * max(self.m)]
            if bad:
                raise ConfigError("n_schedule", f"audits need every n > {factor}m (m = {max(self.m)}); "
                                                f"offending {bad}")
        if self.scenario == "radial-survey" and len(sched) < 4:
            raise ConfigError("n_schedule", "radial-survey needs at least 4 schedule points")
        if self.scenario in ("orbital-convergence", "recurrence-probe"):
            too_wide = [f.name for f in obs if f.window > sched[0]]
            if too_wide:
                raise ConfigError("observables", f"window exceeds smallest n = {sched[0]}: {too_wide}")
        if self.scenario == "recurrence-probe":
            not_pos = [f.name for f in obs if not f.positive]
            if not_pos:
                raise ConfigError("observables", f"recurrence needs positive observables: {not_pos}")

    def observable_list(self) -> list[Observable]:
        out = []
        for item in self.observables:
            if isinstance(item, str):
                out.append(observable(item))
            else:
                item = dict(item)
                out.append(observable(item.pop("name"), **item))
        if not out:
            if self.scenario == "recurrence-probe":
                out = default_test_family(self.family_window, self.family_count)
            elif self.scenario == "orbital-convergence":
                out = [observable("coord-re")]
        return out

    def canonical(self) -> dict[str, Any]:
        """Config content that determines results (excludes output path and worker count)."""
        d = asdict(self)
        d.pop("output_path")
        d.pop("workers")
        return d


def load_config(path: str | Path) -> dict[str, Any]:
    with open(path) as fh:
        return json.load(fh)


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "PASS" if v else "FAIL"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)


def _params(**kw) -> str:
    return ";".join(f"{k}={_fmt(v)}" for k, v in kw.items())


@dataclass
class ResultTable:
    scenario: str
    master_seed: int
    rows: list[tuple] = field(default_factory=list)
    plot_columns: tuple[str, ...] = ()
    plot_rows: list[tuple] = field(default_factory=list)
    version: str = __version__

    def add(self, parameters: str, n, statistic: str, value, stderr=None, passed=None) -> None:
        self.rows.append((self.scenario, parameters, n, statistic, value, stderr, passed))

    @property
    def errors(self) -> list[tuple]:
        return [r for r in self.rows if r[3] == "error"]

    @property
    def failures(self) -> list[tuple]:
        return [r for r in self.rows if r[6] is False]

    @property
    def ok(self) -> bool:
        return not self.failures and not self.errors

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(COLUMNS)
        for r in self.rows:
            w.writerow([_fmt(v) for v in r])
        buf.write(f"# master_seed={self.master_seed} version={self.version}\n")
        return buf.getvalue()

    def plot_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.plot_columns)
        for r in self.plot_rows:
            w.writerow([_fmt(v) for v in r])
        return buf.getvalue()


def output_paths(out: str | Path) -> tuple[Path, Path, Path]:
    """Main CSV, plot-data CSV and metadata sidecar."""
    out = Path(out)
    stem = out.with_suffix("")
    return out, stem.with_name(stem.name + ".plot.csv"), stem.with_name(stem.name + ".meta.json")


# Tasks ---------------------------------------------------------------------
# A task is (kind_of_task, n, replicate); workers receive the canonical config.

def _prefix_seed(cfg: ExperimentConfig, replicate: int) -> int:
    own = cfg.ensemble.get("seed")
    if own is not None and cfg.scenario in ("orbital-convergence", "recurrence-probe"):
        return int(own)
    base = cfg.master_seed if own is None else int(own)
    return derive_seed(base, ("prefix", 0, replicate))


def _task_identity(cfg: ExperimentConfig, n: int, r: int):
    p = build_ensemble(cfg.ensemble, seed=_prefix_seed(cfg, r))
    reports = []
    for m in cfg.m:
        if p.kind == HERMITIAN:
            reports.append(audit_trace_identity(p, m, n))
            reports.append(audit_frobenius_inequality_h(p, m, n))
        else:
            reports.append(audit_tau_inequality_z(p, m, n))
    return [(rep.operation, rep.parameters["m"], rep.lhs, rep.rhs, rep.scale * rep.tolerance, rep.passed,
             json.dumps(rep.rhs_terms, sort_keys=True)) for rep in reports]


def _task_radial(cfg: ExperimentConfig, n: int, r: int):
    p = build_ensemble(cfg.ensemble, seed=_prefix_seed(cfg, r))
    rp = radial_profile(p, cfg.n_schedule)
    per_n = []
    for pr in rp.profiles:
        if rp.kind == HERMITIAN:
            x1 = float(pr.x_pos[0]) if len(pr.x_pos) else 0.0
            per_n.append((pr.n, pr.gamma1, pr.gamma2, None, x1))
        else:
            per_n.append((pr.n, None, None, pr.gamma, float(pr.x[0])))
    sups = {"running_sup_gamma1_abs": rp.running_sup_gamma1_abs, "running_sup_gamma2": rp.running_sup_gamma2,
            "running_sup_gamma": rp.running_sup_gamma}
    sups = {k: v[-1] for k, v in sups.items() if v}
    return per_n, sups, boundedness_verdict(rp)


def _task_orbital(cfg: ExperimentConfig, n: int, r: int):
    p = build_ensemble(cfg.ensemble, seed=_prefix_seed(cfg, 0))
    obs = cfg.observable_list()
    w = max(f.window for f in obs)
    rng = np.random.Generator(np.random.Philox(derive_seed(cfg.master_seed, (cfg.scenario, n, r))))
    windows = orbital_windows(p, n, w, cfg.samples, rng)
    return [f.evaluate(windows) for f in obs]


_TASKS = {
    "identity-audit": _task_identity,
    "radial-survey": _task_radial,
    "orbital-convergence": _task_orbital,
    "recurrence-probe": _task_orbital,
}


def _run_task(args):
    cfg_dict, n, r = args
    cfg = ExperimentConfig(**cfg_dict)
    try:
        return ("ok", _TASKS[cfg.scenario](cfg, n, r))
    except Exception as exc:  # noqa: BLE001 - reported as an error row
        return ("error", f"{type(exc).__name__}: {exc}")


def _task_list(cfg: ExperimentConfig) -> list[tuple[int, int]]:
    if cfg.scenario == "identity-audit":
        return [(n, r) for n in cfg.n_schedule for r in range(cfg.samples)]
    if cfg.scenario == "radial-survey":
        return [(0, r) for r in range(cfg.samples)]
    return [(n, 0) for n in cfg.n_schedule]


def _execute(cfg: ExperimentConfig, tasks: list[tuple[int, int]]) -> dict[tuple[int, int], tuple]:
    payload = [(asdict(cfg), n, r) for n, r in tasks]
    if cfg.workers == 1 or len(tasks) == 1:
        results = [_run_task(a) for a in payload]
    else:
        chunk = max(1, len(payload) // (4 * cfg.workers))
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(_run_task, payload, chunksize=chunk))
    return dict(zip(tasks, results))


def run(config: ExperimentConfig) -> ResultTable:
    """Execute the configured scenario and return its table (nothing is written)."""
    config.validate()
    tasks = _task_list(config)
    log.info("running %s: %d tasks on %d worker(s)", config.scenario, len(tasks), config.workers)
    results = _execute(config, tasks)
    table = ResultTable(config.scenario, config.master_seed)
    _AGGREGATE[config.scenario](config, tasks, results, table)
    return table


def _error_row(table, key, msg):
    n, r = key
    table.add(_params(replicate=r), n, "error", msg, None, False)


def _agg_identity(cfg, tasks, results, table):
    table.plot_columns = ("operation", "m", "n", "replicate", "lhs", "rhs", "slack", "pass", "rhs_terms")
    tally: dict[tuple[str, int, int], list[bool]] = {}
    for key in tasks:
        status, payload = results[key]
        if status == "error":
            _error_row(table, key, payload)
            continue
        n, r = key
        for op, m, lhs, rhs, slack, passed, terms in payload:
            table.plot_rows.append((op, m, n, r, lhs, rhs, slack, passed, terms))
            tally.setdefault((op, m, n), []).append(passed)
            if not passed:
                table.add(_params(m=m, replicate=r), n, f"{op}:lhs_minus_rhs", lhs - rhs, None, False)
    for (op, m, n), flags in sorted(tally.items()):
        table.add(_params(m=m, replicates=len(flags)), n, f"{op}:pass_fraction",
                  sum(flags) / len(flags), None, all(flags))


def _agg_radial(cfg, tasks, results, table):
    table.plot_columns = ("replicate", "n", "gamma1", "gamma2", "gamma", "x1")
    verdicts: dict[str, int] = {}
    last_n = cfg.n_schedule[-1]
    for key in tasks:
        status, payload = results[key]
        if status == "error":
            _error_row(table, key, payload)
            continue
        r = key[1]
        per_n, sups, verdict = payload
        for n, g1, g2, g, x1 in per_n:
            table.plot_rows.append((r, n, g1, g2, g, x1))
            for name, val in (("gamma1", g1), ("gamma2", g2), ("gamma", g), ("x1", x1)):
                if val is not None:
                    table.add(_params(replicate=r), n, name, val)
        for name, val in sups.items():
            table.add(_params(replicate=r), last_n, name, val)
        table.add(_params(replicate=r), last_n, "verdict", verdict)
        verdicts[verdict] = verdicts.get(verdict, 0) + 1
    done = sum(verdicts.values())
    for verdict, count in sorted(verdicts.items()):
        table.add(_params(replicates=done), last_n, f"verdict_fraction:{verdict}", count / done)


def _orbital_values(cfg, tasks, results, table):
    obs = cfg.observable_list()
    values = {i: [] for i in range(len(obs))}
    sched = []
    for key in tasks:
        status, payload = results[key]
        if status == "error":
            _error_row(table, key, payload)
            continue
        sched.append(key[0])
        for i, v in enumerate(payload):
            values[i].append(v)
    return obs, sched, values


def _obs_label(f: Observable) -> str:
    return json.dumps(f.describe(), sort_keys=True, separators=(",", ":"))


def _agg_orbital(cfg, tasks, results, table):
    table.plot_columns = ("observable", "n_a", "n_b", "w1")
    obs, sched, values = _orbital_values(cfg, tasks, results, table)
    if len(sched) < 2:
        return
    for i, f in enumerate(obs):
        label = _obs_label(f)
        res = precompactness_from_values(sched, values[i])
        for n, avg in zip(sched, res.averages):
            table.add(_params(observable=label), n, "mean", avg.mean, avg.stderr)
        for a, na in enumerate(sched):
            for b, nb in enumerate(sched):
                table.plot_rows.append((label, na, nb, res.pairwise[a, b]))
                if a < b:
                    table.add(_params(observable=label, n_other=nb), na, "w1", res.pairwise[a, b])
        table.add(_params(observable=label, tolerance=res.tolerance), sched[-1], "verdict", res.verdict)


def _agg_recurrence(cfg, tasks, results, table):
    table.plot_columns = ("observable", "n", "mean", "stderr")
    obs, sched, values = _orbital_values(cfg, tasks, results, table)
    if not sched:
        return
    for i, f in enumerate(obs):
        label = _obs_label(f)
        est = recurrence_from_values(sched, values[i])
        for n, avg in zip(sched, est.per_n):
            table.plot_rows.append((label, n, avg.mean, avg.stderr))
            table.add(_params(observable=label), n, "mean", avg.mean, avg.stderr)
        table.add(_params(observable=label), sched[-1], "inf", est.inf)


_AGGREGATE = {
    "identity-audit": _agg_identity,
    "radial-survey": _agg_radial,
    "orbital-convergence": _agg_orbital,
    "recurrence-probe": _agg_recurrence,
}


def write_outputs(config: ExperimentConfig, table: ResultTable) -> tuple[Path, Path, Path]:
    main, plot, meta = output_paths(config.output_path)
    main.parent.mkdir(parents=True, exist_ok=True)
    main.write_text(table.to_csv())
    plot.write_text(table.plot_csv())
    canon = config.canonical()
    blob = json.dumps(canon, sort_keys=True, separators=(",", ":")).encode()
    meta.write_text(json.dumps({
        "config": canon,
        "config_sha256": hashlib.sha256(blob).hexdigest(),
        "master_seed": config.master_seed,
        "version": __version__,
        "columns": list(COLUMNS),
        "plot_columns": list(table.plot_columns),
    }, sort_keys=True, indent=2) + "\n")
    return main, plot, meta
