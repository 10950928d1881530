"""Experiment runner and command-line entry point.

Writes a summary CSV (one row per n_wns/policy/mode/interval), and optionally
per-repetition trace CSVs, action histograms and oracle key-value files.
Exit codes: 0 ok, 1 configuration error, 2 runtime error.
"""
from __future__ import annotations

import argparse
import csv
import io
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np

from . import geometry
from .channel import ArmSpace, ChannelModel, RadioParams
from .geometry import ScenarioConfig
from .oracle import OracleBudgetError, brute_force
from .orchestrator import RunResult, run
from .policies import KINDS, PolicyParams

log = logging.getLogger("spatial_reuse")

DEFAULT_INTERVALS = ((1, 100), (101, 500), (501, 1000), (1001, 2500), (2501, 10000))
TRACE_COLUMNS = ["iteration", "wn_id", "channel", "tx_power_dbm", "active", "throughput_mbps", "reward"]
SUMMARY_COLUMNS = ["n_wns", "policy", "mode", "interval_start", "interval_end",
                   "mean_tpt_mbps", "temporal_std_mbps", "pf_fraction", "reps"]
SWEEP_COLUMNS = ["policy", "param", "value", "mean_agg_tpt_mbps", "std_agg_tpt_mbps", "reps"]
HISTOGRAM_COLUMNS = ["n_wns", "policy", "mode", "wn_id", "arm", "channel", "tx_power_dbm", "frequency"]
SCENARIOS = ("grid", "random", "dynamic")
MODES = ("concurrent", "sequential")


class ConfigError(ValueError):
    pass


def fmt(x) -> str:
    """Six significant digits; empty for a missing value."""
    if x is None or (isinstance(x, float) and np.isnan(x)):
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".6g")


def round6(a: np.ndarray) -> np.ndarray:
    """Values exactly as they appear in a trace CSV."""
    flat = [float(format(v, ".6g")) for v in np.asarray(a, dtype=float).ravel().tolist()]
    return np.array(flat).reshape(np.shape(a))


def default_intervals(iterations: int) -> tuple[tuple[int, int], ...]:
    if iterations < 1:
        return ()
    out = []
    for start, end in DEFAULT_INTERVALS:
        if start > iterations:
            break
        out.append((start, min(end, iterations)))
    if out[-1][1] < iterations:
        out[-1] = (out[-1][0], iterations)
    return tuple(out)


@dataclass
class ExperimentConfig:
    scenario: str = "grid"
    n_wns: tuple[int, ...] = (4,)
    policy: tuple[str, ...] = ("thompson",)
    mode: tuple[str, ...] = ("concurrent",)
    iterations: int = 10_000
    reps: int = 100
    seed: int = 1
    eps0: float = 1.0
    eta0: float = 0.1
    gamma: float = 0.0
    thompson_update: str = "posterior"
    alpha: float = 4.0
    pl0_db: float = 5.0
    d_obs_m: float = 5.0
    noise_dbm: float = -100.0
    bandwidth_mhz: float = 20.0
    leakage_db: float = 20.0
    reference_power: str = "own"
    n_channels: int = 3
    tx_powers: tuple[float, ...] = (-15.0, 0.0, 15.0, 30.0)
    shadow_std_db: float = 2.5
    obstacle_min_db: float = 10.0
    obstacle_max_db: float = 50.0
    activations: tuple[int, ...] = (0, 0, 2500, 5000)
    intervals: tuple[tuple[int, int], ...] | None = None
    trace: bool = False
    oracle: bool = False
    histogram: bool = False
    out: str = "results"
    workers: int = 1

    def __post_init__(self):
        if self.intervals is None:
            self.intervals = default_intervals(self.iterations)

    def validate(self) -> "ExperimentConfig":
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"scenario must be one of {SCENARIOS}")
        for p in self.policy:
            if p not in KINDS:
                raise ConfigError(f"unknown policy {p!r}; choose from {KINDS}")
        for m in self.mode:
            if m not in MODES:
                raise ConfigError(f"unknown mode {m!r}; choose from {MODES}")
        if self.iterations < 1 or self.reps < 1 or self.workers < 1:
            raise ConfigError("iterations, reps and workers must be >= 1")
        if any(n < 1 for n in self.n_wns):
            raise ConfigError("n_wns must be >= 1")
        if self.scenario in ("grid", "dynamic") and tuple(self.n_wns) != (4,):
            raise ConfigError(f"the {self.scenario} scenario has exactly 4 WNs")
        prev_end = 0
        for start, end in self.intervals:
            if start != prev_end + 1 or end < start:
                raise ConfigError("intervals must be ordered, disjoint and contiguous from 1")
            prev_end = end
        if prev_end != self.iterations:
            raise ConfigError(f"intervals end at {prev_end}, expected iterations={self.iterations}")
        try:
            self.radio()
            self.policy_params()
            ArmSpace(self.n_channels, tuple(self.tx_powers))
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        return self

    def radio(self) -> RadioParams:
        return RadioParams(self.pl0_db, self.alpha, self.d_obs_m, self.noise_dbm, self.bandwidth_mhz,
                           self.leakage_db, self.reference_power)

    def policy_params(self) -> PolicyParams:
        return PolicyParams(eps0=self.eps0, eta0=self.eta0, gamma=self.gamma,
                            thompson_update=self.thompson_update)

    def arm_space(self) -> ArmSpace:
        return ArmSpace(self.n_channels, tuple(float(p) for p in self.tx_powers))

    def scenario_config(self, n_wns: int) -> ScenarioConfig:
        return ScenarioConfig(n_wns=n_wns, shadow_std_db=self.shadow_std_db,
                              obstacle_min_db=self.obstacle_min_db, obstacle_max_db=self.obstacle_max_db,
                              activations=tuple(self.activations), iterations=self.iterations)


def deployment_for(config: ExperimentConfig, n_wns: int, rep: int) -> geometry.Deployment:
    """Grid and dynamic layouts are fixed by the base seed; random ones change per repetition."""
    scen = config.scenario_config(n_wns)
    if config.scenario == "random":
        return geometry.build_random(scen, n_wns, config.seed + rep)
    return geometry.build(config.scenario, scen, config.seed)


@dataclass
class RepStats:
    n_wns: int
    policy: str
    mode: str
    rep: int
    tpt_sum: list[float]
    tpt_count: list[int]
    temporal_std: list[float]
    pf_fraction: list[float]
    aggregate_mean: float
    histogram: np.ndarray | None = None
    oracle_text: str | None = None
    trace_csv: str | None = None


def _std(x: np.ndarray) -> float:
    # Shifting by the first sample is exact for constant series (std 0, not 1e-13).
    return float(np.std(x - x[0]))


def interval_stats(trace: RunResult, intervals, pf_aggregate: float | None):
    """Per-interval (sum, count, mean per-WN std, pf fraction) over 6-digit throughputs."""
    tpt = round6(trace.throughput)
    active = trace.active
    sums, counts, stds, fracs = [], [], [], []
    for start, end in intervals:
        rows = slice(start - 1, end)
        g, a = tpt[rows], active[rows]
        sums.append(float(g[a].sum()))
        counts.append(int(a.sum()))
        per_wn = [_std(g[a[:, i], i]) for i in range(trace.n_wns) if a[:, i].any()]
        stds.append(float(np.mean(per_wn)) if per_wn else np.nan)
        if pf_aggregate:
            fracs.append(float(g.sum(axis=1).mean() / pf_aggregate))
        else:
            fracs.append(np.nan)
    return sums, counts, stds, fracs


def trace_to_csv(trace: RunResult) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRACE_COLUMNS)
    space = trace.arm_space
    for t in range(trace.iterations):
        for i in range(trace.n_wns):
            on = bool(trace.active[t, i])
            if on:
                arm = space.arm(trace.arms[t, i])
                w.writerow([t, i, arm.channel, fmt(arm.tx_power_dbm), 1,
                            fmt(trace.throughput[t, i]), fmt(trace.reward[t, i])])
            else:
                w.writerow([t, i, "", "", 0, fmt(0.0), ""])
    return buf.getvalue()


def action_histogram(trace: RunResult) -> np.ndarray:
    """(N, K) frequency of each arm per WN over its active iterations."""
    k = trace.arm_space.size
    out = np.zeros((trace.n_wns, k))
    for i in range(trace.n_wns):
        played = trace.arms[trace.active[:, i], i]
        if played.size:
            out[i] = np.bincount(played, minlength=k) / played.size
    return out


_ORACLE_CACHE: dict = {}


def _pf_oracle(config: ExperimentConfig, deployment, n_wns: int):
    key = (config.scenario, n_wns, deployment.seed, config.radio(), config.arm_space(), deployment.to_bytes())
    if key not in _ORACLE_CACHE:
        model = ChannelModel.from_deployment(deployment, config.radio(), config.arm_space())
        try:
            _ORACLE_CACHE[key] = brute_force(model, "proportional_fair")
        except OracleBudgetError as exc:
            log.warning("no PF baseline for n_wns=%d: %s", n_wns, exc)
            _ORACLE_CACHE[key] = None
    return _ORACLE_CACHE[key]


def run_job(args) -> RepStats:
    config, n_wns, policy, mode, rep = args
    dep = deployment_for(config, n_wns, rep)
    trace = run(dep, policy, mode, config.iterations, config.seed + rep,
                radio=config.radio(), arm_space=config.arm_space(), policy_params=config.policy_params())
    oracle = _pf_oracle(config, dep, n_wns) if config.oracle else None
    pf_agg = oracle.aggregate_mbps if oracle is not None else None
    sums, counts, stds, fracs = interval_stats(trace, config.intervals, pf_agg)
    agg = float(round6(trace.throughput).sum(axis=1).mean())
    return RepStats(
        n_wns, policy, mode, rep, sums, counts, stds, fracs, agg,
        histogram=action_histogram(trace) if config.histogram else None,
        oracle_text=oracle.to_text() if oracle is not None else None,
        trace_csv=trace_to_csv(trace) if config.trace else None,
    )


def _map(config: ExperimentConfig, jobs):
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            return list(pool.map(run_job, jobs))
    return [run_job(j) for j in jobs]


def summarize(config: ExperimentConfig, stats: list[RepStats]) -> list[dict]:
    """Deterministic reduce of per-repetition statistics, keyed by (n, policy, mode)."""
    groups: dict = {}
    for s in sorted(stats, key=lambda s: s.rep):
        groups.setdefault((s.n_wns, s.policy, s.mode), []).append(s)
    rows = []
    for n in config.n_wns:
        for policy in config.policy:
            for mode in config.mode:
                reps = groups[(n, policy, mode)]
                for j, (start, end) in enumerate(config.intervals):
                    count = sum(r.tpt_count[j] for r in reps)
                    stds = [r.temporal_std[j] for r in reps if not np.isnan(r.temporal_std[j])]
                    fracs = [r.pf_fraction[j] for r in reps if not np.isnan(r.pf_fraction[j])]
                    rows.append({
                        "n_wns": n, "policy": policy, "mode": mode,
                        "interval_start": start, "interval_end": end,
                        "mean_tpt_mbps": sum(r.tpt_sum[j] for r in reps) / count if count else np.nan,
                        "temporal_std_mbps": float(np.mean(stds)) if stds else np.nan,
                        "pf_fraction": float(np.mean(fracs)) if fracs else np.nan,
                        "reps": len(reps),
                    })
    return rows


def write_csv(path: Path, columns: list[str], rows: list[dict]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([fmt(row[c]) if not isinstance(row[c], str) else row[c] for c in columns])


def run_experiment(config: ExperimentConfig) -> tuple[list[Path], Path]:
    """Run every (n_wns, policy, mode, repetition) and write the CSV artifacts."""
    config.validate()
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    jobs = [(config, n, p, m, rep) for n in config.n_wns for p in config.policy for m in config.mode
            for rep in range(config.reps)]
    log.info("running %d simulations of %d iterations", len(jobs), config.iterations)
    stats = _map(config, jobs)
    trace_paths = []
    for s in stats:
        if s.trace_csv is not None:
            path = out / f"trace_n{s.n_wns}_{s.policy}_{s.mode}_rep{s.rep:03d}.csv"
            path.write_text(s.trace_csv, encoding="utf-8", newline="\n")
            trace_paths.append(path)
    if config.oracle:
        written = set()
        for s in stats:
            rep_key = s.rep if config.scenario == "random" else 0
            if s.oracle_text is not None and (s.n_wns, rep_key) not in written:
                written.add((s.n_wns, rep_key))
                (out / f"oracle_n{s.n_wns}_rep{rep_key:03d}.txt").write_text(s.oracle_text, encoding="utf-8",
                                                                              newline="\n")
    if config.histogram:
        write_csv(out / "actions.csv", HISTOGRAM_COLUMNS, _histogram_rows(config, stats))
    summary = out / "summary.csv"
    write_csv(summary, SUMMARY_COLUMNS, summarize(config, stats))
    return trace_paths, summary


def _histogram_rows(config: ExperimentConfig, stats: list[RepStats]) -> list[dict]:
    space = config.arm_space()
    rows = []
    for n in config.n_wns:
        for policy in config.policy:
            for mode in config.mode:
                hists = [s.histogram for s in sorted(stats, key=lambda s: s.rep)
                         if (s.n_wns, s.policy, s.mode) == (n, policy, mode)]
                mean = np.mean(hists, axis=0)
                for i in range(n):
                    for k in range(space.size):
                        arm = space.arm(k)
                        rows.append({"n_wns": n, "policy": policy, "mode": mode, "wn_id": i, "arm": k,
                                     "channel": arm.channel, "tx_power_dbm": arm.tx_power_dbm,
                                     "frequency": mean[i, k]})
    return rows


def tuning_sweep(config: ExperimentConfig, param: str, values) -> Path:
    """Mean and std (over repetitions) of run-average aggregate throughput per parameter value."""
    if param not in ("eps0", "eta0", "gamma"):
        raise ConfigError("sweep parameter must be eps0, eta0 or gamma")
    config.validate()
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for policy in config.policy:
        for value in values:
            cfg = replace(config, **{param: float(value)}, trace=False, oracle=False, histogram=False)
            jobs = [(cfg, config.n_wns[0], policy, config.mode[0], rep) for rep in range(config.reps)]
            aggs = np.array([s.aggregate_mean for s in _map(cfg, jobs)])
            rows.append({"policy": policy, "param": param, "value": float(value),
                         "mean_agg_tpt_mbps": float(aggs.mean()), "std_agg_tpt_mbps": float(aggs.std()),
                         "reps": len(aggs)})
    path = out / f"sweep_{param}.csv"
    write_csv(path, SWEEP_COLUMNS, rows)
    return path


# ---------------------------------------------------------------- CLI

def _int_list(text: str) -> tuple[int, ...]:
    return tuple(int(v) for v in str(text).split(",") if v.strip())


def _float_list(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in str(text).split(",") if v.strip())


def _str_list(text: str) -> tuple[str, ...]:
    return tuple(v.strip() for v in str(text).split(",") if v.strip())


def _intervals(text: str) -> tuple[tuple[int, int], ...]:
    out = []
    for part in _str_list(text):
        start, _, end = part.partition("-")
        out.append((int(start), int(end)))
    return tuple(out)


def _bool(text) -> bool:
    if isinstance(text, bool):
        return text
    value = str(text).strip().lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


PARSERS = {
    "scenario": str, "n_wns": _int_list, "policy": _str_list, "mode": _str_list,
    "iterations": int, "reps": int, "seed": int, "eps0": float, "eta0": float, "gamma": float,
    "thompson_update": str, "alpha": float, "pl0_db": float, "d_obs_m": float, "noise_dbm": float,
    "bandwidth_mhz": float, "leakage_db": float, "reference_power": str, "n_channels": int,
    "tx_powers": _float_list, "shadow_std_db": float, "obstacle_min_db": float, "obstacle_max_db": float,
    "activations": _int_list, "intervals": _intervals, "trace": _bool, "oracle": _bool,
    "histogram": _bool, "out": str, "workers": int,
}


def read_config_file(path: str | Path) -> dict:
    """Flat ``key = value`` file; ``#`` starts a comment; keys use CLI or field spelling."""
    values = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"{path}:{lineno}: expected key=value")
        key = key.strip().lstrip("-").replace("-", "_")
        if key not in PARSERS:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        values[key] = value.strip()
    return values


def build_config(raw: dict) -> ExperimentConfig:
    kwargs = {}
    for key, value in raw.items():
        try:
            kwargs[key] = PARSERS[key](value)
        except ValueError as exc:
            raise ConfigError(f"bad value for {key}: {value!r}") from exc
    if "intervals" not in kwargs:
        kwargs["intervals"] = None
    return ExperimentConfig(**kwargs).validate()


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key=value file; command-line flags override it")
    p.add_argument("--scenario", choices=SCENARIOS)
    p.add_argument("--n-wns", dest="n_wns", help="comma list, e.g. 2,4,6,8")
    p.add_argument("--policy", help="comma list of " + ",".join(KINDS))
    p.add_argument("--mode", help="concurrent, sequential or both (comma list)")
    p.add_argument("--iterations")
    p.add_argument("--reps")
    p.add_argument("--seed")
    p.add_argument("--eps0")
    p.add_argument("--eta0")
    p.add_argument("--gamma")
    p.add_argument("--alpha")
    p.add_argument("--thompson-update", dest="thompson_update", choices=("posterior", "recency"))
    p.add_argument("--reference-power", dest="reference_power", choices=("own", "max"))
    p.add_argument("--shadow-std-db", dest="shadow_std_db")
    p.add_argument("--activations", help="dynamic scenario, comma list")
    p.add_argument("--intervals", help="e.g. 1-100,101-500,501-10000")
    p.add_argument("--out")
    p.add_argument("--workers", help="parallel worker processes")
    p.add_argument("--trace", action="store_const", const="1", help="write one trace CSV per repetition")
    p.add_argument("--oracle", action="store_const", const="1", help="compute the PF baseline")
    p.add_argument("--histogram", action="store_const", const="1", help="write action frequencies")
    p.add_argument("-v", "--verbose", action="store_true")


class _Parser(argparse.ArgumentParser):
    """Usage errors are configuration errors (exit 1), not argparse's default 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def make_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="spatial-reuse", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    _add_common(sub.add_parser("run", help="run an experiment and write summary.csv"))
    sweep = sub.add_parser("sweep", help="tune eps0/eta0/gamma over a list of values")
    _add_common(sweep)
    sweep.add_argument("--param", required=True, choices=("eps0", "eta0", "gamma"))
    sweep.add_argument("--values", default=",".join(f"{v / 10:.1f}" for v in range(11)),
                       help="comma list (default 0.0..1.0 in 0.1 steps)")
    return parser


def main(argv=None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        raw = read_config_file(args.config) if args.config else {}
        for f in fields(ExperimentConfig):
            value = getattr(args, f.name, None)
            if value is not None:
                raw[f.name] = value
        config = build_config(raw)
        if args.command == "sweep":
            values = _float_list(args.values)
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    try:
        if args.command == "sweep":
            path = tuning_sweep(config, args.param, values)
            print(path)
        else:
            _, summary = run_experiment(config)
            print(summary)
    except (OSError, RuntimeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
