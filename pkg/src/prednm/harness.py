"""Experiment configuration, the run loop, traces, reports and plots."""

from __future__ import annotations

import configparser
import csv
import json
import math
import time
from collections import Counter
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Iterable, Optional

from .kernel import LogicalProcess
from .network import Topology, TwinConfig, build_network, driving_emit
from .polling import PollingParams
from .sync import Coordinator, WindowPolicy, round_schedule
from .timebase import ticks
from .verification import ErrorModel, VerificationPolicy

TRACE_NAME = "trace.jsonl"
REPORT_NAME = "report.json"


class ConfigError(ValueError):
    def __init__(self, problems: dict[str, str]) -> None:
        self.problems = problems
        super().__init__("; ".join(f"{k}: {v}" for k, v in problems.items()))


@dataclass(frozen=True)
class ExperimentConfig:
    lam: float  # lookahead window
    theta: float  # tolerance
    upsilon: float  # verification period
    duration: float = 1000.0
    seed: int = 1
    delta: Optional[float] = None  # coordinator step; default min(upsilon, 1)
    gvt_mode: str = "exact"
    topology: Topology = field(default_factory=Topology)
    twin: TwinConfig = field(default_factory=TwinConfig)
    out_dir: Optional[str] = None
    name: Optional[str] = None
    pace: float = 0.0
    polling: Optional[PollingParams] = None
    budget_pct: float = 5.0
    error_model: ErrorModel = field(default_factory=ErrorModel)

    @property
    def step(self) -> float:
        return self.delta if self.delta is not None else min(self.upsilon, 1.0)

    @property
    def label(self) -> str:
        if self.name:
            return self.name
        theta = "inf" if math.isinf(self.theta) else f"{self.theta:g}"
        return f"({self.lam:g},{theta},{self.upsilon:g})"

    def validate(self) -> "ExperimentConfig":
        bad: dict[str, str] = {}
        if not self.duration > 0:
            bad["duration"] = "must be positive"
        if not self.upsilon > 0:
            bad["upsilon"] = "must be positive"
        elif self.upsilon > self.duration:
            bad["upsilon"] = "must not exceed duration"
        if not self.lam >= 0:
            bad["lookahead"] = "must be non-negative"
        if not self.theta >= 0:
            bad["tolerance"] = "must be non-negative"
        if self.delta is not None and not self.delta > 0:
            bad["delta"] = "must be positive"
        if self.gvt_mode not in ("exact", "approx"):
            bad["gvt_mode"] = "must be 'exact' or 'approx'"
        if self.twin.mean_service is not None and not self.twin.mean_service > 0:
            bad["twin.mean_service"] = "must be positive"
        if self.pace < 0:
            bad["pace"] = "must be non-negative"
        if bad:
            raise ConfigError(bad)
        return self


_SECTIONS = {"experiment", "topology", "twin", "output", "polling", "error_model"}


def _float(v: str) -> float:
    return math.inf if v.strip().lower() in ("inf", "infinity", "none") else float(v)


def load_config(path: str | Path) -> ExperimentConfig:
    """Read an INI-style experiment file."""
    cp = configparser.ConfigParser()
    try:
        with open(path) as fh:
            cp.read_file(fh)
    except OSError as exc:
        raise ConfigError({"config": str(exc)}) from exc
    except configparser.Error as exc:
        raise ConfigError({"config": str(exc).splitlines()[0]}) from exc
    return config_from_parser(cp)


def config_from_parser(cp: configparser.ConfigParser) -> ExperimentConfig:
    bad: dict[str, str] = {}
    for s in cp.sections():
        if s not in _SECTIONS:
            bad[s] = "unknown section"

    def get(section: str, key: str, conv, default=None, required=False):
        if not cp.has_option(section, key):
            if required:
                bad[f"{section}.{key}"] = "missing"
            return default
        raw = cp.get(section, key)
        try:
            return conv(raw)
        except ValueError:
            bad[f"{section}.{key}"] = f"cannot parse {raw!r}"
            return default

    exp = "experiment"
    kw = dict(
        lam=get(exp, "lookahead", float, 0.0, required=True),
        theta=get(exp, "tolerance", _float, math.inf),
        upsilon=get(exp, "upsilon", float, 1.0, required=True),
        duration=get(exp, "duration", float, 1000.0),
        seed=get(exp, "seed", int, 1),
        delta=get(exp, "delta", float, None),
        gvt_mode=get(exp, "gvt_mode", str, "exact"),
        name=get(exp, "name", str, None),
        pace=get(exp, "pace", float, 0.0),
        out_dir=get("output", "dir", str, None),
    )
    topo_kw = {k: v for k, v in dict(
        switches=get("topology", "switches", int),
        servers=get("topology", "servers", int),
        mean_service=get("topology", "mean_service", float),
        packets_per_switch=get("topology", "packets_per_switch", int),
    ).items() if v is not None}
    try:
        kw["topology"] = Topology(**topo_kw)
    except ValueError as exc:
        bad["topology"] = str(exc)
    kw["twin"] = TwinConfig(
        mean_service=get("twin", "mean_service", float),
        exact=get("twin", "exact", _bool, False),
    )
    if cp.has_section("polling"):
        pk = {k: get("polling", k, float, None, required=True)
              for k in ("P", "S", "N", "delta", "bw_total")}
        pk["T"] = get("polling", "T", float, 1.0)
        kw["budget_pct"] = get("polling", "budget_pct", float, 5.0)
        if all(v is not None for v in pk.values()):
            try:
                kw["polling"] = PollingParams(**pk)
            except ValueError as exc:
                bad["polling"] = str(exc)
    em = "error_model"
    if cp.has_section(em):
        hops = get(em, "hop_times", lambda v: tuple(float(x) for x in v.split(",")), (10.0,))
        try:
            kw["error_model"] = ErrorModel(
                gain=get(em, "gain", float, 1.0),
                eps=get(em, "eps", float, 0.0),
                me_dp=get(em, "me_dp", float, 0.0),
                hop_times=hops,
                compose=get(em, "compose", str, "recursive"),
            )
        except ValueError as exc:
            bad[em] = str(exc)
    if bad:
        raise ConfigError(bad)
    return ExperimentConfig(**kw).validate()


def _bool(v: str) -> bool:
    s = v.strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ValueError(v)


# -- running ---------------------------------------------------------------


@dataclass
class RunReport:
    label: str
    seed: int
    rollbacks: dict[str, int]
    polls: int
    trace_path: Optional[str]
    max_t_ahead: float
    max_t_ahead_at: float
    final: dict[int, tuple[Optional[float], float]]
    runtime_s: float
    unmatched_antis: int
    below_floor: int
    trace: list[dict] = field(default_factory=list, repr=False)
    error_samples: list[tuple[float, float]] = field(default_factory=list, repr=False)

    def to_json(self) -> dict:
        d = {f.name: getattr(self, f.name) for f in fields(self)
             if f.name not in ("trace", "error_samples")}
        d["final"] = {str(k): list(v) for k, v in self.final.items()}
        return d


def _prepare(config: ExperimentConfig):
    net = build_network(config.topology, config.seed, config.twin)
    lps = [
        LogicalProcess(i, net.processes[i], net.streams[i], tolerance=config.theta,
                       first_seq=net.first_seq)
        for i in range(config.topology.switches)
    ]
    coord = Coordinator(
        net.truth, lps, WindowPolicy(ticks(config.lam)),
        VerificationPolicy(ticks(config.upsilon), config.theta),
        gvt_mode=config.gvt_mode, pace=config.pace,
    )
    coord.inject(driving_emit(config.topology))
    return coord


def run(config: ExperimentConfig, out_dir: Optional[str | Path] = None) -> RunReport:
    """Run one experiment; writes ``trace.jsonl`` and ``report.json`` when given a directory."""
    config.validate()
    started = time.perf_counter()
    coord = _prepare(config)
    end = ticks(config.duration)
    coord.trace.append({"kind": "config", "label": config.label, "seed": config.seed,
                        "lookahead": config.lam,
                        "tolerance": None if math.isinf(config.theta) else config.theta,
                        "upsilon": config.upsilon, "duration": config.duration,
                        "delta": config.step, "gvt_mode": config.gvt_mode,
                        "topology": asdict(config.topology), "twin": asdict(config.twin)})
    coord.run(round_schedule(end, ticks(config.step), ticks(config.upsilon)))
    coord.finish(end)
    trace = coord.trace

    counts = Counter(r["cause"] for r in trace if r["kind"] == "rollback")
    gvts = [r for r in trace if r["kind"] == "gvt"]
    best = max(gvts, key=lambda r: r["t_ahead"])  # first maximum
    last_state = {r["device"]: (r["predicted"], r["actual"])
                  for r in trace if r["kind"] == "state"}
    report = RunReport(
        label=config.label,
        seed=config.seed,
        rollbacks={"causality": counts["causality"], "verification": counts["verification"]},
        polls=coord.truth.polls,
        trace_path=None,
        max_t_ahead=best["t_ahead"],
        max_t_ahead_at=best["real_time"],
        final=last_state,
        runtime_s=0.0,
        unmatched_antis=coord.unmatched_antis(),
        below_floor=sum(1 for r in trace if r["kind"] == "rollback" and r["below_floor"]),
        trace=trace,
        error_samples=coord.error_samples,
    )
    out = out_dir if out_dir is not None else config.out_dir
    if out is not None:
        path = Path(out)
        path.mkdir(parents=True, exist_ok=True)
        report.trace_path = str(write_trace(trace, path / TRACE_NAME))
    report.runtime_s = time.perf_counter() - started
    if out is not None:
        (Path(out) / REPORT_NAME).write_text(json.dumps(report.to_json(), indent=2, sort_keys=True))
    return report


def write_trace(rows: Iterable[dict], path: Path) -> Path:
    with open(path, "w") as fh:
        for row in rows:
            fh.write(json.dumps(row, sort_keys=True, allow_nan=False))
            fh.write("\n")
    return path


def read_trace(path: str | Path) -> list[dict]:
    with open(path) as fh:
        return [json.loads(line) for line in fh if line.strip()]


# -- the experiment suite --------------------------------------------------

PERTURBED = TwinConfig(mean_service=12.0)

SUITE_TRIPLES = ((5.0, 10.0, 5.0), (5.0, 10.0, 1.0), (5.0, 3.0, 5.0), (400.0, 5.0, 5.0))


def suite_configs(seed: int = 1, duration: float = 1000.0,
                  twin: TwinConfig = PERTURBED) -> list[ExperimentConfig]:
    cfgs = [ExperimentConfig(lam, theta, ups, duration=duration, seed=seed, twin=twin)
            for lam, theta, ups in SUITE_TRIPLES]
    cfgs.append(ExperimentConfig(5.0, 10.0, 5.0, duration=duration, seed=seed,
                                 twin=TwinConfig(exact=True), name="(5,10,5) exact twin"))
    return cfgs


SUMMARY_FIELDS = ("label", "seed", "causality_rollbacks", "verification_rollbacks", "polls",
                  "max_t_ahead", "max_t_ahead_at", "unmatched_antis", "below_floor",
                  "runtime_s")


def suite(out_dir: Optional[str | Path] = None, *, seed: int = 1,
          duration: float = 1000.0) -> list[RunReport]:
    """All four reference triples on a perturbed twin, plus an exact-twin control."""
    reports = []
    for i, cfg in enumerate(suite_configs(seed, duration)):
        sub = None if out_dir is None else Path(out_dir) / f"run{i}"
        reports.append(run(cfg, sub))
    if out_dir is not None:
        write_summary(reports, Path(out_dir) / "summary.csv")
    return reports


def write_summary(reports: list[RunReport], path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, SUMMARY_FIELDS)
        w.writeheader()
        for r in reports:
            w.writerow({
                "label": r.label, "seed": r.seed,
                "causality_rollbacks": r.rollbacks["causality"],
                "verification_rollbacks": r.rollbacks["verification"],
                "polls": r.polls, "max_t_ahead": r.max_t_ahead,
                "max_t_ahead_at": r.max_t_ahead_at, "unmatched_antis": r.unmatched_antis,
                "below_floor": r.below_floor, "runtime_s": f"{r.runtime_s:.3f}",
            })
    return path


# -- plots -----------------------------------------------------------------


@dataclass
class PlotFiles:
    files: list[str]
    ylim: dict[str, tuple[float, float]]


def emit_plots(trace: str | Path | RunReport, out_dir: Optional[str | Path] = None) -> PlotFiles:
    """Render GVT, rollback, state and error figures, each as a PNG plus its CSV data."""
    if isinstance(trace, RunReport):
        if trace.trace_path is None:
            raise FileNotFoundError("report has no trace file")
        trace = trace.trace_path
    path = Path(trace)
    if not path.is_file():
        raise FileNotFoundError(f"trace file not found: {path}")
    rows = read_trace(path)
    out = Path(out_dir) if out_dir is not None else path.parent
    out.mkdir(parents=True, exist_ok=True)

    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    files: list[str] = []
    ylim: dict[str, tuple[float, float]] = {}

    def save(name: str, header: list[str], data: list[list], fig) -> None:
        csv_path = out / f"{name}.csv"
        with open(csv_path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            w.writerows(data)
        png = out / f"{name}.png"
        ax = fig.axes[0]
        ylim[name] = tuple(float(v) for v in ax.get_ylim())
        fig.savefig(png, dpi=100)
        plt.close(fig)
        files.extend([str(png), str(csv_path)])

    gvt = [r for r in rows if r["kind"] == "gvt"]
    fig, ax = plt.subplots()
    xs = [r["real_time"] for r in gvt]
    ys = [r["gvt"] for r in gvt]
    ax.plot(xs, ys, drawstyle="steps-post", label="GVT")
    ax.plot(xs, xs, linestyle=":", color="grey", label="real time")
    if ys:
        ax.set_ylim(0, max(max(ys), max(xs)) * 1.05 or 1)
    ax.set_xlabel("real time")
    ax.set_ylabel("GVT")
    ax.legend()
    save("gvt", ["real_time", "gvt", "t_ahead"], [[r["real_time"], r["gvt"], r["t_ahead"]]
                                                  for r in gvt], fig)

    rb = [r for r in rows if r["kind"] == "rollback"]
    fig, ax = plt.subplots()
    for cause, marker in (("causality", "x"), ("verification", "o")):
        sel = [r for r in rb if r["cause"] == cause]
        ax.scatter([r["at_real"] for r in sel], [r["to_time"] for r in sel],
                   marker=marker, label=cause)
    ax.set_xlabel("real time")
    ax.set_ylabel("rollback to virtual time")
    ax.legend()
    save("rollbacks", ["at_real", "lp", "cause", "from_lvt", "to_time", "anti_count"],
         [[r["at_real"], r["lp"], r["cause"], r["from_lvt"], r["to_time"], r["anti_count"]]
          for r in rb], fig)

    st = [r for r in rows if r["kind"] == "state"]
    fig, ax = plt.subplots()
    for dev in sorted({r["device"] for r in st}):
        sel = [r for r in st if r["device"] == dev]
        line, = ax.plot([r["real_time"] for r in sel], [r["actual"] for r in sel],
                        label=f"switch {dev} actual")
        ax.plot([r["real_time"] for r in sel],
                [math.nan if r["predicted"] is None else r["predicted"] for r in sel],
                linestyle="--", color=line.get_color(), label=f"switch {dev} predicted")
    ax.set_xlabel("real time")
    ax.set_ylabel("packets entered")
    if st:
        ax.legend(fontsize="small")
    save("state", ["real_time", "device", "predicted", "actual"],
         [[r["real_time"], r["device"], r["predicted"], r["actual"]] for r in st], fig)

    er = [r for r in rows if r["kind"] == "error"]
    fig, ax = plt.subplots()
    for dev in sorted({r["device"] for r in er}):
        sel = [r for r in er if r["device"] == dev]
        ax.plot([r["real_time"] for r in sel], [r["delta"] for r in sel], marker=".",
                label=f"switch {dev}")
    theta = next((r["theta"] for r in er if r["theta"] is not None), None)
    if theta is not None:
        ax.axhline(theta, color="grey", linestyle=":")
        ax.axhline(-theta, color="grey", linestyle=":")
    ax.set_xlabel("real time")
    ax.set_ylabel("predicted - actual")
    if er:
        ax.legend(fontsize="small")
    save("error", ["real_time", "device", "predicted", "actual", "delta", "within"],
         [[r["real_time"], r["device"], r["predicted"], r["actual"], r["delta"], r["within"]]
          for r in er], fig)
    return PlotFiles(files, ylim)
