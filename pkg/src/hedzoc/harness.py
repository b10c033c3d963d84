"""Experiment orchestration: configs, runs, sweeps, CSV, and rate fitting.

Configs use a sectioned key=value format (JSON is accepted as an alternative
encoding). Unknown sections or keys are rejected, and every validation error
names the offending key. A minimal config needs nothing beyond the defaults:
a ten-agent quadratic family on a sampled graph, identity compression, and
the fixed-step schedule.
"""
from __future__ import annotations

import json
import math
import os
import sys
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import analysis
from .algorithm import MODES, MODE_NONCONVEX, MODE_PL_KNOWN, RunTrace, Schedule, make_schedule, run
from .compressors import CompressorSpec, parse_compressor, params_for
from .graph import Graph, complete, erdos_renyi, laplacian_spectrum, mixing_matrices, ring
from .problems import FAMILY_KINDS, ProblemFamily, assumption_check, make_family
from .rng import stream

OUTPUT_DIR_ENV = "HEDZOC_OUTPUT_DIR"

CSV_COLUMNS = ["k", "grad_norm_sq", "consensus_err", "opt_gap", "bits_cum", "fn_evals_cum"]
CSV_LYAPUNOV = ["e1", "e2", "e3", "e4", "e5"]


@dataclass
class ProblemConfig:
    kind: str = "quadratic"
    n: int = 10
    p: int = 20
    rho_h: float = 1.0
    spectrum_lo: float = 0.5
    spectrum_hi: float = 2.0
    noise_sigma: float = 0.0
    rho_nc: float = 0.0
    eta: float = 0.0
    seed: int = 0
    x0: str = "zeros"


@dataclass
class GraphConfig:
    topology: str = "erdos_renyi"
    prob: float = 0.4
    seed: int = 1
    max_resample: int = 25
    lambda_extra: float | None = None


@dataclass
class CompressorConfig:
    spec: str = "identity"


@dataclass
class ScheduleConfig:
    mode: str = MODE_NONCONVEX
    T: int = 1000
    eps1: float | None = None
    eps2: float | None = None
    eps3: float | None = None
    eps4: float | None = None
    theta: float | None = None
    m: int | None = None
    kappa_mu: float | None = None
    nu: float | None = None
    omega: float | None = None


@dataclass
class OutputConfig:
    csv: str = "run.csv"
    record_lyapunov: bool = False
    log_every: int = 1
    per_edge_bits: bool = False


@dataclass
class ExperimentConfig:
    problem: ProblemConfig = field(default_factory=ProblemConfig)
    graph: GraphConfig = field(default_factory=GraphConfig)
    compressor: CompressorConfig = field(default_factory=CompressorConfig)
    schedule: ScheduleConfig = field(default_factory=ScheduleConfig)
    output: OutputConfig = field(default_factory=OutputConfig)


_SECTIONS = {
    "problem": ProblemConfig,
    "graph": GraphConfig,
    "compressor": CompressorConfig,
    "schedule": ScheduleConfig,
    "output": OutputConfig,
}

_BOOL_WORDS = {"true": True, "1": True, "yes": True, "false": False, "0": False, "no": False}


class ConfigError(ValueError):
    """A config failed validation; the message names the offending key."""


def _convert(section: str, key: str, raw: object, target_type) -> object:
    if isinstance(raw, str):
        raw = raw.strip()
    name = f"{section}.{key}"
    try:
        if target_type is bool:
            if isinstance(raw, bool):
                return raw
            word = str(raw).lower()
            if word not in _BOOL_WORDS:
                raise ValueError
            return _BOOL_WORDS[word]
        if target_type is int:
            if isinstance(raw, float) and raw != int(raw):
                raise ValueError
            return int(raw)
        if target_type is float:
            return float(raw)
        return str(raw)
    except (TypeError, ValueError):
        raise ConfigError(f"config key {name}: cannot interpret {raw!r} as {target_type.__name__}") from None


_FIELD_TYPES = {
    (sec, f.name): f
    for sec, cls in _SECTIONS.items()
    for f in cls.__dataclass_fields__.values()
}

_OPTIONAL_FLOATS = {
    ("graph", "lambda_extra"),
    ("schedule", "eps1"), ("schedule", "eps2"), ("schedule", "eps3"),
    ("schedule", "eps4"), ("schedule", "theta"), ("schedule", "kappa_mu"),
    ("schedule", "nu"), ("schedule", "omega"),
}
_OPTIONAL_INTS = {("schedule", "m")}


def _assign(cfg: ExperimentConfig, section: str, key: str, raw: object) -> None:
    if section not in _SECTIONS:
        raise ConfigError(f"unknown config section [{section}]")
    block = getattr(cfg, section)
    if key not in type(block).__dataclass_fields__:
        raise ConfigError(f"unknown config key {section}.{key}")
    if (section, key) in _OPTIONAL_FLOATS:
        value = _convert(section, key, raw, float)
    elif (section, key) in _OPTIONAL_INTS:
        value = _convert(section, key, raw, int)
    else:
        current = getattr(block, key)
        value = _convert(section, key, raw, type(current))
    setattr(block, key, value)


def parse_config(source: str | Path) -> ExperimentConfig:
    """Parse a config from a path or from literal text.

    A string argument naming an existing file is read from disk; anything
    else is treated as the config text itself. Text starting with '{' is
    parsed as JSON with one object per section; otherwise the sectioned
    key=value format applies.
    """
    if isinstance(source, Path):
        if not source.is_file():
            raise ConfigError(f"config file not found: {source}")
        text = source.read_text()
    elif "\n" not in source and Path(source).is_file():
        text = Path(source).read_text()
    elif "\n" not in source and source.strip() and not source.lstrip().startswith(("{", "[")) and "=" not in source:
        # A single line with no structure cannot be a config, so it was
        # almost certainly meant as a path.
        raise ConfigError(f"config file not found: {source}")
    else:
        text = str(source)
    cfg = ExperimentConfig()
    stripped = text.lstrip()
    if stripped.startswith("{"):
        try:
            payload = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from None
        if not isinstance(payload, dict):
            raise ConfigError("JSON config must be an object of sections")
        for section, body in payload.items():
            if section == "compressor" and isinstance(body, str):
                body = {"spec": body}
            if not isinstance(body, dict):
                raise ConfigError(f"config section {section} must be an object")
            for key, raw in body.items():
                _assign(cfg, section, key, raw)
    else:
        section = None
        for lineno, raw_line in enumerate(text.splitlines(), start=1):
            line = raw_line.strip()
            if not line or line.startswith("#"):
                continue
            if line.startswith("[") and line.endswith("]"):
                section = line[1:-1].strip()
                if section not in _SECTIONS:
                    raise ConfigError(f"unknown config section [{section}] (line {lineno})")
                continue
            if "=" not in line:
                raise ConfigError(f"config line {lineno}: expected key = value, got {raw_line!r}")
            if section is None:
                raise ConfigError(f"config line {lineno}: key outside any [section]")
            key, _, val = line.partition("=")
            _assign(cfg, section, key.strip(), val.strip())
    validate_config(cfg)
    return cfg


def validate_config(cfg: ExperimentConfig) -> None:
    """Range and cross-field checks; raises ConfigError naming the key."""
    pb, gb, sb, ob = cfg.problem, cfg.graph, cfg.schedule, cfg.output
    if pb.kind not in FAMILY_KINDS:
        raise ConfigError(f"config key problem.kind: {pb.kind!r} not one of {FAMILY_KINDS}")
    if pb.n < 2:
        raise ConfigError(f"config key problem.n: need at least 2 agents, got {pb.n}")
    if pb.p < 1:
        raise ConfigError(f"config key problem.p: need a positive dimension, got {pb.p}")
    if not 0.0 <= pb.rho_h <= 1.0:
        raise ConfigError(f"config key problem.rho_h: {pb.rho_h} outside [0, 1]")
    if not 0.0 < pb.spectrum_lo <= pb.spectrum_hi:
        raise ConfigError(
            f"config key problem.spectrum_lo/spectrum_hi: need 0 < lo <= hi, got {pb.spectrum_lo}, {pb.spectrum_hi}"
        )
    if pb.noise_sigma < 0.0:
        raise ConfigError(f"config key problem.noise_sigma: must be nonnegative, got {pb.noise_sigma}")
    if pb.rho_nc < 0.0:
        raise ConfigError(f"config key problem.rho_nc: must be nonnegative, got {pb.rho_nc}")
    head = pb.x0.split(":")[0]
    if head not in ("zeros", "uniform", "gauss"):
        raise ConfigError(f"config key problem.x0: {pb.x0!r} not zeros | uniform:lo,hi | gauss:scale")
    if gb.topology not in ("erdos_renyi", "ring", "complete"):
        raise ConfigError(f"config key graph.topology: {gb.topology!r} not erdos_renyi | ring | complete")
    if not 0.0 <= gb.prob <= 1.0:
        raise ConfigError(f"config key graph.prob: {gb.prob} outside [0, 1]")
    if gb.max_resample < 0:
        raise ConfigError(f"config key graph.max_resample: must be nonnegative, got {gb.max_resample}")
    try:
        parse_compressor(cfg.compressor.spec)
    except ValueError as exc:
        raise ConfigError(f"config key compressor.spec: {exc}") from None
    if sb.mode not in MODES:
        raise ConfigError(f"config key schedule.mode: {sb.mode!r} not one of {MODES}")
    if sb.T < 0:
        raise ConfigError(f"config key schedule.T: must be nonnegative, got {sb.T}")
    if sb.theta is not None and not 0.5 < sb.theta < 1.0:
        raise ConfigError(f"config key schedule.theta: {sb.theta} outside the open interval (0.5, 1)")
    for key in ("eps1", "eps2", "eps3", "eps4", "kappa_mu", "nu", "omega"):
        val = getattr(sb, key)
        if val is not None and val <= 0.0:
            raise ConfigError(f"config key schedule.{key}: must be positive, got {val}")
    if sb.m is not None and sb.m < 1:
        raise ConfigError(f"config key schedule.m: must be at least 1, got {sb.m}")
    if sb.mode == MODE_PL_KNOWN and sb.eps4 is not None and sb.nu is not None:
        eps2 = sb.eps2 if sb.eps2 is not None else 1e-3
        if sb.eps4 >= sb.nu * eps2 / 4.0:
            raise ConfigError(
                f"config key schedule.eps4: {sb.eps4} must stay below nu*eps2/4 = {sb.nu * eps2 / 4.0}"
            )
    if ob.log_every < 1:
        raise ConfigError(f"config key output.log_every: must be at least 1, got {ob.log_every}")
    if not ob.csv:
        raise ConfigError("config key output.csv: must name a file")


@dataclass
class Experiment:
    """Everything a run needs, resolved from a config."""

    cfg: ExperimentConfig
    family: ProblemFamily
    graph: Graph
    comp: CompressorSpec
    schedule: Schedule
    x0: np.ndarray | None


def _sample_graph(gb: GraphConfig, n: int) -> Graph:
    if gb.topology == "ring":
        return ring(n)
    if gb.topology == "complete":
        return complete(n)
    seed = gb.seed
    for attempt in range(gb.max_resample + 1):
        g = erdos_renyi(n, gb.prob, seed)
        spec, _ = laplacian_spectrum(g)
        if spec.connected:
            return g
        print(
            f"graph seed {seed} produced a disconnected sample; resampling with seed {seed + 1}",
            file=sys.stderr,
        )
        seed += 1
    raise ConfigError(
        f"config key graph.prob: no connected sample within {gb.max_resample} resamples "
        f"(n={n}, prob={gb.prob}, seeds {gb.seed}..{seed})"
    )


def _initial_iterates(pb: ProblemConfig) -> np.ndarray | None:
    if pb.x0 == "zeros":
        return None
    head, _, tail = pb.x0.partition(":")
    x0 = np.empty((pb.n, pb.p))
    if head == "uniform":
        try:
            lo, hi = (float(v) for v in tail.split(","))
        except ValueError:
            raise ConfigError(f"config key problem.x0: expected uniform:lo,hi, got {pb.x0!r}") from None
        for i in range(pb.n):
            x0[i] = stream(pb.seed, i, "init").uniform(lo, hi, size=pb.p)
    elif head == "gauss":
        try:
            scale = float(tail) if tail else 1.0
        except ValueError:
            raise ConfigError(f"config key problem.x0: expected gauss:scale, got {pb.x0!r}") from None
        for i in range(pb.n):
            x0[i] = scale * stream(pb.seed, i, "init").standard_normal(pb.p)
    else:
        raise ConfigError(f"config key problem.x0: unknown form {pb.x0!r}")
    return x0


def build_experiment(cfg: ExperimentConfig) -> Experiment:
    """Materialize family, graph, compressor, and schedule from a config."""
    validate_config(cfg)
    pb, gb, sb = cfg.problem, cfg.graph, cfg.schedule
    fam = make_family(
        kind=pb.kind, n=pb.n, p=pb.p, rho_h=pb.rho_h,
        spectrum_range=(pb.spectrum_lo, pb.spectrum_hi),
        noise_sigma=pb.noise_sigma, rho_nc=pb.rho_nc, seed=pb.seed, eta=pb.eta,
    )
    g = _sample_graph(gb, pb.n)
    spec, _ = laplacian_spectrum(g)
    comp = params_for(parse_compressor(cfg.compressor.spec), pb.p)

    params: dict = {"rho2": spec.rho2}
    for key in ("eps1", "eps2", "eps3", "eps4", "theta", "kappa_mu", "omega"):
        val = getattr(sb, key)
        if val is not None:
            params[key] = val
    if sb.m is not None:
        params["m"] = sb.m
    nu = sb.nu if sb.nu is not None else fam.nu
    if sb.mode == MODE_PL_KNOWN:
        if nu is None:
            raise ConfigError(
                "config key schedule.nu: required in pl_known mode when the family has no growth constant"
            )
        params["nu"] = nu
        if sb.eps4 is None:
            raise ConfigError("config key schedule.eps4: required in pl_known mode")

    t_floor = None
    if sb.mode == MODE_NONCONVEX:
        t_floor = _try_horizon_floor(fam, spec.rho, spec.rho2, comp, params)

    try:
        sched = make_schedule(
            sb.mode, pb.n, pb.p, max(sb.T, 1), params=params, r=comp.r, t_floor=t_floor
        )
    except ValueError as exc:
        # Schedule messages already name the offending parameter.
        raise ConfigError(f"config key schedule: {exc}") from None
    return Experiment(
        cfg=cfg, family=fam, graph=g, comp=comp, schedule=sched, x0=_initial_iterates(pb)
    )


def _try_horizon_floor(fam, rho, rho2, comp, params) -> float | None:
    eps1 = params.get("eps1", 2.0 * max(13.0 / (2.0 * rho2), rho2))
    eps2 = params.get("eps2", 1e-3)
    omega = params.get("omega", 1.0 / comp.r)
    try:
        inp = analysis.family_constants_input(
            fam, rho=rho, rho2=rho2, comp_delta=comp.delta, comp_r=comp.r,
            omega=omega, eps1=eps1, eps2=eps2,
            kappa_mu=params.get("kappa_mu", 0.1),
        )
        out = analysis.constants(inp)
        if out.a1 <= 0.0:
            return None
        return analysis.horizon_floor(out, MODE_NONCONVEX, fam.n, fam.p)
    except (ValueError, FloatingPointError, ZeroDivisionError):
        return None


def _fmt_float(x: float) -> str:
    return f"{x:.17g}"


def trace_csv_lines(trace: RunTrace, log_every: int, timestamp: str | None = None) -> list[str]:
    """Rows at the log stride plus the final record, 17 significant digits."""
    cols = CSV_COLUMNS + (CSV_LYAPUNOV if trace.has_lyapunov else [])
    lines = []
    if timestamp is not None:
        lines.append(f"# written {timestamp}")
    lines.append(",".join(cols))
    last = len(trace.k) - 1
    for idx in range(len(trace.k)):
        if idx != last and trace.k[idx] % log_every != 0:
            continue
        row = [
            str(int(trace.k[idx])),
            _fmt_float(trace.grad_norm_sq[idx]),
            _fmt_float(trace.consensus_err[idx]),
            _fmt_float(trace.opt_gap[idx]),
            str(int(trace.bits_cum[idx])),
            str(int(trace.fn_evals_cum[idx])),
        ]
        if trace.has_lyapunov:
            row += [_fmt_float(getattr(trace, name)[idx]) for name in CSV_LYAPUNOV]
        lines.append(",".join(row))
    return lines


def resolve_output_path(name: str, out_dir: str | None = None) -> Path:
    """Config-relative paths land in --out-dir, then $HEDZOC_OUTPUT_DIR, then cwd."""
    path = Path(name)
    if path.is_absolute():
        return path
    base = out_dir or os.environ.get(OUTPUT_DIR_ENV) or "."
    return Path(base) / path


def run_experiment(cfg: ExperimentConfig, out_dir: str | None = None) -> tuple[RunTrace, Path]:
    """Run one config and persist the trace CSV; returns (trace, csv path)."""
    exp = build_experiment(cfg)
    trace = run(
        exp.family, exp.graph, exp.comp, exp.schedule,
        T=cfg.schedule.T, seed=cfg.problem.seed,
        record_lyapunov=cfg.output.record_lyapunov,
        x0=exp.x0,
        lambda_extra=cfg.graph.lambda_extra,
        per_edge_bits=cfg.output.per_edge_bits,
    )
    path = resolve_output_path(cfg.output.csv, out_dir)
    path.parent.mkdir(parents=True, exist_ok=True)
    stamp = time.strftime("%Y-%m-%dT%H:%M:%S%z")
    lines = trace_csv_lines(trace, cfg.output.log_every, timestamp=stamp)
    if trace.diverged:
        lines.append(f"# diverged: {trace.divergence_info}")
    path.write_text("\n".join(lines) + "\n")
    return trace, path


@dataclass(frozen=True)
class RateFit:
    """OLS slope of log(value) against log(k) with a normal-theory 95% CI."""

    slope: float
    intercept: float
    stderr: float
    ci_low: float
    ci_high: float
    n_points: int


def rate_fit(ks, values, window: float = 0.5, min_points: int = 10) -> RateFit:
    """Fit the tail of a positive series on log-log axes.

    ``window`` is the tail fraction of the points used for the fit. The
    confidence interval uses the normal approximation slope +- 1.96 SE,
    which is exact in the limit and degenerate for exact power laws.
    """
    ks = np.asarray(ks, dtype=float)
    values = np.asarray(values, dtype=float)
    if ks.shape != values.shape or ks.ndim != 1:
        raise ValueError("ks and values must be matching one-dimensional sequences")
    if len(ks) < min_points:
        raise ValueError(f"need at least {min_points} points, got {len(ks)}")
    if not 0.0 < window <= 1.0:
        raise ValueError(f"window must lie in (0, 1], got {window}")
    n_tail = max(2, math.ceil(window * len(ks)))
    ks = ks[-n_tail:]
    values = values[-n_tail:]
    if np.any(ks <= 0.0):
        raise ValueError("iteration indices in the fit window must be positive")
    if np.any(values <= 0.0):
        raise ValueError("values in the fit window must be positive")
    lx = np.log(ks)
    ly = np.log(values)
    x_c = lx - lx.mean()
    sxx = float(x_c @ x_c)
    if sxx == 0.0:
        raise ValueError("all iteration indices in the window coincide")
    slope = float(x_c @ ly) / sxx
    intercept = float(ly.mean() - slope * lx.mean())
    resid = ly - (intercept + slope * lx)
    dof = max(1, len(ks) - 2)
    sigma2 = float(resid @ resid) / dof
    stderr = math.sqrt(sigma2 / sxx)
    return RateFit(
        slope=slope, intercept=intercept, stderr=stderr,
        ci_low=slope - 1.96 * stderr, ci_high=slope + 1.96 * stderr,
        n_points=len(ks),
    )


SWEEP_AXES = ("n", "T", "compressor", "rho_h")


@dataclass(frozen=True)
class SweepPoint:
    value: object
    seeds: int
    failures: int
    avg_grad_norm_sq: float
    final_opt_gap: float
    total_bits: float


@dataclass(frozen=True)
class SweepResult:
    axis: str
    points: list[SweepPoint]
    exponent: float | None
    exponent_stderr: float | None
    failures: list[tuple[object, int, str]]
    csv_path: Path | None


def _apply_axis(cfg: ExperimentConfig, axis: str, value) -> ExperimentConfig:
    cfg = replace(
        cfg,
        problem=replace(cfg.problem),
        graph=replace(cfg.graph),
        compressor=replace(cfg.compressor),
        schedule=replace(cfg.schedule),
        output=replace(cfg.output),
    )
    if axis == "n":
        cfg.problem.n = int(value)
    elif axis == "T":
        cfg.schedule.T = int(value)
    elif axis == "compressor":
        cfg.compressor.spec = str(value)
    elif axis == "rho_h":
        cfg.problem.rho_h = float(value)
    else:
        raise ValueError(f"unknown sweep axis {axis!r}; expected one of {SWEEP_AXES}")
    return cfg


def sweep(
    cfg: ExperimentConfig,
    axis: str,
    values: list,
    seeds: int = 1,
    out_dir: str | None = None,
    summary_name: str = "sweep_summary.csv",
) -> SweepResult:
    """One ensemble per grid value; run i uses seed base+i on both seeds.

    Failures (divergence or per-run errors) are recorded and skipped in the
    averages. For the n and T axes a log-log slope of the time-averaged
    squared gradient norm against the axis is fitted when at least two
    grid points succeeded.
    """
    if axis not in SWEEP_AXES:
        raise ValueError(f"unknown sweep axis {axis!r}; expected one of {SWEEP_AXES}")
    if seeds < 1:
        raise ValueError(f"need at least one seed, got {seeds}")
    points: list[SweepPoint] = []
    failures: list[tuple[object, int, str]] = []
    for value in values:
        metrics = []
        fail_count = 0
        for i in range(seeds):
            run_cfg = _apply_axis(cfg, axis, value)
            run_cfg.problem.seed = cfg.problem.seed + i
            run_cfg.graph.seed = cfg.graph.seed + i
            try:
                exp = build_experiment(run_cfg)
                trace = run(
                    exp.family, exp.graph, exp.comp, exp.schedule,
                    T=run_cfg.schedule.T, seed=run_cfg.problem.seed,
                    x0=exp.x0, lambda_extra=run_cfg.graph.lambda_extra,
                    per_edge_bits=run_cfg.output.per_edge_bits,
                )
            except Exception as exc:
                failures.append((value, i, f"{type(exc).__name__}: {exc}"))
                fail_count += 1
                continue
            if trace.diverged:
                failures.append((value, i, f"diverged: {trace.divergence_info}"))
                fail_count += 1
                continue
            metrics.append(
                (
                    float(np.mean(trace.grad_norm_sq[:-1])) if len(trace.k) > 1 else float(trace.grad_norm_sq[-1]),
                    float(trace.opt_gap[-1]),
                    float(trace.bits_cum[-1]),
                )
            )
        if metrics:
            arr = np.array(metrics)
            points.append(
                SweepPoint(
                    value=value, seeds=seeds, failures=fail_count,
                    avg_grad_norm_sq=float(arr[:, 0].mean()),
                    final_opt_gap=float(arr[:, 1].mean()),
                    total_bits=float(arr[:, 2].mean()),
                )
            )
        else:
            points.append(
                SweepPoint(
                    value=value, seeds=seeds, failures=fail_count,
                    avg_grad_norm_sq=float("nan"),
                    final_opt_gap=float("nan"),
                    total_bits=float("nan"),
                )
            )

    exponent = exponent_stderr = None
    if axis in ("n", "T"):
        ok = [(float(pt.value), pt.avg_grad_norm_sq) for pt in points if np.isfinite(pt.avg_grad_norm_sq)]
        if len(ok) >= 2 and all(v > 0 for _, v in ok):
            fit = rate_fit([v for v, _ in ok], [m for _, m in ok], window=1.0, min_points=2)
            exponent, exponent_stderr = fit.slope, fit.stderr

    path = resolve_output_path(summary_name, out_dir)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [f"# sweep axis={axis} seed_base={cfg.problem.seed} graph_seed_base={cfg.graph.seed}"]
    lines.append("axis,value,seeds,failures,avg_grad_norm_sq,final_opt_gap,total_bits")
    for pt in points:
        lines.append(
            f"{axis},{pt.value},{pt.seeds},{pt.failures},"
            f"{_fmt_float(pt.avg_grad_norm_sq)},{_fmt_float(pt.final_opt_gap)},{_fmt_float(pt.total_bits)}"
        )
    if exponent is not None:
        lines.append(f"# fitted_exponent {_fmt_float(exponent)} stderr {_fmt_float(exponent_stderr)}")
    for value, i, msg in failures:
        lines.append(f"# failure value={value} seed_offset={i} {msg}")
    path.write_text("\n".join(lines) + "\n")
    return SweepResult(
        axis=axis, points=points, exponent=exponent, exponent_stderr=exponent_stderr,
        failures=failures, csv_path=path,
    )


@dataclass(frozen=True)
class CheckLine:
    name: str
    passed: bool
    detail: str


@dataclass(frozen=True)
class CheckReport:
    passed: bool
    lines: list[CheckLine]


def check_experiment(cfg: ExperimentConfig, audit_iters: int = 200) -> CheckReport:
    """Assumption checks plus a structural audit on a short run."""
    lines: list[CheckLine] = []
    exp = build_experiment(cfg)
    fam = exp.family

    report = assumption_check(fam, samples=100, rng=np.random.default_rng(cfg.problem.seed + 1000))
    for chk in report.checks:
        lines.append(CheckLine(f"assumption.{chk.name}[agent {chk.agent}]", chk.passed, chk.detail))

    mix, spec = mixing_matrices(exp.graph, cfg.graph.lambda_extra)
    dev = float(np.abs(mix.F @ mix.L - mix.E).max())
    lines.append(CheckLine("graph.inverse_identity", dev <= 1e-9, f"max deviation {dev:.3e}"))
    rowsum = float(np.abs(mix.L.sum(axis=1)).max())
    lines.append(CheckLine("graph.row_sums", rowsum <= 1e-12 * max(1.0, spec.rho), f"max |row sum| {rowsum:.3e}"))
    evals = np.linalg.eigvalsh(mix.E)
    e_dev = max(abs(evals[0]), float(np.abs(evals[1:] - 1.0).max()))
    lines.append(CheckLine("graph.centering_spectrum", e_dev <= 1e-10, f"max deviation {e_dev:.3e}"))

    from .compressors import contraction_estimate

    mean, se = contraction_estimate(exp.comp, trials=2000, rng=np.random.default_rng(cfg.problem.seed + 2000))
    bound = 1.0 - exp.comp.delta
    ok = mean <= bound + 4.0 * se + 1e-12
    lines.append(CheckLine("compressor.contraction", ok, f"mean {mean:.6g} vs bound {bound:.6g} + 4*SE {4 * se:.3g}"))

    from .algorithm import InvariantViolation

    try:
        trace = run(
            fam, exp.graph, exp.comp, exp.schedule,
            T=min(cfg.schedule.T, audit_iters) or audit_iters,
            seed=cfg.problem.seed, x0=exp.x0, check_invariants=True,
            lambda_extra=cfg.graph.lambda_extra,
        )
        detail = ", ".join(f"{k} max {v:.2e}" for k, v in sorted(trace.invariant_maxima.items()))
        lines.append(CheckLine("run.invariants", not trace.diverged, detail or "no iterations"))
        if trace.diverged:
            lines.append(CheckLine("run.divergence", False, trace.divergence_info or ""))
    except InvariantViolation as exc:
        lines.append(CheckLine("run.invariants", False, str(exc)))

    return CheckReport(passed=all(l.passed for l in lines), lines=lines)


def constants_for_config(cfg: ExperimentConfig) -> "analysis.ConstantsOutput":
    """Assemble the constants roster for a config's family/graph/compressor."""
    exp = build_experiment(cfg)
    _, spec = mixing_matrices(exp.graph, cfg.graph.lambda_extra)
    sched = exp.schedule
    inp = analysis.family_constants_input(
        exp.family,
        rho=spec.rho, rho2=spec.rho2,
        comp_delta=exp.comp.delta, comp_r=exp.comp.r,
        omega=sched.omega, eps1=sched.eps1, eps2=sched.eps2,
        kappa_mu=sched.kappa_mu,
        eps4=sched.eps4, theta=sched.theta,
    )
    return analysis.constants(inp)
