"""Experiment orchestration behind the command line.

Every experiment reads a flat ``key = value`` config, writes deterministic
CSV files (fixed float formatting, no clock or host data) into an output
directory, and returns a :class:`RunResult` carrying the summary lines and
the process exit code.
"""

from __future__ import annotations

import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from . import __version__
from .counterexample import (
    CounterexampleSpec,
    ball_normalized_limit,
    contraction_violation_experiment,
    dissipation_limit,
    extrapolate_to_zero,
    integrals_sweep,
)
from .errors import ConfigError, InvalidDomain, InvalidParameter, RadwassError
from .nonlinearity import (
    Nonlinearity,
    PowerLaw,
    condition3_monotone,
    mccann_holds,
    parse_nonlinearity,
    psi_entropy_convexity,
)
from .radial_measure import RadialDensity, RadialGrid, format_float, read_density, write_density
from .report import co_evolve, geometric_times, uniform_times
from .solver import SolverConfig, evolve
from .transport import entropy, geodesic_convexity_scan

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NUMERICAL = 2
EXIT_MISMATCH = 3

KINDS = ("check", "solve", "contract", "sweep", "counterexample", "geodesic")

# |m - (1 - 1/d)| below this is reported as marginal instead of asserted
MARGINAL_BAND = 1e-3


# configuration ----------------------------------------------------------------


@dataclass
class ExperimentConfig:
    kind: str = "check"
    nonlinearity: str = "power:m=2"
    d: int = 3
    R: float = 1.0
    N: int = 400
    initial: str = "gaussian-like(1.0, 0.2)"
    initial_v: str = ""
    background: float = 0.0
    mass: float | None = None
    scheme: str = "implicit"
    dt: float | None = None
    t_end: float = 0.1
    snapshots: tuple[float, ...] = ()
    # counterexample geometry
    r: float = 1.0
    a: float = 1.0
    delta: float = 0.1
    eps_values: tuple[float, ...] = (1e-2, 3e-3, 1e-3, 3e-4)
    coevolve: bool = True
    coevolve_steps: int = 30
    coevolve_t_end: float = 1e-2
    # sweep
    d_values: tuple[int, ...] = (1, 2, 3)
    m_values: tuple[float, ...] = tuple(np.round(np.arange(0.3, 2.0 + 1e-9, 0.1), 10))
    # geodesic
    t_points: int = 11
    workers: int = 1
    seed: int = 0
    out: str = "out"

    def echo(self) -> dict:
        out = {}
        for fl in fields(self):
            if fl.name in ("out", "workers"):
                continue
            v = getattr(self, fl.name)
            out[fl.name] = "none" if v is None else v
        return out


_TYPES = {fl.name: fl.type for fl in fields(ExperimentConfig)}
_KEY_ALIASES = {"experiment": "kind", "f": "nonlinearity"}


def _parse_floats(text: str) -> tuple[float, ...]:
    text = text.strip()
    if re.fullmatch(r"[^:\s,]+:[^:\s,]+:[^:\s,]+", text):
        lo, hi, st = (float(x) for x in text.split(":"))
        if st <= 0 or hi < lo:
            raise ConfigError(f"bad range {text!r}; expected lo:hi:step with step > 0")
        return tuple(float(x) for x in np.round(np.arange(lo, hi + 0.5 * st, st), 10))
    return tuple(float(x) for x in re.split(r"[,\s]+", text) if x)


def _convert(key: str, raw: str):
    typ = _TYPES[key]
    try:
        if typ in ("int",):
            return int(raw)
        if typ in ("float",):
            return float(raw)
        if typ == "float | None":
            return None if raw.lower() in ("none", "") else float(raw)
        if typ == "bool":
            if raw.lower() in ("1", "true", "yes", "on"):
                return True
            if raw.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if typ == "tuple[float, ...]":
            return _parse_floats(raw)
        if typ == "tuple[int, ...]":
            vals = _parse_floats(raw)
            if any(v != int(v) for v in vals):
                raise ValueError(raw)
            return tuple(int(v) for v in vals)
        return raw
    except ValueError as exc:
        raise ConfigError(f"bad value for {key!r}: {raw!r}") from exc


def parse_config_text(text: str) -> dict:
    """``key = value`` lines; ``#`` starts a comment; blank lines are ignored."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, _, value = line.partition("=")
        key = _KEY_ALIASES.get(key.strip(), key.strip())
        if key not in _TYPES:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        out[key] = _convert(key, value.strip())
    return out


def make_config(kind: str, values: dict | None = None, **overrides) -> ExperimentConfig:
    values = dict(values or {})
    values.update({k: v for k, v in overrides.items() if v is not None})
    if "kind" in values and values["kind"] != kind:
        raise ConfigError(f"config is for experiment {values['kind']!r}, not {kind!r}")
    values["kind"] = kind
    cfg = ExperimentConfig(**values)
    validate_config(cfg)
    return cfg


def load_config(path, kind: str, **overrides) -> ExperimentConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file {path} does not exist")
    return make_config(kind, parse_config_text(path.read_text()), **overrides)


def validate_config(cfg: ExperimentConfig):
    if cfg.kind not in KINDS:
        raise ConfigError(f"unknown experiment kind {cfg.kind!r}")
    if cfg.d < 1 or any(d < 1 for d in cfg.d_values):
        raise ConfigError("dimensions must be >= 1")
    if not (cfg.R > 0) or cfg.N < 2:
        raise ConfigError("need R > 0 and N >= 2")
    if cfg.scheme not in ("implicit", "explicit"):
        raise ConfigError(f"unknown scheme {cfg.scheme!r}")
    if not (cfg.t_end > 0):
        raise ConfigError("t_end must be positive")
    if cfg.dt is not None and not (cfg.dt > 0):
        raise ConfigError("dt must be positive")
    if cfg.background < 0:
        raise ConfigError("background must be nonnegative")
    if cfg.mass is not None and not (cfg.mass > 0):
        raise ConfigError("mass must be positive")
    if cfg.workers < 1:
        raise ConfigError("workers must be >= 1")
    if cfg.seed < 0 or cfg.seed >= 2**64:
        raise ConfigError("seed must be an unsigned 64-bit integer")
    if cfg.t_points < 3:
        raise ConfigError("t_points must be >= 3")
    if not cfg.eps_values or any(e <= 0 for e in cfg.eps_values):
        raise ConfigError("eps_values must be positive")
    if any(m <= 0 for m in cfg.m_values):
        raise ConfigError("m_values must be positive")
    for spec in (cfg.initial, cfg.initial_v):
        if spec and spec.startswith("table"):
            p = _table_path(spec)
            if not Path(p).is_file():
                raise ConfigError(f"initial-data table {p} does not exist")
    if cfg.nonlinearity.startswith("table:"):
        p = cfg.nonlinearity[len("table:"):].strip()
        if not Path(p).is_file():
            raise ConfigError(f"nonlinearity table {p} does not exist")


# initial data -------------------------------------------------------------------


def _smoothstep(t):
    t = np.clip(t, 0.0, 1.0)
    return t**3 * (10.0 - 15.0 * t + 6.0 * t * t)


def _table_path(spec: str) -> str:
    m = re.fullmatch(r"table\s*(?::(.*)|\((.*)\))", spec.strip())
    if not m:
        raise ConfigError(f"malformed table spec {spec!r}")
    return (m.group(1) or m.group(2)).strip()


def _call_args(spec: str, name: str, count: int) -> list[float]:
    m = re.fullmatch(rf"{name}\s*\((.*)\)", spec.strip())
    if not m:
        raise ConfigError(f"malformed initial-data spec {spec!r}")
    try:
        args = [float(x) for x in m.group(1).split(",") if x.strip()]
    except ValueError as exc:
        raise ConfigError(f"non-numeric argument in {spec!r}") from exc
    if len(args) != count:
        raise ConfigError(f"{name} takes {count} arguments, got {len(args)}")
    return args


def build_initial(spec: str, grid: RadialGrid, background: float = 0.0) -> RadialDensity:
    """Built-ins: uniform-ball(r,a), smoothed-ball(r,a,eps), gaussian-like(amplitude,width), table:<file>."""
    spec = spec.strip()
    if spec.startswith("uniform-ball"):
        r, a = _call_args(spec, "uniform-ball", 2)
        if r <= 0 or not (0 < a <= grid.R):
            raise ConfigError("uniform-ball needs r > 0 and 0 < a <= R")
        u = RadialDensity.uniform_ball(grid, r, a)
    elif spec.startswith("smoothed-ball"):
        r, a, eps = _call_args(spec, "smoothed-ball", 3)
        if r <= 0 or eps <= 0 or not (0 < a and a + eps <= grid.R):
            raise ConfigError("smoothed-ball needs r > 0, eps > 0 and 0 < a < a + eps <= R")
        u = RadialDensity.from_function(grid, lambda p: r * (1.0 - _smoothstep((p - a) / eps)), subdivide=4)
    elif spec.startswith("gaussian-like"):
        amp, width = _call_args(spec, "gaussian-like", 2)
        if amp <= 0 or width <= 0:
            raise ConfigError("gaussian-like needs amplitude > 0 and width > 0")
        u = RadialDensity.from_function(grid, lambda p: amp * np.exp(-0.5 * (p / width) ** 2), subdivide=2)
    elif spec.startswith("table"):
        table = read_density(_table_path(spec))
        if table.grid.d != grid.d:
            raise ConfigError("table dimension differs from the configured d")
        u = table if table.grid.same_as(grid) else RadialDensity.from_cumulative(grid, table.mass_within)
    else:
        raise ConfigError(f"unknown initial-data spec {spec!r}")
    if background:
        u = u.with_values(u.values + background)
    return u


def _grid(cfg: ExperimentConfig, d: int | None = None) -> RadialGrid:
    return RadialGrid.uniform(cfg.d if d is None else d, cfg.R, cfg.N)


def _pair(cfg: ExperimentConfig):
    """Both initial data on the configured grid, scaled to a common mass."""
    grid = _grid(cfg)
    u = build_initial(cfg.initial, grid, cfg.background)
    v = build_initial(cfg.initial_v or cfg.initial, grid, cfg.background)
    target = cfg.mass if cfg.mass is not None else u.mass
    return u.normalized_to(target), v.normalized_to(target), target


# results ------------------------------------------------------------------------


@dataclass
class RunResult:
    kind: str
    exit_code: int = EXIT_OK
    summary: list[str] = field(default_factory=list)
    files: list[Path] = field(default_factory=list)
    data: dict = field(default_factory=dict)

    def text(self) -> str:
        return "\n".join(self.summary) + "\n"


def _write_csv(path: Path, header, rows) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_cell(row[h]) for h in header))
    path.write_text("\n".join(lines) + "\n")
    return path


def _cell(v) -> str:
    if isinstance(v, (float, np.floating)):
        return format_float(float(v))
    if v is None:
        return ""
    return str(v)


def _finish(res: RunResult, out: Path | None) -> RunResult:
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        p = out / "summary.txt"
        p.write_text(res.text())
        res.files.append(p)
    return res


def _out(cfg: ExperimentConfig) -> Path | None:
    return Path(cfg.out) if cfg.out else None


def _power_exponent(f: Nonlinearity) -> float:
    return float(f.m) if isinstance(f, PowerLaw) else float("nan")


# experiments --------------------------------------------------------------------


def run_check(cfg: ExperimentConfig) -> RunResult:
    f = parse_nonlinearity(cfg.nonlinearity)
    v2 = mccann_holds(f, cfg.d)
    v3 = condition3_monotone(f, cfg.d)
    vpsi = psi_entropy_convexity(f, cfg.d)
    threshold = 1.0 - 1.0 / cfg.d
    res = RunResult("check")
    verdict = "holds" if v2.holds else "violated"
    line = f"{f.describe()}, d={cfg.d}: McCann condition {verdict}; worst margin {v2.worst_margin:.6e} at r={v2.worst_r:.6e}"
    res.summary.append(line)
    if isinstance(f, PowerLaw):
        rel = ">=" if v2.holds else "<"
        res.summary.append(f"power family: m={f.m:g} {rel} 1 - 1/d = {threshold:.6g}")
    res.summary.append(
        f"monotonicity of r^(-1+1/d) f: {'holds' if v3.holds else 'violated'}; "
        f"convexity of r^d U(r^-d): {'holds' if vpsi.holds else 'violated'}"
    )
    res.summary.extend(f"caveat: {c}" for c in v2.caveats)
    agree = v2.holds == v3.holds == vpsi.holds
    if not agree:
        res.summary.append("warning: the three equivalent checks disagree")
    row = {
        "nonlinearity": f.describe(), "d": cfg.d,
        "mccann": "holds" if v2.holds else "violated",
        "monotone": "holds" if v3.holds else "violated",
        "psi_convex": "holds" if vpsi.holds else "violated",
        "worst_r": v2.worst_r, "worst_margin": v2.worst_margin,
        "threshold": threshold if isinstance(f, PowerLaw) else float("nan"),
    }
    res.data.update(row=row, verdicts=(v2, v3, vpsi))
    out = _out(cfg)
    if out is not None:
        res.files.append(_write_csv(out / "check.csv", list(row), [row]))
    return _finish(res, out)


def run_solve(cfg: ExperimentConfig) -> RunResult:
    f = parse_nonlinearity(cfg.nonlinearity)
    grid = _grid(cfg)
    u0 = build_initial(cfg.initial, grid, cfg.background)
    if cfg.mass is not None:
        u0 = u0.normalized_to(cfg.mass)
    scfg = SolverConfig(t_end=cfg.t_end, scheme=cfg.scheme, dt=cfg.dt, snapshot_times=tuple(sorted(cfg.snapshots)))
    snaps = evolve(u0, f, scfg)
    rows = []
    for t, u in snaps:
        rows.append({"t": t, "mass": u.mass, "umin": float(u.values.min()), "umax": float(u.values.max()),
                     "entropy": entropy(u, f), "second_moment": u.second_moment()})
    res = RunResult("solve", data={"snapshots": snaps, "rows": rows})
    m0 = rows[0]["mass"]
    drift = max(abs(r["mass"] - m0) for r in rows) / m0
    res.summary.append(f"{f.describe()}, d={cfg.d}, N={cfg.N}, {cfg.scheme} scheme to t={cfg.t_end:g}")
    res.summary.append(f"relative mass drift {drift:.3e}; final min/max {rows[-1]['umin']:.6e} / {rows[-1]['umax']:.6e}")
    out = _out(cfg)
    if out is not None:
        res.files.append(_write_csv(out / "solve.csv", list(rows[0]), rows))
        for k, (_, u) in enumerate(snaps):
            p = out / f"density_{k:03d}.txt"
            write_density(p, u)
            res.files.append(p)
    return _finish(res, out)


def run_contract(cfg: ExperimentConfig) -> RunResult:
    f = parse_nonlinearity(cfg.nonlinearity)
    u, v, target = _pair(cfg)
    dt = cfg.dt if cfg.dt is not None else cfg.t_end / 200
    n = max(1, int(round(cfg.t_end / dt)))
    scfg = SolverConfig(t_end=cfg.t_end, scheme=cfg.scheme)
    rep = co_evolve(u, v, f, uniform_times(cfg.t_end, n), scfg)
    rep.metadata = {"experiment": "contract", "version": __version__, "target_mass": target,
                    **{k: val for k, val in cfg.echo().items() if k not in ("kind",)}, **rep.metadata}
    res = RunResult("contract", data={"report": rep})
    res.summary.append(f"{f.describe()}, d={cfg.d}: verdict {rep.verdict}")
    res.summary.append(
        f"W2(0)={rep.w2[0]:.6e}, W2(end)={rep.w2[-1]:.6e}, largest per-step increase {rep.max_w2_increase():.3e}, "
        f"D(0)={rep.d0:.6e}, mass drift {rep.mass_drift():.3e}"
    )
    out = _out(cfg)
    if out is not None:
        res.files.append(rep.write(out / "contract.csv"))
    return _finish(res, out)


def _counterexample_spec(cfg: ExperimentConfig, d: int, eps: float) -> CounterexampleSpec:
    R = cfg.R if cfg.R > (1 + 2 * cfg.delta) * cfg.a else 1.25 * cfg.a * (1 + 2 * cfg.delta)
    return CounterexampleSpec(d=d, r=cfg.r, a=cfg.a, delta=cfg.delta, eps=eps, R=R)


def counterexample_rows(cfg: ExperimentConfig, f: Nonlinearity, d: int):
    eps = sorted(cfg.eps_values, reverse=True)
    spec = _counterexample_spec(cfg, d, eps[0])
    rows = integrals_sweep(spec, f, eps)
    lim = dissipation_limit(f, d, cfg.r, cfg.a, cfg.delta)
    out = []
    for row in rows:
        out.append({
            "d": d, "m": _power_exponent(f), "r": cfg.r, "a": cfg.a, "delta": cfg.delta, "eps": row["eps"],
            "I1": row["I1"], "I2": row["I2"], "I1_plus_I2": row["I1"] + row["I2"],
            "limit_formula": lim, "w2_initial_sq": row["w2_initial_sq"],
        })
    ex = extrapolate_to_zero([r["eps"] for r in out], [r["I1_plus_I2"] for r in out], f)
    return spec, out, ex


COUNTEREXAMPLE_COLUMNS = ("d", "m", "r", "a", "delta", "eps", "I1", "I2", "I1_plus_I2", "limit_formula", "w2_initial_sq")


def run_counterexample(cfg: ExperimentConfig) -> RunResult:
    f = parse_nonlinearity(cfg.nonlinearity)
    spec, rows, ex = counterexample_rows(cfg, f, cfg.d)
    lim = rows[0]["limit_formula"]
    res = RunResult("counterexample", data={"rows": rows, "extrapolation": ex})
    res.summary.append(f"{f.describe()}, d={cfg.d}, r={cfg.r:g}, a={cfg.a:g}, delta={cfg.delta:g}, R={spec.R:g}")
    for row in rows:
        res.summary.append(f"eps={row['eps']:.3e}: I1+I2 = {row['I1_plus_I2']:.10e}")
    rel = abs(ex.limit - lim) / abs(lim) if lim != 0 else float("nan")
    res.summary.append(f"extrapolated limit {ex.limit:.10e} (basis {', '.join(ex.basis)}), closed form {lim:.10e}, relative gap {rel:.3e}")
    res.summary.append(f"same bracket with the unit-ball volume in place of the sphere area: {ball_normalized_limit(f, cfg.d, cfg.r, cfg.a, cfg.delta):.10e}")
    res.summary.append("sign: " + ("positive (separation)" if ex.limit > 0 else "nonpositive"))
    out = _out(cfg)
    if out is not None:
        res.files.append(_write_csv(out / "counterexample.csv", COUNTEREXAMPLE_COLUMNS, rows))
    if cfg.coevolve:
        sp = spec.with_eps(min(cfg.eps_values))
        rep = contraction_violation_experiment(sp, f, times=geometric_times(1e-10, cfg.coevolve_t_end, cfg.coevolve_steps))
        rep.metadata["version"] = __version__
        res.data["report"] = rep
        rise = "none" if rep.first_rise_time is None else f"{rep.first_rise_time:.3e}"
        res.summary.append(f"co-evolution at eps={sp.eps:g}: D(0)={rep.d0:.6e}, verdict {rep.verdict}, first W2 rise at t={rise}")
        if out is not None:
            res.files.append(rep.write(out / "counterexample_run.csv"))
    return _finish(res, out)


def run_geodesic(cfg: ExperimentConfig) -> RunResult:
    f = parse_nonlinearity(cfg.nonlinearity)
    u, v, _ = _pair(cfg)
    scan = geodesic_convexity_scan(u, v, f, np.linspace(0.0, 1.0, cfg.t_points))
    convex = scan.is_convex()
    res = RunResult("geodesic", data={"scan": scan})
    res.summary.append(f"{f.describe()}, d={cfg.d}: entropy along the displacement interpolant is {'convex' if convex else 'not convex'}")
    res.summary.append(f"smallest second difference {scan.min_second_difference:.6e} (scale {scan.scale:.6e})")
    rows = []
    for k, t in enumerate(scan.t):
        sd = scan.second_differences[k - 1] if 0 < k < scan.t.size - 1 else float("nan")
        rows.append({"t": float(t), "entropy": float(scan.entropy[k]), "second_difference": float(sd)})
    out = _out(cfg)
    if out is not None:
        res.files.append(_write_csv(out / "geodesic.csv", ("t", "entropy", "second_difference"), rows))
    return _finish(res, out)


# sweep ------------------------------------------------------------------------


SWEEP_COLUMNS = ("d", "m", "threshold", "condition", "D0_limit", "D0_grid", "w2_first_rise", "contraction", "agreement")


def sweep_cell(cfg: ExperimentConfig, d: int, m: float) -> dict:
    """One (d, m) cell: condition verdict, extrapolated D(0) and a short co-evolution.

    Failures are caught and recorded so that the sweep continues.
    """
    f = PowerLaw(float(m))
    threshold = 1.0 - 1.0 / d
    row = {"d": d, "m": float(m), "threshold": threshold, "condition": "holds" if mccann_holds(f, d).holds else "fails",
           "D0_limit": float("nan"), "D0_grid": float("nan"), "w2_first_rise": "", "contraction": "error", "agreement": "error"}
    try:
        spec, rows, ex = counterexample_rows(cfg, f, d)
        scale = max(abs(rows[-1]["I1"]), abs(rows[-1]["I2"]), 1e-300)
        row["D0_limit"] = ex.limit
        rising = False
        if cfg.coevolve:
            sp = spec.with_eps(min(cfg.eps_values))
            rep = contraction_violation_experiment(sp, f, times=geometric_times(1e-10, cfg.coevolve_t_end, cfg.coevolve_steps))
            row["D0_grid"] = rep.d0
            rising = not rep.is_contractive()
            row["w2_first_rise"] = "" if rep.first_rise_time is None else format_float(rep.first_rise_time)
            if cfg.out:
                rep.metadata["version"] = __version__
                rep.write(Path(cfg.out) / "cells" / f"d{d}_m{m:.4f}.csv")
        separating = ex.limit > 1e-6 * scale
        row["contraction"] = "non-contractive" if (separating or rising) else "contractive"
        if abs(m - threshold) < MARGINAL_BAND:
            row["agreement"] = "marginal"
        else:
            row["agreement"] = "yes" if (row["condition"] == "holds") == (row["contraction"] == "contractive") else "no"
    except RadwassError as exc:
        row["contraction"] = f"error: {type(exc).__name__}"
    return row


def _sweep_cell_args(args):
    return sweep_cell(*args)


def run_sweep(cfg: ExperimentConfig) -> RunResult:
    cells = [(cfg, int(d), float(m)) for d in sorted(set(cfg.d_values)) for m in sorted(set(cfg.m_values))]
    if cfg.workers > 1 and len(cells) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            rows = list(pool.map(_sweep_cell_args, cells))
    else:
        rows = [sweep_cell(*c) for c in cells]
    rows.sort(key=lambda r: (r["d"], r["m"]))
    mismatches = [r for r in rows if r["agreement"] == "no"]
    errors = [r for r in rows if r["agreement"] == "error"]
    res = RunResult("sweep", data={"rows": rows})
    res.summary.append(f"{len(rows)} cells; {len(mismatches)} mismatches; {len(errors)} failures; "
                       f"{sum(r['agreement'] == 'marginal' for r in rows)} marginal")
    for r in mismatches:
        res.summary.append(f"mismatch at d={r['d']}, m={r['m']:g}: condition {r['condition']}, contraction {r['contraction']}")
    for r in errors:
        res.summary.append(f"failure at d={r['d']}, m={r['m']:g}: {r['contraction']}")
    if mismatches:
        res.exit_code = EXIT_MISMATCH
    elif errors:
        res.exit_code = EXIT_NUMERICAL
    out = _out(cfg)
    if out is not None:
        res.files.append(_write_csv(out / "sweep.csv", SWEEP_COLUMNS, rows))
    return _finish(res, out)


RUNNERS = {
    "check": run_check,
    "solve": run_solve,
    "contract": run_contract,
    "sweep": run_sweep,
    "counterexample": run_counterexample,
    "geodesic": run_geodesic,
}


def run(cfg: ExperimentConfig) -> RunResult:
    """Dispatch on ``cfg.kind`` and map library errors onto exit codes."""
    try:
        return RUNNERS[cfg.kind](cfg)
    except (ConfigError, InvalidParameter, InvalidDomain, FileNotFoundError) as exc:
        return RunResult(cfg.kind, EXIT_CONFIG, [f"configuration error: {exc}"])
    except (RadwassError, FloatingPointError, np.linalg.LinAlgError) as exc:
        return RunResult(cfg.kind, EXIT_NUMERICAL, [f"numerical failure ({type(exc).__name__}): {exc}"])


__all__ = [
    "ExperimentConfig", "RunResult", "build_initial", "load_config", "make_config", "parse_config_text", "run",
    "run_check", "run_contract", "run_counterexample", "run_geodesic", "run_solve", "run_sweep", "sweep_cell",
]
