"""Co-evolution of two solutions and the time series written to disk."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DivisionGuard, InvalidParameter
from .nonlinearity import Nonlinearity
from .radial_measure import RadialDensity, check_equal_mass, format_float, w2_squared
from .solver import SolverConfig, SolverState, check_initial_data, step
from .transport import dissipation_value, entropy

COLUMNS = ("t", "W2", "W2_sq", "U_u", "U_v", "mass_u", "mass_v", "D")

# per-step slack on W2, relative to W2(0)
CONTRACTION_RTOL = 1e-8


@dataclass
class ExperimentReport:
    """Time-ordered rows plus a metadata block and a one-line verdict."""

    rows: list[dict] = field(default_factory=list)
    metadata: dict = field(default_factory=dict)
    verdict: str = ""
    d0: float = float("nan")
    first_rise_time: float | None = None

    def column(self, name: str) -> np.ndarray:
        return np.array([row[name] for row in self.rows], dtype=float)

    @property
    def times(self) -> np.ndarray:
        return self.column("t")

    @property
    def w2(self) -> np.ndarray:
        return self.column("W2")

    def max_w2_increase(self) -> float:
        w = self.w2
        return float(np.max(np.diff(w))) if w.size > 1 else 0.0

    def is_contractive(self, rtol: float = CONTRACTION_RTOL) -> bool:
        w = self.w2
        if w.size < 2:
            return True
        return bool(np.all(np.diff(w) <= rtol * w[0]))

    def mass_drift(self) -> float:
        worst = 0.0
        for name in ("mass_u", "mass_v"):
            m = self.column(name)
            if m.size:
                worst = max(worst, float(np.max(np.abs(m - m[0])) / max(abs(m[0]), 1e-300)))
        return worst

    def csv_text(self) -> str:
        lines = [",".join(COLUMNS)]
        for row in self.rows:
            lines.append(",".join(format_float(row[c]) for c in COLUMNS))
        return "\n".join(lines) + "\n"

    def meta_text(self) -> str:
        lines = [f"{k} = {_meta_value(v)}" for k, v in self.metadata.items()]
        lines.append(f"verdict = {self.verdict}")
        lines.append(f"D0 = {format_float(self.d0)}")
        lines.append("first_rise_time = " + ("none" if self.first_rise_time is None else format_float(self.first_rise_time)))
        return "\n".join(lines) + "\n"

    def write(self, path) -> Path:
        """Write the CSV to ``path`` and the metadata next to it as ``<stem>.meta.txt``."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.csv_text())
        path.with_suffix(".meta.txt").write_text(self.meta_text())
        return path


def _meta_value(v) -> str:
    if isinstance(v, float):
        return format_float(v)
    if isinstance(v, (list, tuple)):
        return " ".join(_meta_value(x) for x in v)
    return str(v)


def _safe_dissipation(u: RadialDensity, v: RadialDensity, f: Nonlinearity) -> float:
    try:
        return dissipation_value(u, v, f)[0]
    except DivisionGuard:
        # D needs the velocity field, which is undefined where a density vanishes
        return float("nan")


def _row(t: float, u: RadialDensity, v: RadialDensity, f: Nonlinearity, with_d: bool) -> dict:
    w2sq = w2_squared(u, v)
    return {
        "t": float(t),
        "W2": float(np.sqrt(max(w2sq, 0.0))),
        "W2_sq": float(w2sq),
        "U_u": entropy(u, f),
        "U_v": entropy(v, f),
        "mass_u": u.mass,
        "mass_v": v.mass,
        "D": _safe_dissipation(u, v, f) if with_d else float("nan"),
    }


def co_evolve(
    u0: RadialDensity,
    v0: RadialDensity,
    f: Nonlinearity,
    times,
    cfg: SolverConfig | None = None,
    with_dissipation: bool = True,
) -> ExperimentReport:
    """Advance both densities through the increasing sequence ``times``.

    Each interval is one implicit (or explicit) step, so the rows are exactly
    the solver steps and per-step monotonicity of W2 can be read off them.
    """
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or times.size < 1 or times[0] != 0.0 or np.any(np.diff(times) <= 0):
        raise InvalidParameter("times must start at 0 and increase strictly")
    check_equal_mass(u0, v0)
    if not u0.grid.same_as(v0.grid):
        raise InvalidParameter("both densities must live on the same grid")
    cfg = cfg if cfg is not None else SolverConfig(t_end=float(times[-1]))
    check_initial_data(u0, f, cfg)
    check_initial_data(v0, f, cfg)
    su, sv = SolverState(0.0, u0), SolverState(0.0, v0)
    rep = ExperimentReport()
    rep.rows.append(_row(0.0, u0, v0, f, with_dissipation))
    for t_next in times[1:]:
        dt = float(t_next - su.t)
        su = step(su, f, cfg, dt=dt)
        sv = step(sv, f, cfg, dt=dt)
        rep.rows.append(_row(float(t_next), su.density, sv.density, f, with_dissipation))
    rep.d0 = rep.rows[0]["D"]
    w = rep.w2
    rise = np.flatnonzero(w > w[0] * (1 + CONTRACTION_RTOL))
    rep.first_rise_time = float(rep.times[rise[0]]) if rise.size else None
    rep.verdict = "contractive" if rep.is_contractive() else "non-contractive"
    rep.metadata.update({"steps": len(times) - 1, "scheme": cfg.scheme, "w2_step_rtol": CONTRACTION_RTOL})
    return rep


def geometric_times(t_first: float, t_end: float, n: int) -> np.ndarray:
    """0 followed by n geometrically spaced times from t_first to t_end."""
    if not (0 < t_first < t_end) or n < 1:
        raise InvalidParameter("need 0 < t_first < t_end and n >= 1")
    return np.concatenate([[0.0], np.geomspace(t_first, t_end, n)])


def uniform_times(t_end: float, n_steps: int) -> np.ndarray:
    if not (t_end > 0) or n_steps < 1:
        raise InvalidParameter("need t_end > 0 and at least one step")
    return np.linspace(0.0, t_end, n_steps + 1)
