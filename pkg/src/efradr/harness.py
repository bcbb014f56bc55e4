"""Run configuration, parameter studies, CSV reports and VTK export.

Configuration text is line oriented::

    # comment
    mesh.level = 2
    method = efr
    efr.N = 1

Unknown keys, unparsable values and out-of-range values are errors that name
the offending line. ``auto`` selects the benchmark default (the mesh size of
the refinement level, the relaxation parameter of the level).
"""

from concurrent.futures import ProcessPoolExecutor
import csv
from dataclasses import dataclass, field, fields, replace
import io
import math
import os
import time

import numpy as np

from .benchmark import (CHI_TABLE, LEVELS, SeparableForcing, error_norms, exact_solution,
                        min_max)
from .efr import INDICATOR_MODES, EFRConfig
from .fem import FESpace
from .mesh import build_structured_mesh
from .simulation import ADRProblem, RunError, TimeConfig, run
from .stabilizers import METHODS as STAB_METHODS, StabConfig

RUN_METHODS = ("galerkin", "efr") + tuple(m for m in STAB_METHODS if m != "none")
STUDIES = ("single", "compare_methods", "sweep_N", "sweep_delta")
SWEEP_N = (0, 1, 2, 3)
SWEEP_DELTA_C = (1.0, math.sqrt(2.0), 2.0, 5.0)
CSV_HEADER = ("level", "n", "method", "stab_const", "N", "delta_c", "chi", "l2_error",
              "h1_norm", "h1_semi", "min_u", "max_u", "steps", "wall_seconds", "error")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    level: int = 0
    n: int = None                 # None: size of `level`
    degree: int = 2
    mu: float = 1e-5
    b: tuple = (2.0, 3.0)
    sigma: float = 1.0
    dt: float = 1e-3
    T: float = 0.5
    method: str = "efr"
    c_art: float = 0.5
    delta_supg: float = 1.0
    use_sigma_eff: bool = True
    N: int = 0
    delta_c: float = 1.0
    chi: float = None             # None: relaxation parameter of `level`
    indicator_mode: str = "clip"
    study: str = "single"
    study_levels: tuple = (0, 1, 2, 3, 4)
    out_dir: str = "out"
    snapshot_times: tuple = ()
    export_final: bool = False
    export_indicator: bool = False
    indicator_every: int = 50
    record_wall: bool = True
    workers: int = 1

    @property
    def mesh_n(self):
        return self.n if self.n is not None else LEVELS[self.level]

    @property
    def relaxation(self):
        return self.chi if self.chi is not None else CHI_TABLE[self.level]

    @property
    def delta(self):
        return self.delta_c / self.mesh_n

    @property
    def level_label(self):
        return self.level if self.mesh_n == LEVELS[self.level] else None

    def stab_config(self):
        return StabConfig(self.method, self.c_art, self.delta_supg, self.use_sigma_eff)

    def efr_config(self):
        return EFRConfig(self.delta, self.N, self.relaxation, self.indicator_mode)

    def to_text(self):
        return format_config(self)


# ---- value parsers -------------------------------------------------------

def _int(s):
    return int(s)


def _float(s):
    v = float(s)
    if not math.isfinite(v):
        raise ValueError("not finite")
    return v


def _bool(s):
    low = s.lower()
    if low in ("true", "yes", "1", "on"):
        return True
    if low in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _auto(parse):
    def inner(s):
        return None if s == "auto" else parse(s)
    return inner


def _choice(options):
    def inner(s):
        if s not in options:
            raise ValueError(f"expected one of {', '.join(options)}")
        return s
    return inner


def _list(parse):
    def inner(s):
        return tuple(parse(p.strip()) for p in s.split(",") if p.strip())
    return inner


def _vec2(s):
    v = _list(_float)(s)
    if len(v) != 2:
        raise ValueError("expected two comma-separated numbers")
    return v


def _fmt(v):
    if v is None:
        return "auto"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, tuple):
        return ", ".join(_fmt(x) for x in v)
    return str(v)


# key -> (field, parser, check, message)
_KEYS = {
    "mesh.level": ("level", _int, lambda v: 0 <= v < len(LEVELS), "level must be in 0..4"),
    "mesh.n": ("n", _auto(_int), lambda v: v is None or v >= 1, "n must be >= 1"),
    "fe.degree": ("degree", _int, lambda v: v in (1, 2), "degree must be 1 or 2"),
    "problem.mu": ("mu", _float, lambda v: v > 0, "mu must be > 0"),
    "problem.b": ("b", _vec2, lambda v: True, ""),
    "problem.sigma": ("sigma", _float, lambda v: v >= 0, "sigma must be >= 0"),
    "time.dt": ("dt", _float, lambda v: v > 0, "dt must be > 0"),
    "time.T": ("T", _float, lambda v: v > 0, "T must be > 0"),
    "method": ("method", _choice(RUN_METHODS), lambda v: True, ""),
    "stab.c_art": ("c_art", _float, lambda v: v > 0, "c_art must be > 0"),
    "stab.delta_supg": ("delta_supg", _float, lambda v: v > 0, "delta_supg must be > 0"),
    "stab.use_sigma_eff": ("use_sigma_eff", _bool, lambda v: True, ""),
    "efr.N": ("N", _int, lambda v: v >= 0, "N must be >= 0"),
    "efr.delta_c": ("delta_c", _float, lambda v: v > 0, "delta_c must be > 0"),
    "efr.chi": ("chi", _auto(_float), lambda v: v is None or 0 <= v <= 1, "chi must be in [0, 1]"),
    "efr.indicator_mode": ("indicator_mode", _choice(INDICATOR_MODES), lambda v: True, ""),
    "study": ("study", _choice(STUDIES), lambda v: True, ""),
    "study.levels": ("study_levels", _list(_int),
                     lambda v: len(v) > 0 and all(0 <= x < len(LEVELS) for x in v),
                     "levels must be in 0..4"),
    "output.dir": ("out_dir", str, lambda v: len(v) > 0, "empty directory"),
    "output.snapshot_times": ("snapshot_times", _list(_float), lambda v: all(t >= 0 for t in v),
                              "snapshot times must be >= 0"),
    "output.export_final": ("export_final", _bool, lambda v: True, ""),
    "output.export_indicator": ("export_indicator", _bool, lambda v: True, ""),
    "output.indicator_every": ("indicator_every", _int, lambda v: v >= 1, "must be >= 1"),
    "output.record_wall": ("record_wall", _bool, lambda v: True, ""),
    "run.workers": ("workers", _int, lambda v: v >= 1, "workers must be >= 1"),
}
_FIELD_TO_KEY = {f: k for k, (f, *_) in _KEYS.items()}


def _parse_lines(lines, where):
    values = {}
    for lineno, raw in lines:
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{where} line {lineno}: expected 'key = value': {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in _KEYS:
            raise ConfigError(f"{where} line {lineno}: unknown key {key!r}")
        name, parse, check, message = _KEYS[key]
        try:
            v = parse(value)
        except ValueError as exc:
            raise ConfigError(f"{where} line {lineno}: bad value for {key}: {value!r} ({exc})") \
                from None
        if not check(v):
            raise ConfigError(f"{where} line {lineno}: {key} = {value}: {message}")
        values[name] = v
    return values


def parse_config(text, overrides=()):
    """Parse configuration text, then apply ``key=value`` overrides."""
    values = _parse_lines(enumerate(text.splitlines(), 1), "config")
    values.update(_parse_lines(((i, o) for i, o in enumerate(overrides, 1)), "--set"))
    cfg = RunConfig(**values)
    try:
        TimeConfig.from_final_time(cfg.T, cfg.dt)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return cfg


def format_config(cfg):
    """Canonical text form; ``parse_config(format_config(c)) == c``."""
    return "".join(f"{_FIELD_TO_KEY[f.name]} = {_fmt(getattr(cfg, f.name))}\n"
                   for f in fields(cfg))


def load_config(path, overrides=()):
    if path is None:
        return parse_config("", overrides)
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read(), overrides)


# ---- single runs ---------------------------------------------------------

def make_problem(cfg):
    mu, b, sigma = cfg.mu, tuple(cfg.b), cfg.sigma
    return ADRProblem(
        mu=mu, b=b, sigma=sigma,
        f=SeparableForcing(mu, b, sigma),
        u_D=lambda x, y, t: np.zeros_like(x),
        u0=lambda x, y: exact_solution(x, y, 0.0, mu),
        T=cfg.T,
    )


def run_method(cfg):
    if cfg.method == "galerkin":
        return "galerkin"
    if cfg.method == "efr":
        return cfg.efr_config()
    return cfg.stab_config()


def simulate(cfg, callback=None):
    """Run one configuration; returns ``(RunResult, space)``."""
    space = FESpace(build_structured_mesh(cfg.mesh_n), cfg.degree)
    tc = TimeConfig.from_final_time(cfg.T, cfg.dt)
    snaps = cfg.snapshot_times or (tc.T,)
    result = run(make_problem(cfg), space, tc, run_method(cfg), snaps, callback)
    return result, space


def _base_row(cfg):
    efr = cfg.method == "efr"
    const = None
    if cfg.method not in ("galerkin", "efr"):
        const = cfg.stab_config().constant
    return {
        "level": cfg.level_label, "n": cfg.mesh_n, "method": cfg.method,
        "stab_const": const,
        "N": cfg.N if efr else None,
        "delta_c": cfg.delta_c if efr else None,
        "chi": cfg.relaxation if efr else None,
        "l2_error": None, "h1_norm": None, "h1_semi": None, "min_u": None, "max_u": None,
        "steps": None, "wall_seconds": None, "error": None,
    }


def execute(cfg, callback=None):
    """Run one configuration and return its report row; failures are recorded
    in the ``error`` column."""
    return execute_with_result(cfg, callback)[0]


def execute_with_result(cfg, callback=None):
    """Like :func:`execute` but also returns the RunResult (None on failure)."""
    row = _base_row(cfg)
    result = None
    start = time.perf_counter()
    try:
        result, _ = simulate(cfg, callback)
    except (RunError, ValueError, ArithmeticError) as exc:
        row["error"] = f"{type(exc).__name__}: {exc}"
        steps = getattr(exc, "step", None)
        row["steps"] = steps - 1 if steps else 0
    else:
        norms = error_norms(result.u, cfg.T, cfg.mu)
        lo, hi = min_max(result.u)
        row.update(l2_error=norms.l2, h1_norm=norms.h1, h1_semi=norms.h1_semi,
                   min_u=lo, max_u=hi, steps=result.steps)
    if cfg.record_wall:
        row["wall_seconds"] = time.perf_counter() - start
    return row, result


# ---- studies -------------------------------------------------------------

@dataclass
class SweepReport:
    study: str
    rows: list = field(default_factory=list)

    @property
    def ok(self):
        return all(r["error"] is None for r in self.rows)


def study_matrix(study, base):
    """The configurations a study runs, in report order."""
    if study == "single":
        return [base]
    if study == "compare_methods":
        return [replace(base, level=lvl, n=None, method=m)
                for lvl in base.study_levels for m in ("galerkin", "supg", "efr")]
    if study == "sweep_N":
        return [replace(base, method="efr", N=N) for N in SWEEP_N]
    if study == "sweep_delta":
        return [replace(base, method="efr", delta_c=c) for c in SWEEP_DELTA_C]
    raise ValueError(f"unknown study {study!r}")


def run_study(study, base):
    """Run every configuration of ``study`` built from ``base``. Rows keep the
    matrix order whatever the completion order."""
    matrix = study_matrix(study, base)
    if base.workers > 1 and len(matrix) > 1:
        with ProcessPoolExecutor(max_workers=base.workers) as pool:
            rows = list(pool.map(execute, matrix))
    else:
        rows = [execute(cfg) for cfg in matrix]
    return SweepReport(study, rows)


# ---- output --------------------------------------------------------------

def _cell(v):
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def format_csv(report):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for row in report.rows:
        w.writerow([_cell(row[k]) for k in CSV_HEADER])
    return buf.getvalue()


def write_csv(report, path):
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(format_csv(report))
    except OSError as exc:
        raise OSError(f"cannot write CSV to {path}: {exc}") from exc


def export_vtk(field_, path, name="u"):
    """Write vertex values of a field as a legacy ASCII VTK unstructured grid
    of linear triangles. P2 midpoint values are not exported."""
    space = field_.space
    mesh = space.mesh
    vals = field_.values[space.vertex_dofs]
    lines = ["# vtk DataFile Version 3.0", f"efradr {name}", "ASCII",
             "DATASET UNSTRUCTURED_GRID", f"POINTS {mesh.n_vertices} double"]
    lines += [f"{repr(float(x))} {repr(float(y))} 0.0" for x, y in mesh.vertices]
    nt = mesh.n_triangles
    lines.append(f"CELLS {nt} {4 * nt}")
    lines += [f"3 {a} {b} {c}" for a, b, c in mesh.triangles]
    lines.append(f"CELL_TYPES {nt}")
    lines += ["5"] * nt
    lines += [f"POINT_DATA {mesh.n_vertices}", f"SCALARS {name} double 1",
              "LOOKUP_TABLE default"]
    lines += [repr(float(v)) for v in vals]
    try:
        with open(path, "w", encoding="ascii") as fh:
            fh.write("\n".join(lines) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write VTK to {path}: {exc}") from exc


def indicator_exporter(cfg, out_dir):
    """Callback writing the indicator field every ``cfg.indicator_every``
    steps of an EFR run."""
    os.makedirs(out_dir, exist_ok=True)

    def callback(step, t, state):
        if hasattr(state, "a") and step % cfg.indicator_every == 0:
            export_vtk(state.a, os.path.join(out_dir, f"indicator_{step:05d}.vtk"), "indicator")
    return callback
