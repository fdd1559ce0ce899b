"""Command-line interface: ``nilgeo <command> [options]``.

Every command prints a delimited table to stdout. With ``--output-dir`` it also
writes the table (CSV), a structured JSON mirror, SVG figures where relevant and
a manifest with content hashes. Exit codes: 0 success, 2 configuration error,
3 input parse error, 4 numerical target unmet, 5 precondition violated.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import io
import json
import math
import platform
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigError, FamilyParseError, NilgeoError

DEFAULT_SEED = 20240917
FORMATS = ("table", "structured-doc", "both")
COMMANDS = (
    "spectrum", "cut-time", "geodesic", "jacobian", "volume", "density-field",
    "resonance", "versal", "probe", "codim-report", "scaffold",
)


# ---------------------------------------------------------------------------
# results and emission


def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.16e}"
    return str(v)


def _plain(v):
    """JSON-ready copy of nested data (arrays to lists, non-finite floats to strings)."""
    if isinstance(v, dict):
        return {str(k): _plain(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    if isinstance(v, np.ndarray):
        return _plain(v.tolist())
    if isinstance(v, (np.bool_,)):
        return bool(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else repr(v)
    if dataclasses.is_dataclass(v) and not isinstance(v, type):
        return _plain({f.name: getattr(v, f.name) for f in dataclasses.fields(v)})
    return v


@dataclass
class Result:
    name: str
    header: list
    rows: list
    doc: dict = field(default_factory=dict)
    figures: list = field(default_factory=list)  # (filename, callable(path))
    extra_files: dict = field(default_factory=dict)  # filename -> text

    def table_text(self) -> str:
        buf = io.StringIO()
        buf.write(f"# nilgeo-{self.name}/1 nilgeo {__version__}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.header)
        for row in self.rows:
            w.writerow([_cell(v) for v in row])
        return buf.getvalue()


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def emit(result: Result, config: dict, output_dir, fmt: str, plots: bool = True, stdout=None) -> list:
    """Print the result and write artifacts; returns the written paths."""
    stdout = stdout or sys.stdout
    doc_text = json.dumps(
        {"format": f"nilgeo-{result.name}/1", "version": __version__, "result": _plain(result.doc)},
        indent=2, sort_keys=True,
    ) + "\n"
    if fmt == "structured-doc" and output_dir is None:
        stdout.write(doc_text)
    else:
        stdout.write(result.table_text())
    if output_dir is None:
        return []
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    if fmt in ("table", "both"):
        p = out / f"{result.name}.csv"
        p.write_text(result.table_text())
        written.append(p)
    if fmt in ("structured-doc", "both"):
        p = out / f"{result.name}.json"
        p.write_text(doc_text)
        written.append(p)
    for fname, text in result.extra_files.items():
        p = out / fname
        p.write_text(text)
        written.append(p)
    if plots:
        for fname, draw in result.figures:
            p = out / fname
            draw(p)
            written.append(p)
    manifest = {
        "format": "nilgeo-manifest/1",
        "versions": _versions(),
        "config": _plain(config),
        "artifacts": {p.name: _sha256(p) for p in written},
    }
    mp = out / "manifest.json"
    mp.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return written + [mp]


def _versions() -> dict:
    import matplotlib
    import scipy

    return {
        "nilgeo": __version__,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "matplotlib": matplotlib.__version__,
        "python": platform.python_version(),
    }


# ---------------------------------------------------------------------------
# input helpers


def _vector(text) -> np.ndarray:
    if text is None:
        return None
    if isinstance(text, (list, tuple, np.ndarray)):
        return np.asarray(text, dtype=float)
    try:
        return np.array([float(v) for v in str(text).split(",") if v.strip()], dtype=float)
    except ValueError as exc:
        raise ConfigError(f"cannot parse vector {text!r}") from exc


def load_input(spec: str):
    """A builtin family name or a path to a family file."""
    from .structure import BUILTIN_NAMES, builtin, load_family

    if spec in BUILTIN_NAMES:
        return builtin(spec)
    path = Path(spec)
    if not path.exists():
        raise ConfigError(f"no builtin named {spec!r} and no such file")
    try:
        return load_family(path)
    except OSError as exc:
        raise FamilyParseError(str(exc)) from exc


def _xi(family, opts) -> np.ndarray:
    xi = _vector(opts.get("xi"))
    if xi is None:
        return np.zeros(family.param_dim)
    if xi.size != family.param_dim:
        raise ConfigError(f"--xi needs {family.param_dim} values for {family.name}")
    return xi


def _structure(family, opts):
    from .structure import eval_family

    return eval_family(family, _xi(family, opts))


def _quad(opts, seed):
    from .density import QuadratureSpec

    overrides = dict(opts.get("quad") or {})
    overrides.setdefault("seed", seed)
    return QuadratureSpec.from_dict(overrides)


# ---------------------------------------------------------------------------
# command handlers: (opts dict, seed, workers) -> Result


def cmd_spectrum(opts, seed, workers):
    from .skew import eigen_moduli
    from .plotting import plot_spectrum

    family = load_input(opts["input"])
    s = _structure(family, opts)
    n = int(opts.get("theta_grid", 64))
    if n < 1:
        raise ConfigError("--theta-grid must be positive")
    thetas = 2 * math.pi * np.arange(n) / n
    rows, mods = [], []
    for th in thetas:
        sd = eigen_moduli(s.pencil_matrix(th))
        mods.append(sd.moduli)
        rows.append([th, *sd.moduli, sd.top_gap if len(sd.moduli) > 1 else math.inf, sd.multiplicities[0]])
    m = len(mods[0])
    header = ["theta"] + [f"w{k + 1}" for k in range(m)] + ["top_gap", "top_multiplicity"]
    doc = {"family": family.name, "xi": _xi(family, opts), "rows": [dict(zip(header, r)) for r in rows]}
    mods = np.array(mods)
    return Result("spectrum", header, rows, doc, [("spectrum.svg", lambda p: plot_spectrum(thetas, mods, p))])


def cmd_cut_time(opts, seed, workers):
    from .geodesic import cut_is_conjugate, cut_time

    family = load_input(opts["input"])
    s = _structure(family, opts)
    thetas = _vector(opts.get("theta", "0"))
    r = float(opts.get("r", 1.0))
    if r <= 0:
        raise ConfigError("--r must be positive")
    rows = [[th, r, cut_time(s, th, r), cut_is_conjugate(s, th, r)] for th in thetas]
    header = ["theta", "r", "cut_time", "cut_is_conjugate"]
    return Result("cut-time", header, rows, {"rows": [dict(zip(header, x)) for x in rows]})


def _covector(s, opts, seed):
    from .geodesic import Covector

    px0 = _vector(opts.get("px0"))
    if px0 is None:
        px0 = np.random.default_rng(seed).normal(size=s.p)
        px0 /= np.linalg.norm(px0)
    if px0.size != s.p:
        raise ConfigError(f"--px0 needs {s.p} values")
    return Covector(px0, float(opts.get("theta", 0.0)), float(opts.get("r", 1.0)))


def cmd_geodesic(opts, seed, workers):
    from .geodesic import geodesic

    family = load_input(opts["input"])
    s = _structure(family, opts)
    c = _covector(s, opts, seed)
    ts = _vector(opts.get("t", "1"))
    p = s.p
    header = ["t"] + [f"x{k + 1}" for k in range(p)] + ["y1", "y2", "speed"]
    rows = []
    for t in ts:
        st = geodesic(s, c, t)
        rows.append([t, *st.x, *st.y, float(np.linalg.norm(st.u))])
    doc = {"px0": c.px0, "theta": c.theta, "r": c.r, "rows": [dict(zip(header, x)) for x in rows]}
    return Result("geodesic", header, rows, doc)


def cmd_jacobian(opts, seed, workers):
    from .geodesic import exp_jacobian

    family = load_input(opts["input"])
    s = _structure(family, opts)
    c = _covector(s, opts, seed)
    method = opts.get("method", "variational")
    if method not in ("variational", "fd"):
        raise ConfigError("--method must be variational or fd")
    res = exp_jacobian(s, c, method=method)
    header = ["det"] + [f"sigma{k + 1}" for k in range(len(res.singular_values))]
    rows = [[res.det, *res.singular_values]]
    doc = {"px0": c.px0, "theta": c.theta, "r": c.r, "method": method, "det": res.det,
           "singular_values": res.singular_values, "matrix": res.matrix}
    return Result("jacobian", header, rows, doc)


def cmd_volume(opts, seed, workers):
    from .density import ball_volume
    from .plotting import plot_slices

    family = load_input(opts["input"])
    s = _structure(family, opts)
    rep = ball_volume(s, _quad(opts, seed), workers=workers)
    header = ["volume", "rel_err", "Q", "f_SP", "min_gap", "refinements", "sign_ok"]
    rows = [[rep.volume, rep.rel_err, rep.Q, rep.f_SP, rep.min_gap, rep.refinements, rep.sign_ok]]
    slices = Result("slices", ["theta", "A", "W", "err", "top_gap"],
                    [[r.theta, r.cut, r.value, r.err, r.top_gap] for r in rep.per_theta])
    doc = {"family": family.name, "xi": _xi(family, opts), "report": rep.to_dict()}
    return Result("volume", header, rows, doc, [("slices.svg", lambda p: plot_slices(rep, p))],
                  {"slices.csv": slices.table_text()})


def _grid(family, opts):
    pts = opts.get("points")
    line = opts.get("line")
    if pts:
        grid = [_vector(p) for p in pts]
    elif line:
        parts = line.split(":") if isinstance(line, str) else list(line)
        if len(parts) != 3:
            raise ConfigError("line must be START:STOP:N")
        try:
            a, b, n = _vector(parts[0]), _vector(parts[1]), int(parts[2])
        except ValueError as exc:
            raise ConfigError(f"bad line spec {line!r}") from exc
        if n < 1:
            raise ConfigError("line needs at least one point")
        grid = [a + (b - a) * (k / max(n - 1, 1)) for k in range(n)]
    else:
        raise ConfigError("density-field needs --point or --line")
    for xi in grid:
        if xi.size != family.param_dim:
            raise ConfigError(f"grid points need {family.param_dim} coordinates")
    return grid


def cmd_density_field(opts, seed, workers):
    from .density import density_field, field_document, field_table
    from .plotting import plot_field

    family = load_input(opts["input"])
    grid = _grid(family, opts)
    pts = density_field(family, grid, _quad(opts, seed), cache_dir=opts.get("cache_dir"), workers=workers)
    header = [f"xi{k + 1}" for k in range(family.param_dim)] + ["volume", "rel_err", "f_SP", "min_gap", "status"]
    rows = []
    for pt in pts:
        rep = pt.report
        vals = [rep.volume, rep.rel_err, rep.f_SP, rep.min_gap] if rep else [math.nan] * 4
        rows.append([*pt.xi, *vals, "ok" if pt.error is None else pt.error.split(":")[0]])
    res = Result("density-field", header, rows, field_document(pts, family.name))
    res.table_text = lambda: field_table(pts, family.param_dim)
    axis = int(np.argmax(np.ptp(np.array([p.xi for p in pts]), axis=0))) if len(pts) > 1 else 0
    res.figures.append(("density-field.svg", lambda p: plot_field(pts, p, axis)))
    return res


def cmd_resonance(opts, seed, workers):
    from .resonance import resonance_locate

    family = load_input(opts["input"])
    start = _vector(opts.get("start"))
    if start is None:
        start = np.zeros(family.param_dim + 1)
    if start.size != family.param_dim + 1:
        raise ConfigError(f"--start needs {family.param_dim + 1} values (theta, xi)")
    pt = resonance_locate(family, start, tol=float(opts.get("tol", 1e-9)), radius=float(opts.get("radius", 1.0)))
    header = ["theta"] + [f"xi{k + 1}" for k in range(family.param_dim)] + ["gap", "w1", "w2", "kind"]
    rows = [[*pt.z, pt.gap, pt.moduli[0], pt.moduli[1], pt.kind]]
    doc = {"z": pt.z, "gap": pt.gap, "moduli": pt.moduli, "kind": pt.kind, "iterations": pt.iterations}
    return Result("resonance", header, rows, doc)


def cmd_versal(opts, seed, workers):
    from .quaternion import versal_q, versal_rank_check

    family = load_input(opts["input"])
    z = _vector(opts.get("z"))
    if z is None:
        z = np.zeros(family.param_dim + 1)
    if z.size != family.param_dim + 1:
        raise ConfigError(f"--z needs {family.param_dim + 1} values (theta, xi)")
    v = versal_q(family, z)
    header = ["lambda", "q_norm", "top_modulus", "rank", "property_r"]
    doc = {"z": z, "lambda": v.lam, "q": v.q, "q_norm": v.q_norm, "delta_moduli": v.delta_moduli}
    rank = rk = None
    if opts.get("rank_check", True):
        rk = versal_rank_check(family, z, h=float(opts.get("h", 1e-5)))
        rank = rk.rank
        doc["rank_check"] = {"rank": rk.rank, "singular_values": rk.singular_values, "jacobian": rk.jacobian}
    rows = [[v.lam, v.q_norm, v.top_modulus, "" if rank is None else rank, "" if rk is None else rk.property_r]]
    return Result("versal", header, rows, doc)


def cmd_codim_report(opts, seed, workers):
    from .skew import orbit_codimension_report

    n = int(opts.get("n", 3))
    try:
        rep = orbit_codimension_report(n)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    header = ["kind", "n", "so_dim", "centralizer_dim", "orbit_dim", "family_dim", "codimension"]
    rows = [[ln.kind, ln.n, ln.so_dim, ln.centralizer_dim, ln.orbit_dim, ln.family_dim, ln.codimension]
            for ln in rep.lines]
    return Result("codim-report", header, rows, {"n": n, "lines": [dict(zip(header, r)) for r in rows]})


def cmd_scaffold(opts, seed, workers):
    from .structure import BUILTIN_NAMES, builtin_text

    names = [opts["input"]] if opts.get("input") else list(BUILTIN_NAMES)
    for name in names:
        if name not in BUILTIN_NAMES:
            raise ConfigError(f"unknown builtin {name!r}")
    files = {f"{name}.json": builtin_text(name) for name in names}
    rows = [[name, f"{name}.json"] for name in names]
    return Result("scaffold", ["builtin", "file"], rows, {"files": list(files)}, extra_files=files)


def _resonance_point(family, opts):
    from .resonance import resonance_locate

    z = _vector(opts.get("z"))
    if z is not None:
        return z
    start = _vector(opts.get("start"))
    if start is None:
        start = np.zeros(family.param_dim + 1)
    return resonance_locate(family, start).z


def cmd_probe(opts, seed, workers):
    from . import probe
    from .plotting import plot_regularity, plot_vanishing
    from .structure import eval_family

    family = load_input(opts["input"])
    kind = opts.get("kind", "regularity")
    quad = _quad(opts, seed) if opts.get("quad") else probe.PROBE_QUAD
    if kind == "regularity":
        z0 = _resonance_point(family, opts)
        d = _vector(opts.get("direction"))
        d = probe.transversal_direction(family, z0) if d is None else d
        hs = _vector(opts.get("h_seq")) if opts.get("h_seq") else probe.DEFAULT_H_SEQ
        rep = probe.regularity_scan(family, probe.CrossingPath(z0, d), quad, hs, opts.get("quantity", "W"))
        header = ["h", "d1_left", "d1_right", "c1_defect", "d2_left", "d2_right", "c2_defect"]
        rows = [list(r) for r in zip(rep.step_sequence, rep.d1_left, rep.d1_right, rep.c1_defect,
                                     rep.d2_left, rep.d2_right, rep.c2_defect)]
        rows.append(["verdict", rep.verdict_c1, rep.c1_limit, rep.c1_floor, rep.verdict_c2, rep.c2_limit, rep.c2_floor])
        return Result("probe-regularity", header, rows, probe.report_dict(rep),
                      [("probe-regularity.svg", lambda p: plot_regularity(rep, p))])
    if kind == "vanishing":
        z0 = _resonance_point(family, opts)
        rep = probe.quadratic_vanishing_check(family, z0, rays=int(opts.get("rays", 3)), quad=quad, seed=seed)
        header = ["ray", "q_norm", "f_at_cut", "max_abs_J"]
        rows = [[i, q, f, j] for i in range(len(rep.rays))
                for q, f, j in zip(rep.q_norms[i], rep.f_values[i], rep.j_values[i])]
        rows.append(["exponent", rep.f_exponent, rep.j_exponent, rep.exponent_ok])
        return Result("probe-vanishing", header, rows, probe.report_dict(rep),
                      [("probe-vanishing.svg", lambda p: plot_vanishing(rep, p))])
    if kind == "rank-drop":
        s = _structure(family, opts)
        theta = float(opts.get("theta", 0.0))
        px0 = np.random.default_rng(seed).normal(size=(int(opts.get("samples", 50)), s.p))
        rep = probe.rank_drop_check(s, theta, px0)
        header = ["theta", "r", "samples", "worst_second_ratio", "worst_det_ratio", "min_small_count", "drops_by_two"]
        rows = [[rep.theta, rep.r, rep.samples, rep.worst_second_ratio, rep.worst_det_ratio,
                 rep.min_small_count, rep.drops_by_two]]
        return Result("probe-rank-drop", header, rows, probe.report_dict(rep))
    if kind == "lipschitz":
        box = opts.get("region")
        if box is None:
            box = [(0.0, 2 * math.pi)] + [(-0.5, 0.5)] * family.param_dim
        box = [tuple(_vector(b)) if isinstance(b, str) else tuple(b) for b in box]
        rep = probe.lipschitz_check(family, box, int(opts.get("samples", 2000)), seed=seed)
        header = ["estimate", "estimate_half", "growth", "samples", "stable"]
        rows = [[rep.estimate, rep.estimate_half, rep.growth, rep.samples, rep.stable]]
        return Result("probe-lipschitz", header, rows, probe.report_dict(rep))
    if kind == "derivative":
        z0 = _vector(opts.get("z"))
        if z0 is None:
            z0 = _resonance_point(family, opts)
        d = _vector(opts.get("direction"))
        if d is None:
            d = np.random.default_rng(seed).normal(size=z0.size)
        rep = probe.derivative_formula_check(family, z0, d, quad=quad)
        header = ["resonant", "f_at_cut", "formula", "fd_limit", "floor", "tol", "agree"]
        rows = [[rep.resonant, rep.f_at_cut, rep.formula, rep.fd_limit, rep.floor, rep.tol, rep.agree]]
        return Result("probe-derivative", header, rows, probe.report_dict(rep))
    raise ConfigError(f"unknown probe kind {kind!r}")


HANDLERS = {
    "spectrum": cmd_spectrum,
    "cut-time": cmd_cut_time,
    "geodesic": cmd_geodesic,
    "jacobian": cmd_jacobian,
    "volume": cmd_volume,
    "density-field": cmd_density_field,
    "resonance": cmd_resonance,
    "versal": cmd_versal,
    "probe": cmd_probe,
    "codim-report": cmd_codim_report,
    "scaffold": cmd_scaffold,
}


# ---------------------------------------------------------------------------
# run configs


@dataclass(frozen=True)
class RunConfig:
    """Strict JSON run description: ``nilgeo run --config FILE``."""

    command: str
    input: str | None = None
    output_dir: str | None = None
    quad: dict = field(default_factory=dict)
    seed: int = DEFAULT_SEED
    format: str = "both"
    workers: int = 1
    plots: bool = True
    args: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}")
        if self.format not in FORMATS:
            raise ConfigError(f"format must be one of {FORMATS}")
        if not isinstance(self.seed, int) or isinstance(self.seed, bool):
            raise ConfigError("seed must be an integer")
        if not isinstance(self.workers, int) or self.workers < 1:
            raise ConfigError("workers must be a positive integer")
        if not isinstance(self.quad, dict) or not isinstance(self.args, dict):
            raise ConfigError("quad and args must be objects")

    @classmethod
    def from_dict(cls, d) -> "RunConfig":
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise ConfigError(f"unknown config fields: {unknown}")
        if "command" not in d:
            raise ConfigError("config needs a command")
        return cls(**d)

    def options(self) -> dict:
        opts = dict(self.args)
        if "input" in opts or "quad" in opts:
            raise ConfigError("input and quad belong at the top level of the config")
        opts["input"] = self.input if self.input is not None else ("" if self.command == "scaffold" else "F_generic")
        opts["quad"] = self.quad
        return opts


def run(config: RunConfig, stdout=None) -> int:
    """Execute a configuration; returns the process exit status."""
    try:
        opts = config.options()
        if config.quad:
            _quad(opts, config.seed)  # validate early
        result = HANDLERS[config.command](opts, config.seed, config.workers)
        echo = {k: v for k, v in dataclasses.asdict(config).items() if k != "output_dir"}
        emit(result, echo, config.output_dir, config.format, config.plots, stdout)
    except NilgeoError as exc:
        print(f"nilgeo: error: {exc}", file=sys.stderr)
        return exc.exit_code
    return 0


# ---------------------------------------------------------------------------
# argparse front end


def _add_common(p, family=True):
    if family:
        g = p.add_mutually_exclusive_group()
        g.add_argument("--builtin", help="built-in family name")
        g.add_argument("--family", help="family file path (or builtin name)")
    p.add_argument("--output-dir", help="write artifacts and a manifest here")
    p.add_argument("--format", choices=FORMATS, default="both")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--no-plots", action="store_true", help="skip SVG figures")


def _add_xi(p):
    p.add_argument("--xi", help="parameter point, comma separated (use --xi=-1,2 for negatives)")


def _add_quad(p):
    p.add_argument("--theta-nodes", type=int)
    p.add_argument("--r-nodes", type=int)
    p.add_argument("--ball-scheme", choices=("auto", "product", "qmc"))
    p.add_argument("--qmc-points", type=int)
    p.add_argument("--target", type=float, dest="target_rel_err")
    p.add_argument("--max-refinements", type=int)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="nilgeo", description="Corank-2 nilpotent sub-Riemannian numerics.")
    ap.add_argument("--version", action="version", version=f"nilgeo {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("spectrum", help="pencil moduli over a theta grid")
    _add_common(p)
    _add_xi(p)
    p.add_argument("--theta-grid", type=int, default=64)

    p = sub.add_parser("cut-time", help="cut time and cut=conjugate flag")
    _add_common(p)
    _add_xi(p)
    p.add_argument("--theta", default="0", help="angle or comma-separated angles")
    p.add_argument("--r", type=float, default=1.0)

    for name, hlp in (("geodesic", "geodesic samples"), ("jacobian", "exponential-map Jacobian")):
        p = sub.add_parser(name, help=hlp)
        _add_common(p)
        _add_xi(p)
        p.add_argument("--px0", help="initial horizontal covector (default: seeded random unit vector)")
        p.add_argument("--theta", type=float, default=0.0)
        p.add_argument("--r", type=float, default=1.0)
        if name == "geodesic":
            p.add_argument("--t", default="1", help="time or comma-separated times")
        else:
            p.add_argument("--method", choices=("variational", "fd"), default="variational")

    p = sub.add_parser("volume", help="Popp volume of the unit ball and f_SP")
    _add_common(p)
    _add_xi(p)
    _add_quad(p)

    p = sub.add_parser("density-field", help="f_SP over a parameter grid")
    _add_common(p)
    _add_quad(p)
    p.add_argument("--point", action="append", dest="points", help="grid point (repeatable)")
    p.add_argument("--line", metavar="START:STOP:N", help="N points on a segment, e.g. --line=-0.1,0,0:0.1,0,0:21")
    p.add_argument("--cache-dir", help="result cache (default $NILGEO_CACHE_DIR)")

    p = sub.add_parser("resonance", help="locate a double top eigenvalue")
    _add_common(p)
    p.add_argument("--start", help="seed z = theta,xi...")
    p.add_argument("--tol", type=float, default=1e-9)
    p.add_argument("--radius", type=float, default=1.0, help="search box half-width around the seed")

    p = sub.add_parser("versal", help="versal coordinates and the property (R) rank")
    _add_common(p)
    p.add_argument("--z", help="theta,xi...")
    p.add_argument("--h", type=float, default=1e-5)
    p.add_argument("--no-rank-check", dest="rank_check", action="store_false")

    p = sub.add_parser("probe", help="regularity diagnostics")
    _add_common(p)
    _add_xi(p)
    _add_quad(p)
    p.add_argument("--kind", choices=("regularity", "vanishing", "rank-drop", "lipschitz", "derivative"),
                   default="regularity")
    p.add_argument("--z", help="point theta,xi... (default: located from --start)")
    p.add_argument("--start", help="resonance search seed")
    p.add_argument("--direction", help="path direction in z-space (default: transversal)")
    p.add_argument("--h-seq", help="decreasing steps, comma separated")
    p.add_argument("--quantity", choices=("W", "f_SP"), default="W")
    p.add_argument("--rays", type=int, default=3)
    p.add_argument("--theta", type=float, default=0.0)
    p.add_argument("--samples", type=int)

    p = sub.add_parser("codim-report", help="orbit codimensions of double/triple strata")
    _add_common(p, family=False)
    p.add_argument("--n", type=int, default=3)

    p = sub.add_parser("scaffold", help="export built-in family files for editing")
    _add_common(p, family=False)
    p.add_argument("--builtin", help="one builtin (default: all)")

    p = sub.add_parser("run", help="execute a JSON run configuration")
    p.add_argument("--config", required=True)
    return ap


_QUAD_KEYS = ("theta_nodes", "r_nodes", "ball_scheme", "qmc_points", "target_rel_err", "max_refinements")
_GLOBAL_KEYS = {"command", "builtin", "family", "output_dir", "format", "seed", "workers", "no_plots", "config"}


def config_from_args(ns) -> RunConfig:
    if ns.command == "run":
        try:
            text = Path(ns.config).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
        try:
            return RunConfig.from_dict(json.loads(text))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON (line {exc.lineno}): {exc.msg}") from exc
    d = vars(ns)
    quad = {k: d[k] for k in _QUAD_KEYS if d.get(k) is not None}
    args = {k: v for k, v in d.items() if k not in _GLOBAL_KEYS and k not in _QUAD_KEYS and v is not None}
    if args.get("samples") is None:
        args.pop("samples", None)
    return RunConfig(
        command=ns.command,
        input=d.get("builtin") or d.get("family"),
        output_dir=d.get("output_dir"),
        quad=quad,
        seed=d.get("seed", DEFAULT_SEED),
        format=d.get("format", "both"),
        workers=d.get("workers", 1),
        plots=not d.get("no_plots", False),
        args=args,
    )


def main(argv=None) -> int:
    ns = build_parser().parse_args(argv)
    try:
        config = config_from_args(ns)
    except NilgeoError as exc:
        print(f"nilgeo: error: {exc}", file=sys.stderr)
        return exc.exit_code
    return run(config)


if __name__ == "__main__":
    sys.exit(main())
