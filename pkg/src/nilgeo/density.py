"""Popp volume of the nilpotent unit ball and the spherical Hausdorff density.

    V = int_0^{2pi} W(theta) d theta,   W(theta) = int_0^{A(theta)} f(theta, r) dr,
    f(theta, r) = int_{|px0| <= 1} J(px0, theta, r) d px0,

with A(theta) = 2 pi / max modulus(cos theta L1 + sin theta L2) and J the Jacobian
determinant of the exponential map. The density is f_SP = 2^Q / V.
"""
from __future__ import annotations

import csv
import dataclasses
import hashlib
import io
import json
import math
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigError, ErrTargetUnmet, NilgeoError
from .geodesic import cut_radius, flow_matrices_batch
from .quadrature import ball_product_rule, gauss_legendre, qmc_ball_points, ball_volume_euclidean
from .skew import eigen_moduli
from .structure import CorankTwoStructure, StructureFamily, eval_family, hausdorff_dimension

BALL_SCHEMES = ("auto", "product", "qmc")
ROUNDOFF_RTOL = 1e-13
DET_RTOL = 1e-14
TABLE_FORMAT = "nilgeo-density-table/1"
REPORT_FORMAT = "nilgeo-density/1"


class SignWarning(UserWarning):
    """J changed sign on the sub-cut domain, which it should not."""


@dataclass(frozen=True)
class QuadratureSpec:
    theta_nodes: int = 64
    r_nodes: int = 16
    ball_scheme: str = "auto"
    sphere_degree: int = 7
    radial_nodes: int = 8
    qmc_points: int = 2**14
    qmc_replicates: int = 8
    target_rel_err: float = 1e-4
    max_refinements: int = 2
    seed: int = 20240917

    def __post_init__(self):
        for name in ("theta_nodes", "r_nodes", "radial_nodes"):
            if getattr(self, name) < 4:
                raise ConfigError(f"{name} must be >= 4")
        if self.theta_nodes % 2 or self.r_nodes % 2:
            raise ConfigError("theta_nodes and r_nodes must be even (nested error estimates)")
        if self.ball_scheme not in BALL_SCHEMES:
            raise ConfigError(f"ball_scheme must be one of {BALL_SCHEMES}")
        if self.sphere_degree < 5:
            raise ConfigError("sphere_degree must be >= 5")
        if self.qmc_replicates < 2 or self.qmc_points < 16 * self.qmc_replicates:
            raise ConfigError("qmc needs >= 2 replicates of >= 16 points")
        if not 0.0 < self.target_rel_err <= 0.1:
            raise ConfigError("target_rel_err must lie in (0, 0.1]")
        if self.max_refinements < 0:
            raise ConfigError("max_refinements must be >= 0")

    def scheme_for(self, p: int) -> str:
        if self.ball_scheme != "auto":
            return self.ball_scheme
        return "product"

    def refined(self) -> "QuadratureSpec":
        return dataclasses.replace(
            self,
            theta_nodes=2 * self.theta_nodes,
            r_nodes=2 * self.r_nodes,
            qmc_points=2 * self.qmc_points,
        )

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "QuadratureSpec":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown quadrature fields: {sorted(unknown)}")
        return cls(**d)


class _BallRule:
    """Weights and nodes for int_B g(px0) d px0 plus an independent companion rule."""

    def __init__(self, p: int, quad: QuadratureSpec):
        self.scheme = quad.scheme_for(p)
        if self.scheme == "product":
            deg, rad = quad.sphere_degree, quad.radial_nodes
            if quad.ball_scheme == "auto" and p >= 6:
                deg, rad = 5, 4
            self.sets = [ball_product_rule(p, deg, rad), ball_product_rule(p, 5, 3)]
        else:
            n = quad.qmc_points // quad.qmc_replicates
            vol = ball_volume_euclidean(p)
            ss = np.random.SeedSequence(quad.seed).spawn(quad.qmc_replicates)
            self.sets = [(qmc_ball_points(p, n, np.random.default_rng(s)), np.full(n, vol / n)) for s in ss]
        self.points = np.vstack([pts for pts, _ in self.sets])
        self._splits = np.cumsum([len(w) for _, w in self.sets])[:-1]

    def integrate(self, values: np.ndarray, scales: np.ndarray):
        """(estimate, error) from values on self.points; values shape (..., N).

        ``scales`` bounds the size of each value (the Hadamard bound for determinants)
        and sets the roundoff part of the error.
        """
        parts = np.split(values, self._splits, axis=-1)
        sums = [v @ w for v, (_, w) in zip(parts, self.sets)]
        noise = DET_RTOL * (np.split(scales, self._splits, axis=-1)[0] @ np.abs(self.sets[0][1]))
        if self.scheme == "product":
            return sums[0], np.abs(sums[0] - sums[1]) + noise
        s = np.array(sums)
        return s.mean(axis=0), s.std(axis=0, ddof=1) / math.sqrt(len(sums)) + noise


def _fiber_values(s: CorankTwoStructure, theta: float, rs, rule: _BallRule):
    """f(theta, r) and its ball-quadrature error at each r, plus the J sign range."""
    rs = np.atleast_1d(np.asarray(rs, dtype=float))
    jms = np.array([fm.jacobian(rule.points) for fm in flow_matrices_batch(s, theta, rs)])
    dets = np.linalg.det(jms)
    f, err = rule.integrate(dets, np.prod(np.linalg.norm(jms, axis=-2), axis=-1))
    return f, err, float(dets.min()), float(dets.max())


def fiber_density(s: CorankTwoStructure, theta: float, r: float, quad: QuadratureSpec | None = None) -> float:
    """f(theta, r): the integral of J over the unit ball in px0."""
    quad = quad or QuadratureSpec()
    f, _, _, _ = _fiber_values(s, theta, [r], _BallRule(s.p, quad))
    return float(f[0])


@dataclass(frozen=True)
class SliceValue:
    theta: float
    cut: float  # A(theta)
    value: float  # W(theta)
    err: float  # r-rule error estimate (n vs n/2 nodes) plus ball error
    top_gap: float  # w1 - w2 of the unit pencil
    j_min: float
    j_max: float


def _slice(s: CorankTwoStructure, theta: float, quad: QuadratureSpec, rule: _BallRule | None = None) -> SliceValue:
    rule = rule or _BallRule(s.p, quad)
    a = cut_radius(s, theta)
    x1, w1 = gauss_legendre(quad.r_nodes)
    x2, w2 = gauss_legendre(quad.r_nodes // 2)
    rs = a * np.concatenate([x1, x2])
    f, ferr, jmin, jmax = _fiber_values(s, theta, rs, rule)
    n = quad.r_nodes
    fine = a * math.fsum(w1 * f[:n])
    coarse = a * math.fsum(w2 * f[n:])
    ball_err = a * float(w1 @ ferr[:n])
    w = eigen_moduli(s.pencil_matrix(theta)).moduli
    gap = float(w[0] - w[1]) if len(w) > 1 else math.inf
    return SliceValue(float(theta), a, fine, abs(fine - coarse) + ball_err, gap, jmin, jmax)


def angular_slice(s: CorankTwoStructure, theta: float, quad: QuadratureSpec | None = None) -> SliceValue:
    """W(theta) = int_0^{A(theta)} f(theta, r) dr by Gauss-Legendre, with its error estimate."""
    return _slice(s, theta, quad or QuadratureSpec())


@dataclass(frozen=True)
class DensityReport:
    volume: float
    rel_err: float
    Q: int
    f_SP: float
    per_theta: tuple  # SliceValue rows
    min_gap: float
    errors: dict = field(default_factory=dict)  # absolute contributions by layer
    quad: QuadratureSpec = field(default_factory=QuadratureSpec)
    refinements: int = 0
    sign_ok: bool = True

    def to_dict(self) -> dict:
        return {
            "volume": self.volume,
            "rel_err": self.rel_err,
            "Q": self.Q,
            "f_SP": self.f_SP,
            "min_gap": self.min_gap,
            "errors": dict(self.errors),
            "refinements": self.refinements,
            "sign_ok": self.sign_ok,
            "quad": self.quad.to_dict(),
            "per_theta": [dataclasses.asdict(row) for row in self.per_theta],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DensityReport":
        rows = tuple(SliceValue(**row) for row in d["per_theta"])
        return cls(
            d["volume"], d["rel_err"], d["Q"], d["f_SP"], rows, d["min_gap"], d["errors"],
            QuadratureSpec.from_dict(d["quad"]), d["refinements"], d["sign_ok"],
        )


def _slices_worker(args):
    s, thetas, quad = args
    rule = _BallRule(s.p, quad)
    return [_slice(s, th, quad, rule) for th in thetas]


def _all_slices(s: CorankTwoStructure, quad: QuadratureSpec, workers: int):
    thetas = 2 * math.pi * np.arange(quad.theta_nodes) / quad.theta_nodes
    if workers <= 1:
        return _slices_worker((s, thetas, quad))
    chunks = np.array_split(thetas, workers)
    with ProcessPoolExecutor(max_workers=workers) as ex:
        parts = ex.map(_slices_worker, [(s, c, quad) for c in chunks])
        return [row for part in parts for row in part]


def _assemble(s: CorankTwoStructure, quad: QuadratureSpec, rows, refinements: int) -> DensityReport:
    n = len(rows)
    h = 2 * math.pi / n
    vals = [row.value for row in rows]
    vol = h * math.fsum(vals)
    vol_half = 2 * h * math.fsum(vals[::2])
    errs = {
        "theta": abs(vol - vol_half),
        "r_and_ball": h * math.fsum(row.err for row in rows),
        "roundoff": ROUNDOFF_RTOL * abs(vol),
    }
    total = math.fsum(errs.values())
    q = hausdorff_dimension(s)
    jmin = min(row.j_min for row in rows)
    jmax = max(row.j_max for row in rows)
    sign_ok = not (jmin < -1e-10 * abs(jmax) and jmax > 1e-10 * abs(jmin))
    if not sign_ok:
        warnings.warn(f"J changes sign on the sub-cut domain (range [{jmin:.3g}, {jmax:.3g}])", SignWarning, stacklevel=3)
    if not vol > 0:
        raise NilgeoError(f"nonpositive volume {vol!r}")
    return DensityReport(
        vol, total / abs(vol), q, 2.0**q / vol, tuple(rows), min(row.top_gap for row in rows),
        errs, quad, refinements, sign_ok,
    )


def ball_volume(s: CorankTwoStructure, quad: QuadratureSpec | None = None, workers: int = 1) -> DensityReport:
    """Popp volume of the unit ball with a three-layer error estimate and refinement."""
    quad = quad or QuadratureSpec()
    for k in range(quad.max_refinements + 1):
        report = _assemble(s, quad, _all_slices(s, quad, workers), k)
        if report.rel_err <= quad.target_rel_err:
            return report
        if k < quad.max_refinements:
            quad = quad.refined()
    raise ErrTargetUnmet(
        f"relative error estimate {report.rel_err:.3g} above target {quad.target_rel_err:.3g}", report
    )


# ---------------------------------------------------------------------------
# density fields over parameter grids


@dataclass(frozen=True)
class FieldPoint:
    xi: tuple
    report: DensityReport | None
    error: str | None = None


def _cache_key(family: StructureFamily, xi, quad: QuadratureSpec) -> str:
    payload = json.dumps(
        {
            "version": __version__,
            "family": family.canonical_text(),
            "xi": [float(v).hex() for v in xi],
            "quad": quad.to_dict(),
        },
        sort_keys=True,
    )
    return hashlib.sha256(payload.encode()).hexdigest()


def default_cache_dir() -> Path | None:
    env = os.environ.get("NILGEO_CACHE_DIR")
    return Path(env) if env else None


def _point(args):
    family, xi, quad = args
    try:
        return FieldPoint(tuple(xi), ball_volume(eval_family(family, xi), quad))
    except ErrTargetUnmet as exc:
        return FieldPoint(tuple(xi), exc.report, f"{type(exc).__name__}: {exc}")
    except NilgeoError as exc:
        return FieldPoint(tuple(xi), None, f"{type(exc).__name__}: {exc}")


def density_field(
    family: StructureFamily,
    grid,
    quad: QuadratureSpec | None = None,
    cache_dir=None,
    workers: int = 1,
) -> list:
    """Density reports over a list of parameter points, in grid order.

    Finished points are cached as JSON under ``cache_dir`` (default: $NILGEO_CACHE_DIR)
    keyed by a content hash of (family, xi, quad), so interrupted runs resume.
    """
    quad = quad or QuadratureSpec()
    grid = [tuple(float(v) for v in np.atleast_1d(xi)) for xi in grid]
    cache = Path(cache_dir) if cache_dir is not None else default_cache_dir()
    out: list = [None] * len(grid)
    todo = []
    for i, xi in enumerate(grid):
        path = cache / f"{_cache_key(family, xi, quad)}.json" if cache else None
        if path is not None and path.exists():
            d = json.loads(path.read_text())
            rep = DensityReport.from_dict(d["report"]) if d["report"] is not None else None
            out[i] = FieldPoint(xi, rep, d["error"])
        else:
            todo.append(i)
    args = [(family, grid[i], quad) for i in todo]
    if workers > 1 and len(args) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_point, args))
    else:
        results = [_point(a) for a in args]
    for i, res in zip(todo, results):
        out[i] = res
        if cache is not None:
            cache.mkdir(parents=True, exist_ok=True)
            doc = {"report": res.report.to_dict() if res.report else None, "error": res.error}
            path = cache / f"{_cache_key(family, grid[i], quad)}.json"
            tmp = path.with_suffix(".tmp")
            tmp.write_text(json.dumps(doc, sort_keys=True))
            tmp.replace(path)
    return out


def _num(v) -> str:
    return "nan" if v is None else f"{v:.16e}"


def field_table(points, param_dim: int) -> str:
    """Delimited table: one row per grid point, header row, 17 significant digits."""
    buf = io.StringIO()
    buf.write(f"# {TABLE_FORMAT} nilgeo {__version__}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([f"xi{k + 1}" for k in range(param_dim)] + ["volume", "rel_err", "f_SP", "min_gap", "status"])
    for pt in points:
        rep = pt.report
        w.writerow(
            [_num(v) for v in pt.xi]
            + [_num(rep.volume if rep else None), _num(rep.rel_err if rep else None),
               _num(rep.f_SP if rep else None), _num(rep.min_gap if rep else None)]
            + ["ok" if pt.error is None else pt.error.split(":")[0]]
        )
    return buf.getvalue()


def field_document(points, family_name: str) -> dict:
    return {
        "format": REPORT_FORMAT,
        "version": __version__,
        "family": family_name,
        "points": [
            {"xi": list(pt.xi), "error": pt.error, "report": pt.report.to_dict() if pt.report else None}
            for pt in points
        ],
    }
