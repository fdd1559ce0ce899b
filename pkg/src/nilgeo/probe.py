"""Finite-difference diagnostics of the density across resonance sets.

All verdicts are three-valued. A quantity counts as zero when it is below its
propagated error floor, as nonzero when it exceeds ten times that floor, and is
"inconclusive" in between or when the floor is too coarse to decide.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.optimize import minimize

from .density import QuadratureSpec, _BallRule, _fiber_values, _slice
from .geodesic import cut_radius, flow_matrices
from .quadrature import gauss_legendre, sphere_rule
from .quaternion import versal_q
from .skew import multiplicity_at_top
from .structure import CorankTwoStructure, StructureFamily, eval_family

PASS, FAIL, INCONCLUSIVE = "pass", "fail", "inconclusive"
DEFAULT_H_SEQ = (0.04, 0.02, 0.01, 0.005)
#: probe quadrature: more r nodes than the volume default, since differences amplify noise
PROBE_QUAD = QuadratureSpec(r_nodes=32)
#: a floor above this fraction of the derivative scale cannot support a verdict
FLOOR_SCALE_LIMIT = 1e-3


def _split(z):
    z = np.asarray(z, dtype=float)
    return float(z[0]), z[1:]


def cut_at(family: StructureFamily, z) -> float:
    """A(z) = 2 pi / max modulus of the unit pencil at z = (theta, xi)."""
    theta, xi = _split(z)
    return cut_radius(eval_family(family, xi), theta)


def verdict(value: float, floor: float, scale: float) -> str:
    if floor > FLOOR_SCALE_LIMIT * scale:
        return INCONCLUSIVE
    if abs(value) <= floor:
        return PASS
    if abs(value) > 10.0 * floor:
        return FAIL
    return INCONCLUSIVE


def transversal_direction(family: StructureFamily, z0, h: float = 1e-6) -> np.ndarray:
    """Unit direction in z-space along which the versal coordinate q grows fastest."""
    z0 = np.asarray(z0, dtype=float)
    base = versal_q(family, z0)
    cols = []
    for k in range(z0.size):
        e = np.zeros_like(z0)
        e[k] = h
        cols.append((versal_q(family, z0 + e, base.frame).q - versal_q(family, z0 - e, base.frame).q) / (2 * h))
    _, _, vt = np.linalg.svd(np.array(cols).T)
    d = vt[0]
    return d / np.linalg.norm(d) * (1.0 if d[np.argmax(np.abs(d))] > 0 else -1.0)


# ---------------------------------------------------------------------------
# first-derivative formula


@dataclass(frozen=True, eq=False)
class DerivativeCheck:
    z0: np.ndarray
    direction: np.ndarray
    resonant: bool
    f_at_cut: float  # f(z0, A(z0))
    f_floor: float
    grad_a: float  # directional derivative of A (nan at resonance)
    formula: float
    fd_central: np.ndarray  # per h
    fd_left: float  # Richardson one-sided limits
    fd_right: float
    fd_limit: float
    floor: float
    tol: float
    agree: bool


def _ii(family, z0, a0, z, quad, rule, nodes=8):
    """II(z) = int_{A(z0)}^{A(z)} f(z, r) dr and a noise bound."""
    theta, xi = _split(z)
    s = eval_family(family, xi)
    a = cut_radius(s, theta)
    x, w = gauss_legendre(nodes)
    rs = a0 + (a - a0) * x
    f, err, _, _ = _fiber_values(s, theta, rs, rule)
    return (a - a0) * float(w @ f), abs(a - a0) * float(w @ err)


def derivative_formula_check(
    family: StructureFamily,
    z0,
    direction,
    h_seq=(1e-2, 5e-3, 2.5e-3),
    quad: QuadratureSpec | None = None,
) -> DerivativeCheck:
    """Compare the derivative of II(z) = int_{A(z0)}^{A(z)} f(z, r) dr with f(z0, A(z0)) dA."""
    quad = quad or PROBE_QUAD
    z0 = np.asarray(z0, dtype=float)
    d = np.asarray(direction, dtype=float)
    d = d / np.linalg.norm(d)
    theta0, xi0 = _split(z0)
    s0 = eval_family(family, xi0)
    rule = _BallRule(s0.p, quad)
    a0 = cut_radius(s0, theta0)
    fc, fc_err, _, _ = _fiber_values(s0, theta0, [a0], rule)
    f_at_cut, f_floor = float(fc[0]), float(fc_err[0])
    resonant = multiplicity_at_top(s0.pencil_matrix(theta0)) >= 2

    def ii(t):
        return _ii(family, z0, a0, z0 + t * d, quad, rule)

    central, left, right, noise = [], [], [], []
    for h in h_seq:
        (pp, ep), (pm, em) = ii(h), ii(-h)
        (p2, e2), (m2, f2) = ii(2 * h), ii(-2 * h)
        central.append((pp - pm) / (2 * h))
        right.append((4 * pp - p2) / (2 * h))  # II(0) = 0
        left.append((-4 * pm + m2) / (2 * h))
        noise.append((4 * max(ep, em) + max(e2, f2)) / h)

    def richardson(vals):
        return (4 * vals[-1] - vals[-2]) / 3 if len(vals) > 1 else vals[-1]

    fd_limit = richardson(central)
    extrap = abs(fd_limit - richardson(central[:-1])) if len(central) > 2 else abs(central[-1] - central[-2])
    floor = noise[-1] + extrap
    if resonant:
        grad_a = math.nan
        formula = 0.0
    else:
        ha = 1e-5
        grad_a = (cut_at(family, z0 + ha * d) - cut_at(family, z0 - ha * d)) / (2 * ha)
        formula = f_at_cut * grad_a
    tol = max(1e-4 * max(1.0, abs(formula)), 10.0 * floor)
    agree = abs(fd_limit - formula) <= tol
    if resonant:
        agree = agree and abs(f_at_cut) <= max(f_floor, 1e-12)
    return DerivativeCheck(
        z0, d, resonant, f_at_cut, f_floor, grad_a, formula, np.array(central),
        richardson(left), richardson(right), fd_limit, floor, tol, bool(agree),
    )


# ---------------------------------------------------------------------------
# Lipschitz constant of the cut radius


@dataclass(frozen=True)
class LipschitzReport:
    estimate: float
    estimate_half: float  # with half the samples
    growth: float  # estimate / estimate_half - 1
    samples: int

    @property
    def stable(self) -> bool:
        return self.growth < 0.05


def _grad_norm(family, z, box, h=1e-7):
    z = np.clip(z, box[:, 0], box[:, 1])
    g = np.empty(z.size)
    for k in range(z.size):
        e = np.zeros_like(z)
        e[k] = h
        g[k] = (cut_at(family, z + e) - cut_at(family, z - e)) / (2 * h)
    return float(np.linalg.norm(g))


def _lipschitz_estimate(family, zs, quot, box, polish):
    best = float(quot.max())
    for i in np.argsort(quot)[::-1][:polish]:
        res = minimize(
            lambda v: -_grad_norm(family, v, box), zs[i], method="Nelder-Mead",
            options={"xatol": 1e-6, "fatol": 1e-10, "maxiter": 400},
        )
        best = max(best, -float(res.fun))
    return best


def lipschitz_check(
    family: StructureFamily, region, samples: int = 2000, seed: int = 0, polish: int = 4
) -> LipschitzReport:
    """Lipschitz constant of A(z) on a box, from random close pairs plus local polishing.

    ``region`` lists (lo, hi) for theta and each xi. Pair offsets are log-uniform in
    [1e-5, 1e-2] times the box diameter, so kinks of A are resolved; the best
    ``polish`` pairs seed a local maximization of |grad A|. The same procedure on
    the first half of the samples gives the stability figure.
    """
    box = np.asarray(region, dtype=float)
    if box.shape != (family.param_dim + 1, 2):
        raise ValueError(f"region must be {family.param_dim + 1} (lo, hi) pairs")
    rng = np.random.default_rng(seed)
    diam = float(np.linalg.norm(box[:, 1] - box[:, 0]))
    zs = box[:, 0] + rng.random((samples, len(box))) * (box[:, 1] - box[:, 0])
    quot = np.empty(samples)
    for k in range(samples):
        u = rng.normal(size=len(box))
        u /= np.linalg.norm(u)
        dz = 10.0 ** rng.uniform(-5, -2) * diam * u
        quot[k] = abs(cut_at(family, zs[k] + dz) - cut_at(family, zs[k])) / np.linalg.norm(dz)
    est = _lipschitz_estimate(family, zs, quot, box, polish)
    half = _lipschitz_estimate(family, zs[: samples // 2], quot[: samples // 2], box, polish)
    est = max(est, half)
    return LipschitzReport(est, half, est / half - 1.0, samples)


# ---------------------------------------------------------------------------
# quadratic vanishing of f at the cut


@dataclass(frozen=True, eq=False)
class VanishingReport:
    z_res: np.ndarray
    rays: np.ndarray
    q_norms: np.ndarray  # (rays, h)
    f_values: np.ndarray  # f(z, A(z))
    j_values: np.ndarray  # max |J| at the cut over sphere nodes
    f_exponent: float  # shared log-log slope, one intercept per ray
    j_exponent: float
    ray_exponents: np.ndarray  # per-ray slopes of log f
    f_r2: float  # within-ray coefficient of determination
    vanishing: bool  # fit accepted: values shrink with ||q||

    @property
    def exponent_ok(self) -> bool:
        return self.vanishing and 1.9 <= self.f_exponent <= 2.5

    @property
    def at_least_quadratic(self) -> bool:
        return self.vanishing and bool(np.all(self.ray_exponents >= 1.9))


def _fit(x, y):
    """Common slope of log|y| against log x over rows, each row with its own intercept."""
    lx, ly = np.log(np.atleast_2d(x)), np.log(np.abs(np.atleast_2d(y)))
    cx = lx - lx.mean(axis=1, keepdims=True)
    cy = ly - ly.mean(axis=1, keepdims=True)
    slope = float((cx * cy).sum() / (cx * cx).sum())
    ss = (cy * cy).sum()
    r2 = 1.0 - float(((cy - slope * cx) ** 2).sum() / ss) if ss > 0 else 0.0
    rows = (cx * cy).sum(axis=1) / (cx * cx).sum(axis=1)
    return slope, r2, rows


def quadratic_vanishing_check(
    family: StructureFamily,
    z_res,
    rays=None,
    h_seq=(0.05, 0.02, 0.01, 0.005, 0.002, 0.001),
    quad: QuadratureSpec | None = None,
    seed: int = 0,
) -> VanishingReport:
    """Fit log f(z, A(z)) against log ||q(z)|| along rays from z_res.

    ``rays`` is an array of directions in z-space or a count of seeded random
    directions (default 3); a random direction is transversal to the stratum with
    probability one.
    """
    quad = quad or PROBE_QUAD
    z_res = np.asarray(z_res, dtype=float)
    if rays is None or isinstance(rays, (int, np.integer)):
        rng = np.random.default_rng(seed)
        rays = rng.normal(size=(3 if rays is None else int(rays), z_res.size))
    rays = np.atleast_2d(np.asarray(rays, dtype=float))
    rays = rays / np.linalg.norm(rays, axis=1, keepdims=True)
    ref = versal_q(family, z_res).frame
    p = family.p
    rule = _BallRule(p, quad)
    sx, _ = sphere_rule(p, 5)
    qn = np.empty((len(rays), len(h_seq)))
    fv = np.empty_like(qn)
    jv = np.empty_like(qn)
    for i, d in enumerate(rays):
        for k, h in enumerate(h_seq):
            z = z_res + h * d
            theta, xi = _split(z)
            s = eval_family(family, xi)
            qn[i, k] = versal_q(family, z, ref).q_norm
            a = cut_radius(s, theta)
            f, _, _, _ = _fiber_values(s, theta, [a], rule)
            fv[i, k] = f[0]
            jv[i, k] = np.abs(flow_matrices(s, theta, a).jacobian_det(sx)).max()
    fexp, r2, rows = _fit(qn, fv)
    jexp, _, _ = _fit(qn, jv)
    # accept only a clean power law that actually shrinks toward the stratum
    shrinks = bool(np.all(qn[:, -1] <= 0.1 * qn[:, 0]))
    vanishing = bool(shrinks and r2 > 0.99 and fexp > 0.5)
    return VanishingReport(z_res, rays, qn, fv, jv, fexp, jexp, rows, r2, vanishing)


# ---------------------------------------------------------------------------
# rank drop at the cut


@dataclass(frozen=True)
class RankDropReport:
    theta: float
    r: float
    samples: int
    worst_second_ratio: float  # max over px0 of sigma_{p+1} / sigma_max
    worst_det_ratio: float  # max over px0 of |J| / sigma_max^(p+2)
    min_small_count: int  # min over px0 of #{sigma <= rtol sigma_max}
    rtol: float

    @property
    def drops_by_two(self) -> bool:
        return self.min_small_count >= 2 and self.worst_det_ratio <= 1e-6


def rank_drop_check(
    s: CorankTwoStructure, theta_res: float, px0_samples, r: float | None = None, rtol: float = 1e-5
) -> RankDropReport:
    """Singular values of the exponential-map derivative at the cut for each px0."""
    r = cut_radius(s, theta_res) if r is None else r
    px0 = np.atleast_2d(np.asarray(px0_samples, dtype=float))
    jm = flow_matrices(s, theta_res, r).jacobian(px0)
    sv = np.linalg.svd(jm, compute_uv=False)
    det = np.abs(np.linalg.det(jm))
    top = sv[:, 0]
    return RankDropReport(
        float(theta_res),
        float(r),
        len(px0),
        float((sv[:, -2] / top).max()),
        float((det / top ** sv.shape[1]).max()),
        int((sv <= rtol * top[:, None]).sum(axis=1).min()),
        rtol,
    )


# ---------------------------------------------------------------------------
# regularity scan


@dataclass(frozen=True, eq=False)
class CrossingPath:
    z0: np.ndarray
    direction: np.ndarray

    def at(self, t: float) -> np.ndarray:
        return np.asarray(self.z0, dtype=float) + t * np.asarray(self.direction, dtype=float)


@dataclass(frozen=True, eq=False)
class RegularityReport:
    path: CrossingPath
    quantity: str
    ts: np.ndarray
    values: np.ndarray
    errors: np.ndarray
    step_sequence: np.ndarray
    d1_left: np.ndarray
    d1_right: np.ndarray
    d2_left: np.ndarray
    d2_right: np.ndarray
    c1_limit: float  # extrapolated signed defect d1_left - d1_right
    c2_limit: float
    c1_floor: float
    c2_floor: float
    verdict_c1: str
    verdict_c2: str

    @property
    def c1_defect(self) -> np.ndarray:
        return np.abs(self.d1_left - self.d1_right)

    @property
    def c2_defect(self) -> np.ndarray:
        return np.abs(self.d2_left - self.d2_right)

    def monotone(self, which: str = "c1") -> bool:
        """Defects shrink along the step sequence, up to the floor."""
        d = self.c1_defect if which == "c1" else self.c2_defect
        floor = self.c1_floor if which == "c1" else self.c2_floor
        return bool(np.all((np.diff(d) <= 0) | (d[1:] <= floor)))


def path_slice_function(family: StructureFamily, path: CrossingPath, quad: QuadratureSpec, quantity: str = "W"):
    """t -> (value, error) of W(theta, xi) or f_SP(xi) along a path."""
    from .density import ball_volume

    def g(t):
        theta, xi = _split(path.at(t))
        s = eval_family(family, xi)
        if quantity == "W":
            sl = _slice(s, theta, quad)
            return sl.value, sl.err
        if quantity == "f_SP":
            rep = ball_volume(s, quad)
            return rep.f_SP, rep.f_SP * rep.rel_err
        raise ValueError(f"unknown quantity {quantity!r}")

    return g


@dataclass(frozen=True)
class SyntheticKinkModel:
    """W along a path with a kink injected into the upper limit A.

    order 1 adds kappa |t|, order 2 adds kappa t |t|. Away from resonance
    f(z0, A(z0)) != 0, so the one-sided first (order 1) or second (order 2)
    derivatives jump by a known amount: a C^1 or C^2 failure of known size.
    """

    family: StructureFamily
    z0: tuple
    direction: tuple
    kappa: float = 0.2
    order: int = 1
    quad: QuadratureSpec = PROBE_QUAD

    def kink(self, t: float) -> float:
        return self.kappa * abs(t) * (1.0 if self.order == 1 else t)

    @property
    def path(self) -> CrossingPath:
        return CrossingPath(np.asarray(self.z0, dtype=float), np.asarray(self.direction, dtype=float))

    def __call__(self, t):
        theta, xi = _split(self.path.at(t))
        s = eval_family(self.family, xi)
        a = cut_radius(s, theta) + self.kink(t)
        x, w = gauss_legendre(self.quad.r_nodes)
        rule = _BallRule(s.p, self.quad)
        f, err, _, _ = _fiber_values(s, theta, a * x, rule)
        return a * float(w @ f), a * float(w @ err) + 1e-15

    def expected_defect(self) -> float:
        """Exact left-minus-right jump of the derivative of order ``order``."""
        theta, xi = _split(self.path.z0)
        s = eval_family(self.family, xi)
        f, _, _, _ = _fiber_values(s, theta, [cut_radius(s, theta)], _BallRule(s.p, self.quad))
        return -2.0 * self.order * self.kappa * float(f[0])


def _richardson2(vals, hs):
    """Extrapolate vals(h) = D + c h^2 to h = 0 from the last two steps, with uncertainty."""
    def pair(i):
        ratio = (hs[i] / hs[i - 1]) ** 2
        return (vals[i] - ratio * vals[i - 1]) / (1 - ratio)

    last = pair(len(vals) - 1)
    unc = abs(last - pair(len(vals) - 2)) if len(vals) > 2 else abs(vals[-1] - vals[-2])
    return last, unc


def regularity_scan(
    target,
    path: CrossingPath | None = None,
    quad: QuadratureSpec | None = None,
    h_seq=DEFAULT_H_SEQ,
    quantity: str = "W",
) -> RegularityReport:
    """One-sided difference matching of a quantity across a resonance crossing.

    ``target`` is a StructureFamily (evaluated along ``path``) or a callable
    t -> (value, error) such as SyntheticKinkModel.
    """
    quad = quad or PROBE_QUAD
    h_seq = np.asarray(h_seq, dtype=float)
    if h_seq.size < 3 or np.any(np.diff(h_seq) >= 0) or np.any(h_seq <= 0):
        raise ValueError("h_seq needs at least three strictly decreasing positive steps")
    if isinstance(target, StructureFamily):
        if path is None:
            raise ValueError("a family needs a crossing path")
        g: Callable = path_slice_function(target, path, quad, quantity)
    else:
        g = target
        path = path or getattr(target, "path", CrossingPath(np.zeros(1), np.ones(1)))
        quantity = getattr(target, "quantity", type(target).__name__)
    cache: dict = {}

    def val(t):
        key = float(t)
        if key not in cache:
            cache[key] = g(key)
        return cache[key]

    d1l, d1r, d2l, d2r, n1, n2 = [], [], [], [], [], []
    for h in h_seq:
        w0, e0 = val(0.0)
        right = [val(k * h) for k in (1, 2, 3)]
        left = [val(-k * h) for k in (1, 2, 3)]
        wr, er = [w0] + [v for v, _ in right], [e0] + [e for _, e in right]
        wl, el = [w0] + [v for v, _ in left], [e0] + [e for _, e in left]
        d1r.append((-3 * wr[0] + 4 * wr[1] - wr[2]) / (2 * h))
        d1l.append((3 * wl[0] - 4 * wl[1] + wl[2]) / (2 * h))
        d2r.append((2 * wr[0] - 5 * wr[1] + 4 * wr[2] - wr[3]) / h**2)
        d2l.append((2 * wl[0] - 5 * wl[1] + 4 * wl[2] - wl[3]) / h**2)
        eps = max(er + el)
        n1.append(8 * eps / h)
        n2.append(24 * eps / h**2)
    d1l, d1r, d2l, d2r = map(np.array, (d1l, d1r, d2l, d2r))
    c1, u1 = _richardson2(d1l - d1r, h_seq)
    c2, u2 = _richardson2(d2l - d2r, h_seq)
    ratio = (h_seq[-1] / h_seq[-2]) ** 2
    amp = (1 + ratio) / (1 - ratio)
    f1 = amp * n1[-1] + u1
    f2 = amp * n2[-1] + u2
    w0 = abs(val(0.0)[0])
    s1 = max(abs(d1l[-1]), abs(d1r[-1]), w0)
    s2 = max(abs(d2l[-1]), abs(d2r[-1]), w0)
    ts = np.array(sorted(cache))
    return RegularityReport(
        path, quantity, ts, np.array([cache[t][0] for t in ts]), np.array([cache[t][1] for t in ts]),
        h_seq, d1l, d1r, d2l, d2r, float(c1), float(c2), float(f1), float(f2),
        verdict(c1, f1, s1), verdict(c2, f2, s2),
    )


def report_dict(rep) -> dict:
    """Plain-data view of any probe report, for structured output."""
    out = {}
    for f in dataclasses.fields(rep):
        v = getattr(rep, f.name)
        if isinstance(v, CrossingPath):
            v = {"z0": np.asarray(v.z0).tolist(), "direction": np.asarray(v.direction).tolist()}
        elif isinstance(v, np.ndarray):
            v = v.tolist()
        out[f.name] = v
    return out
