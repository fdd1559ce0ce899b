"""Geodesics, exponential map and its Jacobian for the nilpotent approximation.

Frame convention: F_i = d/dx_i + 1/2 sum_j (x' L_j e_i) d/dy_j, so that
[F_k, F_l] = sum_j (L_j)_kl d/dy_j and H = 1/2 ||u||^2 with u = p^x - 1/2 B x,
B = p^y_1 L1 + p^y_2 L2. Along the flow u' = -B u, x' = u, y_j' = 1/2 x' L_j u,
and p^y is constant. With p^y = r (cos theta, sin theta) the cut time of an
arclength geodesic is 2 pi / max modulus(B).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy.integrate import quad_vec, solve_ivp

from .skew import eigen_moduli, max_modulus, multiplicity_at_top
from .structure import CorankTwoStructure, pencil

TWO_PI = 2.0 * math.pi
Y_QUAD_EPSABS = 1e-11
SERIES_SWITCH = 1e-4


@dataclass(frozen=True, eq=False)
class Covector:
    """Initial covector (p^x(0), r cos theta, r sin theta)."""

    px0: np.ndarray
    theta: float
    r: float

    def __post_init__(self):
        object.__setattr__(self, "px0", np.asarray(self.px0, dtype=float).reshape(-1))
        if self.r < 0:
            raise ValueError("r must be nonnegative")

    @property
    def py(self) -> np.ndarray:
        return np.array([self.r * math.cos(self.theta), self.r * math.sin(self.theta)])

    def scaled(self, t: float) -> "Covector":
        return Covector(t * self.px0, self.theta, t * self.r)


@dataclass(frozen=True, eq=False)
class GeodesicState:
    t: float
    x: np.ndarray
    y: np.ndarray
    u: np.ndarray
    py: np.ndarray

    @property
    def point(self) -> np.ndarray:
        return np.concatenate([self.x, self.y])


def _block_flow(s: CorankTwoStructure, c: Covector, times):
    """Closed-form u(t), x(t) in the real normal frame of B; returns arrays (T, p)."""
    times = np.atleast_1d(np.asarray(times, dtype=float))
    b = pencil(s, c.theta, c.r).matrix
    sd = eigen_moduli(b)
    g = sd.block_frame
    w = g.T @ c.px0
    p = s.p
    ub = np.empty((times.size, p))
    xb = np.empty((times.size, p))
    for k, om in enumerate(sd.moduli):
        w0, w1 = w[2 * k], w[2 * k + 1]
        phi = om * times
        cs, sn = np.cos(phi), np.sin(phi)
        small = np.abs(phi) < SERIES_SWITCH
        with np.errstate(divide="ignore", invalid="ignore"):
            sc = np.where(small, times * (1 - phi**2 / 6 + phi**4 / 120), sn / np.where(om > 0, om, 1.0))
            cc = np.where(small, times * (phi / 2 - phi**3 / 24 + phi**5 / 720), (1 - cs) / np.where(om > 0, om, 1.0))
        ub[:, 2 * k] = cs * w0 + sn * w1
        ub[:, 2 * k + 1] = -sn * w0 + cs * w1
        xb[:, 2 * k] = sc * w0 + cc * w1
        xb[:, 2 * k + 1] = sc * w1 - cc * w0
    if p % 2:
        ub[:, -1] = w[-1]
        xb[:, -1] = times * w[-1]
    return ub @ g.T, xb @ g.T


def geodesic(s: CorankTwoStructure, c: Covector, t: float) -> GeodesicState:
    """State at time t of the geodesic with initial covector c, starting at the origin."""
    t = float(t)
    u, x = _block_flow(s, c, t)
    if t == 0.0:
        y = np.zeros(2)
    else:
        lmats = np.array([s.L1, s.L2])

        def integrand(tau):
            uu, xx = _block_flow(s, c, tau)
            return 0.5 * np.einsum("i,jik,k->j", xx[0], lmats, uu[0])

        y, _ = quad_vec(integrand, 0.0, t, epsabs=Y_QUAD_EPSABS, epsrel=1e-14, norm="max", limit=400)
    return GeodesicState(t, x[0], np.asarray(y), u[0], c.py)


def hamiltonian_flow(s: CorankTwoStructure, c: Covector, t: float, rtol=1e-13, atol=1e-14) -> GeodesicState:
    """Reference solution: Hamilton's equations in (x, y, p^x) integrated with DOP853."""
    p = s.p
    b = pencil(s, c.theta, c.r).matrix
    l1, l2 = s.L1, s.L2

    def rhs(_, z):
        x, px = z[:p], z[p + 2:]
        u = px - 0.5 * b @ x
        return np.concatenate([u, [0.5 * x @ l1 @ u, 0.5 * x @ l2 @ u], -0.5 * b @ u])

    z0 = np.concatenate([np.zeros(p + 2), c.px0])
    sol = solve_ivp(rhs, (0.0, t), z0, method="DOP853", rtol=rtol, atol=atol)
    z = sol.y[:, -1]
    x, px = z[:p], z[p + 2:]
    return GeodesicState(t, x, z[p:p + 2], px - 0.5 * b @ x, c.py)


def exp_map(s: CorankTwoStructure, c: Covector) -> np.ndarray:
    """E_1(p^x_0, r cos theta, r sin theta) as the point (x, y) in R^(p+2)."""
    return geodesic(s, c, 1.0).point


def cut_time(s: CorankTwoStructure, theta: float, r: float = 1.0) -> float:
    w = max_modulus(pencil(s, theta, r).matrix)
    assert w > 0.0, "pencil vanished; the pair must be independent"
    return TWO_PI / w


def cut_radius(s: CorankTwoStructure, theta: float) -> float:
    """A(theta) = cut_time(s, theta, 1): the r-extent of the unit-ball domain."""
    return cut_time(s, theta, 1.0)


def cut_is_conjugate(s: CorankTwoStructure, theta: float, r: float = 1.0, tol: float | None = None) -> bool:
    b = pencil(s, theta, r).matrix
    if multiplicity_at_top(b, tol) >= 2:
        return True
    ctol = 1e-8 if tol is None else tol
    return s.commutator_norm() <= ctol


# ---------------------------------------------------------------------------
# flow matrices: x(1) = Phi px0, y_j(1) = 1/2 px0' M_j px0, and their r / theta derivatives


def _bilinear_integral(k: np.ndarray, c: np.ndarray, t: float) -> np.ndarray:
    """int_0^t exp(sK)' C exp(sK) ds via the block exponential of [[-K', C], [0, K]].

    Works on stacks: k and c may carry leading batch dimensions.
    """
    n = k.shape[-1]
    big = np.zeros(k.shape[:-2] + (2 * n, 2 * n))
    big[..., :n, :n] = -np.swapaxes(k, -1, -2)
    big[..., :n, n:] = c
    big[..., n:, n:] = k
    f = scipy.linalg.expm(t * big)
    return np.swapaxes(f[..., n:, n:], -1, -2) @ f[..., :n, n:]


@dataclass(frozen=True, eq=False)
class FlowMatrices:
    theta: float
    r: float
    t: float
    phi: np.ndarray  # x(t) = phi @ px0
    phi_r: np.ndarray
    phi_theta: np.ndarray
    m: np.ndarray  # (2, p, p): y_j = 1/2 px0' m_j px0
    m_r: np.ndarray
    m_theta: np.ndarray

    @property
    def p(self) -> int:
        return self.phi.shape[0]

    def endpoint(self, px0) -> np.ndarray:
        px0 = np.atleast_2d(px0)
        x = px0 @ self.phi.T
        y = 0.5 * np.einsum("ni,jik,nk->nj", px0, self.m, px0)
        return np.hstack([x, y])

    def jacobian(self, px0) -> np.ndarray:
        """Derivative of (x, y) w.r.t. (px0, r, theta); shape (N, p+2, p+2)."""
        px0 = np.atleast_2d(px0)
        n, p = px0.shape
        jm = np.empty((n, p + 2, p + 2))
        jm[:, :p, :p] = self.phi
        jm[:, :p, p] = px0 @ self.phi_r.T
        jm[:, :p, p + 1] = px0 @ self.phi_theta.T
        sym = 0.5 * (self.m + self.m.transpose(0, 2, 1))
        jm[:, p:, :p] = np.einsum("jik,nk->nji", sym, px0)
        jm[:, p:, p] = 0.5 * np.einsum("ni,jik,nk->nj", px0, self.m_r, px0)
        jm[:, p:, p + 1] = 0.5 * np.einsum("ni,jik,nk->nj", px0, self.m_theta, px0)
        return jm

    def jacobian_det(self, px0) -> np.ndarray:
        return np.linalg.det(self.jacobian(px0))


def flow_matrices_batch(s: CorankTwoStructure, theta: float, rs, t: float = 1.0) -> list:
    """Exact flow and variational matrices at (theta, r) for every r in ``rs``.

    The linear variational system for (E, Phi, E_a, Phi_a) with E = exp(-sB),
    Phi = int E, E_a' = -B E_a - B_a E (a = r or theta) is exponentiated exactly;
    the quadratic y-parts are bilinear integrals of that state.
    """
    p = s.p
    rs = np.atleast_1d(np.asarray(rs, dtype=float))
    nb = rs.size
    ct, st = math.cos(theta), math.sin(theta)
    bh = ct * s.L1 + st * s.L2
    bt = -st * s.L1 + ct * s.L2
    b = rs[:, None, None] * bh
    eye = np.eye(p)
    out = {}
    lmats = (s.L1, s.L2)
    for name, b_a in (("r", np.broadcast_to(bh, b.shape)), ("theta", rs[:, None, None] * bt)):
        k = np.zeros((nb, 4 * p, 4 * p))
        k[:, :p, :p] = -b
        k[:, p:2 * p, :p] = eye
        k[:, 2 * p:3 * p, :p] = -b_a
        k[:, 2 * p:3 * p, 2 * p:3 * p] = -b
        k[:, 3 * p:, 2 * p:3 * p] = eye
        z = scipy.linalg.expm(t * k)[:, :, :p]
        out["phi"] = z[:, p:2 * p]
        out["phi_" + name] = z[:, 3 * p:]
        c = np.zeros((4, nb, 4 * p, 4 * p))
        for j, lj in enumerate(lmats):
            c[j, :, p:2 * p, :p] = lj  # Phi' L E
            c[2 + j, :, 3 * p:, :p] = lj  # Phi_a' L E
            c[2 + j, :, p:2 * p, 2 * p:3 * p] = lj  # Phi' L E_a
        integral = _bilinear_integral(np.broadcast_to(k, c.shape), c, t)[:, :, :p, :p]
        out["m"] = np.swapaxes(integral[:2], 0, 1)
        out["m_" + name] = np.swapaxes(integral[2:], 0, 1)
    return [
        FlowMatrices(float(theta), float(r), float(t), **{key: val[i] for key, val in out.items()})
        for i, r in enumerate(rs)
    ]


def flow_matrices(s: CorankTwoStructure, theta: float, r: float, t: float = 1.0) -> FlowMatrices:
    return flow_matrices_batch(s, theta, [r], t)[0]


@dataclass(frozen=True, eq=False)
class JacobianResult:
    det: float
    singular_values: np.ndarray
    matrix: np.ndarray

    @property
    def scale(self) -> float:
        """sigma_max ** (p + 2), the natural size of the determinant."""
        return float(self.singular_values[0]) ** len(self.singular_values)

    def small_count(self, rtol: float = 1e-5) -> int:
        return int(np.count_nonzero(self.singular_values <= rtol * self.singular_values[0]))


def _fd_jacobian(s: CorankTwoStructure, c: Covector, step: float) -> np.ndarray:
    p = s.p
    v = np.concatenate([c.px0, [c.r, c.theta]])

    def emap(vv):
        return exp_map(s, Covector(vv[:p], vv[p + 1], vv[p]))

    cols = []
    for k in range(p + 2):
        h = step * max(1.0, abs(v[k]))
        e = np.zeros_like(v)
        e[k] = 1.0

        def central(hh):
            return (emap(v + hh * e) - emap(v - hh * e)) / (2 * hh)

        d1, d2 = central(h), central(h / 2)
        cols.append((4 * d2 - d1) / 3)
    return np.array(cols).T


def exp_jacobian(s: CorankTwoStructure, c: Covector, method: str = "variational", fd_step: float = 1e-3) -> JacobianResult:
    """Jacobian of (px0, r, theta) -> E_1 and its determinant J.

    ``method="fd"`` differentiates the quadrature-based exponential map by Richardson
    central differences and is kept as an independent cross-check.
    """
    if method == "variational":
        jm = flow_matrices(s, c.theta, c.r).jacobian(c.px0)[0]
    elif method == "fd":
        jm = _fd_jacobian(s, c, fd_step)
    else:
        raise ValueError(f"unknown method {method!r}")
    sv = np.linalg.svd(jm, compute_uv=False)
    return JacobianResult(float(np.linalg.det(jm)), sv, jm)
