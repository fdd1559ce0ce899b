"""Quaternion and skew-quaternion calculus on so(4), and versal coordinates near a
double top eigenvalue.

so(4) splits as Q + Q^ where Q = span(i, j, k) (pure quaternions) and
Q^ = span(i^, j^, k^) (pure skew-quaternions); the two summands commute. Coordinates
are taken with the normalized product (1/4) trace(A'B), for which the six basis
matrices are orthonormal and A = q + q^ has eigenvalue moduli ||q|| +- ||q^||.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, GapTooSmall
from .skew import as_array, eigen_moduli


def _upper(entries):
    m = np.zeros((4, 4))
    for r, c, v in entries:
        m[r, c] = v
        m[c, r] = -v
    m.setflags(write=False)
    return m


QI = _upper([(0, 1, -1), (2, 3, -1)])
QJ = _upper([(0, 2, -1), (1, 3, 1)])
QK = _upper([(0, 3, -1), (1, 2, -1)])
QI_HAT = _upper([(0, 1, -1), (2, 3, 1)])
QJ_HAT = _upper([(0, 2, 1), (1, 3, 1)])
QK_HAT = _upper([(0, 3, -1), (1, 2, 1)])

BASIS_Q = np.array([QI, QJ, QK])
BASIS_QHAT = np.array([QI_HAT, QJ_HAT, QK_HAT])
BASIS_Q.setflags(write=False)
BASIS_QHAT.setflags(write=False)

#: default relative tolerance for the double-eigenvalue test and the versal gap check
DOUBLE_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class QuaternionPair:
    q: np.ndarray  # coordinates on (i, j, k)
    qhat: np.ndarray  # coordinates on (i^, j^, k^)

    def matrix(self) -> np.ndarray:
        return reconstruct(self.q, self.qhat)

    @property
    def norm(self) -> float:
        return math.hypot(float(np.linalg.norm(self.q)), float(np.linalg.norm(self.qhat)))


def reconstruct(q, qhat) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    qhat = np.asarray(qhat, dtype=float)
    return np.tensordot(q, BASIS_Q, axes=1) + np.tensordot(qhat, BASIS_QHAT, axes=1)


def quaternion_split(a) -> QuaternionPair:
    a = as_array(a)
    if a.shape != (4, 4):
        raise DimensionMismatch(f"quaternion_split needs a 4x4 matrix, got {a.shape}")
    q = np.einsum("kij,ij->k", BASIS_Q, a) / 4.0
    qhat = np.einsum("kij,ij->k", BASIS_QHAT, a) / 4.0
    return QuaternionPair(q, qhat)


def eig_moduli_quaternionic(pair: QuaternionPair) -> tuple:
    nq = float(np.linalg.norm(pair.q))
    nh = float(np.linalg.norm(pair.qhat))
    return nq + nh, abs(nq - nh)


def is_double(a, tol: float = DOUBLE_TOL) -> bool:
    """Double top eigenvalue on so(4): A lies (numerically) in Q or in Q^."""
    pair = quaternion_split(a)
    nq = float(np.linalg.norm(pair.q))
    nh = float(np.linalg.norm(pair.qhat))
    return min(nq, nh) <= tol * (1.0 + pair.norm)


# ---------------------------------------------------------------------------
# versal coordinates


@dataclass(frozen=True, eq=False)
class VersalCoordinates:
    """A = frame @ Bd(lam * qhat_unit + q, Delta) @ frame' with q the transversal coordinate."""

    lam: float
    q: np.ndarray
    qhat: np.ndarray
    delta_moduli: np.ndarray
    frame: np.ndarray
    top_block: np.ndarray

    @property
    def q_norm(self) -> float:
        return float(np.linalg.norm(self.q))

    @property
    def top_modulus(self) -> float:
        return self.lam + self.q_norm


def _procrustes(v: np.ndarray, ref: np.ndarray) -> np.ndarray:
    """Orthonormal basis of span(v) closest to ref in the Frobenius norm."""
    u, _, wt = np.linalg.svd(v.T @ ref)
    return v @ (u @ wt)


def versal_extract(a, ref_frame=None, tol: float = DOUBLE_TOL) -> VersalCoordinates:
    """Versal coordinates (lam, q, Delta) of a skew matrix near a double top eigenvalue.

    The top 4-dimensional invariant subspace is aligned with the first four columns of
    ``ref_frame`` (identity by default); passing the previous frame along a path keeps
    the extraction continuous. The orientation is chosen so that the dominant part of
    the 4x4 block lies in Q^, i.e. lam >= ||q||.
    """
    a = as_array(a)
    p = a.shape[0]
    if p < 4:
        raise DimensionMismatch("versal extraction needs p >= 4")
    ref = np.eye(p) if ref_frame is None else np.asarray(ref_frame, dtype=float)
    if ref.shape != (p, p):
        raise DimensionMismatch(f"ref_frame must be {p}x{p}")
    sd = eigen_moduli(a)
    w = sd.moduli
    if w[0] == 0.0:
        raise GapTooSmall("zero matrix has no dominant block")
    third = w[2] if len(w) > 2 else (0.0 if p % 2 else None)
    if third is not None and w[1] - third <= 10.0 * tol * (1.0 + w[0]):
        raise GapTooSmall(f"top two moduli not separated from the third (w2 - w3 = {w[1] - third:.3g})")
    frame = sd.block_frame.copy()
    frame[:, :4] = _procrustes(frame[:, :4], ref[:, :4])
    m4 = frame[:, :4].T @ a @ frame[:, :4]
    pair = quaternion_split(m4)
    if np.linalg.norm(pair.qhat) < np.linalg.norm(pair.q):
        frame[:, 3] *= -1.0
        m4 = frame[:, :4].T @ a @ frame[:, :4]
        pair = quaternion_split(m4)
    lam = float(np.linalg.norm(pair.qhat))
    frame.setflags(write=False)
    return VersalCoordinates(lam, pair.q, pair.qhat, np.array(w[2:]), frame, m4)


@dataclass(frozen=True, eq=False)
class RankReport:
    z: np.ndarray
    jacobian: np.ndarray  # 3 x (param_dim + 1), columns (theta, xi_1, ...)
    singular_values: np.ndarray
    rank: int
    q: np.ndarray

    @property
    def property_r(self) -> bool:
        return self.rank == 3


def versal_q(family, z, ref_frame=None) -> VersalCoordinates:
    """Versal coordinates of the pencil matrix at z = (theta, xi)."""
    from .structure import eval_family

    z = np.asarray(z, dtype=float)
    s = eval_family(family, z[1:])
    return versal_extract(s.pencil_matrix(z[0]), ref_frame)


def versal_rank_check(family, z, h: float = 1e-5, ref_frame=None, rank_rtol: float = 1e-6) -> RankReport:
    """Finite-difference rank of z -> q(z) at a point of the double-eigenvalue stratum."""
    z = np.asarray(z, dtype=float)
    base = versal_q(family, z, ref_frame)
    frame = base.frame
    cols = []
    for k in range(z.size):
        e = np.zeros_like(z)
        e[k] = h
        qp = versal_q(family, z + e, frame).q
        qm = versal_q(family, z - e, frame).q
        cols.append((qp - qm) / (2 * h))
    jac = np.array(cols).T
    sv = np.linalg.svd(jac, compute_uv=False)
    rank = int(np.count_nonzero(sv > rank_rtol * sv[0])) if sv.size and sv[0] > 0 else 0
    return RankReport(z, jac, sv, rank, base.q)
