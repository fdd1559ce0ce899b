"""Spectral and algebraic primitives for real skew-symmetric matrices.

A real skew matrix A of size p has eigenvalues +-i*w_k. Everything here works
with the nonnegative moduli w_k and with the real normal form

    G' A G = Bd(w_1 J, ..., w_m J [, 0]),   J = [[0, -1], [1, 0]],

obtained from the real Schur decomposition, so no complex arithmetic is needed.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np
import scipy.linalg

from .errors import DimensionMismatch, NotSkewSymmetric

#: relative tolerance used to group equal moduli: tol = MULTIPLICITY_RTOL * (1 + w_max)
MULTIPLICITY_RTOL = 1e-8
#: relative singular-value threshold for the commutator nullity
NULLITY_RTOL = 1e-8
#: construction tolerance for antisymmetry, relative to max(1, max|A|)
SKEW_TOL = 1e-12

J2 = np.array([[0.0, -1.0], [1.0, 0.0]])
J2.setflags(write=False)


class SkewMatrix:
    """Immutable real antisymmetric p x p matrix.

    Input is checked to ``SKEW_TOL`` and then exactly antisymmetrized.
    """

    __slots__ = ("_a",)

    def __init__(self, entries):
        if isinstance(entries, SkewMatrix):
            self._a = entries._a
            return
        a = np.array(entries, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise NotSkewSymmetric(f"expected a square matrix, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise NotSkewSymmetric("matrix has non-finite entries")
        scale = max(1.0, float(np.abs(a).max(initial=0.0)))
        asym = float(np.abs(a + a.T).max(initial=0.0))
        if asym > SKEW_TOL * scale:
            raise NotSkewSymmetric(f"matrix is not antisymmetric (|A + A'| = {asym:.3g})")
        a = 0.5 * (a - a.T)
        a.setflags(write=False)
        self._a = a

    @property
    def entries(self) -> np.ndarray:
        return self._a

    @property
    def dim(self) -> int:
        return self._a.shape[0]

    def __array__(self, dtype=None, copy=None):
        return self._a if dtype is None else self._a.astype(dtype)

    def __repr__(self):
        return f"SkewMatrix(dim={self.dim})"

    def __eq__(self, other):
        return isinstance(other, SkewMatrix) and np.array_equal(self._a, other._a)

    def __hash__(self):
        return hash(self._a.tobytes())


def as_array(a) -> np.ndarray:
    """Validated float array view of a skew matrix (accepts SkewMatrix or array-like)."""
    return SkewMatrix(a).entries


def block_diag_skew(*moduli) -> np.ndarray:
    """Bd(w_1 J, ..., w_m J); a trailing ``None`` appends a 1x1 zero block."""
    blocks = [np.zeros((1, 1)) if w is None else w * J2 for w in moduli]
    return scipy.linalg.block_diag(*blocks)


@dataclass(frozen=True)
class SpectralData:
    moduli: np.ndarray  # nonincreasing, length p // 2
    multiplicities: tuple
    block_frame: np.ndarray  # orthogonal G with G' A G block diagonal
    gap: float  # smallest difference between distinct moduli (inf if all equal)
    tol: float

    @property
    def top_gap(self) -> float:
        """w_1 - w_2 (0 for p < 4)."""
        return float(self.moduli[0] - self.moduli[1]) if len(self.moduli) > 1 else math.inf


def _default_tol(w_max: float) -> float:
    return MULTIPLICITY_RTOL * (1.0 + w_max)


def _group(moduli: np.ndarray, tol: float) -> tuple:
    if len(moduli) == 0:
        return ()
    counts = [1]
    for a, b in zip(moduli[:-1], moduli[1:]):
        if a - b <= tol:
            counts[-1] += 1
        else:
            counts.append(1)
    return tuple(counts)


def _real_normal_form(a: np.ndarray):
    p = a.shape[0]
    t, z = scipy.linalg.schur(a, output="real")
    blocks = []  # (modulus, column indices)
    singles = []
    k = 0
    while k < p:
        if k + 1 < p and t[k + 1, k] != 0.0:
            b, c = t[k, k + 1], t[k + 1, k]
            w = math.sqrt(abs(b * c))
            cols = (k, k + 1) if c > 0 else (k + 1, k)
            blocks.append((w, cols))
            k += 2
        else:
            singles.append(k)
            k += 1
    # zero eigenvalues come as 1x1 blocks; pair them into w = 0 blocks
    for i in range(0, len(singles) - 1, 2):
        blocks.append((0.0, (singles[i], singles[i + 1])))
    leftover = [singles[-1]] if len(singles) % 2 else []
    order = sorted(range(len(blocks)), key=lambda i: -blocks[i][0])
    cols = [c for i in order for c in blocks[i][1]] + leftover
    moduli = np.array([blocks[i][0] for i in order])
    return moduli, np.ascontiguousarray(z[:, cols])


def eigen_moduli(a, tol: float | None = None) -> SpectralData:
    """Eigenvalue moduli, multiplicity groups and a real block frame of a skew matrix."""
    a = as_array(a)
    moduli, frame = _real_normal_form(a)
    w_max = float(moduli[0]) if len(moduli) else 0.0
    tol = _default_tol(w_max) if tol is None else tol
    mult = _group(moduli, tol)
    reps = np.cumsum((0,) + mult)[:-1]
    if len(mult) > 1:
        ends = np.cumsum(mult) - 1
        gap = float(min(moduli[ends[i]] - moduli[reps[i + 1]] for i in range(len(mult) - 1)))
    else:
        gap = math.inf
    moduli.setflags(write=False)
    frame.setflags(write=False)
    return SpectralData(moduli, mult, frame, gap, tol)


def max_modulus(a) -> float:
    sd = eigen_moduli(a)
    return float(sd.moduli[0]) if len(sd.moduli) else 0.0


def hs_inner(a, b, p: int | None = None) -> float:
    """Hilbert-Schmidt product (1/p) trace(A'B)."""
    a, b = as_array(a), as_array(b)
    if a.shape != b.shape:
        raise DimensionMismatch(f"dimension mismatch: {a.shape} vs {b.shape}")
    p = a.shape[0] if p is None else p
    return float(np.sum(a * b)) / p


def multiplicity_at_top(a, tol: float | None = None) -> int:
    sd = eigen_moduli(a)
    if len(sd.moduli) == 0:
        return 0
    tol = sd.tol if tol is None else tol
    return int(np.count_nonzero(sd.moduli >= sd.moduli[0] - tol))


def skew_basis(m: int) -> np.ndarray:
    """Basis E_ab = e_a e_b' - e_b e_a' (a < b) of so(m), shape (m(m-1)/2, m, m)."""
    pairs = list(combinations(range(m), 2))
    basis = np.zeros((len(pairs), m, m))
    for n, (i, j) in enumerate(pairs):
        basis[n, i, j] = -1.0
        basis[n, j, i] = 1.0
    return basis


def commutator_singular_values(d) -> np.ndarray:
    """Singular values of X -> XD - DX restricted to so(dim)."""
    d = as_array(d)
    basis = skew_basis(d.shape[0])
    images = basis @ d - d @ basis
    op = images.reshape(len(basis), -1).T
    return np.linalg.svd(op, compute_uv=False)


def centralizer_dimension(d, rtol: float = NULLITY_RTOL) -> int:
    """dim {X in so(p) : [X, D] = 0}, as the numerical nullity of ad_D."""
    d = as_array(d)
    m = d.shape[0] * (d.shape[0] - 1) // 2
    sv = commutator_singular_values(d)
    if sv.size == 0 or sv[0] == 0.0:
        return m
    rank = int(np.count_nonzero(sv > rtol * sv[0]))
    return m - rank


# generic, pairwise distinct block moduli for the model matrices
_GENERIC_MODULI = tuple(math.sqrt(q) for q in (2, 3, 5, 7, 11, 13, 17, 19))


def model_matrix(n: int, kind: str) -> np.ndarray:
    """Block-diagonal element of so(2n) with a generic, double or triple top modulus."""
    repeat = {"generic": 1, "double": 2, "triple": 3}[kind]
    if n < repeat:
        raise ValueError(f"{kind} model needs n >= {repeat}")
    alpha = _GENERIC_MODULI[-1] + 1.0
    moduli = [alpha] * repeat + list(_GENERIC_MODULI[: n - repeat])
    return block_diag_skew(*moduli)


@dataclass(frozen=True)
class OrbitLine:
    kind: str
    n: int
    so_dim: int
    centralizer_dim: int
    orbit_dim: int
    family_dim: int
    codimension: int


@dataclass(frozen=True)
class CodimensionReport:
    n: int
    lines: tuple

    def line(self, kind: str) -> OrbitLine:
        for ln in self.lines:
            if ln.kind == kind:
                return ln
        raise KeyError(kind)


_EXPECTED_CODIM = {"double": 3, "triple": 8}


def orbit_codimension_report(n: int) -> CodimensionReport:
    """Codimension of the union of orbits of double / triple model matrices in so(2n)."""
    if not 2 <= n <= 6:
        raise ValueError(f"n must be in [2, 6], got {n}")
    m = n * (2 * n - 1)
    lines = []
    for kind, fam in (("double", n - 1), ("triple", n - 2)):
        if kind == "triple" and n < 3:
            continue
        c = centralizer_dimension(model_matrix(n, kind))
        line = OrbitLine(kind, n, m, c, m - c, fam, m - (m - c + fam))
        if line.codimension != _EXPECTED_CODIM[kind]:
            raise AssertionError(f"{kind} orbit codimension {line.codimension} in so({2 * n})")
        lines.append(line)
    return CodimensionReport(n, tuple(lines))
