"""Location of resonance points z = (theta, xi) where the two top moduli of the pencil collide."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .errors import GapTooSmall, NoResonance, TripleDetected
from .quaternion import versal_q
from .skew import eigen_moduli
from .structure import StructureFamily, eval_family

#: a point counts as resonant when w1 - w2 <= RESONANCE_TOL
RESONANCE_TOL = 1e-9
#: relative separation below which w2 and w3 are treated as colliding
TRIPLE_RTOL = 1e-6


@dataclass(frozen=True, eq=False)
class ResonancePoint:
    z: np.ndarray  # (theta, xi_1, ..., xi_n)
    gap: float
    moduli: np.ndarray
    kind: str  # "double"
    iterations: int

    @property
    def theta(self) -> float:
        return float(self.z[0])

    @property
    def xi(self) -> np.ndarray:
        return self.z[1:]


def pencil_moduli(family: StructureFamily, z) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    s = eval_family(family, z[1:])
    return eigen_moduli(s.pencil_matrix(z[0])).moduli


def top_gap(family: StructureFamily, z) -> float:
    w = pencil_moduli(family, z)
    return float(w[0] - w[1])


def _check_triple(w: np.ndarray, p: int) -> None:
    third = w[2] if len(w) > 2 else (0.0 if p % 2 else None)
    if third is not None and w[1] - third <= TRIPLE_RTOL * (1.0 + w[0]):
        raise TripleDetected(f"third modulus collides with the top pair (w = {w[:3].tolist()})")


def resonance_locate(
    family: StructureFamily,
    seed,
    tol: float = RESONANCE_TOL,
    max_newton: int = 40,
    nm_tol: float = 1e-10,
    radius: float = 1.0,
) -> ResonancePoint:
    """Find a point of the double-eigenvalue stratum within ``radius`` (max norm) of ``seed``.

    Nelder-Mead on gap(z)^2 brings the iterate close to the stratum; a Gauss-Newton
    iteration on the versal coordinate q(z) (which vanishes exactly on the stratum and
    is smooth across it) then drives the gap below ``tol``. The search box keeps the
    iterate away from asymptotically degenerate directions (|xi| -> infinity).
    """
    z = np.array(seed, dtype=float).reshape(-1)
    if z.size != family.param_dim + 1:
        raise ValueError(f"seed must have {family.param_dim + 1} entries (theta, xi)")
    z0 = z.copy()
    w = pencil_moduli(family, z)
    if w[0] - w[1] <= tol:
        _check_triple(w, family.p)
        return ResonancePoint(z, float(w[0] - w[1]), w, "double", 0)

    def objective(v):
        out = float(np.max(np.abs(v - z0))) - radius
        if out > 0:
            return top_gap(family, np.clip(v, z0 - radius, z0 + radius)) ** 2 + out
        return top_gap(family, v) ** 2

    res = minimize(
        objective,
        z,
        method="Nelder-Mead",
        options={"xatol": nm_tol, "fatol": 1e-20, "maxiter": 400 * z.size, "adaptive": z.size > 2},
    )
    z = res.x
    iters = int(res.nit)
    try:
        for _ in range(max_newton):
            w = pencil_moduli(family, z)
            if w[0] - w[1] <= tol:
                break
            _check_triple(w, family.p)
            base = versal_q(family, z)
            h = 1e-6
            cols = []
            for k in range(z.size):
                e = np.zeros_like(z)
                e[k] = h
                cols.append((versal_q(family, z + e, base.frame).q - versal_q(family, z - e, base.frame).q) / (2 * h))
            jac = np.array(cols).T
            step = np.linalg.lstsq(jac, -base.q, rcond=1e-8)[0]
            z = z + step
            iters += 1
    except GapTooSmall as exc:
        raise TripleDetected(str(exc)) from exc
    if not np.all(np.isfinite(z)) or np.max(np.abs(z - z0)) > 2 * radius:
        raise NoResonance(f"no resonance within {radius} of seed {np.asarray(seed).tolist()}")
    w = pencil_moduli(family, z)
    gap = float(w[0] - w[1])
    if gap > tol:
        raise NoResonance(f"top gap stays at {gap:.6g} near seed {np.asarray(seed).tolist()}")
    _check_triple(w, family.p)
    return ResonancePoint(z, gap, w, "double", iters)
