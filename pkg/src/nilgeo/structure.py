"""Corank-2 step-2 structures, Popp normalization and polynomial structure families.

A structure is the pair (L1, L2) of skew matrices describing the bracket of the
nilpotent approximation at a point. A family maps parameters xi in R^param_dim to
such pairs through polynomial coefficient tables, and is stored in a small JSON
document (``format = "nilgeo-family/1"``).
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import DependentPair, DimensionMismatch, FamilyParseError
from .skew import as_array, hs_inner

FAMILY_FORMAT = "nilgeo-family/1"
GRAM_TOL = 1e-10
BUILTIN_NAMES = ("F_commuting", "F_generic", "F_generic6", "F_degenerate", "F_noresonance")


@dataclass(frozen=True, eq=False)
class CorankTwoStructure:
    L1: np.ndarray
    L2: np.ndarray
    normalized: bool = True

    @property
    def p(self) -> int:
        return self.L1.shape[0]

    def pencil_matrix(self, theta: float, r: float = 1.0) -> np.ndarray:
        return r * (math.cos(theta) * self.L1 + math.sin(theta) * self.L2)

    def rotated(self, alpha: float) -> "CorankTwoStructure":
        """Rotate the pair so that the pencil at theta equals the old pencil at theta - alpha."""
        c, s = math.cos(alpha), math.sin(alpha)
        return _make(c * self.L1 - s * self.L2, s * self.L1 + c * self.L2, self.normalized)

    def conjugated(self, g) -> "CorankTwoStructure":
        """Orthogonal change of horizontal frame L -> G L G'."""
        g = np.asarray(g, dtype=float)
        return _make(g @ self.L1 @ g.T, g @ self.L2 @ g.T, self.normalized)

    def commutator_norm(self) -> float:
        return float(np.linalg.norm(self.L1 @ self.L2 - self.L2 @ self.L1))


def _make(a, b, normalized):
    a = 0.5 * (a - a.T)
    b = 0.5 * (b - b.T)
    a.setflags(write=False)
    b.setflags(write=False)
    return CorankTwoStructure(a, b, normalized)


def popp_normalize(l1_raw, l2_raw, xi=None) -> CorankTwoStructure:
    """Gram-Schmidt of (L1, L2) under the product (1/p) trace(A'B)."""
    a, b = as_array(l1_raw), as_array(l2_raw)
    if a.shape != b.shape:
        raise DimensionMismatch(f"L1 and L2 differ in shape: {a.shape} vs {b.shape}")
    if a.shape[0] < 3:
        raise DimensionMismatch("rank p must be at least 3")
    n11, n22, n12 = hs_inner(a, a), hs_inner(b, b), hs_inner(a, b)
    if n11 <= 0.0 or n22 <= 0.0 or 1.0 - n12 * n12 / (n11 * n22) <= GRAM_TOL:
        raise DependentPair("L1 and L2 are linearly dependent", xi=xi)
    e1 = a / math.sqrt(n11)
    b = b - hs_inner(e1, b) * e1
    e2 = b / math.sqrt(hs_inner(b, b))
    return _make(np.array(e1), np.array(e2), True)


def hausdorff_dimension(s: CorankTwoStructure) -> int:
    # weighted dimension: p horizontal directions of weight 1, two of weight 2
    return s.p + 2 * 2


@dataclass(frozen=True, eq=False)
class Pencil:
    structure: CorankTwoStructure
    theta: float
    r: float
    matrix: np.ndarray


def pencil(s: CorankTwoStructure, theta: float, r: float = 1.0) -> Pencil:
    m = s.pencil_matrix(theta, r)
    m.setflags(write=False)
    return Pencil(s, float(theta), float(r), m)


# ---------------------------------------------------------------------------
# families


@dataclass(frozen=True)
class FamilyTerm:
    """One monomial xi^monomial times a skew coefficient given by its upper triangle."""

    monomial: tuple
    coeff: tuple  # ((row, col, decimal_text), ...), row < col

    def matrix(self, p: int) -> np.ndarray:
        m = np.zeros((p, p))
        for row, col, text in self.coeff:
            v = float(text)
            m[row, col] = v
            m[col, row] = -v
        return m


@dataclass(frozen=True, eq=False)
class StructureFamily:
    name: str
    description: str
    p: int
    param_dim: int
    L1_terms: tuple
    L2_terms: tuple
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def n(self) -> int:
        """Dimension p + 2 of the manifold the structure lives on."""
        return self.p + 2

    def _tables(self):
        if "tables" not in self._cache:
            out = []
            for terms in (self.L1_terms, self.L2_terms):
                exps = np.array([t.monomial for t in terms], dtype=int).reshape(len(terms), self.param_dim)
                mats = np.array([t.matrix(self.p) for t in terms]).reshape(len(terms), self.p, self.p)
                out.append((exps, mats))
            self._cache["tables"] = out
        return self._cache["tables"]

    def raw(self, xi) -> tuple:
        """Un-normalized (L1(xi), L2(xi))."""
        xi = np.asarray(xi, dtype=float).reshape(-1)
        if xi.size != self.param_dim:
            raise DimensionMismatch(f"family {self.name} expects {self.param_dim} parameters, got {xi.size}")
        res = []
        for exps, mats in self._tables():
            mono = np.prod(xi[None, :] ** exps, axis=1) if len(exps) else np.zeros(0)
            res.append(np.tensordot(mono, mats, axes=1) if len(exps) else np.zeros((self.p, self.p)))
        return tuple(res)

    def canonical_text(self) -> str:
        return dumps_family(self)

    @classmethod
    def from_matrices(cls, name, L1_terms, L2_terms, p, param_dim, description=""):
        """Build a family from {monomial: float matrix} mappings (upper triangle is read)."""

        def conv(terms):
            out = []
            for mono, mat in terms.items():
                mat = np.asarray(mat, dtype=float)
                coeff = tuple(
                    (i, j, repr(float(mat[i, j])))
                    for i in range(p)
                    for j in range(i + 1, p)
                    if mat[i, j] != 0.0
                )
                out.append(FamilyTerm(tuple(int(e) for e in mono), coeff))
            return tuple(out)

        return cls(name, description, p, param_dim, conv(L1_terms), conv(L2_terms))

    def scaled(self, c: float) -> "StructureFamily":
        """Same family with every coefficient multiplied by c (a no-op after normalization)."""

        def conv(terms):
            return tuple(
                FamilyTerm(t.monomial, tuple((i, j, repr(float(v) * c)) for i, j, v in t.coeff)) for t in terms
            )

        return StructureFamily(
            f"{self.name}_x{c:g}", self.description, self.p, self.param_dim, conv(self.L1_terms), conv(self.L2_terms)
        )


def eval_family(f: StructureFamily, xi) -> CorankTwoStructure:
    l1, l2 = f.raw(xi)
    return popp_normalize(l1, l2, xi=xi)


# -- file format -------------------------------------------------------------

_TOP_KEYS = {"format", "name", "description", "p", "param_dim", "L1", "L2"}


class _Number(str):
    """Numeric JSON token kept verbatim so that saving echoes it bit-identically."""


def _parse_terms(doc, key, p, param_dim):
    terms = doc.get(key)
    if not isinstance(terms, list):
        raise FamilyParseError("expected a list of terms", field=key)
    out = []
    seen = set()
    for t_idx, term in enumerate(terms):
        where = f"{key}[{t_idx}]"
        if not isinstance(term, dict) or set(term) != {"monomial", "coeff"}:
            raise FamilyParseError("term must have exactly the keys 'monomial' and 'coeff'", field=where)
        mono = term["monomial"]
        if (
            not isinstance(mono, list)
            or len(mono) != param_dim
            or not all(isinstance(e, _Number) and e.isdigit() for e in mono)
        ):
            raise FamilyParseError(f"monomial must be {param_dim} nonnegative integers", field=where + ".monomial")
        mono = tuple(int(e) for e in mono)
        if mono in seen:
            raise FamilyParseError(f"duplicate monomial {list(mono)}", field=where + ".monomial")
        seen.add(mono)
        coeff = term["coeff"]
        if not isinstance(coeff, list):
            raise FamilyParseError("coeff must be a list of [row, col, value]", field=where + ".coeff")
        entries = []
        cells = set()
        for c_idx, ent in enumerate(coeff):
            cw = f"{where}.coeff[{c_idx}]"
            if not isinstance(ent, list) or len(ent) != 3 or not all(isinstance(v, _Number) for v in ent):
                raise FamilyParseError("entry must be [row, col, value] numbers", field=cw)
            row, col, val = ent
            if not (row.isdigit() and col.isdigit()):
                raise FamilyParseError("row and col must be nonnegative integers", field=cw)
            row, col = int(row), int(col)
            if not row < col < p:
                raise FamilyParseError(f"need row < col < p={p} (strict upper triangle), got ({row}, {col})", field=cw)
            if (row, col) in cells:
                raise FamilyParseError(f"duplicate entry ({row}, {col})", field=cw)
            cells.add((row, col))
            try:
                dv = Decimal(val)
            except InvalidOperation:
                raise FamilyParseError(f"invalid number {val!r}", field=cw) from None
            if not dv.is_finite() or not math.isfinite(float(dv)):
                raise FamilyParseError("value must be finite in double precision", field=cw)
            entries.append((row, col, str.__str__(val)))
        out.append(FamilyTerm(mono, tuple(entries)))
    return tuple(out)


def loads_family(text: str) -> StructureFamily:
    try:
        doc = json.loads(text, parse_float=_Number, parse_int=_Number)
    except json.JSONDecodeError as exc:
        raise FamilyParseError(exc.msg, line=exc.lineno) from None
    if not isinstance(doc, dict):
        raise FamilyParseError("top level must be an object")
    extra = set(doc) - _TOP_KEYS
    if extra:
        raise FamilyParseError(f"unknown fields {sorted(extra)}", field=sorted(extra)[0])
    missing = {"format", "p", "param_dim", "L1", "L2"} - set(doc)
    if missing:
        raise FamilyParseError(f"missing fields {sorted(missing)}", field=sorted(missing)[0])
    if doc["format"] != FAMILY_FORMAT:
        raise FamilyParseError(f"unsupported format {doc['format']!r}, expected {FAMILY_FORMAT!r}", field="format")
    for key, lo in (("p", 3), ("param_dim", 0)):
        v = doc[key]
        if not (isinstance(v, _Number) and v.isdigit() and int(v) >= lo):
            raise FamilyParseError(f"must be an integer >= {lo}", field=key)
    p, param_dim = int(doc["p"]), int(doc["param_dim"])
    name = doc.get("name", "")
    description = doc.get("description", "")
    if not isinstance(name, str) or not isinstance(description, str):
        raise FamilyParseError("name and description must be strings", field="name")
    return StructureFamily(
        name,
        description,
        p,
        param_dim,
        _parse_terms(doc, "L1", p, param_dim),
        _parse_terms(doc, "L2", p, param_dim),
    )


def load_family(path) -> StructureFamily:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise FamilyParseError(f"cannot read {path}: {exc.strerror}") from None
    return loads_family(text)


def _dump_terms(terms):
    lines = []
    for t in terms:
        mono = ", ".join(str(e) for e in t.monomial)
        coeff = ", ".join(f"[{r}, {c}, {v}]" for r, c, v in t.coeff)
        lines.append(f'    {{"monomial": [{mono}], "coeff": [{coeff}]}}')
    return "[\n" + ",\n".join(lines) + "\n  ]" if lines else "[]"


def dumps_family(f: StructureFamily) -> str:
    return (
        "{\n"
        f'  "format": {json.dumps(FAMILY_FORMAT)},\n'
        f'  "name": {json.dumps(f.name)},\n'
        f'  "description": {json.dumps(f.description)},\n'
        f'  "p": {f.p},\n'
        f'  "param_dim": {f.param_dim},\n'
        f'  "L1": {_dump_terms(f.L1_terms)},\n'
        f'  "L2": {_dump_terms(f.L2_terms)}\n'
        "}\n"
    )


def save_family(f: StructureFamily, path) -> None:
    Path(path).write_text(dumps_family(f), encoding="utf-8")


def builtin_text(name: str) -> str:
    if name not in BUILTIN_NAMES:
        raise FamilyParseError(f"unknown builtin family {name!r}; choose from {', '.join(BUILTIN_NAMES)}")
    return resources.files("nilgeo").joinpath("data").joinpath(f"{name}.json").read_text(encoding="utf-8")


def builtin(name: str) -> StructureFamily:
    return loads_family(builtin_text(name))
