"""Polynomial vector fields, Lie brackets and pointwise Hörmander rank.

Polynomials are sparse dicts ``{exponent tuple: coefficient}``. Coefficients
may be ints, Fractions or floats; arithmetic is generic so integer or
rational fields bracket exactly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import PreconditionError
from .matkernel import numerical_rank
from .network import NetworkSpec

__all__ = [
    "Poly",
    "PolyVectorField",
    "GeneratorFields",
    "LieBasis",
    "HormanderReport",
    "generator_fields",
    "lie_bracket",
    "lie_basis",
    "hormander_rank",
]


class Poly:
    """Sparse multivariate polynomial in ``nvars`` variables."""

    __slots__ = ("nvars", "terms")

    def __init__(self, nvars: int, terms=None):
        self.nvars = nvars
        self.terms = {}
        if terms:
            for mono, c in terms.items():
                if c != 0:
                    self.terms[tuple(mono)] = c

    @classmethod
    def constant(cls, nvars, c):
        return cls(nvars, {(0,) * nvars: c})

    @classmethod
    def variable(cls, nvars, k, c=1):
        mono = [0] * nvars
        mono[k] = 1
        return cls(nvars, {tuple(mono): c})

    def copy(self):
        p = Poly(self.nvars)
        p.terms = dict(self.terms)
        return p

    def is_zero(self) -> bool:
        return not self.terms

    @property
    def degree(self) -> int:
        return max((sum(m) for m in self.terms), default=-1)

    def __len__(self):
        return len(self.terms)

    def _check(self, other):
        if self.nvars != other.nvars:
            raise PreconditionError("polynomials live in different variable sets")

    def __add__(self, other):
        if not isinstance(other, Poly):
            return self + Poly.constant(self.nvars, other)
        self._check(other)
        out = dict(self.terms)
        for m, c in other.terms.items():
            v = out.get(m, 0) + c
            if v == 0:
                out.pop(m, None)
            else:
                out[m] = v
        p = Poly(self.nvars)
        p.terms = out
        return p

    __radd__ = __add__

    def __neg__(self):
        p = Poly(self.nvars)
        p.terms = {m: -c for m, c in self.terms.items()}
        return p

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, Poly):
            if other == 0:
                return Poly(self.nvars)
            p = Poly(self.nvars)
            p.terms = {m: c * other for m, c in self.terms.items()}
            return p
        self._check(other)
        out = {}
        for m1, c1 in self.terms.items():
            for m2, c2 in other.terms.items():
                m = tuple(a + b for a, b in zip(m1, m2))
                out[m] = out.get(m, 0) + c1 * c2
        return Poly(self.nvars, out)

    __rmul__ = __mul__

    def __pow__(self, k: int):
        result = Poly.constant(self.nvars, 1)
        base = self
        while k:
            if k & 1:
                result = result * base
            base = base * base
            k >>= 1
        return result

    def diff(self, k: int) -> "Poly":
        out = {}
        for m, c in self.terms.items():
            e = m[k]
            if e:
                mm = list(m)
                mm[k] = e - 1
                out[tuple(mm)] = c * e
        return Poly(self.nvars, out)

    def __eq__(self, other):
        if not isinstance(other, Poly):
            return NotImplemented
        return self.nvars == other.nvars and self.terms == other.terms

    def __hash__(self):
        return hash(self.canonical())

    def canonical(self) -> tuple:
        return tuple(sorted(self.terms.items()))

    def evaluate(self, z) -> float:
        z = np.asarray(z, dtype=float)
        total = 0.0
        for m, c in self.terms.items():
            total += float(c) * float(np.prod(z ** np.array(m)))
        return total

    def abs_bound(self, z) -> float:
        """``sum |c| |z^m|``: the scale of rounding error when evaluating at z."""
        z = np.abs(np.asarray(z, dtype=float))
        return sum(abs(float(c)) * float(np.prod(z ** np.array(m))) for m, c in self.terms.items())

    def __repr__(self):
        if not self.terms:
            return "Poly(0)"
        return "Poly(" + " + ".join(f"{c}*{m}" for m, c in self.canonical()) + ")"


class PolyVectorField:
    """Vector field ``sum_k comps[k] d/dx_k`` with polynomial components."""

    __slots__ = ("comps",)

    def __init__(self, comps):
        comps = tuple(comps)
        if not comps:
            raise PreconditionError("vector field needs at least one component")
        nv = comps[0].nvars
        if any(c.nvars != nv for c in comps) or nv != len(comps):
            raise PreconditionError("components must be polynomials in as many variables as the dimension")
        self.comps = comps

    @property
    def dim(self) -> int:
        return len(self.comps)

    @classmethod
    def zero(cls, n):
        return cls([Poly(n) for _ in range(n)])

    @classmethod
    def coordinate(cls, n, k, c=1):
        comps = [Poly(n) for _ in range(n)]
        comps[k] = Poly.constant(n, c)
        return cls(comps)

    def is_zero(self) -> bool:
        return all(c.is_zero() for c in self.comps)

    def term_count(self) -> int:
        return sum(len(c) for c in self.comps)

    def __add__(self, other):
        return PolyVectorField([a + b for a, b in zip(self.comps, other.comps)])

    def __sub__(self, other):
        return PolyVectorField([a - b for a, b in zip(self.comps, other.comps)])

    def __neg__(self):
        return PolyVectorField([-a for a in self.comps])

    def __mul__(self, s):
        return PolyVectorField([a * s for a in self.comps])

    __rmul__ = __mul__

    def __eq__(self, other):
        if not isinstance(other, PolyVectorField):
            return NotImplemented
        return self.comps == other.comps

    def __hash__(self):
        return hash(self.canonical())

    def canonical(self) -> tuple:
        return tuple(c.canonical() for c in self.comps)

    def apply(self, other: "PolyVectorField") -> "PolyVectorField":
        """Directional derivative of ``other`` along self: ``(D other) self``."""
        n = self.dim
        out = []
        for comp in other.comps:
            acc = Poly(n)
            for j in range(n):
                if self.comps[j].is_zero():
                    continue
                d = comp.diff(j)
                if not d.is_zero():
                    acc = acc + self.comps[j] * d
            out.append(acc)
        return PolyVectorField(out)

    def evaluate(self, z) -> np.ndarray:
        return np.array([c.evaluate(z) for c in self.comps])

    def abs_bound(self, z) -> float:
        return max(c.abs_bound(z) for c in self.comps)

    def coefficient_items(self):
        for k, c in enumerate(self.comps):
            for m, v in c.terms.items():
                yield (k, m), v

    def __repr__(self):
        return f"PolyVectorField({list(self.comps)!r})"


def lie_bracket(X: PolyVectorField, Y: PolyVectorField) -> PolyVectorField:
    """``[X, Y] = (DY) X - (DX) Y``."""
    if X.dim != Y.dim:
        raise PreconditionError(f"dimension mismatch: {X.dim} vs {Y.dim}")
    return X.apply(Y) - Y.apply(X)


@dataclass(eq=False)
class GeneratorFields:
    """Drift ``X0``, diffusion fields ``X1..Xr`` and the zeroth-order term of the adjoint generator."""

    drift: PolyVectorField
    diffusion: list
    zeroth_order: Poly
    heated: tuple = ()

    def __iter__(self):
        yield self.drift
        yield self.diffusion


def _linear_poly(nvars, coeffs: dict):
    terms = {}
    for k, c in coeffs.items():
        mono = [0] * nvars
        mono[k] = 1
        terms[tuple(mono)] = c
    return Poly(nvars, terms)


def _compose(coeffs, x: Poly) -> Poly:
    """Univariate polynomial (constant term first) evaluated at the polynomial x."""
    out = Poly(x.nvars)
    power = Poly.constant(x.nvars, 1)
    for k, c in enumerate(coeffs):
        if k:
            power = power * x
        if c != 0:
            out = out + power * c
    return out


def generator_fields(spec: NetworkSpec) -> GeneratorFields:
    """Vector fields of the network generator.

    The drift is ``q' = p, p' = -dH/dq - p 1_D``; diffusion fields are
    ``sqrt(2 T_i) d/dp_i`` for boundary vertices with ``T_i > 0``. An empty
    diffusion list means the rank question is vacuous.
    """
    N = spec.n
    n = 2 * N
    dv = np.polynomial.polynomial.polyder(spec.pinning.coeffs)
    usym = np.array(spec.interaction.coeffs, dtype=float)
    usym[1::2] = 0.0
    du = np.polynomial.polynomial.polyder(usym)
    comps = [Poly.variable(n, N + i) for i in range(N)]
    for i in range(N):
        qi = Poly.variable(n, i)
        force = _compose([float(c) for c in dv], qi)
        for j in spec.neighbours(i):
            force = force + _compose([float(c) for c in du], _linear_poly(n, {i: 1, j: -1}))
        comp = -force
        if i in spec.damped:
            comp = comp - Poly.variable(n, N + i)
        comps.append(comp)
    drift = PolyVectorField(comps)
    temps = spec.temperature_vector()
    heated = spec.heated
    diffusion = [PolyVectorField.coordinate(n, N + i, math.sqrt(2.0 * temps[i])) for i in heated]
    return GeneratorFields(drift, diffusion, Poly.constant(n, float(len(spec.damped))), heated)


class _CoefficientSpan:
    """Incremental orthonormal basis of fields viewed as coefficient vectors."""

    def __init__(self, tol=1e-9):
        self.index = {}
        self.rows = []  # sparse dicts over coordinate indices, orthonormal
        self.tol = tol

    def _vector(self, field: PolyVectorField):
        vec = {}
        for key, v in field.coefficient_items():
            if key not in self.index:
                self.index[key] = len(self.index)
            vec[self.index[key]] = float(v)
        return vec

    def add_if_new(self, field: PolyVectorField) -> bool:
        vec = self._vector(field)
        norm0 = math.sqrt(sum(v * v for v in vec.values()))
        if norm0 == 0.0:
            return False
        w = dict(vec)
        for _ in range(2):
            for row in self.rows:
                dot = sum(w.get(k, 0.0) * v for k, v in row.items())
                if dot:
                    for k, v in row.items():
                        w[k] = w.get(k, 0.0) - dot * v
        r = math.sqrt(sum(v * v for v in w.values()))
        if r <= self.tol * norm0:
            return False
        self.rows.append({k: v / r for k, v in w.items() if v != 0.0})
        return True


@dataclass(eq=False)
class LieBasis:
    """Iterated brackets of the diffusion fields with all generator fields.

    ``depths[k]`` is the bracket nesting of ``fields[k]``; depth 0 entries
    are exactly the diffusion fields.
    """

    fields: list
    depths: list
    dim: int
    depth: int
    truncated: bool = False
    _cache: dict = field(default_factory=dict, repr=False)

    def evaluate(self, point) -> np.ndarray:
        """Rows are the fields at ``point``, each divided by its rounding scale."""
        z = np.asarray(point, dtype=float)
        key = tuple(z.tolist())
        if key not in self._cache:
            rows = []
            for f in self.fields:
                scale = f.abs_bound(z)
                rows.append(f.evaluate(z) / scale if scale > 0 else np.zeros(self.dim))
            self._cache[key] = np.array(rows).reshape(len(rows), self.dim)
        return self._cache[key]

    def rank_at(self, point, depth: int | None = None) -> int:
        rows = self.evaluate(point)
        if depth is not None:
            rows = rows[[k for k, d in enumerate(self.depths) if d < depth]]
        if rows.shape[0] == 0:
            return 0
        return numerical_rank(rows)


def lie_basis(spec: NetworkSpec, depth: int | None = None, max_terms: int = 200_000) -> LieBasis:
    """Generate brackets ``[Y, X_j]``, ``j = 0..r``, level by level for ``depth`` levels.

    A new bracket is kept only if it is not a constant-coefficient linear
    combination of the fields kept so far (duplicates are caught by hashing
    first). Then every pruned bracket's own brackets lie in the span of
    ones already generated, so pruning never loses rank.
    ``max_terms`` caps the total monomial count; hitting it sets ``truncated``.
    """
    n = spec.dim
    depth = n if depth is None else int(depth)
    if depth < 1:
        raise PreconditionError("depth must be >= 1")
    gf = generator_fields(spec)
    gens = [gf.drift] + list(gf.diffusion)
    span = _CoefficientSpan()
    seen = set()
    fields, depths = [], []
    terms = 0
    truncated = False
    frontier = []
    for X in gf.diffusion:
        key = X.canonical()
        if key in seen:
            continue
        seen.add(key)
        if span.add_if_new(X):
            fields.append(X)
            depths.append(0)
            frontier.append(X)
            terms += X.term_count()
    for level in range(1, depth):
        new = []
        for Y in frontier:
            for X in gens:
                B = lie_bracket(Y, X)
                if B.is_zero():
                    continue
                key = B.canonical()
                if key in seen:
                    continue
                seen.add(key)
                if not span.add_if_new(B):
                    continue
                terms += B.term_count()
                if terms > max_terms:
                    truncated = True
                    break
                fields.append(B)
                depths.append(level)
                new.append(B)
            if truncated:
                break
        if truncated or not new:
            break
        frontier = new
    return LieBasis(fields, depths, n, depth, truncated)


@dataclass(frozen=True)
class HormanderReport:
    point: tuple
    depth: int
    rank: int
    generated: int
    truncated: bool
    dim: int
    vacuous: bool = False

    @property
    def full(self) -> bool:
        return self.rank == self.dim

    def to_dict(self) -> dict:
        return {
            "point": list(self.point),
            "depth": self.depth,
            "rank": self.rank,
            "full": self.full,
            "truncated": self.truncated,
            "generated": self.generated,
            "vacuous": self.vacuous,
        }


def hormander_rank(spec: NetworkSpec, point, depth: int | None = None, basis: LieBasis | None = None) -> HormanderReport:
    """Dimension of the span of the generated Lie brackets at ``point``.

    With no heated boundary vertex there are no diffusion fields; the
    report then has rank 0 and ``vacuous`` set.

    ``basis`` lets callers reuse one :func:`lie_basis` across many points.
    """
    z = np.asarray(point, dtype=float).ravel()
    if z.size != spec.dim:
        raise PreconditionError(f"point has length {z.size}, expected {spec.dim}")
    if basis is None:
        basis = lie_basis(spec, depth)
    rank = basis.rank_at(z)
    return HormanderReport(
        tuple(float(x) for x in z),
        basis.depth,
        rank,
        len(basis.fields),
        basis.truncated,
        spec.dim,
        vacuous=not spec.heated,
    )
