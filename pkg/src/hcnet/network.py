"""Network descriptions: potentials, graph, damped and boundary sets.

Vertices are 1-based in JSON documents and 0-based everywhere in Python.
"""
from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from types import MappingProxyType
from typing import Iterable, Mapping

import numpy as np
from numpy.polynomial import polynomial as P

from .errors import SpecSyntaxError, ValidationError

__all__ = [
    "Polynomial",
    "NetworkSpec",
    "GraphMatrices",
    "HARMONIC",
    "graph_matrices",
    "parse_network",
    "load_network",
    "dumps_network",
    "network_to_dict",
    "load_builtin",
    "builtin_names",
    "harmonic_corpus",
    "random_network",
    "chain",
]

_GCD_TOL = 1e-9


def _trim(c, tol):
    c = np.atleast_1d(np.asarray(c, dtype=float))
    scale = np.max(np.abs(c)) if c.size else 0.0
    k = c.size
    while k > 1 and abs(c[k - 1]) <= tol * scale:
        k -= 1
    out = c[:k].copy()
    if k == 1 and abs(out[0]) <= tol * scale:
        out[0] = 0.0
    return out


def _is_zero(c):
    return c.size == 1 and c[0] == 0.0


def _monic(c):
    return c / c[-1]


def _poly_gcd(a, b, tol=_GCD_TOL):
    """Numerical Euclid; coefficients below ``tol`` relative to the dividend are dropped."""
    a = _trim(a, tol)
    b = _trim(b, tol)
    if _is_zero(b):
        return _monic(a)
    if _is_zero(a):
        return _monic(b)
    a, b = _monic(a), _monic(b)
    while not _is_zero(b) and b.size > 1:
        _, r = P.polydiv(a, b)
        scale = max(np.max(np.abs(a)), 1.0)
        r = _trim(r, 0.0)
        if np.max(np.abs(r)) <= tol * scale:
            return _monic(b)
        a, b = b, _monic(_trim(r, tol))
    # b is a nonzero constant: coprime
    return np.array([1.0])


def _squarefree_factors(f, tol=_GCD_TOL):
    """Yun's algorithm. Returns ``{multiplicity: factor}`` with non-constant factors only."""
    f = _monic(_trim(f, tol))
    if f.size == 1:
        return {}
    df = P.polyder(f)
    a0 = _poly_gcd(f, df, tol)
    b = _trim(P.polydiv(f, a0)[0], tol)
    c = _trim(P.polydiv(df, a0)[0], tol)
    d = _trim(P.polysub(c, P.polyder(b)), tol)
    out = {}
    i = 1
    while b.size > 1:
        a = _poly_gcd(b, d, tol)
        if a.size > 1:
            out[i] = a
        b = _trim(P.polydiv(b, a)[0], tol)
        c = _trim(P.polydiv(d, a)[0], tol)
        d = _trim(P.polysub(c, P.polyder(b)), tol)
        i += 1
        if i > f.size + 1:
            break
    return out


@dataclass(frozen=True)
class Polynomial:
    """Univariate real polynomial, coefficients stored constant term first."""

    coeffs: tuple

    def __post_init__(self):
        c = tuple(float(x) for x in self.coeffs)
        while len(c) > 1 and c[-1] == 0.0:
            c = c[:-1]
        object.__setattr__(self, "coeffs", c)

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    @property
    def leading(self) -> float:
        return self.coeffs[-1]

    def __call__(self, x):
        return P.polyval(x, self.coeffs)

    def deriv(self, m: int = 1) -> "Polynomial":
        if m > self.degree:
            return Polynomial((0.0,))
        return Polynomial(tuple(P.polyder(self.coeffs, m)))

    def is_convex(self) -> bool:
        """True iff the second derivative is nonnegative on the real line.

        Every real root of the second derivative must have even multiplicity;
        multiplicities come from a square-free decomposition (numerical gcd,
        coefficient tolerance 1e-9) and roots from companion eigenvalues.
        """
        if self.degree < 2 or self.leading <= 0:
            return False
        d2 = np.array(P.polyder(self.coeffs, 2))
        if d2.size == 1:
            return d2[0] >= 0
        for mult, factor in _squarefree_factors(d2).items():
            if mult % 2 == 0:
                continue
            roots = np.roots(factor[::-1])
            if np.any(np.abs(roots.imag) <= 1e-7 * np.maximum(1.0, np.abs(roots))):
                return False
        return True

    def validate(self, name="polynomial"):
        if not all(np.isfinite(self.coeffs)):
            raise ValidationError(f"{name}: coefficients must be finite")
        if self.degree < 2:
            raise ValidationError(f"{name}: degree must be at least 2, got {self.degree}")
        if self.leading <= 0:
            raise ValidationError(f"{name}: leading coefficient must be positive")
        if self.degree % 2:
            raise ValidationError(f"{name}: degree must be even, got {self.degree}")
        if not self.is_convex():
            raise ValidationError(f"{name}: polynomial is not convex")


HARMONIC = Polynomial((0.0, 0.0, 0.5))


def _normalize_edges(n, edges):
    out = set()
    for e in edges:
        i, j = (int(v) for v in e)
        if i == j:
            raise ValidationError(f"self-loop at vertex {i + 1}")
        if not (0 <= i < n and 0 <= j < n):
            raise ValidationError(f"edge ({i + 1}, {j + 1}) references a vertex outside 1..{n}")
        key = (min(i, j), max(i, j))
        if key in out:
            raise ValidationError(f"duplicate edge ({key[0] + 1}, {key[1] + 1})")
        out.add(key)
    return tuple(sorted(out))


def _connected(n, edges):
    adj = [[] for _ in range(n)]
    for i, j in edges:
        adj[i].append(j)
        adj[j].append(i)
    seen = {0}
    queue = deque([0])
    while queue:
        v = queue.popleft()
        for w in adj[v]:
            if w not in seen:
                seen.add(w)
                queue.append(w)
    return len(seen) == n


@dataclass(frozen=True)
class NetworkSpec:
    """A validated heat conduction network (0-based vertices).

    ``temperatures`` maps every boundary vertex to its bath temperature;
    damped vertices outside the boundary have an implicit temperature 0.
    """

    n: int
    edges: tuple
    damped: frozenset
    boundary: frozenset
    temperatures: Mapping[int, float]
    pinning: Polynomial = HARMONIC
    interaction: Polynomial = HARMONIC
    name: str = field(default="", compare=False)

    def __post_init__(self):
        n = int(self.n)
        if n < 1:
            raise ValidationError("network needs at least one vertex")
        object.__setattr__(self, "n", n)
        edges = _normalize_edges(n, self.edges)
        object.__setattr__(self, "edges", edges)
        damped = frozenset(int(v) for v in self.damped)
        boundary = frozenset(int(v) for v in self.boundary)
        object.__setattr__(self, "damped", damped)
        object.__setattr__(self, "boundary", boundary)
        temps = {int(k): float(v) for k, v in dict(self.temperatures).items()}
        object.__setattr__(self, "temperatures", MappingProxyType(dict(sorted(temps.items()))))
        if not isinstance(self.pinning, Polynomial):
            object.__setattr__(self, "pinning", Polynomial(tuple(self.pinning)))
        if not isinstance(self.interaction, Polynomial):
            object.__setattr__(self, "interaction", Polynomial(tuple(self.interaction)))
        self._validate()

    def __hash__(self):
        return hash((self.n, self.edges, self.damped, self.boundary, tuple(self.temperatures.items()),
                     self.pinning, self.interaction))

    def __reduce__(self):
        return (
            NetworkSpec,
            (self.n, self.edges, self.damped, self.boundary, dict(self.temperatures),
             self.pinning, self.interaction, self.name),
        )

    def _validate(self):
        n = self.n
        for v in self.damped | self.boundary:
            if not 0 <= v < n:
                raise ValidationError(f"vertex {v + 1} outside 1..{n}")
        if not _connected(n, self.edges):
            raise ValidationError("graph is disconnected")
        if not self.boundary:
            raise ValidationError("boundary set must be non-empty")
        if not self.boundary <= self.damped:
            extra = sorted(v + 1 for v in self.boundary - self.damped)
            raise ValidationError(f"boundary set is not contained in the damped set: {extra}")
        for v, t in self.temperatures.items():
            if v not in self.boundary:
                raise ValidationError(f"temperature given for non-boundary vertex {v + 1}")
            if not np.isfinite(t) or t < 0:
                raise ValidationError(f"negative or non-finite temperature at vertex {v + 1}")
        missing = sorted(v + 1 for v in self.boundary if v not in self.temperatures)
        if missing:
            raise ValidationError(f"missing temperature for boundary vertices {missing}")
        self.pinning.validate("pinning")
        self.interaction.validate("interaction")

    @property
    def N(self) -> int:
        return self.n

    @property
    def dim(self) -> int:
        return 2 * self.n

    @property
    def is_harmonic(self) -> bool:
        return self.pinning == HARMONIC and self.interaction == HARMONIC

    @property
    def heated(self) -> tuple:
        """Boundary vertices with strictly positive temperature, sorted."""
        return tuple(sorted(v for v in self.boundary if self.temperatures[v] > 0))

    def temperature_vector(self) -> np.ndarray:
        t = np.zeros(self.n)
        for v, temp in self.temperatures.items():
            t[v] = temp
        return t

    def damped_mask(self) -> np.ndarray:
        m = np.zeros(self.n, dtype=bool)
        m[list(self.damped)] = True
        return m

    def neighbours(self, v: int) -> list:
        return [j if i == v else i for i, j in self.edges if v in (i, j)]

    def replace(self, **changes) -> "NetworkSpec":
        kw = dict(
            n=self.n,
            edges=self.edges,
            damped=self.damped,
            boundary=self.boundary,
            temperatures=self.temperatures,
            pinning=self.pinning,
            interaction=self.interaction,
            name=self.name,
        )
        kw.update(changes)
        return NetworkSpec(**kw)


@dataclass(frozen=True, eq=False)
class GraphMatrices:
    adjacency: np.ndarray
    degree: np.ndarray
    laplacian: np.ndarray
    gamma: np.ndarray


def graph_matrices(spec: NetworkSpec) -> GraphMatrices:
    """Adjacency, degree, Laplacian ``D - A`` and ``Gamma = I + Laplacian``."""
    n = spec.n
    adj = np.zeros((n, n))
    for i, j in spec.edges:
        adj[i, j] = adj[j, i] = 1.0
    deg = np.diag(adj.sum(axis=1))
    lap = deg - adj
    return GraphMatrices(adj, deg, lap, np.eye(n) + lap)


def _vertex_list(doc, key, n):
    raw = doc.get(key, [])
    if not isinstance(raw, list):
        raise ValidationError(f"'{key}' must be an array of vertices")
    out = []
    for v in raw:
        if isinstance(v, bool) or not isinstance(v, int):
            raise ValidationError(f"'{key}' entries must be integers, got {v!r}")
        if not 1 <= v <= n:
            raise ValidationError(f"'{key}': vertex {v} outside 1..{n}")
        out.append(v - 1)
    if len(set(out)) != len(out):
        raise ValidationError(f"'{key}' lists a vertex twice")
    return out


def _poly_from_doc(doc, key):
    obj = doc.get(key)
    if not isinstance(obj, dict) or not isinstance(obj.get("coeffs"), list):
        raise ValidationError(f"'{key}' must be an object with a 'coeffs' array")
    try:
        return Polynomial(tuple(float(c) for c in obj["coeffs"]))
    except (TypeError, ValueError):
        raise ValidationError(f"'{key}': coefficients must be numbers") from None


def network_from_dict(doc: dict, name: str = "") -> NetworkSpec:
    if not isinstance(doc, dict):
        raise ValidationError("network document must be a JSON object")
    known = {"n", "edges", "damped", "boundary", "temperatures", "pinning", "interaction", "harmonic", "name"}
    unknown = set(doc) - known
    if unknown:
        raise ValidationError(f"unknown keys {sorted(unknown)}")
    n = doc.get("n")
    if isinstance(n, bool) or not isinstance(n, int) or n < 1:
        raise ValidationError("'n' must be a positive integer")
    edges = doc.get("edges", [])
    if not isinstance(edges, list) or not all(
        isinstance(e, list) and len(e) == 2 and all(isinstance(v, int) and not isinstance(v, bool) for v in e)
        for e in edges
    ):
        raise ValidationError("'edges' must be an array of [i, j] integer pairs")
    edges = [(i - 1, j - 1) for i, j in edges]
    damped = _vertex_list(doc, "damped", n)
    boundary = _vertex_list(doc, "boundary", n)
    temps_raw = doc.get("temperatures", {})
    if not isinstance(temps_raw, dict):
        raise ValidationError("'temperatures' must be an object vertex -> float")
    temps = {}
    for k, v in temps_raw.items():
        try:
            vertex = int(k)
        except ValueError:
            raise ValidationError(f"temperature key {k!r} is not a vertex number") from None
        if not 1 <= vertex <= n:
            raise ValidationError(f"temperature key {vertex} outside 1..{n}")
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ValidationError(f"temperature of vertex {vertex} must be a number")
        temps[vertex - 1] = float(v)
    harmonic = doc.get("harmonic", False)
    if not isinstance(harmonic, bool):
        raise ValidationError("'harmonic' must be a boolean")
    if harmonic:
        if "pinning" in doc or "interaction" in doc:
            raise ValidationError("'harmonic': true conflicts with explicit potentials")
        pinning = interaction = HARMONIC
    else:
        pinning = _poly_from_doc(doc, "pinning")
        interaction = _poly_from_doc(doc, "interaction")
    return NetworkSpec(
        n=n,
        edges=edges,
        damped=damped,
        boundary=boundary,
        temperatures=temps,
        pinning=pinning,
        interaction=interaction,
        name=doc.get("name", name) or name,
    )


def parse_network(text: str, name: str = "") -> NetworkSpec:
    """Parse and validate a JSON network document.

    Raises
    ------
    SpecSyntaxError
        Malformed JSON; carries the line and column.
    ValidationError
        The message names the violated invariant.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SpecSyntaxError(exc.msg, exc.lineno, exc.colno) from None
    return network_from_dict(doc, name=name)


def load_network(path) -> NetworkSpec:
    path = Path(path)
    return parse_network(path.read_text(), name=path.stem)


def network_to_dict(spec: NetworkSpec) -> dict:
    doc = {
        "n": spec.n,
        "edges": [[i + 1, j + 1] for i, j in spec.edges],
        "damped": sorted(v + 1 for v in spec.damped),
        "boundary": sorted(v + 1 for v in spec.boundary),
        "temperatures": {str(v + 1): spec.temperatures[v] for v in sorted(spec.temperatures)},
    }
    if spec.is_harmonic:
        doc["harmonic"] = True
    else:
        doc["pinning"] = {"coeffs": list(spec.pinning.coeffs)}
        doc["interaction"] = {"coeffs": list(spec.interaction.coeffs)}
    if spec.name:
        doc["name"] = spec.name
    return doc


def dumps_network(spec: NetworkSpec) -> str:
    return json.dumps(network_to_dict(spec), indent=2)


def builtin_names() -> list:
    root = resources.files("hcnet") / "networks"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def load_builtin(name: str) -> NetworkSpec:
    """Load one of the networks shipped in ``hcnet/networks`` (e.g. ``"diamond"``)."""
    res = resources.files("hcnet") / "networks" / f"{name}.json"
    return parse_network(res.read_text(), name=name)


def harmonic_corpus() -> list:
    """All shipped networks with quadratic potentials, sorted by name."""
    specs = (load_builtin(name) for name in builtin_names())
    return [s for s in specs if s.is_harmonic]


def random_network(
    rng: np.random.Generator,
    n_max: int = 8,
    n_min: int = 1,
    edge_prob: float | None = None,
    temperatures: tuple = (0.5, 2.0),
    pinning: Polynomial = HARMONIC,
    interaction: Polynomial = HARMONIC,
) -> NetworkSpec:
    """Random connected network with random damped set containing a random boundary set.

    Connectivity comes from a random spanning tree plus extra edges with
    probability ``edge_prob`` (itself random when omitted).
    """
    n = int(rng.integers(n_min, n_max + 1))
    order = rng.permutation(n)
    edges = set()
    for k in range(1, n):
        parent = order[int(rng.integers(0, k))]
        a, b = sorted((int(order[k]), int(parent)))
        edges.add((a, b))
    p = rng.uniform(0.0, 0.6) if edge_prob is None else edge_prob
    for i in range(n):
        for j in range(i + 1, n):
            if rng.random() < p:
                edges.add((i, j))
    n_damped = int(rng.integers(1, n + 1))
    damped = [int(v) for v in rng.choice(n, size=n_damped, replace=False)]
    n_boundary = int(rng.integers(1, n_damped + 1))
    boundary = damped[:n_boundary]
    lo, hi = temperatures
    temps = {v: float(rng.uniform(lo, hi)) for v in boundary}
    return NetworkSpec(
        n=n,
        edges=sorted(edges),
        damped=damped,
        boundary=boundary,
        temperatures=temps,
        pinning=pinning,
        interaction=interaction,
    )


def chain(n: int, damped: Iterable[int], boundary: Iterable[int], temperature=1.0, **kw) -> NetworkSpec:
    """Path graph 0-1-...-(n-1); vertices are 0-based here."""
    boundary = list(boundary)
    temps = temperature if isinstance(temperature, Mapping) else {v: float(temperature) for v in boundary}
    return NetworkSpec(
        n=n,
        edges=[(i, i + 1) for i in range(n - 1)],
        damped=damped,
        boundary=boundary,
        temperatures=temps,
        **kw,
    )
