import json
import logging
import math
from collections import Counter
from itertools import combinations
from typing import Dict, Iterable, Iterator, List, Optional, Sequence, Set, Tuple

import networkx as nx
import numpy as np
import scipy.sparse as sp
from pydantic import BaseModel, ConfigDict, Field, PrivateAttr, field_validator, model_validator

from nibble_coloring.errors import InvariantError, PreconditionError
from nibble_coloring.io.base import FileIOBase

logger = logging.getLogger(__name__)

# Color id reserved for "not activated" in traces; real colors are positive.
NO_COLOR = 0


class Graph(FileIOBase):
    """Immutable simple graph on vertices 0..n-1.

    Attributes:
        n (int): Number of vertices.
        adjacency (List[List[int]]): Sorted neighbor list of every vertex.
    """

    model_config = ConfigDict(frozen=True)

    n: int = Field(ge=0)
    adjacency: List[List[int]]

    _neighbor_sets: Optional[List[frozenset]] = PrivateAttr(default=None)

    @model_validator(mode="after")
    def _check_simple(self) -> "Graph":
        if len(self.adjacency) != self.n:
            raise ValueError(f"adjacency has {len(self.adjacency)} rows for n={self.n}")
        for v, row in enumerate(self.adjacency):
            for a, b in zip(row, row[1:]):
                if a >= b:
                    raise ValueError(f"neighbors of {v} are not strictly ascending")
            for u in row:
                if u == v:
                    raise ValueError(f"loop at vertex {v}")
                if not 0 <= u < self.n:
                    raise ValueError(f"neighbor {u} of {v} out of range")
        sets = [frozenset(row) for row in self.adjacency]
        for v, row in enumerate(self.adjacency):
            for u in row:
                if v not in sets[u]:
                    raise ValueError(f"edge {v}-{u} is not symmetric")
        return self

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[Tuple[int, int]]) -> "Graph":
        rows: List[Set[int]] = [set() for _ in range(n)]
        for u, v in edges:
            if u == v:
                raise PreconditionError(f"loop at vertex {u}")
            if not (0 <= u < n and 0 <= v < n):
                raise PreconditionError(f"edge ({u}, {v}) out of range for n={n}")
            rows[u].add(v)
            rows[v].add(u)
        return cls(n=n, adjacency=[sorted(r) for r in rows])

    @classmethod
    def empty(cls, n: int) -> "Graph":
        return cls(n=n, adjacency=[[] for _ in range(n)])

    @classmethod
    def from_networkx(cls, graph: nx.Graph) -> "Graph":
        nodes = sorted(graph.nodes())
        index = {v: i for i, v in enumerate(nodes)}
        return cls.from_edges(len(nodes), ((index[u], index[v]) for u, v in graph.edges() if u != v))

    def to_networkx(self) -> nx.Graph:
        graph = nx.Graph()
        graph.add_nodes_from(range(self.n))
        graph.add_edges_from(self.edges())
        return graph

    @classmethod
    def from_string(cls, text: str) -> "Graph":
        lines = [line for line in text.splitlines() if line.strip() and not line.lstrip().startswith("#")]
        if not lines:
            raise PreconditionError("edge list is empty: expected header line 'n m'")
        header = lines[0].split()
        if len(header) != 2:
            raise PreconditionError(f"line 1: expected 'n m', got {lines[0]!r}")
        try:
            n, m = int(header[0]), int(header[1])
        except ValueError as err:
            raise PreconditionError(f"line 1: non-integer header {lines[0]!r}") from err
        if len(lines) - 1 != m:
            raise PreconditionError(f"header announces {m} edges, found {len(lines) - 1}")
        edges = []
        for lineno, line in enumerate(lines[1:], start=2):
            values = line.split()
            if len(values) != 2:
                raise PreconditionError(f"line {lineno}: expected 'u v', got {line!r}")
            try:
                u, v = int(values[0]), int(values[1])
            except ValueError as err:
                raise PreconditionError(f"line {lineno}: non-integer vertex in {line!r}") from err
            if not (0 <= u < n and 0 <= v < n) or u == v:
                raise PreconditionError(f"line {lineno}: invalid edge ({u}, {v}) for n={n}")
            edges.append((u, v))
        return cls.from_edges(n, edges)

    def __str__(self) -> str:
        edges = self.edges()
        body = "".join(f"{u} {v}\n" for u, v in edges)
        return f"{self.n} {len(edges)}\n{body}"

    def edges(self) -> List[Tuple[int, int]]:
        return [(u, v) for u, row in enumerate(self.adjacency) for v in row if u < v]

    @property
    def num_edges(self) -> int:
        return sum(len(row) for row in self.adjacency) // 2

    def _sets(self) -> List[frozenset]:
        if self._neighbor_sets is None:
            self._neighbor_sets = [frozenset(row) for row in self.adjacency]
        return self._neighbor_sets

    def neighbor_set(self, v: int) -> frozenset:
        self.check_vertex(v)
        return self._sets()[v]

    def has_edge(self, u: int, v: int) -> bool:
        return v in self._sets()[u]

    def degree(self, v: int) -> int:
        self.check_vertex(v)
        return len(self.adjacency[v])

    def max_degree(self) -> int:
        return max((len(row) for row in self.adjacency), default=0)

    def check_vertex(self, v: int) -> None:
        if isinstance(v, bool) or not isinstance(v, (int, np.integer)) or not 0 <= v < self.n:
            raise PreconditionError(f"invalid vertex id {v!r} for graph on {self.n} vertices")

    def codegree(self, vs: Sequence[int]) -> int:
        """Number of common neighbors of the distinct vertices `vs`."""
        _check_tuple(self, vs)
        sets = self._sets()
        common = set(sets[vs[0]])
        for v in vs[1:]:
            common &= sets[v]
        return len(common)

    def codegree_counts(self, s: int) -> Counter:
        """s-codegree of every s-tuple (sorted) that has at least one common neighbor."""
        counts: Counter = Counter()
        for row in self.adjacency:
            for tup in combinations(row, s):
                counts[tup] += 1
        return counts

    def max_codegree(self, s: int) -> int:
        if s == 2 and self.num_edges:
            A = adjacency_matrix(self)
            square = sp.triu(A @ A, k=1)
            return int(square.max()) if square.nnz else 0
        return max(self.codegree_counts(s).values(), default=0)

    def induced_subgraph(self, vertices: Iterable[int]) -> Tuple["Graph", List[int]]:
        """Induced subgraph relabelled to 0..k-1, plus the map new id -> old id."""
        keep = sorted(set(vertices))
        index = {v: i for i, v in enumerate(keep)}
        rows = [[index[u] for u in self.adjacency[v] if u in index] for v in keep]
        return Graph(n=len(keep), adjacency=rows), keep

    def without_edges(self, removed: Iterable[Tuple[int, int]]) -> "Graph":
        drop = {(min(u, v), max(u, v)) for u, v in removed}
        return Graph.from_edges(self.n, (e for e in self.edges() if e not in drop))


def _check_tuple(G: Graph, vs: Sequence[int]) -> None:
    for v in vs:
        G.check_vertex(v)
    if len(set(vs)) != len(vs):
        raise PreconditionError(f"tuple {tuple(vs)} repeats a vertex")


class ListAssignment(FileIOBase):
    """Color lists indexed by vertex id. Colors are positive integers, every list sorted and duplicate-free."""

    model_config = ConfigDict(frozen=True)

    lists: List[List[int]]

    _sets: Optional[List[frozenset]] = PrivateAttr(default=None)

    @field_validator("lists")
    @classmethod
    def _check_lists(cls, value: List[List[int]]) -> List[List[int]]:
        for v, colors in enumerate(value):
            if any(c <= NO_COLOR for c in colors):
                raise ValueError(f"list of vertex {v} contains a non-positive color")
            for a, b in zip(colors, colors[1:]):
                if a >= b:
                    raise ValueError(f"list of vertex {v} is not sorted and duplicate-free")
        return value

    @classmethod
    def from_sets(cls, lists: Iterable[Iterable[int]]) -> "ListAssignment":
        return cls(lists=[sorted(set(colors)) for colors in lists])

    @classmethod
    def uniform(cls, n: int, colors: Iterable[int]) -> "ListAssignment":
        palette = sorted(set(colors))
        return cls(lists=[list(palette) for _ in range(n)])

    @classmethod
    def from_string(cls, text: str) -> "ListAssignment":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as err:
            raise PreconditionError(f"list assignment is not valid JSON: line {err.lineno}: {err.msg}") from err
        if not isinstance(data, dict) or "lists" not in data:
            raise PreconditionError("list assignment JSON must be an object with a 'lists' field")
        return cls(lists=data["lists"])

    def __str__(self) -> str:
        rows = ",\n".join("    " + json.dumps(colors) for colors in self.lists)
        return '{\n  "lists": [\n' + rows + "\n  ]\n}\n" if self.lists else '{\n  "lists": []\n}\n'

    def __len__(self) -> int:
        return len(self.lists)

    def color_set(self, v: int) -> frozenset:
        if self._sets is None:
            self._sets = [frozenset(colors) for colors in self.lists]
        return self._sets[v]

    def size(self, v: int) -> int:
        return len(self.lists[v])

    def min_size(self) -> int:
        return min((len(colors) for colors in self.lists), default=0)

    def palette(self) -> List[int]:
        return sorted({c for colors in self.lists for c in colors})

    def restrict(self, vertices: Sequence[int]) -> "ListAssignment":
        return ListAssignment(lists=[list(self.lists[v]) for v in vertices])

    def shifted(self, offset: int) -> "ListAssignment":
        return ListAssignment(lists=[[c + offset for c in colors] for colors in self.lists])


class PartialColoring(FileIOBase):
    """Partial map vertex id -> color id. The domain is the key set."""

    assignment: Dict[int, int] = Field(default_factory=dict)

    @field_validator("assignment")
    @classmethod
    def _check_colors(cls, value: Dict[int, int]) -> Dict[int, int]:
        for v, c in value.items():
            if v < 0:
                raise ValueError(f"negative vertex id {v}")
            if c <= NO_COLOR:
                raise ValueError(f"vertex {v} has non-positive color {c}")
        return dict(sorted(value.items()))

    @classmethod
    def from_string(cls, text: str) -> "PartialColoring":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as err:
            raise PreconditionError(f"coloring is not valid JSON: line {err.lineno}: {err.msg}") from err
        if not isinstance(data, dict) or "coloring" not in data:
            raise PreconditionError("coloring JSON must be an object with a 'coloring' field")
        try:
            assignment = {int(v): int(c) for v, c in data["coloring"].items()}
        except (TypeError, ValueError, AttributeError) as err:
            raise PreconditionError(f"coloring field is not a vertex -> color map: {err}") from err
        return cls(assignment=assignment)

    def __str__(self) -> str:
        if not self.assignment:
            return '{\n  "coloring": {}\n}\n'
        rows = ",\n".join(f'    "{v}": {c}' for v, c in sorted(self.assignment.items()))
        return '{\n  "coloring": {\n' + rows + "\n  }\n}\n"

    @property
    def domain(self) -> Set[int]:
        return set(self.assignment)

    def get(self, v: int) -> Optional[int]:
        return self.assignment.get(v)

    def is_total(self, n: int) -> bool:
        return len(self.assignment) == n and all(v in self.assignment for v in range(n))

    def colors_used(self) -> int:
        return len(set(self.assignment.values()))

    def merged(self, other: "PartialColoring") -> "PartialColoring":
        overlap = self.domain & other.domain
        if overlap:
            raise PreconditionError(f"colorings overlap on vertices {sorted(overlap)[:5]}")
        return PartialColoring(assignment={**self.assignment, **other.assignment})

    def relabelled(self, mapping: Sequence[int]) -> "PartialColoring":
        """Translate a coloring of a relabelled subgraph back to the original vertex ids."""
        return PartialColoring(assignment={mapping[v]: c for v, c in self.assignment.items()})


class PairParams(BaseModel):
    """Parameters of a (d, ℓ, s, η)-graph-list pair.

    Attributes:
        d (float): Color-degree bound.
        ell (float): Uniform list size.
        s (int): Codegree arity, at least 2.
        eta (float): Activation probability in (0, 1).
        codegree_exponent (float): Exponent e of the codegree bound d / log^e d. Defaults to 16s.
    """

    d: float = Field(ge=0)
    ell: float = Field(gt=0)
    s: int = Field(default=2, ge=2)
    eta: float = Field(gt=0, lt=1)
    codegree_exponent: Optional[float] = Field(default=None, gt=0)

    @model_validator(mode="after")
    def _default_exponent(self) -> "PairParams":
        if self.codegree_exponent is None:
            self.codegree_exponent = 16.0 * self.s
        return self

    @property
    def codegree_bound(self) -> float:
        return codegree_bound(self.d, self.codegree_exponent)


def codegree_bound(d: float, exponent: float) -> float:
    """d / log^exponent d, clamped at 0 where the logarithm is not positive."""
    if d <= 1:
        return 0.0
    return d / math.log(d) ** exponent


class Metrics(BaseModel):
    max_color_degree: int
    max_color_codegree: int
    min_list_size: int


class PairViolation(BaseModel):
    condition: str
    detail: str

    def __str__(self) -> str:
        return f"{self.condition}: {self.detail}"


class PairReport(BaseModel):
    violations: List[PairViolation] = Field(default_factory=list)
    warnings: List[PairViolation] = Field(default_factory=list)

    @property
    def valid(self) -> bool:
        return not self.violations

    def conditions(self) -> List[str]:
        return [v.condition for v in self.violations]


def neighbors_with_color(G: Graph, L: ListAssignment, v: int, c: int) -> List[int]:
    """N_L(v, c): neighbors of v whose list contains c."""
    G.check_vertex(v)
    return [u for u in G.adjacency[v] if c in L.color_set(u)]


def color_degree(G: Graph, L: ListAssignment, v: int, c: int) -> int:
    return len(neighbors_with_color(G, L, v, c))


def s_color_codegree(G: Graph, L: ListAssignment, vs: Sequence[int], c: int) -> int:
    _check_tuple(G, vs)
    common = set(G.neighbor_set(vs[0]))
    for v in vs[1:]:
        common &= G.neighbor_set(v)
    return sum(1 for u in common if c in L.color_set(u))


def color_degree_counts(G: Graph, L: ListAssignment, v: int) -> Counter:
    """d_L(v, c) for every c in L(v) with at least one such neighbor."""
    own = L.color_set(v)
    counts: Counter = Counter()
    for u in G.adjacency[v]:
        for c in L.lists[u]:
            if c in own:
                counts[c] += 1
    return counts


def adjacency_matrix(G: Graph) -> sp.csr_matrix:
    rows = np.repeat(np.arange(G.n), [len(row) for row in G.adjacency])
    cols = np.fromiter((u for row in G.adjacency for u in row), dtype=np.int64, count=rows.size)
    return sp.csr_matrix((np.ones(rows.size, dtype=np.int64), (rows, cols)), shape=(G.n, G.n))


def _list_entries(L: ListAssignment, colors: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """(vertex, column) of every (v, c ∈ L(v)), in vertex-then-color order."""
    sizes = [len(c) for c in L.lists]
    rows = np.repeat(np.arange(len(L)), sizes)
    flat = np.fromiter((c for cs in L.lists for c in cs), dtype=np.int64, count=rows.size)
    return rows, np.searchsorted(colors, flat)


def membership_matrix(L: ListAssignment) -> Tuple[sp.csr_matrix, np.ndarray]:
    """0/1 matrix M[v, j] = 1 iff colors[j] ∈ L(v), and the sorted color array indexing its columns."""
    colors = np.array(L.palette(), dtype=np.int64)
    rows, cols = _list_entries(L, colors)
    matrix = sp.csr_matrix((np.ones(rows.size, dtype=np.int64), (rows, cols)), shape=(len(L), colors.size))
    return matrix, colors


def color_degree_matrix(G: Graph, L: ListAssignment) -> Tuple[sp.csr_matrix, np.ndarray]:
    """D[v, j] = d_L(v, colors[j]) for colors[j] ∈ L(v). Zero color-degrees are not stored."""
    M, colors = membership_matrix(L)
    if G.n == 0 or colors.size == 0:
        return sp.csr_matrix((G.n, colors.size), dtype=np.int64), colors
    D = (adjacency_matrix(G) @ M).multiply(M).tocsr()
    D.eliminate_zeros()
    return D, colors


def flat_color_degrees(G: Graph, L: ListAssignment) -> np.ndarray:
    """d_L(v, c) for every v and every c ∈ L(v), zeros included, flattened in vertex-then-color order."""
    M, colors = membership_matrix(L)
    rows, cols = _list_entries(L, colors)
    if rows.size == 0:
        return np.zeros(0, dtype=np.int64)
    neighbor_counts = (adjacency_matrix(G) @ M).tocsr()
    return np.asarray(neighbor_counts[rows, cols], dtype=np.int64).ravel()


def max_color_degree(G: Graph, L: ListAssignment) -> int:
    D, _ = color_degree_matrix(G, L)
    return int(D.data.max()) if D.nnz else 0


def color_codegree_counts(G: Graph, L: ListAssignment, s: int) -> Counter:
    """d_L(v_1..v_s, c) keyed by (sorted tuple, c), for tuples whose lists all contain c.

    Built by scanning every common neighbor w: each s-subset of the neighbors of w sharing c with w is counted once.
    """
    counts: Counter = Counter()
    for w, row in enumerate(G.adjacency):
        by_color: Dict[int, List[int]] = {}
        own = L.color_set(w)
        for v in row:
            for c in L.lists[v]:
                if c in own:
                    by_color.setdefault(c, []).append(v)
        for c, members in by_color.items():
            if len(members) >= s:
                for tup in combinations(members, s):
                    counts[(tup, c)] += 1
    return counts


def _pair_codegrees(G: Graph, L: ListAssignment) -> Iterator[Tuple[int, np.ndarray, sp.coo_matrix]]:
    """Per color c: the vertices holding c and the strict upper triangle of the c-restricted squared adjacency."""
    M, colors = membership_matrix(L)
    if G.n == 0 or colors.size == 0:
        return
    A = adjacency_matrix(G)
    by_color = M.tocsc()
    by_color.sort_indices()
    for j, c in enumerate(colors.tolist()):
        members = by_color.indices[by_color.indptr[j] : by_color.indptr[j + 1]]
        if members.size < 2:
            continue
        sub = A[members][:, members]
        yield c, members, sp.triu(sub @ sub, k=1).tocoo()


def color_codegree_events(
    G: Graph,
    L: ListAssignment,
    s: int,
    threshold: float,
    inclusive: bool = True,
) -> List[Tuple[Tuple[int, ...], int, int]]:
    """Every (tuple, c, d_L(tuple, c)) at or above `threshold` (strictly above if not `inclusive`), sorted."""
    found = []
    if s == 2:
        for c, members, square in _pair_codegrees(G, L):
            hit = square.data >= threshold if inclusive else square.data > threshold
            for i, j, k in zip(square.row[hit], square.col[hit], square.data[hit]):
                found.append(((int(members[i]), int(members[j])), c, int(k)))
    else:
        for (tup, c), k in color_codegree_counts(G, L, s).items():
            if k >= threshold if inclusive else k > threshold:
                found.append((tup, c, k))
    found.sort()
    return found


def max_color_codegree(G: Graph, L: ListAssignment, s: int = 2) -> int:
    if s == 2:
        return max((int(square.data.max()) for _, _, square in _pair_codegrees(G, L) if square.nnz), default=0)
    return max(color_codegree_counts(G, L, s).values(), default=0)


def max_metrics(G: Graph, L: ListAssignment, s: int = 2) -> Metrics:
    """Maximum color-degree, maximum s-color-codegree and minimum list size of (G, L)."""
    if s < 2:
        raise PreconditionError(f"codegree arity must be at least 2, got {s}")
    return Metrics(
        max_color_degree=max_color_degree(G, L),
        max_color_codegree=max_color_codegree(G, L, s),
        min_list_size=L.min_size(),
    )


def preprocess(G: Graph, L: ListAssignment, ell: int) -> Tuple[Graph, ListAssignment]:
    """Trim every list to its `ell` smallest colors and drop edges whose endpoints share no color."""
    if len(L) != G.n:
        raise PreconditionError(f"list assignment covers {len(L)} vertices, graph has {G.n}")
    for v in range(G.n):
        if L.size(v) < ell:
            raise PreconditionError(f"vertex {v} has {L.size(v)} colors, fewer than ell={ell}")
    trimmed = ListAssignment(lists=[colors[:ell] for colors in L.lists])
    kept = [(u, v) for u, v in G.edges() if trimmed.color_set(u) & trimmed.color_set(v)]
    if len(kept) == G.num_edges:
        return G, trimmed
    return Graph.from_edges(G.n, kept), trimmed


def validate_pair(G: Graph, L: ListAssignment, p: PairParams, strict: bool = True) -> PairReport:
    """Check every bullet of the (d, ℓ, s, η)-graph-list pair definition.

    In non-strict mode the η window and the codegree bound are reported as warnings instead of violations.
    """
    report = PairReport()
    soft = report.violations if strict else report.warnings

    if not 4 * p.eta * p.d < p.ell:
        report.violations.append(PairViolation(condition="4ηd < ℓ", detail=f"4·{p.eta}·{p.d} >= {p.ell}"))
    if not p.ell < 8 * p.d:
        report.violations.append(PairViolation(condition="ℓ < 8d", detail=f"{p.ell} >= 8·{p.d}"))

    if p.d <= 1:
        soft.append(PairViolation(condition="η window", detail=f"log d <= 0 for d={p.d}"))
    else:
        log_d = math.log(p.d)
        lower, upper = 1 / log_d**2, 1 / (4 * log_d)
        if not lower < p.eta < upper:
            soft.append(PairViolation(condition="η window", detail=f"η={p.eta} outside ({lower:.6g}, {upper:.6g})"))

    wrong_size = [v for v in range(G.n) if L.size(v) != p.ell]
    if wrong_size:
        report.violations.append(
            PairViolation(condition="|L(v)| = ℓ", detail=f"{len(wrong_size)} vertices, e.g. {wrong_size[:5]}"),
        )

    D, colors = color_degree_matrix(G, L)
    entries = D.tocoo()
    hit = entries.data > p.d
    over = sorted(zip(entries.row[hit].tolist(), colors[entries.col[hit]].tolist(), entries.data[hit].tolist()))
    if over:
        v, c, k = over[0]
        report.violations.append(
            PairViolation(condition="d_L(v,c) ≤ d", detail=f"d_L({v},{c}) = {k} > {p.d}, {len(over)} pairs in total"),
        )

    bound = p.codegree_bound
    over_codegree = color_codegree_events(G, L, p.s, bound, inclusive=False)
    if over_codegree:
        tup, c, k = over_codegree[0]
        soft.append(
            PairViolation(
                condition="s-color-codegree",
                detail=f"d_L({tup}, {c}) = {k} > d/log^{p.codegree_exponent:g} d = {bound:.6g}",
            ),
        )

    for u, v in G.edges():
        if not L.color_set(u) & L.color_set(v):
            report.violations.append(PairViolation(condition="shared-list edges", detail=f"edge ({u}, {v})"))

    return report


def coloring_violations(G: Graph, phi: PartialColoring, L: Optional[ListAssignment] = None) -> List[str]:
    """Every monochromatic edge and every color outside its vertex's list."""
    problems = []
    for v, c in phi.assignment.items():
        if not 0 <= v < G.n:
            problems.append(f"vertex {v} is not in the graph")
        elif L is not None and c not in L.color_set(v):
            problems.append(f"vertex {v} has color {c} outside its list")
    for u, v in G.edges():
        cu, cv = phi.assignment.get(u), phi.assignment.get(v)
        if cu is not None and cu == cv:
            problems.append(f"edge ({u}, {v}) is monochromatic with color {cu}")
    return problems


def is_proper(G: Graph, phi: PartialColoring, L: Optional[ListAssignment] = None) -> bool:
    return not coloring_violations(G, phi, L)


def check_proper(G: Graph, phi: PartialColoring, L: Optional[ListAssignment] = None, what: str = "coloring") -> None:
    """Raise `InvariantError` naming the first few problems if `phi` is not a proper (list) coloring of G."""
    problems = coloring_violations(G, phi, L)
    if problems:
        raise InvariantError(f"{what} is improper: " + "; ".join(problems[:5]))
