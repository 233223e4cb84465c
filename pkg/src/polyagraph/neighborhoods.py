"""Rooted neighborhoods, age-marked pattern counting, and ball overlap checks.

This module turns a generated multigraph into the objects local-limit
statistics are computed from:

* ``extract_ball`` cuts out the induced subgraph on all vertices within
  graph distance ``r`` of a root, keeping multi-edges and self-loops, and
  marks every vertex with its relative age (arrival index divided by the
  graph size).
* ``TreePattern`` describes a small rooted tree whose nodes carry target
  ages; a ball matches the pattern when some root-preserving isomorphism
  maps every vertex into the age window ``target +- tolerance``.
* ``count_patterns`` counts the roots whose ``r``-ball matches a pattern,
  which is the empirical quantity that converges to the limit-tree
  probability of the same event.
* ``two_ball_disjointness`` estimates how often the ``r``-balls of two
  independently chosen roots share a vertex, the quantity that must vanish
  for local statistics of distinct roots to decorrelate.

Isomorphism testing uses a canonical signature (an AHU-style encoding
refined by edge multiplicity, loop count, and optionally an age bucket)
whenever both sides are trees once loops are set aside, and falls back to
backtracking search with degree, distance, loop, and mark pruning
otherwise.  Age-window acceptance always uses the search: a ball matches
if ANY root-preserving isomorphism satisfies the windows.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ParameterError
from .params import stream

__all__ = [
    "RootedNeighborhood",
    "TreePattern",
    "ahu_signature",
    "count_patterns",
    "extract_ball",
    "load_pattern",
    "rooted_isomorphic",
    "save_pattern",
    "two_ball_disjointness",
    "write_pattern_counts",
]


# ---------------------------------------------------------------------------
# Undirected multigraph view


class _UndirectedView:
    """Adjacency-list view of an undirected multigraph on vertices 1..n.

    Parallel edges are kept as separate entries; a self-loop is stored as a
    single entry on its vertex.  Built once per graph and shared by every
    ball extraction.
    """

    __slots__ = ("n", "us", "vs", "off", "nbr", "eid", "loops", "nonloop_deg")

    def __init__(self, us, vs, n: int):
        us = np.asarray(us, dtype=np.int64)
        vs = np.asarray(vs, dtype=np.int64)
        if us.shape != vs.shape or us.ndim != 1:
            raise ParameterError("edge endpoint arrays must be 1-d and equal length")
        n = int(n)
        if n < 1:
            raise ParameterError(f"need at least one vertex, got n={n}")
        if us.size and (us.min() < 1 or vs.min() < 1 or us.max() > n or vs.max() > n):
            raise ParameterError("edge endpoints must lie in 1..n")
        self.n = n
        self.us = us
        self.vs = vs
        loop = us == vs
        # one directed stub per non-loop edge endpoint, one entry per loop
        src = np.concatenate([us[~loop], vs[~loop], us[loop]])
        dst = np.concatenate([vs[~loop], us[~loop], us[loop]])
        ids = np.arange(us.size, dtype=np.int64)
        eid = np.concatenate([ids[~loop], ids[~loop], ids[loop]])
        order = np.argsort(src, kind="stable")
        src, dst, eid = src[order], dst[order], eid[order]
        counts = np.bincount(src, minlength=n + 1)
        off = np.zeros(n + 2, dtype=np.int64)
        np.cumsum(counts, out=off[1:])
        self.off = off.tolist()
        self.nbr = dst.tolist()
        self.eid = eid.tolist()
        self.loops = np.bincount(us[loop], minlength=n + 1).astype(np.int64)
        self.nonloop_deg = (
            np.bincount(us[~loop], minlength=n + 1)
            + np.bincount(vs[~loop], minlength=n + 1)
        ).astype(np.int64)

    @classmethod
    def from_graph(cls, graph) -> "_UndirectedView":
        if isinstance(graph, cls):
            return graph
        if isinstance(graph, tuple) and len(graph) == 3:
            us, vs, n = graph
            return cls(us, vs, n)
        try:
            us, vs = graph.undirected_edges()
            n = graph.n
        except AttributeError as exc:
            raise ParameterError(
                "graph must expose undirected_edges() and n, or be a (us, vs, n) tuple"
            ) from exc
        return cls(us, vs, n)

    def ball(self, root: int, r: int, cap: int | None = None):
        """BFS distances within radius r; None if the ball exceeds ``cap``."""
        root = int(root)
        if not 1 <= root <= self.n:
            raise ParameterError(f"root {root} outside 1..{self.n}")
        if r < 0:
            raise ParameterError(f"radius must be >= 0, got {r}")
        dist = {root: 0}
        if cap is not None and len(dist) > cap:
            return None
        frontier = [root]
        off, nbr = self.off, self.nbr
        for d in range(1, r + 1):
            nxt = []
            for v in frontier:
                for i in range(off[v], off[v + 1]):
                    u = nbr[i]
                    if u == v or u in dist:
                        continue
                    dist[u] = d
                    if cap is not None and len(dist) > cap:
                        return None
                    nxt.append(u)
            if not nxt:
                break
            frontier = nxt
        return dist

    def induced_edge_ids(self, dist: dict) -> list:
        """Ids of edges with both endpoints in the ball (loops included once)."""
        off, nbr, eid = self.off, self.nbr, self.eid
        out = []
        for v in dist:
            for i in range(off[v], off[v + 1]):
                u = nbr[i]
                if u >= v and u in dist:
                    out.append(eid[i])
        return out

    def induced_edge_count(self, dist: dict) -> int:
        off, nbr = self.off, self.nbr
        stubs = 0
        loops = 0
        for v in dist:
            loops += int(self.loops[v])
            for i in range(off[v], off[v + 1]):
                u = nbr[i]
                if u != v and u in dist:
                    stubs += 1
        return stubs // 2 + loops


# ---------------------------------------------------------------------------
# Rooted neighborhoods


@dataclass(frozen=True)
class RootedNeighborhood:
    """Induced subgraph on all vertices within ``radius`` of ``root``.

    Vertices keep their original labels; ``host_size`` is the size of the
    graph the ball was cut from, so the age mark of vertex v is
    v / host_size.  ``edges`` lists undirected pairs (a, b) with a <= b,
    one entry per parallel edge, self-loops as (v, v).
    """

    root: int
    radius: int
    host_size: int
    vertices: tuple
    distances: tuple
    edges: tuple

    def __post_init__(self):
        if self.root not in self.vertices:
            raise ParameterError("root must be one of the ball's vertices")
        if len(self.vertices) != len(self.distances):
            raise ParameterError("one distance per vertex required")
        if tuple(sorted(self.vertices)) != self.vertices:
            raise ParameterError("vertices must be sorted")
        vset = set(self.vertices)
        if len(vset) != len(self.vertices):
            raise ParameterError("duplicate vertex in ball")
        for a, b in self.edges:
            if a > b or a not in vset or b not in vset:
                raise ParameterError(f"edge ({a}, {b}) not inside the ball")
        idx = {v: i for i, v in enumerate(self.vertices)}
        if self.distances[idx[self.root]] != 0:
            raise ParameterError("root must be at distance 0")

    @property
    def size(self) -> int:
        return len(self.vertices)

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    @property
    def marks(self) -> tuple:
        return tuple(v / self.host_size for v in self.vertices)

    def mark_of(self, v: int) -> float:
        if v not in set(self.vertices):
            raise ParameterError(f"vertex {v} not in ball")
        return v / self.host_size

    def distance_of(self, v: int) -> int:
        try:
            return self.distances[self.vertices.index(v)]
        except ValueError:
            raise ParameterError(f"vertex {v} not in ball") from None

    @property
    def is_tree(self) -> bool:
        # connected by construction, so tree iff exactly size-1 edges
        return self.edge_count == self.size - 1


def extract_ball(graph, v: int, r: int) -> RootedNeighborhood:
    """Cut the radius-``r`` ball around vertex ``v`` out of ``graph``.

    ``graph`` is either a generated evolving graph or a raw
    ``(us, vs, n)`` triple of edge endpoint arrays plus vertex count.
    """
    view = _UndirectedView.from_graph(graph)
    dist = view.ball(v, r)
    verts = tuple(sorted(dist))
    eids = view.induced_edge_ids(dist)
    us, vs = view.us, view.vs
    edges = sorted(
        (int(min(us[e], vs[e])), int(max(us[e], vs[e]))) for e in eids
    )
    return RootedNeighborhood(
        root=int(v),
        radius=int(r),
        host_size=view.n,
        vertices=verts,
        distances=tuple(dist[u] for u in verts),
        edges=tuple(edges),
    )


# ---------------------------------------------------------------------------
# Tree patterns


@dataclass(frozen=True)
class TreePattern:
    """A rooted tree with a target age per node.

    Node 0 is the root (``parents[0] == -1``); every other node points to a
    parent with a smaller index.  ``ages`` are target relative ages in
    [0, 1]; a vertex mapped onto node i must have its age mark within
    ``tolerance`` of ``ages[i]``.  A ``tolerance`` of None defers to the
    matching call (which defaults to 1/r).
    """

    parents: tuple
    ages: tuple
    tolerance: float | None = None
    name: str | None = None

    def __post_init__(self):
        parents = tuple(int(p) for p in self.parents)
        ages = tuple(float(a) for a in self.ages)
        object.__setattr__(self, "parents", parents)
        object.__setattr__(self, "ages", ages)
        if not parents or parents[0] != -1:
            raise ParameterError("node 0 must be the root (parent -1)")
        for i, p in enumerate(parents[1:], start=1):
            if not 0 <= p < i:
                raise ParameterError(
                    f"node {i} must point to an earlier node, got parent {p}"
                )
        if len(ages) != len(parents):
            raise ParameterError("one target age per node required")
        for a in ages:
            if not 0.0 <= a <= 1.0:
                raise ParameterError(f"target ages must lie in [0, 1], got {a}")
        if self.tolerance is not None and self.tolerance < 0:
            raise ParameterError("tolerance must be >= 0")

    @property
    def size(self) -> int:
        return len(self.parents)

    @property
    def depth(self) -> int:
        return max(self.node_depths)

    @property
    def node_depths(self) -> tuple:
        depths = [0] * self.size
        for i in range(1, self.size):
            depths[i] = depths[self.parents[i]] + 1
        return tuple(depths)

    @property
    def root_degree(self) -> int:
        return sum(1 for p in self.parents if p == 0)

    def children(self, i: int) -> tuple:
        return tuple(j for j, p in enumerate(self.parents) if p == i)

    def to_json(self) -> dict:
        out = {
            "parents": list(self.parents),
            "ages": list(self.ages),
            "tolerance": self.tolerance,
        }
        if self.name is not None:
            out["name"] = self.name
        return out

    @classmethod
    def from_json(cls, payload: dict) -> "TreePattern":
        return cls(
            parents=tuple(payload["parents"]),
            ages=tuple(payload["ages"]),
            tolerance=payload.get("tolerance"),
            name=payload.get("name"),
        )


def save_pattern(pattern: TreePattern, path) -> None:
    Path(path).write_text(json.dumps(pattern.to_json(), indent=2) + "\n")


def load_pattern(path) -> TreePattern:
    return TreePattern.from_json(json.loads(Path(path).read_text()))


# ---------------------------------------------------------------------------
# Isomorphism


class _NormalForm:
    """Zero-based relabeling of a rooted marked multigraph for matching."""

    __slots__ = ("size", "root", "dist", "mark", "loops", "deg", "adj", "edge_total")

    def __init__(self, size, root, dist, mark, loops, adj):
        self.size = size
        self.root = root
        self.dist = dist
        self.mark = mark
        self.loops = loops
        self.adj = adj  # adj[i] = {j: multiplicity} over non-loop edges
        self.deg = [
            sum(adj[i].values()) + 2 * loops[i] for i in range(size)
        ]
        self.edge_total = sum(self.deg[i] for i in range(size)) // 2

    @property
    def skeleton_is_tree(self) -> bool:
        pairs = sum(len(a) for a in self.adj) // 2
        return pairs == self.size - 1


def _nf_from_ball(ball: RootedNeighborhood) -> _NormalForm:
    idx = {v: i for i, v in enumerate(ball.vertices)}
    size = ball.size
    loops = [0] * size
    adj = [dict() for _ in range(size)]
    for a, b in ball.edges:
        if a == b:
            loops[idx[a]] += 1
        else:
            i, j = idx[a], idx[b]
            adj[i][j] = adj[i].get(j, 0) + 1
            adj[j][i] = adj[j].get(i, 0) + 1
    return _NormalForm(
        size=size,
        root=idx[ball.root],
        dist=list(ball.distances),
        mark=[v / ball.host_size for v in ball.vertices],
        loops=loops,
        adj=adj,
    )


def _nf_from_pattern(pattern: TreePattern) -> _NormalForm:
    size = pattern.size
    adj = [dict() for _ in range(size)]
    for i in range(1, size):
        p = pattern.parents[i]
        adj[i][p] = 1
        adj[p][i] = 1
    return _NormalForm(
        size=size,
        root=0,
        dist=list(pattern.node_depths),
        mark=list(pattern.ages),
        loops=[0] * size,
        adj=adj,
    )


def _normal_form(obj) -> _NormalForm:
    if isinstance(obj, _NormalForm):
        return obj
    if isinstance(obj, RootedNeighborhood):
        return _nf_from_ball(obj)
    if isinstance(obj, TreePattern):
        return _nf_from_pattern(obj)
    raise ParameterError(
        f"expected RootedNeighborhood or TreePattern, got {type(obj).__name__}"
    )


def _signature(nf: _NormalForm, age_bucket: float | None):
    """Canonical rooted encoding; requires a tree skeleton."""
    if not nf.skeleton_is_tree:
        raise ParameterError(
            "canonical signatures need a tree skeleton; use rooted_isomorphic"
        )

    def bucket(i):
        if age_bucket is None:
            return 0
        return int(nf.mark[i] // age_bucket)

    def sig(i, parent):
        kids = sorted(
            sig(j, i) for j in nf.adj[i] if j != parent
        )
        mult = nf.adj[i][parent] if parent is not None else 0
        return (nf.loops[i], mult, bucket(i), tuple(kids))

    return sig(nf.root, None)


def ahu_signature(obj, *, age_bucket: float | None = None):
    """Canonical signature of a rooted tree-skeleton (multi)graph.

    Two such graphs are root-preservingly isomorphic (ignoring marks) iff
    their signatures with ``age_bucket=None`` are equal.  Passing an
    ``age_bucket`` width refines the signature by the age bucket of each
    vertex, giving a coarse marked comparison.  Graphs whose non-loop
    skeleton contains a cycle are rejected.
    """
    return _signature(_normal_form(obj), age_bucket)


def _match(a: _NormalForm, b: _NormalForm, tol: float | None) -> bool:
    """True if some root-preserving isomorphism maps a onto b.

    ``tol`` of None ignores marks entirely; otherwise every matched pair
    must satisfy |mark_a - mark_b| <= tol.
    """
    if a.size != b.size or a.edge_total != b.edge_total:
        return False
    if a.loops[a.root] != b.loops[b.root] or a.deg[a.root] != b.deg[b.root]:
        return False
    prof_a = sorted(zip(a.dist, a.deg, a.loops))
    prof_b = sorted(zip(b.dist, b.deg, b.loops))
    if prof_a != prof_b:
        return False
    if tol is not None and abs(a.mark[a.root] - b.mark[b.root]) > tol:
        return False

    # BFS-like order: every non-root node is placed after one of its
    # neighbors, so the adjacency check prunes immediately.
    order = sorted(range(a.size), key=lambda i: (a.dist[i], -a.deg[i], i))
    mapped = [-1] * a.size
    inv = [-1] * b.size

    def ok(u, w):
        if b.dist[w] != a.dist[u] or b.deg[w] != a.deg[u]:
            return False
        if b.loops[w] != a.loops[u]:
            return False
        if tol is not None and abs(a.mark[u] - b.mark[w]) > tol:
            return False
        for x, c in a.adj[u].items():
            y = mapped[x]
            if y >= 0 and b.adj[w].get(y, 0) != c:
                return False
        for y, c in b.adj[w].items():
            x = inv[y]
            if x >= 0 and a.adj[u].get(x, 0) != c:
                return False
        return True

    def place(k):
        if k == a.size:
            return True
        u = order[k]
        cands = range(b.size) if u != a.root else (b.root,)
        for w in cands:
            if inv[w] >= 0 or not ok(u, w):
                continue
            mapped[u] = w
            inv[w] = u
            if place(k + 1):
                return True
            mapped[u] = -1
            inv[w] = -1
        return False

    return place(0)


def _resolve_tol(x, y, marked: bool, tol: float | None) -> float | None:
    if not marked:
        return None
    if tol is not None:
        return float(tol)
    for obj in (x, y):
        if isinstance(obj, TreePattern) and obj.tolerance is not None:
            return float(obj.tolerance)
    for obj in (x, y):
        if isinstance(obj, RootedNeighborhood) and obj.radius >= 1:
            return 1.0 / obj.radius
    raise ParameterError(
        "marked comparison needs a tolerance (argument, pattern, or ball radius)"
    )


def rooted_isomorphic(x, y, *, marked: bool = False, tol: float | None = None) -> bool:
    """Root-preserving isomorphism test between balls and/or patterns.

    Unmarked mode ignores ages.  Marked mode accepts when ANY
    root-preserving isomorphism puts every matched pair of ages within
    ``tol`` of each other; the tolerance falls back to the pattern's own,
    then to 1/radius of a ball argument.
    """
    nx, ny = _normal_form(x), _normal_form(y)
    if not marked and nx.skeleton_is_tree and ny.skeleton_is_tree:
        return _signature(nx, None) == _signature(ny, None)
    return _match(nx, ny, _resolve_tol(x, y, marked, tol))


# ---------------------------------------------------------------------------
# Pattern counting


def _count_tolerance(pattern: TreePattern, r: int, tolerance: float | None) -> float:
    if tolerance is not None:
        if tolerance < 0:
            raise ParameterError("tolerance must be >= 0")
        return float(tolerance)
    if pattern.tolerance is not None:
        return float(pattern.tolerance)
    if r >= 1:
        return 1.0 / r
    raise ParameterError("r=0 counting needs an explicit tolerance")


def count_patterns(graph, pattern: TreePattern, r: int, *, tolerance: float | None = None) -> int:
    """Number of roots whose r-ball matches ``pattern`` within age windows.

    Every vertex of the graph is tried as a root; the ball must be
    isomorphic to the pattern as a rooted tree, with some isomorphism
    putting each vertex's relative age within the window around its
    node's target age.
    """
    if r < 0:
        raise ParameterError(f"radius must be >= 0, got {r}")
    if pattern.depth > r:
        raise ParameterError(
            f"pattern depth {pattern.depth} exceeds ball radius {r}"
        )
    view = _UndirectedView.from_graph(graph)
    tol = _count_tolerance(pattern, r, tolerance)
    pat = _nf_from_pattern(pattern)
    n = view.n
    size = pattern.size

    marks = np.arange(n + 1, dtype=np.float64) / n
    cand = np.abs(marks - pattern.ages[0]) <= tol + 1e-12
    if r >= 1:
        # at r >= 1 every neighbor of the root is in the ball
        cand &= view.nonloop_deg == pattern.root_degree
    cand &= view.loops == 0
    cand[0] = False
    roots = np.flatnonzero(cand)

    count = 0
    loops = view.loops
    for root in roots.tolist():
        dist = view.ball(root, r, cap=size)
        if dist is None or len(dist) != size:
            continue
        if any(loops[v] for v in dist):
            continue
        if view.induced_edge_count(dist) != size - 1:
            continue
        verts = sorted(dist)
        idx = {v: i for i, v in enumerate(verts)}
        adj = [dict() for _ in range(size)]
        off, nbr = view.off, view.nbr
        for v in verts:
            i = idx[v]
            row = adj[i]
            for k in range(off[v], off[v + 1]):
                u = nbr[k]
                if u != v and u in dist:
                    j = idx[u]
                    row[j] = row.get(j, 0) + 1
        nf = _NormalForm(
            size=size,
            root=idx[root],
            dist=[dist[v] for v in verts],
            mark=[v / n for v in verts],
            loops=[0] * size,
            adj=adj,
        )
        if _match(nf, pat, tol):
            count += 1
    return count


def write_pattern_counts(
    graph,
    patterns,
    r: int,
    path,
    *,
    tolerance: float | None = None,
    extra_meta: dict | None = None,
):
    """Count each pattern and write a CSV of (pattern, n, r, count, frequency).

    The first line is a '# '-prefixed JSON object with the run metadata.
    Returns the list of row dicts.
    """
    view = _UndirectedView.from_graph(graph)
    rows = []
    for k, pattern in enumerate(patterns):
        name = pattern.name if pattern.name is not None else f"pattern-{k}"
        count = count_patterns(view, pattern, r, tolerance=tolerance)
        rows.append(
            {
                "pattern": name,
                "n": view.n,
                "r": int(r),
                "count": count,
                "frequency": count / view.n,
            }
        )
    meta = {"n": view.n, "r": int(r), "patterns": len(rows)}
    if tolerance is not None:
        meta["tolerance"] = float(tolerance)
    if extra_meta:
        meta.update(extra_meta)
    path = Path(path)
    with path.open("w") as fh:
        fh.write("# " + json.dumps(meta, sort_keys=True) + "\n")
        fh.write("pattern,n,r,count,frequency\n")
        for row in rows:
            fh.write(
                "%s,%d,%d,%d,%.17g\n"
                % (row["pattern"], row["n"], row["r"], row["count"], row["frequency"])
            )
    return rows


# ---------------------------------------------------------------------------
# Ball overlap


def two_ball_disjointness(
    graph,
    r: int,
    seeds=None,
    reps: int = 1000,
    *,
    rng: np.random.Generator | None = None,
) -> float:
    """Fraction of independent uniform root pairs with disjoint r-balls.

    Draws ``reps`` pairs (u, v) independently and uniformly (u == v is
    possible and counts as overlapping), extracts both radius-``r`` balls,
    and reports the fraction of pairs whose vertex sets are disjoint.
    ``seeds`` is a single seed or an iterable of seeds whose per-seed
    fractions are averaged; an explicit ``rng`` overrides it.
    """
    if reps < 1:
        raise ParameterError(f"reps must be >= 1, got {reps}")
    view = _UndirectedView.from_graph(graph)
    if rng is not None:
        gens = [rng]
    else:
        if seeds is None:
            seeds = (0,)
        elif np.isscalar(seeds):
            seeds = (int(seeds),)
        gens = [stream(int(s), "two-ball-disjointness") for s in seeds]
    fractions = []
    for gen in gens:
        pairs = gen.integers(1, view.n + 1, size=(int(reps), 2))
        disjoint = 0
        for u, v in pairs.tolist():
            if u == v:
                continue
            bu = view.ball(u, r)
            bv = view.ball(v, r)
            small, big = (bu, bv) if len(bu) <= len(bv) else (bv, bu)
            if not any(w in big for w in small):
                disjoint += 1
        fractions.append(disjoint / reps)
    return float(np.mean(fractions))
