"""Sequential growth of the five attachment models.

All five rules share the same outer loop: vertex v = 3..n arrives with m_v
edge stubs and attaches them to earlier vertices (or, where allowed, to
itself), each target u drawn with probability proportional to its degree
plus the fitness delta. They differ in when degrees update and whether
self-loops exist:

  A  degrees update after every edge; self-loops allowed; the self weight
     at edge j is d_v + 1 + j*delta/m_v
  B  as A but self weight d_v + (j-1)*delta/m_v, so edge 1 never self-loops
  D  no self-loops; target degrees update between consecutive edges of the
     same vertex, the arriving vertex's own stubs do not count until its
     phase ends
  E  no self-loops; all m_v targets drawn i.i.d. against degrees frozen at
     time v-1 (multi-edges possible)
  F  as E but without replacement, renormalizing among unchosen targets
     per draw (output is a simple graph); if m_v >= v-1 the vertex simply
     connects to all predecessors

The sampler keeps an endpoint list (vertex u appears once per unit of
degree), so one attachment costs one uniform plus one list lookup. The
delta mass rides on a separate uniform-over-predecessors atom when
delta >= 0 and is folded into a rejection step when delta < 0.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .params import ModelSpec, sample_out_degrees, stream

__all__ = [
    "EvolvingGraph",
    "AttachmentStep",
    "attachment_probabilities",
    "step_model_A",
    "step_model_B",
    "step_model_D",
    "step_model_E",
    "step_model_F",
    "generate",
    "generate_batch",
]

_BLOCK = 8192
_F_REJECT_CAP = 200


class _UBuf:
    """Block-buffered uniforms as Python floats; duck-types Generator.random()."""

    __slots__ = ("_rng", "_buf", "_i")

    def __init__(self, rng):
        self._rng = rng
        self._buf = ()
        self._i = 0

    def random(self):
        i = self._i
        buf = self._buf
        if i >= len(buf):
            buf = self._buf = self._rng.random(_BLOCK).tolist()
            i = 0
        self._i = i + 1
        return buf[i]


class EvolvingGraph:
    """A growing multigraph on vertices 1..n.

    Construction starts from the two-vertex initial graph of the spec and
    inserts vertices 3..n in arrival order. Attachment edges are stored as
    (source v, edge index j, target u) triples; the initial edges live in
    spec.initial_edges and are not part of the attachment list.

    The degree ledger counts a placed self-loop as 2 at its endpoint. For
    models A and B the arriving vertex's own stubs count during its phase;
    for D, E, F they count only once the phase ends. These conventions make
    every per-step normalizer an exact telescoping identity (asserted in
    the step functions).
    """

    def __init__(self, spec: ModelSpec, n: int, out_degrees):
        if n < 2:
            raise ParameterError("need n >= 2")
        m = [int(x) for x in out_degrees]
        if len(m) != n + 1:
            raise ParameterError(f"out_degrees must be 1-indexed of length n+1, got {len(m)}")
        if m[1] != 1 or m[2] != 1:
            raise ParameterError("seed vertices must have out-degree slot 1")
        if n > 2 and min(m[3:]) < 1:
            raise ParameterError("out-degrees must be >= 1")
        self.spec = spec
        self.n = n
        self.seed = None
        self._m = m
        self._delta = spec.delta
        self._variant = spec.variant
        self._deg = [0] * (n + 1)
        a1, a2 = spec.initial_degrees
        self._deg[1] = a1
        self._deg[2] = a2
        self._endpoints = []
        for u, w in spec.initial_edges:
            self._endpoints.append(u)
            self._endpoints.append(w)
        if spec.variant == "F":
            cap = np.minimum(np.asarray(m[3:], dtype=np.int64), np.arange(2, n, dtype=np.int64))
            total = int(cap.sum()) if n > 2 else 0
        else:
            total = int(sum(m[3:]))
        self._src = np.empty(total, dtype=np.int32)
        self._eidx = np.empty(total, dtype=np.int32)
        self._tgt = np.empty(total, dtype=np.int32)
        self._ne = 0
        self._mprev = 2  # m_1 + m_2
        self._phase_v = 0
        self._placed = 0

    # -- phase protocol ------------------------------------------------

    def begin_vertex(self, v: int) -> None:
        if self._phase_v:
            raise ParameterError(f"phase for vertex {self._phase_v} still open")
        if self._endpoints is None:
            raise ParameterError("a deserialized graph cannot grow further")
        expect = self.spec.a_sum + 2 * self._ne
        if v < 3 or v > self.n or len(self._endpoints) != expect:
            raise ParameterError(f"cannot begin vertex {v} here")
        self._phase_v = v
        self._placed = 0

    def place_edge(self, v: int, j: int, u: int) -> None:
        """Record attachment (v, j, u) and apply the immediate-update rule
        of models A/B/D. Models E/F use apply_vertex instead."""
        k = self._ne
        self._src[k] = v
        self._eidx[k] = j
        self._tgt[k] = u
        self._ne = k + 1
        self._placed += 1
        if u == v:
            self._deg[v] += 2
        else:
            self._deg[u] += 1
            self._endpoints.append(u)
            if self._variant != "D":
                self._deg[v] += 1

    def apply_vertex(self, v: int, targets) -> None:
        """Record a frozen-law phase (models E/F): edges get indices 1..k,
        degree and endpoint updates land only after all draws."""
        deg = self._deg
        ends = self._endpoints
        k = self._ne
        for j, u in enumerate(targets, start=1):
            self._src[k] = v
            self._eidx[k] = j
            self._tgt[k] = u
            k += 1
        self._ne = k
        self._placed += len(targets)
        for u in targets:
            deg[u] += 1
            ends.append(u)

    def finish_vertex(self, v: int) -> None:
        if self._phase_v != v:
            raise ParameterError(f"no open phase for vertex {v}")
        if self._variant in ("D", "E", "F"):
            self._deg[v] = self._placed
        self._endpoints.extend([v] * self._deg[v])
        # realized count: differs from m_v only for a capped model-F vertex
        self._mprev += self._placed
        self._phase_v = 0

    def insert_vertex(self, v: int, rng, check: bool = False) -> None:
        """Run the whole phase of vertex v under the spec's model."""
        self.begin_vertex(v)
        variant = self._variant
        m_v = self._m[v]
        if variant in ("A", "B"):
            step = step_model_A if variant == "A" else step_model_B
            for j in range(1, m_v + 1):
                if check:
                    _check_normalization(self, v, j)
                self.place_edge(v, j, step(self, v, j, rng))
        elif variant == "D":
            for j in range(1, m_v + 1):
                if check:
                    _check_normalization(self, v, j)
                self.place_edge(v, j, step_model_D(self, v, j, rng))
        elif variant == "E":
            if check:
                _check_normalization(self, v, 1)
            self.apply_vertex(v, step_model_E(self, v, rng))
        else:
            if check:
                _check_normalization(self, v, 1)
            self.apply_vertex(v, step_model_F(self, v, rng))
        self.finish_vertex(v)

    # -- completed-graph queries ----------------------------------------

    @property
    def out_degrees(self) -> np.ndarray:
        """Drawn out-degrees, 1-indexed (slot 0 unused)."""
        return np.asarray(self._m, dtype=np.int64)

    @property
    def degrees(self) -> np.ndarray:
        """Current degree ledger, 1-indexed (slot 0 unused)."""
        return np.asarray(self._deg, dtype=np.int64)

    @property
    def edges(self) -> list:
        """Attachment triples (v, j, u) in placement order."""
        ne = self._ne
        return list(
            zip(
                self._src[:ne].tolist(),
                self._eidx[:ne].tolist(),
                self._tgt[:ne].tolist(),
            )
        )

    @property
    def num_attachments(self) -> int:
        return self._ne

    @property
    def total_degree(self) -> int:
        return sum(self._deg)

    def degree_of(self, u: int) -> int:
        return self._deg[u]

    def undirected_edges(self):
        """(us, vs) arrays over all edges, initial graph included."""
        iu = np.array([e[0] for e in self.spec.initial_edges], dtype=np.int32)
        iv = np.array([e[1] for e in self.spec.initial_edges], dtype=np.int32)
        return (
            np.concatenate([iu, self._src[: self._ne]]),
            np.concatenate([iv, self._tgt[: self._ne]]),
        )

    @property
    def attachment_arrays(self):
        """(sources, edge indices, targets) arrays, attachment edges only."""
        ne = self._ne
        return self._src[:ne].copy(), self._eidx[:ne].copy(), self._tgt[:ne].copy()

    def recompute_degrees(self) -> np.ndarray:
        """Degree vector rebuilt from the edge list alone (ledger check)."""
        d = np.zeros(self.n + 1, dtype=np.int64)
        for u, w in self.spec.initial_edges:
            d[u] += 1
            d[w] += 1
        ne = self._ne
        np.add.at(d, self._src[:ne], 1)
        np.add.at(d, self._tgt[:ne], 1)
        return d

    def trajectory(self) -> tuple:
        """Hashable key: (out-degrees of 3..n, attachment triples)."""
        return (tuple(self._m[3:]), tuple(self.edges))

    def copy(self) -> "EvolvingGraph":
        """Independent snapshot of the growth state (mid-phase allowed)."""
        g = EvolvingGraph.__new__(EvolvingGraph)
        g.spec = self.spec
        g.n = self.n
        g.seed = self.seed
        g._m = list(self._m)
        g._delta = self._delta
        g._variant = self._variant
        g._deg = list(self._deg)
        g._endpoints = None if self._endpoints is None else list(self._endpoints)
        g._src = self._src.copy()
        g._eidx = self._eidx.copy()
        g._tgt = self._tgt.copy()
        g._ne = self._ne
        g._mprev = self._mprev
        g._phase_v = self._phase_v
        g._placed = self._placed
        return g

    def __eq__(self, other):
        return (
            isinstance(other, EvolvingGraph)
            and self.spec == other.spec
            and self.n == other.n
            and self._m == other._m
            and self._ne == other._ne
            and np.array_equal(self._src[: self._ne], other._src[: other._ne])
            and np.array_equal(self._eidx[: self._ne], other._eidx[: other._ne])
            and np.array_equal(self._tgt[: self._ne], other._tgt[: other._ne])
        )

    def __repr__(self):
        return (
            f"EvolvingGraph(model {self._variant}, n={self.n}, "
            f"attachments={self._ne})"
        )

    # -- serialization ---------------------------------------------------

    def to_jsonl(self, fileobj) -> None:
        """Line-oriented JSON: a header record, then one record per
        attachment. Round-trips bit-exactly through from_jsonl."""
        close = False
        if isinstance(fileobj, (str, bytes)):
            fileobj = open(fileobj, "w", encoding="utf-8")
            close = True
        try:
            header = {
                "record": "header",
                "spec": self.spec.to_json(),
                "seed": self.seed,
                "n": self.n,
                "out_degrees": self._m[1:],
            }
            fileobj.write(json.dumps(header, separators=(",", ":")) + "\n")
            ne = self._ne
            src = self._src[:ne].tolist()
            eidx = self._eidx[:ne].tolist()
            tgt = self._tgt[:ne].tolist()
            for k in range(ne):
                fileobj.write(f'{{"v":{src[k]},"j":{eidx[k]},"u":{tgt[k]}}}\n')
        finally:
            if close:
                fileobj.close()

    @classmethod
    def from_edges(cls, spec, n, out_degrees, edges, seed=None) -> "EvolvingGraph":
        """Assemble a completed graph from explicit attachment triples.

        out_degrees is the 1-indexed placement-count sequence (what each
        vertex actually sourced). The result cannot grow further."""
        g = cls(spec, n, out_degrees)
        g.seed = seed
        if spec.variant == "F":
            # sizing above capped by v-1; explicit edges override it
            g._src = np.empty(len(edges), dtype=np.int32)
            g._eidx = np.empty(len(edges), dtype=np.int32)
            g._tgt = np.empty(len(edges), dtype=np.int32)
        for k, (v, j, u) in enumerate(edges):
            g._src[k] = v
            g._eidx[k] = j
            g._tgt[k] = u
        g._ne = len(edges)
        g._deg = g.recompute_degrees().tolist()
        g._mprev = 2 + len(edges)
        g._endpoints = None
        return g

    @classmethod
    def from_jsonl(cls, fileobj) -> "EvolvingGraph":
        close = False
        if isinstance(fileobj, (str, bytes)):
            fileobj = open(fileobj, "r", encoding="utf-8")
            close = True
        try:
            header = json.loads(fileobj.readline())
            if header.get("record") != "header":
                raise ParameterError("first record must be the header")
            spec = ModelSpec.from_json(header["spec"])
            n = header["n"]
            g = cls(spec, n, [0] + header["out_degrees"])
            g.seed = header["seed"]
            k = 0
            for line in fileobj:
                if not line.strip():
                    continue
                rec = json.loads(line)
                g._src[k] = rec["v"]
                g._eidx[k] = rec["j"]
                g._tgt[k] = rec["u"]
                k += 1
            g._ne = k
            g._deg = g.recompute_degrees().tolist()
            g._mprev = 2 + k
            g._endpoints = None  # growth is finished for a loaded graph
            return g
        finally:
            if close:
                fileobj.close()


@dataclass(frozen=True)
class AttachmentStep:
    """Exact one-step attachment law at the current graph state."""

    v: int
    j: int
    targets: np.ndarray
    probs: np.ndarray
    normalizer: float


def _normalizer(graph: EvolvingGraph, v: int, j: int) -> float:
    """The closed-form per-step normalizer for the active model."""
    a = graph.spec.a_sum
    delta = graph._delta
    mprev = graph._mprev
    m_v = graph._m[v]
    variant = graph._variant
    if variant == "A":
        return a + 2.0 * (mprev + j - 2) - 1.0 + (v - 1) * delta + j * delta / m_v
    if variant == "B":
        return a + 2.0 * (mprev + j - 3) + (v - 1) * delta + (j - 1) * delta / m_v
    if variant == "D":
        return a + 2.0 * (mprev - 2) + (j - 1) + (v - 1) * delta
    return a + 2.0 * (mprev - 2) + (v - 1) * delta


def attachment_probabilities(graph: EvolvingGraph, v: int, j: int = 1) -> AttachmentStep:
    """The full attachment law for edge j of vertex v at the current state.

    Requires an open phase for v with edges 1..j-1 placed (models E/F:
    call before any placement; their law is frozen for the whole phase,
    and for F this is the first-draw marginal). The normalizer comes from
    the closed form, so probs summing to 1 is a genuine identity check.
    """
    if graph._phase_v != v:
        raise ParameterError(f"no open phase for vertex {v}")
    variant = graph._variant
    if variant in ("E", "F"):
        if graph._placed != 0:
            raise ParameterError("frozen law must be read before placements")
    elif graph._placed != j - 1:
        raise ParameterError(f"edge {j} not next for vertex {v}")
    d = graph._deg
    delta = graph._delta
    c = _normalizer(graph, v, j)
    if variant in ("A", "B"):
        targets = np.arange(1, v + 1)
        probs = np.array([d[u] + delta for u in range(1, v)] + [0.0]) / c
        if variant == "A":
            probs[-1] = (d[v] + 1.0 + j * delta / graph._m[v]) / c
        else:
            probs[-1] = (d[v] + (j - 1) * delta / graph._m[v]) / c
    else:
        targets = np.arange(1, v)
        probs = np.array([d[u] + delta for u in range(1, v)]) / c
    return AttachmentStep(v=v, j=j, targets=targets, probs=probs, normalizer=c)


def _check_normalization(graph, v, j):
    step = attachment_probabilities(graph, v, j)
    s = float(step.probs.sum())
    if abs(s - 1.0) > 1e-12:
        raise AssertionError(
            f"step law for v={v}, j={j} sums to {s!r} (normalizer {step.normalizer})"
        )


# -- single-draw kernels -------------------------------------------------


def _draw_with_self(endpoints, w_self, v, delta, deg, rng):
    """One target from {u < v: mass d_u + delta} + {v: mass w_self}."""
    L = len(endpoints)
    if delta >= 0.0:
        unif = (v - 1) * delta
        r = rng.random() * (L + unif + w_self)
        if r < L:
            return endpoints[int(r)]
        q = r - L
        if q < unif:
            u = 1 + int(q / delta)
            return u if u < v else v - 1
        if w_self > 0.0:
            return v
        return endpoints[L - 1]  # float roundoff; measure-zero branch
    total = L + w_self
    while True:
        r = rng.random() * total
        if r < L:
            cand = endpoints[int(r)]
            dd = deg[cand]
            if rng.random() * dd < dd + delta:
                return cand
        elif w_self > 0.0:
            return v


def _draw_predecessor(endpoints, L, v, delta, deg, rng):
    """One target from {u < v: mass d_u + delta}; endpoints[:L] is frozen."""
    if delta >= 0.0:
        unif = (v - 1) * delta
        r = rng.random() * (L + unif)
        if r < L:
            return endpoints[int(r)]
        if delta > 0.0:
            u = 1 + int((r - L) / delta)
            return u if u < v else v - 1
        return endpoints[L - 1]  # float roundoff; measure-zero branch
    while True:
        r = rng.random() * L
        cand = endpoints[int(r)]
        dd = deg[cand]
        if rng.random() * dd < dd + delta:
            return cand


# -- per-model step operations --------------------------------------------


def step_model_A(graph: EvolvingGraph, v: int, j: int, rng) -> int:
    """Sample the target of edge j of vertex v under model A.

    Self weight d_v + 1 + j*delta/m_v; degrees include all intra-phase
    updates. Returns u in [v]; the caller records it via place_edge."""
    delta = graph._delta
    w = graph._deg[v] + 1.0 + j * delta / graph._m[v]
    assert (
        abs(len(graph._endpoints) + (v - 1) * delta + w - _normalizer(graph, v, j))
        <= 1e-9 * max(1.0, _normalizer(graph, v, j))
    )
    return _draw_with_self(graph._endpoints, w, v, delta, graph._deg, rng)


def step_model_B(graph: EvolvingGraph, v: int, j: int, rng) -> int:
    """Sample the target of edge j of vertex v under model B.

    Self weight d_v + (j-1)*delta/m_v, zero when j=1."""
    delta = graph._delta
    w = graph._deg[v] + (j - 1) * delta / graph._m[v]
    assert (
        abs(len(graph._endpoints) + (v - 1) * delta + w - _normalizer(graph, v, j))
        <= 1e-9 * max(1.0, _normalizer(graph, v, j))
    )
    return _draw_with_self(graph._endpoints, w, v, delta, graph._deg, rng)


def step_model_D(graph: EvolvingGraph, v: int, j: int, rng) -> int:
    """Sample the target of edge j of vertex v under model D (no self-loops;
    targets of earlier edges in the phase already count)."""
    delta = graph._delta
    ends = graph._endpoints
    assert (
        abs(len(ends) + (v - 1) * delta - _normalizer(graph, v, j))
        <= 1e-9 * max(1.0, _normalizer(graph, v, j))
    )
    return _draw_predecessor(ends, len(ends), v, delta, graph._deg, rng)


def step_model_E(graph: EvolvingGraph, v: int, rng) -> list:
    """All m_v targets of vertex v under model E: i.i.d. draws against the
    degrees frozen at time v-1. Returns the target list in draw order."""
    delta = graph._delta
    ends = graph._endpoints
    L = len(ends)
    deg = graph._deg
    return [
        _draw_predecessor(ends, L, v, delta, deg, rng) for _ in range(graph._m[v])
    ]


def step_model_F(graph: EvolvingGraph, v: int, rng) -> list:
    """Targets of vertex v under model F: frozen law without replacement.

    Each draw is the frozen law conditioned on not-yet-chosen targets
    (rejection, with an exact renormalized fallback after a run of
    collisions). If m_v >= v-1 the vertex connects to all predecessors."""
    m_v = graph._m[v]
    if m_v >= v - 1:
        return list(range(1, v))
    delta = graph._delta
    ends = graph._endpoints
    L = len(ends)
    deg = graph._deg
    chosen = set()
    out = []
    for _ in range(m_v):
        u = None
        for _try in range(_F_REJECT_CAP):
            cand = _draw_predecessor(ends, L, v, delta, deg, rng)
            if cand not in chosen:
                u = cand
                break
        if u is None:
            u = _renormalized_draw(deg, v, delta, chosen, rng)
        chosen.add(u)
        out.append(u)
    return out


def _renormalized_draw(deg, v, delta, chosen, rng):
    """Exact draw proportional to deg[u] + delta over u in [v-1] \\ chosen."""
    weights = [(u, deg[u] + delta) for u in range(1, v) if u not in chosen]
    total = sum(w for _, w in weights)
    r = rng.random() * total
    acc = 0.0
    for u, w in weights:
        acc += w
        if r < acc:
            return u
    return weights[-1][0]


# -- orchestration ----------------------------------------------------------


def generate(
    spec: ModelSpec,
    n: int,
    seed=None,
    *,
    rng=None,
    out_degrees=None,
    check: bool = False,
    _entropy=None,
) -> EvolvingGraph:
    """Grow a model graph to n vertices.

    Deterministic given (spec, n, seed). Pass rng to share a stream across
    calls; out_degrees to pin the 1-indexed m sequence. check=True computes
    the full attachment law before every step and verifies it sums to 1
    within 1e-12 (desk-scale runs only)."""
    if n < 2:
        raise ParameterError("need n >= 2")
    if rng is None:
        rng = stream(0 if seed is None else int(seed), "generate")
    if out_degrees is None:
        m = sample_out_degrees(spec.out_degree, n, rng)
    else:
        m = out_degrees
    g = EvolvingGraph(spec, n, m)
    g.seed = seed
    entropy = _entropy if _entropy is not None else _UBuf(rng)
    for v in range(3, n + 1):
        g.insert_vertex(v, entropy, check=check)
    return g


def generate_batch(spec: ModelSpec, n: int, reps: int, seed=None, *, check: bool = False):
    """Yield reps independent graphs from one shared stream (cheap per-rep:
    the uniform buffer carries across replicas)."""
    rng = stream(0 if seed is None else int(seed), "generate-batch")
    entropy = _UBuf(rng)
    for _ in range(reps):
        yield generate(spec, n, rng=rng, check=check, _entropy=entropy)
