"""Closed-form graph probabilities and exhaustive small-size enumeration.

Every finite labelled outcome of the sequential models has an explicit
probability: a product of per-step weights that telescopes into ratios of
rising factorials. The urn constructions assign the same outcome a product
of Beta-function moments. This module evaluates both products directly,
enumerates every feasible outcome at small sizes, and writes comparison
reports certifying that the two routes agree graph by graph.

All probabilities are computed in exact rational arithmetic: a float is a
dyadic rational, so any representable fitness value is covered. Pass
exact=True to get the Fraction itself instead of a float. The float
helpers falling_factorial and beta_moment additionally offer a log-gamma
path for arguments far beyond the enumeration range.

Evaluators are pure functions and enumeration trees are independent across
top-level branches, so callers may parallelize by branch if they wish.
"""

from __future__ import annotations

import csv
import itertools
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from .errors import ParameterError
from .generators import EvolvingGraph, attachment_probabilities
from .params import ModelSpec
from .urn import BetaSchedule

__all__ = [
    "GraphEvent",
    "falling_factorial",
    "beta_moment",
    "prob_model_A_closed",
    "prob_model_B_closed",
    "prob_model_D_closed",
    "prob_pu_closed",
    "enumerate_feasible",
    "pre_image_family",
    "EquivalenceRow",
    "equivalence_rows",
    "write_equivalence_report",
]

ENUMERATION_BOUND = 12


def _frac(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (int, np.integer)):
        return Fraction(int(x))
    return Fraction(*float(x).as_integer_ratio())


def _rising(x: Fraction, k: int) -> Fraction:
    out = Fraction(1)
    for i in range(k):
        out *= x + i
    return out


def falling_factorial(x: float, k: int, method: str = "product") -> float:
    """(x)_k = x (x-1) ... (x-k+1).

    method "product" multiplies the k terms; "lgamma" evaluates
    Gamma(x+1)/Gamma(x-k+1) in log space (requires x - k + 1 > 0).
    """
    if k < 0:
        raise ParameterError("falling factorial needs k >= 0")
    if method == "product":
        out = 1.0
        for i in range(k):
            out *= x - i
        return out
    if method == "lgamma":
        if k == 0:
            return 1.0
        if x - k + 1 <= 0.0:
            raise ParameterError("log-gamma path needs x - k + 1 > 0")
        return math.exp(math.lgamma(x + 1.0) - math.lgamma(x - k + 1.0))
    raise ParameterError(f"unknown method {method!r}")


def beta_moment(alpha: float, beta: float, p: int, q: int, method: str = "auto") -> float:
    """E[psi^p (1-psi)^q] for psi ~ Beta(alpha, beta).

    Equals (alpha+p-1)_p (beta+q-1)_q / (alpha+beta+p+q-1)_{p+q} with
    falling factorials. beta == 0 is read as the point mass at 1.
    """
    if p < 0 or q < 0 or alpha <= 0 or beta < 0:
        raise ParameterError("beta moment needs alpha > 0, beta >= 0, p, q >= 0")
    if beta == 0.0:
        return 0.0 if q > 0 else 1.0
    if method == "auto":
        method = "product" if p + q <= 60 else "lgamma"
    if method == "product":
        num = falling_factorial(alpha + p - 1, p) * falling_factorial(beta + q - 1, q)
        return num / falling_factorial(alpha + beta + p + q - 1, p + q)
    if method == "lgamma":
        return math.exp(
            math.lgamma(alpha + p)
            - math.lgamma(alpha)
            + math.lgamma(beta + q)
            - math.lgamma(beta)
            + math.lgamma(alpha + beta)
            - math.lgamma(alpha + beta + p + q)
        )
    raise ParameterError(f"unknown method {method!r}")


def _beta_moment_frac(alpha: Fraction, beta: Fraction, p: int, q: int) -> Fraction:
    return _rising(alpha, p) * _rising(beta, q) / _rising(alpha + beta, p + q)


@dataclass(frozen=True)
class GraphEvent:
    """A finite labelled attachment outcome.

    Edges are (source, edge_index, target) triples; vertices 1 and 2 carry
    the initial degrees and edges. group_sizes is set when the vertices are
    unit slots of a coarser graph (sizes of the consecutive slot groups, in
    which case collapse() recovers the coarse outcome); collapse_target
    optionally records that coarse outcome on members of a pre-image
    family.
    """

    edges: tuple
    n: int
    initial_degrees: tuple = (1, 1)
    initial_edges: tuple = ((1, 2),)
    group_sizes: tuple = None
    collapse_target: "GraphEvent" = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        canon = tuple(
            sorted((int(v), int(j), int(u)) for v, j, u in self.edges)
        )
        object.__setattr__(self, "edges", canon)
        object.__setattr__(
            self, "initial_degrees", tuple(int(x) for x in self.initial_degrees)
        )
        object.__setattr__(
            self, "initial_edges", tuple((int(a), int(b)) for a, b in self.initial_edges)
        )
        for v, j, u in canon:
            if not (3 <= v <= self.n and 1 <= u <= self.n and j >= 1):
                raise ParameterError(f"edge ({v},{j},{u}) out of range for n={self.n}")
        if self.group_sizes is not None:
            sizes = tuple(int(s) for s in self.group_sizes)
            if sum(sizes) != self.n or any(s < 1 for s in sizes):
                raise ParameterError("group sizes must be positive and cover all vertices")
            object.__setattr__(self, "group_sizes", sizes)

    @classmethod
    def from_graph(cls, graph: EvolvingGraph, group_sizes=None) -> "GraphEvent":
        spec = graph.spec
        return cls(
            edges=tuple(graph.edges),
            n=graph.n,
            initial_degrees=tuple(spec.initial_degrees),
            initial_edges=tuple(spec.initial_edges),
            group_sizes=None if group_sizes is None else tuple(group_sizes),
        )

    @property
    def out_degree_counts(self) -> tuple:
        """Edges placed per vertex, 1-indexed (slot 0 unused)."""
        k = [0] * (self.n + 1)
        for v, _, _ in self.edges:
            k[v] += 1
        return tuple(k)

    @property
    def final_degrees(self) -> tuple:
        """Completed-graph degrees, 1-indexed; a self-loop counts twice."""
        d = [0] * (self.n + 1)
        d[1], d[2] = self.initial_degrees
        for v, _, u in self.edges:
            d[v] += 1
            d[u] += 1
        return tuple(d)

    def multigraph_key(self) -> tuple:
        """Identity after forgetting edge indices (grouping key for
        outcomes that differ only in how parallel edges are numbered)."""
        return (self.n, tuple(sorted((v, u) for v, _, u in self.edges)))

    def label(self) -> str:
        return ";".join(f"{v}.{j}>{u}" for v, j, u in self.edges)

    def collapse(self) -> "GraphEvent":
        """Merge consecutive vertex groups of the stated sizes into single
        vertices, re-indexing each group's edges in unit order."""
        if self.group_sizes is None:
            raise ParameterError("event carries no group sizes")
        sizes = self.group_sizes
        if sizes[0] != 1 or sizes[1] != 1:
            raise ParameterError("first two groups must be the untouched seed vertices")
        bounds = [0]
        for s in sizes:
            bounds.append(bounds[-1] + s)
        who = [0] * (self.n + 1)
        for g in range(1, len(sizes) + 1):
            for s in range(bounds[g - 1] + 1, bounds[g] + 1):
                who[s] = g
        counts = [0] * (len(sizes) + 1)
        new_edges = []
        for v, _, u in self.edges:
            gv = who[v]
            counts[gv] += 1
            new_edges.append((gv, counts[gv], who[u]))
        return GraphEvent(
            edges=tuple(new_edges),
            n=len(sizes),
            initial_degrees=self.initial_degrees,
            initial_edges=self.initial_edges,
        )


def _as_event(graph_or_event) -> GraphEvent:
    if isinstance(graph_or_event, GraphEvent):
        return graph_or_event
    if isinstance(graph_or_event, EvolvingGraph):
        return GraphEvent.from_graph(graph_or_event)
    raise ParameterError(f"expected a graph or event, got {type(graph_or_event).__name__}")


def _unit_layout(event: GraphEvent):
    """For a unit-slot event: per-slot target plus (group, index) maps.

    Structural breakage (missing or duplicated unit edges) raises; order
    violations are left to the caller, which prices them at zero.
    """
    target = {}
    for v, j, u in event.edges:
        if j != 1 or v in target:
            raise ParameterError("unit-slot events need exactly one edge per slot >= 3")
        target[v] = u
    if sorted(target) != list(range(3, event.n + 1)):
        raise ParameterError("unit-slot events need exactly one edge per slot >= 3")
    sizes = event.group_sizes or (1,) * event.n
    group_of = [0] * (event.n + 1)
    index_in = [0] * (event.n + 1)
    g = 0
    pos = 0
    for s in range(1, event.n + 1):
        if pos == 0:
            g += 1
            pos = sizes[g - 1]
        index_in[s] = sizes[g - 1] - pos + 1
        group_of[s] = g
        pos -= 1
    return target, sizes, group_of, index_in


def _zero(exact: bool):
    return Fraction(0) if exact else 0.0


def _unit_numerator(event: GraphEvent, delta: Fraction, group_of, sizes) -> Fraction:
    """Product of per-target weights along any history producing the event:
    vertex s climbs from its arrival degree to d_s, gaining (i + share)
    at degree i, with fitness share delta / (own group's out-degree)."""
    a1, a2 = event.initial_degrees
    d = event.final_degrees
    num = Fraction(1)
    for s in range(1, event.n + 1):
        f_s = a1 if s == 1 else a2 if s == 2 else 1
        share = delta * Fraction(1, sizes[group_of[s] - 1])
        num *= _rising(f_s + share, d[s] - f_s)
    return num


def prob_model_A_closed(graph_or_event, spec: ModelSpec, *, exact: bool = False):
    """Probability that the self-loop model with immediate updates produces
    a given unit-slot outcome (one out-edge per vertex past the seed pair).

    When the event carries group sizes, each slot's fitness share and
    normalizer follow its group, so this is the single-edge expansion of a
    multi-edge specification. Order-infeasible events (an edge pointing
    above its source) get probability zero.
    """
    event = _as_event(graph_or_event)
    target, sizes, group_of, index_in = _unit_layout(event)
    delta = _frac(spec.delta)
    a = spec.a_sum
    if any(t > s for s, t in target.items()):
        return _zero(exact)
    num = _unit_numerator(event, delta, group_of, sizes)
    den = Fraction(1)
    for s in range(3, event.n + 1):
        v, j = group_of[s], index_in[s]
        m_v = sizes[v - 1]
        den *= a + 2 * (s - 2) - 1 + (v - 1) * delta + Fraction(j, m_v) * delta
    p = num / den
    return p if exact else float(p)


def prob_model_B_closed(graph_or_event, spec: ModelSpec, *, exact: bool = False):
    """As prob_model_A_closed for the strict variant: no self-loops, the
    arriving slot has no weight of its own, normalizers shifted to match."""
    event = _as_event(graph_or_event)
    target, sizes, group_of, index_in = _unit_layout(event)
    delta = _frac(spec.delta)
    a = spec.a_sum
    if any(t >= s for s, t in target.items()):
        return _zero(exact)
    num = _unit_numerator(event, delta, group_of, sizes)
    den = Fraction(1)
    for s in range(3, event.n + 1):
        v, j = group_of[s], index_in[s]
        m_v = sizes[v - 1]
        den *= a + 2 * (s - 3) + (v - 1) * delta + Fraction(j - 1, m_v) * delta
    p = num / den
    return p if exact else float(p)


def prob_model_D_closed(graph_or_event, spec: ModelSpec, *, exact: bool = False):
    """Probability that the frozen-stub model with intra-phase target
    updates produces a given multi-edge outcome.

    The numerator telescopes per target exactly as in the unit models
    (vertex u starts collecting in-edges at degree m_u); the denominator is
    the per-edge normalizer, which does not depend on the targets chosen.
    """
    event = _as_event(graph_or_event)
    k = event.out_degree_counts
    seen = {}
    for v, j, u in event.edges:
        seen.setdefault(v, []).append(j)
    for v in range(3, event.n + 1):
        if sorted(seen.get(v, [])) != list(range(1, k[v] + 1)):
            raise ParameterError(f"edge indices of vertex {v} are not 1..{k[v]}")
        if k[v] < 1:
            raise ParameterError(f"vertex {v} places no edges")
    delta = _frac(spec.delta)
    a = spec.a_sum
    a1, a2 = event.initial_degrees
    if any(u >= v for v, _, u in event.edges):
        return _zero(exact)
    d = event.final_degrees
    num = Fraction(1)
    for u in range(1, event.n + 1):
        f_u = a1 if u == 1 else a2 if u == 2 else k[u]
        num *= _rising(f_u + delta, d[u] - f_u)
    den = Fraction(1)
    mprev = 2
    for v in range(3, event.n + 1):
        for j in range(1, k[v] + 1):
            den *= a + 2 * (mprev - 2) + (j - 1) + (v - 1) * delta
        mprev += k[v]
    p = num / den
    return p if exact else float(p)


def _exact_schedule_params(schedule: BetaSchedule):
    """The schedule's Beta parameters as exact rationals, slot-indexed."""
    spec = schedule.spec
    delta = _frac(spec.delta)
    a = spec.a_sum
    a1, a2 = spec.initial_degrees
    m = schedule.m
    alpha = {2: a2 + delta}
    beta = {2: a1 + delta}
    if schedule.kind == "per-vertex":
        mcum = 0
        for v in range(1, schedule.n + 1):
            if v >= 3:
                alpha[v] = m[v] + delta
                beta[v] = a + 2 * (mcum - 2) + m[v] + (v - 1) * delta
            mcum += m[v]
    else:
        shift = 1 if schedule.variant == "NSL" else 0
        s = 2
        mcum = 2
        for kk in range(3, schedule.n + 1):
            for l in range(1, m[kk] + 1):
                s += 1
                alpha[s] = 1 + delta * Fraction(1, m[kk])
                beta[s] = (
                    a
                    + 2 * (mcum + l - 3)
                    + shift
                    + (kk - 1) * delta
                    + Fraction(l - 1, m[kk]) * delta
                )
            mcum += m[kk]
    return alpha, beta


def prob_pu_closed(graph_or_event, schedule: BetaSchedule, variant: str, *, exact: bool = False):
    """Probability that the urn construction produces a given outcome.

    Conditionally on the weights, each edge from slot s to slot t
    contributes one psi_t factor and one (1 - psi_a) factor per slot a
    between t and the edge's scaling boundary (s under "SL", s-1 under
    "NSL"). Independence turns the expectation into a product of Beta
    moments with those exponents. Order-infeasible outcomes get zero.
    """
    if variant not in ("SL", "NSL"):
        raise ParameterError(f"unknown urn variant {variant!r}")
    event = _as_event(graph_or_event)
    if schedule.kind == "per-edge":
        if event.n != schedule.size:
            raise ParameterError(
                f"event has {event.n} slots, schedule has {schedule.size}"
            )
        target, _, _, _ = _unit_layout(event)
        pairs = sorted(target.items())
    else:
        if event.n != schedule.n:
            raise ParameterError(f"event has {event.n} vertices, schedule has {schedule.n}")
        k = event.out_degree_counts
        for v in range(3, event.n + 1):
            if k[v] != schedule.m[v]:
                raise ParameterError(
                    f"vertex {v} places {k[v]} edges, schedule says {schedule.m[v]}"
                )
        pairs = [(v, u) for v, _, u in event.edges]
    size = schedule.size
    p = [0] * (size + 1)
    q = [0] * (size + 1)
    for src, tgt in pairs:
        lim = src if variant == "SL" else src - 1
        if tgt > lim:
            return _zero(exact)
        p[tgt] += 1
        for s in range(tgt + 1, lim + 1):
            q[s] += 1
    alpha, beta = _exact_schedule_params(schedule)
    value = Fraction(1)
    for s in range(2, size + 1):
        if p[s] or q[s]:
            value *= _beta_moment_frac(alpha[s], beta[s], p[s], q[s])
    return value if exact else float(value)


# -- exhaustive enumeration -------------------------------------------------


def _phase_outcomes(graph: EvolvingGraph, v: int, m_v: int):
    """All (targets, probability) pairs for the whole phase of vertex v
    under a frozen law (the last two model variants). Requires the phase
    to be open with nothing placed."""
    law = attachment_probabilities(graph, v)
    probs = law.probs.tolist()
    variant = graph.spec.variant
    if variant == "E":
        for targets in itertools.product(range(1, v), repeat=m_v):
            p = 1.0
            for t in targets:
                p *= probs[t - 1]
            yield targets, p
    else:
        if m_v >= v - 1:
            yield tuple(range(1, v)), 1.0
            return
        for targets in itertools.permutations(range(1, v), m_v):
            p = 1.0
            rest = 1.0
            for t in targets:
                p *= probs[t - 1] / rest
                rest -= probs[t - 1]
            yield targets, p


def _extend(graph: EvolvingGraph, v: int, prob: float, out: list):
    if v > graph.n:
        out.append((graph, prob))
        return
    m_v = int(graph.out_degrees[v])
    variant = graph.spec.variant
    if variant in ("E", "F"):
        graph.begin_vertex(v)
        for targets, p in list(_phase_outcomes(graph, v, m_v)):
            h = graph.copy()
            h.apply_vertex(v, list(targets))
            h.finish_vertex(v)
            _extend(h, v + 1, prob * p, out)
        return
    graph.begin_vertex(v)
    _extend_step(graph, v, 1, m_v, prob, out)


def _extend_step(graph: EvolvingGraph, v: int, j: int, m_v: int, prob: float, out: list):
    if j > m_v:
        graph.finish_vertex(v)
        _extend(graph, v + 1, prob, out)
        return
    law = attachment_probabilities(graph, v, j)
    for t, p in zip(law.targets.tolist(), law.probs.tolist()):
        if p <= 0.0:
            continue
        h = graph.copy()
        h.place_edge(v, j, int(t))
        _extend_step(h, v, j + 1, m_v, prob * p, out)


def enumerate_feasible(spec: ModelSpec, n: int, *, max_total_out: int = ENUMERATION_BOUND):
    """Every outcome the model can produce at size n, with its exact
    sequential probability (mixing over out-degree vectors by their pmf).

    Probabilities come from the generator's own step laws, so the list is
    an oracle for the closed forms and for Monte Carlo frequencies. The
    total out-degree (seed pair included) is capped to keep the product
    tree tractable; laws with unbounded support are rejected.
    """
    if n < 2:
        raise ParameterError("need n >= 2")
    law = spec.out_degree
    if law.tail_mass > 0.0:
        raise ParameterError("enumeration needs an out-degree law with bounded support")
    worst = 2 + (n - 2) * int(law.support[-1])
    if worst > max_total_out:
        raise ParameterError(
            f"total out-degree can reach {worst}, above the bound {max_total_out}"
        )
    results = []
    for mv in itertools.product(law.support.tolist(), repeat=n - 2):
        weight = 1.0
        for m in mv:
            weight *= law.prob(m)
        if weight == 0.0:
            continue
        root = EvolvingGraph(spec, n, [0, 1, 1, *mv])
        _extend(root, 3, weight, results)
    return results


def pre_image_family(graph_or_event, variant: str):
    """All unit-slot outcomes that collapse to the given multi-edge one.

    Each edge (v, j) -> u expands to a choice of unit inside group u, or,
    for a self-loop, to one of the units of group v up to (variant "A") or
    strictly before (variant "B") the placing slot itself.
    """
    if variant not in ("A", "B"):
        raise ParameterError("pre-images exist for the self-loop models only")
    event = _as_event(graph_or_event)
    k = event.out_degree_counts
    sizes = (1, 1) + tuple(k[3:])
    bounds = [0]
    for s in sizes:
        bounds.append(bounds[-1] + s)
    slots = []
    choices = []
    for v, j, u in event.edges:
        s = bounds[v - 1] + j
        slots.append(s)
        if u < v:
            choices.append(range(bounds[u - 1] + 1, bounds[u] + 1))
        elif u == v:
            top = s + 1 if variant == "A" else s
            choices.append(range(bounds[v - 1] + 1, top))
        else:
            return ()
    family = []
    for targets in itertools.product(*choices):
        family.append(
            GraphEvent(
                edges=tuple((s, 1, t) for s, t in zip(slots, targets)),
                n=bounds[-1],
                initial_degrees=event.initial_degrees,
                initial_edges=event.initial_edges,
                group_sizes=sizes,
                collapse_target=event,
            )
        )
    return tuple(family)


# -- equivalence reports -----------------------------------------------------


@dataclass(frozen=True)
class EquivalenceRow:
    """One enumerated outcome with its two probability evaluations."""

    graph_id: str
    out_degrees: tuple
    sequential_prob: float
    urn_prob: float

    @property
    def abs_diff(self) -> float:
        return abs(self.sequential_prob - self.urn_prob)

    @property
    def rel_diff(self) -> float:
        scale = max(self.sequential_prob, self.urn_prob)
        return self.abs_diff / scale if scale > 0 else 0.0


def _urn_probability(event: GraphEvent, spec: ModelSpec, m: list, cache: dict) -> float:
    key = tuple(m)
    if spec.variant == "D":
        sched = cache.get(key)
        if sched is None:
            sched = cache[key] = BetaSchedule("per-vertex", spec, m)
        return prob_pu_closed(event, sched, "NSL")
    urn_variant = "SL" if spec.variant == "A" else "NSL"
    sched = cache.get(key)
    if sched is None:
        sched = cache[key] = BetaSchedule("per-edge", spec, m, variant=urn_variant)
    return sum(prob_pu_closed(h, sched, urn_variant) for h in pre_image_family(event, spec.variant))


def equivalence_rows(spec: ModelSpec, n: int, *, grouped: bool = False):
    """Per-outcome comparison of the sequential probability (step-law
    product) against the urn closed form, mixing over out-degree vectors.

    grouped=True merges outcomes that differ only in edge indexing. Only
    the three models with an urn representation are supported.
    """
    if spec.variant not in ("A", "B", "D"):
        raise ParameterError(f"model {spec.variant} has no urn representation to compare")
    cache = {}
    law = spec.out_degree
    rows = []
    for g, p_seq in enumerate_feasible(spec, n):
        event = GraphEvent.from_graph(g)
        m = [int(x) for x in g.out_degrees]
        weight = 1.0
        for v in range(3, n + 1):
            weight *= law.prob(m[v])
        p_urn = weight * _urn_probability(event, spec, m, cache)
        m_str = ",".join(str(x) for x in m[3:])
        rows.append((f"m={m_str}|{event.label()}", tuple(m[3:]), event, p_seq, p_urn))
    if grouped:
        merged = {}
        for _, mt, event, p_seq, p_urn in rows:
            key = (mt, event.multigraph_key())
            if key in merged:
                gid, s, u = merged[key]
                merged[key] = (gid, s + p_seq, u + p_urn)
            else:
                m_str = ",".join(str(x) for x in mt)
                pairs = ",".join(f"{v}>{u}" for v, u in key[1][1])
                merged[key] = (f"m={m_str}|{pairs}", p_seq, p_urn)
        return [
            EquivalenceRow(gid, key[0], s, u)
            for key, (gid, s, u) in sorted(merged.items(), key=lambda kv: kv[1][0])
        ]
    return [EquivalenceRow(gid, mt, s, u) for gid, mt, _, s, u in rows]


def write_equivalence_report(
    spec: ModelSpec,
    n: int,
    out_dir,
    *,
    grouped: bool = False,
    tolerance: float = 1e-10,
    stem: str = None,
    extra_meta: dict = None,
):
    """Write {stem}.csv (one row per outcome) and {stem}.json (verdict).

    The CSV begins with a single-line JSON comment describing the run; the
    JSON summary records totals, worst deviations and a pass flag
    (per-outcome agreement within tolerance and both totals summing to 1).
    Returns the summary dict.
    """
    rows = equivalence_rows(spec, n, grouped=grouped)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if stem is None:
        stem = f"equivalence_{spec.variant}_n{n}"
    total_seq = sum(r.sequential_prob for r in rows)
    total_urn = sum(r.urn_prob for r in rows)
    max_abs = max((r.abs_diff for r in rows), default=0.0)
    max_rel = max((r.rel_diff for r in rows), default=0.0)
    ok = (
        max_abs <= tolerance
        and abs(total_seq - 1.0) <= 1e-12
        and abs(total_urn - 1.0) <= max(1e-12, tolerance)
    )
    meta = {
        "report": "equivalence",
        "model": spec.variant,
        "n": n,
        "grouped": grouped,
        "tolerance": tolerance,
        "spec": spec.to_json(),
    }
    if extra_meta:
        meta.update(extra_meta)
    csv_path = out_dir / f"{stem}.csv"
    with open(csv_path, "w", newline="") as fh:
        fh.write("# " + json.dumps(meta, sort_keys=True, separators=(",", ":")) + "\n")
        writer = csv.writer(fh)
        writer.writerow(["graph_id", "sequential_prob", "urn_prob", "abs_diff", "rel_diff"])
        for r in rows:
            writer.writerow(
                [
                    r.graph_id,
                    f"{r.sequential_prob:.17g}",
                    f"{r.urn_prob:.17g}",
                    f"{r.abs_diff:.17g}",
                    f"{r.rel_diff:.17g}",
                ]
            )
    summary = dict(meta)
    summary.update(
        {
            "graphs": len(rows),
            "total_sequential": total_seq,
            "total_urn": total_urn,
            "max_abs_diff": max_abs,
            "max_rel_diff": max_rel,
            "pass": bool(ok),
        }
    )
    with open(out_dir / f"{stem}.json", "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return summary
