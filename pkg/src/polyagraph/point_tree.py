"""Sampler for the age-marked random tree that all five growth models
converge to locally.

Nodes carry an age in [0, 1], a positive Gamma-distributed strength, and a
type: the root, "O" for a child older than its parent, "Y" for a younger
one. A node with out-count m and age a gets m older children with ages
U_i^(1/chi) * a and a Poisson(strength * lambda(a)) number of younger
children whose ages form an inhomogeneous Poisson process with density
proportional to x^(-chi) on [a, 1]. Older children get the out-count law
size-biased by the fitness, younger ones the plain size-biased law minus
one; the root draws the unbiased law and (by the same degree-balance
reasoning that fixes the child strengths) strength Gamma(m + delta, 1).

Exploration is breadth-first, so node creation order coincides with the
length-then-lexicographic order on label paths. Independent trees
parallelize across RNG streams; a single tree is sequential.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError, TruncationError
from .params import ModelSpec, derive_constants, lambda_fn, stream

__all__ = [
    "UlamHarrisLabel",
    "RpptNode",
    "MarkedTree",
    "sample_rppt",
    "sample_rppt_forest",
    "sample_poisson_ages",
    "RegularityReport",
    "regularity_report",
]

DEFAULT_NODE_CAP = 1_000_000


@dataclass(frozen=True, order=False)
class UlamHarrisLabel:
    """A node address: the sequence of child indices from the root down.

    The empty path is the root. Ordering is length first, then
    componentwise, which is exactly breadth-first creation order.
    """

    path: tuple = ()

    def __post_init__(self):
        p = tuple(int(k) for k in self.path)
        if any(k < 1 for k in p):
            raise ParameterError("child indices start at 1")
        object.__setattr__(self, "path", p)

    @property
    def depth(self) -> int:
        return len(self.path)

    @property
    def parent(self) -> "UlamHarrisLabel":
        if not self.path:
            raise ParameterError("the root has no parent")
        return UlamHarrisLabel(self.path[:-1])

    def child(self, k: int) -> "UlamHarrisLabel":
        return UlamHarrisLabel(self.path + (int(k),))

    def sort_key(self):
        return (len(self.path), self.path)

    def __lt__(self, other: "UlamHarrisLabel") -> bool:
        return self.sort_key() < other.sort_key()

    def __str__(self) -> str:
        return ".".join(str(k) for k in self.path) if self.path else "root"


@dataclass(frozen=True)
class RpptNode:
    """One sampled node: address, age mark, strength, type, out-count
    m_minus and younger-child count d_in (zero for unexplored leaves)."""

    label: UlamHarrisLabel
    age: float
    strength: float
    type: str
    m_minus: int
    d_in: int

    def __post_init__(self):
        if self.type not in ("root", "O", "Y"):
            raise ParameterError(f"unknown node type {self.type!r}")


@dataclass(frozen=True)
class MarkedTree:
    """An explored ball of the limit tree, nodes in creation order.

    Nodes at depth < depth are fully explored (all their children are
    present); depth-level nodes are sampled leaves. The node set is
    prefix-closed with contiguous child indices, which __post_init__
    verifies.
    """

    depth: int
    nodes: tuple

    def __post_init__(self):
        index = {}
        for node in self.nodes:
            index[node.label.path] = node
        if () not in index:
            raise ParameterError("tree has no root")
        for path in index:
            if path and path[:-1] not in index:
                raise ParameterError(f"node {path} has no parent in the tree")
            if path and path[-1] > 1 and path[:-1] + (path[-1] - 1,) not in index:
                raise ParameterError(f"sibling indices of {path} are not contiguous")
        object.__setattr__(self, "_index", index)

    def __len__(self) -> int:
        return len(self.nodes)

    @property
    def root(self) -> RpptNode:
        return self._index[()]

    def node(self, label) -> RpptNode:
        path = label.path if isinstance(label, UlamHarrisLabel) else tuple(label)
        return self._index[path]

    def children(self, label) -> list:
        path = label.path if isinstance(label, UlamHarrisLabel) else tuple(label)
        out = []
        k = 1
        while path + (k,) in self._index:
            out.append(self._index[path + (k,)])
            k += 1
        return out

    def to_json(self) -> dict:
        return {
            "depth": self.depth,
            "nodes": [
                {
                    "label": list(n.label.path),
                    "age": n.age,
                    "gamma": n.strength,
                    "type": n.type,
                    "m_minus": n.m_minus,
                    "d_in": n.d_in,
                }
                for n in self.nodes
            ],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "MarkedTree":
        nodes = tuple(
            RpptNode(
                label=UlamHarrisLabel(tuple(rec["label"])),
                age=float(rec["age"]),
                strength=float(rec["gamma"]),
                type=rec["type"],
                m_minus=int(rec["m_minus"]),
                d_in=int(rec["d_in"]),
            )
            for rec in obj["nodes"]
        )
        return cls(depth=int(obj["depth"]), nodes=nodes)

    def dumps(self) -> str:
        return json.dumps(self.to_json(), separators=(",", ":"))

    @classmethod
    def loads(cls, text: str) -> "MarkedTree":
        return cls.from_json(json.loads(text))


def sample_poisson_ages(gamma: float, a: float, chi: float, seed=None, *, rng=None) -> np.ndarray:
    """Occurrence ages of the younger-children process started at age a.

    The count is Poisson(gamma * lambda(a)); given the count the ages are
    i.i.d. with density proportional to x^(-chi) on [a, 1], returned
    sorted. a = 1 always gives an empty array.
    """
    if not 0.0 < a <= 1.0:
        raise ParameterError(f"age must be in (0, 1], got {a}")
    if gamma <= 0.0:
        raise ParameterError(f"strength must be positive, got {gamma}")
    if not 0.0 < chi < 1.0:
        raise ParameterError(f"chi must be in (0, 1), got {chi}")
    if rng is None:
        rng = stream(0 if seed is None else int(seed), "poisson-ages")
    count = int(rng.poisson(gamma * lambda_fn(a, chi)))
    if count == 0:
        return np.empty(0)
    base = a ** (1.0 - chi)
    u = rng.random(count)
    ages = (base + u * (1.0 - base)) ** (1.0 / (1.0 - chi))
    ages.sort()
    return ages


def _derived_laws(spec: ModelSpec):
    law = spec.out_degree
    return (
        derive_constants(spec).chi,
        law,
        law.size_biased(spec.delta),
        law.size_biased(0.0),
    )


def _sample_tree(chi, law_root, law_old, law_young, delta, r, node_cap, rng) -> MarkedTree:
    nodes = []
    queue = deque()
    queue.append(((), float(rng.random()), "root"))
    inv_chi = 1.0 / chi
    while queue:
        path, age, kind = queue.popleft()
        if kind == "root":
            m_minus = int(law_root.sample(1, rng)[0])
            shape = m_minus + delta
        elif kind == "O":
            m_minus = int(law_old.sample(1, rng)[0])
            shape = m_minus + delta + 1.0
        else:
            m_minus = int(law_young.sample(1, rng)[0]) - 1
            shape = m_minus + 1.0 + delta
        strength = float(rng.gamma(shape, 1.0))
        d_in = 0
        if len(path) < r:
            older = age * rng.random(m_minus) ** inv_chi
            younger = sample_poisson_ages(strength, age, chi, rng=rng)
            d_in = len(younger)
            for i in range(m_minus):
                queue.append((path + (i + 1,), float(older[i]), "O"))
            for i in range(d_in):
                queue.append((path + (m_minus + i + 1,), float(younger[i]), "Y"))
        if len(nodes) >= node_cap:
            raise TruncationError(
                f"tree exceeded the node cap {node_cap} at depth {len(path)}",
                partial=MarkedTree(depth=r, nodes=tuple(nodes)),
            )
        nodes.append(
            RpptNode(
                label=UlamHarrisLabel(path),
                age=age,
                strength=strength,
                type=kind,
                m_minus=m_minus,
                d_in=d_in,
            )
        )
    return MarkedTree(depth=r, nodes=tuple(nodes))


def sample_rppt(spec: ModelSpec, r: int, seed=None, *, node_cap: int = DEFAULT_NODE_CAP, rng=None) -> MarkedTree:
    """Sample the limit tree out to graph distance r from the root.

    Exceeding node_cap raises TruncationError carrying the partial tree.
    """
    if r < 0:
        raise ParameterError("depth must be >= 0")
    if node_cap < 1:
        raise ParameterError("node cap must be >= 1")
    if rng is None:
        rng = stream(0 if seed is None else int(seed), "rppt-sample")
    chi, law_root, law_old, law_young = _derived_laws(spec)
    return _sample_tree(chi, law_root, law_old, law_young, spec.delta, r, node_cap, rng)


def sample_rppt_forest(spec: ModelSpec, r: int, count: int, seed=None, *, node_cap: int = DEFAULT_NODE_CAP, rng=None):
    """Yield count independent trees from one stream (derived laws are
    computed once, which matters for large Monte Carlo runs)."""
    if r < 0:
        raise ParameterError("depth must be >= 0")
    if node_cap < 1:
        raise ParameterError("node cap must be >= 1")
    if rng is None:
        rng = stream(0 if seed is None else int(seed), "rppt-forest")
    chi, law_root, law_old, law_young = _derived_laws(spec)
    delta = spec.delta
    for _ in range(count):
        yield _sample_tree(chi, law_root, law_old, law_young, delta, r, node_cap, rng)


@dataclass(frozen=True)
class RegularityReport:
    """Empirical thresholds that hold with probability >= 1 - eps over
    sampled balls: ages stay above min_age_floor, node counts below
    size_ceiling, strengths below strength_ceiling."""

    r: int
    eps: float
    samples: int
    min_age_floor: float
    size_ceiling: float
    strength_ceiling: float


def regularity_report(
    spec: ModelSpec,
    r: int,
    eps: float,
    samples: int,
    seed=None,
    *,
    node_cap: int = DEFAULT_NODE_CAP,
) -> RegularityReport:
    """Quantile summary of min age, size, and max strength over sampled
    trees (the eps and 1 - eps empirical quantiles respectively)."""
    if not 0.0 < eps < 1.0:
        raise ParameterError("eps must be in (0, 1)")
    if samples < 1:
        raise ParameterError("need at least one sample")
    min_age = np.empty(samples)
    size = np.empty(samples)
    strength = np.empty(samples)
    for i, tree in enumerate(sample_rppt_forest(spec, r, samples, seed=seed, node_cap=node_cap)):
        ages = [n.age for n in tree.nodes]
        min_age[i] = min(ages)
        size[i] = len(tree)
        strength[i] = max(n.strength for n in tree.nodes)
    return RegularityReport(
        r=r,
        eps=eps,
        samples=samples,
        min_age_floor=float(np.quantile(min_age, eps)),
        size_ceiling=float(np.quantile(size, 1.0 - eps)),
        strength_ceiling=float(np.quantile(strength, 1.0 - eps)),
    )
