"""Urn representations of the growth models.

A sequential model can be re-generated in one shot: draw independent Beta
weights psi_k, form positions S_k = prod_{a>k} (1 - psi_a) (so S_0 = 0 and
S_n = 1, and the interval I_k = [S_{k-1}, S_k) has length psi_k * S_k /
(1 - psi_k) ... precisely S_k - S_{k-1}), then let each edge of vertex k
pick the interval its scaled uniform lands in. Scaling by S_{k-1} keeps
edges strictly below k (no self-loops); scaling by S_k allows landing in
I_k itself.

Two Beta schedules are provided. The per-vertex schedule matches the
no-self-loop model with frozen-within-phase degrees (model D). The
per-edge schedule lives on the expanded index set where every original
vertex k is split into m_k unit slots; building the unit-slot urn and then
collapsing each group of slots back into one vertex reproduces the
self-loop models (A via the self-inclusive scaling, B via the strict one).

Everything after the weights are drawn is a deterministic function of
(psi, uniforms), which the tests exploit for exact replay.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .errors import ParameterError
from .generators import EvolvingGraph
from .params import ModelSpec, derive_constants, sample_out_degrees, stream

__all__ = [
    "BetaSchedule",
    "UrnState",
    "CollapseMap",
    "build_pu",
    "build_cpu",
    "collapse",
    "collapse_pairs",
    "pu_edge_law",
    "cpu_edge_law",
    "position_concentration_report",
    "beta_gamma_coupling_report",
    "save_urn_sidecar",
    "load_urn_sidecar",
]

_LOG_SWEEP_THRESHOLD = 10_000
_SIDE_MAGIC = b"PGURNS1\x00"


def _positions(psi: np.ndarray) -> np.ndarray:
    """S[k] = prod_{a in (k, N]} (1 - psi[a]) for k = 0..N, via one backward
    sweep; log-space above the size threshold to dodge underflow."""
    n = len(psi) - 1
    q = 1.0 - psi[1:]
    if n > _LOG_SWEEP_THRESHOLD:
        with np.errstate(divide="ignore"):
            lg = np.log1p(-psi[1:])
        acc = np.cumsum(lg[::-1])
        s = np.empty(n + 1)
        s[n] = 1.0
        s[:n] = np.exp(acc[::-1])
    else:
        acc = np.multiply.accumulate(q[::-1])
        s = np.empty(n + 1)
        s[n] = 1.0
        s[:n] = acc[::-1]
    s[0] = 0.0
    return s


@dataclass
class UrnState:
    """Realized weights and positions of one urn.

    psi and S are 1-indexed over urn slots (psi[0] is nan, psi[1] == 1,
    S[0] == 0, S[-1] == 1). boundaries, when set, gives the cumulative slot
    count per original vertex so grouped positions can be read off:
    position(k) = S at that vertex's last slot, sub_position(k, j) = S at
    its j-th slot.
    """

    psi: np.ndarray
    S: np.ndarray
    boundaries: np.ndarray = None

    @property
    def size(self) -> int:
        return len(self.psi) - 1

    def position(self, k: int) -> float:
        if self.boundaries is not None:
            return float(self.S[self.boundaries[k]])
        return float(self.S[k])

    def sub_position(self, k: int, j: int) -> float:
        if self.boundaries is None:
            raise ParameterError("urn state carries no group boundaries")
        return float(self.S[self.boundaries[k - 1] + j])

    def interval_lengths(self) -> np.ndarray:
        return np.diff(self.S)


class BetaSchedule:
    """Per-slot Beta parameters for an urn bound to one out-degree sequence.

    kind "per-vertex": one weight per vertex v >= 3 with parameters
    (m_v + delta, a + 2(m_{[v-1]} - 2) + m_v + (v-1) delta); reproduces the
    frozen-phase no-self-loop model.

    kind "per-edge": one weight per unit slot (k, l), l in [m_k], with
    parameters (1 + delta/m_k, a + 2(m_{[k-1]} + l - 3) + (k-1) delta +
    ((l-1)/m_k) delta); the collapsed unit-slot urn reproduces the
    self-loop models.

    A slot's beta is the attachment mass sitting strictly below it at the
    first moment the slot can be hit. Under self-inclusive scaling (urn
    variant "SL") that moment is the slot's own placement, which is what
    the per-edge formula above states. Under strict scaling ("NSL") a slot
    only becomes reachable after its own edge is down, so every per-edge
    beta grows by that one placed edge; pass variant="NSL" to get the
    shifted schedule (it is the one whose collapsed urn reproduces the
    strict-scaling sequential model). The per-vertex parameters already
    measure mass at the end of the vertex's phase (the + m_v term) and are
    used unshifted for either scaling.

    Slot 1 is pinned to weight 1 and slot 2 draws Beta(a2 + delta,
    a1 + delta) in both kinds; the seed slots place no edges, so no shift
    applies there.
    """

    KINDS = ("per-vertex", "per-edge")
    ALIASES = {"modelD": "per-vertex", "collapsed": "per-edge"}

    def __init__(self, kind: str, spec: ModelSpec, out_degrees, *, variant: str = "SL"):
        kind = self.ALIASES.get(kind, kind)
        if kind not in self.KINDS:
            raise ParameterError(f"unknown schedule kind {kind!r}")
        if variant not in ("SL", "NSL"):
            raise ParameterError(f"unknown urn variant {variant!r}")
        self.kind = kind
        self.variant = variant
        self.spec = spec
        m = [int(x) for x in out_degrees]
        if m[1] != 1 or m[2] != 1:
            raise ParameterError("seed vertices must have out-degree slot 1")
        self.m = m
        self.n = len(m) - 1
        delta = spec.delta
        a = spec.a_sum
        a1, a2 = spec.initial_degrees
        cum = np.concatenate([[0], np.cumsum(m[1:])]).astype(np.int64)
        if kind == "per-vertex":
            self.size = self.n
            self.urn_out_degrees = list(m)
            self.boundaries = np.arange(self.n + 1, dtype=np.int64)
            v = np.arange(3, self.n + 1)
            mv = np.asarray(m[3:], dtype=np.float64)
            alpha = mv + delta
            beta = a + 2.0 * (cum[v - 1] - 2) + mv + (v - 1) * delta
        else:
            self.size = int(cum[self.n])
            self.urn_out_degrees = [0] + [1] * self.size
            self.boundaries = cum
            ks = np.repeat(np.arange(3, self.n + 1), m[3:])
            mk = np.repeat(np.asarray(m[3:], dtype=np.float64), m[3:])
            ls = np.concatenate([np.arange(1, x + 1) for x in m[3:]]) if self.n > 2 else np.array([])
            alpha = 1.0 + delta / mk
            beta = (
                a
                + 2.0 * (cum[ks - 1] + ls - 3)
                + (ks - 1) * delta
                + ((ls - 1) / mk) * delta
            )
            if variant == "NSL":
                beta = beta + 1.0
        self.alpha = np.concatenate([[np.nan, np.nan, a2 + delta], alpha])
        self.beta = np.concatenate([[np.nan, np.nan, a1 + delta], beta])
        bad = np.where(self.beta[2:] <= 0)[0]
        if bad.size or self.alpha[2] <= 0:
            raise ParameterError(
                f"non-positive Beta parameter at urn slot {2 + bad[0] if bad.size else 2}"
            )

    def sample_psi(self, rng) -> np.ndarray:
        psi = np.empty(self.size + 1)
        psi[0] = np.nan
        psi[1] = 1.0
        if self.size >= 2:
            psi[2:] = rng.beta(self.alpha[2:], self.beta[2:])
        return psi

    def mean_psi(self) -> np.ndarray:
        """Weights pinned at their means (diagnostic injection)."""
        psi = np.empty(self.size + 1)
        psi[0] = np.nan
        psi[1] = 1.0
        psi[2:] = self.alpha[2:] / (self.alpha[2:] + self.beta[2:])
        return psi


@dataclass(frozen=True)
class CollapseMap:
    """Partition of urn slots 1..total into consecutive groups."""

    sizes: tuple

    def __post_init__(self):
        if not self.sizes or any(int(s) < 1 for s in self.sizes):
            raise ParameterError("group sizes must be positive")
        object.__setattr__(self, "sizes", tuple(int(s) for s in self.sizes))

    @classmethod
    def from_out_degrees(cls, out_degrees) -> "CollapseMap":
        m = [int(x) for x in out_degrees]
        return cls(tuple([1, 1] + m[3:]))

    @property
    def n_groups(self) -> int:
        return len(self.sizes)

    @property
    def total(self) -> int:
        return sum(self.sizes)

    @property
    def boundaries(self) -> np.ndarray:
        return np.concatenate([[0], np.cumsum(self.sizes)]).astype(np.int64)

    def assignment(self) -> np.ndarray:
        """group_of[s] for s = 1..total (slot 0 unused)."""
        out = np.zeros(self.total + 1, dtype=np.int64)
        out[1:] = np.repeat(np.arange(1, self.n_groups + 1), self.sizes)
        return out


def collapse_pairs(pairs, assignment):
    """Collapse plain (a, b) endpoint pairs through a group assignment
    array (1-indexed). Intra-group pairs become self-loops."""
    return [(int(assignment[a]), int(assignment[b])) for a, b in pairs]


def collapse(graph: EvolvingGraph, cmap: CollapseMap) -> EvolvingGraph:
    """Collapse consecutive slot groups of a graph into single vertices.

    Requires the first two groups to be the singletons {1} and {2} so the
    initial two-vertex graph survives (that is the only collapsing the
    model constructions use). Edge objects are preserved: intra-group edges
    become self-loops, and each new vertex's edges are re-indexed 1..k in
    original placement order.
    """
    if cmap.total != graph.n:
        raise ParameterError(f"collapse map covers {cmap.total} slots, graph has {graph.n}")
    if cmap.sizes[0] != 1 or cmap.sizes[1] != 1:
        raise ParameterError("first two groups must be the untouched seed vertices")
    who = cmap.assignment()
    n_new = cmap.n_groups
    counts = [0] * (n_new + 1)
    new_edges = []
    for v, _, u in graph.edges:
        gv = int(who[v])
        counts[gv] += 1
        new_edges.append((gv, counts[gv], int(who[u])))
    m_new = [0, 1, 1] + counts[3:]
    return EvolvingGraph.from_edges(graph.spec, n_new, m_new, new_edges, seed=graph.seed)


def build_pu(
    schedule: BetaSchedule,
    variant: str,
    seed=None,
    *,
    rng=None,
    psi=None,
    uniforms=None,
):
    """Realize one urn graph under a schedule.

    variant "SL" scales each uniform by the placing vertex's own position
    (self-loops possible); "NSL" scales by the previous vertex's position
    (targets are strictly older). Vertices 1 and 2 place no edges: the
    initial graph of the schedule's spec is taken as given.

    Returns (graph, urn_state). With psi and uniforms injected the result
    is a pure function of them.
    """
    if variant not in ("SL", "NSL"):
        raise ParameterError(f"unknown urn variant {variant!r}")
    if rng is None:
        rng = stream(0 if seed is None else int(seed), "build-pu")
    if psi is None:
        psi = schedule.sample_psi(rng)
    else:
        psi = np.asarray(psi, dtype=np.float64)
        if len(psi) != schedule.size + 1:
            raise ParameterError(f"psi must have length {schedule.size + 1} (slot 0 unused)")
        if psi[1] != 1.0:
            raise ParameterError("psi[1] must be 1")
    S = _positions(psi)
    m_urn = schedule.urn_out_degrees
    nv = len(m_urn) - 1
    srcs = np.repeat(np.arange(3, nv + 1, dtype=np.int64), m_urn[3:])
    n_edges = len(srcs)
    if uniforms is None:
        u01 = rng.random(n_edges)
    else:
        u01 = np.asarray(uniforms, dtype=np.float64)
        if len(u01) != n_edges:
            raise ParameterError(f"need {n_edges} uniforms")
    scale_idx = srcs if variant == "SL" else srcs - 1
    x = u01 * S[scale_idx]
    tgt = np.searchsorted(S, x, side="right")
    eidx = np.concatenate([np.arange(1, k + 1) for k in m_urn[3:]]) if nv > 2 else np.array([])
    edges = list(zip(srcs.tolist(), [int(e) for e in eidx], tgt.tolist()))
    g = EvolvingGraph.from_edges(schedule.spec, nv, m_urn, edges, seed=seed)
    urn = UrnState(psi=psi, S=S, boundaries=schedule.boundaries)
    return g, urn


def build_cpu(spec: ModelSpec, n: int, variant: str, seed=None, *, rng=None, out_degrees=None, psi=None):
    """Unit-slot urn plus collapse: the one-shot construction of the
    self-loop models. variant "SL" reproduces the model whose self weight
    includes the incoming stub (model A); "NSL" the strict one (model B:
    its self-loops arise only from collapsed intra-group slots).

    Returns (graph, urn_state); the urn state keeps per-vertex boundaries
    so sub-positions can be read off.
    """
    if rng is None:
        rng = stream(0 if seed is None else int(seed), "build-cpu")
    if out_degrees is None:
        m = sample_out_degrees(spec.out_degree, n, rng).tolist()
    else:
        m = [int(x) for x in out_degrees]
    schedule = BetaSchedule("per-edge", spec, m, variant=variant)
    expanded, urn = build_pu(schedule, variant, seed=seed, rng=rng, psi=psi)
    cmap = CollapseMap.from_out_degrees(m)
    g = collapse(expanded, cmap)
    return g, urn


def pu_edge_law(urn: UrnState, k: int, variant: str) -> np.ndarray:
    """Conditional law of one edge of urn vertex k given the weights:
    probs[u-1] for u = 1..k. SL: (S_u - S_{u-1}) / S_k with the self term
    included; NSL: same ratios over S_{k-1} with probs[k-1] = 0."""
    S = urn.S
    if variant == "SL":
        p = np.diff(S[: k + 1]) / S[k]
    elif variant == "NSL":
        p = np.append(np.diff(S[:k]) / S[k - 1], 0.0)
    else:
        raise ParameterError(f"unknown urn variant {variant!r}")
    return p


def cpu_edge_law(urn: UrnState, u: int, j: int, variant: str) -> np.ndarray:
    """Conditional law of collapsed edge (u, j) over targets v = 1..u.

    SL: (S_v - S_{v-1}) / S_{u,j} for v < u and (S_{u,j} - S_{u-1}) /
    S_{u,j} for the self-loop; NSL replaces S_{u,j} by S_{u,j-1}."""
    b = urn.boundaries
    if b is None:
        raise ParameterError("urn state carries no group boundaries")
    S = urn.S
    off = 0 if variant == "SL" else 1
    if variant not in ("SL", "NSL"):
        raise ParameterError(f"unknown urn variant {variant!r}")
    scale = S[b[u - 1] + j - off]
    p = np.empty(u)
    p[: u - 1] = np.diff(S[b[:u]]) / scale
    p[u - 1] = (scale - S[b[u - 1]]) / scale
    return p


# -- diagnostics ------------------------------------------------------------


@dataclass(frozen=True)
class PositionReport:
    seed: int
    n: int
    chi: float
    max_abs_dev: float
    argmax_k: int
    max_rel_dev: float
    rel_cutoff: int


def position_concentration_report(
    spec: ModelSpec, n: int, seeds, *, rel_cutoff: int = 10, kind: str = "per-vertex"
):
    """Per seed: max_k |S_k - (k/n)^chi| over vertices (absolute), and the
    same deviation relative to (k/n)^chi for k past the cutoff."""
    chi = derive_constants(spec).chi
    rows = []
    for seed in seeds:
        rng = stream(int(seed), "position-report")
        m = sample_out_degrees(spec.out_degree, n, rng)
        schedule = BetaSchedule(kind, spec, m.tolist())
        S = _positions(schedule.sample_psi(rng))
        pos = S[schedule.boundaries[1:]]
        k = np.arange(1, schedule.n + 1)
        ref = (k / schedule.n) ** chi
        dev = np.abs(pos - ref)
        rel = dev[rel_cutoff:] / ref[rel_cutoff:]
        rows.append(
            PositionReport(
                seed=int(seed),
                n=n,
                chi=chi,
                max_abs_dev=float(dev.max()),
                argmax_k=int(1 + dev.argmax()),
                max_rel_dev=float(rel.max()) if rel.size else float("nan"),
                rel_cutoff=rel_cutoff,
            )
        )
    return rows


@dataclass(frozen=True)
class CouplingReport:
    k: int
    m_k: int
    eta: float
    cutoff: float
    n_points: int
    frac_within: float
    mean_scaled_sum: float


def beta_gamma_coupling_report(
    spec: ModelSpec,
    ks,
    *,
    eta: float = 0.1,
    rho: float = 0.1,
    n_points: int = 10_000,
    seed: int = 0,
    mc_draws: int = 400_000,
):
    """Quantile-couple the per-vertex weight sum against its Gamma limit.

    For vertex k let phi_k be the sum of its m_k unit-slot weights. The
    quantile map h(x) sending Gamma(m_k + delta, 1) to phi_k should satisfy
    (1 - eta) x / (k c) <= h(x) <= (1 + eta) x / (k c) with c = 2 E[M] +
    delta, for x up to k^(1 - rho/2). Points x are drawn from the Gamma
    itself (truncated at the cutoff); m_k = 1 uses exact Beta/Gamma CDFs,
    larger m_k an empirical quantile table of mc_draws simulated sums.
    """
    delta = spec.delta
    c = 2.0 * spec.out_degree.mean() + delta
    rows = []
    for k in ks:
        rng = stream(seed, "beta-gamma", replica=int(k))
        m = sample_out_degrees(spec.out_degree, int(k), rng).tolist()
        schedule = BetaSchedule("per-edge", spec, m)
        m_k = m[k]
        shape = m_k + delta
        cutoff = float(k) ** (1.0 - rho / 2.0)
        x = rng.gamma(shape, 1.0, size=n_points)
        x = x[x <= cutoff]
        lo = schedule.boundaries[k - 1]
        a_par = schedule.alpha[lo + 1 : lo + m_k + 1]
        b_par = schedule.beta[lo + 1 : lo + m_k + 1]
        q = stats.gamma.cdf(x, shape)
        if m_k == 1:
            h = stats.beta.ppf(q, a_par[0], b_par[0])
            phi_mean = a_par[0] / (a_par[0] + b_par[0])
        else:
            draws = rng.beta(
                np.broadcast_to(a_par, (mc_draws, m_k)),
                np.broadcast_to(b_par, (mc_draws, m_k)),
            ).sum(axis=1)
            draws.sort()
            idx = np.minimum((q * mc_draws).astype(np.int64), mc_draws - 1)
            h = draws[idx]
            phi_mean = float(draws.mean())
        ref = x / (k * c)
        within = (h >= (1.0 - eta) * ref) & (h <= (1.0 + eta) * ref)
        rows.append(
            CouplingReport(
                k=int(k),
                m_k=int(m_k),
                eta=eta,
                cutoff=cutoff,
                n_points=int(len(x)),
                frac_within=float(within.mean()),
                mean_scaled_sum=float(k * phi_mean),
            )
        )
    return rows


# -- sidecar ---------------------------------------------------------------


def save_urn_sidecar(urn: UrnState, path) -> None:
    """Binary sidecar: 16-byte header (magic + slot count), then psi and S
    as little-endian doubles. Exact replay on load."""
    n = urn.size
    with open(path, "wb") as f:
        f.write(_SIDE_MAGIC)
        f.write(struct.pack("<Q", n))
        f.write(urn.psi.astype("<f8").tobytes())
        f.write(urn.S.astype("<f8").tobytes())


def load_urn_sidecar(path) -> UrnState:
    with open(path, "rb") as f:
        magic = f.read(8)
        if magic != _SIDE_MAGIC:
            raise ParameterError(f"not an urn sidecar: bad magic {magic!r}")
        (n,) = struct.unpack("<Q", f.read(8))
        psi = np.frombuffer(f.read(8 * (n + 1)), dtype="<f8").astype(np.float64)
        S = np.frombuffer(f.read(8 * (n + 1)), dtype="<f8").astype(np.float64)
    return UrnState(psi=psi, S=S)
