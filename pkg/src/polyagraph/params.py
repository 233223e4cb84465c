"""Out-degree laws, model parameters, derived constants, and RNG streams.

Everything downstream (generators, urns, tree sampler, analytics) pulls its
scalar quantities from here: the out-degree law M, the fitness delta, the
initial two-vertex multigraph, and the derived exponents

    chi   = (E[M] + delta) / (2 E[M] + delta)
    phi   = (1 - chi) / chi
    tau_e = 3 + delta / E[M]
    tau   = min(tau_e, tau_M)

All types are immutable after construction; samplers take an explicit
numpy Generator so replicas can run on disjoint streams.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError

__all__ = [
    "OutDegreeLaw",
    "ModelSpec",
    "DerivedConstants",
    "derive_constants",
    "lambda_fn",
    "sample_out_degrees",
    "sample_gamma",
    "sample_beta",
    "stream",
    "parse_degree_dist",
]

# Strictness margin for the delta > -inf supp(M) requirement.
DELTA_GUARD = 1e-9

# Where lazily materialized pmfs of unbounded laws are cut; the dropped
# tail mass is tracked, never silently renormalized away.
_GEOMETRIC_TAIL_EPS = 1e-14


def _sha256_64(label: str) -> int:
    return int.from_bytes(hashlib.sha256(label.encode("utf-8")).digest()[:8], "big")


def stream(master_seed: int, purpose: str, replica: int = 0) -> np.random.Generator:
    """Derive a dedicated RNG stream from a master seed.

    Scheme: PCG64 seeded with SeedSequence([master_seed, h, replica]) where
    h is the first 8 bytes of sha256(purpose). Identical inputs give
    identical streams; distinct purposes or replicas give independent ones.
    """
    ss = np.random.SeedSequence([int(master_seed), _sha256_64(purpose), int(replica)])
    return np.random.Generator(np.random.PCG64(ss))


class OutDegreeLaw:
    """An N-valued out-degree distribution with finite materialized support.

    kinds: degenerate(m), uniform-range(a, b), truncated-zeta(exponent,
    cutoff), geometric(p), explicit-pmf(table). Support minimum must be >= 1.
    For geometric the materialized pmf stops at a 1e-14 quantile tail and
    `tail_mass` records the remainder; all other kinds are exact.
    """

    __slots__ = ("kind", "params", "support", "pmf", "tail_mass", "_cdf")

    def __init__(self, kind: str, params: dict, support, pmf, tail_mass: float = 0.0):
        self.kind = kind
        self.params = dict(params)
        self.support = np.asarray(support, dtype=np.int64)
        self.pmf = np.asarray(pmf, dtype=np.float64)
        self.tail_mass = float(tail_mass)
        if self.support.ndim != 1 or self.support.size == 0:
            raise ParameterError("out-degree support must be a non-empty 1-d set")
        if np.any(self.support < 1):
            raise ParameterError("out-degree support minimum must be >= 1")
        if np.any(np.diff(self.support) <= 0):
            raise ParameterError("out-degree support must be strictly increasing")
        if np.any(self.pmf < 0):
            raise ParameterError("out-degree pmf has negative entries")
        total = float(self.pmf.sum()) + self.tail_mass
        if abs(total - 1.0) > 1e-12:
            raise ParameterError(f"out-degree pmf sums to {total!r}, not 1 within 1e-12")
        self._cdf = np.cumsum(self.pmf)

    # -- constructors ------------------------------------------------------

    @classmethod
    def degenerate(cls, m: int) -> "OutDegreeLaw":
        m = int(m)
        return cls("degenerate", {"m": m}, [m], [1.0])

    @classmethod
    def uniform_range(cls, a: int, b: int) -> "OutDegreeLaw":
        a, b = int(a), int(b)
        if b < a:
            raise ParameterError(f"uniform-range needs a <= b, got ({a}, {b})")
        k = b - a + 1
        return cls("uniform-range", {"a": a, "b": b}, np.arange(a, b + 1), np.full(k, 1.0 / k))

    @classmethod
    def truncated_zeta(cls, exponent: float, cutoff: int = 10**6) -> "OutDegreeLaw":
        exponent = float(exponent)
        cutoff = int(cutoff)
        if exponent <= 2.0:
            # mean would diverge as cutoff grows; size-biasing would not normalize
            raise ParameterError("truncated-zeta exponent must exceed 2")
        support = np.arange(1, cutoff + 1)
        w = support.astype(np.float64) ** (-exponent)
        return cls(
            "truncated-zeta",
            {"exponent": exponent, "cutoff": cutoff},
            support,
            w / w.sum(),
        )

    @classmethod
    def geometric(cls, p: float) -> "OutDegreeLaw":
        p = float(p)
        if not 0.0 < p <= 1.0:
            raise ParameterError("geometric parameter must be in (0, 1]")
        if p == 1.0:
            return cls.degenerate(1)
        # smallest k with P(M > k) = (1-p)^k <= eps
        kmax = max(1, math.ceil(math.log(_GEOMETRIC_TAIL_EPS) / math.log1p(-p)))
        support = np.arange(1, kmax + 1)
        pmf = p * (1.0 - p) ** (support - 1.0)
        tail = (1.0 - p) ** kmax
        law = cls.__new__(cls)
        OutDegreeLaw.__init__(law, "geometric", {"p": p}, support, pmf, tail_mass=tail)
        return law

    @classmethod
    def explicit(cls, table: dict) -> "OutDegreeLaw":
        items = sorted((int(m), float(w)) for m, w in table.items())
        support = [m for m, _ in items]
        pmf = [w for _, w in items]
        return cls("explicit-pmf", {"table": {str(m): w for m, w in items}}, support, pmf)

    # -- queries -----------------------------------------------------------

    @property
    def min_support(self) -> int:
        return int(self.support[0])

    def mean(self) -> float:
        if self.kind == "geometric":
            return 1.0 / self.params["p"]
        return float(self.support @ self.pmf)

    def moment(self, p: float) -> float:
        """p-th moment of the materialized pmf (metadata; not enforced)."""
        return float((self.support.astype(np.float64) ** p) @ self.pmf) / (
            1.0 - self.tail_mass if self.tail_mass else 1.0
        )

    def tail_exponent(self) -> float:
        """tau_M: power-law exponent of M, +inf for light-tailed kinds."""
        if self.kind == "truncated-zeta":
            return float(self.params["exponent"])
        return math.inf

    def prob(self, m: int) -> float:
        i = np.searchsorted(self.support, m)
        if i < len(self.support) and self.support[i] == m:
            return float(self.pmf[i])
        return 0.0

    def sample(self, size: int, rng: np.random.Generator) -> np.ndarray:
        if self.kind == "degenerate":
            return np.full(size, self.params["m"], dtype=np.int64)
        if self.kind == "geometric":
            return rng.geometric(self.params["p"], size=size).astype(np.int64)
        idx = np.searchsorted(self._cdf, rng.random(size), side="right")
        idx = np.minimum(idx, len(self.support) - 1)
        return self.support[idx]

    def size_biased(self, delta: float) -> "OutDegreeLaw":
        """The law with pmf(m) = (m + delta) pmf_M(m) / (E[M] + delta).

        delta=0 gives the plain size-biased law. Requires delta > -min supp.
        """
        if delta <= -self.min_support:
            raise ParameterError("size-biasing requires delta > -inf supp(M)")
        if self.tail_mass > 1e-12:
            raise ParameterError("size-biasing a law with unresolved tail mass")
        w = (self.support + float(delta)) * self.pmf
        return OutDegreeLaw(
            "explicit-pmf",
            {"table": {str(int(m)): float(x) for m, x in zip(self.support, w / w.sum())}},
            self.support.copy(),
            w / w.sum(),
        )

    # -- serialization -----------------------------------------------------

    def to_json(self) -> dict:
        return {"kind": self.kind, **self.params}

    @classmethod
    def from_json(cls, obj: dict) -> "OutDegreeLaw":
        kind = obj["kind"]
        if kind == "degenerate":
            return cls.degenerate(obj["m"])
        if kind == "uniform-range":
            return cls.uniform_range(obj["a"], obj["b"])
        if kind == "truncated-zeta":
            return cls.truncated_zeta(obj["exponent"], obj.get("cutoff", 10**6))
        if kind == "geometric":
            return cls.geometric(obj["p"])
        if kind == "explicit-pmf":
            return cls.explicit({int(k): v for k, v in obj["table"].items()})
        raise ParameterError(f"unknown out-degree kind {kind!r}")

    @classmethod
    def from_config(cls, text: str) -> "OutDegreeLaw":
        """Parse a plain-text block of key=value lines (kind-specific keys)."""
        fields = {}
        for raw in text.splitlines():
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ParameterError(f"bad config line {raw!r}")
            k, v = line.split("=", 1)
            fields[k.strip()] = v.strip()
        kind = fields.pop("kind", None)
        if kind is None:
            raise ParameterError("degree-law config needs a 'kind' line")
        if kind == "explicit-pmf":
            table = {}
            for pair in fields.get("table", "").split(","):
                m, w = pair.split(":")
                table[int(m)] = float(w)
            return cls.explicit(table)
        conv = {"m": int, "a": int, "b": int, "cutoff": int, "exponent": float, "p": float}
        obj = {"kind": kind}
        for k, v in fields.items():
            obj[k] = conv.get(k, str)(v)
        return cls.from_json(obj)

    def __repr__(self):
        inner = ", ".join(f"{k}={v}" for k, v in self.params.items() if k != "table")
        if self.kind == "explicit-pmf":
            inner = ", ".join(f"{m}:{w:g}" for m, w in zip(self.support, self.pmf))
        return f"OutDegreeLaw({self.kind}; {inner})"

    def __eq__(self, other):
        return (
            isinstance(other, OutDegreeLaw)
            and self.kind == other.kind
            and np.array_equal(self.support, other.support)
            and np.allclose(self.pmf, other.pmf, rtol=0, atol=0)
        )


def parse_degree_dist(text: str) -> OutDegreeLaw:
    """Parse the compact CLI form of an out-degree law.

    Accepted: degenerate:M | uniform:A-B | zeta:TAU[:CUTOFF] |
    geometric:P | pmf:M=W,M=W,...
    """
    kind, _, rest = text.partition(":")
    try:
        if kind == "degenerate":
            return OutDegreeLaw.degenerate(int(rest))
        if kind == "uniform":
            a, b = rest.split("-")
            return OutDegreeLaw.uniform_range(int(a), int(b))
        if kind == "zeta":
            parts = rest.split(":")
            cutoff = int(parts[1]) if len(parts) > 1 else 10**6
            return OutDegreeLaw.truncated_zeta(float(parts[0]), cutoff)
        if kind == "geometric":
            return OutDegreeLaw.geometric(float(rest))
        if kind == "pmf":
            table = {}
            for pair in rest.split(","):
                m, w = pair.split("=")
                table[int(m)] = float(w)
            return OutDegreeLaw.explicit(table)
    except ParameterError:
        raise
    except (ValueError, IndexError) as exc:
        raise ParameterError(f"cannot parse degree law {text!r}: {exc}") from exc
    raise ParameterError(f"unknown degree-law kind {kind!r}")


@dataclass(frozen=True)
class ModelSpec:
    """A fully specified growth model.

    variant: one of A, B, D, E, F (sequential models) — urn-side variants
    are selected at call sites, not here. initial_edges is the starting
    two-vertex multigraph given as (u, v) pairs on {1, 2}; self-loops allowed.
    """

    variant: str
    delta: float
    out_degree: OutDegreeLaw
    initial_degrees: tuple = (1, 1)
    initial_edges: tuple = ((1, 2),)

    def __post_init__(self):
        if self.variant not in ("A", "B", "D", "E", "F"):
            raise ParameterError(f"unknown model variant {self.variant!r}")
        a1, a2 = self.initial_degrees
        if a1 < 1 or a2 < 1:
            raise ParameterError("initial degrees must be positive")
        # delta must keep every Beta parameter and step numerator positive:
        # the initial-weight Beta is Beta(a2+delta, a1+delta)
        floor = -min(self.out_degree.min_support, a1, a2)
        if not self.delta > floor + DELTA_GUARD:
            raise ParameterError(
                f"delta={self.delta} violates delta > {floor} (guard {DELTA_GUARD})"
            )
        deg = [0, 0, 0]  # 1-indexed over {1, 2}
        for u, v in self.initial_edges:
            if u not in (1, 2) or v not in (1, 2):
                raise ParameterError("initial edges must live on vertices {1, 2}")
            deg[u] += 1
            deg[v] += 1  # a self-loop (u == v) lands here twice: counts 2
        if (deg[1], deg[2]) != (a1, a2):
            raise ParameterError(
                f"initial degrees {(a1, a2)} inconsistent with initial edges "
                f"(edge degrees {(deg[1], deg[2])})"
            )
        object.__setattr__(self, "initial_edges", tuple(tuple(e) for e in self.initial_edges))

    @property
    def a_sum(self) -> int:
        return self.initial_degrees[0] + self.initial_degrees[1]

    def to_json(self) -> dict:
        return {
            "variant": self.variant,
            "delta": self.delta,
            "out_degree": self.out_degree.to_json(),
            "initial_degrees": list(self.initial_degrees),
            "initial_edges": [list(e) for e in self.initial_edges],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "ModelSpec":
        return cls(
            variant=obj["variant"],
            delta=float(obj["delta"]),
            out_degree=OutDegreeLaw.from_json(obj["out_degree"]),
            initial_degrees=tuple(obj.get("initial_degrees", (1, 1))),
            initial_edges=tuple(tuple(e) for e in obj.get("initial_edges", ((1, 2),))),
        )

    def header_json(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True, separators=(",", ":"))


@dataclass(frozen=True)
class DerivedConstants:
    chi: float
    phi: float
    tau_e: float
    tau: float
    mean_m: float = field(default=0.0)

    def __post_init__(self):
        if not 0.0 < self.chi < 1.0:
            raise ParameterError(f"chi={self.chi} outside (0, 1)")


def derive_constants(spec: ModelSpec) -> DerivedConstants:
    """chi, phi, tau_e, tau for a model spec (see module docstring)."""
    mu = spec.out_degree.mean()
    chi = (mu + spec.delta) / (2.0 * mu + spec.delta)
    tau_e = 3.0 + spec.delta / mu
    return DerivedConstants(
        chi=chi,
        phi=(1.0 - chi) / chi,
        tau_e=tau_e,
        tau=min(tau_e, spec.out_degree.tail_exponent()),
        mean_m=mu,
    )


def lambda_fn(x, chi: float):
    """lambda(x) = (1 - x^(1-chi)) / x^(1-chi), the mean number of younger
    children per unit strength at age x. Accepts scalars or arrays; x must
    be in (0, 1]."""
    x = np.asarray(x, dtype=np.float64)
    if np.any(x <= 0.0):
        raise ParameterError("lambda_fn needs x > 0")
    if np.any(x > 1.0):
        raise ParameterError("lambda_fn needs x <= 1")
    t = x ** (1.0 - chi)
    out = (1.0 - t) / t
    return float(out) if out.ndim == 0 else out


def sample_out_degrees(law: OutDegreeLaw, n: int, rng) -> np.ndarray:
    """Out-degrees for vertices 1..n as a 1-indexed array of length n+1.

    Entries 1 and 2 are forced to 1 (the two seed vertices contribute their
    initial edges, not sampled ones); slot 0 is unused and set to 0.
    rng may be a Generator or an integer seed.
    """
    if n < 2:
        raise ParameterError("need n >= 2")
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    m = np.empty(n + 1, dtype=np.int64)
    m[0] = 0
    m[1] = 1
    m[2] = 1
    if n > 2:
        m[3:] = law.sample(n - 2, rng)
    return m


def sample_gamma(shape: float, rate: float, rng: np.random.Generator, size=None):
    if shape <= 0.0:
        raise ParameterError(f"gamma shape must be positive, got {shape}")
    if rate <= 0.0:
        raise ParameterError(f"gamma rate must be positive, got {rate}")
    return rng.gamma(shape, 1.0 / rate, size=size)


def sample_beta(alpha: float, beta: float, rng: np.random.Generator, size=None):
    """Beta(alpha, beta) with the convention Beta(alpha, 0) == 1 pointwise."""
    if alpha <= 0.0:
        raise ParameterError(f"beta alpha must be positive, got {alpha}")
    if beta < 0.0:
        raise ParameterError(f"beta beta must be >= 0, got {beta}")
    if beta == 0.0:
        return 1.0 if size is None else np.ones(size)
    return rng.beta(alpha, beta, size=size)
