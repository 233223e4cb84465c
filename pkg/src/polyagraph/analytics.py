"""Limit laws of the growth models and coupling diagnostics.

Everything here evaluates, in closed form or by quadrature, quantities the
generated graphs converge to, plus the machinery to compare two model
variants edge by edge:

* ``mixed_poisson_pmf`` is the degree law of a node of known out-count and
  age: out-count plus a Poisson count whose rate is an independent Gamma
  strength times the age-dependent exposure ``lambda(a)``.
* ``root_degree_pmf``, ``older_neighbor_pmf`` and ``younger_neighbor_pmf``
  mix that law over the out-count and age of, respectively, a uniform
  vertex, a uniformly chosen older neighbor, and a uniformly chosen
  younger neighbor; ``build_degree_law`` tabulates them with a certified
  truncation bound.
* ``AgeDensity`` carries the age laws those mixtures integrate against,
  with exact pdf/cdf/sampler triples.  The younger-child age comes in two
  flavors: the plain law of one younger child of a root with uniform age,
  and the tilted law seen when the root is conditioned on having at least
  one younger child (the conditioning favors early roots, which is what a
  graph-side "pick a vertex with in-edges, then a uniform in-neighbor"
  estimator does).
* ``rppt_tree_density`` evaluates the joint density of the age marks on a
  fixed finite tree pattern under the limit tree, as a deterministic edge
  product times a Monte Carlo expectation over out-counts and strengths.
* ``coupling_tv_bound`` and the ``couple_D_E`` / ``couple_D_F`` runners
  quantify how far the frozen-degree variants are from the one-at-a-time
  variant: exact per-arrival total variation, and a per-edge maximal
  coupling of whole graphs that reports the fraction of vertices whose
  labelled r-balls end up differing.

Empirical counterparts (weighted degree histograms, survival curves, a
log-log tail fitter) live here too so generated graphs can be tested
against the limits without duplicating the estimators in test code.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import integrate, special, stats

from .errors import ParameterError, ResourceError, TruncationError
from .neighborhoods import _UndirectedView
from .params import (
    DerivedConstants,
    ModelSpec,
    derive_constants,
    lambda_fn,
    stream,
)

__all__ = [
    "AgeDensity",
    "DegreeLaw",
    "DensityEstimate",
    "TailFit",
    "build_degree_law",
    "couple_D_E",
    "couple_D_F",
    "coupled_mismatch_fractions",
    "coupling_tv_bound",
    "coupling_tv_envelope",
    "empirical_older_neighbor_law",
    "empirical_root_degree_law",
    "empirical_survival",
    "empirical_younger_neighbor_law",
    "fit_log_log_slope",
    "mixed_poisson_pmf",
    "no_further_edge_factor",
    "older_neighbor_pmf",
    "root_degree_pmf",
    "rppt_tree_density",
    "total_variation",
    "write_coupling_report",
    "write_degree_law_table",
    "younger_neighbor_pmf",
]

_LAW_CAP = 1 << 18


# ---------------------------------------------------------------------------
# Mixed-Poisson building block


def mixed_poisson_pmf(m: int, a: float, t: int, spec: ModelSpec) -> float:
    """P(degree = t) for a node of out-count m and age a.

    The degree is m plus a Poisson count with rate Gamma * lambda(a),
    Gamma ~ Gamma(m + delta, 1); mixing the Poisson over the strength
    gives a negative binomial with m + delta successes at success rate
    a^(1-chi).  Evaluated in log-Gamma form; t < m returns 0.
    """
    m = int(m)
    t = int(t)
    if m < 1:
        raise ParameterError("out-count m must be >= 1")
    a = float(a)
    if not 0.0 < a <= 1.0:
        raise ParameterError("age must lie in (0, 1]")
    if t < m:
        return 0.0
    delta = spec.delta
    chi = derive_constants(spec).chi
    p = a ** (1.0 - chi)
    if p >= 1.0:
        return 1.0 if t == m else 0.0
    k = t - m
    logv = (
        special.gammaln(t + delta)
        - special.gammaln(m + delta)
        - special.gammaln(k + 1)
        + k * math.log1p(-p)
        + (m + delta) * math.log(p)
    )
    return float(math.exp(logv))


def _nb_pmf_vec(m: int, t: int, p, delta: float):
    """mixed_poisson_pmf with a vector of success rates p = a^(1-chi)."""
    p = np.asarray(p, dtype=np.float64)
    k = t - m
    logv = (
        special.gammaln(t + delta)
        - special.gammaln(m + delta)
        - special.gammaln(k + 1)
        + k * np.log1p(-p)
        + (m + delta) * np.log(p)
    )
    return np.exp(logv)


# ---------------------------------------------------------------------------
# Degree laws of the root and its neighbors


def root_degree_pmf(t: int, spec: ModelSpec) -> float:
    """P(degree of a uniform vertex = t) in the limit.

    The degree is M + Y(M, U) with U the uniform age of the root; the age
    integral collapses to a Beta ratio, leaving a single sum over the
    out-count law.  At m identically 1, delta 0 this is the classical
    4 / (t (t+1) (t+2)).
    """
    t = int(t)
    if t < 1:
        return 0.0
    c = derive_constants(spec)
    te = c.tau_e
    d = spec.delta
    law = spec.out_degree
    mask = law.support <= t
    if not mask.any():
        return 0.0
    ms = law.support[mask].astype(np.float64)
    logs = (
        math.log(te - 1.0)
        + special.gammaln(t + d)
        + special.gammaln(ms + d + te - 1.0)
        - special.gammaln(ms + d)
        - special.gammaln(t + d + te)
    )
    return float(law.pmf[mask] @ np.exp(logs))


def older_neighbor_pmf(t: int, spec: ModelSpec) -> float:
    """P(degree of a uniformly chosen older neighbor = t) in the limit.

    The picked vertex has the fitness-size-biased out-count law, one extra
    unit of degree from the edge it was picked along, and an age pulled
    towards 0 (older vertices are more likely targets); the age integral
    again collapses to Beta ratios.  Zero for t < 2.
    """
    t = int(t)
    if t < 2:
        return 0.0
    c = derive_constants(spec)
    te = c.tau_e
    d = spec.delta
    biased = spec.out_degree.size_biased(spec.delta)
    mask = biased.support <= t - 1
    if not mask.any():
        return 0.0
    ms = biased.support[mask].astype(np.float64)
    logs = (
        special.gammaln(t + d)
        + special.gammaln(ms + d + te - 1.0)
        - special.gammaln(ms + 1.0 + d)
        - special.gammaln(t + d + te)
    )
    vals = (te - 2.0) * (te - 1.0) * (t - ms) * np.exp(logs)
    return float(biased.pmf[mask] @ vals)


def younger_neighbor_pmf(t: int, spec: ModelSpec, *, tilted: bool = True) -> float:
    """P(degree of a uniformly chosen younger neighbor = t) in the limit.

    The picked vertex has the plain size-biased out-count law and the age
    of one younger child; the pmf is the age integral of
    ``mixed_poisson_pmf`` against that age density, evaluated by adaptive
    quadrature after the substitution Y = a^(1-chi) (the integrand in raw
    age coordinates concentrates in an unresolvable boundary layer for
    large t; in Y it is a smooth negative-binomial bump).

    tilted=True (default) conditions the implied root on having at least
    one younger neighbor, which is what the graph estimator "uniform
    vertex with in-edges, then uniform in-neighbor" measures.  tilted=False
    keeps the root age uniform, the law of one younger child of an
    unconditioned root.
    """
    t = int(t)
    if t < 1:
        return 0.0
    constants = derive_constants(spec)
    te = constants.tau_e
    delta = spec.delta
    law = spec.out_degree
    biased = law.size_biased(0.0)
    mask = biased.support <= t
    if not mask.any():
        return 0.0

    if tilted:
        w_norm = _tilt_normalizer(spec, constants)

        def age_part(y):
            acc = 0.0
            base = float(_log_int_series(np.asarray(y), te - 1.0))
            for mr, wr in zip(law.support.tolist(), law.pmf.tolist()):
                acc += wr * (
                    base - float(_log_int_series(np.asarray(y), te - 1.0 + mr + delta))
                )
            return acc / w_norm

    else:

        def age_part(y):
            return float(_log_int_series(np.asarray(y), te - 1.0))

    total = 0.0
    for m, w in zip(biased.support[mask].tolist(), biased.pmf[mask].tolist()):

        def integrand(y, m=m):
            if y <= 0.0 or y >= 1.0:
                return 0.0
            return float(_nb_pmf_vec(m, t, y, delta)) * age_part(y)

        val, _ = integrate.quad(integrand, 0.0, 1.0, limit=400)
        total += w * (te - 1.0) * val
    return float(total)


def _younger_pmf_series(t: int, spec: ModelSpec, *, tilted: bool = False) -> float:
    """Closed series form of younger_neighbor_pmf (test oracle, small t).

    Expanding the age density's inner integral as a power series and
    swapping sum and integral turns every term into a Beta function; the
    resulting series sum_i B(x0 + i, K) / (s + i) is a rational function
    of i with simple poles, so partial fractions give its exact value as
    a digamma combination.  Independent of both the quadrature and the
    Gauss-2F1 evaluation paths.
    """
    t = int(t)
    c = derive_constants(spec)
    te = c.tau_e
    d = spec.delta
    law = spec.out_degree
    biased = law.size_biased(0.0)

    def inner(m: int, shift: float) -> float:
        # sum_i B(x0 + i, K) / (shift + i) with K = t - m + 1 and
        # x0 = m + d + shift + 1: residues at i = -shift and i = -(x0+j)
        # cancel at infinity, leaving a finite digamma combination.
        big_k = t - m + 1
        x0 = m + d + shift + 1.0
        res_s = math.exp(
            special.gammaln(m + d + 1.0) - special.gammaln(m + d + 1.0 + big_k)
        )
        total = -res_s * special.digamma(shift)
        for j in range(big_k):
            res_j = (-1.0) ** (j + 1) / (
                (m + d + 1.0 + j) * math.factorial(j) * math.factorial(big_k - 1 - j)
            )
            total -= res_j * special.digamma(x0 + j)
        return math.factorial(big_k - 1) * total

    total = 0.0
    for m, w in zip(biased.support.tolist(), biased.pmf.tolist()):
        if m > t:
            continue
        pref = (te - 1.0) * math.exp(
            special.gammaln(t + d) - special.gammaln(m + d) - special.gammaln(t - m + 1)
        )
        if not tilted:
            total += w * pref * inner(m, te - 1.0)
            continue
        bump = 0.0
        for mr, wr in zip(law.support.tolist(), law.pmf.tolist()):
            bump += wr * (inner(m, te - 1.0) - inner(m, te - 1.0 + mr + d))
        tilt_norm = _tilt_normalizer(spec, c)
        total += w * pref * bump / tilt_norm
    return float(total)


def _tilt_normalizer(spec: ModelSpec, constants: DerivedConstants) -> float:
    """P(a uniform-age root has at least one younger child)."""
    law = spec.out_degree
    shapes = (1.0 - constants.chi) * (law.support + spec.delta) + 1.0
    return float(1.0 - law.pmf @ (1.0 / shapes))


# ---------------------------------------------------------------------------
# Tabulated degree laws


@dataclass(frozen=True)
class DegreeLaw:
    """A tabulated limit degree law over k = 1..truncation.

    ``pmf[k-1]`` is P(degree = k); ``tail_bound`` is the exact mass beyond
    the truncation (1 - sum pmf), kept below 1e-6 unless the caller pinned
    the truncation.  which is one of root / older / younger.
    """

    which: str
    spec: ModelSpec
    constants: DerivedConstants
    pmf: np.ndarray
    tail_bound: float

    def __post_init__(self):
        if self.which not in ("root", "older", "younger"):
            raise ParameterError(f"unknown degree law {self.which!r}")

    @property
    def truncation(self) -> int:
        return len(self.pmf)

    def prob(self, k: int) -> float:
        k = int(k)
        if 1 <= k <= len(self.pmf):
            return float(self.pmf[k - 1])
        return 0.0

    def cumulative(self) -> np.ndarray:
        return np.cumsum(self.pmf)

    def survival(self, k: int) -> float:
        """P(degree > k), counting the truncated tail as lost mass."""
        k = int(k)
        if k < 1:
            return float(self.pmf.sum() + self.tail_bound)
        if k >= len(self.pmf):
            return self.tail_bound
        return float(self.pmf[k:].sum() + self.tail_bound)


def build_degree_law(
    which: str,
    spec: ModelSpec,
    *,
    truncation: int | None = None,
    tilted: bool = True,
) -> DegreeLaw:
    """Tabulate one of the three limit degree laws.

    With truncation=None the table grows (doubling) until the missing mass
    is below 1e-6; an explicit truncation that leaves more mass than that
    raises TruncationError.  ``tilted`` only affects which="younger".
    """
    if which == "root":
        evaluate = lambda t: root_degree_pmf(t, spec)  # noqa: E731
    elif which == "older":
        evaluate = lambda t: older_neighbor_pmf(t, spec)  # noqa: E731
    elif which == "younger":
        evaluate = lambda t: younger_neighbor_pmf(t, spec, tilted=tilted)  # noqa: E731
    else:
        raise ParameterError(f"unknown degree law {which!r}")
    constants = derive_constants(spec)
    values: list[float] = []
    target = truncation if truncation is not None else 64
    if target < 1:
        raise ParameterError("truncation must be >= 1")
    while True:
        values.extend(evaluate(t) for t in range(len(values) + 1, target + 1))
        tail = 1.0 - math.fsum(values)
        if tail <= 1e-6 or truncation is not None:
            break
        if target >= _LAW_CAP:
            raise TruncationError(
                f"degree law {which!r} still has mass {tail:.3g} beyond k={target}"
            )
        target = min(2 * target, _LAW_CAP)
    if truncation is not None and tail > 1e-6:
        raise TruncationError(
            f"degree law {which!r} has mass {tail:.3g} beyond the requested "
            f"truncation {truncation}"
        )
    pmf = np.asarray(values, dtype=np.float64)
    pmf.setflags(write=False)
    return DegreeLaw(
        which=which,
        spec=spec,
        constants=constants,
        pmf=pmf,
        tail_bound=max(tail, 0.0),
    )


def write_degree_law_table(path, law: DegreeLaw, *, extra_meta: dict | None = None):
    """Write a degree law as CSV rows (k, pmf, cumulative).

    The first line is a '# '-prefixed JSON object with the law parameters.
    Returns the list of row dicts.
    """
    meta = {
        "which": law.which,
        "spec": law.spec.to_json(),
        "chi": law.constants.chi,
        "tau_e": law.constants.tau_e,
        "truncation": law.truncation,
        "tail_bound": law.tail_bound,
    }
    if extra_meta:
        meta.update(extra_meta)
    cum = law.cumulative()
    rows = [
        {"k": k + 1, "pmf": float(law.pmf[k]), "cumulative": float(cum[k])}
        for k in range(law.truncation)
    ]
    path = Path(path)
    with path.open("w") as fh:
        fh.write("# " + json.dumps(meta, sort_keys=True) + "\n")
        fh.write("k,pmf,cumulative\n")
        for row in rows:
            fh.write("%d,%.17g,%.17g\n" % (row["k"], row["pmf"], row["cumulative"]))
    return rows


# ---------------------------------------------------------------------------
# Age densities


def _log_int_series(y, c: float):
    """integral_0^y x^(c-1)/(1-x) dx = sum_i y^(c+i)/(c+i).

    Evaluated as y^c/c * 2F1(1, c; c+1; y) (the same power series) away
    from 1; scipy's 2F1 turns erratic in the logarithmic z -> 1 regime,
    so for y > 0.95 the exact log form
    -log(1-y) - psi(c) - euler_gamma + sum_k (-1)^(k+1) C(c-1, k) (1-y)^k / k
    is used instead (the binomial tail converges in a few terms there).
    """
    y = np.asarray(y, dtype=np.float64)
    out = np.zeros_like(y)
    near = y > 0.95
    mid = (y > 0.0) & ~near
    ym = y[mid]
    out[mid] = ym**c / c * special.hyp2f1(1.0, c, c + 1.0, ym)
    if near.any():
        u = 1.0 - y[near]
        acc = -np.log(u) - special.digamma(c) - np.euler_gamma
        coeff = c - 1.0  # signed (-1)^(k+1) C(c-1, k), by d_k = d_{k-1} (k-c)/k
        upow = np.ones_like(u)
        for k in range(1, 400):
            upow *= u
            term = coeff * upow / k
            acc += term
            if np.max(np.abs(term)) < 1e-17 * max(1.0, float(np.max(np.abs(acc)))):
                break
            coeff *= (k + 1.0 - c) / (k + 1.0)
        out[near] = acc
    return out


class AgeDensity:
    """One of the age laws on (0, 1) attached to the limit tree.

    which selects the law:

    * ``root-uniform``: the root age, Uniform(0, 1).
    * ``older-child``: age of a uniformly picked child older than its
      parent when the parent is a uniform root: A = U * V^(1/chi) with
      U, V independent uniforms.
    * ``younger-child``: age of one younger child of a root with uniform,
      unconditioned age (the single-point conditional law is proportional
      to x^(-chi) above the root age).  The pdf diverges logarithmically
      at 1.
    * ``younger-child-tilted``: as above but with the root age reweighted
      by the probability of having at least one younger child, the law
      seen when sampling a younger neighbor of a vertex conditioned on
      having one.

    pdf/cdf are closed forms (the younger laws via the series integral
    ``_log_int_series``); ``sample`` draws exactly from the defining
    construction.  ``normalization`` integrates the pdf as a self-check.
    """

    KINDS = ("root-uniform", "older-child", "younger-child", "younger-child-tilted")

    def __init__(self, which: str, spec: ModelSpec):
        if which not in self.KINDS:
            raise ParameterError(f"unknown age density {which!r}")
        self.which = which
        self.spec = spec
        self.constants = derive_constants(spec)
        self.chi = self.constants.chi
        if which == "younger-child-tilted":
            self._tilt_norm = _tilt_normalizer(spec, self.constants)

    # -- evaluation --------------------------------------------------------

    def _tilted_series(self, y):
        """sum_m pmf(m) [S(y; te-1) - S(y; te-1+m+delta)] with S the
        series integral; equals (1-chi) * integral_0^a w(u)/(1-u^(1-chi)) du
        expressed in y = a^(1-chi)."""
        te = self.constants.tau_e
        law = self.spec.out_degree
        acc = np.zeros_like(np.asarray(y, dtype=np.float64))
        base = _log_int_series(y, te - 1.0)
        for m, w in zip(law.support.tolist(), law.pmf.tolist()):
            acc += w * (base - _log_int_series(y, te - 1.0 + m + self.spec.delta))
        return acc

    def pdf(self, a):
        a = np.asarray(a, dtype=np.float64)
        if np.any(a <= 0.0) or np.any(a >= 1.0):
            raise ParameterError("age density pdf is defined on the open (0, 1)")
        chi = self.chi
        if self.which == "root-uniform":
            out = np.ones_like(a)
        elif self.which == "older-child":
            out = chi / (1.0 - chi) * a ** (chi - 1.0) * (1.0 - a ** (1.0 - chi))
        elif self.which == "younger-child":
            te = self.constants.tau_e
            out = a ** (-chi) * _log_int_series(a ** (1.0 - chi), te - 1.0)
        else:
            out = a ** (-chi) * self._tilted_series(a ** (1.0 - chi)) / self._tilt_norm
        return float(out) if out.ndim == 0 else out

    def cdf(self, a):
        a = np.asarray(a, dtype=np.float64)
        if np.any(a < 0.0) or np.any(a > 1.0):
            raise ParameterError("age density cdf is defined on [0, 1]")
        chi = self.chi
        te = self.constants.tau_e
        if self.which == "root-uniform":
            out = a.copy()
        elif self.which == "older-child":
            out = (a**chi - chi * a) / (1.0 - chi)
        elif self.which == "younger-child":
            # clamp: the series value at exactly 1 is replaced below anyway
            y = np.where(a >= 1.0, 1.0 - 1e-9, a ** (1.0 - chi))
            out = (te - 1.0) * (
                y * _log_int_series(y, te - 1.0) - _log_int_series(y, te)
            )
            out = np.where(a >= 1.0, 1.0, out)
        else:
            y = np.where(a >= 1.0, 1.0 - 1e-9, a ** (1.0 - chi))
            law = self.spec.out_degree
            acc = np.zeros_like(y)
            base = y * _log_int_series(y, te - 1.0) - _log_int_series(y, te)
            for m, w in zip(law.support.tolist(), law.pmf.tolist()):
                c = te - 1.0 + m + self.spec.delta
                acc += w * (
                    base - (y * _log_int_series(y, c) - _log_int_series(y, c + 1.0))
                )
            out = (te - 1.0) * acc / self._tilt_norm
            out = np.where(a >= 1.0, 1.0, out)
        return float(out) if out.ndim == 0 else out

    # -- sampling ----------------------------------------------------------

    def _sample_child_given_root(self, u, rng):
        """One point from the density ~ x^(-chi) on (u, 1), by inverse cdf."""
        head = u ** (1.0 - self.chi)
        v = rng.random(np.shape(u))
        return (head + (1.0 - head) * v) ** (1.0 / (1.0 - self.chi))

    def sample(self, size: int, seed=None, *, rng=None) -> np.ndarray:
        """Draw ``size`` ages exactly from the defining construction."""
        if size < 1:
            raise ParameterError("sample size must be >= 1")
        if rng is None:
            rng = stream(0 if seed is None else int(seed), f"age-{self.which}")
        if self.which == "root-uniform":
            return rng.random(size)
        if self.which == "older-child":
            return rng.random(size) * rng.random(size) ** (1.0 / self.chi)
        if self.which == "younger-child":
            return self._sample_child_given_root(rng.random(size), rng)
        # tilted: rejection on the root age with acceptance w(u) <= 1
        law = self.spec.out_degree
        shapes = (1.0 - self.chi) * (law.support.astype(np.float64) + self.spec.delta)
        out = np.empty(size, dtype=np.float64)
        filled = 0
        for _ in range(10_000):
            block = max(size - filled, 64)
            u = rng.random(block)
            w = 1.0 - (u[:, None] ** shapes[None, :]) @ law.pmf
            keep = u[rng.random(block) < w]
            take = min(len(keep), size - filled)
            out[filled : filled + take] = keep[:take]
            filled += take
            if filled == size:
                return self._sample_child_given_root(out, rng)
        raise ResourceError("tilted age rejection sampler failed to fill the batch")

    def normalization(self) -> float:
        """integral of the pdf over (0, 1) by adaptive quadrature."""

        def f(a):
            if a <= 0.0 or a >= 1.0:
                return 0.0
            return float(self.pdf(a))

        val, _ = integrate.quad(f, 0.0, 1.0, limit=200)
        return float(val)


# ---------------------------------------------------------------------------
# Joint density of age marks on a tree pattern


@dataclass(frozen=True)
class DensityEstimate:
    """Monte Carlo estimate of a pattern density: value, standard error,
    and the replica count that produced them."""

    value: float
    stderr: float
    reps: int


def rppt_tree_density(
    pattern,
    spec: ModelSpec,
    mc_reps: int = 100_000,
    *,
    r: int | None = None,
    seed=None,
    rng=None,
) -> DensityEstimate:
    """Joint density of the age marks on a fixed tree pattern.

    The pattern's nodes are classified by age against their parent (a
    smaller age means an older child).  The density factorizes into a
    deterministic part -- chi^(#older) (1-chi)^(#younger) times the edge
    product (max age)^(-chi) (min age)^(-(1-chi)) over parent-child pairs
    -- and an expectation over each interior node's out-count and
    strength: (out-count)! * strength^(#younger children) *
    exp(-strength * lambda(age)), with the out-count required to equal
    the node's older-child count in the pattern.  The expectation is
    estimated with ``mc_reps`` joint draws; interior means depth < r
    (default: the pattern depth), so deepest-level nodes contribute only
    their edge factor.

    Returns the estimate with its Monte Carlo standard error (zero when
    the expectation is empty).
    """
    ages = [float(x) for x in pattern.ages]
    if len(set(ages)) != len(ages):
        raise ParameterError("pattern ages must be distinct")
    if any(not 0.0 < x < 1.0 for x in ages):
        raise ParameterError("pattern ages must lie strictly inside (0, 1)")
    depth = pattern.depth
    if r is None:
        r = depth
    if r < depth:
        raise ParameterError(f"exploration depth {r} is below the pattern depth {depth}")
    if mc_reps < 1:
        raise ParameterError("mc_reps must be >= 1")

    constants = derive_constants(spec)
    chi = constants.chi
    parents = pattern.parents
    node_depths = pattern.node_depths
    size = pattern.size
    older_kids = [0] * size
    younger_kids = [0] * size
    n_old = n_young = 0
    edge_log = 0.0
    for i in range(1, size):
        a, b = ages[i], ages[parents[i]]
        if a < b:
            older_kids[parents[i]] += 1
            n_old += 1
        else:
            younger_kids[parents[i]] += 1
            n_young += 1
        edge_log += -chi * math.log(max(a, b)) - (1.0 - chi) * math.log(min(a, b))
    prefactor = chi**n_old * (1.0 - chi) ** n_young * math.exp(edge_log)

    interior = [i for i in range(size) if node_depths[i] < r]
    if not interior:
        return DensityEstimate(value=prefactor, stderr=0.0, reps=0)

    if rng is None:
        rng = stream(0 if seed is None else int(seed), "pattern-density")
    law = spec.out_degree
    law_old = law.size_biased(spec.delta)
    law_young = law.size_biased(0.0)
    delta = spec.delta
    prod = np.ones(mc_reps, dtype=np.float64)
    for i in interior:
        if i == 0:
            m = law.sample(mc_reps, rng)
            shape = m + delta
        elif ages[i] < ages[parents[i]]:
            m = law_old.sample(mc_reps, rng)
            shape = m + delta + 1.0
        else:
            m = law_young.sample(mc_reps, rng)
            shape = m + delta  # strength shape of a younger node with draw m
            m = m - 1  # its own older-child count
        gam = rng.gamma(shape, 1.0)
        lam = lambda_fn(ages[i], chi)
        factor = (m == older_kids[i]).astype(np.float64)
        factor *= math.factorial(older_kids[i])
        if younger_kids[i]:
            factor *= gam ** younger_kids[i]
        factor *= np.exp(-gam * lam)
        prod *= factor
    est = float(prod.mean())
    se = float(prod.std(ddof=1) / math.sqrt(mc_reps)) if mc_reps > 1 else 0.0
    return DensityEstimate(value=prefactor * est, stderr=prefactor * se, reps=mc_reps)


def no_further_edge_factor(v_age, chi_hat, spec: ModelSpec):
    """exp(-chi_hat * lambda(age)): the chance a vertex of realized
    strength chi_hat at relative age v_age receives no later edge.

    Equals 1 at age 1 (no exposure left) and decreases in both chi_hat
    and lambda(age).  Accepts scalars or arrays.
    """
    chi_hat = np.asarray(chi_hat, dtype=np.float64)
    if np.any(chi_hat < 0.0):
        raise ParameterError("strength chi_hat must be >= 0")
    chi = derive_constants(spec).chi
    out = np.exp(-chi_hat * lambda_fn(v_age, chi))
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# Arrival-law total variation (frozen vs one-at-a-time updates)


def _coupling_denominator(n: int, spec: ModelSpec) -> float:
    """Mean-field total weight just before vertex n arrives: the initial
    degrees plus two per attachment edge plus the fitness mass."""
    mean_m = spec.out_degree.mean()
    return spec.a_sum + 2.0 * (n - 3) * mean_m + (n - 1) * spec.delta


def coupling_tv_bound(d: int, m_n: int, n: int, spec: ModelSpec) -> float:
    """Exact total variation between the two laws of "how many of vertex
    n's m_n edges hit a fixed earlier vertex of degree d".

    Under frozen degrees (variant E) the count is Binomial(m_n, p') with
    p' = (d + delta) / Z; under one-at-a-time updates (variant D) it is
    the exchangeable product law whose per-slot probabilities grow with
    the hits so far.  Z is the mean-field total weight (exact for
    degenerate out-degree laws); both laws use the same Z, so the value
    isolates the update-rule difference.
    """
    d = int(d)
    m_n = int(m_n)
    n = int(n)
    if d < 1 or m_n < 1:
        raise ParameterError("need degree d >= 1 and out-count m_n >= 1")
    if n < 3:
        raise ParameterError("need n >= 3")
    delta = spec.delta
    z = _coupling_denominator(n, spec)
    if z <= 0.0 or d + delta <= 0.0:
        raise ParameterError("degenerate weights: check n, d, delta")
    p = (d + delta) / z
    if p >= 1.0:
        raise ParameterError("attachment probability at or above 1; n too small")
    tv = 0.0
    for k in range(m_n + 1):
        q_k = math.comb(m_n, k) * p**k * (1.0 - p) ** (m_n - k)
        t_k = math.comb(m_n, k)
        for el in range(k):
            t_k *= (d + el + delta) / (z + el)
        for el in range(k, m_n):
            t_k *= 1.0 - (d + k + delta) / (z + el)
        tv += abs(q_k - t_k)
    return 0.5 * tv


def coupling_tv_envelope(d: int, m_n: int, n: int, spec: ModelSpec, c: float = 1.0) -> float:
    """Diagnostic upper envelope 1 ^ c m_n^2 (d + |delta| + 1)^2 / n^2.

    Only an order-of-magnitude guide (the constant c is not pinned); never
    used as an acceptance target.
    """
    if n < 1:
        raise ParameterError("need n >= 1")
    return min(1.0, c * m_n**2 * (d + abs(spec.delta) + 1.0) ** 2 / n**2)


# ---------------------------------------------------------------------------
# Maximal per-edge coupling of whole graphs


class _CoupledSide:
    """One graph of a coupled pair: degrees frozen at phase starts, an
    endpoint list for degree-proportional sampling, and the edge list."""

    __slots__ = ("deg", "stubs", "srcs", "tgts", "n")

    def __init__(self, spec: ModelSpec, n: int):
        self.n = n
        self.deg = [0] * (n + 1)
        a1, a2 = spec.initial_degrees
        self.deg[1] = a1
        self.deg[2] = a2
        self.stubs = []
        for u, w in spec.initial_edges:
            self.stubs.append(u)
            self.stubs.append(w)
        self.srcs = []
        self.tgts = []

    def base_draw(self, v: int, delta: float, uni) -> int:
        """One target ~ (deg[u] + delta) over u < v, stubs plus a uniform
        fitness atom (requires delta >= 0)."""
        ns = len(self.stubs)
        total = ns + (v - 1) * delta
        if delta > 0.0 and uni.random() * total >= ns:
            return 1 + int(uni.random() * (v - 1))
        return self.stubs[int(uni.random() * ns)]

    def close_phase(self, v: int, m_placed: int, targets) -> None:
        self.deg[v] += m_placed
        for u in targets:
            self.deg[u] += 1
            self.stubs.append(u)
        self.stubs.extend([v] * m_placed)


def _weighted_pick(items, weights, total, uni):
    x = uni.random() * total
    acc = 0.0
    for it, w in zip(items, weights):
        acc += w
        if x < acc:
            return it
    return items[-1]


def _couple_phase(v, m_v, side_d, side_x, other, delta, uni, diff, slots_out):
    """Place vertex v's edges in both graphs with a per-slot maximal
    coupling of the two conditional target laws."""
    z0_d = len(side_d.stubs) + (v - 1) * delta
    z0_x = len(side_x.stubs) + (v - 1) * delta
    hits_d: list[int] = []
    count_d: dict[int, int] = {}
    if other == "F" and m_v >= v - 1:
        # The no-repeat variant just connects to every predecessor; run
        # the one-at-a-time side on its own.
        hits_x = list(range(1, v))
        for j in range(m_v):
            zd = z0_d + j
            u = (
                hits_d[int(uni.random() * j)]
                if j and uni.random() * zd < j
                else side_d.base_draw(v, delta, uni)
            )
            hits_d.append(u)
            count_d[u] = count_d.get(u, 0) + 1
        _record(v, hits_d, hits_x, side_d, side_x, slots_out)
        return hits_d, hits_x
    hits_x = []
    x_set: set[int] = set()
    x_hit_weight = 0.0
    for j in range(m_v):
        zd = z0_d + j
        if other == "E":
            zx = z0_x
        else:
            zx = z0_x - x_hit_weight
        inv_d, inv_x = 1.0 / zd, 1.0 / zx
        special_u = set(count_d) | x_set | diff
        sum_special_d = 0.0
        overlap = 0.0
        atoms = []
        for u in special_u:
            pd = (side_d.deg[u] + delta + count_d.get(u, 0)) * inv_d
            if other == "F" and u in x_set:
                px = 0.0
            else:
                px = (side_x.deg[u] + delta) * inv_x
            sum_special_d += pd
            overlap += min(pd, px)
            atoms.append((u, pd, px))
        common_d = max(0.0, 1.0 - sum_special_d)  # mass of p_D off the special set
        common_numer = common_d * zd  # shared numerator total off the set
        overlap += common_numer * min(inv_d, inv_x)
        if uni.random() < overlap:
            # draw from the overlap via rejection with proposal p_D
            for _ in range(100_000):
                u = (
                    hits_d[int(uni.random() * j)]
                    if j and uni.random() * zd < j
                    else side_d.base_draw(v, delta, uni)
                )
                if u not in special_u:
                    if inv_x >= inv_d or uni.random() < inv_x / inv_d:
                        break
                    continue
                pd = (side_d.deg[u] + delta + count_d.get(u, 0)) * inv_d
                px = 0.0 if (other == "F" and u in x_set) else (side_x.deg[u] + delta) * inv_x
                if px >= pd or uni.random() * pd < px:
                    break
            else:
                raise ResourceError("coupled overlap rejection loop stalled")
            ud = ux = u
        else:
            # independent residual draws
            res_d = [(u, pd - min(pd, px)) for u, pd, px in atoms]
            mass_d = sum(w for _, w in res_d) + common_numer * max(0.0, inv_d - inv_x)
            if uni.random() * mass_d < sum(w for _, w in res_d):
                ud = _weighted_pick(
                    [u for u, _ in res_d], [w for _, w in res_d], sum(w for _, w in res_d), uni
                )
            else:
                for _ in range(100_000):
                    ud = side_d.base_draw(v, delta, uni)
                    if ud not in special_u:
                        break
                else:
                    raise ResourceError("coupled residual rejection loop stalled")
            res_x = [(u, px - min(pd, px)) for u, pd, px in atoms]
            mass_x = sum(w for _, w in res_x) + common_numer * max(0.0, inv_x - inv_d)
            if uni.random() * mass_x < sum(w for _, w in res_x):
                ux = _weighted_pick(
                    [u for u, _ in res_x], [w for _, w in res_x], sum(w for _, w in res_x), uni
                )
            else:
                for _ in range(100_000):
                    ux = side_x.base_draw(v, delta, uni)
                    if ux not in special_u:
                        break
                else:
                    raise ResourceError("coupled residual rejection loop stalled")
        hits_d.append(ud)
        count_d[ud] = count_d.get(ud, 0) + 1
        hits_x.append(ux)
        if other == "F" and ux not in x_set:
            x_set.add(ux)
            x_hit_weight += side_x.deg[ux] + delta
    _record(v, hits_d, hits_x, side_d, side_x, slots_out)
    return hits_d, hits_x


def _record(v, hits_d, hits_x, side_d, side_x, slots_out):
    if Counter(hits_d) != Counter(hits_x):
        slots_out.append((v, tuple(hits_d), tuple(hits_x)))
    side_d.srcs.extend([v] * len(hits_d))
    side_d.tgts.extend(hits_d)
    side_x.srcs.extend([v] * len(hits_x))
    side_x.tgts.extend(hits_x)


def _run_coupled(n: int, spec: ModelSpec, rng, other: str):
    """Grow the one-at-a-time variant jointly with a frozen variant.

    Returns (side_d, side_x, divergent slots); each divergent slot is
    (vertex, its targets in D, its targets in the other model).
    """
    from .generators import _UBuf
    from .params import sample_out_degrees

    if other not in ("E", "F"):
        raise ParameterError("the coupled partner must be variant E or F")
    if spec.delta < 0.0:
        raise ParameterError("the coupled sampler requires delta >= 0")
    m = sample_out_degrees(spec.out_degree, n, rng)
    uni = _UBuf(rng)
    side_d = _CoupledSide(spec, n)
    side_x = _CoupledSide(spec, n)
    diff: set[int] = set()
    slots: list[tuple] = []
    delta = spec.delta
    for v in range(3, n + 1):
        hits_d, hits_x = _couple_phase(
            v, int(m[v]), side_d, side_x, other, delta, uni, diff, slots
        )
        side_d.close_phase(v, len(hits_d), hits_d)
        side_x.close_phase(v, len(hits_x), hits_x)
        for u in set(hits_d) | set(hits_x) | {v}:
            if side_d.deg[u] != side_x.deg[u]:
                diff.add(u)
            else:
                diff.discard(u)
    return side_d, side_x, slots


def _side_view(side: _CoupledSide, spec: ModelSpec) -> _UndirectedView:
    us = [e[0] for e in spec.initial_edges] + side.srcs
    vs = [e[1] for e in spec.initial_edges] + side.tgts
    return _UndirectedView.from_graph(
        (np.asarray(us, dtype=np.int64), np.asarray(vs, dtype=np.int64), side.n)
    )


def _ball_signature(view: _UndirectedView, w: int, r: int):
    dist = view.ball(w, r)
    pairs = sorted(
        (min(int(view.us[e]), int(view.vs[e])), max(int(view.us[e]), int(view.vs[e])))
        for e in view.induced_edge_ids(dist)
    )
    return dist, pairs


def _mismatch_fraction(n, r, spec, side_d, side_x, slots) -> float:
    if not slots:
        return 0.0
    seeds = set()
    for v, hd, hx in slots:
        seeds.add(v)
        seeds.update(hd)
        seeds.update(hx)
    view_d = _side_view(side_d, spec)
    view_x = _side_view(side_x, spec)
    union = _UndirectedView.from_graph(
        (
            np.concatenate([view_d.us, view_x.us]),
            np.concatenate([view_d.vs, view_x.vs]),
            n,
        )
    )
    candidates = set()
    for s in seeds:
        candidates.update(union.ball(s, r).keys())
    bad = 0
    for w in candidates:
        if _ball_signature(view_d, w, r) != _ball_signature(view_x, w, r):
            bad += 1
    return bad / n


def coupled_mismatch_fractions(
    n: int, r: int, spec: ModelSpec, seeds, *, other: str = "E"
) -> list:
    """Per-seed fractions of vertices whose labelled r-balls differ
    between the one-at-a-time variant and a frozen variant grown under
    the per-edge maximal coupling."""
    if n < 3:
        raise ParameterError("need n >= 3")
    if r < 0:
        raise ParameterError("radius must be >= 0")
    out = []
    for s in seeds:
        rng = stream(int(s), f"couple-D-{other}")
        side_d, side_x, slots = _run_coupled(n, spec, rng, other)
        out.append(_mismatch_fraction(n, r, spec, side_d, side_x, slots))
    return out


def couple_D_E(n: int, r: int, spec: ModelSpec, seeds=(0,)) -> float:
    """Mean labelled r-ball mismatch fraction, one-at-a-time vs frozen
    i.i.d. targets, under the per-edge maximal coupling."""
    return float(np.mean(coupled_mismatch_fractions(n, r, spec, seeds, other="E")))


def couple_D_F(n: int, r: int, spec: ModelSpec, seeds=(0,)) -> float:
    """Mean labelled r-ball mismatch fraction, one-at-a-time vs frozen
    no-repeat targets, under the per-edge maximal coupling."""
    return float(np.mean(coupled_mismatch_fractions(n, r, spec, seeds, other="F")))


def write_coupling_report(
    path, spec: ModelSpec, pair: str, entries, *, extra_meta: dict | None = None
):
    """Write coupling runs as CSV rows (n, r, mismatch_fraction, stderr
    over seeds) for one coupled pair (e.g. "D-E").  entries: dicts with
    n, r, fractions.  Returns the list of row dicts."""
    rows = []
    for entry in entries:
        fr = np.asarray(entry["fractions"], dtype=np.float64)
        rows.append(
            {
                "n": int(entry["n"]),
                "r": int(entry["r"]),
                "mismatch_fraction": float(fr.mean()),
                "stderr": float(fr.std(ddof=1) / math.sqrt(len(fr))) if len(fr) > 1 else 0.0,
            }
        )
    meta = {"spec": spec.to_json(), "pair": str(pair), "entries": len(rows)}
    if extra_meta:
        meta.update(extra_meta)
    path = Path(path)
    with path.open("w") as fh:
        fh.write("# " + json.dumps(meta, sort_keys=True) + "\n")
        fh.write("n,r,mismatch_fraction,stderr\n")
        for row in rows:
            fh.write(
                "%d,%d,%.17g,%.17g\n"
                % (row["n"], row["r"], row["mismatch_fraction"], row["stderr"])
            )
    return rows


# ---------------------------------------------------------------------------
# Empirical estimators on generated graphs


def empirical_root_degree_law(graph, k_max: int) -> np.ndarray:
    """Degree histogram weighted by 1/out-degree, normalized to total
    weight one over all vertices; entry [k] is the weight at degree k
    (entry 0 unused).  Degrees above k_max fall outside the window and
    simply leave mass missing, matching windowed TV comparisons."""
    if k_max < 1:
        raise ParameterError("k_max must be >= 1")
    deg = np.asarray(graph.degrees[1:], dtype=np.int64)
    m = np.asarray(graph.out_degrees[1:], dtype=np.float64)
    w = 1.0 / m
    out = np.zeros(k_max + 1, dtype=np.float64)
    inside = deg <= k_max
    np.add.at(out, deg[inside], w[inside])
    return out / w.sum()


def empirical_older_neighbor_law(graph, k_max: int) -> np.ndarray:
    """Degree histogram of a uniformly chosen older neighbor of a uniform
    vertex: each edge contributes 1/(out-degree of its source) at the
    degree of its target.  The seed edge counts for the second vertex;
    the first vertex has no older neighbor, so weights are normalized
    over the n-1 vertices that do."""
    if k_max < 1:
        raise ParameterError("k_max must be >= 1")
    deg = np.asarray(graph.degrees, dtype=np.int64)
    m = np.asarray(graph.out_degrees, dtype=np.float64)
    srcs, _, tgts = graph.attachment_arrays
    out = np.zeros(k_max + 1, dtype=np.float64)
    w = 1.0 / m[srcs]
    inside = deg[tgts] <= k_max
    np.add.at(out, deg[tgts][inside], w[inside])
    for u, v in graph.spec.initial_edges:
        if u != v:
            lo = min(u, v)
            if deg[lo] <= k_max:
                out[deg[lo]] += 1.0
    return out / (graph.n - 1)


def empirical_younger_neighbor_law(graph, k_max: int) -> np.ndarray:
    """Degree histogram of a uniformly chosen younger neighbor (in-edge
    source) of a uniform vertex conditioned on having one: each in-edge
    of v contributes 1/(in-degree of v) at the degree of its source,
    normalized over the vertices with at least one in-edge."""
    if k_max < 1:
        raise ParameterError("k_max must be >= 1")
    deg = np.asarray(graph.degrees, dtype=np.int64)
    srcs, _, tgts = graph.attachment_arrays
    srcs = np.asarray(srcs, dtype=np.int64)
    tgts = np.asarray(tgts, dtype=np.int64)
    proper = srcs != tgts  # a self-loop is not a younger neighbor
    srcs, tgts = srcs[proper], tgts[proper]
    init_us = []
    init_vs = []
    for u, v in graph.spec.initial_edges:
        if u != v:
            init_us.append(max(u, v))
            init_vs.append(min(u, v))
    srcs = np.concatenate([np.asarray(init_us, dtype=np.int64), srcs])
    tgts = np.concatenate([np.asarray(init_vs, dtype=np.int64), tgts])
    in_deg = np.bincount(tgts, minlength=graph.n + 1)
    out = np.zeros(k_max + 1, dtype=np.float64)
    w = 1.0 / in_deg[tgts]
    inside = deg[srcs] <= k_max
    np.add.at(out, deg[srcs][inside], w[inside])
    return out / (in_deg[1:] > 0).sum()


def empirical_survival(values):
    """(ks, survival) with survival[k-1] = fraction of entries >= k."""
    vals = np.asarray(values, dtype=np.int64)
    if vals.size == 0 or vals.min() < 0:
        raise ParameterError("survival needs a non-empty, non-negative sample")
    counts = np.bincount(vals)
    cum = np.cumsum(counts)
    ks = np.arange(1, len(counts))
    surv = (vals.size - cum[:-1]) / vals.size
    return ks, surv


@dataclass(frozen=True)
class TailFit:
    """OLS fit of log(value) against log(k): slope, its standard error,
    the intercept, and the window that produced them."""

    slope: float
    stderr: float
    intercept: float
    n_points: int
    k_min: int
    k_max: int


def fit_log_log_slope(ks, values, *, k_min: int, k_max: int) -> TailFit:
    """Least-squares slope of log(values) vs log(ks) over [k_min, k_max].

    Zero or negative values inside the window are dropped; fewer than
    three surviving points is an error.  No slowly-varying correction is
    applied: the slope is the raw power-law exponent estimate.
    """
    ks = np.asarray(ks, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    if ks.shape != values.shape:
        raise ParameterError("ks and values must align")
    mask = (ks >= k_min) & (ks <= k_max) & (values > 0.0)
    if mask.sum() < 3:
        raise ParameterError("need at least 3 positive points in the fit window")
    res = stats.linregress(np.log(ks[mask]), np.log(values[mask]))
    return TailFit(
        slope=float(res.slope),
        stderr=float(res.stderr),
        intercept=float(res.intercept),
        n_points=int(mask.sum()),
        k_min=int(k_min),
        k_max=int(k_max),
    )


def total_variation(p, q) -> float:
    """Half the L1 distance between two aligned weight vectors."""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape:
        raise ParameterError("total variation needs aligned vectors")
    return 0.5 * float(np.abs(p - q).sum())
