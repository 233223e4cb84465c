"""Closed-form probabilities, enumeration oracles, equivalence reports."""

import json
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import special

from polyagraph import ModelSpec, OutDegreeLaw, ParameterError
from polyagraph.generators import generate_batch
from polyagraph.urn import BetaSchedule
from polyagraph.exact import (
    GraphEvent,
    beta_moment,
    enumerate_feasible,
    equivalence_rows,
    falling_factorial,
    pre_image_family,
    prob_model_A_closed,
    prob_model_B_closed,
    prob_model_D_closed,
    prob_pu_closed,
    write_equivalence_report,
    _exact_schedule_params,
)


def spec_for(variant, delta=0.0, law=None, **kw):
    return ModelSpec(variant, delta, law or OutDegreeLaw.degenerate(1), **kw)


M1 = OutDegreeLaw.degenerate(1)
M2 = OutDegreeLaw.degenerate(2)
U12 = OutDegreeLaw.uniform_range(1, 2)


class TestFallingFactorial:
    def test_hand_values(self):
        assert falling_factorial(5, 3) == 60
        assert falling_factorial(2.5, 2) == pytest.approx(3.75)
        assert falling_factorial(7.3, 0) == 1.0
        assert falling_factorial(7.3, 1) == pytest.approx(7.3)

    def test_product_vs_lgamma_to_large_arguments(self):
        # the two evaluation routes agree to 1e-10 relative up to x = 1e3
        for x in (10.0, 99.5, 250.0, 1000.0, 997.25):
            for k in (0, 1, 2, 5, 8):
                a = falling_factorial(x, k, method="product")
                b = falling_factorial(x, k, method="lgamma")
                assert b == pytest.approx(a, rel=1e-10)
        assert falling_factorial(1000.0, 80, method="lgamma") == pytest.approx(
            falling_factorial(1000.0, 80, method="product"), rel=1e-10
        )

    def test_rejects_bad_arguments(self):
        with pytest.raises(ParameterError):
            falling_factorial(5, -1)
        with pytest.raises(ParameterError):
            falling_factorial(3.0, 5, method="lgamma")
        with pytest.raises(ParameterError):
            falling_factorial(3.0, 2, method="other")


class TestBetaMoment:
    def test_uniform_mean(self):
        assert beta_moment(1.0, 1.0, 1, 0) == pytest.approx(0.5)

    def test_hand_value(self):
        # E[psi^2 (1-psi)] for Beta(2,3): (3*2)(3) / (7*6*5) = 3/35
        assert beta_moment(2.0, 3.0, 2, 1) == pytest.approx(3.0 / 35.0)

    def test_matches_beta_function_ratio(self):
        # independent route: E[psi^p (1-psi)^q] = B(a+p, b+q) / B(a, b)
        rng = np.random.default_rng(0)
        for _ in range(200):
            a = float(rng.uniform(0.1, 40.0))
            b = float(rng.uniform(0.1, 40.0))
            p = int(rng.integers(0, 50))
            q = int(rng.integers(0, 50))
            want = np.exp(special.betaln(a + p, b + q) - special.betaln(a, b))
            assert beta_moment(a, b, p, q) == pytest.approx(want, rel=1e-9)

    def test_auto_switches_to_lgamma(self):
        v1 = beta_moment(1.5, 30.0, 70, 40)
        v2 = beta_moment(1.5, 30.0, 70, 40, method="product")
        assert v1 == pytest.approx(v2, rel=1e-9)

    def test_point_mass_at_one(self):
        assert beta_moment(2.0, 0.0, 3, 0) == 1.0
        assert beta_moment(2.0, 0.0, 3, 1) == 0.0

    def test_rejects_bad_arguments(self):
        for bad in ((0.0, 1.0, 1, 1), (1.0, -0.5, 1, 1), (1.0, 1.0, -1, 0), (1.0, 1.0, 0, -2)):
            with pytest.raises(ParameterError):
                beta_moment(*bad)
        with pytest.raises(ParameterError):
            beta_moment(1.0, 1.0, 1, 1, method="other")


class TestGraphEvent:
    def test_canonical_edge_order(self):
        e1 = GraphEvent(edges=((4, 1, 2), (3, 1, 1)), n=4)
        e2 = GraphEvent(edges=((3, 1, 1), (4, 1, 2)), n=4)
        assert e1 == e2
        assert hash(e1) == hash(e2)
        assert e1.label() == "3.1>1;4.1>2"

    def test_degree_bookkeeping(self):
        ev = GraphEvent(edges=((3, 1, 1), (3, 2, 3), (4, 1, 3)), n=4)
        assert ev.out_degree_counts == (0, 0, 0, 2, 1)
        # self-loop at 3 counts twice: d3 = 2 own + 2 loop ends... the loop
        # contributes both ends, the out-edge to 1 one end, the in-edge one
        assert ev.final_degrees == (0, 2, 1, 4, 1)

    def test_multigraph_key_forgets_edge_indices(self):
        a = GraphEvent(edges=((3, 1, 1), (3, 2, 2)), n=3)
        b = GraphEvent(edges=((3, 1, 2), (3, 2, 1)), n=3)
        assert a != b
        assert a.multigraph_key() == b.multigraph_key()

    def test_collapse_merges_groups(self):
        ev = GraphEvent(
            edges=((3, 1, 1), (4, 1, 3)), n=4, group_sizes=(1, 1, 2)
        )
        coarse = ev.collapse()
        assert coarse.n == 3
        assert coarse.edges == ((3, 1, 1), (3, 2, 3))

    def test_collapse_requires_groups(self):
        with pytest.raises(ParameterError):
            GraphEvent(edges=((3, 1, 1),), n=3).collapse()
        with pytest.raises(ParameterError):
            GraphEvent(edges=((3, 1, 1),), n=3, group_sizes=(2, 1)).collapse()

    def test_validation(self):
        with pytest.raises(ParameterError):
            GraphEvent(edges=((2, 1, 1),), n=3)
        with pytest.raises(ParameterError):
            GraphEvent(edges=((3, 1, 5),), n=3)
        with pytest.raises(ParameterError):
            GraphEvent(edges=((3, 1, 1),), n=3, group_sizes=(1, 1))


class TestClosedForms:
    def test_one_vertex_thirds(self):
        # n=3, single unit edge, delta=0: each target has weight 1 of 3
        spec = spec_for("A")
        for t in (1, 2, 3):
            ev = GraphEvent(edges=((3, 1, t),), n=3)
            assert prob_model_A_closed(ev, spec) == pytest.approx(1.0 / 3.0)
        assert prob_model_A_closed(
            GraphEvent(edges=((3, 1, 3),), n=3), spec, exact=True
        ) == Fraction(1, 3)

    def test_strict_variant_halves(self):
        spec = spec_for("B")
        for t in (1, 2):
            ev = GraphEvent(edges=((3, 1, t),), n=3)
            assert prob_model_B_closed(ev, spec) == pytest.approx(0.5)
        assert prob_model_B_closed(GraphEvent(edges=((3, 1, 3),), n=3), spec) == 0.0

    def test_frozen_variant_halves(self):
        spec = spec_for("D")
        for t in (1, 2):
            ev = GraphEvent(edges=((3, 1, t),), n=3)
            assert prob_model_D_closed(ev, spec) == pytest.approx(0.5)
        assert prob_model_D_closed(GraphEvent(edges=((3, 1, 3),), n=3), spec) == 0.0

    def test_order_infeasible_is_zero(self):
        ev = GraphEvent(edges=((3, 1, 4), (4, 1, 1)), n=4)
        assert prob_model_A_closed(ev, spec_for("A")) == 0.0
        assert prob_model_B_closed(ev, spec_for("B")) == 0.0

    def test_matches_step_product_along_every_history(self):
        # the closed product equals the sequential simulator's step-law
        # product, graph by graph (float path of the enumerator)
        for variant, closed in (("A", prob_model_A_closed), ("B", prob_model_B_closed)):
            spec = spec_for(variant, 0.0, M1)
            for g, p in enumerate_feasible(spec, 5):
                assert closed(g, spec) == pytest.approx(p, abs=1e-14)
        spec = spec_for("D", 0.75, U12)
        for g, p in enumerate_feasible(spec, 4):
            w = 0.25  # two independent uniform{1,2} draws
            assert w * prob_model_D_closed(g, spec) == pytest.approx(p, abs=1e-14)

    def test_group_structure_enters_through_fitness_shares(self):
        # grouping splits the fitness across a vertex's slots; with delta=0
        # the shares vanish and the grouped and flat readings coincide
        grouped = GraphEvent(edges=((3, 1, 1), (4, 1, 3)), n=4, group_sizes=(1, 1, 2))
        flat = GraphEvent(edges=((3, 1, 1), (4, 1, 3)), n=4)
        s0 = spec_for("A", 0.0, M2)
        assert prob_model_A_closed(grouped, s0, exact=True) == prob_model_A_closed(
            flat, s0, exact=True
        )
        s1 = spec_for("A", 0.5, M2)
        assert prob_model_A_closed(grouped, s1) != pytest.approx(
            prob_model_A_closed(flat, s1)
        )

    def test_multi_edge_index_validation(self):
        spec = spec_for("D", 0.0, M2)
        with pytest.raises(ParameterError):
            prob_model_D_closed(GraphEvent(edges=((3, 2, 1), (3, 3, 2)), n=3), spec)


class TestProbPuClosed:
    def test_empty_event_is_certain(self):
        spec = spec_for("A")
        sched = BetaSchedule("per-edge", spec, [0, 1, 1])
        assert prob_pu_closed(GraphEvent(edges=(), n=2), sched, "SL") == 1.0

    def test_single_factor_hand_values(self):
        # n=3 single slot, delta=0: psi_2 ~ Beta(1,1), psi_3 ~ Beta(1,2)
        spec = spec_for("A")
        sched = BetaSchedule("per-edge", spec, [0, 1, 1, 1])
        want = {1: Fraction(1, 3), 2: Fraction(1, 3), 3: Fraction(1, 3)}
        for t, w in want.items():
            ev = GraphEvent(edges=((3, 1, t),), n=3)
            assert prob_pu_closed(ev, sched, "SL", exact=True) == w
        # strict scaling: target share E[1-psi_2] resp. E[psi_2]
        spec = spec_for("B", 0.5)
        sched = BetaSchedule("per-edge", spec, [0, 1, 1, 1], variant="NSL")
        ev = GraphEvent(edges=((3, 1, 1),), n=3)
        assert prob_pu_closed(ev, sched, "NSL", exact=True) == Fraction(1, 2)

    def test_strict_scaling_beta_shift_regression(self):
        # two unit slots both aiming at vertex 1; collapsing gives the
        # double edge 3->1, whose sequential probability is (1/2)(2/4).
        # Under strict scaling a slot only becomes reachable after its own
        # edge is placed, so its beta must count that edge: the unshifted
        # schedule prices this event at 2/9 instead.
        spec = spec_for("B", 0.0, M2)
        ev = GraphEvent(edges=((3, 1, 1), (4, 1, 1)), n=4, group_sizes=(1, 1, 2))
        shifted = BetaSchedule("per-edge", spec, [0, 1, 1, 2], variant="NSL")
        plain = BetaSchedule("per-edge", spec, [0, 1, 1, 2])
        assert prob_pu_closed(ev, shifted, "NSL", exact=True) == Fraction(1, 4)
        assert prob_pu_closed(ev, plain, "NSL", exact=True) == Fraction(2, 9)
        assert prob_model_B_closed(ev, spec, exact=True) == Fraction(1, 4)

    def test_order_infeasible_is_zero(self):
        spec = spec_for("A")
        sched = BetaSchedule("per-edge", spec, [0, 1, 1, 1, 1])
        ev = GraphEvent(edges=((3, 1, 4), (4, 1, 1)), n=4)
        assert prob_pu_closed(ev, sched, "SL") == 0.0
        ev = GraphEvent(edges=((3, 1, 3), (4, 1, 1)), n=4)
        assert prob_pu_closed(ev, sched, "NSL") == 0.0

    def test_size_and_variant_validation(self):
        spec = spec_for("A")
        sched = BetaSchedule("per-edge", spec, [0, 1, 1, 1])
        with pytest.raises(ParameterError):
            prob_pu_closed(GraphEvent(edges=(), n=2), sched, "XX")
        with pytest.raises(ParameterError):
            prob_pu_closed(GraphEvent(edges=(), n=2), sched, "SL")
        dspec = spec_for("D", 0.0, M2)
        dsched = BetaSchedule("per-vertex", dspec, [0, 1, 1, 2])
        with pytest.raises(ParameterError):
            prob_pu_closed(GraphEvent(edges=((3, 1, 1),), n=3), dsched, "NSL")

    def test_per_vertex_hand_value(self):
        # frozen model at n=3: both targets equally likely
        spec = spec_for("D")
        sched = BetaSchedule("per-vertex", spec, [0, 1, 1, 1])
        for t in (1, 2):
            ev = GraphEvent(edges=((3, 1, t),), n=3)
            assert prob_pu_closed(ev, sched, "NSL", exact=True) == Fraction(1, 2)


class TestExactScheduleParams:
    @pytest.mark.parametrize("delta", [0.0, 0.5, 1.0, -0.5])
    def test_match_float_arrays(self, delta):
        m = [0, 1, 1, 2, 1, 3, 2]
        law = OutDegreeLaw.uniform_range(1, 3)
        for kind, variant in (
            ("per-vertex", "SL"),
            ("per-edge", "SL"),
            ("per-edge", "NSL"),
        ):
            spec = spec_for("D" if kind == "per-vertex" else "A", delta, law)
            sched = BetaSchedule(kind, spec, m, variant=variant)
            alpha, beta = _exact_schedule_params(sched)
            for s in range(2, sched.size + 1):
                assert abs(float(alpha[s]) - sched.alpha[s]) <= 1e-12
                assert abs(float(beta[s]) - sched.beta[s]) <= 1e-12

    def test_strict_shift_is_one(self):
        spec = spec_for("B", 0.25, M2)
        m = [0, 1, 1, 2, 2]
        sl = BetaSchedule("per-edge", spec, m)
        nsl = BetaSchedule("per-edge", spec, m, variant="NSL")
        assert np.allclose(nsl.beta[3:], sl.beta[3:] + 1.0)
        assert np.allclose(nsl.alpha[2:], sl.alpha[2:])
        assert nsl.beta[2] == sl.beta[2]  # seed slot places no edge


class TestEnumerate:
    def test_counts_are_products_of_branch_factors(self):
        assert len(enumerate_feasible(spec_for("A"), 3)) == 3
        assert len(enumerate_feasible(spec_for("A"), 4)) == 3 * 4
        assert len(enumerate_feasible(spec_for("B"), 4)) == 2 * 3
        assert len(enumerate_feasible(spec_for("A", 0.0, M2), 3)) == 9
        assert len(enumerate_feasible(spec_for("D", 0.0, M2), 4)) == 4 * 9

    def test_totals_one(self):
        for variant in ("A", "B", "D", "E", "F"):
            for law in (M1, M2, U12):
                spec = spec_for(variant, 0.5, law)
                total = sum(p for _, p in enumerate_feasible(spec, 4))
                assert total == pytest.approx(1.0, abs=1e-12), (variant, law.kind)

    def test_n2_is_single_certain_graph(self):
        out = enumerate_feasible(spec_for("A"), 2)
        assert len(out) == 1
        g, p = out[0]
        assert p == 1.0 and list(g.edges) == []

    def test_iid_draw_phase_is_product_of_frozen_shares(self):
        # vertex 3 at delta=0, two draws against the seed degrees (1, 1):
        # every target pair has probability 1/4, unlike the within-phase
        # updating model where repeats are favored (1/3 vs 1/6)
        pe = {tuple(g.edges): p for g, p in enumerate_feasible(spec_for("E", 0.0, M2), 3)}
        assert all(p == pytest.approx(0.25, abs=1e-14) for p in pe.values())
        pd = {tuple(g.edges): p for g, p in enumerate_feasible(spec_for("D", 0.0, M2), 3)}
        assert set(pd) == set(pe)
        assert pd[((3, 1, 1), (3, 2, 1))] == pytest.approx(1.0 / 3.0, abs=1e-14)
        assert pd[((3, 1, 1), (3, 2, 2))] == pytest.approx(1.0 / 6.0, abs=1e-14)
        # single-draw phases coincide across the two models
        one_d = {tuple(g.edges): p for g, p in enumerate_feasible(spec_for("D", 0.5), 3)}
        one_e = {tuple(g.edges): p for g, p in enumerate_feasible(spec_for("E", 0.5), 3)}
        assert one_d == one_e

    def test_without_replacement_capping(self):
        # m_v >= v-1 connects to every predecessor with certainty
        out = enumerate_feasible(spec_for("F", 0.0, M2), 3)
        assert len(out) == 1
        g, p = out[0]
        assert p == 1.0
        assert sorted((v, u) for v, _, u in g.edges) == [(3, 1), (3, 2)]

    def test_without_replacement_distinct_targets(self):
        for g, p in enumerate_feasible(spec_for("F", 0.5, U12), 4):
            for v in (3, 4):
                ts = [u for vv, _, u in g.edges if vv == v]
                assert len(ts) == len(set(ts))

    def test_bounds(self):
        with pytest.raises(ParameterError):
            enumerate_feasible(spec_for("A"), 1)
        with pytest.raises(ParameterError):
            enumerate_feasible(spec_for("A"), 13)
        with pytest.raises(ParameterError):
            enumerate_feasible(spec_for("A", 0.0, OutDegreeLaw.geometric(0.5)), 3)


class TestPreImages:
    def test_unit_out_degrees_are_fixed_points(self):
        ev = GraphEvent(edges=((3, 1, 1), (4, 1, 4)), n=4)
        fam = pre_image_family(ev, "A")
        assert len(fam) == 1
        assert fam[0].edges == ev.edges
        assert fam[0].collapse_target == ev
        assert fam[0].collapse() == ev

    def test_self_loop_expansion_counts(self):
        # double-edge vertex: loop on second slot may hit either own unit
        # under the self-inclusive reading, only the first strictly-before one
        ev = GraphEvent(edges=((3, 1, 1), (3, 2, 3)), n=3)
        assert len(pre_image_family(ev, "A")) == 2
        assert len(pre_image_family(ev, "B")) == 1
        first = GraphEvent(edges=((3, 1, 3), (3, 2, 1)), n=3)
        assert len(pre_image_family(first, "A")) == 1
        assert pre_image_family(first, "B") == ()

    def test_target_multiplicity(self):
        # an edge to a two-unit group picks one of its slots
        ev = GraphEvent(edges=((3, 1, 1), (3, 2, 2), (4, 1, 3)), n=4)
        fam = pre_image_family(ev, "A")
        assert len(fam) == 2
        assert all(h.collapse() == ev for h in fam)

    def test_order_violation_gives_empty_family(self):
        ev = GraphEvent(edges=((3, 1, 4), (4, 1, 1)), n=4)
        assert pre_image_family(ev, "A") == ()

    def test_frozen_model_has_no_pre_images(self):
        with pytest.raises(ParameterError):
            pre_image_family(GraphEvent(edges=((3, 1, 1),), n=3), "D")


LAWS = {"one": M1, "two": M2, "mix": U12}


@pytest.mark.parametrize("delta", [-0.5, 0.0, 1.0])
@pytest.mark.parametrize("law_name", sorted(LAWS))
@pytest.mark.parametrize("variant", ["A", "B", "D"])
class TestSequentialUrnEquivalence:
    """Sequential closed form == urn closed form, exactly, outcome by
    outcome, at n in {3, 4}; each family of probabilities sums to one."""

    def test_exact_equality(self, variant, law_name, delta):
        law = LAWS[law_name]
        spec = spec_for(variant, delta, law)
        closed = {"A": prob_model_A_closed, "B": prob_model_B_closed}
        for n in (3, 4):
            total = Fraction(0)
            cache = {}
            for g, p_float in enumerate_feasible(spec, n):
                event = GraphEvent.from_graph(g)
                m = [int(x) for x in g.out_degrees]
                if variant == "D":
                    seq = prob_model_D_closed(event, spec, exact=True)
                    sched = cache.setdefault(
                        tuple(m), BetaSchedule("per-vertex", spec, m)
                    )
                    urn = prob_pu_closed(event, sched, "NSL", exact=True)
                else:
                    uv = "SL" if variant == "A" else "NSL"
                    fam = pre_image_family(event, variant)
                    seq = sum(
                        (closed[variant](h, spec, exact=True) for h in fam),
                        Fraction(0),
                    )
                    sched = cache.setdefault(
                        tuple(m), BetaSchedule("per-edge", spec, m, variant=uv)
                    )
                    urn = sum(
                        (prob_pu_closed(h, sched, uv, exact=True) for h in fam),
                        Fraction(0),
                    )
                assert seq == urn, event.label()
                w = Fraction(1)
                for v in range(3, n + 1):
                    w *= Fraction(*float(law.prob(m[v])).as_integer_ratio())
                assert abs(float(w * seq) - p_float) < 1e-12
                total += w * seq
            assert total == 1


class TestEquivalenceRows:
    def test_float_path_within_tolerance(self):
        for variant in ("A", "B", "D"):
            spec = spec_for(variant, 0.5, U12)
            rows = equivalence_rows(spec, 4)
            assert max(r.abs_diff for r in rows) <= 1e-10
            assert sum(r.sequential_prob for r in rows) == pytest.approx(1.0, abs=1e-12)
            assert sum(r.urn_prob for r in rows) == pytest.approx(1.0, abs=1e-12)

    def test_grouped_merges_edge_indexings(self):
        spec = spec_for("D", 0.0, M2)
        flat = equivalence_rows(spec, 3)
        grouped = equivalence_rows(spec, 3, grouped=True)
        assert len(flat) == 4 and len(grouped) == 3
        assert sum(r.sequential_prob for r in grouped) == pytest.approx(1.0, abs=1e-14)
        # double edge to 1, double edge to 2, one of each: thirds
        for r in grouped:
            assert r.sequential_prob == pytest.approx(1.0 / 3.0, abs=1e-14)

    def test_rejects_models_without_urn(self):
        with pytest.raises(ParameterError):
            equivalence_rows(spec_for("E", 0.0, M2), 3)

    def test_rel_diff_guard(self):
        rows = equivalence_rows(spec_for("A"), 3)
        assert all(r.rel_diff <= 1e-10 for r in rows)


class TestReportWriter:
    def test_files_and_verdict(self, tmp_path):
        spec = spec_for("B", 0.7, M2)
        summary = write_equivalence_report(spec, 3, tmp_path)
        csv_path = tmp_path / "equivalence_B_n3.csv"
        json_path = tmp_path / "equivalence_B_n3.json"
        assert csv_path.exists() and json_path.exists()
        assert summary["pass"] is True
        assert summary["graphs"] == 6
        assert summary["max_abs_diff"] <= 1e-10
        lines = csv_path.read_text().splitlines()
        meta = json.loads(lines[0][2:])
        assert meta["model"] == "B" and meta["n"] == 3
        assert lines[1].startswith("graph_id,")
        assert len(lines) == 2 + summary["graphs"]
        on_disk = json.loads(json_path.read_text())
        assert on_disk["pass"] is True

    def test_deterministic_and_custom_stem(self, tmp_path):
        spec = spec_for("A", 0.0, M2)
        write_equivalence_report(spec, 3, tmp_path, stem="run", extra_meta={"tag": 7})
        first = (tmp_path / "run.csv").read_bytes()
        write_equivalence_report(spec, 3, tmp_path, stem="run", extra_meta={"tag": 7})
        assert (tmp_path / "run.csv").read_bytes() == first
        meta = json.loads((tmp_path / "run.csv").read_text().splitlines()[0][2:])
        assert meta["tag"] == 7

    def test_grouped_report(self, tmp_path):
        spec = spec_for("D", 0.0, M2)
        summary = write_equivalence_report(spec, 3, tmp_path, grouped=True, stem="g")
        assert summary["graphs"] == 3
        assert summary["pass"] is True


MC_CASES = {
    "A": ("A", 1.0, M2, 1_000_000),
    "B": ("B", 0.7, M2, 250_000),
    "D": ("D", -0.5, M2, 250_000),
    "E": ("E", 0.5, U12, 250_000),
    "F": ("F", 0.5, U12, 250_000),
}


@pytest.mark.slow
@pytest.mark.parametrize("case", sorted(MC_CASES))
def test_generator_frequencies_match_closed_forms(case):
    # every labelled outcome at n=3 sits inside a 4-sigma binomial band
    # around its enumerated probability
    variant, delta, law, reps = MC_CASES[case]
    spec = spec_for(variant, delta, law)
    want = {tuple(g.edges): p for g, p in enumerate_feasible(spec, 3)}
    counts = {}
    for g in generate_batch(spec, 3, reps, seed=1234):
        k = tuple(g.edges)
        counts[k] = counts.get(k, 0) + 1
    assert set(counts) <= set(want)
    for k, p in want.items():
        f = counts.get(k, 0) / reps
        band = 4.0 * (p * (1.0 - p) / reps) ** 0.5
        assert abs(f - p) <= band + 1e-12, (k, p, f)


@settings(max_examples=25, deadline=None)
@given(delta=st.floats(-0.9, 2.5, allow_nan=False, allow_infinity=False))
def test_equivalence_holds_for_any_fitness(delta):
    for variant in ("A", "B"):
        closed = prob_model_A_closed if variant == "A" else prob_model_B_closed
        uv = "SL" if variant == "A" else "NSL"
        spec = spec_for(variant, delta, M1)
        sched = BetaSchedule("per-edge", spec, [0, 1, 1, 1], variant=uv)
        total = Fraction(0)
        for g, _ in enumerate_feasible(spec, 3):
            seq = closed(g, spec, exact=True)
            urn = prob_pu_closed(g, sched, uv, exact=True)
            assert seq == urn
            total += seq
        assert total == 1
