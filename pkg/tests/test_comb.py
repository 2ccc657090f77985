"""Profiles, the comb graph, truncations, and analytic classification."""

import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from combwalk.comb import (
    Constant,
    IidSample,
    LinLog,
    NLogN,
    Power,
    Table,
    Verdict,
    Vertex,
    breve_f,
    classify_profile,
    enumerate_truncation,
    neighbors,
    parity,
    profile_from_json,
    reciprocal_partial_sum,
    tooth_height,
)
from combwalk.errors import DomainError, ResourceBudgetError

PROFILES = [
    Constant(0),
    Constant(2),
    Constant(5.7),
    Power(0.5),
    Power(2),
    LinLog(0),
    LinLog(3),
    NLogN(),
    Table(((0, 3.0), (2, 1.5), (-4, 2.0))),
    IidSample("geometric", p=0.5, profile_seed=42),
    IidSample("poisson", lam=2.0, profile_seed=7),
    IidSample("empirical", weights=(1.0, 2.0, 1.0), profile_seed=3),
]


class TestToothHeight:
    def test_zero_profile(self):
        assert tooth_height(Constant(0), 7) == 0

    def test_linear_profile(self):
        assert tooth_height(LinLog(0), -5) == 5

    def test_heights_floor_real_values(self):
        assert tooth_height(Constant(5.7), 3) == 5
        assert tooth_height(Power(0.5), 8) == 2  # floor(sqrt(8))

    def test_iid_determinism(self):
        p = IidSample("geometric", p=0.5, profile_seed=42)
        assert tooth_height(p, 3) == tooth_height(p, 3)

    def test_iid_reproducible_across_instances(self):
        xs = np.arange(-10_000, 10_001)
        for make in (
            lambda: IidSample("geometric", p=0.3, profile_seed=9),
            lambda: IidSample("poisson", lam=1.5, profile_seed=9),
            lambda: IidSample("empirical", weights=(2.0, 1.0), profile_seed=9),
        ):
            assert np.array_equal(make().heights(xs), make().heights(xs))

    def test_heights_nonnegative(self):
        xs = np.arange(-300, 301)
        for p in PROFILES:
            assert np.all(p.heights(xs) >= 0)


class TestNeighbors:
    def test_bare_spine(self):
        assert neighbors(Constant(0), Vertex(0, 0)) == {Vertex(-1, 0), Vertex(1, 0)}

    def test_toothed_spine(self):
        assert neighbors(Constant(2), Vertex(0, 0)) == {
            Vertex(-1, 0),
            Vertex(1, 0),
            Vertex(0, 1),
            Vertex(0, -1),
        }

    def test_tip(self):
        assert neighbors(Constant(2), Vertex(3, 2)) == {Vertex(3, 1)}

    def test_invalid_vertex_rejected(self):
        with pytest.raises(DomainError):
            neighbors(Constant(2), Vertex(0, 3))

    def test_degree_formula(self):
        for p in PROFILES:
            for x in range(-5, 6):
                h = tooth_height(p, x)
                assert len(neighbors(p, Vertex(x, 0))) == 2 + 2 * (h >= 1)
                if h >= 1:
                    assert len(neighbors(p, Vertex(x, h))) == 1


@settings(max_examples=200, deadline=None)
@given(
    pi=st.integers(0, len(PROFILES) - 1),
    x=st.integers(-50, 50),
    frac=st.floats(0, 1),
)
def test_edge_symmetry_and_parity_flip(pi, x, frac):
    profile = PROFILES[pi]
    h = tooth_height(profile, x)
    y = round((2 * frac - 1) * h)
    v = Vertex(x, y)
    for w in neighbors(profile, v):
        assert v in neighbors(profile, w)
        assert parity(v) != parity(w)


class TestBreveF:
    def test_unit_floor(self):
        assert breve_f(Constant(0), 10) == 1.0

    def test_constant(self):
        assert breve_f(Constant(5), 3) == 5.0

    def test_linear(self):
        assert breve_f(LinLog(0), 4) == 4.0

    def test_monotone_and_at_least_one(self):
        for p in PROFILES:
            vals = [breve_f(p, n) for n in range(0, 40)]
            assert all(v >= 1.0 for v in vals)
            assert all(b >= a for a, b in zip(vals, vals[1:]))


class TestReciprocalPartialSum:
    def test_constant_five(self):
        assert reciprocal_partial_sum(Constant(5), 10) == pytest.approx(2.0)

    def test_zero_profile(self):
        assert reciprocal_partial_sum(Constant(0), 7) == pytest.approx(7.0)

    def test_strictly_increasing(self):
        p = LinLog(3)
        sums = [reciprocal_partial_sum(p, n) for n in (10, 100, 1000)]
        assert sums[0] < sums[1] < sums[2]

    def test_linlog3_convergence_evidence(self):
        # direct summation at two sizes; the remaining tail keeps shrinking
        s6 = reciprocal_partial_sum(LinLog(3), 10**6)
        s7 = reciprocal_partial_sum(LinLog(3), 10**7)
        gap = s7 - s6
        assert 0 < gap < 1e-3
        # frozen regression values from the same direct summation
        assert s6 == pytest.approx(2.5618765785923565, abs=1e-9)
        assert gap == pytest.approx(0.0006949975720860202, abs=1e-7)

    def test_matches_bruteforce_breve(self):
        p = Table(((0, 3.0), (2, 1.5), (-4, 7.0)))
        expect = sum(1.0 / breve_f(p, n) for n in range(1, 30))
        assert reciprocal_partial_sum(p, 29) == pytest.approx(expect)


class TestClassification:
    def test_nlogn_infinite(self):
        assert classify_profile(NLogN()).verdict is Verdict.INFINITE_COLLISION

    def test_linlog3_finite(self):
        assert classify_profile(LinLog(3)).verdict is Verdict.FINITE_COLLISION

    def test_linlog_between_unknown(self):
        c = classify_profile(LinLog(1.5))
        assert c.verdict is Verdict.UNKNOWN
        assert "conjectured" in c.witness

    @pytest.mark.parametrize(
        "profile,verdict,triple",
        [
            (Constant(3), Verdict.INFINITE_COLLISION, True),
            (Table(((0, 2.0),)), Verdict.INFINITE_COLLISION, True),
            (Power(0.5), Verdict.INFINITE_COLLISION, False),
            (Power(1.0), Verdict.INFINITE_COLLISION, False),
            (Power(1.5), Verdict.UNKNOWN, False),
            (LinLog(0), Verdict.INFINITE_COLLISION, False),
            (LinLog(1.0), Verdict.INFINITE_COLLISION, False),
            (LinLog(2.0), Verdict.UNKNOWN, False),
            (LinLog(2.5), Verdict.FINITE_COLLISION, False),
            (IidSample("geometric", p=0.5), Verdict.TRIPLE_COLLISION, True),
        ],
    )
    def test_family_table(self, profile, verdict, triple):
        c = classify_profile(profile)
        assert c.verdict is verdict
        assert c.triple_collision is triple

    def test_verdict_labels_stable(self):
        assert Verdict.INFINITE_COLLISION.value == "InfiniteCollision_Thm1_1"
        assert Verdict.FINITE_COLLISION.value == "FiniteCollision_Thm4_1"
        assert Verdict.TRIPLE_COLLISION.value == "TripleCollision_Thm3_1"
        assert Verdict.UNKNOWN.value == "Unknown"

    def test_pure_function_of_params(self):
        assert classify_profile(LinLog(3)) == classify_profile(LinLog(3))


class TestTruncation:
    def test_bare_spine_count(self):
        _, count = enumerate_truncation(Constant(0), 4)
        assert count == 9

    def test_unit_teeth_count(self):
        _, count = enumerate_truncation(Constant(1), 4)
        assert count == 27

    def test_linear_volume_window(self):
        # linear-volume profiles keep the truncation between 2n and c*n
        _, count = enumerate_truncation(Constant(1), 100)
        assert 2 * 100 <= count == 603 <= 8 * 100

    def test_count_matches_closed_form(self):
        for p in PROFILES:
            for n in (1, 7, 50, 200):
                xs = np.arange(-n, n + 1)
                expect = int(np.sum(2 * p.heights(xs) + 1))
                if expect > 10**6:
                    continue
                verts, count = enumerate_truncation(p, n, cap=10**6)
                assert count == expect
                assert len(verts) == count
                assert len(set(verts)) == count

    def test_cap_enforced(self):
        with pytest.raises(ResourceBudgetError):
            enumerate_truncation(Power(2), 200, cap=100)


class TestSerialization:
    def test_round_trip(self):
        for p in PROFILES:
            q = profile_from_json(p.to_json())
            assert q == p
            xs = np.arange(-50, 51)
            assert np.array_equal(p.heights(xs), q.heights(xs))

    def test_table_entries_format(self):
        p = Table(((3, 1.5), (-1, 2.0)))
        data = json.loads(p.to_json())
        assert data["family"] == "table"
        assert sorted(data["params"]["entries"]) == [[-1, 2.0], [3, 1.5]]

    def test_unknown_family_rejected(self):
        with pytest.raises(DomainError):
            profile_from_json('{"family": "fractal", "params": {}}')

    def test_unknown_field_rejected(self):
        with pytest.raises(DomainError):
            profile_from_json('{"family": "constant", "params": {"a": 1}, "x": 2}')

    def test_malformed_json_rejected(self):
        with pytest.raises(DomainError):
            profile_from_json("{not json")


class TestValidation:
    @pytest.mark.parametrize(
        "bad",
        [
            lambda: Constant(-1),
            lambda: Power(0),
            lambda: Power(-2),
            lambda: LinLog(-0.5),
            lambda: Table(((0, -1.0),)),
            lambda: Table(((0, 1.0), (0, 2.0))),
            lambda: IidSample("geometric", p=0.0),
            lambda: IidSample("geometric", p=1.5),
            lambda: IidSample("poisson", lam=-1.0),
            lambda: IidSample("empirical", weights=()),
            lambda: IidSample("empirical", weights=(0.0, 0.0)),
            lambda: IidSample("cauchy", p=0.5),
        ],
    )
    def test_bad_parameters_rejected(self, bad):
        with pytest.raises(DomainError):
            bad()

    def test_geometric_certainty_gives_flat_profile(self):
        p = IidSample("geometric", p=1.0, profile_seed=1)
        assert np.all(p.heights(np.arange(-100, 101)) == 0)

    def test_empirical_support_bounded(self):
        p = IidSample("empirical", weights=(1.0, 1.0, 1.0), profile_seed=5)
        hs = p.heights(np.arange(-2000, 2001))
        assert hs.min() >= 0 and hs.max() <= 2

    def test_geometric_mean_roughly_correct(self):
        p = IidSample("geometric", p=0.5, profile_seed=123)
        hs = p.heights(np.arange(0, 100_000))
        # mean of geometric(1/2) on {0,1,...} is 1
        assert abs(hs.mean() - 1.0) < 0.02
