import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from instances import make_universe, random_instance, random_measure, random_separated_loss
from vcnk_lab.errors import NormalizationError
from vcnk_lab.hypotheses import HypothesisClass, all_functions, constants, indicators
from vcnk_lab.losses import (
    LossTable,
    check_almost_metric,
    disagreement,
    disagreement_matrix,
    is_realizable,
    label_outcomes,
    loss_constants,
    loss_matrix,
    total_loss,
    zero_one_for,
)
from vcnk_lab.report import VERIFIED
from vcnk_lab.universe import ProbTemplate, standard_grid


@pytest.fixture
def k1():
    return make_universe(1, (3,), 2)


class TestConstants:
    def test_zero_one(self):
        s, sup, flags = loss_constants(LossTable.zero_one(["x", "y", "z"]))
        assert (s, sup) == (1, 1)
        assert flags.bounded and flags.separated and flags.metric

    def test_nonzero_diagonal_not_separated(self):
        loss = LossTable(["x", "y"], values={("x", "x"): 1})
        assert not loss.flags.separated

    def test_triangle_violation_not_metric(self):
        outs = ["y1", "y2", "y3"]
        values = {(a, b): 1 for a in outs for b in outs if a != b}
        values[("y1", "y3")] = values[("y3", "y1")] = 3
        loss = LossTable(outs, values=values)
        assert loss.flags.separated and not loss.flags.metric
        assert loss.s == 1 and loss.sup == 3

    def test_point_dependent_override(self):
        loss = LossTable(["x", "y"], overrides={1: {("x", "y"): Fraction(1, 3)}}, n_points=2)
        assert loss(0, "x", "y") == 1 and loss(1, "x", "y") == Fraction(1, 3)
        assert loss.s == Fraction(1, 3)

    def test_rejects_floats_and_negatives(self):
        with pytest.raises(NormalizationError):
            LossTable(["x", "y"], values={("x", "y"): 0.5})
        with pytest.raises(NormalizationError):
            LossTable(["x", "y"], values={("x", "y"): -1})

    def test_single_outcome(self):
        loss = LossTable.zero_one(["x"])
        assert loss.s is None and loss.flags.separated


class TestTotalLoss:
    def test_self_loss_is_zero(self, k1):
        mu = ProbTemplate.uniform(k1)
        for F in all_functions(k1):
            assert total_loss(mu, F, zero_one_for(k1), F) == 0

    def test_indicator_against_constant(self, k1):
        mu = ProbTemplate.uniform(k1)
        zero = constants(k1)[0]
        ind = indicators(k1)[0]
        assert total_loss(mu, zero, zero_one_for(k1), ind) == Fraction(1, 3)
        assert disagreement(mu, zero, ind) == Fraction(1, 3)

    def test_constants_k2(self):
        u = make_universe(2, (2, 1), 2)
        mu = ProbTemplate.uniform(u)
        zero, one = constants(u)
        assert total_loss(mu, zero, zero_one_for(u), one) == 1
        assert disagreement(mu, zero, one) == 1
        assert disagreement(mu, zero, zero) == 0

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 10**6))
    def test_matches_oracle(self, seed):
        rng = random.Random(seed)
        u, cls = random_instance(rng, max_size=5, rank=rng.choice((1, None)))
        mu = random_measure(rng, u)
        loss = random_separated_loss(rng, label_outcomes(u))
        L = loss_matrix(cls, mu, loss)
        for i, F in enumerate(cls):
            for j, H in enumerate(cls):
                expected = oracles.total_loss(mu, F, H, loss.base)
                assert total_loss(mu, F, loss, H) == expected == L[i][j]

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 10**6))
    def test_zero_one_equals_disagreement(self, seed):
        rng = random.Random(seed)
        u, cls = random_instance(rng, max_size=5, rank=None)
        mu = random_measure(rng, u)
        assert loss_matrix(cls, mu, zero_one_for(u)) == disagreement_matrix(cls, mu)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 10**6))
    def test_symmetric_for_metric_loss(self, seed):
        rng = random.Random(seed)
        u, cls = random_instance(rng, max_size=5)
        mu = random_measure(rng, u)
        loss = random_separated_loss(rng, label_outcomes(u), metric=True)
        assert loss.flags.metric
        L = loss_matrix(cls, mu, loss)
        assert all(L[i][j] == L[j][i] for i in range(len(cls)) for j in range(len(cls)))

    def test_point_dependent_loss_matches_oracle(self):
        u = make_universe(2, (2, 2), 2)
        grid = standard_grid(u, 2)
        outs = label_outcomes(u)
        overrides = {p: {(outs[0], outs[3]): Fraction(5)} for p in range(0, grid.size, 3)}
        loss = LossTable(outs, overrides=overrides, n_points=grid.size)
        mu = random_measure(random.Random(9), u)
        cls = all_functions(u, rank=1)
        L = loss_matrix(cls, mu, loss)
        for i, F in enumerate(cls):
            for j, H in enumerate(cls):
                expected = sum(
                    (w * loss(p, H.outcomes[p], F.outcomes[p])
                     for p, w in ((p, oracles.weight(mu, dict(zip(grid.coords, v))))
                                  for p, v in enumerate(grid))),
                    Fraction(0),
                )
                assert L[i][j] == expected


class TestRealizability:
    def test_member_is_realizable(self, k1):
        cls = all_functions(k1)
        assert is_realizable(cls[3], cls, zero_one_for(k1), ProbTemplate.uniform(k1))

    def test_not_realizable(self, k1):
        zero, one = constants(k1)
        cls = HypothesisClass([one])
        assert not is_realizable(zero, cls, zero_one_for(k1), ProbTemplate.uniform(k1))

    def test_null_atom_modification(self, k1):
        zero = constants(k1)[0]
        ind = indicators(k1)[0]
        mu = ProbTemplate(k1, ((Fraction(0), Fraction(1, 2), Fraction(1, 2)),))
        assert is_realizable(ind, HypothesisClass([zero]), zero_one_for(k1), mu)


class TestAlmostMetric:
    def test_zero_one_sandwich_collapses(self, k1):
        mu = ProbTemplate.uniform(k1)
        cls = all_functions(k1)
        loss = zero_one_for(k1)
        assert loss_matrix(cls, mu, loss) == disagreement_matrix(cls, mu)
        assert check_almost_metric(mu, loss, cls).verdict == VERIFIED

    def test_random_separated_table(self):
        rng = random.Random(4)
        u = make_universe(2, (2, 1), 2)
        outs = label_outcomes(u)
        assert len(outs) == 4
        cls = all_functions(u, rank=1)
        cls = HypothesisClass(list(cls)[:5], universe=u)
        report = check_almost_metric(random_measure(rng, u), random_separated_loss(rng, outs), cls)
        assert report.verdict == VERIFIED
        assert report.quantities["checks"] == 2 * 25 + 125

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 10**6))
    def test_random_instances(self, seed):
        rng = random.Random(seed)
        u, cls = random_instance(rng, max_size=6, rank=None)
        report = check_almost_metric(
            random_measure(rng, u), random_separated_loss(rng, label_outcomes(u)), cls
        )
        assert report.verdict == VERIFIED
