import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from instances import make_universe, random_instance, random_measure, random_separated_loss
from vcnk_lab.errors import IndexCollision, InvalidCenters, NotInImage
from vcnk_lab.hypotheses import (
    HypothesisClass,
    PartiteHypothesis,
    all_functions,
    constants,
    random_class,
    star,
)
from vcnk_lab.losses import label_outcomes, zero_one_for
from vcnk_lab.packing import CenterSet, optimal_centers
from vcnk_lab.partization import (
    Phi_m,
    audit_hp_transfer,
    audit_kpart_basics,
    audit_kpart_loss,
    beta_alpha,
    block_subset,
    check_kpart_loss_equality,
    commuting_check,
    departize,
    departize_class,
    departize_measure,
    iota_kpart,
    partize_class,
    partize_hypothesis,
    partize_loss,
    partize_measure,
    partize_universe,
    phi_m,
    pushforward_check,
    transfer_centers,
)
from vcnk_lab.report import VERIFIED, VIOLATED
from vcnk_lab.universe import (
    ConfigPoint,
    PartiteProbTemplate,
    ProbTemplate,
    config_grid,
    partite_grid,
    standard_grid,
    unit_coord,
)


@pytest.fixture
def k2():
    return make_universe(2, (2, 2), 2)


class TestUniverse:
    def test_three_coordinate_spaces(self, k2):
        pu = partize_universe(k2)
        assert pu.coordinates == ((1,), (2,), (1, 2))
        assert pu.sets == (k2.ground_sets[0], k2.ground_sets[0], k2.ground_sets[1])

    def test_measure_weights_per_arity(self, k2):
        mu = random_measure(random.Random(2), k2)
        pmu = partize_measure(mu)
        assert pmu.per_coordinate == (mu.per_arity[0], mu.per_arity[0], mu.per_arity[1])
        assert departize_measure(pmu, k2) == mu

    def test_departize_measure_rejects_split_weights(self, k2):
        pu = partize_universe(k2)
        half = (Fraction(1, 2), Fraction(1, 2))
        pmu = PartiteProbTemplate(pu, (half, (Fraction(1), Fraction(0)), half))
        with pytest.raises(NotInImage):
            departize_measure(pmu, k2)

    def test_k1_is_reindexing(self):
        u = make_universe(1, (3,), 2)
        pu = partize_universe(u)
        assert pu.sets == u.ground_sets
        assert pu.labels == label_outcomes(u)


class TestIndexMaps:
    def test_iota_relabels(self, k2):
        pgrid = partite_grid(partize_universe(k2), 1)
        z = ConfigPoint(pgrid.index, ("a0", "a1", "b1"))
        assert z[unit_coord((1, 2))] == "b1"
        assert iota_kpart(z).values == ("a0", "a1", "b1")

    def test_phi_k_inverts_iota(self, k2):
        pgrid = partite_grid(partize_universe(k2), 1)
        for values in pgrid:
            z = ConfigPoint(pgrid.index, values)
            assert phi_m(iota_kpart(z), 2) == z
        grid = standard_grid(k2, 2)
        assert grid.size == pgrid.size

    def test_phi_reads_expected_coordinates(self, k2):
        grid = standard_grid(k2, 4)
        values = tuple(d[i % len(d)] for i, d in enumerate(grid.domains))
        x = grid.point(values)
        z = phi_m(x, 2)
        assert z[((1,), (2,))] == x[(2,)]
        assert z[((1, 2), (2, 1))] == x[(2, 3)]
        small = standard_grid(k2, 2).point(("a0", "a1", "b1"))
        assert phi_m(small, 2)[unit_coord((1,))] == small[(1,)]
        assert phi_m(small, 2)[unit_coord((1, 2))] == small[(1, 2)]

    def test_phi_needs_m_at_least_k(self, k2):
        x = config_grid(k2, (1,)).point(("a0",))
        with pytest.raises(ValueError):
            phi_m(x, 2)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 10**6))
    def test_phi_matches_oracle(self, seed):
        rng = random.Random(seed)
        k = rng.choice((1, 2))
        u = make_universe(k, (3, 2)[:k], 2)
        m = rng.randint(k, 5)
        grid = standard_grid(u, m)
        x = grid.point(tuple(rng.choice(d) for d in grid.domains))
        z = phi_m(x, k)
        assert dict(zip(z.index.coords, z.values)) == oracles.phi(x.as_dict(), m, k)

    def test_beta_examples(self):
        assert beta_alpha((2, 1), 4, 2) == (2, 3)
        assert beta_alpha((1, 1), 2, 2) == (1, 2)

    @given(st.integers(2, 9), st.data())
    def test_beta_injective(self, m, data):
        k = data.draw(st.integers(1, min(3, m)))
        q = m // k
        alpha = tuple(data.draw(st.integers(1, q)) for _ in range(k))
        b = beta_alpha(alpha, m, k)
        assert len(set(b)) == k and all(1 <= v <= m for v in b)

    def test_block_subset_collision(self):
        with pytest.raises(IndexCollision):
            block_subset(((1, 2), (3, 1)), 2)

    def test_Phi_at_m_equal_k_is_reindexing(self, k2):
        F = random_class(k2, 1, rank=2, seed=8)[0]
        x = standard_grid(k2, 2).point(("a1", "a0", "b1"))
        y = star(F, 2, x)
        P = Phi_m(y, 2, 2)
        assert P.injections == ((1, 1),)
        assert P.labels == ((y[(1, 2)], y[(2, 1)]),)

    def test_Phi_of_constant_pattern_is_constant(self, k2):
        one = constants(k2)[1]
        x = standard_grid(k2, 4).point(("a0",) * 4 + ("b0",) * 6)
        assert set(Phi_m(star(one, 4, x), 4, 2).labels) == {(1, 1)}


class TestPushforward:
    def test_measure_preserved_k2_m4(self, k2):
        mu = random_measure(random.Random(7), k2, allow_zero=False)
        push = pushforward_check(mu, 4)
        assert push["measure_preserving"]
        assert (push["source_atoms"], push["target_atoms"]) == (1024, 256)

    def test_not_bijective_k2_m4(self, k2):
        # E_4 has ten coordinates but the partite grid over [2] has eight
        push = pushforward_check(ProbTemplate.uniform(k2), 4)
        assert not push["bijective"] and push["max_fibre"] == 4

    def test_bijective_at_m_equal_k(self, k2):
        assert pushforward_check(ProbTemplate.uniform(k2), 2)["bijective"]

    def test_bijective_when_pair_space_is_trivial(self):
        u = make_universe(2, (2, 1), 2)
        push = pushforward_check(random_measure(random.Random(1), u), 4)
        assert push["bijective"] and push["source_atoms"] == push["target_atoms"] == 16
        assert push["measure_preserving"]


class TestHypotheses:
    def test_constant_gives_constant_tuple(self, k2):
        G = partize_hypothesis(constants(k2)[1])
        assert set(G.table) == {(1, 1)}

    def test_class_size(self, k2):
        cls = random_class(k2, 9, rank=2, seed=3)
        assert len(partize_class(cls)) == len(cls)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 10**6))
    def test_round_trip(self, seed):
        rng = random.Random(seed)
        u, cls = random_instance(rng, max_size=6, rank=rng.choice((1, None)))
        pcls = partize_class(cls)
        back = departize_class(pcls, u)
        assert [h.table for h in back] == [h.table for h in cls]

    def test_non_symmetric_table_not_in_image(self, k2):
        pu = partize_universe(k2)
        n = partite_grid(pu, 1).size
        # entries must satisfy G(z)_tau = G(tau-swapped z); (0, 1) everywhere breaks that
        G = PartiteHypothesis(pu, [(0, 1)] * n)
        with pytest.raises(NotInImage):
            departize(G, k2)

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 10**6))
    def test_diagram_commutes(self, seed):
        rng = random.Random(seed)
        u = make_universe(2, (2, 2), 2)
        F = random_class(u, 1, rank=rng.choice((1, 2)), seed=seed)[0]
        for m in (2, 3):
            assert commuting_check(F, m) is None


class TestLoss:
    def test_zero_one_constants(self, k2):
        loss = zero_one_for(k2)
        ploss = partize_loss(loss, k2)
        assert (ploss.s, ploss.sup, ploss.flags) == (loss.s, loss.sup, loss.flags)

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 10**6))
    def test_constants_and_metric_flag_preserved(self, seed):
        rng = random.Random(seed)
        u, _ = random_instance(rng, k=2)
        loss = random_separated_loss(rng, label_outcomes(u), metric=rng.random() < 0.5)
        ploss = partize_loss(loss, u)
        assert (ploss.s, ploss.sup, ploss.flags) == (loss.s, loss.sup, loss.flags)

    def test_self_pair(self, k2):
        F = constants(k2)[0]
        report = check_kpart_loss_equality(ProbTemplate.uniform(k2), F, F, zero_one_for(k2))
        assert report.verdict == VERIFIED and report.quantities["loss"] == 0

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 10**6))
    def test_equality_against_oracle(self, seed):
        rng = random.Random(seed)
        u, cls = random_instance(rng, k=2, max_size=6, rank=rng.choice((1, None)))
        mu = random_measure(rng, u)
        loss = random_separated_loss(rng, label_outcomes(u))
        pcls = partize_class(cls)
        pmu = partize_measure(mu)
        for F, G in zip(cls, pcls):
            for H, K in zip(cls, pcls):
                left = oracles.total_loss(mu, F, H, loss.base)
                assert left == oracles.partite_total_loss(pmu, G, K, loss.base)
                assert check_kpart_loss_equality(mu, F, H, loss).verdict == VERIFIED
        assert audit_kpart_loss(mu, cls, loss).verdict == VERIFIED


class TestTransfer:
    def test_two_constants(self, k2):
        cls = constants(k2)
        report = audit_hp_transfer(cls, ProbTemplate.uniform(k2), zero_one_for(k2), Fraction(1, 2))
        assert report.verdict == VERIFIED
        assert report.quantities["partite_size"] == report.quantities["transferred_size"] == 2

    def test_singleton(self, k2):
        cls = HypothesisClass([constants(k2)[0]])
        report = audit_hp_transfer(cls, ProbTemplate.uniform(k2), zero_one_for(k2), Fraction(1, 4))
        assert report.quantities["transferred_size"] == 1

    def test_rejects_non_cover(self, k2):
        cls = constants(k2)
        mu = ProbTemplate.uniform(k2)
        pcls = partize_class(cls)
        ploss = partize_loss(zero_one_for(k2), k2)
        bad = CenterSet((0,), Fraction(1, 4), partize_measure(mu), "manual", ploss)
        with pytest.raises(InvalidCenters):
            transfer_centers(bad, pcls, cls, mu, zero_one_for(k2))

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 10**6))
    def test_cardinality_and_precision(self, seed):
        rng = random.Random(seed)
        u, cls = random_instance(rng, max_size=8, rank=rng.choice((1, None)))
        mu = random_measure(rng, u)
        loss = random_separated_loss(rng, label_outcomes(u))
        eps = Fraction(rng.randint(0, 4), 4)
        pcenters = optimal_centers(partize_class(cls), partize_measure(mu), partize_loss(loss, u), eps)
        centers = transfer_centers(pcenters, partize_class(cls), cls, mu, loss)
        assert len(centers) == len(pcenters) and centers.epsilon == eps
        assert audit_hp_transfer(cls, mu, loss, eps).verdict == VERIFIED


class TestBasicsAudit:
    def test_flags_non_bijective_phi(self, k2):
        report = audit_kpart_basics(k2, ProbTemplate.uniform(k2), constants(k2), m=4)
        assert report.verdict == VIOLATED
        assert [w["kind"] for w in report.witnesses] == ["phi_m_not_bijective"]
        assert report.quantities["phi_k_inverts_iota"]
        assert report.quantities["diagram_failures"] == 0

    def test_trivial_pair_space(self):
        u = make_universe(2, (2, 1), 2)
        report = audit_kpart_basics(u, ProbTemplate.uniform(u), all_functions(u, rank=1), m=4)
        assert report.quantities["phi_k_inverts_iota"]
        assert report.quantities["pushforward"]["measure_preserving"]
        assert report.quantities["diagram_failures"] == 0
        assert report.verdict == VERIFIED
