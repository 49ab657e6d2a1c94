import numpy as np
import pytest

from cilc import two_sample
from cilc.collective import Collective, run_cilc
from cilc.errors import DimensionMismatch, SequenceTooShort
from cilc.lifted import AgentLaw, deadbeat_law, make_lifted_plant, run_isolated_ilc
from cilc.noilc import NoilcWeights, design_noilc
from cilc.perf import (
    CERTIFIED_UP_TO_HORIZON, REFUTED, certify_well_performing, cilc_error_closed_form,
    collaborative_error_closed_form, collective_matrices, collective_propagators,
    isolated_error_closed_form, isolated_propagators, literal_collective_propagators,
    predict_best_performers, well_performing_scores,
)
from cilc.sampling import random_laws, random_plant

from conftest import dense_plant


def _random_system(rng):
    N = int(rng.integers(2, 6))
    M = int(rng.integers(2, 5))
    plant = random_plant(rng, N)
    c = Collective(plant, random_laws(rng, plant, M, scale=0.2), rng.normal(size=N))
    return c


def _simulated_scores(c, u0, horizon):
    h = run_cilc(c, u0=u0, trials=horizon + 1)
    iso = [run_isolated_ilc(c.plant, law, c.r, u0=u0, trials=horizon + 1) for law in c.laws]
    F = np.array([[h[j].e_bar_norm ** 2 - iso[m][j].e_norm ** 2 for m in range(c.M)]
                  for j in range(horizon + 1)])
    scale = np.array([[max(h[j].e_bar_norm, iso[m][j].e_norm) ** 2 for m in range(c.M)]
                      for j in range(horizon + 1)])
    return h, F, scale


@pytest.mark.parametrize("zero_input", [True, False])
def test_scores_match_simulation(rng, zero_input):
    for _ in range(100):
        c = _random_system(rng)
        u0 = np.zeros(c.N) if zero_input else rng.normal(size=c.N)
        e0 = c.rd - c.plant.P @ u0
        h, F_sim, scale = _simulated_scores(c, u0, 8)
        om, ps = collective_matrices(c)
        F = well_performing_scores(om, ps, e0, c.rd, 8, f=h.best_performers, zero_input=zero_input)
        assert F.shape == (9, c.M)
        assert np.all(np.abs(F - F_sim) <= 1e-9 * (scale + 1e-300) + 1e-12)


def test_zero_input_form_equals_general_form(rng):
    for _ in range(20):
        c = _random_system(rng)
        om, ps = collective_matrices(c)
        a = well_performing_scores(om, ps, c.rd, c.rd, 6, zero_input=True)
        b = well_performing_scores(om, ps, c.rd, c.rd, 6, zero_input=False)
        np.testing.assert_allclose(a, b, rtol=1e-9, atol=1e-9 * c.rd @ c.rd)


def test_prediction_matches_simulation(rng):
    for _ in range(50):
        c = _random_system(rng)
        om, ps = collective_matrices(c)
        pred = predict_best_performers(om, ps, c.rd, c.rd, 15)
        h = run_cilc(c, trials=15)
        near = set(pred.near_ties)
        for j, (p, s) in enumerate(zip(pred.f, h.best_performers)):
            assert p == s or j in near


def test_example_prediction_and_certificate():
    c = two_sample.collective()
    om, ps = collective_matrices(c)
    pred = predict_best_performers(om, ps, c.rd, c.rd, 31)
    assert pred.f == run_cilc(c, trials=31).best_performers
    rep = certify_well_performing(om, ps, c.rd, c.rd, 30)
    assert rep.verdict == CERTIFIED_UP_TO_HORIZON and rep.violation is None
    assert rep.scores[0].tolist() == [0.0, 0.0]


def test_isolated_closed_form_matches_records(rng):
    plant = dense_plant(rng, 4)
    law = random_laws(rng, plant, 1, scale=0.2)[0]
    r = rng.normal(size=4)
    u0 = rng.normal(size=4)
    recs = run_isolated_ilc(plant, law, r, u0=u0, trials=10)
    c = Collective(plant, [law], r)
    om, ps = c.omegas()[0], c.psis()[0]
    for rec in recs:
        e = isolated_error_closed_form(om, ps, recs[0].e, c.rd, rec.j)
        np.testing.assert_allclose(e, rec.e, rtol=1e-9, atol=1e-10)


def test_isolated_propagators_examples():
    om = np.array([[0.5, 0.0], [0.0, 2.0]])
    ps = np.eye(2)
    A, B = isolated_propagators(om, ps, 3)
    np.testing.assert_array_equal(A, np.diag([0.125, 8.0]))
    np.testing.assert_array_equal(B, np.diag([1 + 0.5 + 0.25, 1 + 2 + 4]))
    A, B = isolated_propagators(om, ps, 0)
    np.testing.assert_array_equal(A, np.eye(2))
    np.testing.assert_array_equal(B, np.zeros((2, 2)))
    with pytest.raises(ValueError):
        isolated_propagators(om, ps, -1)
    with pytest.raises(DimensionMismatch):
        isolated_propagators(om, np.eye(3), 1)


def test_collective_closed_form_matches_simulation(rng):
    for _ in range(30):
        c = _random_system(rng)
        u0 = rng.normal(size=c.N)
        h = run_cilc(c, u0=u0, trials=12)
        om, ps = collective_matrices(c)
        e0 = h[0].records[0].e
        for step in h.steps:
            e = cilc_error_closed_form(om, ps, h.best_performers, e0, c.rd, step.j)
            np.testing.assert_allclose(e, step.e_bar, rtol=1e-8, atol=1e-9 * np.linalg.norm(e0))
            if step.j == 0:
                continue
            A, B = collective_propagators(om, ps, h.best_performers, step.j - 1)
            for m, rec in enumerate(step.records):
                e_m = collaborative_error_closed_form(om[m], ps[m], A, B, e0, c.rd)
                np.testing.assert_allclose(e_m, rec.e, rtol=1e-8, atol=1e-9 * np.linalg.norm(e0))


def test_literal_products_equal_recursion(rng):
    for _ in range(30):
        c = _random_system(rng)
        om, ps = collective_matrices(c)
        f = [1] + list(rng.integers(1, c.M + 1, size=3))
        for j in range(4):
            A, B = collective_propagators(om, ps, f, j)
            A2, B2 = literal_collective_propagators(om, ps, f, j)
            np.testing.assert_allclose(A, A2, rtol=1e-12, atol=1e-12)
            np.testing.assert_allclose(B, B2, rtol=1e-12, atol=1e-12)


def test_short_sequence_rejected(ex_collective):
    om, ps = collective_matrices(ex_collective)
    with pytest.raises(SequenceTooShort):
        collective_propagators(om, ps, [1, 2], 2)
    with pytest.raises(SequenceTooShort):
        literal_collective_propagators(om, ps, [1], 1)


def test_deadbeat_agents_are_never_beaten(ex_plant):
    db = deadbeat_law(ex_plant, 1)
    c = Collective(ex_plant, [db, AgentLaw(2, db.Q, db.L)], [1.0, 0.0])
    om, ps = collective_matrices(c)
    rep = certify_well_performing(om, ps, c.rd, c.rd, 10)
    assert rep.verdict == CERTIFIED_UP_TO_HORIZON
    assert np.abs(rep.scores).max() <= 1e-20


def test_homogeneous_collective_certified(rng):
    plant = dense_plant(rng, 5)
    law = random_laws(rng, plant, 1, scale=0.3)[0]
    c = Collective(plant, [law, AgentLaw(2, law.Q, law.L), AgentLaw(3, law.Q, law.L)], rng.normal(size=5))
    om, ps = collective_matrices(c)
    rep = certify_well_performing(om, ps, c.rd, c.rd, 20)
    assert rep.verdict == CERTIFIED_UP_TO_HORIZON
    assert np.abs(rep.scores).max() == 0.0


def test_dominant_agent(rng):
    plant = dense_plant(rng, 6)
    slow = design_noilc(plant, NoilcWeights(10.0, 0.5), id=1)
    fast = design_noilc(plant, NoilcWeights(0.1, 0.0), id=2)
    r = rng.normal(size=6)
    c = Collective(plant, [slow, fast], r)
    om, ps = collective_matrices(c)
    rep = certify_well_performing(om, ps, c.rd, c.rd, 25)
    assert rep.verdict == CERTIFIED_UP_TO_HORIZON
    h = run_cilc(c, trials=26)
    iso = run_isolated_ilc(plant, fast, r, trials=26)
    assert h.best_performers[1:] == [2] * 25
    for step, rec in zip(h.steps, iso):
        np.testing.assert_allclose(step.e_bar, rec.e, rtol=1e-12, atol=1e-14)


def test_refuted_when_switching_hurts():
    # agent 2 wins trial 1 but then decays slowly; agent 1 alone reaches zero at trial 2
    P = np.eye(2)
    om1 = np.array([[0.0, 1.0], [0.0, 0.0]])          # nilpotent: large, then zero
    om2 = np.array([[0.0, 0.0], [0.0, 0.9]])          # geometric decay of the second component
    laws = [AgentLaw(1, np.eye(2), np.eye(2) - om1), AgentLaw(2, np.eye(2), np.eye(2) - om2)]
    c = Collective(make_lifted_plant(P), laws, [0.0, 1.0])
    om, ps = collective_matrices(c)
    rep = certify_well_performing(om, ps, c.rd, c.rd, 5)
    assert rep.verdict == REFUTED
    j, m = rep.violation
    assert m == 1 and j >= 2

