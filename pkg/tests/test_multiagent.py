import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from catwork import tpm
from catwork.channels import DilatedChannel, JointUnitary, make_unitary_channel
from catwork.constructions import (
    Microcanonical,
    build_block_catalytic,
    build_toy_channel,
    random_catalytic_channel,
    symmetric_micro_setup,
)
from catwork.exceptions import BudgetExceededError, DomainError
from catwork.multiagent import (
    ProtocolConfig,
    agent_marginals,
    analyze_joint,
    conditional,
    run_exact,
    run_monte_carlo,
    run_protocol,
    total_variation,
)
from catwork.qcore import ClassicalState, DensityOperator, Spectrum, gibbs_state


def brute_force(ch, n, p_init):
    """Enumerate every (initial system state, catalyst start) path explicitly."""
    d_c = ch.dC
    e = ch.spectrum.energies
    images = ch.unitary.permutation.images
    out = {}
    for c0, sc in enumerate(ch.sigma_C.probs):
        for states in itertools.product(range(ch.dS), repeat=n):
            prob, c, works = sc, c0, []
            for s in states:
                prob *= p_init[s]
                dst = images[s * d_c + c]
                works.append(round(float(e[s] - e[dst // d_c]), 9))
                c = dst % d_c
            if prob > 0:
                key = tuple(works)
                out[key] = out.get(key, 0.0) + prob
    return out


def test_single_round_equals_work_distribution():
    ch = build_toy_channel(1.0, 0.7)
    res = run_exact(ProtocolConfig(ch, 1))
    dist = tpm.work_distribution(tpm.joint_outcome_distribution(ch))
    assert [r.works[0] for r in res.records] == dist.w.tolist()
    assert np.allclose([r.prob for r in res.records], dist.p, atol=1e-15)


@given(st.integers(0, 10**6), st.integers(1, 3))
@settings(max_examples=25)
def test_exact_backend_matches_path_enumeration(seed, n):
    ch = random_catalytic_channel(np.random.default_rng(seed), max_joint=12)
    res = run_exact(ProtocolConfig(ch, n))
    ref = brute_force(ch, n, ch.gibbs().probs)
    got = {tuple(round(w, 9) for w in r.works): r.prob for r in res.records}
    ref = {k: v for k, v in ref.items() if v > 1e-15}
    assert set(got) == set(ref)
    for k in ref:
        assert got[k] == pytest.approx(ref[k], abs=1e-13)
    assert sum(got.values()) == pytest.approx(1.0, abs=1e-9)


@given(st.integers(0, 10**6))
@settings(max_examples=25)
def test_catalytic_composition(seed):
    ch = random_catalytic_channel(np.random.default_rng(seed), max_joint=20)
    summary = analyze_joint(run_exact(ProtocolConfig(ch, 3)))
    assert max(summary["catalyst_marginal_residuals"]) <= 1e-10
    assert summary["marginal_spread"] <= 1e-10


def test_records_are_lexicographic():
    res = run_exact(ProtocolConfig(build_toy_channel(1.0, 1.0), 3))
    keys = [r.works for r in res.records]
    assert keys == sorted(keys)


@pytest.mark.parametrize("n", [2, 4, 6])
def test_block_construction_alternates(n):
    spectrum, plan = symmetric_micro_setup(4)
    ch = build_block_catalytic(spectrum, plan, Microcanonical())
    res = run_exact(ProtocolConfig(ch, n, plan.window_I))
    eps = 2.0
    alt = tuple(eps * (-1) ** k for k in range(n))
    probs = {r.works: r.prob for r in res.records}
    assert probs == {alt: 0.5, tuple(-w for w in alt): 0.5}
    s = analyze_joint(res)
    assert s["alternation_mass"] == 1.0 and s["alternation_lambda"] == 0.5
    assert s["all_positive_mass"] == 0.0


def test_toy_two_round_conditional():
    beta, delta = 1.0, 1.0
    z = 2 + math.exp(-beta * delta)
    res = run_exact(ProtocolConfig(build_toy_channel(delta, beta), 2))
    cond = conditional(res.records, delta)
    assert cond.prob(-delta) == pytest.approx(1 / z, abs=1e-14)
    assert cond.prob(delta) == 0.0
    assert cond.prob(0.0) == pytest.approx(1 - 1 / z, abs=1e-14)
    with pytest.raises(DomainError):
        conditional(res.records, 7.0)


def test_per_particle_scaling():
    spectrum, plan = symmetric_micro_setup(2)
    ch = build_block_catalytic(spectrum, plan, Microcanonical())
    res = run_exact(ProtocolConfig(ch, 2, plan.window_I, n_particles=4))
    assert {abs(w) for r in res.records for w in r.works} == {0.25}


def test_branch_budget():
    ch = random_catalytic_channel(np.random.default_rng(5), max_joint=36)
    with pytest.raises(BudgetExceededError, match="monte_carlo"):
        run_exact(ProtocolConfig(ch, 12, branch_budget=50))


def test_config_validation():
    ch = build_toy_channel(1.0, 1.0)
    with pytest.raises(DomainError):
        ProtocolConfig(ch, 2, backend="quantum")
    with pytest.raises(DomainError):
        ProtocolConfig(ch, 0)
    with pytest.raises(DomainError):
        ProtocolConfig(ch, 2, initial_per_agent="hot")
    sigma = DensityOperator(np.full((2, 2), 0.5))
    coherent = DilatedChannel(Spectrum([0.0, 1.0]), 2, JointUnitary.identity(4), sigma, 1.0)
    with pytest.raises(DomainError):
        ProtocolConfig(coherent, 2)


def test_monte_carlo_is_seeded_and_converges():
    ch = build_toy_channel(1.0, 1.0)
    exact = run_exact(ProtocolConfig(ch, 3))
    cfg = ProtocolConfig(ch, 3, backend="monte_carlo", trials=50_000, seed=9)
    a, b = run_monte_carlo(cfg), run_protocol(cfg)
    assert np.array_equal(a.samples, b.samples)
    assert total_variation(a.frequencies, exact.records) <= 4 / math.sqrt(50_000)
    other = run_monte_carlo(ProtocolConfig(ch, 3, backend="monte_carlo", trials=50_000, seed=10))
    assert not np.array_equal(a.samples, other.samples)


def test_monte_carlo_independent_of_thread_count(monkeypatch):
    ch = build_toy_channel(1.0, 1.0)
    cfg = ProtocolConfig(ch, 2, backend="monte_carlo", trials=25_000, seed=1)
    monkeypatch.setenv("CWL_THREADS", "1")
    a = run_monte_carlo(cfg)
    monkeypatch.setenv("CWL_THREADS", "3")
    b = run_monte_carlo(cfg)
    assert np.array_equal(a.samples, b.samples)


def test_monte_carlo_jarzynski_within_standard_errors():
    beta = 1.0
    ch = build_toy_channel(1.0, beta)
    mc = run_monte_carlo(ProtocolConfig(ch, 1, backend="monte_carlo", trials=200_000, seed=4))
    x = np.exp(beta * mc.samples[:, 0])
    se = x.std(ddof=1) / math.sqrt(x.size)
    exact = tpm.exponential_work_average(ch)
    assert abs(x.mean() - exact) <= 3 * se


def test_unitary_channel_agents_are_independent():
    rng = np.random.default_rng(2)
    s = Spectrum([0.0, 1.0, 1.5])
    ch = make_unitary_channel(s, 1.0, JointUnitary.from_permutation(rng.permutation(3)))
    res = run_exact(ProtocolConfig(ch, 2))
    m = agent_marginals(res.records)
    for r in res.records:
        assert r.prob == pytest.approx(m[0].prob(r.works[0]) * m[1].prob(r.works[1]), abs=1e-14)


def test_analyze_accepts_plain_records():
    res = run_exact(ProtocolConfig(build_toy_channel(1.0, 1.0), 2))
    s = analyze_joint(res.records)
    assert s["catalyst_marginal_residuals"] == []
    assert s["total_mass"] == pytest.approx(1.0)


def test_microcanonical_initial_state_used():
    spectrum, plan = symmetric_micro_setup(2)
    ch = build_block_catalytic(spectrum, plan, Microcanonical())
    cfg = ProtocolConfig(ch, 1, plan.window_I)
    assert np.allclose(cfg.initial_state().probs, ch.reference.probs)
    assert np.allclose(ProtocolConfig(ch, 1).initial_state().probs, gibbs_state(spectrum, 1.0)[0].probs)
    assert isinstance(cfg.initial_state(), ClassicalState)
