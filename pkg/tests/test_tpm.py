import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.stats import unitary_group

from catwork import tpm
from catwork.channels import DilatedChannel, JointUnitary, make_unitary_channel
from catwork.constructions import build_toy_channel
from catwork.exceptions import DomainError
from catwork.qcore import ClassicalState, DensityOperator, Spectrum, gibbs_state

from oracles import toy_exact, tpm_by_loops


def test_toy_matches_exact_fractions():
    beta = math.log(2.0)  # x = 1/2
    ch = build_toy_channel(1.0, beta)
    dist = tpm.work_distribution(tpm.joint_outcome_distribution(ch))
    atoms, je = toy_exact(Fraction(1, 2))
    assert len(dist) == len(atoms)
    for w, p in atoms.items():
        assert dist.prob(float(w)) == pytest.approx(float(p), abs=1e-15)
    assert tpm.exponential_work_average(ch, cross_check=True) == pytest.approx(float(je), abs=1e-14)
    z = Fraction(5, 2)
    assert je == (z + 5 + 2 * (z - 2) * (z - 1)) / (z * (z + 1))


@given(st.integers(2, 5), st.integers(1, 4), st.integers(0, 10**6), st.floats(0, 3))
def test_joint_table_matches_loop_oracle(d_s, d_c, seed, beta):
    rng = np.random.default_rng(seed)
    e = np.round(rng.normal(size=d_s), 1)
    images = rng.permutation(d_s * d_c)
    sigma = rng.dirichlet(np.ones(d_c))
    ch = DilatedChannel(Spectrum(e), d_c, JointUnitary.from_permutation(images),
                        ClassicalState(sigma), beta)
    p0 = gibbs_state(ch.spectrum, beta)[0].probs
    joint = tpm.joint_outcome_distribution(ch)
    assert np.allclose(joint.initial_marginal(), p0, atol=1e-15)
    dist = tpm.work_distribution(joint)
    ref = tpm_by_loops(e, images, d_c, sigma, p0)
    for w, p in ref.items():
        assert dist.prob(w, tol=1e-9) == pytest.approx(p, abs=1e-14)
    direct = float(np.dot(dist.p, np.exp(beta * dist.w)))
    assert tpm.exponential_work_average(ch) == pytest.approx(direct, rel=1e-12)


def test_dense_unitary_transition_matrix_is_born_rule():
    u = unitary_group.rvs(3, random_state=11)
    ch = make_unitary_channel(Spectrum([0.0, 0.4, 1.0]), 1.0, JointUnitary.dense(u))
    t = tpm.transition_matrix(ch)
    assert np.allclose(t, np.abs(u) ** 2, atol=1e-14)


def test_jarzynski_paths_cross_check_detects_disagreement(monkeypatch):
    ch = build_toy_channel(1.0, 1.0)
    monkeypatch.setattr(tpm, "_jarzynski_from_channel", lambda c: 2.0)
    with pytest.raises(AssertionError):
        tpm.exponential_work_average(ch, cross_check=True)


def test_distribution_average_and_tail():
    dist = tpm.WorkDistribution([1.0, -1.0, 0.0], [0.2, 0.5, 0.3])
    assert dist.w.tolist() == [-1.0, 0.0, 1.0]
    assert tpm.average_work(dist) == pytest.approx(-0.3)
    assert tpm.work_tail(dist, 0.0) == pytest.approx(0.5)
    assert tpm.work_tail(dist, 1.0) == pytest.approx(0.2)
    assert tpm.work_tail(dist, 0.25, n_particles=4) == pytest.approx(0.2)
    assert tpm.exponential_work_average(dist, 1.0) == pytest.approx(
        0.2 * math.e + 0.3 + 0.5 / math.e)
    with pytest.raises(DomainError):
        tpm.WorkDistribution([0.0], [0.5])


def test_log_average_is_stable_for_large_work():
    dist = tpm.WorkDistribution([800.0, 0.0], [0.5, 0.5])
    assert tpm.log_exponential_work_average(dist, 1.0) == pytest.approx(800 + math.log(0.5))


def test_merge_atoms_groups_round_off():
    w, p = tpm.merge_atoms([1.0, 1.0 + 1e-13, 2.0, 0.0], [0.25, 0.25, 0.25, 0.25], 1e-9)
    assert w.tolist() == [0.0, 1.0, 2.0]
    assert p.tolist() == [0.25, 0.5, 0.25]
    d = tpm.WorkDistribution.from_samples([0.0, 1.0, 1.0, 1.0])
    assert d.prob(1.0) == pytest.approx(0.75)


def test_joint_table_validation():
    s = Spectrum([0.0, 1.0])
    with pytest.raises(DomainError):
        tpm.JointOutcomeDistribution(s, np.full((2, 2), 0.3))
    with pytest.raises(DomainError):
        tpm.JointOutcomeDistribution(s, np.full((3, 3), 1 / 9))
    j = tpm.JointOutcomeDistribution(s, np.array([[0.5, 0.25], [0.0, 0.25]]))
    assert j.by_energy() == [(0.0, 0.0, 0.5), (1.0, 0.0, 0.25), (1.0, 1.0, 0.25)]
    assert np.allclose(j.final_marginal(), [0.75, 0.25])


def test_coherent_initial_state_rejected():
    ch = build_toy_channel(1.0, 1.0)
    v = np.ones(3) / math.sqrt(3)
    with pytest.raises(DomainError, match="coherences"):
        tpm.joint_outcome_distribution(ch, DensityOperator(np.outer(v, v)))
    diag = DensityOperator(np.diag([0.2, 0.3, 0.5]).astype(complex))
    tpm.joint_outcome_distribution(ch, diag)


def test_bipartite_work_zero_catalyst_hamiltonian():
    ch = build_toy_channel(1.0, 0.5)
    bw = tpm.joint_system_catalyst_work(ch, np.zeros(2))
    assert np.all(bw.marginal_C.w == 0.0)
    ref = tpm.work_distribution(tpm.joint_outcome_distribution(ch))
    assert np.allclose(bw.marginal_S.w, ref.w) and np.allclose(bw.marginal_S.p, ref.p)


@given(st.lists(st.floats(-3, 3), min_size=2, max_size=2))
def test_bipartite_system_marginal_ignores_catalyst_hamiltonian(h):
    ch = build_toy_channel(0.7, 1.3)
    ref = tpm.work_distribution(tpm.joint_outcome_distribution(ch))
    bw = tpm.joint_system_catalyst_work(ch, h)
    assert np.allclose(bw.marginal_S.p, ref.p, atol=1e-12)
    # the catalyst's work is fixed by its level change: W_C = h[c] - h[c']
    assert bw.marginal_C.p.sum() == pytest.approx(1.0)


def test_bipartite_rejects_coherent_catalyst():
    sigma = DensityOperator(np.full((2, 2), 0.5))
    ch = DilatedChannel(Spectrum([0.0, 1.0]), 2, JointUnitary.identity(4), sigma, 1.0)
    with pytest.raises(DomainError):
        tpm.joint_system_catalyst_work(ch, [0.0, 1.0])
