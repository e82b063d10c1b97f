import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.stats import unitary_group

from catwork import tpm
from catwork.channels import (
    apply_channel,
    catalyst_fixed_point,
    classify_channel,
    make_fully_thermalizing,
    make_random_unitary_channel,
    make_unitary_channel,
)
from catwork.constructions import (
    BlockPlan,
    Canonical,
    ExpDos,
    IidSpins,
    Microcanonical,
    block_permutation,
    block_weights,
    build_block_catalytic,
    build_toy_channel,
    canonical_setup,
    canonical_window,
    compressed_levels,
    concentrated_expdos,
    doubling_expdos,
    extraction_threshold,
    jarzynski_bound,
    log_tail_levels,
    make_gp_mix,
    min_entropy_audit,
    nmw_tail_curve,
    plan_blocks,
    random_catalytic_channel,
    symmetric_micro_setup,
    synthetic_spectrum,
    toy_catalyst,
    toy_closed_forms,
    top_catalyst_weight,
    unital_tail_bound,
)
from catwork.exceptions import BudgetExceededError, DomainError, NotCatalyticError, PlanError
from catwork.qcore import ClassicalState, EnergyWindow, PermutationMap, Spectrum, gibbs_state, microcanonical_state


# ---------------------------------------------------------------- toy channel

@given(st.floats(0.0, 40.0))
def test_toy_catalyst_is_restored(beta_delta):
    ch = build_toy_channel(1.0, beta_delta)
    assert ch.catalytic_residual <= 1e-12


def test_toy_catalyst_is_the_unique_fixed_point():
    beta = 0.9
    ch = build_toy_channel(1.0, beta)
    solved, _ = catalyst_fixed_point(ch.unitary, ch.gibbs(), 2, method="eigen_null_space")
    assert np.allclose(solved.probs, toy_catalyst(1.0, beta), atol=1e-13)


def test_toy_output_on_maximally_mixed_input():
    beta = 0.8
    z = 2 + math.exp(-beta)
    out = apply_channel(build_toy_channel(1.0, beta), ClassicalState.uniform(3)).probs
    # ascending energy order: the two ground states first
    assert np.allclose(out, (2 / 3) * np.array([2 / (z + 1), 0.5, (z - 1) / (z + 1)]), atol=1e-15)


def test_toy_degenerate_limit_is_trivial():
    ch = build_toy_channel(0.0, 1.0)
    assert tpm.exponential_work_average(ch, cross_check=True) == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(DomainError):
        build_toy_channel(-1.0, 1.0)


def test_toy_second_law_and_maximum():
    for bd in (0.1, 1.0, 5.0, 30.0):
        f = toy_closed_forms(1.0, bd)
        assert f["p_minus"] >= f["p_plus"]
        assert 1.0 <= f["jarzynski"] <= 7 / 6
    # closed form at Z = 2 and Z = 3
    assert toy_closed_forms(1.0, 745.0)["jarzynski"] == pytest.approx(7 / 6, abs=1e-15)
    assert toy_closed_forms(0.0, 1.0)["jarzynski"] == pytest.approx(1.0, abs=1e-15)


# ----------------------------------------------------------- synthetic spectra

def test_doubling_expdos_counts():
    levels, counts = synthetic_spectrum(doubling_expdos(6)).levels()
    assert levels.tolist() == [0, 1, 2, 3, 4, 5, 6]
    assert counts.tolist() == [1, 1, 2, 4, 8, 16, 32]


def test_expdos_cumulative_count_tracks_exponential():
    model = ExpDos(1, 1.3, 0.0, 8.0, level_spacing=0.25)
    energies, counts = compressed_levels(model)
    cum = np.cumsum(np.exp(counts))
    target = np.exp(1.3 * energies)
    # floor with carried remainder: never ahead, never more than one state behind
    assert np.all(cum <= target + 1e-6) and np.all(cum > target - 1 - 1e-6)


def test_expdos_piecewise_slopes_and_budget():
    model = ExpDos(2, ((0.0, 2.0), (1.0, 0.5)), 0.0, 3.0, level_spacing=0.1)
    e, log_mult = compressed_levels(model)
    assert e.min() >= 0 and e.max() <= 6.0 + 1e-9
    with pytest.raises(BudgetExceededError):
        synthetic_spectrum(ExpDos(10, 3.0, 0.0, 2.0, level_budget=1000))
    with pytest.raises(DomainError):
        ExpDos(1, -1.0, 0.0, 1.0)


def test_iid_spins_binomial():
    e, log_mult = compressed_levels(IidSpins(5, 0.5))
    assert e.tolist() == [0, 0.5, 1.0, 1.5, 2.0, 2.5]
    assert np.allclose(np.exp(log_mult), [1, 5, 10, 10, 5, 1])
    assert synthetic_spectrum(IidSpins(5, 0.5)).dim == 32
    with pytest.raises(BudgetExceededError):
        synthetic_spectrum(IidSpins(40))


def test_concentrated_expdos_concentrates_gibbs_mass():
    spectrum, plan = canonical_setup(64, 1.0)
    r_i, r_m, r_p = block_weights(spectrum, plan, gibbs_state(spectrum, 1.0)[0])
    assert r_i >= 0.95
    assert r_m + r_p < 0.05
    assert concentrated_expdos(64, 1.0).n_particles == 1


# --------------------------------------------------------------- block plans

def test_symmetric_plan_geometry():
    spectrum, plan = symmetric_micro_setup(4)
    i_idx, p_idx = plan.validate(spectrum)
    e = spectrum.energies
    assert i_idx.size == 4 and p_idx.size == 16
    e_i, e_p, e_m = e[i_idx].mean(), e[p_idx].mean(), plan.e_minus(spectrum)
    assert e_i - e_m == pytest.approx(e_p - e_i)
    assert extraction_threshold(spectrum, plan) == pytest.approx(e_i - e_m)


def test_plan_error_suggests_nearest_g():
    spectrum = synthetic_spectrum(doubling_expdos(5))
    with pytest.raises(PlanError) as info:
        plan_blocks(spectrum, 3.0, 3)
    assert info.value.suggested_g in (2, 4)
    assert plan_blocks(spectrum, 3.0, info.value.suggested_g).g == info.value.suggested_g


def test_plan_validation_catches_bad_windows():
    spectrum = synthetic_spectrum(doubling_expdos(5))
    assert BlockPlan(EnergyWindow(2, 2), EnergyWindow(3, 3), 0, 2).validate(spectrum)
    bad = BlockPlan(EnergyWindow(2, 2), EnergyWindow(4, 4), 0, 2)
    with pytest.raises(PlanError):
        bad.validate(spectrum)
    above = BlockPlan(EnergyWindow(2, 2), EnergyWindow(4, 4), 5, 2)
    with pytest.raises(PlanError):
        above.validate(Spectrum(np.append(spectrum.energies[:5], 0.0)))


def test_block_permutation_is_an_involution():
    spectrum, plan = symmetric_micro_setup(4)
    perm = block_permutation(spectrum, plan)
    assert np.array_equal(perm.images[perm.images], np.arange(perm.dim))
    moved = np.count_nonzero(perm.images != np.arange(perm.dim))
    assert moved == 2 * (4 + 16)


# ---------------------------------------------------------------- regimes

@pytest.mark.parametrize("g", [2, 4, 8])
def test_microcanonical_output(g):
    spectrum, plan = symmetric_micro_setup(g)
    ch = build_block_catalytic(spectrum, plan, Microcanonical())
    out = apply_channel(ch, ch.reference).probs
    target = 0.5 * microcanonical_state(spectrum, plan.window_Iplus)[0].probs
    target[plan.ground_index] += 0.5
    assert 0.5 * np.abs(out - target).sum() <= 1e-12
    assert ch.catalytic_residual <= 1e-12


def test_microcanonical_channel_is_not_gibbs_catalytic():
    spectrum, plan = symmetric_micro_setup(2)
    ch = build_block_catalytic(spectrum, plan, Microcanonical(beta=1.0))
    with pytest.raises(NotCatalyticError):
        jarzynski_bound(ch)


@pytest.mark.parametrize("g,beta", [(4, 1.0), (8, 0.5), (16, 2.0)])
def test_canonical_top_weight_formula(g, beta):
    spectrum, plan = canonical_setup(g, beta)
    ch = build_block_catalytic(spectrum, plan, Canonical(beta))
    r = block_weights(spectrum, plan, ch.gibbs())
    assert ch.sigma_C.probs[-1] == pytest.approx(top_catalyst_weight(*r), abs=1e-10)
    assert ch.catalytic_residual <= 1e-10
    other = build_block_catalytic(spectrum, plan, Canonical(beta, method="eigen_null_space"))
    assert np.allclose(other.sigma_C.probs, ch.sigma_C.probs, atol=1e-9)


def test_canonical_regime_rejects_infinite_temperature():
    spectrum, plan = symmetric_micro_setup(2)
    with pytest.raises(DomainError):
        build_block_catalytic(spectrum, plan, Canonical(0.0))
    with pytest.raises(DomainError):
        build_block_catalytic(spectrum, plan, "grand")


def test_canonical_window_default_width():
    spectrum = synthetic_spectrum(doubling_expdos(5))
    w = canonical_window(spectrum, 0.3, n_particles=4)
    mean = float(np.dot(gibbs_state(spectrum, 0.3)[0].probs, spectrum.energies))
    assert w.hi == pytest.approx(mean) and w.width == pytest.approx(1.0)


# --------------------------------------------------------------- bounds

def test_bound_report_on_toy():
    ch = build_toy_channel(1.0, 2.0)
    rep = jarzynski_bound(ch)
    assert rep.holds
    assert rep.bound_dim == 2
    assert rep.jarzynski_avg <= rep.bound_sigma + 1e-12
    assert set(rep.as_dict()) >= {"jarzynski_avg", "bound_sigma", "bound_omega", "holds"}


@given(st.integers(0, 10**6))
def test_random_catalytic_channels_obey_bounds(seed):
    ch = random_catalytic_channel(np.random.default_rng(seed))
    rep = jarzynski_bound(ch)
    assert rep.holds
    dist = tpm.work_distribution(tpm.joint_outcome_distribution(ch))
    assert tpm.average_work(dist) <= 1e-9
    for eps in np.linspace(0, 3, 7):
        assert tpm.work_tail(dist, eps) <= rep.tail_bound(ch.beta, eps) + 1e-9


@given(st.integers(0, 10**6))
def test_unital_channels_respect_window_tail_bound(seed):
    rng = np.random.default_rng(seed)
    spectrum, plan = symmetric_micro_setup(2)
    d = spectrum.dim
    perms = [PermutationMap(rng.permutation(d)) for _ in range(3)]
    ch = make_random_unitary_channel(spectrum, 1.0, perms, rng.dirichlet(np.ones(3)))
    omega_i = microcanonical_state(spectrum, plan.window_I)[0]
    dist = tpm.work_distribution(tpm.joint_outcome_distribution(ch, omega_i))
    for thr in (0.5, 1.0, 2.0):
        assert tpm.work_tail(dist, thr) <= unital_tail_bound(spectrum, plan.window_I, thr) + 1e-12


def test_min_entropy_audit():
    spectrum, plan = symmetric_micro_setup(8)
    audit = min_entropy_audit(build_block_catalytic(spectrum, plan, Microcanonical()))
    assert audit["s_min_initial"] == pytest.approx(math.log(8))
    assert audit["s_min_final"] == pytest.approx(math.log(2))
    u = make_unitary_channel(Spectrum([0.0, 1.0, 2.0]), 1.0, unitary_group.rvs(3, random_state=2))
    assert abs(min_entropy_audit(u)["delta"]) <= 1e-12


def test_gp_mix_is_gibbs_preserving_mixture(rng):
    spectrum = Spectrum([0.0, 0.5, 1.5])
    ch = make_gp_mix(spectrum, 1.0, 0.3)
    omega = gibbs_state(spectrum, 1.0)[0].probs
    p = rng.dirichlet(np.ones(3))
    out = apply_channel(ch, ClassicalState(p)).probs
    assert np.allclose(out, 0.3 * p + 0.7 * omega, atol=1e-15)
    assert classify_channel(ch).is_gibbs_preserving
    assert ch.catalytic_residual <= 1e-15
    with pytest.raises(DomainError):
        make_gp_mix(spectrum, 1.0, 1.5)


# ------------------------------------------------------------- tail curves

@pytest.mark.parametrize("family", ["fully_thermalizing", "gp_mix"])
def test_compressed_tail_matches_expanded_channel(family):
    n, a, beta = 5, 0.25, 0.7
    spectrum = synthetic_spectrum(IidSpins(n))
    if family == "fully_thermalizing":
        ch = make_fully_thermalizing(spectrum, beta)
    else:
        ch = make_gp_mix(spectrum, beta, 0.5)
    dist = tpm.work_distribution(tpm.joint_outcome_distribution(ch))
    expanded = tpm.work_tail(dist, a, n_particles=n)
    (_, p, _), = nmw_tail_curve(IidSpins(1), family, a, [n], beta=beta, lam=0.5)
    assert p == pytest.approx(expanded, rel=1e-12)


def test_random_unital_family_matches_explicit_mixture():
    n, beta = 4, 0.9
    spectrum = synthetic_spectrum(IidSpins(n))
    e, lm = compressed_levels(IidSpins(n))
    weights = (0.2, 0.5, 0.3)
    lp = log_tail_levels(e, lm, beta, "random_unital", 1.0, weights=weights)
    d = spectrum.dim
    # reversal maps state index k to d-1-k, which reverses the sorted binomial spectrum
    rev = PermutationMap(np.arange(d)[::-1])
    ident = PermutationMap.identity(d)
    mixed = make_random_unitary_channel(spectrum, beta, [ident, rev], [0.2 / 0.5, 0.3 / 0.5])
    dist_pr = tpm.work_distribution(tpm.joint_outcome_distribution(mixed))
    omega = gibbs_state(spectrum, beta)[0].probs
    dep = sum(omega[i] / d for i in range(d) for f in range(d)
              if spectrum.energies[i] - spectrum.energies[f] >= 1.0 - 1e-12)
    assert math.exp(lp) == pytest.approx(0.5 * tpm.work_tail(dist_pr, 1.0) + 0.5 * dep, rel=1e-12)


def test_tail_curve_rejects_unknown_family():
    with pytest.raises(DomainError):
        nmw_tail_curve(IidSpins(1), "mystery", 0.25, [8])


def test_random_unital_curve_decays():
    curve = nmw_tail_curve(IidSpins(1), "random_unital", 0.25, [8, 32, 128], seed=3)
    logs = [c[2] for c in curve]
    assert logs[0] > logs[1] > logs[2]


@pytest.mark.parametrize("beta_delta", [0.1, math.log(2), 1.0, 5.0])
def test_toy_zero_work_atom(beta_delta):
    f = toy_closed_forms(1.0, beta_delta)
    z = f["Z"]
    assert f["p0"] + f["p_plus"] + f["p_minus"] == pytest.approx(1.0, abs=1e-15)
    assert f["p0"] == pytest.approx((z * z - 2 * z + 5) / (z * (z + 1)), rel=1e-14)
    # the form Z+3+2(Z-2)(Z-1) over Z(Z+1) exceeds this by (Z-1)(Z-2)/(Z(Z+1)),
    # so it only normalises at Z = 2
    other = (z + 3 + 2 * (z - 2) * (z - 1)) / (z * (z + 1))
    assert other - f["p0"] == pytest.approx((z - 1) * (z - 2) / (z * (z + 1)), rel=1e-10)
