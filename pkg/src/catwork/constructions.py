"""Explicit catalytic channels, synthetic many-body spectra and the audits run on them.

The block construction moves a window ``I`` of ``g`` eigenstates, paired
with a ``g + 1`` level catalyst, onto either a single low eigenstate
``E_minus`` or a window ``I_plus`` of ``g**2`` eigenstates::

    (I, top) <-> (E_minus, rest)      g entries
    (I, rest) <-> (I_plus, top)       g**2 entries

Here "top" is the last catalyst level and "rest" the other ``g``. Every other
joint basis state is left in place.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.special import gammaln, logsumexp

from ._validation import check_beta, check_positive_int
from .channels import (
    CATALYTIC_TOL,
    DilatedChannel,
    JointUnitary,
    apply_channel,
    catalyst_fixed_point,
    make_fully_thermalizing,
)
from .exceptions import BudgetExceededError, DomainError, NotCatalyticError, PlanError
from .qcore import (
    ClassicalState,
    EnergyWindow,
    PermutationMap,
    Spectrum,
    gibbs_state,
    microcanonical_state,
    state_functionals,
    trace_distance,
)
from . import tpm

MAX_LEVEL_BUDGET = 10**7


# --------------------------------------------------------------------------
# Toy channel
# --------------------------------------------------------------------------

def toy_catalyst(delta, beta):
    x = math.exp(-beta * delta)
    z = 2.0 + x
    return np.array([(1.0 + x) / (z + 1.0), 2.0 / (z + 1.0)])


def toy_permutation():
    # joint index 2*s + c; e1f1 <-> e2f2 and e2f1 <-> e3f2
    return PermutationMap.from_swaps(6, [(0, 3), (2, 5)])


def build_toy_channel(delta, beta):
    """Three-level system ``{0, 0, delta}`` with a two-level catalyst.

    The catalyst ``((Z-1)/(Z+1), 2/(Z+1))`` with ``Z = 2 + exp(-beta delta)``
    is the unique state restored on the Gibbs input.
    """
    beta = check_beta(beta)
    if not delta >= 0:
        raise DomainError(f"delta must be >= 0, got {delta!r}")
    spectrum = Spectrum([0.0, 0.0, float(delta)])
    return DilatedChannel(
        spectrum, 2, JointUnitary(permutation=toy_permutation()),
        ClassicalState(toy_catalyst(delta, beta)), beta,
    )


def toy_closed_forms(delta, beta):
    """Closed-form work atoms and Jarzynski average of the toy channel.

    Written in ``x = exp(-beta delta) = Z - 2`` to avoid cancellation at large ``beta delta``.
    """
    x = math.exp(-beta * delta)
    z = 2.0 + x
    zz = z * (z + 1.0)
    return {
        "Z": z,
        # (Z^2 - 2Z + 5) / (Z(Z+1)), the complement of the two nonzero atoms
        "p0": (5.0 + x * (2.0 + x)) / zz,
        "p_plus": 2.0 * x / zz,
        "p_minus": (1.0 + x) / zz,
        "jarzynski": (z + 5.0 + 2.0 * x * (1.0 + x)) / zz,
    }


# --------------------------------------------------------------------------
# Synthetic spectra
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class IidSpins:
    """``n_particles`` independent two-level systems with level spacing ``gap``."""

    n_particles: int
    gap: float = 1.0

    def __post_init__(self):
        check_positive_int(self.n_particles, "n_particles")
        if not self.gap > 0:
            raise DomainError("gap must be positive")


@dataclass(frozen=True)
class ExpDos:
    """Exponential density of states on a uniform level grid.

    The cumulative count below total energy ``E`` follows
    ``exp(integral of slope)`` from ``N * e_min``, so a constant
    ``entropy_slope`` gives ``g((-inf, E]) = exp(slope * (E - N e_min))``.
    ``entropy_slope`` may instead be a sequence of ``(x_start, slope)`` pairs:
    piecewise-constant slopes switching at energy density ``x_start``.
    Levels sit at ``N e_min + k * level_spacing`` up to ``N e_max``; the default
    spacing ``ln 2 / slope`` doubles the cumulative count per level. Counts
    are rounded down with the remainder carried to the next level.
    """

    n_particles: int
    entropy_slope: float | tuple
    e_min: float
    e_max: float
    level_budget: int = 10**6
    level_spacing: float | None = None

    def __post_init__(self):
        check_positive_int(self.n_particles, "n_particles")
        check_positive_int(self.level_budget, "level_budget", minimum=2)
        if not self.e_min <= self.e_max:
            raise DomainError("e_min must not exceed e_max")
        pieces = self.slope_pieces()
        if any(s <= 0 for _, s in pieces):
            raise DomainError("entropy slopes must be positive")
        if self.level_spacing is not None and not self.level_spacing > 0:
            raise DomainError("level_spacing must be positive")

    def slope_pieces(self):
        if np.ndim(self.entropy_slope) == 0:
            return [(self.e_min, float(self.entropy_slope))]
        pieces = sorted((float(x), float(s)) for x, s in self.entropy_slope)
        return pieces

    def spacing(self):
        if self.level_spacing is not None:
            return float(self.level_spacing)
        return math.log(2.0) / self.slope_pieces()[0][1]


# either kind of synthetic many-body spectrum
ManyBodyModel = IidSpins | ExpDos


def _log_cumulative(model, energies):
    n = model.n_particles
    lo = n * model.e_min
    pieces = model.slope_pieces()
    starts = [max(lo, n * x) for x, _ in pieces]
    starts[0] = lo
    ends = starts[1:] + [np.inf]
    out = np.zeros_like(energies)
    for (_, s), a, b in zip(pieces, starts, ends):
        out += s * np.clip(np.minimum(energies, b) - a, 0.0, None)
    return out


def _expdos_levels(model):
    n = model.n_particles
    lo, hi = n * model.e_min, n * model.e_max
    h = model.spacing()
    k_max = int(math.floor((hi - lo) / h + 1e-9))
    energies = lo + h * np.arange(k_max + 1)
    log_t = _log_cumulative(model, energies)
    if log_t[-1] > math.log(model.level_budget) + 1.0:
        raise BudgetExceededError(
            f"ExpDos would emit about {math.exp(log_t[-1]):.3g} states, budget {model.level_budget}"
        )
    target = np.exp(log_t)
    counts = np.zeros(energies.size, dtype=np.int64)
    assigned = 0
    for k, t in enumerate(target):
        c = int(math.floor(t - assigned + 1e-9 * max(1.0, t)))
        counts[k] = max(c, 0)
        assigned += counts[k]
    if assigned > model.level_budget:
        raise BudgetExceededError(f"ExpDos emits {assigned} states, budget {model.level_budget}")
    keep = counts > 0
    return energies[keep], counts[keep]


def compressed_levels(model, n_particles=None):
    """Distinct energies and log-multiplicities, without expanding the spectrum."""
    if n_particles is not None:
        model = replace(model, n_particles=n_particles)
    if isinstance(model, IidSpins):
        n = model.n_particles
        k = np.arange(n + 1)
        log_mult = gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1)
        return k * model.gap, log_mult
    if isinstance(model, ExpDos):
        energies, counts = _expdos_levels(model)
        return energies, np.log(counts)
    raise DomainError(f"unknown model {model!r}")


def synthetic_spectrum(model):
    """Expanded spectrum of a many-body model, ascending in energy."""
    if isinstance(model, IidSpins):
        if 2**model.n_particles > MAX_LEVEL_BUDGET:
            raise BudgetExceededError(
                f"2^{model.n_particles} states exceed the budget {MAX_LEVEL_BUDGET}; "
                "use compressed_levels"
            )
        n = model.n_particles
        counts = [math.comb(n, k) for k in range(n + 1)]
        return Spectrum(np.repeat(np.arange(n + 1) * model.gap, counts))
    if isinstance(model, ExpDos):
        if model.level_budget > MAX_LEVEL_BUDGET:
            raise BudgetExceededError(f"level_budget above {MAX_LEVEL_BUDGET}")
        energies, counts = _expdos_levels(model)
        return Spectrum(np.repeat(energies, counts))
    raise DomainError(f"unknown model {model!r}")


def concentrated_expdos(g, beta, n_particles=1, leak=0.01, level_spacing=None):
    """Two-slope ExpDos whose Gibbs state sits mostly on one level of ``g`` states.

    A single ground state is followed one level up by ``g`` states, after which
    the density of states grows at ``leak * beta``: slow enough that the
    ``g**2`` states needed above carry little thermal weight.
    """
    g = check_positive_int(g, "g", minimum=2)
    beta = check_beta(beta, allow_zero=False)
    h = level_spacing if level_spacing is not None else 0.1 / beta
    n = n_particles
    s1 = math.log(g + 1.0) / h
    s2 = leak * beta
    span = h + math.log(1.05 * (g + 1.0 + g * g) / (g + 1.0)) / s2
    return ExpDos(
        n_particles=n,
        entropy_slope=((0.0, s1), (h / n, s2)),
        e_min=0.0,
        e_max=span / n,
        level_budget=max(4 * (g * g + g + 1), 1000),
        level_spacing=h,
    )


# --------------------------------------------------------------------------
# Block plans and the block-permutation channel
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class BlockPlan:
    """Windows ``I`` (``g`` states) and ``I_plus`` (``g**2`` states) and the index of ``E_minus``."""

    window_I: EnergyWindow
    window_Iplus: EnergyWindow
    ground_index: int
    g: int

    def indices(self, spectrum):
        """Eigenstate indices of ``I`` and ``I_plus``, ordered by energy then index."""
        e = spectrum.energies
        out = []
        for w in (self.window_I, self.window_Iplus):
            idx = np.nonzero(w.mask(spectrum))[0]
            out.append(idx[np.lexsort((idx, e[idx]))])
        return out[0], out[1]

    def validate(self, spectrum):
        i_idx, p_idx = self.indices(spectrum)
        e = spectrum.energies
        if i_idx.size != self.g or p_idx.size != self.g**2:
            raise PlanError(
                f"plan expects {self.g} and {self.g**2} states, spectrum has {i_idx.size} and {p_idx.size}"
            )
        if np.intersect1d(i_idx, p_idx).size:
            raise PlanError("windows I and I_plus overlap")
        if self.ground_index in i_idx or self.ground_index in p_idx:
            raise PlanError("E_minus lies inside a window")
        if not e[self.ground_index] < self.window_I.lo:
            raise PlanError("E_minus must lie below window I")
        return i_idx, p_idx

    def e_minus(self, spectrum):
        return float(spectrum.energies[self.ground_index])

    def as_dict(self):
        return {
            "window_I": [self.window_I.lo, self.window_I.hi],
            "window_Iplus": [self.window_Iplus.lo, self.window_Iplus.hi],
            "ground_index": self.ground_index,
            "g": self.g,
        }


def _runs_with_count(counts, target, start_min=0):
    """Contiguous level runs ``(j, k)`` (inclusive) with total count ``target``."""
    csum = np.concatenate(([0], np.cumsum(counts)))
    runs = []
    for j in range(start_min, counts.size):
        k = np.searchsorted(csum, csum[j] + target) - 1
        if j <= k < counts.size and csum[k + 1] - csum[j] == target:
            runs.append((j, k))
    return runs


def _find_plan(spectrum, e_target, g, symmetric):
    levels, counts = spectrum.levels()
    runs_i = _runs_with_count(counts, g)
    if not runs_i:
        return None
    # window I: hi closest to the target, then narrowest
    runs_i.sort(key=lambda r: (abs(levels[r[1]] - e_target), levels[r[1]] - levels[r[0]]))
    for j, k in runs_i:
        runs_p = _runs_with_count(counts, g * g, start_min=k + 1)
        singles = [m for m in range(j) if counts[m] == 1]
        if not runs_p or not singles:
            continue
        jp, kp = runs_p[0]
        win_i = EnergyWindow(float(levels[j]), float(levels[k]))
        win_p = EnergyWindow(float(levels[jp]), float(levels[kp]))
        if symmetric:
            e_mid = 0.5 * (win_i.lo + win_i.hi)
            e_plus = 0.5 * (win_p.lo + win_p.hi)
            want = 2.0 * e_mid - e_plus
            m = min(singles, key=lambda m: (abs(levels[m] - want), -levels[m]))
        else:
            m = singles[0]
        ground = int(np.nonzero(spectrum.energies == levels[m])[0][0])
        return BlockPlan(win_i, win_p, ground, int(g))
    return None


def plan_blocks(spectrum, e_target, g, symmetric=False):
    """Choose windows ``I`` (``g`` states, upper edge near ``e_target``) and ``I_plus`` (``g**2``).

    ``I_plus`` is the lowest window above ``I`` with exactly ``g**2`` states and
    ``E_minus`` a nondegenerate level below ``I``: the lowest one, or in
    symmetric mode the one making the gained and invested work equal.
    Windows are unions of whole degenerate levels.
    """
    g = check_positive_int(g, "g")
    plan = _find_plan(spectrum, e_target, g, symmetric)
    if plan is not None:
        return plan
    feasible = [h for h in range(1, int(math.isqrt(spectrum.dim)) + 1)
                if h != g and _find_plan(spectrum, e_target, h, symmetric) is not None]
    nearest = min(feasible, key=lambda h: (abs(h - g), h)) if feasible else None
    hint = f"; nearest achievable g is {nearest}" if nearest is not None else ""
    raise PlanError(f"no windows with exactly {g} and {g * g} states{hint}", nearest)


def block_permutation(spectrum, plan):
    """The joint permutation of the block construction, catalyst dimension ``g + 1``."""
    i_idx, p_idx = plan.validate(spectrum)
    g = plan.g
    d_c = g + 1
    top = g
    m = plan.ground_index
    pairs = []
    for a, i in enumerate(i_idx):
        pairs.append((int(i) * d_c + top, m * d_c + a))
        for c in range(g):
            pairs.append((int(i) * d_c + c, int(p_idx[a * g + c]) * d_c + top))
    return PermutationMap.from_swaps(spectrum.dim * d_c, pairs)


@dataclass(frozen=True)
class Microcanonical:
    """Input is the uniform state on window ``I``; ``beta`` only labels the channel."""

    beta: float = 1.0


@dataclass(frozen=True)
class Canonical:
    """Gibbs input at ``beta``; the catalyst is solved as a fixed point."""

    beta: float
    delta: float | None = None
    method: str = "power_iteration"


def block_weights(spectrum, plan, state):
    """``(r(I), r_minus, r(I_plus))``: weight of ``state`` on the three blocks."""
    i_idx, p_idx = plan.indices(spectrum)
    p = state.probs
    return float(p[i_idx].sum()), float(p[plan.ground_index]), float(p[p_idx].sum())


def top_catalyst_weight(r_i, r_minus, r_plus):
    """Weight the catalyst's top level must carry for the block channel to be catalytic."""
    return (r_i + r_minus) / (2.0 * r_i + r_minus + r_plus)


def build_block_catalytic(spectrum, plan, regime):
    """Block-permutation catalytic channel in the microcanonical or canonical regime."""
    perm = block_permutation(spectrum, plan)
    g = plan.g
    unitary = JointUnitary(permutation=perm)
    if isinstance(regime, Microcanonical):
        sigma = np.full(g + 1, 0.5 / g)
        sigma[g] = 0.5
        omega_i, _ = microcanonical_state(spectrum, plan.window_I)
        return DilatedChannel(spectrum, g + 1, unitary, ClassicalState(sigma), regime.beta,
                              reference=omega_i)
    if isinstance(regime, Canonical):
        beta = check_beta(regime.beta, allow_zero=False)
        omega = gibbs_state(spectrum, beta)[0]
        sigma, _ = catalyst_fixed_point(unitary, omega, g + 1, method=regime.method)
        return DilatedChannel(spectrum, g + 1, unitary, sigma, beta)
    raise DomainError(f"unknown regime {regime!r}")


def extraction_threshold(spectrum, plan, n_particles=1):
    """Smallest work per particle of a transition from ``I`` down to ``E_minus``."""
    return (plan.window_I.lo - plan.e_minus(spectrum)) / n_particles


def canonical_window(spectrum, beta, n_particles=1, delta=None, level_spacing=None):
    """``[<E> - delta sqrt(N), <E>]`` around the thermal mean energy.

    ``delta`` defaults to one level spacing per ``sqrt(N)``.
    """
    omega = gibbs_state(spectrum, beta)[0]
    mean = float(np.dot(omega.probs, spectrum.energies))
    if delta is None:
        if level_spacing is None:
            levels = spectrum.levels()[0]
            level_spacing = float(np.min(np.diff(levels))) if levels.size > 1 else 0.0
        delta = level_spacing / math.sqrt(n_particles)
    return EnergyWindow(mean - delta * math.sqrt(n_particles), mean)


# --------------------------------------------------------------------------
# Bounds and audits
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class BoundReport:
    jarzynski_avg: float
    bound_sigma: float
    bound_omega: float
    bound_dim: float

    @property
    def holds(self):
        best = min(self.bound_sigma, self.bound_omega)
        return self.jarzynski_avg <= best + 1e-9 and best <= self.bound_dim + 1e-9

    def tail_bound(self, beta, threshold):
        """Upper bound on ``P(W >= threshold)`` implied by ``bound_sigma``."""
        return self.bound_sigma * math.exp(-beta * threshold)

    def as_dict(self):
        return {
            "jarzynski_avg": self.jarzynski_avg,
            "bound_sigma": self.bound_sigma,
            "bound_omega": self.bound_omega,
            "bound_dim": self.bound_dim,
            "holds": self.holds,
        }


def _gibbs_catalytic_residual(ch):
    omega = ch.gibbs()
    if trace_distance(ch.reference, omega) == 0.0:
        return ch.catalytic_residual
    return DilatedChannel(ch.spectrum, ch.dC, ch.unitary, ch.sigma_C, ch.beta).catalytic_residual


def jarzynski_bound(ch, tol=CATALYTIC_TOL):
    """Jarzynski average against ``d_C ||sigma||_inf``, ``d ||omega||_inf`` and ``min(d_C, d)``."""
    residual = _gibbs_catalytic_residual(ch)
    if residual > tol:
        raise NotCatalyticError(
            f"catalyst is not restored on the Gibbs input (residual {residual:.3e} > {tol:.1e})"
        )
    omega = ch.gibbs()
    return BoundReport(
        jarzynski_avg=tpm.exponential_work_average(ch),
        bound_sigma=ch.dC * float(ch.sigma_C.eigenvalues().max()),
        bound_omega=ch.dS * float(omega.probs.max()),
        bound_dim=float(min(ch.dC, ch.dS)),
    )


def min_entropy_audit(ch):
    """Min-entropy of the channel's reference input and of its image."""
    s_in = state_functionals(ch.reference)["min_entropy"]
    s_out = state_functionals(apply_channel(ch, ch.reference))["min_entropy"]
    return {"s_min_initial": s_in, "s_min_final": s_out, "delta": s_out - s_in}


def unital_tail_bound(spectrum, window, threshold):
    """``g(E <= hi - threshold) / g(I)``: caps ``P(W >= threshold)`` for any unital channel on ``Omega(I)``."""
    g_i = window.count(spectrum)
    if g_i == 0:
        raise DomainError("empty window")
    tol = 1e-9 * float(np.abs(spectrum.energies).max())
    below = int((spectrum.energies <= window.hi - threshold + tol).sum())
    return below / g_i


def make_gp_mix(spectrum, beta, lam):
    """``lam * id + (1 - lam) * fully thermalizing``, dilated with a ``d + 1`` level catalyst.

    Catalyst levels ``0..d-1`` hold a thermal copy of the system (weight
    ``1 - lam``) and are swapped in; level ``d`` (weight ``lam``) does nothing.
    """
    if not 0.0 <= lam <= 1.0:
        raise DomainError("lam must lie in [0, 1]")
    d = spectrum.dim
    omega = gibbs_state(spectrum, beta)[0]
    d_c = d + 1
    s, c = np.divmod(np.arange(d * d_c), d_c)
    images = np.where(c < d, c * d_c + s, s * d_c + c)
    sigma = np.append((1.0 - lam) * omega.probs, lam)
    return DilatedChannel(spectrum, d_c, JointUnitary.from_permutation(images),
                          ClassicalState.from_weights(sigma), beta)


# --------------------------------------------------------------------------
# Work tails of Gibbs-preserving and unital families on large spectra
# --------------------------------------------------------------------------

_FAMILIES = ("fully_thermalizing", "gp_mix", "random_unital")


def _log_cdf(energies, log_q, thresholds):
    """``log Q(E <= t)`` for each threshold; energies ascending."""
    cum = np.logaddexp.accumulate(log_q)
    pos = np.searchsorted(energies, thresholds, side="right") - 1
    return np.where(pos >= 0, cum[np.clip(pos, 0, None)], -np.inf)


def log_tail_levels(energies, log_mult, beta, family, threshold, lam=0.5, weights=None):
    """``log P(W >= threshold)`` for a Gibbs input on a level-compressed spectrum.

    ``family`` acts on level populations: ``fully_thermalizing`` replaces them
    by the Gibbs populations, ``gp_mix`` mixes that with the identity at
    weight ``lam``, and ``random_unital`` mixes identity, complete
    depolarisation and (for spectra symmetric under reversal) the reversal
    map with ``weights``.
    """
    order = np.argsort(energies)
    e, lm = energies[order], log_mult[order]
    log_p = lm - beta * e
    log_p -= logsumexp(log_p)
    tol = 1e-9 * max(1.0, float(np.abs(e).max()))
    cut = e - threshold + tol
    identity_ok = threshold <= tol

    def product_tail(log_q):
        return logsumexp(log_p + _log_cdf(e, log_q, cut))

    terms = []
    if family == "fully_thermalizing":
        return float(product_tail(log_p))
    if family == "gp_mix":
        if lam < 1.0:
            terms.append(math.log1p(-lam) + product_tail(log_p))
        if identity_ok and lam > 0:
            terms.append(math.log(lam))
    elif family == "random_unital":
        w_id, w_dep, w_rev = weights
        if identity_ok and w_id > 0:
            terms.append(math.log(w_id))
        if w_dep > 0:
            log_u = lm - logsumexp(lm)
            terms.append(math.log(w_dep) + product_tail(log_u))
        if w_rev > 0:
            # reversal sends level k to level L-1-k; a permutation only if multiplicities mirror
            if not np.allclose(lm, lm[::-1]) or not np.allclose(e + e[::-1], e[0] + e[-1]):
                raise DomainError("reversal map needs a mirror-symmetric spectrum")
            ok = e - e[::-1] >= threshold - tol
            if ok.any():
                terms.append(math.log(w_rev) + logsumexp(log_p[ok]))
    else:
        raise DomainError(f"unknown channel family {family!r}; expected one of {_FAMILIES}")
    return float(logsumexp(terms)) if terms else -math.inf


def nmw_tail_curve(model, channel_family, a, n_list, beta=1.0, lam=0.5, seed=0):
    """``(N, p(w >= a), log p)`` for each ``N``, with degeneracy-compressed exact sums.

    ``random_unital`` draws its mixture weights once from ``seed``.
    """
    beta = check_beta(beta)
    weights = None
    if channel_family == "random_unital":
        weights = tuple(np.random.default_rng(seed).dirichlet(np.ones(3)))
        if not isinstance(model, IidSpins):
            weights = (weights[0], weights[1] + weights[2], 0.0)
    out = []
    for n in n_list:
        energies, log_mult = compressed_levels(model, n_particles=int(n))
        lp = log_tail_levels(energies, log_mult, beta, channel_family, a * n,
                             lam=lam, weights=weights)
        out.append((int(n), math.exp(lp), lp))
    return out


def fully_thermalizing_channel(spectrum, beta):
    return make_fully_thermalizing(spectrum, beta)


def doubling_expdos(top_level):
    """ExpDos with level counts ``1, 1, 2, 4, ...`` on unit spacing, up to level ``top_level``.

    For ``g = 2**j`` the level ``j + 1`` holds ``g`` states, level ``2j + 1``
    holds ``g**2``, and level 1 is a single state at equal distance below,
    which is what a symmetric block plan needs.
    """
    top_level = check_positive_int(top_level, "top_level")
    return ExpDos(n_particles=1, entropy_slope=math.log(2.0), e_min=0.0, e_max=float(top_level),
                  level_budget=max(2**top_level + 1, 2), level_spacing=1.0)


def symmetric_micro_setup(g):
    """Spectrum and symmetric block plan for ``g`` a power of two."""
    g = check_positive_int(g, "g", minimum=2)
    j = int(round(math.log2(g)))
    if 2**j != g:
        raise DomainError(f"g must be a power of two, got {g}")
    spectrum = synthetic_spectrum(doubling_expdos(2 * j + 1))
    plan = plan_blocks(spectrum, float(j + 1), g, symmetric=True)
    return spectrum, plan


def canonical_setup(g, beta):
    """Spectrum and block plan on :func:`concentrated_expdos`, ``I`` being its ``g``-fold level."""
    spectrum = synthetic_spectrum(concentrated_expdos(g, beta))
    levels, counts = spectrum.levels()
    e_target = float(levels[np.nonzero(counts == g)[0][0]])
    return spectrum, plan_blocks(spectrum, e_target, g)


def random_catalytic_channel(rng, max_joint=36, method="eigen_null_space"):
    """Random permutation dilation whose catalyst is a fixed point on the Gibbs input.

    Energies are drawn on a coarse grid so that degenerate levels occur.
    """
    while True:
        d_s = int(rng.integers(2, 7))
        d_c = int(rng.integers(1, max_joint // d_s + 1))
        if d_s * d_c <= max_joint:
            break
    energies = np.sort(rng.integers(0, 7, size=d_s) * 0.5)
    spectrum = Spectrum(energies)
    beta = float(rng.uniform(0.2, 3.0))
    unitary = JointUnitary.from_permutation(rng.permutation(d_s * d_c))
    omega = gibbs_state(spectrum, beta)[0]
    sigma, _ = catalyst_fixed_point(unitary, omega, d_c, method=method)
    return DilatedChannel(spectrum, d_c, unitary, sigma, beta)
