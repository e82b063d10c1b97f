"""Agents running the two-point measurement one after another with a shared catalyst.

Each agent brings a fresh copy of the system in the same initial state,
applies the same channel, and passes the catalyst on. Everything is
classical here: the joint unitary must be a permutation and the catalyst
state diagonal.

The exact backend keeps one *unnormalised* catalyst vector per work history.
Histories with the same work sequence are merged by adding their vectors,
which is exact because every later round acts linearly on the catalyst.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from ._validation import check_positive_int
from .channels import DilatedChannel
from .exceptions import BudgetExceededError, DomainError
from .qcore import ClassicalState, EnergyWindow, microcanonical_state, trace_distance
from .tpm import WorkDistribution, merge_atoms, merge_tolerance

BRANCH_BUDGET = 10**6
PRUNE_BELOW = 1e-15
MC_CHUNK = 10_000


@dataclass(frozen=True)
class ProtocolConfig:
    """Settings of the shared-catalyst protocol.

    ``initial_per_agent`` is ``"gibbs"`` or an :class:`EnergyWindow`, whose
    uniform state each agent then starts in. ``n_particles`` rescales the
    recorded works to work per particle.
    """

    channel: DilatedChannel
    n_agents: int
    initial_per_agent: str | EnergyWindow = "gibbs"
    backend: str = "exact"
    trials: int = 10**5
    seed: int = 0
    n_particles: int = 1
    branch_budget: int = BRANCH_BUDGET

    def __post_init__(self):
        check_positive_int(self.n_agents, "n_agents")
        check_positive_int(self.trials, "trials")
        check_positive_int(self.n_particles, "n_particles")
        if self.backend not in ("exact", "monte_carlo"):
            raise DomainError(f"backend must be 'exact' or 'monte_carlo', got {self.backend!r}")
        if self.branch_budget > BRANCH_BUDGET:
            raise DomainError(f"branch budget may not exceed {BRANCH_BUDGET}")
        if not (self.initial_per_agent == "gibbs" or isinstance(self.initial_per_agent, EnergyWindow)):
            raise DomainError("initial_per_agent must be 'gibbs' or an EnergyWindow")
        if not self.channel.is_quasi_classical:
            raise DomainError("the protocol needs a permutation unitary and a diagonal catalyst")

    def initial_state(self):
        if isinstance(self.initial_per_agent, EnergyWindow):
            return microcanonical_state(self.channel.spectrum, self.initial_per_agent)[0]
        return self.channel.gibbs()


@dataclass(frozen=True)
class JointWorkRecord:
    works: tuple
    prob: float


@dataclass(frozen=True)
class ExactResult:
    """Records in lexicographic work order plus the catalyst marginal after each round."""

    records: list
    catalyst_marginals: list
    sigma_C: ClassicalState
    n_agents: int


@dataclass(frozen=True)
class MonteCarloResult:
    samples: np.ndarray
    frequencies: list
    trials: int
    seed: int


@dataclass(frozen=True)
class _Transitions:
    """Per joint basis state: catalyst source/target, work atom id, and weight factor."""

    src_c: np.ndarray
    dst_c: np.ndarray
    label: np.ndarray
    p_s: np.ndarray
    atoms: np.ndarray
    d_c: int = field(default=1)


def _transitions(cfg):
    ch = cfg.channel
    d_c = ch.dC
    e = ch.spectrum.energies
    src = np.arange(ch.dS * d_c)
    dst = ch.unitary.permutation.images
    w = e[src // d_c] - e[dst // d_c]
    p_s = cfg.initial_state().probs[src // d_c]
    keep = p_s > 0
    atoms, _ = merge_atoms(w[keep], np.ones(keep.sum()), merge_tolerance(ch.spectrum))
    # atoms are the leftmost values of merged runs, so searchsorted(right) - 1 finds the run
    label = np.searchsorted(atoms, w + merge_tolerance(ch.spectrum) * 0.5, side="right") - 1
    return _Transitions(src % d_c, dst % d_c, np.clip(label, 0, None), p_s, atoms, d_c)


def run_exact(cfg):
    """Enumerate every work sequence of ``cfg.n_agents`` rounds exactly."""
    tr = _transitions(cfg)
    keep = tr.p_s > 0
    src_c, dst_c, label, p_s = tr.src_c[keep], tr.dst_c[keep], tr.label[keep], tr.p_s[keep]
    n_atoms = tr.atoms.size
    d_c = tr.d_c
    sigma = cfg.channel.sigma_C

    keys = np.zeros((1, 0), dtype=np.int64)  # one row of atom ids per branch
    vecs = sigma.probs[None, :].copy()       # unnormalised catalyst vector per branch
    marginals = []
    for _ in range(cfg.n_agents):
        n_branch = keys.shape[0]
        # mass[b, t] for every branch b and joint transition t
        mass = p_s[None, :] * vecs[:, src_c]
        slot = (np.arange(n_branch)[:, None] * n_atoms + label[None, :])
        new_vecs = np.zeros((n_branch * n_atoms, d_c))
        np.add.at(new_vecs, (slot.ravel(), np.broadcast_to(dst_c, mass.shape).ravel()), mass.ravel())
        alive = np.nonzero(new_vecs.sum(axis=1) > PRUNE_BELOW)[0]
        if alive.size * d_c > cfg.branch_budget:
            raise BudgetExceededError(
                f"exact enumeration needs {alive.size} branches x {d_c} catalyst levels, "
                f"budget {cfg.branch_budget}; use the monte_carlo backend"
            )
        parent, atom = np.divmod(alive, n_atoms)
        keys = np.column_stack([keys[parent], atom])
        vecs = new_vecs[alive]
        marginals.append(ClassicalState.from_weights(vecs.sum(axis=0) / vecs.sum()))

    probs = vecs.sum(axis=1)
    probs = probs / probs.sum()
    order = np.lexsort(keys.T[::-1])
    scale = float(cfg.n_particles)
    records = [JointWorkRecord(tuple((tr.atoms[keys[i]] / scale).tolist()), float(probs[i]))
               for i in order]
    return ExactResult(records, marginals, sigma, cfg.n_agents)


def _threads():
    try:
        return max(1, int(os.environ.get("CWL_THREADS", "1")))
    except ValueError:
        return 1


def _mc_chunk(tr, sigma, p_init, n_agents, trials, seed_seq):
    rng = np.random.default_rng(seed_seq)
    d_c = tr.d_c
    c = rng.choice(d_c, size=trials, p=sigma)
    out = np.empty((trials, n_agents), dtype=np.int64)
    cdf = np.cumsum(p_init)
    cdf[-1] = 1.0
    for k in range(n_agents):
        s = np.searchsorted(cdf, rng.random(trials), side="right")
        j = s * d_c + c
        out[:, k] = tr.label[j]
        c = tr.dst_c[j]
    return out


def run_monte_carlo(cfg):
    """Sample ``cfg.trials`` protocol runs.

    Trials are split into fixed chunks, each with its own stream spawned from
    ``cfg.seed``, so the output does not depend on ``CWL_THREADS``.
    """
    tr = _transitions(cfg)
    p_init = cfg.initial_state().probs
    sigma = cfg.channel.sigma_C.probs
    sizes = [MC_CHUNK] * (cfg.trials // MC_CHUNK)
    if cfg.trials % MC_CHUNK:
        sizes.append(cfg.trials % MC_CHUNK)
    streams = np.random.SeedSequence(cfg.seed).spawn(len(sizes))
    jobs = [(tr, sigma, p_init, cfg.n_agents, n, s) for n, s in zip(sizes, streams)]
    with ThreadPoolExecutor(max_workers=_threads()) as pool:
        parts = list(pool.map(lambda a: _mc_chunk(*a), jobs))
    labels = np.concatenate(parts, axis=0)
    uniq, counts = np.unique(labels, axis=0, return_counts=True)
    scale = float(cfg.n_particles)
    freq = [JointWorkRecord(tuple((tr.atoms[row] / scale).tolist()), float(n / cfg.trials))
            for row, n in zip(uniq, counts)]
    return MonteCarloResult(tr.atoms[labels] / scale, freq, cfg.trials, cfg.seed)


def run_protocol(cfg):
    return run_exact(cfg) if cfg.backend == "exact" else run_monte_carlo(cfg)


def total_variation(a, b):
    """Total-variation distance between two record lists keyed by work sequence."""
    pa = {r.works: r.prob for r in a}
    pb = {r.works: r.prob for r in b}
    keys = set(pa) | set(pb)
    return 0.5 * sum(abs(pa.get(k, 0.0) - pb.get(k, 0.0)) for k in keys)


def conditional(records, given, agent=1):
    """``P(w_agent | w_0 = given)`` as a :class:`WorkDistribution` (agents counted from 0)."""
    rows = [(r.works[agent], r.prob) for r in records if r.works[0] == given]
    if not rows:
        raise DomainError(f"no record with first work {given!r}")
    w, p = zip(*rows)
    p = np.asarray(p)
    return WorkDistribution.from_samples(w, p / p.sum())


def agent_marginals(records):
    n = len(records[0].works)
    probs = np.array([r.prob for r in records])
    works = np.array([r.works for r in records])
    return [WorkDistribution.from_samples(works[:, k], probs / probs.sum()) for k in range(n)]


def _marginal_spread(marginals):
    spread = 0.0
    for a, b in combinations(marginals, 2):
        support = np.union1d(a.w, b.w)
        da = np.array([a.prob(w, tol=0.0) for w in support])
        db = np.array([b.prob(w, tol=0.0) for w in support])
        spread = max(spread, float(np.abs(da - db).max()))
    return spread


def analyze_joint(result):
    """Summary statistics of exact records.

    ``result`` is an :class:`ExactResult`; a bare record list is accepted,
    in which case no catalyst residuals are reported.
    """
    if isinstance(result, ExactResult):
        records = result.records
        residuals = [trace_distance(m, result.sigma_C) for m in result.catalyst_marginals]
    else:
        records, residuals = list(result), []
    marginals = agent_marginals(records)
    works = np.array([r.works for r in records])
    probs = np.array([r.prob for r in records])
    signs = np.sign(works)
    nonzero = np.all(signs != 0, axis=1)
    alternating = nonzero & np.all(signs[:, 1:] * signs[:, :-1] < 0, axis=1)
    positive = np.all(works > 0, axis=1)
    starts_up = alternating & (signs[:, 0] > 0)
    return {
        "marginals": marginals,
        "catalyst_marginal_residuals": residuals,
        "alternation_mass": float(probs[alternating].sum()),
        "alternation_lambda": float(probs[starts_up].sum()),
        "all_positive_mass": float(probs[positive].sum()),
        "marginal_spread": _marginal_spread(marginals),
        "total_mass": float(probs.sum()),
    }
