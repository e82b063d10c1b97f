"""Two-point-measurement work statistics.

Extracted work is ``W = E_i - E_f``: positive when the measured system energy
drops. Outcomes are labelled by energy value, so degenerate eigenstates are
indistinguishable, as they are for the physical measurement.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse
from scipy.special import logsumexp

from ._validation import check_beta, check_positive_int, check_same_dim
from .channels import DilatedChannel, apply_channel
from .exceptions import DomainError
from .qcore import ClassicalState, DensityOperator, Spectrum

CROSS_CHECK_TOL = 1e-9


def merge_tolerance(spectrum):
    return 1e-9 * float(np.abs(spectrum.energies).max())


@dataclass(frozen=True, eq=False)
class JointOutcomeDistribution:
    """``P(E_f, E_i)`` over eigenbasis indices, stored sparse.

    ``probs`` accepts a dense ``d x d`` array indexed ``[f, i]`` or any scipy
    sparse matrix; it is kept as CSR.
    """

    spectrum: Spectrum
    probs: scipy.sparse.csr_matrix

    def __post_init__(self):
        d = self.spectrum.dim
        p = scipy.sparse.csr_matrix(self.probs, dtype=float)
        p.sum_duplicates()
        p.eliminate_zeros()
        if p.shape != (d, d):
            raise DomainError(f"joint table must be {d}x{d}, got {p.shape}")
        if (p.data.size and p.data.min() < -1e-15) or abs(p.sum() - 1.0) > 1e-10:
            raise DomainError("joint table is not a probability distribution")
        object.__setattr__(self, "probs", p)

    def dense(self):
        return self.probs.toarray()

    def initial_marginal(self):
        return np.asarray(self.probs.sum(axis=0)).ravel()

    def final_marginal(self):
        return np.asarray(self.probs.sum(axis=1)).ravel()

    def entries(self):
        """Index triplets ``(f, i, p)`` of the nonzero entries."""
        coo = self.probs.tocoo()
        return coo.row, coo.col, coo.data

    def by_energy(self):
        """Rows ``(E_i, E_f, p)`` aggregated over degenerate eigenstates, sorted."""
        e = self.spectrum.energies
        f, i, p = self.entries()
        acc = {}
        for ei, ef, pi in zip(e[i].tolist(), e[f].tolist(), p.tolist()):
            acc[(ei, ef)] = acc.get((ei, ef), 0.0) + pi
        return [(ei, ef, p) for (ei, ef), p in sorted(acc.items())]


@dataclass(frozen=True, eq=False)
class WorkDistribution:
    """Atoms ``(w, p)`` of a discrete work distribution, sorted by ``w``."""

    w: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        w = np.array(self.w, dtype=float).reshape(-1)
        p = np.array(self.p, dtype=float).reshape(-1)
        if w.shape != p.shape or w.size == 0:
            raise DomainError("work values and probabilities must be non-empty and aligned")
        if p.min() < 0 or abs(p.sum() - 1.0) > 1e-10:
            raise DomainError(f"work probabilities sum to {p.sum()!r}")
        order = np.argsort(w, kind="stable")
        w, p = w[order], p[order]
        w.setflags(write=False)
        p.setflags(write=False)
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "p", p)

    @classmethod
    def from_samples(cls, values, weights=None, merge_tol=0.0):
        values = np.asarray(values, dtype=float).reshape(-1)
        if weights is None:
            weights = np.full(values.size, 1.0 / values.size)
        w, p = merge_atoms(values, np.asarray(weights, dtype=float), merge_tol)
        return cls(w, p)

    def atoms(self):
        return list(zip(self.w.tolist(), self.p.tolist()))

    def prob(self, w, tol=1e-12):
        return float(self.p[np.abs(self.w - w) <= tol].sum())

    def __len__(self):
        return self.w.size


def merge_atoms(values, weights, merge_tol):
    """Sort ``values`` and merge neighbours closer than ``merge_tol``.

    Each merged atom takes the smallest value of its run.
    """
    values = np.asarray(values, dtype=float).ravel()
    weights = np.asarray(weights, dtype=float).ravel()
    keep = weights > 0
    order = np.argsort(values[keep], kind="stable")
    v, p = values[keep][order], weights[keep][order]
    if v.size == 0:
        raise DomainError("no atoms with positive probability")
    starts = np.concatenate(([0], np.nonzero(np.diff(v) > merge_tol)[0] + 1))
    return v[starts], np.add.reduceat(p, starts)


def transition_matrix(ch):
    """``T[f, i] = <E_f| C(|E_i><E_i|) |E_f>``; sparse on the permutation path."""
    d_s, d_c = ch.dS, ch.dC
    u = ch.unitary
    if ch.is_quasi_classical:
        src = np.arange(d_s * d_c)
        dst = u.permutation.images
        t = scipy.sparse.coo_matrix(
            (ch.sigma_C.probs[src % d_c], (dst // d_c, src // d_c)), shape=(d_s, d_s)
        )
        return t.tocsr()
    m = u.as_matrix().reshape(d_s, d_c, d_s, d_c)
    sigma = ch.sigma_C.to_density().matrix
    # T[f, i] = sum_{c', a, b} U[f,c',i,a] sigma[a,b] conj(U[f,c',i,b])
    return np.einsum("fcia,ab,fcib->fi", m, sigma, m.conj(), optimize=True).real


def _initial_probs(ch, initial):
    if isinstance(initial, DensityOperator):
        if not initial.is_diagonal():
            raise DomainError(
                "initial state has coherences in the energy basis; dephase it first "
                "(the first energy measurement would do so)"
            )
        initial = initial.diagonal()
    check_same_dim(initial.dim, ch.dS, "initial state and system")
    return initial.probs


def joint_outcome_distribution(ch, initial=None):
    """Joint distribution of the two energy outcomes; ``initial`` defaults to the Gibbs state."""
    if initial is None:
        initial = ch.gibbs()
    p = _initial_probs(ch, initial)
    t = transition_matrix(ch)
    if scipy.sparse.issparse(t):
        return JointOutcomeDistribution(ch.spectrum, t @ scipy.sparse.diags(p))
    return JointOutcomeDistribution(ch.spectrum, t * p[None, :])


def work_distribution(joint, merge_tol=None):
    e = joint.spectrum.energies
    if merge_tol is None:
        merge_tol = merge_tolerance(joint.spectrum)
    f, i, p = joint.entries()
    values, probs = merge_atoms(e[i] - e[f], p, merge_tol)
    return WorkDistribution(values, probs / probs.sum())


def log_exponential_work_average(x, beta=None):
    """``log <exp(beta W)>``, evaluated with log-sum-exp."""
    if isinstance(x, DilatedChannel):
        return float(np.log(_jarzynski_from_channel(x)))
    beta = check_beta(beta)
    return float(logsumexp(beta * x.w, b=x.p))


def _jarzynski_from_channel(ch):
    # sum_j omega_j <E_j| C[I] |E_j>, with C[I] = d * C[I/d]
    omega = ch.gibbs().probs
    out = apply_channel(ch, ClassicalState.uniform(ch.dS))
    diag = out.probs if isinstance(out, ClassicalState) else np.diag(out.matrix).real
    return float(ch.dS * np.dot(omega, diag))


def exponential_work_average(x, beta=None, cross_check=False):
    """``<exp(beta W)>`` of a work distribution, or of a channel on its Gibbs state.

    A channel is evaluated through ``C[I]`` without forming the work
    distribution. With ``cross_check`` the distribution path is also run and
    the two must agree within 1e-9.
    """
    if isinstance(x, DilatedChannel):
        value = _jarzynski_from_channel(x)
        if cross_check:
            other = float(np.exp(log_exponential_work_average(
                work_distribution(joint_outcome_distribution(x)), x.beta)))
            if abs(value - other) > CROSS_CHECK_TOL * max(1.0, abs(value)):
                raise AssertionError(
                    f"Jarzynski average paths disagree: channel {value!r} vs distribution {other!r}"
                )
        return value
    return float(np.exp(log_exponential_work_average(x, beta)))


def average_work(dist):
    return float(np.dot(dist.w, dist.p))


def work_tail(dist, epsilon, n_particles=1):
    """Probability that the work per particle ``W / N`` is at least ``epsilon``."""
    n = check_positive_int(n_particles, "n_particles")
    return float(dist.p[dist.w / n >= epsilon - 1e-12].sum())


@dataclass(frozen=True, eq=False)
class BipartiteWork:
    """Joint distribution of extracted work on system and catalyst."""

    w_s: np.ndarray
    w_c: np.ndarray
    p: np.ndarray
    marginal_S: WorkDistribution
    marginal_C: WorkDistribution


def joint_system_catalyst_work(ch, H_C, initial=None):
    """Two-point measurement on system and catalyst together.

    Requires a catalyst state diagonal in the eigenbasis of ``H_C``
    (the index basis here), since a coherent catalyst has no work random
    variable.
    """
    sigma = ch.sigma_C
    if isinstance(sigma, DensityOperator):
        if not sigma.is_diagonal():
            raise DomainError("catalyst state must be diagonal in the catalyst energy basis")
        sigma = sigma.diagonal()
    h_c = H_C.energies if isinstance(H_C, Spectrum) else np.asarray(H_C, dtype=float)
    check_same_dim(h_c.size, ch.dC, "catalyst Hamiltonian and dC")
    if initial is None:
        initial = ch.gibbs()
    p_s = _initial_probs(ch, initial)
    d_s, d_c = ch.dS, ch.dC
    e_s = ch.spectrum.energies
    weights = np.outer(p_s, sigma.probs).ravel()
    src = np.arange(d_s * d_c)
    if ch.unitary.is_permutation:
        dst = ch.unitary.permutation.images
        src_all, dst_all, prob = src, dst, weights
    else:
        amp2 = np.abs(ch.unitary.as_matrix()) ** 2  # amp2[dst, src]
        dst_all, src_all = np.nonzero(amp2 > 0)
        prob = amp2[dst_all, src_all] * weights[src_all]
    ws = e_s[src_all // d_c] - e_s[dst_all // d_c]
    wc = h_c[src_all % d_c] - h_c[dst_all % d_c]
    keep = prob > 0
    ws, wc, prob = ws[keep], wc[keep], prob[keep]
    tol_s = merge_tolerance(ch.spectrum)
    tol_c = 1e-9 * float(np.abs(h_c).max()) if h_c.size else 0.0
    ms = WorkDistribution(*merge_atoms(ws, prob, tol_s))
    mc = WorkDistribution(*merge_atoms(wc, prob, tol_c))
    return BipartiteWork(ws, wc, prob, ms, mc)
