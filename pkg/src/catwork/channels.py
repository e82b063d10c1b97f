"""Channels realised by a joint unitary on system and catalyst.

A :class:`DilatedChannel` acts as ``rho -> Tr_C[U (rho (x) sigma_C) U^dag]``.
It is catalytic when the catalyst marginal is restored for the channel's
reference input, the Gibbs state unless another reference is given.

When ``U`` is a permutation and every state is diagonal, all operations run
on probability vectors; the dense path is kept for generic unitaries.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from ._validation import check_beta, check_positive_int, check_probability_vector, check_same_dim
from .exceptions import ConvergenceError, DimensionMismatchError, DomainError
from .qcore import (
    ClassicalState,
    DensityOperator,
    PermutationMap,
    Spectrum,
    gibbs_state,
    state_functionals,
    trace_distance,
)

CATALYTIC_TOL = 1e-10
UNITAL_TOL = 1e-10
FIXED_POINT_TOL = 1e-12
MAX_ITER = 10**6
DAMPING = 0.1


@dataclass(frozen=True, eq=False)
class JointUnitary:
    """Either a permutation of joint basis states or a dense unitary matrix."""

    permutation: PermutationMap | None = None
    matrix: np.ndarray | None = None

    def __post_init__(self):
        if (self.permutation is None) == (self.matrix is None):
            raise DomainError("give exactly one of permutation or matrix")
        if self.matrix is not None:
            m = np.array(self.matrix, dtype=complex)
            if m.ndim != 2 or m.shape[0] != m.shape[1]:
                raise DimensionMismatchError(f"unitary must be square, got {m.shape}")
            if not np.allclose(m @ m.conj().T, np.eye(m.shape[0]), rtol=0, atol=1e-10):
                raise DomainError("matrix is not unitary within 1e-10")
            m.setflags(write=False)
            object.__setattr__(self, "matrix", m)

    @classmethod
    def from_permutation(cls, images):
        perm = images if isinstance(images, PermutationMap) else PermutationMap(images)
        return cls(permutation=perm)

    @classmethod
    def dense(cls, matrix):
        return cls(matrix=matrix)

    @classmethod
    def identity(cls, dim):
        return cls(permutation=PermutationMap.identity(dim))

    @property
    def is_permutation(self):
        return self.permutation is not None

    @property
    def dim(self):
        return self.permutation.dim if self.is_permutation else self.matrix.shape[0]

    def as_matrix(self):
        if self.is_permutation:
            return self.permutation.matrix().astype(complex)
        return self.matrix


def _as_unitary(u):
    if isinstance(u, JointUnitary):
        return u
    if isinstance(u, PermutationMap):
        return JointUnitary(permutation=u)
    return JointUnitary(matrix=u)


def _is_classical(state):
    return isinstance(state, ClassicalState)


def _classical_fast_path(u, *states):
    return u.is_permutation and all(_is_classical(s) for s in states)


def _joint_apply_classical(perm, p, q):
    joint = np.outer(p, q).ravel()
    out = np.empty_like(joint)
    out[perm.images] = joint
    return out.reshape(p.size, q.size)


def _joint_apply_dense(u, rho, sigma):
    joint = np.kron(rho.to_density().matrix, sigma.to_density().matrix)
    m = u.as_matrix()
    return m @ joint @ m.conj().T


def _reduce(u, rho, sigma, keep):
    """Marginal of ``U (rho (x) sigma) U^dag`` on S or C."""
    d_s, d_c = rho.dim, sigma.dim
    if _classical_fast_path(u, rho, sigma):
        table = _joint_apply_classical(u.permutation, rho.probs, sigma.probs)
        return ClassicalState.from_weights(table.sum(axis=1 if keep == "S" else 0))
    t = _joint_apply_dense(u, rho, sigma).reshape(d_s, d_c, d_s, d_c)
    if keep == "S":
        return DensityOperator.from_matrix(np.einsum("icjc->ij", t))
    return DensityOperator.from_matrix(np.einsum("sasb->ab", t))


@dataclass(frozen=True, eq=False)
class DilatedChannel:
    """A channel on S given by a joint unitary and a catalyst state.

    ``catalytic_residual`` is the trace distance between the catalyst state
    and the catalyst marginal after acting on ``reference`` (the Gibbs state
    at ``beta`` unless supplied); it is computed on construction. The catalyst
    Hamiltonian is taken to be zero.
    """

    spectrum: Spectrum
    dC: int
    unitary: JointUnitary
    sigma_C: ClassicalState | DensityOperator
    beta: float
    reference: ClassicalState | DensityOperator | None = None
    catalytic_residual: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "dC", check_positive_int(self.dC, "dC"))
        object.__setattr__(self, "beta", check_beta(self.beta))
        object.__setattr__(self, "unitary", _as_unitary(self.unitary))
        check_same_dim(self.unitary.dim, self.dS * self.dC, "unitary and dS*dC")
        check_same_dim(self.sigma_C.dim, self.dC, "catalyst state and dC")
        if self.reference is None:
            object.__setattr__(self, "reference", gibbs_state(self.spectrum, self.beta)[0])
        check_same_dim(self.reference.dim, self.dS, "reference state and dS")
        after = _reduce(self.unitary, self.reference, self.sigma_C, "C")
        object.__setattr__(self, "catalytic_residual", trace_distance(after, self.sigma_C))

    @property
    def dS(self):
        return self.spectrum.dim

    @property
    def is_quasi_classical(self):
        return _classical_fast_path(self.unitary, self.sigma_C)

    def gibbs(self):
        return gibbs_state(self.spectrum, self.beta)[0]

    def __call__(self, rho):
        return apply_channel(self, rho)


@dataclass(frozen=True)
class ChannelReport:
    """Residuals against unitality, Gibbs preservation and catalyticity, plus work averages."""

    unital_residual: float
    gibbs_residual: float
    catalytic_residual: float
    av_work: float
    jarzynski_avg: float

    @property
    def is_unital(self):
        return self.unital_residual <= UNITAL_TOL

    @property
    def is_gibbs_preserving(self):
        return self.gibbs_residual <= UNITAL_TOL

    @property
    def is_catalytic(self):
        return self.catalytic_residual <= CATALYTIC_TOL

    @property
    def classes(self):
        names = []
        if self.is_unital:
            names.append("unital")
        if self.is_gibbs_preserving:
            names.append("gibbs_preserving")
        if self.is_catalytic:
            names.append("catalytic")
        return names

    @property
    def violates_jarzynski(self):
        return abs(self.jarzynski_avg - 1.0) > 1e-8

    def as_dict(self):
        return {
            "unital_residual": self.unital_residual,
            "gibbs_residual": self.gibbs_residual,
            "catalytic_residual": self.catalytic_residual,
            "av_work": self.av_work,
            "jarzynski_avg": self.jarzynski_avg,
            "classes": self.classes,
            "violates_jarzynski": self.violates_jarzynski,
        }


def apply_channel(ch, rho):
    """Channel output on S.

    Diagonal input through a permutation channel with diagonal catalyst stays a
    :class:`ClassicalState`; every other combination returns a
    :class:`DensityOperator`.
    """
    check_same_dim(rho.dim, ch.dS, "input state and system")
    return _reduce(ch.unitary, rho, ch.sigma_C, "S")


def catalyst_map_matrix(unitary, rho_S, dC):
    """Matrix of ``sigma -> Tr_S[U (rho (x) sigma) U^dag]``.

    For a permutation with diagonal ``rho_S`` this is the ``dC x dC``
    column-stochastic matrix acting on catalyst diagonals; otherwise it is the
    ``dC^2 x dC^2`` superoperator acting on row-major ``vec(sigma)``.
    """
    u = _as_unitary(unitary)
    d_s = rho_S.dim
    check_same_dim(u.dim, d_s * dC, "unitary and dS*dC")
    if _classical_fast_path(u, rho_S):
        src = np.arange(u.dim)
        dst = u.permutation.images
        m = np.zeros((dC, dC))
        np.add.at(m, (dst % dC, src % dC), rho_S.probs[src // dC])
        return m
    U = u.as_matrix().reshape(d_s, dC, d_s, dC)
    rho = rho_S.to_density().matrix
    # S[(c, c'), (b, b')] = sum_{s,a,a'} U[s,c,a,b] rho[a,a'] conj(U[s,c',a',b'])
    sup = np.einsum("scab,ad,sedf->cebf", U, rho, U.conj(), optimize=True)
    return sup.reshape(dC * dC, dC * dC)


def _null_space(a, atol=1e-10):
    # absolute cutoff: the maps here have norm of order one, and a relative
    # cutoff fails when ``a`` is itself round-off sized
    _, s, vh = scipy.linalg.svd(a)
    return vh[np.sum(s > atol):].conj().T


def _stationary_projection(m, x0):
    """Spectral projection of ``x0`` onto the eigenvalue-1 eigenspace of ``m``."""
    a = m - np.eye(m.shape[0])
    right = _null_space(a)
    left = _null_space(a.conj().T)
    if right.shape[1] == 0 or right.shape[1] != left.shape[1]:
        raise ConvergenceError("eigenvalue 1 not resolved by the null-space solver")
    coeffs = np.linalg.solve(left.conj().T @ right, left.conj().T @ x0)
    return right @ coeffs


def catalyst_fixed_point(
    unitary,
    rho_S,
    dC,
    method="power_iteration",
    tol=FIXED_POINT_TOL,
    max_iter=MAX_ITER,
    damping=DAMPING,
):
    """A catalyst state left invariant by the joint unitary for system input ``rho_S``.

    Power iteration runs ``x <- (1 - damping) Phi(x) + damping x`` from the
    maximally mixed state; the damping removes the period-2 cycles that
    permutation-induced chains can have. Where the fixed point is not unique
    this selects the spectral projection of the maximally mixed state, which
    ``method="eigen_null_space"`` computes directly.

    Returns ``(state, iterations)``. The state's fixed-point residual (trace
    distance to its image) is at most ``tol``.
    """
    u = _as_unitary(unitary)
    dC = check_positive_int(dC, "dC")
    if method not in ("power_iteration", "eigen_null_space"):
        raise DomainError(f"unknown fixed-point method {method!r}")
    m = catalyst_map_matrix(u, rho_S, dC)
    classical = _classical_fast_path(u, rho_S)
    if classical:
        x0 = np.full(dC, 1.0 / dC)
    else:
        x0 = (np.eye(dC, dtype=complex) / dC).reshape(-1)

    def residual(x):
        y = m @ x
        if classical:
            return 0.5 * np.abs(y - x).sum()
        d = (y - x).reshape(dC, dC)
        return 0.5 * np.abs(np.linalg.eigvalsh(0.5 * (d + d.conj().T))).sum()

    def normalize(x):
        if classical:
            x = np.clip(x.real, 0.0, None)
            return x / x.sum()
        return x / np.trace(x.reshape(dC, dC))

    def to_state(x):
        if classical:
            return ClassicalState.from_weights(x)
        return DensityOperator.from_matrix(x.reshape(dC, dC))

    iterations = 0
    if method == "eigen_null_space":
        x = _stationary_projection(m, x0)
        x = normalize(x)
        res = residual(x)
        if res > tol:
            raise ConvergenceError(
                f"null-space fixed point has residual {res:.3e} > {tol:.1e}", res, to_state(x)
            )
        return to_state(x), iterations

    x = x0
    best = (np.inf, x)
    while True:
        res = residual(x)
        if res < best[0]:
            best = (res, x)
        if res <= tol:
            return to_state(x), iterations
        if iterations >= max_iter:
            raise ConvergenceError(
                f"power iteration stopped after {max_iter} steps at residual {best[0]:.3e}",
                best[0],
                to_state(best[1]),
            )
        x = normalize((1.0 - damping) * (m @ x) + damping * x)
        iterations += 1


def verify_catalytic(ch, tol=CATALYTIC_TOL):
    """``(ok, residual)``: whether the catalyst is restored within ``tol``."""
    return ch.catalytic_residual <= tol, ch.catalytic_residual


def classify_channel(ch):
    from . import tpm

    d = ch.dS
    mixed = ClassicalState.uniform(d)
    omega = ch.gibbs()
    out_mixed = apply_channel(ch, mixed)
    out_gibbs = apply_channel(ch, omega)
    dist = tpm.work_distribution(tpm.joint_outcome_distribution(ch, omega))
    return ChannelReport(
        unital_residual=trace_distance(out_mixed, mixed),
        gibbs_residual=trace_distance(out_gibbs, omega),
        catalytic_residual=ch.catalytic_residual,
        av_work=tpm.average_work(dist),
        jarzynski_avg=tpm.exponential_work_average(ch),
    )


def _unitary_on_system(u, d_s):
    u = _as_unitary(u)
    check_same_dim(u.dim, d_s, "unitary and system")
    return u


def make_unitary_channel(spectrum, beta, unitary):
    """Plain unitary channel, realised with a trivial one-level catalyst."""
    u = _unitary_on_system(unitary, spectrum.dim)
    return DilatedChannel(spectrum, 1, u, ClassicalState(np.ones(1)), beta)


def make_random_unitary_channel(spectrum, beta, unitaries, weights):
    """``rho -> sum_i w_i U_i rho U_i^dag`` via the controlled unitary ``sum_i U_i (x) |i><i|``."""
    w = check_probability_vector(weights, name="weights")
    us = [_unitary_on_system(u, spectrum.dim) for u in unitaries]
    if len(us) != w.size or not us:
        raise DimensionMismatchError(f"{len(us)} unitaries but {w.size} weights")
    d_s, d_c = spectrum.dim, w.size
    if all(u.is_permutation for u in us):
        images = np.empty(d_s * d_c, dtype=np.int64)
        s = np.arange(d_s)
        for c, u in enumerate(us):
            images[s * d_c + c] = u.permutation.images * d_c + c
        joint = JointUnitary.from_permutation(images)
    else:
        big = np.zeros((d_s * d_c, d_s * d_c), dtype=complex)
        for c, u in enumerate(us):
            proj = np.zeros((d_c, d_c))
            proj[c, c] = 1.0
            big += np.kron(u.as_matrix(), proj)
        joint = JointUnitary.dense(big)
    return DilatedChannel(spectrum, d_c, joint, ClassicalState(w), beta)


def swap_permutation(d):
    """Joint permutation exchanging two ``d``-level systems."""
    s, c = np.divmod(np.arange(d * d), d)
    return PermutationMap(c * d + s)


def make_fully_thermalizing(spectrum, beta):
    """Swap the system with a thermal copy of itself; every input is mapped to the Gibbs state."""
    omega = gibbs_state(spectrum, beta)[0]
    d = spectrum.dim
    return DilatedChannel(spectrum, d, JointUnitary(permutation=swap_permutation(d)), omega, beta)


def fully_thermalizing_jarzynski(spectrum, beta):
    """Closed form ``d / d_eff`` of the Jarzynski average of the thermalizing channel."""
    omega = gibbs_state(spectrum, beta)[0]
    return spectrum.dim / state_functionals(omega)["effective_dimension"]
