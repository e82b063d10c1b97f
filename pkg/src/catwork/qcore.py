"""Spectra, states, state functionals and permutation actions.

Every other module works in a fixed energy eigenbasis: index ``i`` of a
:class:`Spectrum` labels the eigenstate with energy ``energies[i]``. Joint
system-catalyst indices are system-major, ``index = i_S * d_C + i_C``.
Entropies are in nats.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from ._validation import (
    NORM_TOL,
    check_beta,
    check_probability_vector,
    check_real_vector,
    check_same_dim,
    check_square_matrix,
)
from .exceptions import DimensionMismatchError, DomainError


def _frozen(arr):
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Energy eigenvalues of a system Hamiltonian, in eigenbasis order."""

    energies: np.ndarray

    def __post_init__(self):
        e = check_real_vector(self.energies, "energies").copy()
        object.__setattr__(self, "energies", _frozen(e))

    @property
    def dim(self):
        return self.energies.size

    def __len__(self):
        return self.dim

    def levels(self):
        """Distinct energies (ascending) and their multiplicities."""
        return np.unique(self.energies, return_counts=True)

    def __repr__(self):
        return f"Spectrum(dim={self.dim}, range=[{self.energies.min():g}, {self.energies.max():g}])"


@dataclass(frozen=True, eq=False)
class ClassicalState:
    """A state diagonal in the energy eigenbasis, stored as a probability vector."""

    probs: np.ndarray

    def __post_init__(self):
        p = check_probability_vector(self.probs).copy()
        object.__setattr__(self, "probs", _frozen(p))

    @classmethod
    def from_weights(cls, weights):
        """Build from a vector whose sum may have drifted by round-off (< 1e-9)."""
        return cls(check_probability_vector(weights, renormalize=True))

    @classmethod
    def uniform(cls, dim):
        return cls(np.full(dim, 1.0 / dim))

    @classmethod
    def basis(cls, dim, index):
        p = np.zeros(dim)
        p[index] = 1.0
        return cls(p)

    @property
    def dim(self):
        return self.probs.size

    def eigenvalues(self):
        return self.probs

    def to_density(self):
        return DensityOperator(np.diag(self.probs.astype(complex)))

    def __repr__(self):
        return f"ClassicalState({np.array2string(self.probs, precision=6)})"


@dataclass(frozen=True, eq=False)
class DensityOperator:
    """A Hermitian, positive semidefinite, unit-trace matrix."""

    matrix: np.ndarray

    def __post_init__(self):
        m = check_square_matrix(self.matrix).copy()
        if not np.allclose(m, m.conj().T, rtol=0, atol=NORM_TOL):
            raise DomainError("density matrix is not Hermitian")
        m = 0.5 * (m + m.conj().T)
        tr = np.trace(m).real
        if abs(tr - 1.0) > NORM_TOL:
            raise DomainError(f"density matrix has trace {tr!r}")
        lam = np.linalg.eigvalsh(m)
        if lam.min() < -NORM_TOL:
            raise DomainError(f"density matrix has negative eigenvalue {lam.min():.3e}")
        object.__setattr__(self, "matrix", _frozen(m))

    @classmethod
    def from_matrix(cls, matrix):
        """Build from a matrix whose trace may have drifted by round-off (< 1e-9)."""
        m = np.array(matrix, dtype=complex)
        m = 0.5 * (m + m.conj().T)
        tr = np.trace(m).real
        if abs(tr - 1.0) > 1e-9:
            raise DomainError(f"density matrix has trace {tr!r}")
        return cls(m / tr)

    @property
    def dim(self):
        return self.matrix.shape[0]

    def eigenvalues(self):
        return np.clip(np.linalg.eigvalsh(self.matrix), 0.0, None)

    def is_diagonal(self, tol=NORM_TOL):
        off = self.matrix - np.diag(np.diag(self.matrix))
        return bool(np.all(np.abs(off) <= tol))

    def diagonal(self):
        return ClassicalState.from_weights(np.diag(self.matrix).real)

    def to_density(self):
        return self


@dataclass(frozen=True)
class EnergyWindow:
    """Closed energy interval ``[lo, hi]``."""

    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo <= self.hi:
            raise DomainError(f"window bounds out of order: [{self.lo}, {self.hi}]")

    def mask(self, spectrum):
        e = spectrum.energies
        return (e >= self.lo) & (e <= self.hi)

    def count(self, spectrum):
        return int(self.mask(spectrum).sum())

    @property
    def width(self):
        return self.hi - self.lo


@dataclass(frozen=True, eq=False)
class PermutationMap:
    """A bijection on ``{0, ..., D-1}``; basis state ``i`` is sent to ``images[i]``."""

    images: np.ndarray

    def __post_init__(self):
        img = np.array(self.images, dtype=np.int64).reshape(-1)
        if img.size == 0 or not np.array_equal(np.sort(img), np.arange(img.size)):
            raise DomainError("images is not a permutation of 0..D-1")
        object.__setattr__(self, "images", _frozen(img))

    @classmethod
    def identity(cls, dim):
        return cls(np.arange(dim))

    @classmethod
    def from_swaps(cls, dim, pairs):
        """Product of disjoint transpositions ``(a, b)``."""
        img = np.arange(dim)
        touched = set()
        for a, b in pairs:
            if a in touched or b in touched or a == b:
                raise DomainError(f"transpositions are not disjoint at ({a}, {b})")
            touched.update((a, b))
            img[a], img[b] = b, a
        return cls(img)

    @property
    def dim(self):
        return self.images.size

    def inverse(self):
        inv = np.empty_like(self.images)
        inv[self.images] = np.arange(self.dim)
        return PermutationMap(inv)

    def matrix(self):
        m = np.zeros((self.dim, self.dim))
        m[self.images, np.arange(self.dim)] = 1.0
        return m

    def is_identity(self):
        return bool(np.array_equal(self.images, np.arange(self.dim)))

    def __eq__(self, other):
        return isinstance(other, PermutationMap) and np.array_equal(self.images, other.images)

    def __hash__(self):
        return hash(self.images.tobytes())


def gibbs_state(spectrum, beta):
    """Thermal state ``exp(-beta E) / Z`` and its partition function ``Z``.

    Energies are shifted by their minimum before exponentiation, so the
    probabilities never overflow; ``Z`` itself is returned unshifted and may
    under- or overflow for extreme ``beta * E`` (see :func:`log_partition_function`).
    """
    beta = check_beta(beta)
    e = spectrum.energies
    e0 = e.min()
    w = np.exp(-beta * (e - e0))
    s = w.sum()
    return ClassicalState(w / s), float(s * np.exp(-beta * e0))


def log_partition_function(spectrum, beta):
    beta = check_beta(beta)
    return float(logsumexp(-beta * spectrum.energies))


def microcanonical_state(spectrum, window):
    """Uniform state on the eigenstates inside ``window``, and their count ``g``."""
    mask = window.mask(spectrum)
    g = int(mask.sum())
    if g == 0:
        raise DomainError(f"energy window [{window.lo}, {window.hi}] contains no eigenvalue")
    p = np.where(mask, 1.0 / g, 0.0)
    return ClassicalState(p), g


def _as_density(state):
    return state if isinstance(state, DensityOperator) else state.to_density()


def trace_distance(a, b):
    check_same_dim(a.dim, b.dim, "states")
    if isinstance(a, ClassicalState) and isinstance(b, ClassicalState):
        return float(0.5 * np.abs(a.probs - b.probs).sum())
    diff = _as_density(a).matrix - _as_density(b).matrix
    return float(0.5 * np.abs(np.linalg.eigvalsh(diff)).sum())


def _check_dims(total, dims):
    d_s, d_c = (int(d) for d in dims)
    if d_s * d_c != total:
        raise DimensionMismatchError(f"joint dimension {total} != {d_s} x {d_c}")
    return d_s, d_c


def partial_trace(joint, dims, keep="S"):
    """Reduced state on ``S`` or ``C`` of a bipartite state with ``dims = (dS, dC)``."""
    d_s, d_c = _check_dims(joint.dim, dims)
    if keep not in ("S", "C"):
        raise DomainError(f"keep must be 'S' or 'C', got {keep!r}")
    if isinstance(joint, ClassicalState):
        table = joint.probs.reshape(d_s, d_c)
        return ClassicalState.from_weights(table.sum(axis=1 if keep == "S" else 0))
    t = joint.matrix.reshape(d_s, d_c, d_s, d_c)
    if keep == "S":
        return DensityOperator.from_matrix(np.einsum("icjc->ij", t))
    return DensityOperator.from_matrix(np.einsum("sasb->ab", t))


def _xlogx_sum(lam):
    lam = lam[lam > 0]
    return float(-(lam * np.log(lam)).sum())


def von_neumann_entropy(rho):
    return _xlogx_sum(rho.eigenvalues())


def state_functionals(rho):
    """Von Neumann entropy, min-entropy and effective dimension ``1/tr(rho^2)``."""
    lam = rho.eigenvalues()
    return {
        "von_neumann": _xlogx_sum(lam),
        "min_entropy": float(-np.log(lam.max())),
        "effective_dimension": float(1.0 / np.sum(lam**2)),
    }


def mutual_information(joint, dims):
    rho_s = partial_trace(joint, dims, "S")
    rho_c = partial_trace(joint, dims, "C")
    return von_neumann_entropy(rho_s) + von_neumann_entropy(rho_c) - von_neumann_entropy(joint)


def apply_permutation(perm, state):
    check_same_dim(perm.dim, state.dim, "permutation and state")
    if isinstance(state, ClassicalState):
        out = np.empty_like(state.probs)
        out[perm.images] = state.probs
        return ClassicalState.from_weights(out)
    m = state.matrix
    inv = perm.inverse().images
    # (P rho P^T)[a, b] = rho[inv[a], inv[b]]
    return DensityOperator(m[np.ix_(inv, inv)])
