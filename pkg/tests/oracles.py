"""Slow, independent reference implementations used only by the tests.

Everything here works on explicit dense matrices or exact fractions and
shares no code path with the package beyond its data types.
"""

from fractions import Fraction

import numpy as np


def dense_channel_output(energies, perm_images, d_c, sigma, rho):
    """``Tr_C[P (rho (x) sigma) P^T]`` with an explicit permutation matrix."""
    d_s = len(energies)
    dim = d_s * d_c
    p = np.zeros((dim, dim))
    for src, dst in enumerate(perm_images):
        p[dst, src] = 1.0
    joint = np.kron(np.asarray(rho, dtype=float), np.diag(sigma))
    out = p @ joint @ p.T
    red = np.zeros((d_s, d_s))
    for a in range(d_s):
        for b in range(d_s):
            red[a, b] = sum(out[a * d_c + c, b * d_c + c] for c in range(d_c))
    return red


def dense_catalyst_output(energies, perm_images, d_c, sigma, rho):
    d_s = len(energies)
    dim = d_s * d_c
    p = np.zeros((dim, dim))
    for src, dst in enumerate(perm_images):
        p[dst, src] = 1.0
    out = p @ np.kron(np.asarray(rho, dtype=float), np.diag(sigma)) @ p.T
    return np.array([sum(out[s * d_c + c, s * d_c + c] for s in range(d_s)) for c in range(d_c)])


def tpm_by_loops(energies, perm_images, d_c, sigma, p_init):
    """Dictionary ``w -> probability`` from explicit loops over basis states."""
    out = {}
    for i, pi in enumerate(p_init):
        for c, sc in enumerate(sigma):
            dst = perm_images[i * d_c + c]
            f = dst // d_c
            w = round(energies[i] - energies[f], 9)
            out[w] = out.get(w, 0.0) + pi * sc
    return out


def toy_exact(x):
    """Toy-channel work atoms and Jarzynski average as exact fractions; ``x = exp(-beta delta)``."""
    x = Fraction(x)
    z = 2 + x
    gibbs = [1 / z, 1 / z, x / z]
    sigma = [(z - 1) / (z + 1), 2 / (z + 1)]
    energies = [0, 0, 1]  # in units of delta
    swaps = {0: 3, 3: 0, 2: 5, 5: 2}
    atoms = {}
    for i in range(3):
        for c in range(2):
            j = i * 2 + c
            f = swaps.get(j, j) // 2
            w = energies[i] - energies[f]
            atoms[w] = atoms.get(w, 0) + gibbs[i] * sigma[c]
    # <e^{beta W}> with e^{beta delta} = 1/x
    je = sum(p * (1 / x) ** w if w >= 0 else p * x ** (-w) for w, p in atoms.items())
    return atoms, je

