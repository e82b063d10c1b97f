"""scikit-learn style wrapper around a catalytic permutation channel."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from . import tpm
from .channels import DilatedChannel, JointUnitary, apply_channel, catalyst_fixed_point
from .qcore import ClassicalState, Spectrum, gibbs_state


class CatalyticChannelTransformer(TransformerMixin, BaseEstimator):
    """Solve the catalyst of a joint permutation, then push populations through the channel.

    Parameters
    ----------
    energies : array-like of shape (d,)
        System spectrum.
    images : array-like of shape (d * dC,)
        Joint permutation, system-major indexing.
    dC : int
        Catalyst dimension.
    beta : float
        Inverse temperature whose Gibbs state the catalyst must be restored on.
    method : {"power_iteration", "eigen_null_space"}

    ``fit`` ignores its data; ``transform`` maps each row of ``X`` (a
    probability vector over the spectrum) to the channel output.
    """

    def __init__(self, energies=(0.0, 1.0), images=(0, 1), dC=1, beta=1.0,
                 method="power_iteration"):
        self.energies = energies
        self.images = images
        self.dC = dC
        self.beta = beta
        self.method = method

    def fit(self, X=None, y=None):
        spectrum = Spectrum(self.energies)
        unitary = JointUnitary.from_permutation(np.asarray(self.images))
        omega = gibbs_state(spectrum, self.beta)[0]
        sigma, iterations = catalyst_fixed_point(unitary, omega, self.dC, method=self.method)
        self.channel_ = DilatedChannel(spectrum, self.dC, unitary, sigma, self.beta)
        self.catalyst_ = sigma.probs
        self.n_iter_ = iterations
        self.catalytic_residual_ = self.channel_.catalytic_residual
        self.jarzynski_avg_ = tpm.exponential_work_average(self.channel_)
        self.n_features_in_ = spectrum.dim
        return self

    def transform(self, X):
        check_is_fitted(self, "channel_")
        X = check_array(X, dtype=float)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} columns, expected {self.n_features_in_}")
        return np.vstack([apply_channel(self.channel_, ClassicalState.from_weights(row)).probs
                          for row in X])
