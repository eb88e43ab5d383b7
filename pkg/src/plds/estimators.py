"""Scikit-learn style wrappers around the functional API.

Two estimators cover the two learning problems: StaticMixtureRegressor
learns the static mixture from paired data and predicts latents from
observations (inverse regression); SwitchingTracker takes a known static
block, learns the dynamics from sequences, and exposes filtering/smoothing
as predict/transform.  Both follow the fit/predict/get_params protocol so
they compose with model selection utilities.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .errors import BadConfigError
from .gpb2 import gpb2_filter, gpb2_learn, gpb2_smooth
from .params import default_dynamics
from .static_em import InversePredictor, fit_static
from .variational import (VEMConfig, elbo, run_variational_filter,
                          run_vem_smoother, variational_smooth)


class StaticMixtureRegressor(BaseEstimator, RegressorMixin):
    """Inverse-regression estimator backed by the static joint mixture.

    Follows the sklearn convention that X is what predict consumes: X holds
    the (N, D) observations and y the (N, L) latent targets.  Internally the
    mixture models the generative direction latent -> observation and
    predict inverts it by Gaussian conditioning.
    """

    def __init__(self, n_modes=2, sigma_diagonal=False, n_restarts=5,
                 max_iters=200, tol_rel=1e-8, random_state=None):
        self.n_modes = n_modes
        self.sigma_diagonal = sigma_diagonal
        self.n_restarts = n_restarts
        self.max_iters = max_iters
        self.tol_rel = tol_rel
        self.random_state = random_state

    def fit(self, X, y):
        X = check_array(X, ensure_2d=True, dtype=float)
        y = check_array(y, ensure_2d=False, dtype=float)
        if y.ndim == 1:
            y = y[:, None]
        result = fit_static(y, X, self.n_modes,
                            sigma_diagonal=self.sigma_diagonal,
                            n_restarts=self.n_restarts,
                            max_iters=self.max_iters, tol_rel=self.tol_rel,
                            seed=self.random_state)
        self.theta_ = result.theta
        self.loglik_trace_ = result.loglik_trace
        self.converged_ = result.converged
        self.n_iters_ = result.n_iters
        self._predictor = InversePredictor(self.theta_)
        return self

    def predict(self, X):
        check_is_fitted(self, "theta_")
        X = check_array(X, ensure_2d=True, dtype=float)
        x_hat, _ = self._predictor.point_estimates(X)
        return x_hat[:, 0] if self.theta_.L == 1 else x_hat

    def predict_modes(self, X):
        """1-based most-probable mode per row."""
        check_is_fitted(self, "theta_")
        X = check_array(X, ensure_2d=True, dtype=float)
        _, resp = self._predictor.point_estimates(X)
        return np.argmax(resp, axis=1) + 1


class SwitchingTracker(BaseEstimator):
    """Dynamics learner and state tracker for a known static block.

    `theta` must be a StaticParams instance (for example from
    StaticMixtureRegressor.fit or a model file).  fit learns the dynamic
    block from one or more (T, D) sequences; predict and transform return
    smoothed state means; predict_modes the aligned mode labels.
    """

    def __init__(self, theta=None, method="vem", update_C=False,
                 max_em_iters=50, inner_e_sweeps=3, tol_elbo_rel=1e-6,
                 tol_eta=1e-6, window=1):
        self.theta = theta
        self.method = method
        self.update_C = update_C
        self.max_em_iters = max_em_iters
        self.inner_e_sweeps = inner_e_sweeps
        self.tol_elbo_rel = tol_elbo_rel
        self.tol_eta = tol_eta
        self.window = window

    def _config(self) -> VEMConfig:
        return VEMConfig(max_em_iters=self.max_em_iters,
                         inner_e_sweeps=self.inner_e_sweeps,
                         tol_elbo_rel=self.tol_elbo_rel,
                         tol_eta=self.tol_eta, update_C=self.update_C,
                         window=self.window)

    def fit(self, X, y=None):
        if self.theta is None:
            raise BadConfigError("SwitchingTracker requires a fitted static "
                                 "block via the theta parameter")
        if self.method not in ("vem", "gpb2"):
            raise BadConfigError("method must be vem or gpb2",
                                 method=self.method)
        phi0 = default_dynamics(self.theta)
        if self.method == "vem":
            result = run_vem_smoother(self.theta, phi0, X, self._config())
            self.objective_trace_ = result.elbo_trace
        else:
            result = gpb2_learn(self.theta, phi0, X, self._config())
            self.objective_trace_ = result.loglik_trace
        self.phi_ = result.phi
        self.converged_ = result.converged
        self.n_iters_ = result.n_iters
        return self

    def _smooth(self, X):
        check_is_fitted(self, "phi_")
        if self.method == "vem":
            return variational_smooth(self.theta, self.phi_, X, self._config())
        return gpb2_smooth(self.theta, self.phi_, X).posterior

    def predict(self, X):
        """Smoothed state means for one (T, D) sequence."""
        return self._smooth(np.asarray(X, float)).mean

    def transform(self, X):
        return self.predict(X)

    def predict_modes(self, X):
        post = self._smooth(np.asarray(X, float))
        return np.argmax(post.resp, axis=1) + 1

    def filter(self, X):
        """Causal state means/covariances/mode weights for one sequence."""
        check_is_fitted(self, "phi_")
        X = np.asarray(X, float)
        if self.method == "vem":
            result = run_variational_filter(self.theta, self.phi_, X,
                                            self._config())
            return result.mean, result.cov, result.resp
        result = gpb2_filter(self.theta, self.phi_, X)
        return result.mean, result.cov, result.resp

    def score(self, X, y=None):
        """Variational bound (vem) or filter log-likelihood (gpb2)."""
        check_is_fitted(self, "phi_")
        X = np.asarray(X, float)
        if self.method == "vem":
            post = variational_smooth(self.theta, self.phi_, X, self._config())
            return elbo(self.theta, self.phi_, X, post)
        return gpb2_filter(self.theta, self.phi_, X).loglik
