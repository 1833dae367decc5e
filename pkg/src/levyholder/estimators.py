"""scikit-learn style wrappers around the index and exponent estimators."""
import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from . import indices as ix
from . import regularity as rg


class HolderExponentRegressor(BaseEstimator, RegressorMixin):
    """Power law g(eps) = c eps^(2 gamma) fitted on the smallest lags.

    X holds lags (n, 1) or (n,), y the variogram values; `exponent_` is gamma.
    """

    def __init__(self, n_fit=6, level=0.95):
        self.n_fit = n_fit
        self.level = level

    def fit(self, X, y, sample_weight=None):
        lags = np.asarray(X, float).reshape(-1)
        y = np.asarray(y, float)
        if sample_weight is None:
            se = np.zeros_like(y)
            mode = "exact"
        else:
            # weights are inverse squared relative errors, as in the empirical fit
            se = y / np.sqrt(np.asarray(sample_weight, float))
            mode = "empirical"
        table = rg.VariogramTable("time", lags, y, se, mode)
        self.fit_ = rg.fit_exponent(table, n_fit=self.n_fit, level=self.level)
        self.exponent_ = self.fit_.exponent
        self.ci_ = self.fit_.ci
        order = np.argsort(lags)[: self.n_fit]
        self.log_scale_ = float(np.mean(np.log(y[order]) - self.fit_.slope * np.log(lags[order])))
        return self

    def predict(self, X):
        check_is_fitted(self, "fit_")
        lags = np.asarray(X, float).reshape(-1)
        return np.exp(self.log_scale_ + self.fit_.slope * np.log(lags))


class IntegrabilityIndexEstimator(BaseEstimator):
    """Integrability exponent b of a sampled f, i.e. f(t) ~ e^(-b k) up to polynomial factors.

    X holds sample points t_k = 2^-k (ascending or not), y the values f(t_k).
    """

    def __init__(self, monotone=True, min_lags=12):
        self.monotone = monotone
        self.min_lags = min_lags

    def fit(self, X, y):
        t = np.asarray(X, float).reshape(-1)
        self.result_ = ix.index_from_integrability(t, np.asarray(y, float), self.monotone,
                                                   min_lags=self.min_lags)
        self.index_ = self.result_.value
        self.stderr_ = self.result_.stderr
        return self


class FractalIndexEstimator(BaseEstimator):
    """ind_H and ind_L of a (psi, mu) pair; `fit(psi, mu)`."""

    def __init__(self, kernel_kind=None, T=1.0, budget=8):
        self.kernel_kind = kernel_kind
        self.T = T
        self.budget = budget

    def fit(self, psi, mu):
        self.report_ = ix.compute_index_report(psi, mu, kernel_kind=self.kernel_kind, T=self.T,
                                               budget=self.budget)
        self.ind_H_ = self.report_.ind_H.value
        self.ind_L_ = self.report_.ind_L.value
        return self
