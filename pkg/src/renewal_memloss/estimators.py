"""Estimator-style wrappers (``fit`` / ``transform`` / ``get_params``) over the functional API.

The tail model plays the role of the training data: ``fit(model)`` does the
expensive renewal-sequence work once, ``transform(grid)`` evaluates cheap
per-point quantities.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from . import coupling, memoryloss, renewal
from ._validation import check_grid
from .tails import TailModel


def _check_model(model):
    if not isinstance(model, TailModel):
        raise TypeError(f"expected a TailModel, got {type(model).__name__}")
    return model


class RenewalSolver(BaseEstimator):
    """Compute ``u_0 .. u_{n_max}``; the sequence is stored in ``u_``.

    Parameters
    ----------
    n_max : int
    method : {"fast", "direct"}
    """

    def __init__(self, n_max=1024, method="fast"):
        self.n_max = n_max
        self.method = method

    def fit(self, model, y=None):
        model = _check_model(model)
        self.sequence_ = renewal.compute_u(model, self.n_max, method=self.method)
        self.u_ = self.sequence_.u
        self.model_ = model
        return self


class MemoryLossCurve(BaseEstimator, TransformerMixin):
    """``transform(grid)`` returns rows ``(n, ell, head, tail, tv)`` for each grid pair.

    Parameters
    ----------
    n_max : int
        Largest ``n + ell`` that ``transform`` will be asked for.
    method : {"fast", "direct"}
    """

    def __init__(self, n_max=1 << 12, method="fast"):
        self.n_max = n_max
        self.method = method

    def fit(self, model, y=None):
        self.model_ = _check_model(model)
        self.sequence_ = renewal.compute_u(model, self.n_max, method=self.method)
        return self

    def transform(self, grid):
        check_is_fitted(self, "sequence_")
        grid = check_grid(grid)
        out = np.empty((len(grid), 5))
        for i, (n, ell) in enumerate(grid):
            pt = memoryloss.tv_exact(self.sequence_, self.model_, n, ell)
            out[i] = (n, ell, pt.head, pt.tail, pt.tv)
        return out

    def score(self, grid, y=None):
        """Bound ratio report for a suite (defaults to ``MuReg``) as its worst ratio."""
        return self.report(grid).worst

    def report(self, grid, suite="MuReg", f=None, ceiling=None):
        check_is_fitted(self, "sequence_")
        f = f if f is not None else self.model_.rv
        return memoryloss.run_suite(suite, self.model_, f, grid, seq=self.sequence_, ceiling=ceiling)


class OrnsteinCoupling(BaseEstimator):
    """Monte-Carlo coupling estimate of ``P(T > n)``; the result lives in ``estimate_``."""

    def __init__(self, ell=1, n_grid=(16, 64, 256), trials=10_000, seed=0, horizon=None, threads=1):
        self.ell = ell
        self.n_grid = n_grid
        self.trials = trials
        self.seed = seed
        self.horizon = horizon
        self.threads = threads

    def fit(self, model, y=None):
        model = _check_model(model)
        cfg = coupling.CouplingConfig(
            model, self.ell, list(self.n_grid), self.trials, self.seed, horizon=self.horizon, threads=self.threads
        )
        self.estimate_ = coupling.estimate(cfg)
        self.p_hat_ = self.estimate_.p_hat
        self.bound_ = self.estimate_.bound
        return self
