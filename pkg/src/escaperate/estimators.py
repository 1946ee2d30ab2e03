"""Estimator-style wrappers: configure with parameters, ``fit`` on a walk or an amalgam.

The "data" passed to ``fit`` is a single model (or a path to its YAML
file), not a sample matrix, so only the parameter handling and fitted
attribute conventions of scikit-learn carry over.
"""

from __future__ import annotations

import numbers
from pathlib import Path

from sklearn.base import BaseEstimator
from sklearn.utils import check_scalar
from sklearn.utils.validation import check_is_fitted

from . import io
from .amalgam.model import AmalgamSpec, recurrence_check
from .amalgam.rates import METHODS, applicable_methods, default_method, dgf_terms, exit_rate, lp_terms, solve_amalgam_Gbar, solve_amalgam_H
from .exit_chain import escape_rate
from .simulate import SimConfig, simulate_amalgam, simulate_walk
from .walk import RegularLanguageWalk


def load_model(X):
    """Accept a walk, an amalgam spec, or a path to either kind of file."""
    if isinstance(X, (RegularLanguageWalk, AmalgamSpec)):
        return X
    if isinstance(X, (str, Path)):
        if io.file_kind(X) == "walk":
            return io.parse_walk_file(X)
        return io.parse_amalgam_file(X)
    raise TypeError(f"expected a walk, an amalgam spec or a file path, got {type(X).__name__}")


def _check_tol(tol):
    check_scalar(tol, "tol", numbers.Real, min_val=0.0, include_boundaries="neither")


class RegularLanguageRate(BaseEstimator):
    """Rate of escape of a regular-language walk via its exit-time chain."""

    def __init__(self, lengths=None, tol=1e-14, max_iter=1_000_000, assume_all_reachable=None):
        self.lengths = lengths
        self.tol = tol
        self.max_iter = max_iter
        self.assume_all_reachable = assume_all_reachable

    def fit(self, X, y=None):
        _check_tol(self.tol)
        check_scalar(self.max_iter, "max_iter", numbers.Integral, min_val=1)
        walk = load_model(X)
        if not isinstance(walk, RegularLanguageWalk):
            raise TypeError("RegularLanguageRate needs a regular-language walk")
        rep = escape_rate(walk, self.lengths, tol=self.tol, max_iter=self.max_iter,
                          assume_all=self.assume_all_reachable)
        self.report_ = rep
        self.ell_ = rep.ell
        self.Lambda_ = rep.Lambda
        self.Delta_ = rep.Delta
        self.transient_ = rep.transient
        self.nu_ = rep.nu.as_dict() if rep.nu is not None else {}
        return self

    def predict(self, steps):
        """Asymptotic length after ``steps`` steps."""
        check_is_fitted(self, "ell_")
        return self.ell_ * steps


class AmalgamRate(BaseEstimator):
    """Rate of escape of a walk on an amalgamated free product.

    ``method="auto"`` uses the limit-process formula for the natural word
    length, double generating functions for other lengths constant on
    double cosets of the subgroup, and exit times otherwise.
    """

    def __init__(self, method="auto", lengths=None, tol=1e-14):
        self.method = method
        self.lengths = lengths
        self.tol = tol

    def fit(self, X, y=None):
        _check_tol(self.tol)
        spec = load_model(X)
        if not isinstance(spec, AmalgamSpec):
            raise TypeError("AmalgamRate needs an amalgam spec")
        if self.method not in ("auto",) + METHODS:
            raise ValueError(f"method must be 'auto' or one of {METHODS}")
        method = self.method
        if method == "auto":
            method = default_method(spec, self.lengths)
        elif method not in applicable_methods(spec, self.lengths):
            raise ValueError(f"method {method!r} does not apply to these lengths")
        self.method_ = method
        self.details_ = {}
        if recurrence_check(spec):
            self.ell_ = 0.0
            self.transient_ = False
            return self
        self.transient_ = True
        H = solve_amalgam_H(spec, tol=self.tol)
        if method == "exit-time":
            rep = exit_rate(spec, self.lengths, H=H, Gbar=solve_amalgam_Gbar(spec, H))
            self.ell_ = rep.ell
            self.details_ = {"Lambda": rep.Lambda, "Delta": rep.Delta, "xi": rep.xi.tolist()}
        elif method == "dgf":
            t = dgf_terms(spec, self.lengths, H=H, Gbar=solve_amalgam_Gbar(spec, H))
            self.ell_ = t.ell
            self.details_ = {"upsilon1": t.upsilon1, "upsilon2": t.upsilon2}
        else:
            t = lp_terms(spec, self.lengths, H=H)
            self.ell_ = t.ell
            self.details_ = {"rho": t.rho.tolist(), "G_ee": t.G_ee}
        return self

    def predict(self, steps):
        check_is_fitted(self, "ell_")
        return self.ell_ * steps


class MonteCarloRate(BaseEstimator):
    """Endpoint estimate ``l(X_n) / n`` averaged over seeded trials."""

    def __init__(self, steps=100_000, trials=200, seed=0, burn_in_fraction=0.0, lengths=None):
        self.steps = steps
        self.trials = trials
        self.seed = seed
        self.burn_in_fraction = burn_in_fraction
        self.lengths = lengths

    def fit(self, X, y=None):
        check_scalar(self.steps, "steps", numbers.Integral, min_val=1)
        check_scalar(self.trials, "trials", numbers.Integral, min_val=1)
        check_scalar(self.seed, "seed", numbers.Integral)
        check_scalar(self.burn_in_fraction, "burn_in_fraction", numbers.Real, min_val=0.0, max_val=1.0,
                     include_boundaries="left")
        model = load_model(X)
        cfg = SimConfig(int(self.steps), int(self.trials), int(self.seed), float(self.burn_in_fraction))
        if isinstance(model, AmalgamSpec):
            est = simulate_amalgam(model, self.lengths, cfg)
        else:
            est = simulate_walk(model, self.lengths, cfg)
        self.estimate_ = est
        self.ell_ = est.mean
        self.stderr_ = est.stderr
        self.samples_ = est.samples
        return self

    def predict(self, steps):
        check_is_fitted(self, "ell_")
        return self.ell_ * steps
