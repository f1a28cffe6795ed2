"""Estimator-style wrapper around one abstraction and synthesis round.

``fit`` takes noise samples and returns a fitted controller; ``predict``
maps continuous states to control inputs. Hyperparameters follow the usual
``get_params``/``set_params`` protocol, so the estimator can be cloned and
swept like any other.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .abstraction import enabled_actions
from .checker import extract_controller, robust_value_iteration
from .imdp import build_imdp
from .partition import Partition
from .scenario import count_samples, interval_table
from .sysmodel import LinearSystem, ReachAvoidSpec


class IntervalMdpController(BaseEstimator):
    """Robust controller synthesized from noise samples.

    Parameters
    ----------
    system : LinearSystem
        Model the abstraction works with (grouped if needed).
    partition : Partition
        Grid over the state space.
    spec : ReachAvoidSpec
        Reach-avoid property; ``spec.x0`` selects the reported guarantee.
    beta : float, default=0.01
        Confidence parameter of the probability intervals.
    robust : bool, default=True
        If False, build the point-estimate MDP instead.
    warm_start : bool, default=False
        Reuse the enabled actions of a previous fit with the same system and
        partition instead of recomputing them.
    threads : int or None, default=None
        Worker threads for computing enabled actions.

    Attributes
    ----------
    actions_ : ActionSet
    mdp_ : IntervalMdp
    policy_ : RobustPolicy
    controller_ : FeedbackController
    guarantee_ : float or None
        Lower bound on the reach-avoid probability from ``spec.x0``.
    n_action_builds_ : int
        How many times the enabled actions were computed.
    """

    def __init__(self, system: LinearSystem = None, partition: Partition = None,
                 spec: ReachAvoidSpec = None, beta=0.01, robust=True, warm_start=False,
                 threads=None):
        self.system = system
        self.partition = partition
        self.spec = spec
        self.beta = beta
        self.robust = robust
        self.warm_start = warm_start
        self.threads = threads

    def _validate_params(self):
        if self.system is None or self.partition is None or self.spec is None:
            raise ValueError("system, partition and spec must all be given")
        if not 0.0 < self.beta < 1.0:
            raise ValueError(f"beta must lie in (0, 1), got {self.beta}")
        if self.partition.n != self.system.n:
            raise ValueError("partition and system dimensions differ")

    def fit(self, W, y=None):
        """Abstract, verify and extract a controller from noise samples ``W``.

        Parameters
        ----------
        W : array-like of shape (N, n)
            I.i.d. noise samples at the model's step resolution.
        y : ignored
        """
        self._validate_params()
        W = check_array(W, ensure_min_samples=1)
        if W.shape[1] != self.system.n:
            raise ValueError(f"samples have {W.shape[1]} features, expected {self.system.n}")
        reuse = (self.warm_start and hasattr(self, "actions_")
                 and self._fitted_on == (id(self.system), id(self.partition)))
        if not reuse:
            self.actions_ = enabled_actions(self.system, self.partition, threads=self.threads)
            self.n_action_builds_ = getattr(self, "n_action_builds_", 0) + 1
            self._fitted_on = (id(self.system), id(self.partition))
        N = W.shape[0]
        counts = count_samples(self.partition, self.actions_.targets, W)
        table = interval_table(N, self.beta) if self.robust else None
        self.mdp_ = build_imdp(self.partition, self.actions_, counts, table, self.spec,
                               robust=self.robust)
        self.policy_ = robust_value_iteration(self.mdp_)
        self.controller_ = extract_controller(self.policy_, self.actions_, self.system,
                                              self.partition, self.mdp_)
        init = self.mdp_.initial
        self.guarantee_ = None if init is None else self.policy_.guarantee(init)
        self.n_samples_ = N
        return self

    def predict_action(self, X, k=0):
        """Abstract action per state at step ``k``; ``-1`` means halt."""
        check_is_fitted(self, "controller_")
        X = check_array(X)
        return self.controller_.action(X, k)

    def predict(self, X, k=0):
        """Control inputs per state at step ``k``; NaN rows where the controller halts."""
        check_is_fitted(self, "controller_")
        X = check_array(X)
        u, _ = self.controller_(X, k)
        return u

    def score(self, X, y=None):
        """Robust value at step 0 averaged over the regions of ``X``."""
        check_is_fitted(self, "policy_")
        X = check_array(X)
        return float(np.mean(self.policy_.values[0, self.partition.region_index(X)]))
