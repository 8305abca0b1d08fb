"""scikit-learn style front end for the unfolding pipeline.

The stages compose like transformers::

    tm = TorsionModeler(max_torsions=2).fit_transform(molecule)
    hubo = HuboEncoder(a_const_factor=2).fit_transform(tm)
    qubo = Quadratizer().fit_transform(hubo)

and :class:`MolecularUnfolder` wraps the whole search behind ``fit`` /
``transform``.
"""

from __future__ import annotations

from numbers import Integral, Real

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .encoder import A_CONST_BASES, AngleGrid, HuboProblem, a_const_base, build_hubo, optimization_polynomial
from .geometry import check_angles, objective_fragment_batch, unfold_source
from .mol2 import Molecule
from .quadratizer import chop_qubo, quadratize
from .solvers import SaConfig, exhaustive, geodock_greedy, random_search, simulated_annealing
from .topology import TorsionModel, build_torsion_model

__all__ = [
    "TorsionModeler",
    "HuboEncoder",
    "Quadratizer",
    "MolecularUnfolder",
    "check_molecule",
    "check_torsion_model",
    "check_hubo",
    "check_scalar",
    "SOLVERS",
]

SOLVERS = ("exhaustive", "random", "geodock", "sa")


def check_molecule(X) -> Molecule:
    if not isinstance(X, Molecule):
        raise TypeError(f"expected a Molecule, got {type(X).__name__}")
    if X.n_atoms < 2:
        raise ValueError("molecule needs at least 2 atoms")
    return X


def check_torsion_model(X) -> TorsionModel:
    if not isinstance(X, TorsionModel):
        raise TypeError(f"expected a TorsionModel, got {type(X).__name__}")
    return X


def check_hubo(X) -> HuboProblem:
    if not isinstance(X, HuboProblem):
        raise TypeError(f"expected a HuboProblem, got {type(X).__name__}")
    return X


def check_scalar(value, name: str, kind=Real, *, low=None, high=None, include_low=True, allow_none=False):
    """Type and range check for one hyperparameter; returns the value."""
    if value is None and allow_none:
        return value
    if isinstance(value, bool) or not isinstance(value, kind):
        raise TypeError(f"{name} must be {kind.__name__}, got {value!r}")
    if low is not None and (value < low or (value == low and not include_low)):
        raise ValueError(f"{name}={value!r} is below the allowed minimum {low}")
    if high is not None and value > high:
        raise ValueError(f"{name}={value!r} is above the allowed maximum {high}")
    return value


class TorsionModeler(TransformerMixin, BaseEstimator):
    """Molecule -> :class:`TorsionModel` (prune, detect torsions, fragment)."""

    def __init__(self, max_torsions=None, prune=True):
        self.max_torsions = max_torsions
        self.prune = prune

    def fit(self, X, y=None):
        check_molecule(X)
        check_scalar(self.max_torsions, "max_torsions", Integral, low=1, allow_none=True)
        self.torsion_model_ = build_torsion_model(X, self.max_torsions, prune=self.prune)
        return self

    def transform(self, X):
        check_is_fitted(self)
        check_molecule(X)
        return build_torsion_model(X, self.max_torsions, prune=self.prune)


class HuboEncoder(TransformerMixin, BaseEstimator):
    """TorsionModel -> :class:`HuboProblem` on a ``granularity``-step grid."""

    def __init__(self, granularity=8, a_const_factor=2.0, a_const_base="max-coefficient", chop=0.0):
        self.granularity = granularity
        self.a_const_factor = a_const_factor
        self.a_const_base = a_const_base
        self.chop = chop

    def _validate(self):
        check_scalar(self.granularity, "granularity", Integral, low=2)
        check_scalar(self.a_const_factor, "a_const_factor", Real, low=0, include_low=False)
        check_scalar(self.chop, "chop", Real, low=0)
        if self.a_const_base not in A_CONST_BASES:
            raise ValueError(f"a_const_base must be one of {A_CONST_BASES}")

    def fit(self, X, y=None):
        self._validate()
        tm = check_torsion_model(X)
        self.grid_ = AngleGrid(self.granularity)
        self.objective_ = optimization_polynomial(tm, self.grid_)
        self.a_const_ = self.a_const_factor * a_const_base(self.objective_, self.a_const_base)
        self.model_ = tm
        return self

    def transform(self, X):
        check_is_fitted(self)
        tm = check_torsion_model(X)
        objective = self.objective_ if tm is self.model_ else optimization_polynomial(tm, self.grid_)
        a_const = self.a_const_ if tm is self.model_ else self.a_const_factor * a_const_base(objective, self.a_const_base)
        return build_hubo(tm, self.grid_, a_const, self.chop, objective=objective)


class Quadratizer(TransformerMixin, BaseEstimator):
    """HuboProblem -> :class:`QuboProblem`, then the QUBO-level chop."""

    def __init__(self, chop=0.0, penalty_scale=None):
        self.chop = chop
        self.penalty_scale = penalty_scale

    def fit(self, X, y=None):
        check_hubo(X)
        check_scalar(self.chop, "chop", Real, low=0)
        check_scalar(self.penalty_scale, "penalty_scale", Real, low=0, include_low=False, allow_none=True)
        self.n_features_in_ = X.n_vars
        return self

    def transform(self, X):
        check_is_fitted(self)
        qubo = quadratize(check_hubo(X), self.penalty_scale)
        return chop_qubo(qubo, self.chop) if self.chop else qubo


class MolecularUnfolder(BaseEstimator):
    """Search the torsion grid for the most unfolded conformation.

    After ``fit(molecule)``: ``torsion_model_``, ``run_`` (a SolverRun),
    ``best_indices_``, ``best_angles_`` (radians) and ``best_value_``; for
    ``solver="sa"`` also ``hubo_`` and ``qubo_``. ``transform`` returns the
    unpruned molecule moved to the best angles.
    """

    def __init__(self, solver="exhaustive", granularity=8, max_torsions=None, a_const_factor=2.0,
                 a_const_base="max-coefficient", chop_hubo=0.0, chop_qubo=0.0, time_limit=1.0, seed=0,
                 epochs=500, restarts=10, rounds=10, workers=1, jobs=1, clock="wall"):
        self.solver = solver
        self.granularity = granularity
        self.max_torsions = max_torsions
        self.a_const_factor = a_const_factor
        self.a_const_base = a_const_base
        self.chop_hubo = chop_hubo
        self.chop_qubo = chop_qubo
        self.time_limit = time_limit
        self.seed = seed
        self.epochs = epochs
        self.restarts = restarts
        self.rounds = rounds
        self.workers = workers
        self.jobs = jobs
        self.clock = clock

    def fit(self, X, y=None):
        if self.solver not in SOLVERS:
            raise ValueError(f"solver must be one of {SOLVERS}, got {self.solver!r}")
        check_scalar(self.time_limit, "time_limit", Real, low=0, include_low=False)
        check_scalar(self.seed, "seed", Integral, low=0)
        for name in ("epochs", "restarts", "rounds", "workers", "jobs"):
            check_scalar(getattr(self, name), name, Integral, low=1)
        tm = TorsionModeler(self.max_torsions).fit(X).torsion_model_
        grid = AngleGrid(check_scalar(self.granularity, "granularity", Integral, low=2))
        if self.solver == "exhaustive":
            run = exhaustive(tm, grid, clock=self.clock)
        elif self.solver == "random":
            run = random_search(tm, grid, self.time_limit, self.seed, workers=self.workers, jobs=self.jobs,
                                clock=self.clock)
        elif self.solver == "geodock":
            run = geodock_greedy(tm, grid, self.rounds, clock=self.clock)
        else:
            encoder = HuboEncoder(self.granularity, self.a_const_factor, self.a_const_base, self.chop_hubo)
            self.hubo_ = encoder.fit_transform(tm)
            self.qubo_ = Quadratizer(self.chop_qubo).fit_transform(self.hubo_)
            cfg = SaConfig(epochs=self.epochs, restarts=self.restarts, seed=self.seed)
            run = simulated_annealing(self.qubo_, cfg, jobs=self.jobs, clock=self.clock,
                                      context={"a_const_factor": float(self.a_const_factor),
                                               "chop_qubo": float(self.chop_qubo)})
        self.torsion_model_ = tm
        self.grid_ = grid
        self.run_ = run
        self.best_indices_ = np.array(run.best_indices, dtype=int)
        self.best_angles_ = grid.values[self.best_indices_]
        self.best_value_ = run.best_value
        return self

    def transform(self, X=None) -> Molecule:
        check_is_fitted(self)
        return unfold_source(self.torsion_model_, self.best_angles_)

    def fit_transform(self, X, y=None) -> Molecule:
        return self.fit(X).transform(X)

    def predict(self, angles) -> np.ndarray:
        """Fragment objective for each row of torsion angles (radians)."""
        check_is_fitted(self)
        angles = np.atleast_2d(np.asarray(angles, dtype=float))
        for row in angles:
            check_angles(self.torsion_model_, row)
        return objective_fragment_batch(self.torsion_model_, angles)

    def score(self, X=None, y=None) -> float:
        check_is_fitted(self)
        return float(self.best_value_)
