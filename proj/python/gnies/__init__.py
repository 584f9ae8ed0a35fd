"""Greedy search for interventional equivalence classes of linear Gaussian models.

Graphs, models and results travel as plain dicts with the same layout as the
command-line tool's JSON files.
"""

import json

import numpy as np

from . import _core
from ._core import DataError, Error, InvalidArgument, SolverError

__all__ = [
    "DataError",
    "Error",
    "InvalidArgument",
    "SolverError",
    "enumerate_class",
    "evaluate",
    "fit",
    "generate",
    "icpdag",
    "read_dataset",
    "score",
]


def _matrices(data):
    return [np.asarray(x, dtype=np.float64) for x in data]


def fit(data, method="greedy", lam=None, lambda_prime=0.5, targets=None, known_targets=(),
        pooled_ges=False, max_targets=-1, threads=0, turning=True, standardize=False):
    """Fit an interventional class to a list of (n_e x p) arrays, one per environment.

    With `targets` the targets are fixed; otherwise they are searched for.
    """
    out = _core.fit(_matrices(data), method, lam, lambda_prime,
                    None if targets is None else list(targets), list(known_targets),
                    pooled_ges, max_targets, threads, turning, standardize)
    return json.loads(out)


def generate(**config):
    """Random model and samples; keyword arguments follow the config file keys.

    Returns (model dict, list of arrays).
    """
    model, data = _core.generate(json.dumps(config))
    return json.loads(model), data


def evaluate(model, result, max_members=1_000_000, truncate=False):
    return json.loads(_core.evaluate(json.dumps(model), json.dumps(result), max_members, truncate))


def score(dag, targets, data, lam=None):
    """(loglik, dof, penalized score) of a DAG dict for the given targets."""
    return _core.score(json.dumps(dag), list(targets), _matrices(data), lam)


def icpdag(dag, targets):
    return json.loads(_core.icpdag(json.dumps(dag), list(targets)))


def enumerate_class(pdag, targets):
    return [json.loads(d) for d in _core.enumerate_class(json.dumps(pdag), list(targets))]


def read_dataset(path):
    return _core.read_dataset(str(path))
