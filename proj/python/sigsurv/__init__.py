"""Signature-based dynamic survival analysis.

Models cross the boundary as JSON text; the helpers below decode them.
"""

import json

from . import _sigsurv
from ._sigsurv import (
    Dataset,
    NumericalError,
    ValidationError,
    fbm,
    load_dataset,
    save_dataset,
    sig_dim,
    signature,
    simulate_ou,
    simulate_thinning,
    simulate_tumor,
)

__all__ = [
    "Dataset",
    "NumericalError",
    "ValidationError",
    "divergences",
    "evaluate",
    "fbm",
    "fit_coxsig",
    "load_dataset",
    "neg_log_likelihood",
    "save_dataset",
    "sig_dim",
    "signature",
    "simulate_ou",
    "simulate_thinning",
    "simulate_tumor",
    "survival",
]


def _text(model):
    return model if isinstance(model, str) else json.dumps(model)


def fit_coxsig(dataset, depth=2, plus=False, eta1=0.0, eta2=0.0, gamma=0.1, fast=False):
    """fast=True: preconditioned, accelerated solver with the same optimum."""
    return json.loads(_sigsurv.fit_coxsig(dataset, depth, plus, eta1, eta2, gamma, fast))


def neg_log_likelihood(model, dataset):
    return _sigsurv.neg_log_likelihood(_text(model), dataset)


def evaluate(model, dataset, dt, times=()):
    return json.loads(_sigsurv.evaluate(_text(model), dataset, dt, list(times)))


def divergences(truth, model, dataset):
    return json.loads(_sigsurv.divergences(_text(truth), _text(model), dataset))


def survival(model, dataset, t, dt):
    return _sigsurv.survival(_text(model), dataset, t, dt)
