"""Model definitions, priors, and data handling.

Each registered model bundles its ModelSpec with default priors and
simulation settings so the CLI can run end to end from a model name alone.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError
from .base import (
    BridgeSupport,
    Dataset,
    GammaPrior,
    GaussianInit,
    KernelInfo,
    LnaSupport,
    LogNormalPrior,
    ModelSpec,
    NormalGammaPrior,
    NormalPrior,
    ParameterState,
    PointInit,
    PriorSpec,
    SimDefaults,
    UnitData,
    sample_random_effects,
)
from .io import load_dataset, load_truth, save_dataset, save_truth, truth_to_state
from .ou import make_ou_model, ou_exact_propagate, ou_transition_moments
from .simulate import simulate_dataset
from .tumor import gbm_exact_propagate, make_tumor_model, make_tumor_ode_model, odemem_loglik

__all__ = [
    "BridgeSupport",
    "Dataset",
    "GammaPrior",
    "GaussianInit",
    "KernelInfo",
    "LnaSupport",
    "LogNormalPrior",
    "ModelInfo",
    "ModelSpec",
    "NormalGammaPrior",
    "NormalPrior",
    "ParameterState",
    "PointInit",
    "PriorSpec",
    "SimDefaults",
    "UnitData",
    "get_model",
    "list_models",
    "register_model",
    "load_dataset",
    "load_truth",
    "gbm_exact_propagate",
    "make_ou_model",
    "make_tumor_model",
    "make_tumor_ode_model",
    "odemem_loglik",
    "ou_exact_propagate",
    "ou_transition_moments",
    "sample_random_effects",
    "save_dataset",
    "save_truth",
    "simulate_dataset",
    "truth_to_state",
]


@dataclass(frozen=True)
class ModelInfo:
    """A model spec together with its default priors and simulation settings."""

    spec: ModelSpec
    priors: PriorSpec
    sim: SimDefaults


def _with_x0(spec, x0):
    if x0 is None:
        return spec
    return dataclasses.replace(
        spec, init_state=PointInit(np.asarray(x0, dtype=float)), sim_init=None
    )


def _ou_info(x0=None):
    return ModelInfo(
        spec=_with_x0(make_ou_model("ou", neuronal=False), x0),
        priors=PriorSpec(
            eta=NormalGammaPrior(
                mu0=[0.0, 1.0, 0.0], m0=[1.0, 1.0, 1.0],
                alpha=[2.0, 2.0, 2.0], beta=[1.0, 0.5, 1.0],
            ),
            xi=(GammaPrior(1.0, 0.4),),
        ),
        sim=SimDefaults(
            m_units=40, n_obs=200, dt=0.05, sigma_eps=0.3,
            eta_mu=np.array([-0.7, 2.3, -0.9]), eta_tau=np.array([4.0, 10.0, 4.0]),
            t0=0.05,
        ),
    )


def _neuronal_info(x0=None):
    return ModelInfo(
        spec=_with_x0(make_ou_model("neuronal-ou", neuronal=True), x0),
        priors=PriorSpec(
            eta=NormalGammaPrior(
                mu0=np.log([0.1, 1.5, 0.5]), m0=[1.0, 1.0, 1.0],
                alpha=[2.0, 2.0, 2.0], beta=[1.0, 1.0, 1.0],
            ),
            xi=(LogNormalPrior(-1.0, 1.0),),
        ),
        sim=SimDefaults(
            m_units=10, n_obs=800, dt=0.15, sigma_eps=0.02,
            eta_mu=np.log([0.04, 0.4, 0.43]), eta_tau=np.array([10.0, 10.0, 10.0]),
            t0=0.15,
        ),
    )


def _tumor_info(x0=None):
    return ModelInfo(
        spec=make_tumor_model(x0) if x0 is not None else make_tumor_model(),
        priors=PriorSpec(
            eta=NormalGammaPrior(
                mu0=[-2.0] * 4, m0=[0.2] * 4, alpha=[2.0] * 4, beta=[0.2] * 4,
            ),
            xi=(LogNormalPrior(0.0, 1.0),),
        ),
        sim=SimDefaults(
            m_units=10, n_obs=21, dt=1.0, sigma_eps=float(np.sqrt(0.2)),
            eta_mu=np.log([0.29, 0.25, 0.09, 0.34]),
            eta_tau=np.array([10.0, 10.0, 10.0, 10.0]),
            t0=0.0, x0=np.array([75.0, 75.0]),
        ),
    )


def _tumor_ode_info(x0=None):
    return ModelInfo(
        spec=make_tumor_ode_model(x0) if x0 is not None else make_tumor_ode_model(),
        priors=PriorSpec(
            eta=NormalGammaPrior(
                mu0=[-2.0] * 2, m0=[0.2] * 2, alpha=[2.0] * 2, beta=[0.2] * 2,
            ),
            xi=(LogNormalPrior(0.0, 1.0),),
        ),
        sim=SimDefaults(
            m_units=10, n_obs=21, dt=1.0, sigma_eps=float(np.sqrt(0.2)),
            eta_mu=np.log([0.29, 0.09]), eta_tau=np.array([10.0, 10.0]),
            t0=0.0, x0=np.array([75.0, 75.0]),
        ),
    )


_REGISTRY = {
    "ou": _ou_info,
    "neuronal-ou": _neuronal_info,
    "tumor": _tumor_info,
    "tumor-ode": _tumor_ode_info,
}


def list_models():
    return sorted(_REGISTRY)


def get_model(name, x0=None):
    """Return the ModelInfo registered under ``name``.

    x0 overrides the model's initial latent state where supported.
    """
    try:
        factory = _REGISTRY[name]
    except KeyError:
        raise ConfigError(
            f"unknown model {name!r}; available: {', '.join(list_models())}"
        ) from None
    if x0 is None:
        return factory()
    try:
        return factory(x0=x0)
    except TypeError:
        raise ConfigError(f"model {name!r} does not accept an x0 override") from None


def register_model(name, factory):
    """Register a custom ModelInfo factory under ``name``."""
    if name in _REGISTRY:
        raise ConfigError(f"model {name!r} is already registered")
    _REGISTRY[name] = factory
