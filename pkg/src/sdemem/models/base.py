"""Core model and parameter types for SDE mixed-effects models.

A model couples a latent Ito process dX = alpha(X, kappa, phi_i) dt +
sqrt(beta(X, kappa, phi_i)) dW observed through a noisy map y ~ p(y | x, xi),
with per-unit random effects phi_i whose components are a priori
N(mu_j, 1/tau_j). All ModelSpec callables take phi_i on the sampler's
unconstrained scale and map to natural parameters internally; the standalone
propagators in the concrete model modules take natural parameters.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.special import gammaln

from ..errors import ConfigError, NumericalModelError

__all__ = [
    "UnitData",
    "Dataset",
    "ParameterState",
    "NormalGammaPrior",
    "GammaPrior",
    "LogNormalPrior",
    "NormalPrior",
    "PriorSpec",
    "PointInit",
    "GaussianInit",
    "KernelInfo",
    "LnaSupport",
    "BridgeSupport",
    "ModelSpec",
    "SimDefaults",
    "sample_random_effects",
]

_LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass(frozen=True)
class UnitData:
    """Observations for one unit: strictly increasing times, rows of y."""

    unit_id: int
    times: np.ndarray
    obs: np.ndarray  # [n_obs, d_o]

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        obs = np.atleast_2d(np.asarray(self.obs, dtype=float))
        if obs.shape[0] != times.shape[0]:
            obs = obs.T
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "obs", obs)
        if times.ndim != 1 or times.size < 1:
            raise ConfigError(f"unit {self.unit_id}: times must be a nonempty vector")
        if obs.shape[0] != times.size:
            raise ConfigError(f"unit {self.unit_id}: obs/time length mismatch")
        if not np.all(np.isfinite(times)) or not np.all(np.isfinite(obs)):
            raise ConfigError(f"unit {self.unit_id}: nonfinite values")
        if np.any(np.diff(times) <= 0.0):
            raise ConfigError(f"unit {self.unit_id}: times must be strictly increasing")

    @property
    def n_obs(self):
        return self.times.size


@dataclass(frozen=True)
class Dataset:
    """A collection of units sharing one observation model."""

    units: Sequence[UnitData]

    def __post_init__(self):
        if len(self.units) < 1:
            raise ConfigError("dataset must contain at least one unit")
        d_o = {u.obs.shape[1] for u in self.units}
        if len(d_o) != 1:
            raise ConfigError("all units must share the observation dimension")

    @property
    def n_units(self):
        return len(self.units)

    @property
    def d_o(self):
        return self.units[0].obs.shape[1]


@dataclass
class ParameterState:
    """Full parameter state of the sampler.

    phi is [M, q] on the unconstrained scale, kappa and xi are natural-scale
    vectors (possibly empty kappa), and eta = (mu, tau) are the per-component
    Gaussian means and precisions of the random effects.
    """

    phi: np.ndarray
    kappa: np.ndarray
    xi: np.ndarray
    mu: np.ndarray
    tau: np.ndarray

    def __post_init__(self):
        self.phi = np.atleast_2d(np.asarray(self.phi, dtype=float))
        self.kappa = np.asarray(self.kappa, dtype=float).ravel()
        self.xi = np.asarray(self.xi, dtype=float).ravel()
        self.mu = np.asarray(self.mu, dtype=float).ravel()
        self.tau = np.asarray(self.tau, dtype=float).ravel()
        if self.mu.size != self.tau.size or self.mu.size != self.phi.shape[1]:
            raise ConfigError("eta components must match the random-effect dimension")
        if np.any(self.tau <= 0.0):
            raise ConfigError("precisions tau must be positive")
        for name in ("phi", "kappa", "xi", "mu", "tau"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise ConfigError(f"{name} contains nonfinite values")

    def copy(self):
        return ParameterState(
            self.phi.copy(), self.kappa.copy(), self.xi.copy(),
            self.mu.copy(), self.tau.copy(),
        )

    @property
    def eta(self):
        return np.concatenate([self.mu, self.tau])


@dataclass(frozen=True)
class NormalGammaPrior:
    """Conjugate prior for (mu_j, tau_j): tau_j ~ Ga(alpha_j, beta_j) and
    mu_j | tau_j ~ N(mu0_j, 1 / (m0_j tau_j)), independently over j."""

    mu0: np.ndarray
    m0: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray

    def __post_init__(self):
        for name in ("mu0", "m0", "alpha", "beta"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float).ravel())
        q = self.mu0.size
        if any(getattr(self, n).size != q for n in ("m0", "alpha", "beta")):
            raise ConfigError("Normal-Gamma hyperparameter vectors must share length")
        if np.any(self.m0 <= 0) or np.any(self.alpha <= 0) or np.any(self.beta <= 0):
            raise ConfigError("m0, alpha, beta must be positive")

    @property
    def q(self):
        return self.mu0.size

    def sample(self, rng):
        tau = rng.gamma(shape=self.alpha, scale=1.0 / self.beta)
        mu = rng.normal(self.mu0, 1.0 / np.sqrt(self.m0 * tau))
        return mu, tau

    def mean(self):
        return self.mu0.copy(), self.alpha / self.beta


class GammaPrior:
    """Gamma(shape, rate) prior on a positive scalar, evaluated on log scale.

    The density includes the log-transform Jacobian so MH ratios computed on
    the unconstrained scale target the natural-scale Gamma law.
    """

    positive = True

    def __init__(self, shape, rate):
        if shape <= 0 or rate <= 0:
            raise ConfigError("Gamma prior needs positive shape and rate")
        self.shape = float(shape)
        self.rate = float(rate)

    def log_density_unconstrained(self, z):
        z = float(z)
        if np.isnan(z):
            raise ValueError("z must not be NaN")
        if z > 709.0:
            # rate * exp(z) overflows; the density has underflowed to zero
            return -np.inf
        return (
            self.shape * np.log(self.rate)
            - gammaln(self.shape)
            + self.shape * z
            - self.rate * np.exp(z)
        )

    def to_natural(self, z):
        if z > 709.0:
            return float("inf")
        return float(np.exp(z))

    def from_natural(self, x):
        if x <= 0:
            raise ConfigError("value must be positive for a Gamma prior")
        return float(np.log(x))

    def initial_natural(self):
        return self.shape / self.rate


class LogNormalPrior:
    """log x ~ N(m, s^2) prior on a positive scalar."""

    positive = True

    def __init__(self, m, s):
        if s <= 0:
            raise ConfigError("LogNormal prior needs positive s")
        self.m = float(m)
        self.s = float(s)

    def log_density_unconstrained(self, z):
        z = float(z)
        if np.isnan(z):
            raise ValueError("z must not be NaN")
        r = (z - self.m) / self.s
        return -0.5 * r * r - np.log(self.s) - 0.5 * _LOG_2PI

    def to_natural(self, z):
        if z > 709.0:
            return float("inf")
        return float(np.exp(z))

    def from_natural(self, x):
        if x <= 0:
            raise ConfigError("value must be positive for a LogNormal prior")
        return float(np.log(x))

    def initial_natural(self):
        return float(np.exp(self.m))


class NormalPrior:
    """N(m, s^2) prior on an unconstrained scalar."""

    positive = False

    def __init__(self, m, s):
        if s <= 0:
            raise ConfigError("Normal prior needs positive s")
        self.m = float(m)
        self.s = float(s)

    def log_density_unconstrained(self, z):
        z = float(z)
        if np.isnan(z):
            raise ValueError("z must not be NaN")
        r = (z - self.m) / self.s
        return -0.5 * r * r - np.log(self.s) - 0.5 * _LOG_2PI

    def to_natural(self, z):
        return float(z)

    def from_natural(self, x):
        return float(x)

    def initial_natural(self):
        return self.m


@dataclass(frozen=True)
class PriorSpec:
    """Priors for one model: Normal-Gamma on eta, scalar priors on xi and kappa."""

    eta: NormalGammaPrior
    xi: Sequence[object]
    kappa: Sequence[object] = ()


@dataclass(frozen=True)
class PointInit:
    """Known initial state; value None means the unit's first observation."""

    value: Optional[np.ndarray] = None


@dataclass(frozen=True)
class GaussianInit:
    """Random initial state with independent components N(mean, sd^2)."""

    mean: np.ndarray
    sd: np.ndarray


@dataclass(frozen=True)
class KernelInfo:
    """Dispatch info for the compiled filter engine.

    family selects the transition family ("ou" or "gbm"), obs the built-in
    observation density ("identity" or "logsum"); pack maps (kappa, phi_i)
    to the natural parameter vector the engine expects.
    """

    family: str
    obs: str
    pack: Callable


@dataclass(frozen=True)
class LnaSupport:
    """Drift, diffusion and Jacobian of a model in its LNA coordinates,
    plus the linear observation row and per-unit initialization."""

    dim: int
    alpha: Callable  # (z [dim], phi_nat) -> [dim]
    beta: Callable  # (z [dim], phi_nat) -> [dim, dim]
    jacobian: Callable  # (z [dim], phi_nat) -> [dim, dim]
    obs_vector: np.ndarray  # P, [dim]
    init: Callable  # (unit, phi_nat) -> (a0 [dim], C0 [dim, dim])


@dataclass(frozen=True)
class BridgeSupport:
    """One-step conditional moments of a scalar Gaussian transition,
    used by the bridge proposal: x' | x ~ N(cond_mean, cond_var)."""

    cond_moments: Callable  # (x [N], kappa, phi_i, dt) -> (mean [N], var scalar)


@dataclass
class ModelSpec:
    """Definition of one SDE mixed-effects model.

    Callables are vectorized over a leading particle axis: drift and
    diffusion accept x of shape [N, d] (or [d]) and return matching shapes;
    obs_logdensity returns one log density per particle.
    """

    name: str
    d: int
    d_o: int
    q: int
    p: int = 0
    n_xi: int = 1
    drift: Callable = None
    diffusion: Callable = None  # full [.., d, d] matrix, PSD
    diffusion_diag: Callable = None  # optional diagonal fast path [.., d]
    obs_logdensity: Callable = None  # (y [d_o], x [N, d], xi) -> [N]
    obs_sample: Callable = None  # (x [d], xi, rng) -> y [d_o]
    exact_transition: Callable = None  # (x [N, d], kappa, phi_i, dt, z [N, d]) -> [N, d]
    bridge_support: BridgeSupport = None
    lna_support: LnaSupport = None
    exact_loglik: Callable = None  # (unit, phi_i, kappa, xi) -> float
    init_state: object = field(default_factory=PointInit)
    kernel: KernelInfo = None
    phi_names: Sequence[str] = ()
    xi_names: Sequence[str] = ("sigma_eps",)
    to_natural: Callable = None  # (kappa, phi_i) -> natural parameter vector
    sim_init: Callable = None  # (kappa, phi_i, rng) -> initial state [d]
    obs_gaussian_identity: bool = False  # y = x + N(0, sigma_eps^2), d = d_o = 1

    @property
    def supports_bridge(self):
        return self.bridge_support is not None

    @property
    def has_exact_loglik(self):
        return self.exact_loglik is not None

    def em_propagate(self, x, kappa, phi_i, dt_obs, n_substeps, gaussians):
        """Euler-Maruyama step over one observation gap split into L substeps.

        x may be a single state [d] or a particle block [N, d]; gaussians
        must then be [L, d] or [L, N, d]. Uses the diagonal diffusion fast
        path when the model declares one, otherwise a Cholesky factor with
        1e-12 jitter on failure.
        """
        if n_substeps < 1:
            raise ConfigError(f"n_substeps must be >= 1, got {n_substeps}")
        if dt_obs < 0.0:
            raise ValueError(f"dt_obs must be nonnegative, got {dt_obs}")
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        state = x[None, :] if single else x.copy()
        z = np.asarray(gaussians, dtype=float)
        if single:
            z = z[:, None, :]
        if z.shape != (n_substeps,) + state.shape:
            raise ConfigError(
                f"gaussians shape {z.shape} does not match {n_substeps} substeps of {state.shape}"
            )
        h = dt_obs / n_substeps
        sqrt_h = np.sqrt(h)
        for ell in range(n_substeps):
            a = self.drift(state, kappa, phi_i)
            if self.diffusion_diag is not None:
                b = self.diffusion_diag(state, kappa, phi_i)
                if np.any(b < 0.0) or not np.all(np.isfinite(b)):
                    raise NumericalModelError("diffusion diagonal left its domain", state=state)
                incr = np.sqrt(b) * z[ell]
            else:
                b = self.diffusion(state, kappa, phi_i)
                if not np.all(np.isfinite(b)):
                    raise NumericalModelError("diffusion is nonfinite", state=state)
                try:
                    root = np.linalg.cholesky(b)
                except np.linalg.LinAlgError:
                    jitter = 1e-12 * np.eye(self.d)
                    try:
                        root = np.linalg.cholesky(b + jitter)
                    except np.linalg.LinAlgError:
                        raise NumericalModelError(
                            "diffusion is not positive semidefinite", state=state
                        ) from None
                incr = np.einsum("...ij,...j->...i", root, z[ell])
            state = state + a * h + sqrt_h * incr
            if not np.all(np.isfinite(state)):
                raise NumericalModelError("state left the model domain", state=state)
        return state[0] if single else state


@dataclass(frozen=True)
class SimDefaults:
    """Default synthetic-data settings used by the CLI simulate command."""

    m_units: int
    n_obs: int
    dt: float
    sigma_eps: float
    eta_mu: np.ndarray
    eta_tau: np.ndarray
    t0: float = 0.0
    x0: Optional[np.ndarray] = None


def sample_random_effects(eta, n_units, rng):
    """Draw phi as [M, q] with phi_ij ~ N(mu_j, 1 / tau_j).

    eta is a (mu, tau) pair of length-q vectors.
    """
    mu, tau = (np.asarray(a, dtype=float).ravel() for a in eta)
    if mu.size != tau.size:
        raise ConfigError("mu and tau must share length")
    if np.any(tau <= 0.0):
        raise ConfigError("precisions tau must be positive")
    if n_units < 1:
        raise ConfigError("n_units must be >= 1")
    return rng.normal(mu, 1.0 / np.sqrt(tau), size=(n_units, mu.size))
