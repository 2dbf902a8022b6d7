"""Declarative run configuration.

Config files are flat ``key = value`` text: one dotted key per line,
``#`` comments, comma-separated lists. Sections are one level deep
(model.*, scheme.*, prior.*, mcmc.*, tune.*, diagnose.*, paths.*).
Unknown or duplicate keys are rejected so typos fail loudly.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ConfigError
from .models import get_model
from .models.base import GammaPrior, LogNormalPrior, NormalPrior, PriorSpec
from .samplers.gibbs import AdaptConfig, GibbsConfig

__all__ = [
    "RunConfig",
    "load_config",
    "parse_config_text",
    "build_gibbs_config",
    "resolve_model",
    "scheme_plan",
    "SCHEMES",
]

SCHEMES = ("kalman", "lna", "pmmh", "pmmh-naive", "cpmmh")
FILTERS = ("bootstrap", "bridge")


def _bool(s):
    v = s.strip().lower()
    if v in ("true", "yes", "on", "1"):
        return True
    if v in ("false", "no", "off", "0"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _floats(s):
    return [float(p) for p in s.split(",") if p.strip() != ""]


def _ints(s):
    return [int(p) for p in s.split(",") if p.strip() != ""]


def _strs(s):
    return [p.strip() for p in s.split(",") if p.strip() != ""]


_DIST_RE = re.compile(r"^(gamma|lognormal|normal)\(([^,()]+),([^,()]+)\)$")


def _dist(s):
    m = _DIST_RE.match(s.replace(" ", ""))
    if not m:
        raise ValueError(
            f"expected gamma(a, b), lognormal(m, s) or normal(m, s), got {s!r}"
        )
    kind, a, b = m.group(1), float(m.group(2)), float(m.group(3))
    if kind == "gamma":
        return GammaPrior(a, b)
    if kind == "lognormal":
        return LogNormalPrior(a, b)
    return NormalPrior(a, b)


_KEY_TYPES = {
    "model.name": str,
    "model.x0": _floats,
    "model.n_units": int,
    "model.n_obs": int,
    "model.dt": float,
    "model.t0": float,
    "model.sigma_eps": float,
    "model.eta_mu": _floats,
    "model.eta_tau": _floats,
    "model.kappa": _floats,
    "scheme.name": str,
    "scheme.rho": float,
    "scheme.filter": str,
    "mcmc.n_iters": int,
    "mcmc.burn_in": int,
    "mcmc.n_particles": _ints,
    "mcmc.seed": int,
    "mcmc.n_substeps": int,
    "mcmc.transition": str,
    "mcmc.sort": str,
    "mcmc.joint_common": _bool,
    "mcmc.adapt": _bool,
    "mcmc.adapt_target": float,
    "mcmc.adapt_decay": float,
    "mcmc.adapt_init_sd": float,
    "mcmc.freeze_adapt_after_burn_in": _bool,
    "mcmc.init_kappa": _floats,
    "mcmc.init_xi": _floats,
    "mcmc.backend": str,
    "mcmc.lna_substeps": int,
    "prior.eta_mean": _floats,
    "prior.eta_strength": _floats,
    "prior.eta_shape": _floats,
    "prior.eta_rate": _floats,
    "tune.pilot": int,
    "tune.replicates": int,
    "tune.truth": str,
    "tune.max_particles": int,
    "diagnose.baseline": str,
    "diagnose.bins": int,
    "diagnose.columns": _strs,
    "paths.data": str,
    "paths.out": str,
}

_PATTERN_KEYS = (
    (re.compile(r"^prior\.kappa_(\d+)$"), _dist),
    (re.compile(r"^prior\.xi_(\d+)$"), _dist),
)


@dataclass
class RunConfig:
    """Parsed configuration; unset keys stay None and fall back to defaults."""

    values: dict = field(default_factory=dict)
    source: str = "<config>"

    def get(self, key, default=None):
        return self.values.get(key, default)

    def require(self, key, why=""):
        if key not in self.values:
            hint = f" ({why})" if why else ""
            raise ConfigError(f"{self.source}: missing config key {key!r}{hint}")
        return self.values[key]

    def __contains__(self, key):
        return key in self.values


def parse_config_text(text, source="<config>"):
    """Parse config text into a RunConfig, validating keys and types."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if not key or not value:
            raise ConfigError(f"{source}:{lineno}: empty key or value")
        conv = _KEY_TYPES.get(key)
        if conv is None:
            for pat, pconv in _PATTERN_KEYS:
                if pat.match(key):
                    conv = pconv
                    break
        if conv is None:
            raise ConfigError(f"{source}:{lineno}: unknown config key {key!r}")
        if key in values:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        try:
            values[key] = conv(value)
        except (ValueError, ConfigError) as exc:
            raise ConfigError(f"{source}:{lineno}: bad value for {key}: {exc}") from None
    return RunConfig(values=values, source=source)


def load_config(path):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config_text(text, source=str(path))


def _override_priors(cfg, priors, model):
    eta = priors.eta
    fields = {
        "prior.eta_mean": "mu0",
        "prior.eta_strength": "m0",
        "prior.eta_shape": "alpha",
        "prior.eta_rate": "beta",
    }
    updates = {}
    for key, name in fields.items():
        if key in cfg:
            vec = cfg.get(key)
            if len(vec) == 1:
                vec = vec * eta.q
            if len(vec) != eta.q:
                raise ConfigError(
                    f"{key} needs 1 or {eta.q} values for model {model.name}"
                )
            updates[name] = np.asarray(vec, dtype=float)
    if updates:
        eta = type(eta)(
            mu0=updates.get("mu0", eta.mu0),
            m0=updates.get("m0", eta.m0),
            alpha=updates.get("alpha", eta.alpha),
            beta=updates.get("beta", eta.beta),
        )
    kappa = list(priors.kappa)
    xi = list(priors.xi)
    for key, value in cfg.values.items():
        m = re.match(r"^prior\.(kappa|xi)_(\d+)$", key)
        if not m:
            continue
        part, idx = m.group(1), int(m.group(2)) - 1
        target = kappa if part == "kappa" else xi
        size = model.p if part == "kappa" else model.n_xi
        if not 0 <= idx < size:
            raise ConfigError(
                f"{key}: model {model.name} has {size} {part} component(s)"
            )
        target[idx] = value
    return PriorSpec(eta=eta, xi=tuple(xi), kappa=tuple(kappa))


def resolve_model(cfg):
    """Build (ModelInfo, PriorSpec) from model.* and prior.* keys."""
    name = cfg.require("model.name", "which model to use")
    x0 = cfg.get("model.x0")
    info = get_model(name, x0=np.asarray(x0, dtype=float) if x0 else None)
    priors = _override_priors(cfg, info.priors, info.spec)
    return info, priors


def scheme_plan(cfg, spec):
    """Map scheme.* keys onto sampler settings, enforcing compatibility.

    Returns dict(scheme=, rho=, filter_kind=).
    """
    name = cfg.require("scheme.name", "one of " + ", ".join(SCHEMES))
    if name not in SCHEMES:
        raise ConfigError(
            f"unknown scheme {name!r}; expected one of {', '.join(SCHEMES)}"
        )
    rho = cfg.get("scheme.rho")
    filt = cfg.get("scheme.filter")

    if name in ("kalman", "lna"):
        if filt is not None:
            raise ConfigError(f"scheme {name} does not use a particle filter")
        if rho not in (None, 0.0):
            raise ConfigError(f"scheme {name} has no auxiliary streams; remove scheme.rho")
        if name == "kalman" and not spec.has_exact_loglik:
            raise ConfigError(
                f"scheme kalman needs an exact likelihood, which model "
                f"{spec.name} does not provide"
            )
        if name == "lna" and spec.lna_support is None:
            raise ConfigError(
                f"scheme lna needs linear-noise support, which model "
                f"{spec.name} does not provide"
            )
        return {"scheme": "blocked", "rho": 0.0, "filter_kind": name}

    filt = filt or "bootstrap"
    if filt not in FILTERS:
        raise ConfigError(
            f"unknown filter {filt!r}; expected one of {', '.join(FILTERS)}"
        )
    if filt == "bridge" and not spec.supports_bridge:
        raise ConfigError(
            f"the bridge filter needs conditional moments, which model "
            f"{spec.name} does not provide"
        )
    if filt == "bootstrap" and spec.exact_transition is None and spec.drift is None:
        raise ConfigError(f"model {spec.name} cannot be particle filtered")

    if name in ("pmmh", "pmmh-naive"):
        if rho not in (None, 0.0):
            raise ConfigError(f"scheme {name} uses fresh streams; remove scheme.rho")
        return {
            "scheme": "naive" if name == "pmmh-naive" else "blocked",
            "rho": 0.0,
            "filter_kind": filt,
        }

    rho = 0.0 if rho is None else float(rho)
    if not 0.0 <= rho < 1.0:
        raise ConfigError("scheme.rho must lie in [0, 1)")
    return {"scheme": "blocked", "rho": rho, "filter_kind": filt}


def build_gibbs_config(cfg, spec, n_units, seed=None):
    """Assemble the GibbsConfig for cmd_infer from a parsed RunConfig."""
    plan = scheme_plan(cfg, spec)
    uses_particles = plan["filter_kind"] in FILTERS

    counts = cfg.get("mcmc.n_particles", [100])
    if uses_particles:
        if len(counts) == 1:
            n_particles = counts[0]
        elif len(counts) == n_units:
            n_particles = list(counts)
        else:
            raise ConfigError(
                f"mcmc.n_particles needs 1 or {n_units} values, got {len(counts)}"
            )
    else:
        n_particles = 1  # unused by deterministic evaluators

    transition = cfg.get("mcmc.transition", "exact")
    if transition not in ("exact", "em"):
        raise ConfigError("mcmc.transition must be exact or em")
    if transition == "exact" and uses_particles and spec.exact_transition is None:
        raise ConfigError(
            f"model {spec.name} has no exact transition; set mcmc.transition = em"
        )
    if transition == "em" and spec.drift is None:
        raise ConfigError(f"model {spec.name} has no drift; cannot discretise")

    sort_key = cfg.get("mcmc.sort", "auto")
    if sort_key not in ("auto", "on", "off"):
        raise ConfigError("mcmc.sort must be auto, on or off")
    sort = None if sort_key == "auto" else (sort_key == "on")

    backend = cfg.get("mcmc.backend", "auto")
    if backend not in ("auto", "pure", "compiled"):
        raise ConfigError("mcmc.backend must be auto, pure or compiled")

    n_iters = cfg.require("mcmc.n_iters", "chain length")
    adapt = AdaptConfig(
        enabled=cfg.get("mcmc.adapt", True),
        target=cfg.get("mcmc.adapt_target", 0.234),
        decay=cfg.get("mcmc.adapt_decay", 0.6),
        init_sd=cfg.get("mcmc.adapt_init_sd", 0.1),
        freeze_after_burn_in=cfg.get("mcmc.freeze_adapt_after_burn_in", False),
    )
    return GibbsConfig(
        n_iters=n_iters,
        burn_in=cfg.get("mcmc.burn_in", 0),
        scheme=plan["scheme"],
        rho=plan["rho"],
        n_particles=n_particles,
        filter_kind=plan["filter_kind"],
        transition=transition,
        n_substeps=cfg.get("mcmc.n_substeps", 1),
        sort=sort,
        seed=int(seed if seed is not None else cfg.get("mcmc.seed", 0)),
        joint_common=cfg.get("mcmc.joint_common", True),
        adapt=adapt,
        init_kappa=cfg.get("mcmc.init_kappa"),
        init_xi=cfg.get("mcmc.init_xi"),
        lna_substeps=cfg.get("mcmc.lna_substeps", 8),
        backend=None if backend == "auto" else backend,
    )
