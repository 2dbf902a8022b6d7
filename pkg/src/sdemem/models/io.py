"""CSV persistence for datasets and ground-truth sidecars.

Dataset files have the header unit_id,time,y1[,y2...]; sidecars have
parameter,name,value rows. Floats are written with repr so a save/load
round trip is bit-exact. A file truncated mid-row parses up to the last
complete row; a malformed row anywhere else is an error naming the row.
"""

from __future__ import annotations

import numpy as np

from ..errors import ConfigError
from .base import Dataset, ParameterState, UnitData

__all__ = ["save_dataset", "load_dataset", "save_truth", "load_truth", "truth_to_state"]


def save_dataset(dataset, path):
    cols = ",".join(f"y{k + 1}" for k in range(dataset.d_o))
    with open(path, "w") as fh:
        fh.write(f"unit_id,time,{cols}\n")
        for unit in dataset.units:
            for t, row in zip(unit.times, unit.obs):
                vals = ",".join(repr(float(v)) for v in row)
                fh.write(f"{unit.unit_id},{repr(float(t))},{vals}\n")


def load_dataset(path):
    with open(path) as fh:
        lines = fh.read().splitlines()
    lines = [ln for ln in lines if ln.strip()]
    if not lines:
        raise ConfigError(f"{path}: empty dataset file")
    header = [h.strip() for h in lines[0].split(",")]
    if len(header) < 3 or header[0] != "unit_id" or header[1] != "time":
        raise ConfigError(f"{path}: expected header unit_id,time,y1,...")
    width = len(header)
    rows = []
    for k, line in enumerate(lines[1:], start=2):
        fields = line.split(",")
        try:
            if len(fields) != width:
                raise ValueError
            rows.append((int(fields[0]), [float(f) for f in fields[1:]]))
        except ValueError:
            if k == len(lines):
                break  # trailing partial row from a truncated write
            raise ConfigError(f"{path}: malformed row {k}") from None
    if not rows:
        raise ConfigError(f"{path}: no complete data rows")
    by_unit = {}
    for uid, vals in rows:
        by_unit.setdefault(uid, []).append(vals)
    units = []
    for uid in sorted(by_unit):
        block = np.asarray(by_unit[uid], dtype=float)
        order = np.argsort(block[:, 0], kind="stable")
        block = block[order]
        units.append(UnitData(unit_id=uid, times=block[:, 0], obs=block[:, 1:]))
    return Dataset(units=units)


def save_truth(state, model, path):
    """Write the generating parameters as parameter,name,value rows."""
    with open(path, "w") as fh:
        fh.write("parameter,name,value\n")
        m, q = state.phi.shape
        for i in range(m):
            for j in range(q):
                fh.write(f"phi,phi_{i + 1}_{j + 1},{repr(float(state.phi[i, j]))}\n")
        for k in range(state.kappa.size):
            fh.write(f"kappa,kappa_{k + 1},{repr(float(state.kappa[k]))}\n")
        for k, name in enumerate(model.xi_names):
            fh.write(f"xi,{name},{repr(float(state.xi[k]))}\n")
        for j in range(state.mu.size):
            fh.write(f"eta,mu_{j + 1},{repr(float(state.mu[j]))}\n")
        for j in range(state.tau.size):
            fh.write(f"eta,tau_{j + 1},{repr(float(state.tau[j]))}\n")


def load_truth(path):
    """Read a sidecar into a flat {name: value} dict."""
    with open(path) as fh:
        lines = [ln for ln in fh.read().splitlines() if ln.strip()]
    if not lines or [h.strip() for h in lines[0].split(",")] != ["parameter", "name", "value"]:
        raise ConfigError(f"{path}: expected header parameter,name,value")
    out = {}
    for k, line in enumerate(lines[1:], start=2):
        fields = line.split(",")
        try:
            if len(fields) != 3:
                raise ValueError
            out[fields[1].strip()] = float(fields[2])
        except ValueError:
            if k == len(lines):
                break
            raise ConfigError(f"{path}: malformed row {k}") from None
    return out


def truth_to_state(truth, model, n_units):
    """Assemble a ParameterState from a sidecar dict."""
    try:
        phi = np.array(
            [[truth[f"phi_{i + 1}_{j + 1}"] for j in range(model.q)] for i in range(n_units)]
        )
        kappa = np.array([truth[f"kappa_{k + 1}"] for k in range(model.p)])
        xi = np.array([truth[name] for name in model.xi_names])
        mu = np.array([truth[f"mu_{j + 1}"] for j in range(model.q)])
        tau = np.array([truth[f"tau_{j + 1}"] for j in range(model.q)])
    except KeyError as err:
        raise ConfigError(f"truth sidecar is missing {err.args[0]}") from None
    return ParameterState(phi=phi, kappa=kappa, xi=xi, mu=mu, tau=tau)
