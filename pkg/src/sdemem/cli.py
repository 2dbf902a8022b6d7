"""Batch command-line front-end.

Subcommands: simulate, tune, infer, diagnose. Each reads a flat key=value
config file, writes CSV outputs into --out, and uses exit codes
0 (ok), 2 (input error), 3 (tuning failure), 4 (runtime degeneracy).
All statistical outputs are deterministic given (config, seed); wall-clock
timings live only in meta.json and the efficiency table.
"""

from __future__ import annotations

import json
import os
import sys

import click
import numpy as np

from . import aux_random
from .aux_random import substream
from .config import build_gibbs_config, load_config, resolve_model, scheme_plan
from .diagnostics import EfficiencyReport, efficiency_table, mess, wasserstein1d
from .errors import (
    ConfigError,
    NumericalModelError,
    StartupDegeneracyError,
    TuningFailureError,
    UndefinedStatisticError,
)
from .filters.backend import have_compiled
from .models import load_dataset, load_truth, save_dataset, save_truth, truth_to_state
from .models.base import ParameterState
from .models.simulate import simulate_dataset
from .samplers.gibbs import chain_columns, run_gibbs
from .tuning import tune_particles

__all__ = ["main"]


def _fmt(v):
    return repr(float(v))


def _fail(code, message):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _guarded(fn):
    try:
        fn()
    except (ConfigError, OSError) as exc:
        _fail(2, str(exc))
    except TuningFailureError as exc:
        _fail(3, str(exc))
    except (StartupDegeneracyError, NumericalModelError) as exc:
        _fail(4, str(exc))


def _outdir(out):
    os.makedirs(out, exist_ok=True)
    return out


def _seed_for(cfg, seed_flag):
    if seed_flag is not None:
        return int(seed_flag)
    return int(cfg.get("mcmc.seed", 0))


@click.group()
def main():
    """Exact Bayesian inference for SDE mixed-effects models."""


_config_opt = click.option("--config", "config_path", required=True,
                           type=click.Path(), help="Path to a key=value config file.")
_data_opt = click.option("--data", "data_path", required=True,
                         type=click.Path(), help="Dataset CSV.")
_out_opt = click.option("--out", "out_dir", default=".", show_default=True,
                        type=click.Path(file_okay=False), help="Output directory.")
_seed_opt = click.option("--seed", default=None, type=int,
                         help="Override mcmc.seed from the config.")
_quiet_opt = click.option("--quiet", is_flag=True, help="Suppress summaries.")


@main.command()
@_config_opt
@_out_opt
@_seed_opt
@_quiet_opt
def simulate(config_path, out_dir, seed, quiet):
    """Simulate a dataset and write data.csv plus a truth.csv sidecar."""

    def run():
        cfg = load_config(config_path)
        info, _ = resolve_model(cfg)
        sim = info.sim
        n_units = cfg.get("model.n_units", sim.m_units)
        n_obs = cfg.get("model.n_obs", sim.n_obs)
        dt = cfg.get("model.dt", sim.dt)
        t0 = cfg.get("model.t0", sim.t0)
        sigma = cfg.get("model.sigma_eps", sim.sigma_eps)
        eta_mu = np.asarray(cfg.get("model.eta_mu", sim.eta_mu), dtype=float)
        eta_tau = np.asarray(cfg.get("model.eta_tau", sim.eta_tau), dtype=float)
        if eta_mu.size != info.spec.q or eta_tau.size != info.spec.q:
            raise ConfigError(
                f"model.eta_mu / model.eta_tau need {info.spec.q} values"
            )
        kappa = np.asarray(cfg.get("model.kappa", []), dtype=float)
        if kappa.size != info.spec.p:
            raise ConfigError(f"model.kappa needs {info.spec.p} values")
        rng = substream(_seed_for(cfg, seed), 0, 0, aux_random.PURPOSE_SIM)
        dataset, state = simulate_dataset(
            info.spec, eta=(eta_mu, eta_tau), kappa=kappa, xi=(sigma,),
            n_units=n_units, n_obs=n_obs, dt=dt, t0=t0, rng=rng,
        )
        out = _outdir(out_dir)
        data_path = os.path.join(out, "data.csv")
        truth_path = os.path.join(out, "truth.csv")
        save_dataset(dataset, data_path)
        save_truth(state, info.spec, truth_path)
        if not quiet:
            t_lo = min(u.times[0] for u in dataset.units)
            t_hi = max(u.times[-1] for u in dataset.units)
            click.echo(
                f"wrote {data_path}: {dataset.n_units} units, "
                f"{n_obs} obs/unit, t in [{t_lo:g}, {t_hi:g}]"
            )
            click.echo(f"wrote {truth_path}")

    _guarded(run)


def _central_state(cfg, data_path, info, priors, n_units):
    truth_path = cfg.get("tune.truth")
    if truth_path is None:
        candidate = os.path.join(os.path.dirname(os.path.abspath(data_path)), "truth.csv")
        truth_path = candidate if os.path.exists(candidate) else None
    if truth_path is not None:
        return truth_to_state(load_truth(truth_path), info.spec, n_units)
    mu, tau = priors.eta.mean()
    return ParameterState(
        phi=np.tile(mu, (n_units, 1)),
        kappa=np.array([p.initial_natural() for p in priors.kappa]),
        xi=np.array([p.initial_natural() for p in priors.xi]),
        mu=mu, tau=tau,
    )


@main.command()
@_config_opt
@_data_opt
@_out_opt
@_seed_opt
@_quiet_opt
def tune(config_path, data_path, out_dir, seed, quiet):
    """Recommend per-unit particle counts and write tuning.csv."""

    def run():
        cfg = load_config(config_path)
        info, priors = resolve_model(cfg)
        dataset = load_dataset(data_path)
        plan = scheme_plan(cfg, info.spec)
        state = _central_state(cfg, data_path, info, priors, dataset.n_units)
        report = tune_particles(
            dataset, info.spec, state,
            rho=plan["rho"],
            pilot=cfg.get("tune.pilot", 10),
            n_replicates=cfg.get("tune.replicates", 50),
            seed=_seed_for(cfg, seed),
            kind=plan["filter_kind"],
            transition=cfg.get("mcmc.transition", "exact"),
            n_substeps=cfg.get("mcmc.n_substeps", 1),
            backend=None if cfg.get("mcmc.backend", "auto") == "auto"
            else cfg.get("mcmc.backend"),
            max_particles=cfg.get("tune.max_particles", 2**16),
        )
        out = _outdir(out_dir)
        path = os.path.join(out, "tuning.csv")
        chosen = {
            (r.unit_id, r.n_particles, r.variance): True for r in report.units
        }
        with open(path, "w") as fh:
            fh.write("unit_id,n_particles,variance,rho_l,target,meets_target,"
                     "n_degenerate,chosen\n")
            for row in report.trajectory:
                key = (row["unit_id"], row["n_particles"], row["variance"])
                fh.write(
                    ",".join(
                        [
                            str(row["unit_id"]),
                            str(row["n_particles"]),
                            _fmt(row["variance"]),
                            "" if row["rho_l"] is None else _fmt(row["rho_l"]),
                            "" if row["target"] is None else _fmt(row["target"]),
                            "1" if row["meets_target"] else "0",
                            str(row["n_degenerate"]),
                            "1" if chosen.pop(key, False) else "0",
                        ]
                    )
                    + "\n"
                )
        if not quiet:
            for r in report.units:
                rl = "" if r.rho_l is None else f", rho_l={r.rho_l:.3f}"
                click.echo(
                    f"unit {r.unit_id}: N={r.n_particles} "
                    f"(variance {r.variance:.3g} <= target {r.target:.3g}{rl})"
                )
            click.echo(f"recommended N = {report.n_particles}; wrote {path}")

    _guarded(run)


@main.command()
@_config_opt
@_data_opt
@_out_opt
@_seed_opt
@_quiet_opt
def infer(config_path, data_path, out_dir, seed, quiet):
    """Run the Gibbs sampler; write chain.csv, telemetry.csv, meta.json."""

    def run():
        cfg = load_config(config_path)
        info, priors = resolve_model(cfg)
        dataset = load_dataset(data_path)
        gc = build_gibbs_config(cfg, info.spec, dataset.n_units, seed=seed)
        out = _outdir(out_dir)
        chain_path = os.path.join(out, "chain.csv")
        telem_path = os.path.join(out, "telemetry.csv")

        with open(chain_path, "w") as chain_fh, open(telem_path, "w") as telem_fh:
            wrote_header = False
            telem_fh.write("iteration,loglik,unit_accept_rate,common_accept_rate\n")

            def on_iteration(j, row, temps):
                nonlocal wrote_header
                if not wrote_header:
                    # header deferred until run_gibbs validated the setup
                    chain_fh.write("iteration," + ",".join(output_columns) + "\n")
                    wrote_header = True
                chain_fh.write(str(j) + "," + ",".join(_fmt(v) for v in row) + "\n")
                telem_fh.write(
                    f"{j},{_fmt(temps['loglik'])},"
                    f"{_fmt(temps['unit_accepts'].mean() / j)},"
                    f"{_fmt(temps['common_accepts'].mean() / j)}\n"
                )

            output_columns = chain_columns(info.spec, dataset.n_units)
            output = run_gibbs(dataset, info.spec, priors, gc, on_iteration)

        rates = output.acceptance_rates()
        meta = {
            "model": info.spec.name,
            "scheme": cfg.get("scheme.name"),
            "sampler_scheme": output.scheme,
            "rho": output.rho,
            "n_particles": list(map(int, output.n_particles)),
            "filter_kinds": list(output.filter_kinds),
            "seed": output.seed,
            "n_iters": output.n_iters,
            "burn_in": output.burn_in,
            "columns": list(output.columns),
            "runtime_seconds": output.runtime_seconds,
            "unit_accept_rates": [float(r) for r in rates["units"]],
            "common_accept_rates": [float(r) for r in rates["common"]],
            "backend_compiled": have_compiled(),
            "data": os.path.abspath(data_path),
        }
        with open(os.path.join(out, "meta.json"), "w") as fh:
            json.dump(meta, fh, indent=2, sort_keys=True)
            fh.write("\n")
        if not quiet:
            click.echo(
                f"wrote {chain_path}: {output.n_iters} iterations "
                f"({output.runtime_seconds:.1f}s)"
            )
            click.echo(
                "acceptance: units "
                + "/".join(f"{r:.2f}" for r in rates["units"][:5])
                + (" ..." if dataset.n_units > 5 else "")
                + "; common "
                + "/".join(f"{r:.2f}" for r in rates["common"])
            )

    _guarded(run)


def read_chain(path):
    """Load a chain CSV written by cmd_infer (iteration column first).

    Tolerates a truncated final row so interrupted runs stay diagnosable;
    any malformed row before the last raises ConfigError with its number.
    """
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise ConfigError(f"{path}: empty chain file")
    header = [h.strip() for h in lines[0].split(",")]
    if not header or header[0] != "iteration":
        raise ConfigError(f"{path}: expected a leading iteration column")
    columns = header[1:]
    rows = []
    for k, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        try:
            values = [float(p) for p in parts[1:]]
            int(parts[0])
        except ValueError:
            if k == len(lines):
                break  # truncated tail from an interrupted run
            raise ConfigError(f"{path}:{k}: malformed chain row") from None
        if len(values) != len(columns):
            if k == len(lines):
                break
            raise ConfigError(f"{path}:{k}: expected {len(columns)} values")
        rows.append(values)
    if not rows:
        raise ConfigError(f"{path}: no complete draws")
    return columns, np.asarray(rows)


def _read_meta(chain_path):
    meta_path = os.path.join(os.path.dirname(os.path.abspath(chain_path)), "meta.json")
    if not os.path.exists(meta_path):
        return {}
    with open(meta_path) as fh:
        return json.load(fh)


@main.command()
@click.argument("chains", nargs=-1, required=True, type=click.Path())
@click.option("--config", "config_path", default=None, type=click.Path(),
              help="Optional config with diagnose.* keys.")
@_out_opt
@_quiet_opt
def diagnose(chains, config_path, out_dir, quiet):
    """Compare chains: efficiency.csv, w1.csv, and density CSVs."""

    def run():
        cfg = load_config(config_path) if config_path else None
        baseline_path = cfg.get("diagnose.baseline") if cfg else None
        bins = cfg.get("diagnose.bins", 128) if cfg else 128
        wanted = cfg.get("diagnose.columns") if cfg else None

        paths = list(chains)
        if baseline_path is not None and baseline_path not in paths:
            paths.insert(0, baseline_path)
        base_idx = paths.index(baseline_path) if baseline_path else 0

        loaded = []
        for p in paths:
            columns, draws = read_chain(p)
            meta = _read_meta(p)
            burn = int(meta.get("burn_in", 0))
            if burn >= draws.shape[0]:
                burn = 0
            loaded.append((p, columns, draws[burn:], meta))

        ref_cols = loaded[0][1]
        for p, columns, _, _ in loaded[1:]:
            if columns != ref_cols:
                raise ConfigError(f"{p}: chain columns differ from {loaded[0][0]}")
        if wanted is None:
            wanted = [c for c in ref_cols if not c.startswith("phi_")]
        missing = [c for c in wanted if c not in ref_cols]
        if missing:
            raise ConfigError(f"unknown chain columns: {', '.join(missing)}")
        sel = [ref_cols.index(c) for c in wanted]

        out = _outdir(out_dir)
        reports = []
        for p, _, post, meta in loaded:
            try:
                m = mess(post, sel)
            except UndefinedStatisticError:
                m = float("nan")
            minutes = meta.get("runtime_seconds", float("nan")) / 60.0
            label = meta.get("scheme") or os.path.basename(os.path.dirname(p) or p)
            nlist = meta.get("n_particles", [0])
            reports.append(
                EfficiencyReport(
                    algorithm=label,
                    rho=float(meta.get("rho", 0.0)),
                    n_particles=int(max(nlist)),
                    cpu_minutes=minutes,
                    min_ess=m,
                    ess_per_minute=m / minutes if minutes > 0 else float("nan"),
                )
            )
        base_eff = reports[base_idx].ess_per_minute
        table = []
        for r in reports:
            rel = r.ess_per_minute / base_eff if base_eff and base_eff > 0 else float("nan")
            table.append((r, rel))

        eff_path = os.path.join(out, "efficiency.csv")
        with open(eff_path, "w") as fh:
            fh.write("Algorithm,rho,N,CPU(m),mESS,mESS/m,Rel.\n")
            for r, rel in table:
                fh.write(
                    f"{r.algorithm},{r.rho:g},{r.n_particles},"
                    f"{r.cpu_minutes:.4g},{r.min_ess:.4g},"
                    f"{r.ess_per_minute:.4g},{rel:.4g}\n"
                )

        base_post = loaded[base_idx][2]
        w1_path = os.path.join(out, "w1.csv")
        with open(w1_path, "w") as fh:
            fh.write("chain,parameter,w1,w1_per_sd\n")
            for p, _, post, _ in loaded:
                for c, jcol in zip(wanted, sel):
                    d = wasserstein1d(post[:, jcol], base_post[:, jcol])
                    sd = float(base_post[:, jcol].std(ddof=1))
                    per_sd = d / sd if sd > 0 else float("inf") if d > 0 else 0.0
                    fh.write(f"{p},{c},{_fmt(d)},{_fmt(per_sd)}\n")

        for k, (p, _, post, _) in enumerate(loaded, start=1):
            dens_path = os.path.join(out, f"density_{k}.csv")
            with open(dens_path, "w") as fh:
                fh.write("parameter,value,density\n")
                for c, jcol in zip(wanted, sel):
                    hist, edges = np.histogram(post[:, jcol], bins=bins, density=True)
                    mids = 0.5 * (edges[:-1] + edges[1:])
                    for v, d in zip(mids, hist):
                        fh.write(f"{c},{_fmt(v)},{_fmt(d)}\n")

        if not quiet:
            click.echo(f"wrote {eff_path}, {w1_path} and {len(loaded)} density files")
            for (r, rel), (p, _, _, _) in zip(table, loaded):
                click.echo(
                    f"{p}: mESS={r.min_ess:.4g}, mESS/m={r.ess_per_minute:.4g}, "
                    f"Rel.={rel:.3g}"
                )

    _guarded(run)


if __name__ == "__main__":
    main()
