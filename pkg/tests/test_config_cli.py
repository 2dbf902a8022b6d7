"""Config parsing, option validation, and the command-line front-end."""

import json
import os

import numpy as np
import pytest
from click.testing import CliRunner

from sdemem.cli import main as cli_main
from sdemem.cli import read_chain
from sdemem.config import (
    build_gibbs_config,
    load_config,
    parse_config_text,
    resolve_model,
    scheme_plan,
)
from sdemem.errors import ConfigError
from sdemem.models import get_model, load_dataset, load_truth
from sdemem.models.base import GammaPrior, LogNormalPrior, NormalPrior

runner = CliRunner()


def invoke(*args):
    return runner.invoke(cli_main, [str(a) for a in args], catch_exceptions=False)


SIM_CONF = """
model.name = ou
model.n_units = 3
model.n_obs = 20
model.dt = 0.25
model.sigma_eps = 0.3
model.eta_mu = -0.7, 2.3, -0.9
model.eta_tau = 4, 10, 4
mcmc.seed = 11
"""

KALMAN_CONF = SIM_CONF + """
scheme.name = kalman
mcmc.n_iters = 60
mcmc.burn_in = 10
"""


class TestConfigParser:
    def test_types_and_comments(self):
        cfg = parse_config_text(
            """
            # chain setup
            model.name = ou
            mcmc.n_iters = 500   # trailing comment
            scheme.rho = 0.25
            mcmc.adapt = off
            mcmc.joint_common = true
            model.eta_mu = -0.7, 2.3, -0.9
            mcmc.n_particles = 10, 20, 30
            diagnose.columns = mu_1, xi_1
            """
        )
        assert cfg.get("model.name") == "ou"
        assert cfg.get("mcmc.n_iters") == 500
        assert cfg.get("scheme.rho") == 0.25
        assert cfg.get("mcmc.adapt") is False
        assert cfg.get("mcmc.joint_common") is True
        assert cfg.get("model.eta_mu") == [-0.7, 2.3, -0.9]
        assert cfg.get("mcmc.n_particles") == [10, 20, 30]
        assert cfg.get("diagnose.columns") == ["mu_1", "xi_1"]
        assert "scheme.name" not in cfg

    def test_prior_distribution_values(self):
        cfg = parse_config_text(
            """
            prior.xi_1 = gamma(2, 1.5)
            prior.kappa_1 = lognormal(0.3, 0.8)
            prior.kappa_2 = normal(-1, 2)
            """
        )
        g = cfg.get("prior.xi_1")
        assert isinstance(g, GammaPrior) and g.shape == 2.0 and g.rate == 1.5
        assert isinstance(cfg.get("prior.kappa_1"), LogNormalPrior)
        assert isinstance(cfg.get("prior.kappa_2"), NormalPrior)

    def test_missing_equals_names_line(self):
        with pytest.raises(ConfigError, match=r"cfg:2: expected 'key = value'"):
            parse_config_text("model.name = ou\nmodel.n_units 4\n", source="cfg")

    def test_unknown_key_names_line(self):
        with pytest.raises(ConfigError, match=r"cfg:3: unknown config key 'model\.wibble'"):
            parse_config_text(
                "model.name = ou\n\nmodel.wibble = 3\n", source="cfg"
            )

    def test_duplicate_key_rejected(self):
        with pytest.raises(ConfigError, match=r"cfg:2: duplicate key"):
            parse_config_text("mcmc.seed = 1\nmcmc.seed = 2\n", source="cfg")

    def test_empty_value_rejected(self):
        with pytest.raises(ConfigError, match=r"cfg:1: empty key or value"):
            parse_config_text("model.name =\n", source="cfg")

    def test_bad_typed_value_names_key(self):
        with pytest.raises(ConfigError, match=r"cfg:1: bad value for mcmc\.n_iters"):
            parse_config_text("mcmc.n_iters = soon\n", source="cfg")

    def test_bad_prior_syntax(self):
        with pytest.raises(ConfigError, match=r"cfg:1: bad value for prior\.xi_1"):
            parse_config_text("prior.xi_1 = gamma(2)\n", source="cfg")

    def test_require_reports_missing_key(self):
        cfg = parse_config_text("model.name = ou\n", source="cfg")
        with pytest.raises(ConfigError, match=r"missing config key 'mcmc\.n_iters'"):
            cfg.require("mcmc.n_iters", "chain length")

    def test_load_config_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="cannot read config"):
            load_config(tmp_path / "absent.cfg")


class TestPriorOverrides:
    def test_eta_mean_broadcasts_scalar(self):
        cfg = parse_config_text("model.name = ou\nprior.eta_mean = 0.5\n")
        _, priors = resolve_model(cfg)
        assert np.allclose(priors.eta.mu0, [0.5, 0.5, 0.5])

    def test_eta_vector_length_checked(self):
        cfg = parse_config_text("model.name = ou\nprior.eta_shape = 1, 2\n")
        with pytest.raises(ConfigError, match="1 or 3 values"):
            resolve_model(cfg)

    def test_xi_prior_replaced(self):
        cfg = parse_config_text("model.name = ou\nprior.xi_1 = gamma(3, 7)\n")
        _, priors = resolve_model(cfg)
        assert priors.xi[0].shape == 3.0 and priors.xi[0].rate == 7.0

    def test_xi_index_out_of_range(self):
        cfg = parse_config_text("model.name = ou\nprior.xi_2 = gamma(3, 7)\n")
        with pytest.raises(ConfigError, match="1 xi component"):
            resolve_model(cfg)

    def test_kappa_index_on_model_without_kappa(self):
        cfg = parse_config_text("model.name = ou\nprior.kappa_1 = gamma(3, 7)\n")
        with pytest.raises(ConfigError, match="0 kappa component"):
            resolve_model(cfg)


def plan_for(model_name, lines):
    cfg = parse_config_text(f"model.name = {model_name}\n" + lines)
    info, _ = resolve_model(cfg)
    return scheme_plan(cfg, info.spec)


class TestSchemePlan:
    def test_kalman_on_linear_model(self):
        plan = plan_for("ou", "scheme.name = kalman\n")
        assert plan == {"scheme": "blocked", "rho": 0.0, "filter_kind": "kalman"}

    def test_kalman_needs_exact_likelihood(self):
        with pytest.raises(ConfigError, match="exact likelihood"):
            plan_for("tumor", "scheme.name = kalman\n")

    def test_kalman_rejects_filter_and_rho(self):
        with pytest.raises(ConfigError, match="does not use a particle filter"):
            plan_for("ou", "scheme.name = kalman\nscheme.filter = bootstrap\n")
        with pytest.raises(ConfigError, match="no auxiliary streams"):
            plan_for("ou", "scheme.name = kalman\nscheme.rho = 0.5\n")

    def test_lna_needs_support(self):
        plan = plan_for("tumor", "scheme.name = lna\n")
        assert plan["filter_kind"] == "lna"
        with pytest.raises(ConfigError, match="linear-noise support"):
            plan_for("tumor-ode", "scheme.name = lna\n")

    def test_pmmh_rejects_rho(self):
        with pytest.raises(ConfigError, match="fresh streams"):
            plan_for("ou", "scheme.name = pmmh\nscheme.rho = 0.9\n")

    def test_pmmh_naive_selects_naive_scheme(self):
        plan = plan_for("ou", "scheme.name = pmmh-naive\n")
        assert plan["scheme"] == "naive"
        assert plan["filter_kind"] == "bootstrap"

    def test_cpmmh_rho_range(self):
        assert plan_for("ou", "scheme.name = cpmmh\nscheme.rho = 0.99\n")["rho"] == 0.99
        assert plan_for("ou", "scheme.name = cpmmh\n")["rho"] == 0.0
        with pytest.raises(ConfigError, match=r"\[0, 1\)"):
            plan_for("ou", "scheme.name = cpmmh\nscheme.rho = 1.0\n")

    def test_bridge_needs_conditional_moments(self):
        plan = plan_for("ou", "scheme.name = cpmmh\nscheme.filter = bridge\n")
        assert plan["filter_kind"] == "bridge"
        with pytest.raises(ConfigError, match="conditional moments"):
            plan_for("tumor", "scheme.name = pmmh\nscheme.filter = bridge\n")

    def test_unknown_scheme_and_filter(self):
        with pytest.raises(ConfigError, match="unknown scheme"):
            plan_for("ou", "scheme.name = gibbs\n")
        with pytest.raises(ConfigError, match="unknown filter"):
            plan_for("ou", "scheme.name = pmmh\nscheme.filter = sir\n")


def gibbs_config_for(lines, n_units=3, seed=None):
    cfg = parse_config_text("model.name = ou\n" + lines)
    info, _ = resolve_model(cfg)
    return build_gibbs_config(cfg, info.spec, n_units, seed=seed)


class TestBuildGibbsConfig:
    def test_scalar_particle_count(self):
        gc = gibbs_config_for(
            "scheme.name = pmmh\nmcmc.n_iters = 10\nmcmc.n_particles = 64\n"
        )
        assert gc.n_particles == 64

    def test_per_unit_particle_counts(self):
        gc = gibbs_config_for(
            "scheme.name = pmmh\nmcmc.n_iters = 10\nmcmc.n_particles = 10, 20, 30\n"
        )
        assert gc.n_particles == [10, 20, 30]

    def test_particle_count_length_checked(self):
        with pytest.raises(ConfigError, match="1 or 3 values, got 2"):
            gibbs_config_for(
                "scheme.name = pmmh\nmcmc.n_iters = 10\nmcmc.n_particles = 10, 20\n"
            )

    def test_deterministic_scheme_ignores_particles(self):
        gc = gibbs_config_for(
            "scheme.name = kalman\nmcmc.n_iters = 10\nmcmc.n_particles = 10, 20\n"
        )
        assert gc.n_particles == 1

    def test_transition_validated(self):
        with pytest.raises(ConfigError, match="must be exact or em"):
            gibbs_config_for(
                "scheme.name = pmmh\nmcmc.n_iters = 10\nmcmc.transition = milstein\n"
            )

    def test_sort_mapping(self):
        base = "scheme.name = cpmmh\nscheme.rho = 0.9\nmcmc.n_iters = 10\n"
        assert gibbs_config_for(base).sort is None
        assert gibbs_config_for(base + "mcmc.sort = on\n").sort is True
        assert gibbs_config_for(base + "mcmc.sort = off\n").sort is False
        with pytest.raises(ConfigError, match="auto, on or off"):
            gibbs_config_for(base + "mcmc.sort = maybe\n")

    def test_backend_validated(self):
        with pytest.raises(ConfigError, match="auto, pure or compiled"):
            gibbs_config_for(
                "scheme.name = kalman\nmcmc.n_iters = 10\nmcmc.backend = fast\n"
            )

    def test_seed_flag_overrides_config(self):
        lines = "scheme.name = kalman\nmcmc.n_iters = 10\nmcmc.seed = 5\n"
        assert gibbs_config_for(lines).seed == 5
        assert gibbs_config_for(lines, seed=7).seed == 7

    def test_n_iters_required(self):
        with pytest.raises(ConfigError, match=r"missing config key 'mcmc\.n_iters'"):
            gibbs_config_for("scheme.name = kalman\n")

    def test_adapt_keys_flow_through(self):
        gc = gibbs_config_for(
            "scheme.name = kalman\nmcmc.n_iters = 10\n"
            "mcmc.adapt = off\nmcmc.adapt_target = 0.3\nmcmc.adapt_decay = 0.5\n"
        )
        assert gc.adapt.enabled is False
        assert gc.adapt.target == 0.3
        assert gc.adapt.decay == 0.5


@pytest.fixture(scope="module")
def sim_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("sim")
    conf = d / "config.txt"
    conf.write_text(KALMAN_CONF)
    res = invoke("simulate", "--config", conf, "--out", d)
    assert res.exit_code == 0, res.output
    return d


class TestSimulateCommand:
    def test_writes_loadable_outputs(self, sim_dir):
        ds = load_dataset(sim_dir / "data.csv")
        assert ds.n_units == 3
        assert all(u.times.size == 20 for u in ds.units)
        truth = load_truth(sim_dir / "truth.csv")
        assert "mu_1" in truth and "sigma_eps" in truth or "xi_1" in truth

    def test_same_seed_same_bytes(self, sim_dir, tmp_path):
        res = invoke("simulate", "--config", sim_dir / "config.txt", "--out", tmp_path)
        assert res.exit_code == 0
        assert (tmp_path / "data.csv").read_bytes() == (sim_dir / "data.csv").read_bytes()
        assert (tmp_path / "truth.csv").read_bytes() == (sim_dir / "truth.csv").read_bytes()

    def test_seed_flag_changes_data(self, sim_dir, tmp_path):
        res = invoke("simulate", "--config", sim_dir / "config.txt",
                     "--out", tmp_path, "--seed", 12)
        assert res.exit_code == 0
        assert (tmp_path / "data.csv").read_bytes() != (sim_dir / "data.csv").read_bytes()

    def test_summary_on_stdout(self, sim_dir, tmp_path):
        res = invoke("simulate", "--config", sim_dir / "config.txt", "--out", tmp_path)
        assert "wrote" in res.output and "3 units" in res.output
        quiet = invoke("simulate", "--config", sim_dir / "config.txt",
                       "--out", tmp_path, "--quiet")
        assert quiet.output == ""

    def test_bad_config_exits_2(self, tmp_path):
        conf = tmp_path / "bad.cfg"
        conf.write_text("model.name = ou\nmodel.wibble = 1\n")
        res = invoke("simulate", "--config", conf, "--out", tmp_path)
        assert res.exit_code == 2
        assert "error:" in res.stderr
        assert "bad.cfg:2" in res.stderr

    def test_wrong_eta_length_exits_2(self, tmp_path):
        conf = tmp_path / "bad.cfg"
        conf.write_text("model.name = ou\nmodel.eta_mu = 1, 2\n")
        res = invoke("simulate", "--config", conf, "--out", tmp_path)
        assert res.exit_code == 2
        assert "3 values" in res.stderr


@pytest.fixture(scope="module")
def kalman_run(tmp_path_factory, sim_dir):
    d = tmp_path_factory.mktemp("kalman_run")
    res = invoke("infer", "--config", sim_dir / "config.txt",
                 "--data", sim_dir / "data.csv", "--out", d)
    assert res.exit_code == 0, res.output
    return d


class TestInferCommand:
    def test_chain_file_structure(self, kalman_run, sim_dir):
        columns, draws = read_chain(kalman_run / "chain.csv")
        spec = get_model("ou").spec
        assert columns[: spec.q] == ["phi_1_1", "phi_1_2", "phi_1_3"]
        assert columns[-7:] == ["xi_1", "mu_1", "mu_2", "mu_3", "tau_1", "tau_2", "tau_3"]
        assert draws.shape == (60, len(columns))
        assert np.all(np.isfinite(draws))

    def test_telemetry_tracks_every_iteration(self, kalman_run):
        lines = (kalman_run / "telemetry.csv").read_text().splitlines()
        assert lines[0] == "iteration,loglik,unit_accept_rate,common_accept_rate"
        assert len(lines) == 61
        last = lines[-1].split(",")
        assert int(last[0]) == 60
        assert 0.0 <= float(last[2]) <= 1.0

    def test_meta_records_run_setup(self, kalman_run, sim_dir):
        meta = json.loads((kalman_run / "meta.json").read_text())
        assert meta["model"] == "ou"
        assert meta["scheme"] == "kalman"
        assert meta["sampler_scheme"] == "blocked"
        assert meta["rho"] == 0.0
        assert meta["seed"] == 11
        assert meta["n_iters"] == 60 and meta["burn_in"] == 10
        assert meta["columns"] == read_chain(kalman_run / "chain.csv")[0]
        assert meta["runtime_seconds"] > 0
        assert meta["data"] == str(sim_dir / "data.csv")

    def test_rerun_is_byte_identical(self, kalman_run, sim_dir, tmp_path):
        res = invoke("infer", "--config", sim_dir / "config.txt",
                     "--data", sim_dir / "data.csv", "--out", tmp_path, "--quiet")
        assert res.exit_code == 0
        assert (tmp_path / "chain.csv").read_bytes() == (kalman_run / "chain.csv").read_bytes()
        assert (tmp_path / "telemetry.csv").read_bytes() == (
            kalman_run / "telemetry.csv"
        ).read_bytes()
        a = json.loads((tmp_path / "meta.json").read_text())
        b = json.loads((kalman_run / "meta.json").read_text())
        a.pop("runtime_seconds"), b.pop("runtime_seconds")
        assert a == b

    def test_seed_flag_changes_chain(self, kalman_run, sim_dir, tmp_path):
        res = invoke("infer", "--config", sim_dir / "config.txt",
                     "--data", sim_dir / "data.csv", "--out", tmp_path,
                     "--seed", 12, "--quiet")
        assert res.exit_code == 0
        assert (tmp_path / "chain.csv").read_bytes() != (kalman_run / "chain.csv").read_bytes()
        assert json.loads((tmp_path / "meta.json").read_text())["seed"] == 12

    def test_missing_data_exits_2(self, sim_dir, tmp_path):
        res = invoke("infer", "--config", sim_dir / "config.txt",
                     "--data", tmp_path / "absent.csv", "--out", tmp_path)
        assert res.exit_code == 2
        assert "error:" in res.stderr

    def test_malformed_data_row_exits_2(self, sim_dir, tmp_path):
        rows = (sim_dir / "data.csv").read_text().splitlines()
        rows[2] = "0,0.25"
        bad = tmp_path / "bad.csv"
        bad.write_text("\n".join(rows) + "\n")
        res = invoke("infer", "--config", sim_dir / "config.txt",
                     "--data", bad, "--out", tmp_path)
        assert res.exit_code == 2
        assert "malformed row 3" in res.stderr

    def test_startup_degeneracy_exits_4(self, tmp_path):
        # an observation no particle can reach makes every startup weight zero
        data = tmp_path / "data.csv"
        data.write_text("unit_id,time,y1\n0,0.1,0.0\n0,0.2,1000000.0\n")
        conf = tmp_path / "conf.txt"
        conf.write_text(
            "model.name = ou\nscheme.name = pmmh\n"
            "mcmc.n_iters = 5\nmcmc.n_particles = 10\n"
        )
        res = invoke("infer", "--config", conf, "--data", data, "--out", tmp_path)
        assert res.exit_code == 4
        assert "zero likelihood" in res.stderr


class TestParticleSchemeEquivalence:
    @pytest.fixture(scope="class")
    def particle_case(self, tmp_path_factory):
        d = tmp_path_factory.mktemp("particle")
        sim = d / "sim.txt"
        sim.write_text(
            "model.name = ou\nmodel.n_units = 2\nmodel.n_obs = 12\n"
            "model.dt = 0.25\nmodel.sigma_eps = 0.3\n"
            "model.eta_mu = -0.7, 2.3, -0.9\nmodel.eta_tau = 4, 10, 4\n"
            "mcmc.seed = 3\n"
        )
        res = invoke("simulate", "--config", sim, "--out", d, "--quiet")
        assert res.exit_code == 0, res.output
        return d

    def run_scheme(self, case, tmp_path_factory, scheme_lines):
        d = tmp_path_factory.mktemp("chain")
        conf = d / "conf.txt"
        conf.write_text(
            "model.name = ou\nmcmc.n_iters = 40\nmcmc.n_particles = 25\n"
            "mcmc.seed = 3\n" + scheme_lines
        )
        res = invoke("infer", "--config", conf, "--data", case / "data.csv",
                     "--out", d, "--quiet")
        assert res.exit_code == 0, res.output
        return (d / "chain.csv").read_bytes()

    def test_cpmmh_rho_zero_matches_pmmh(self, particle_case, tmp_path_factory):
        pmmh = self.run_scheme(particle_case, tmp_path_factory, "scheme.name = pmmh\n")
        cpmmh = self.run_scheme(
            particle_case, tmp_path_factory, "scheme.name = cpmmh\nscheme.rho = 0.0\n"
        )
        assert pmmh == cpmmh

    def test_correlated_streams_change_the_chain(self, particle_case, tmp_path_factory):
        pmmh = self.run_scheme(particle_case, tmp_path_factory, "scheme.name = pmmh\n")
        cpmmh = self.run_scheme(
            particle_case, tmp_path_factory, "scheme.name = cpmmh\nscheme.rho = 0.9\n"
        )
        assert pmmh != cpmmh

    def test_naive_scheme_changes_the_chain(self, particle_case, tmp_path_factory):
        pmmh = self.run_scheme(particle_case, tmp_path_factory, "scheme.name = pmmh\n")
        naive = self.run_scheme(
            particle_case, tmp_path_factory, "scheme.name = pmmh-naive\n"
        )
        assert pmmh != naive


class TestReadChain:
    def write(self, tmp_path, text):
        p = tmp_path / "chain.csv"
        p.write_text(text)
        return p

    def test_roundtrip(self, tmp_path):
        p = self.write(tmp_path, "iteration,a,b\n1,0.5,1.5\n2,0.25,2.5\n")
        columns, draws = read_chain(p)
        assert columns == ["a", "b"]
        assert draws.tolist() == [[0.5, 1.5], [0.25, 2.5]]

    def test_truncated_final_row_tolerated(self, tmp_path):
        p = self.write(tmp_path, "iteration,a,b\n1,0.5,1.5\n2,0.25\n")
        _, draws = read_chain(p)
        assert draws.shape == (1, 2)
        p = self.write(tmp_path, "iteration,a,b\n1,0.5,1.5\n2,0.25,1e\n")
        _, draws = read_chain(p)
        assert draws.shape == (1, 2)

    def test_malformed_middle_row_names_line(self, tmp_path):
        p = self.write(tmp_path, "iteration,a,b\n1,0.5,1.5\n2,x,2.5\n3,0.1,0.2\n")
        with pytest.raises(ConfigError, match=r":3: malformed chain row"):
            read_chain(p)
        p = self.write(tmp_path, "iteration,a,b\n1,0.5\n2,0.2,0.3\n")
        with pytest.raises(ConfigError, match=r":2: expected 2 values"):
            read_chain(p)

    def test_header_required(self, tmp_path):
        p = self.write(tmp_path, "a,b\n1,0.5\n")
        with pytest.raises(ConfigError, match="leading iteration column"):
            read_chain(p)

    def test_empty_and_headerless_files(self, tmp_path):
        p = self.write(tmp_path, "")
        with pytest.raises(ConfigError, match="empty chain file"):
            read_chain(p)
        p = self.write(tmp_path, "iteration,a,b\n")
        with pytest.raises(ConfigError, match="no complete draws"):
            read_chain(p)


class TestTuneCommand:
    def test_deterministic_evaluator_tunes_to_one(self, sim_dir, tmp_path):
        res = invoke("tune", "--config", sim_dir / "config.txt",
                     "--data", sim_dir / "data.csv", "--out", tmp_path)
        assert res.exit_code == 0, res.output
        assert "recommended N = 1" in res.output
        lines = (tmp_path / "tuning.csv").read_text().splitlines()
        assert lines[0] == (
            "unit_id,n_particles,variance,rho_l,target,meets_target,n_degenerate,chosen"
        )
        rows = [ln.split(",") for ln in lines[1:]]
        assert sum(r[-1] == "1" for r in rows) == 3  # one chosen row per unit

    def test_cap_exceeded_exits_3(self, tmp_path):
        sim = tmp_path / "sim.txt"
        sim.write_text(
            "model.name = ou\nmodel.n_units = 1\nmodel.n_obs = 40\n"
            "model.dt = 0.25\nmodel.sigma_eps = 0.05\n"
            "model.eta_mu = -0.7, 2.3, -0.9\nmodel.eta_tau = 4, 10, 4\n"
            "mcmc.seed = 5\n"
        )
        res = invoke("simulate", "--config", sim, "--out", tmp_path, "--quiet")
        assert res.exit_code == 0
        conf = tmp_path / "tune.txt"
        conf.write_text(
            "model.name = ou\nscheme.name = pmmh\n"
            "tune.pilot = 2\ntune.replicates = 10\ntune.max_particles = 4\n"
        )
        res = invoke("tune", "--config", conf, "--data", tmp_path / "data.csv",
                     "--out", tmp_path)
        assert res.exit_code == 3
        assert "error:" in res.stderr


@pytest.fixture(scope="module")
def diagnose_runs(tmp_path_factory, sim_dir):
    conf = tmp_path_factory.mktemp("diag") / "conf.txt"
    conf.write_text(SIM_CONF + "scheme.name = kalman\nmcmc.n_iters = 400\nmcmc.burn_in = 100\n")
    dirs = []
    for seed in (21, 22):
        d = tmp_path_factory.mktemp(f"run{seed}")
        res = invoke("infer", "--config", conf, "--data", sim_dir / "data.csv",
                     "--out", d, "--seed", seed, "--quiet")
        assert res.exit_code == 0, res.output
        dirs.append(d)
    return dirs


class TestDiagnoseCommand:
    def test_outputs_and_baseline_normalisation(self, diagnose_runs, tmp_path):
        a, b = diagnose_runs
        res = invoke("diagnose", a / "chain.csv", b / "chain.csv", "--out", tmp_path)
        assert res.exit_code == 0, res.output
        lines = (tmp_path / "efficiency.csv").read_text().splitlines()
        assert lines[0] == "Algorithm,rho,N,CPU(m),mESS,mESS/m,Rel."
        assert len(lines) == 3
        first = lines[1].split(",")
        assert first[0] == "kalman"
        assert float(first[-1]) == 1.0  # baseline is its own reference
        assert float(first[4]) > 1.0

    def test_w1_zero_against_itself(self, diagnose_runs, tmp_path):
        a, b = diagnose_runs
        res = invoke("diagnose", a / "chain.csv", b / "chain.csv",
                     "--out", tmp_path, "--quiet")
        assert res.exit_code == 0
        rows = (tmp_path / "w1.csv").read_text().splitlines()
        assert rows[0] == "chain,parameter,w1,w1_per_sd"
        mine = [r.split(",") for r in rows[1:] if r.startswith(str(a / "chain.csv"))]
        other = [r.split(",") for r in rows[1:] if r.startswith(str(b / "chain.csv"))]
        assert len(mine) == 7 and len(other) == 7  # mu, tau, xi columns by default
        assert all(float(r[2]) == 0.0 for r in mine)
        assert all(np.isfinite(float(r[2])) and float(r[2]) >= 0 for r in other)

    def test_density_files_follow_bins(self, diagnose_runs, tmp_path):
        a, b = diagnose_runs
        conf = tmp_path / "conf.txt"
        conf.write_text("diagnose.bins = 16\ndiagnose.columns = mu_1, xi_1\n")
        res = invoke("diagnose", a / "chain.csv", b / "chain.csv",
                     "--config", conf, "--out", tmp_path, "--quiet")
        assert res.exit_code == 0
        for k in (1, 2):
            rows = (tmp_path / f"density_{k}.csv").read_text().splitlines()
            assert rows[0] == "parameter,value,density"
            assert len(rows) == 1 + 16 * 2
        w1 = (tmp_path / "w1.csv").read_text().splitlines()[1:]
        assert {r.split(",")[1] for r in w1} == {"mu_1", "xi_1"}

    def test_unknown_column_exits_2(self, diagnose_runs, tmp_path):
        a, _ = diagnose_runs
        conf = tmp_path / "conf.txt"
        conf.write_text("diagnose.columns = mu_9\n")
        res = invoke("diagnose", a / "chain.csv", "--config", conf, "--out", tmp_path)
        assert res.exit_code == 2
        assert "unknown chain columns: mu_9" in res.stderr

    def test_bare_chain_without_meta(self, diagnose_runs, tmp_path):
        bare = tmp_path / "bare"
        bare.mkdir()
        (bare / "chain.csv").write_bytes((diagnose_runs[0] / "chain.csv").read_bytes())
        res = invoke("diagnose", bare / "chain.csv", "--out", tmp_path, "--quiet")
        assert res.exit_code == 0, res.output
        assert (tmp_path / "efficiency.csv").exists()
