import json

import pytest

from config import CONFIG_VERSION, FULL_SCALE_N_TRAJ
from modules.dynamics import SystemKind
from modules.ensemble import UniformRange
from modules.experiment_config import PRESETS, ExperimentConfig, load_config, parse_config_text, parse_vector
from utils.exceptions import ConfigError


class TestPresets:
    @pytest.mark.parametrize("name, expected", [
        ("fig1", dict(objective="quad1d", system="adaptive1d", rho=0.12, chi=121 / 4, psi=0.01, beta=0.75, x0=-40.0, x_star=25.0, n_steps=60)),
        ("fig4", dict(objective="quad1d", system="adaptive1d", rho=0.12, chi=121 / 4, psi=0.01, beta=0.75, x0=-40.0, x_star=25.0, n_steps=60)),
        ("fig5", dict(objective="x2cos", system="adaptive1d", rho=0.05, chi=0.09, psi=0.01, beta=0.75, x0=40.0, x_star=48.15, n_steps=200)),
        ("fig6", dict(objective="quad1d", system="adaptive1d", rho=0.12, chi=121 / 4, psi=0.01, beta=0.75, x0=-4e5, x_star=2.5e5, n_steps=60)),
        ("fig7", dict(objective="quad1d", system="nonadaptive1d", rho=0.05, chi=0.81, psi=0.01, beta=0.4, x0=20.0, x_star=25.0, n_steps=400)),
        ("fig8", dict(objective="quad1d", system="firstorder", rho=0.12, chi=1e-6, psi=81.0, beta=0.75, x0=-40.0, x_star=25.0, n_steps=400)),
        ("logistic", dict(objective="logistic", system="adaptive1d", rho=0.55, chi=100.0, psi=0.36, beta=0.5, x0=-240.0, x_star=350.0, n_steps=200)),
        ("fig9", dict(objective="quadNd", system="multidim", rho=0.25, chi=0.2025, psi=0.01, beta=0.93, x0=[0.0, 0.0, 0.0], x_star=[5.2e5, 1.23e5, -3.2e5], n_steps=2000)),
    ])
    def test_parameters_match_listing(self, name, expected):
        config = ExperimentConfig.from_preset(name)
        x_star = expected.pop("x_star")
        for key, value in expected.items():
            actual = config.system.value if key == "system" else getattr(config, key)
            assert actual == value, key
        assert config.objective_params["x_star"] == x_star
        assert config.eps == 1e-7
        assert config.preset == name

    def test_every_preset_builds(self):
        for name in PRESETS:
            config = ExperimentConfig.from_preset(name)
            config.algo_params()
            config.build_objective()
            config.ensemble_config()

    def test_unknown_preset(self):
        with pytest.raises(ConfigError):
            ExperimentConfig.from_preset("fig42")

    def test_default_output_path(self):
        assert ExperimentConfig.from_preset("fig7").out.endswith("fig7.csv")


class TestParsing:
    def test_preset_with_overrides(self):
        config = parse_config_text(json.dumps({"version": CONFIG_VERSION, "preset": "fig1", "rho": 0.1, "n_traj": 10}))
        assert config.rho == 0.1 and config.n_traj == 10 and config.beta == 0.75

    def test_objective_params_are_merged_with_preset(self):
        config = ExperimentConfig.from_dict({"preset": "fig6", "objective_params": {"x_star": 1.0}})
        assert config.objective_params == {"x_star": 1.0}
        assert config.x0 == -4e5

    def test_malformed_json_reports_line(self):
        text = '{\n  "version": 1,\n  "preset": "fig1"\n  "rho": 0.1\n}'
        with pytest.raises(ConfigError) as info:
            parse_config_text(text)
        assert info.value.line == 4
        assert str(info.value).startswith("line 4:")

    @pytest.mark.parametrize("document", [
        {"preset": "fig1"},
        {"version": 99, "preset": "fig1"},
        {"version": 1, "preset": "fig1", "colour": "blue"},
        {"version": 1, "objective": "quad1d", "system": "adaptive1d"},
        {"version": 1, "preset": "fig1", "system": "secondorder"},
        {"version": 1, "preset": "fig1", "objective": "rosenbrock"},
        {"version": 1, "preset": "fig1", "x0": {"normal": [0, 1]}},
        {"version": 1, "preset": "fig1", "rho": "fast"},
        {"version": 1, "preset": "fig1", "n_steps": None},
        {"version": 1, "preset": "fig1", "n_steps": 60.5},
        {"version": 1, "preset": "fig1", "n_traj": True},
        {"version": 1, "preset": "fig1", "x0": "left"},
        {"version": 1, "preset": "fig1", "x0": None},
        {"version": 1, "preset": "fig1", "y0": {"uniform": ["a", 1]}},
        {"version": 1, "preset": "fig1", "g_decay": "yes"},
        {"version": 1, "preset": "fig1", "system": [1]},
        [1, 2, 3],
    ])
    def test_invalid_documents(self, document):
        with pytest.raises(ConfigError):
            parse_config_text(json.dumps(document))

    def test_numeric_fields_are_coerced(self):
        config = parse_config_text(json.dumps({"version": 1, "preset": "fig1", "rho": "0.1", "n_steps": 30.0, "seed": 2 ** 63}))
        assert config.rho == 0.1
        assert config.n_steps == 30 and isinstance(config.n_steps, int)
        assert config.seed == 2 ** 63

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(tmp_path / "absent.json")

    def test_uniform_initial_conditions(self):
        config = ExperimentConfig.from_dict({"preset": "fig1", "x0": {"uniform": [-50, -30]}, "y0": {"uniform": [0, 1]}})
        assert config.x0 == UniformRange(-50.0, -30.0)
        assert config.ensemble_config().y0 == UniformRange(0.0, 1.0)


class TestSerialization:
    def test_sidecar_round_trip(self, tmp_path):
        config = ExperimentConfig.from_preset("fig1", n_traj=123, seed=9, x0={"uniform": [-50, -30]})
        document = config.to_dict(y0=[1.25], n_diverged=0)
        assert document["version"] == CONFIG_VERSION
        assert document["system"] == "adaptive1d"
        assert document["x0"] == {"uniform": [-50.0, -30.0]}

        path = tmp_path / "sidecar.json"
        path.write_text(json.dumps(document))
        again = load_config(path)
        assert again.y0 == [1.25]
        assert again.x0 == config.x0
        for name in ("rho", "beta", "chi", "psi", "eps", "n_traj", "n_steps", "seed", "objective_params", "system"):
            assert getattr(again, name) == getattr(config, name)

    def test_overrides(self):
        config = ExperimentConfig.from_preset("fig1").with_overrides(rho=0.2, x_star=30.0, seed=None)
        assert config.rho == 0.2
        assert config.objective_params["x_star"] == 30.0
        assert config.seed == ExperimentConfig.from_preset("fig1").seed

    def test_full_scale(self):
        assert ExperimentConfig.from_preset("fig1").full_scale().n_traj == FULL_SCALE_N_TRAJ

    def test_parse_vector(self):
        assert parse_vector("1.5") == 1.5
        assert parse_vector("1,2,-3e5") == [1.0, 2.0, -3e5]
        with pytest.raises(ConfigError):
            parse_vector("one")

    def test_system_kind_coerced(self):
        assert ExperimentConfig.from_preset("fig8").system is SystemKind.FIRST_ORDER
