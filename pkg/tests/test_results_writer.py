import json

import numpy as np
import pandas as pd

from modules.ensemble import TrajectoryPath
from modules.results_writer import ResultsWriter
from utils.file_utils import paths_csv_path, setup_output_dir, sidecar_path


class TestFileUtils:
    def test_derived_paths(self):
        assert sidecar_path("results/fig1.csv") == "results/fig1.json"
        assert paths_csv_path("results/fig1.csv") == "results/fig1_paths.csv"

    def test_setup_output_dir_creates_parents(self, tmp_path):
        target = tmp_path / "a" / "b" / "out.csv"
        setup_output_dir(str(target))
        assert target.parent.is_dir()


class TestResultsWriter:
    def test_csv_round_trip_is_exact(self, output_dir):
        rng = np.random.default_rng(42)
        frame = pd.DataFrame({"k": np.arange(5), "mean_x": rng.normal(size=5) * 1e5, "sigma_x": rng.random(5) / 3})
        path = ResultsWriter().write_frame(frame, str(output_dir / "run.csv"))
        assert path is not None
        back = pd.read_csv(path, float_precision="round_trip")
        pd.testing.assert_frame_equal(back, frame)
        header = open(path).readline().strip()
        assert header == "k,mean_x,sigma_x"

    def test_sidecar(self, output_dir):
        csv = str(output_dir / "run.csv")
        path = ResultsWriter().write_sidecar({"version": 1, "seed": 3}, csv)
        assert path == str(output_dir / "run.json")
        assert json.load(open(path)) == {"version": 1, "seed": 3}

    def test_paths_table(self, output_dir):
        paths = [
            TrajectoryPath(index=i, x=np.arange(4.0)[:, None] + i, y=-np.arange(4.0)[:, None])
            for i in range(2)
        ]
        path = ResultsWriter().write_paths(paths, str(output_dir / "run.csv"))
        frame = pd.read_csv(path)
        assert list(frame.columns) == ["trajectory", "k", "x", "y"]
        assert len(frame) == 8
        assert frame.loc[frame["trajectory"] == 1, "x"].tolist() == [1.0, 2.0, 3.0, 4.0]

    def test_failures_return_none(self, tmp_path):
        blocker = tmp_path / "file.txt"
        blocker.write_text("x")
        writer = ResultsWriter()
        assert writer.write_frame(pd.DataFrame({"k": [0]}), str(blocker / "run.csv")) is None
        assert writer.write_sidecar({}, str(blocker / "run.csv")) is None
        assert writer.read_frame(str(tmp_path / "absent.csv")) is None

    def test_compare_with_theory(self):
        simulated = pd.DataFrame({"k": [0, 1, 2], "mean_x": [0.0, 1.0, 2.0], "sigma_x": [0.0, 0.5, 0.4],
                                  "mean_y": [0.0] * 3, "sigma_y": [0.0] * 3})
        theory = pd.DataFrame({"k": [0, 1, 2], "theory_mean_x": [0.0, 1.0, 2.0],
                               "theory_sigma_x_upper": [0.0, 0.6, 0.3]})
        joined = ResultsWriter.compare_with_theory(simulated, theory)
        np.testing.assert_allclose(joined["sigma_gap"], [0.0, 0.1, -0.1])
        assert {"sigma_x", "theory_sigma_x_upper", "sigma_gap"} <= set(joined.columns)
