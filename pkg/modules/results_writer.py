import json
import pandas as pd
from config import CSV_FLOAT_FORMAT
from utils.file_utils import paths_csv_path, setup_output_dir, sidecar_path
from utils.logger import logger

class ResultsWriter:
    def __init__(self, float_format=CSV_FLOAT_FORMAT):
        self.float_format = float_format

    def read_frame(self, path):
        """
        Reads a results CSV and returns it as a Pandas DataFrame.
        Assumes the first row is the header.
        """
        try:
            df = pd.read_csv(path, float_precision="round_trip")
            if df.empty:
                logger.warning(f"Results file {path} has a header but no rows.")
            logger.info(f"Successfully read {len(df)} rows from {path}.")
            return df

        except Exception as e:
            logger.error(f"Failed to read results from {path}: {e}", exc_info=True)
            return None

    def write_frame(self, frame, path):
        """Writes one row per step with full double precision; returns the path or None."""
        try:
            setup_output_dir(path)
            logger.info(f"Writing {len(frame)} rows to {path}...")
            frame.to_csv(path, index=False, float_format=self.float_format)
            return path

        except Exception as e:
            logger.error(f"Failed to write results CSV {path}: {e}", exc_info=True)
            return None

    def write_sidecar(self, document, csv_path):
        path = sidecar_path(csv_path)
        try:
            setup_output_dir(path)
            with open(path, "w", encoding="utf-8") as f:
                json.dump(document, f, indent=2)
                f.write("\n")
            logger.info(f"Resolved config written to {path}")
            return path

        except Exception as e:
            logger.error(f"Failed to write sidecar {path}: {e}", exc_info=True)
            return None

    def write_paths(self, paths, csv_path):
        """Long-format trajectory,k,x,y table (first coordinate) next to the results CSV."""
        path = paths_csv_path(csv_path)
        rows = [
            pd.DataFrame({
                "trajectory": p.index,
                "k": range(len(p.x)),
                "x": p.x[:, 0],
                "y": p.y[:, 0],
            })
            for p in paths
        ]
        frame = pd.concat(rows, ignore_index=True) if rows else pd.DataFrame(columns=["trajectory", "k", "x", "y"])
        return self.write_frame(frame, path)

    @staticmethod
    def compare_with_theory(simulated, theory):
        """Joins a simulate CSV with a theoretical profile on k; sigma_gap = bound − empirical."""
        joined = simulated[["k", "mean_x", "sigma_x"]].merge(theory, on="k", how="inner")
        joined["sigma_gap"] = joined["theory_sigma_x_upper"] - joined["sigma_x"]
        return joined
