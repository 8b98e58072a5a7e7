import os
from config import OUTPUT_DIR

def setup_output_dir(path=None):
    """Create the directory that will hold `path` (or the default output directory)"""
    directory = os.path.dirname(path) if path else OUTPUT_DIR
    if directory:
        os.makedirs(directory, exist_ok=True)
    return directory or "."

def sidecar_path(csv_path):
    """results/fig1.csv -> results/fig1.json"""
    return os.path.splitext(csv_path)[0] + ".json"

def paths_csv_path(csv_path):
    """results/fig1.csv -> results/fig1_paths.csv"""
    stem, ext = os.path.splitext(csv_path)
    return f"{stem}_paths{ext or '.csv'}"
