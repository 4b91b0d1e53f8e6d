"""From a CSV file to a verdict, the way the command line does it."""
import tempfile
from pathlib import Path

import numpy as np

from socausal import cli
from socausal.closedform import GaussMixtureModel, sample_gauss_mixture
from socausal.data import from_columns, load_csv, save_csv

x, y = sample_gauss_mixture(GaussMixtureModel(0.5, -2.0, 2.0, 1.0), 1500, np.random.default_rng(1))
with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "pair.csv"
    save_csv(from_columns({"switch": x, "level": y}), path)
    print(load_csv(path).summary_json())
    cli.main(["infer", "--input", str(path), "--columns", "switch,level"])
