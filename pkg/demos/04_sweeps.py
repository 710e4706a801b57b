"""
Parameter sweeps to CSV
=======================

Sweeps write one CSV row per grid point plus a JSON sidecar holding the
resolved configuration.  The same recipes run from the command line with
``loscov sweep --recipe fig5 --out fig5.csv``.
"""

import csv
import tempfile
from pathlib import Path

from loscov import ExperimentSpec, load_scenario, recipe, run_experiment

out_dir = Path(tempfile.mkdtemp())

# pair LOS against separation, closed form only
spec = recipe("fig5", methods=("closed-form",), out=str(out_dir / "pair.csv"))
cols, rows = run_experiment(spec)
print(cols)
for row in rows[::12]:
    print(row)

# a custom sweep: full coverage against obstacle density, analytic and simulated
spec = ExperimentSpec(quantity="coverage-full", scenario=load_scenario("kcov"),
                      sweep={"lambda_b_per_km": [0.0, 10.0, 20.0, 30.0]},
                      methods=("nested-quadrature", "simulate"), trials=20_000, seed=7,
                      out=str(out_dir / "coverage.csv"))
run_experiment(spec)
with open(out_dir / "coverage.csv", newline="") as fh:
    for line in csv.reader(fh):
        print(line)
print("sidecar:", (out_dir / "coverage.json").read_text()[:200], "...")
