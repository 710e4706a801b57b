"""
Checking the closed forms against a full simulation
===================================================

The simulator samples obstacles and transmitters and applies the exact
geometry, so every analytic value has an independent Monte-Carlo twin.
"""

import math

from loscov import (CoverageQuery, SimConfig, full_coverage_prob, load_scenario,
                    los_prob_joint, validate)
from loscov.simulate import sim_coverage, sim_ergodic_los, sim_joint_los, sim_volume_fraction

params = load_scenario("standard")
cfg = SimConfig(params, n_trials=100_000, seed=1)

# joint LOS towards a pair
est = sim_joint_los(cfg, [0.0, 10.0])
print(f"pair: simulated {est.value:.5f} +- {est.stderr:.5f}, "
      f"closed form {los_prob_joint(params, [0.0, 10.0]):.5f}")

# the covered fraction of the obstacle line is the NLOS probability
vf = sim_volume_fraction(SimConfig(params, 2000, seed=2))
print(f"volume fraction: {vf.value:.5f} +- {vf.stderr:.5f}, expected {1 - math.exp(-0.1):.5f}")

# full coverage at a short detection radius
small = load_scenario("kcov")
sim = sim_coverage(SimConfig(small, 50_000, seed=3))
ref = full_coverage_prob(CoverageQuery(small, method="nested-quadrature")).value
print(f"full coverage: simulated {sim.value:.5f} +- {sim.stderr:.5f}, analytic {ref:.5f}")

# a moving receiver sees the same LOS fraction over time
moving = params.replace(v=10.0)
erg = sim_ergodic_los(SimConfig(moving, 1, seed=4, mode="ergodic", horizon=2500.0))
print(f"time average: {erg.value:.5f} +- {erg.stderr:.5f} (batch means)")

# the validation report bundles these checks
report = validate(params, budget=20_000, seed=5)
for row in report.rows:
    print(f"{'PASS' if row.passed else 'FAIL'} {row.name}")
