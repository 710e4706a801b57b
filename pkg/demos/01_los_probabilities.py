"""
LOS probabilities towards one and several transmitters
======================================================

Obstacles on the middle line hide a transmitter whenever one of them covers
the point where the receiver-transmitter segment crosses that line.
"""

import numpy as np

from loscov import ScenarioParams, los_prob_joint, los_prob_single

# 20 obstacles per km, mean half-length 2.5 m, both line offsets 10 m
params = ScenarioParams(lambda_t=0.004, lambda_b=0.02, mu=0.4, d1=10, d2=10, d_star=1500)

# a single transmitter is seen with probability exp(-2 lambda_b / mu)
print("single transmitter:", los_prob_single(params.lambda_b, params.mu))

# two transmitters: close pairs share obstacles, far pairs are independent
for d in (0, 5, 10, 50, 100, 300):
    print(f"pair at separation {d:3d} m:", los_prob_joint(params, [0.0, float(d)]))
print("independent limit:", los_prob_single(params.lambda_b, params.mu) ** 2)

# any number of transmitters; the order of the positions does not matter
xs = np.array([40.0, -25.0, 0.0, 10.0])
print("four transmitters:", los_prob_joint(params, xs))
