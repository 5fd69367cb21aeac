"""
Seven BTS's on a hexagonal grid
===============================

Drop seven BTS's on the vertices of a 100 m x 100 m hexagonal layout,
build the efficiency table and compare the three allocation schemes as the
per-BTS load grows. Simulation checks the analytic delay from above.
"""

import numpy as np

from hetnet_spectrum import experiments as ex
from hetnet_spectrum.queuesim import SimConfig

cfg = ex.ExperimentConfig(loads=(0.1, 0.3, 0.5, 0.7, 0.9, 1.1),
                          sim=SimConfig(horizon=1e4, replications=5))
scenario = ex.build_scenario(cfg)
print("BTS positions (m):")
print(np.round(scenario.deployment.bts_positions, 1))
print("hexagons served:", np.round(scenario.deployment.served_weight(), 2))

rows = ex.run_sweep(cfg, scenario)
print(ex.rows_to_csv(rows))

# light load keeps the band shared, heavy load splits it up
print(ex.show_partition(cfg, 0.1, scenario))
print()
print(ex.show_partition(cfg, 0.9, scenario))
