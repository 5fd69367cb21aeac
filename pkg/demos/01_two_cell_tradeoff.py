"""
Two cells: when should they share the band?
===========================================

Two BTS's each reach efficiency 2 on a band of their own. On a shared band
each gets ``shared``. Sharing pays off once ``2 * shared > 2``.
"""

import numpy as np

from hetnet_spectrum import EfficiencyTable, objective, solve

lam = np.array([0.5, 0.5])

for shared in (0.6, 0.8, 1.0, 1.2, 1.4):
    table = EfficiencyTable.from_function(2, lambda i, c: 2.0 if len(c) == 1 else shared)
    rep = solve(table, lam)
    x = rep.partition.dense()
    print(f"shared={shared:.1f}  x(1)={x[1]:.3f} x(2)={x[2]:.3f} x(12)={x[3]:.3f}"
          f"  delay={rep.objective_value:.4f}")

# the objective is convex, so a line between two partitions never bulges above the chord
table = EfficiencyTable.from_function(2, lambda i, c: 2.0 if len(c) == 1 else 0.9)
a = np.array([0, 0.5, 0.5, 0.0])
b = np.array([0, 0.0, 0.0, 1.0])
for t in np.linspace(0, 1, 5):
    print(f"t={t:.2f}  f={objective((1 - t) * a + t * b, table, lam):.4f}")
