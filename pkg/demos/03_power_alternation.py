"""
Concentrating power on the band a BTS keeps
===========================================

Each BTS has a unit power budget. After the spectrum is split, a BTS that
holds only part of the band can raise its PSD there, which changes the
efficiencies, which changes the best split, and so on.
"""

import numpy as np

from hetnet_spectrum import experiments as ex
from hetnet_spectrum.power import PSD_UPDATE

cfg = ex.ExperimentConfig()
scenario = ex.build_scenario(cfg)
report, text = ex.run_power(cfg, 0.9, scenario)
print(text)

for step in report.steps[:7]:
    label = "psd  " if step.phase == PSD_UPDATE else "split"
    print(label, step.iteration, f"{step.objective:.4f}", np.round(step.psd, 2))
