# Fast vs slow: the slow regime puts 10x the weight on power increments.  Compare the
# largest single-step power change and the peak power of the two optimized profiles.
import numpy as np

from fsp_plunge import ControlSpec, SyntheticPlantSpec, default_dataset, fit, FitConfig, optimize_profile
from fsp_plunge.control import max_power_step

runs = default_dataset(SyntheticPlantSpec(seed=0))
model, _ = fit(runs[:7], cfg=FitConfig(seed=0))
T0 = float(np.mean([r.initial_temp for r in runs[:7]]))

for sp in (750.0, 775.0):
    for regime in ("fast", "slow"):
        res = optimize_profile(model, ControlSpec.for_regime(regime, sp, T0))
        P = res.trajectory.powers
        print(f"{sp:.0f} C {regime}: max|dP| {max_power_step(res.trajectory):6.2f} W/step,"
              f" peak {P.max() / 1000:.2f} kW, end {res.end_temperature:6.1f} C, {res.message}")
