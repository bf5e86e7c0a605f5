# Fit the neural thermal model to synthetic plunge runs and look at how well it holds up
# on the run it never saw.  Takes ~10 s (first call compiles the numba kernels).
import numpy as np

from fsp_plunge import SyntheticPlantSpec, default_dataset, fit, FitConfig, compute_mae, rollout, RolloutGrid
from fsp_plunge.profiles import TabulatedProfile

spec = SyntheticPlantSpec(seed=0)       # logistic efficiency, C=100 J/K, h=2 W/K, 2 C noise
runs = default_dataset(spec)            # 7 training runs + 1 held-out
train, held = runs[:7], runs[7]
for r in runs:
    print(f"{r.id:10s} {r.times[-1]:6.1f} s  peak P {r.measured_powers.max() / 1000:.2f} kW"
          f"  end T {r.measured_temps[-1]:6.1f} C")

model, report = fit(train, cfg=FitConfig(seed=0))
print(report.message, "| final loss", report.final_loss)
print("fitted C = %.1f J/K (truth %.0f), h = %.2f W/K (truth %.0f)"
      % (model.capacitance, spec.C_truth, model.heat_loss, spec.h_truth))

# held-out error, then eyeball a few points along the run
print("held-out MAE %.2f C" % compute_mae(model, held))
sim = rollout(model, TabulatedProfile(held.times, held.measured_powers), held.measured_temps[0],
              RolloutGrid(held.times[0], held.times[-1], held.dt))
for k in np.linspace(0, len(held.times) - 1, 7).astype(int):
    print(f"  t={held.times[k]:6.1f}  data {held.measured_temps[k]:7.1f}  model {sim.temperatures[k]:7.1f}")

# the efficiency the network learned vs the plant's, on a small (T, P) grid.
# Temperature data only pin down eta/C and h/C, so the network is free to trade a
# larger C for an eta near 1; compare the ratios, not the raw numbers.
from fsp_plunge import SyntheticPlant
truth = SyntheticPlant(spec)
print("h/C model %.4f truth %.4f (1/s)" % (model.heat_loss / model.capacitance, spec.h_truth / spec.C_truth))
for T in (100.0, 400.0, 700.0):
    row = [f"{model.efficiency(T, P):.3f}/{truth.efficiency(T, P):.3f}" for P in (1000.0, 2000.0, 3000.0)]
    print(f"eta at {T:5.0f} C (model/truth) for 1, 2, 3 kW:", *row)
    row = [f"{model.efficiency(T, P) / model.capacitance * 1e3:.2f}/{truth.efficiency(T, P) / spec.C_truth * 1e3:.2f}"
           for P in (1000.0, 2000.0, 3000.0)]
    print("   eta/C x 1e3 (model/truth):", *row)
