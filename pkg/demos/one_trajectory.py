"""
A single SGD run against its population recursion
=================================================

Start at latitude 0.5 and compare online SGD with the deterministic
population recursion. Then split the latitude into its drift, martingale
and retraction parts.
"""

# %%
import numpy as np

from sphere_sgd import FixedCorrelation, SGDConfig, run_online_sgd, run_population_dynamics
from sphere_sgd.models import SupervisedSingleLayer

N, delta, alpha = 1000, 0.02, 40.0
model = SupervisedSingleLayer(N, "square")
cfg = SGDConfig.from_alpha(N, delta, alpha, init=FixedCorrelation(0.5), record_stride=200,
                           diagnostics=True, seed=7, thresholds=(0.9,))
sgd = run_online_sgd(model, cfg)
pop = run_population_dynamics(model.population_profile(), cfg, 0.5)

for t, a, b in list(zip(sgd.recorded_times, sgd.m_values, pop.m_values))[::25]:
    print(f"t={t:>6}  sgd={a:.4f}  population={b:.4f}")
print("sup |m - m_bar| =", np.max(np.abs(sgd.m_values - pop.m_values)))

# %%
dec = sgd.decomposition
print("drift     ", dec["drift"][-1])
print("martingale", dec["martingale"][-1])
print("radial    ", dec["radial"][-1])
print("closure   ", sgd.m0 + dec["drift"][-1] - dec["martingale"][-1] + dec["radial"][-1],
      "vs", sgd.final_m)
print("hitting times", sgd.hitting_times)
