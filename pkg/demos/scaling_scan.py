"""
Hitting-time scaling across dimensions
======================================

A reduced scan: median time to reach m = 0.5 for a linear and a square
activation over a small grid, with log-log slopes. The full-size scans
live in the acceptance tests and take about an hour.
"""

# %%
from sphere_sgd.experiments import ScanConfig, scaling_scan

grid = (128, 256, 512)
for activation, delta in (("linear", 0.5), ("square", 0.03)):
    cfg = ScanConfig({"family": "supervised", "activation": activation}, grid,
                     seeds_per_cell=8, delta_rule=delta, master_seed=1)
    res = scaling_scan(cfg)
    print(f"{activation}: slope {res.slope:.2f}  CI90 [{res.ci[0]:.2f}, {res.ci[1]:.2f}]")
    for row in res.per_N:
        print(f"   N={row['N']:>4}  median tau={row['q50']:.0f}  "
              f"tau/(N ln N)={row['median_over_NlogN']:.2f}")
    if res.flags:
        print("   flags:", res.flags)

# %%
# The same scan from the command line, with a manifest for exact reruns:
#   sphere-sgd scan --activation square --delta 0.03 --seeds 8 --seed 1 \
#       --set 'experiment.N_grid=[128,256,512]' --out runs/square
