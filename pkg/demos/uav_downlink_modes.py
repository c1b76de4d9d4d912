"""Downlink command-and-control rates for UAVs under five serving modes.

Single-antenna sectors leave most high UAVs below 100 kbps. Massive MIMO
with zero-forcing and null steering towards ground users in other cells
lifts nearly all of them above it.
"""

from uavsim import mmimo as mm
from uavsim.scenario import drop_seeds

res = mm.run_mmimo_study(mm.MmimoParams(uav_height=300.0), drop_seeds(2, 10))
for mode, study in res.items():
    print(f"{mode:12s} UAVs above 100 kbps: {study.frac_above:6.1%}   "
          f"median UAV rate {study.uav_rate.median() / 1e3:8.0f} kbps")
