"""Trading signal strength against handovers along UAV routes.

A tabular Q-learner picks the serving cell at each step of a straight
route. Raising the handover penalty weight cuts handovers at the cost of
some received power.
"""

from uavsim import mobility as mob

params = mob.MobilityParams(n_routes=100)
res, _ = mob.run_mobility_study(params, seed=3)
for (w_ho, w_rsrp), ev in res.items():
    print(f"w_ho={w_ho:.0f} w_rsrp={w_rsrp:.0f}: median handovers {ev.handovers.median():5.1f}, "
          f"median RSRP {ev.rsrp.median():6.1f} dBm")
