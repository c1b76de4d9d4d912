"""System-level simulation of UAV connectivity in cellular networks.

Modules cover the network layout (:mod:`scenario`), channels and antenna
patterns (:mod:`channel`), uplink power control (:mod:`powerctrl`), SINR
and rate mapping (:mod:`linklevel`), massive MIMO downlink (:mod:`mmimo`),
cell-free uplink (:mod:`cellfree`), UAV-to-UAV sidelinks (:mod:`u2u`),
learned handover (:mod:`mobility`), LoS MIMO at high carriers (:mod:`thz`)
and distribution summaries (:mod:`stats`).
"""

__version__ = "0.1.0"
