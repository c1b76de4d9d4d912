"""Rate against distance for short-range 28 GHz and 140 GHz links.

Compact arrays at half-wavelength spacing behave like a single beam. With
five-wavelength spacing the same element count spans a wider aperture, and
at short range several eigenmodes open up.
"""

import numpy as np

from uavsim import thz

rows = thz.rate_vs_distance_sweep(d_grid=np.geomspace(10.0, 1000.0, 5))
for r in rows:
    print(f"{r['fc'] / 1e9:5.0f} GHz {r['mode']:12s} {r['spacing']:3.1f} lambda "
          f"{r['d_m']:7.1f} m  {r['rate_bps'] / 1e9:6.2f} Gbps  streams {r['rank_effective']}")
