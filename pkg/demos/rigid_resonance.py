"""Near-resonant w+2w rectification in a frozen 20-site wire (f1 pulse).

Scans the photon energy across the gap and prints the charge deposited in
each lead and the efficiency.  About two minutes on one core.
"""

import numpy as np

from sshjunction import WireParams, preset
from sshjunction.ensemble import EnsembleConfig, run_ensemble
from sshjunction.fields import field_extent

wire = WireParams(n_sites=20)
print(" hw/eV    q_L      q_R     eta")
for omega in np.arange(0.8, 1.401, 0.05):
    pulse = preset("f1", omega=round(omega, 2))
    cfg = EnsembleConfig(wire, pulse, n_traj=1, t_final=field_extent(pulse), dt=0.05, record_interval=5.0, rigid=True)
    s = run_ensemble(cfg)
    print(f"{omega:6.2f} {s.q_L:8.4f} {s.q_R:8.4f} {s.eta:7.3f}")
