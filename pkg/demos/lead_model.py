"""Absorbing-boundary leads against explicit 400-site leads.

An excited orbital of an 8-site chain leaks into wide-band leads.  The
molecular norm from the absorbing potential tracks the exact finite-lead
result until the lead ends reflect the wave.
"""

import numpy as np

from sshjunction import HBAR, WireParams
from sshjunction.leads import compare_markovian

for t_lead in (20.0, 10.0, 5.0, 2.0):
    wire = WireParams(n_sites=8, lead_hopping=t_lead)
    times, exact, markov, window, dev = compare_markovian(wire, 400, t_final=5.0)
    print(f"t_lead {t_lead:4.1f} eV: norm at 5 fs exact {exact[-1]:.4f}, absorbing {markov[-1]:.4f}, "
          f"max deviation after {10 * HBAR / t_lead:.2f} fs: {100 * dev:.2f}%")
