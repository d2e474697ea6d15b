"""Master-equation occupations against the infinite-chain renewal formula for several ring sizes.

Compares two placements of the site labels: ``1..N`` and a range centred
between the initial and reset sites. The position operator jumps at the
bond joining the last and first labels, so its placement matters once the
packet reaches it.

    python3 scripts/finite_size_scan.py
"""

import numpy as np

from tbcreset.analytic import ModelParams
from tbcreset.lattice import Lattice
from tbcreset.lindblad import renewal_check

times = np.linspace(0.5, 10.0, 20)
for omega in (0.1, 10.0):
    params = ModelParams.build(delta=1.0, f0=1.0, omega=omega, lam=0.25, n0=1, n_reset=10)
    print(f"omega = {omega:g}: max |Lindblad - renewal| over t <= 10, sites 9 and 10")
    for n in (16, 20, 30, 40, 60):
        row = []
        for name, lattice in (("1..N", Lattice.from_range(1, n)), ("centred", Lattice.centered(n, 1, 10))):
            rep = renewal_check(params, lattice, times, sites=(9, 10), dt_max=0.005)
            row.append(f"{name} {rep.discrepancy.max():.2e}")
        print(f"  N = {n:3d}: " + ", ".join(row))
