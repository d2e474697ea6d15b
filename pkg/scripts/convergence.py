"""Observed time-step order of the unitary stepper and of the split master-equation integrator.

    python3 scripts/convergence.py
"""

import math

import numpy as np

from tbcreset.analytic import ModelParams
from tbcreset.lattice import Lattice, build_operators, evolve_unitary, projector
from tbcreset.lindblad import lindblad_evolve

lattice = Lattice.centered(30, 1, 10)
for omega in (0.1, 10.0):
    params = ModelParams.build(delta=1.0, f0=1.0, omega=omega, lam=0.25, n0=1, n_reset=10)
    ops = build_operators(params, lattice)
    runs = {
        "unitary": lambda h: evolve_unitary(projector(lattice, 1), ops, 0.0, 10.0, h),
        "master equation": lambda h: lindblad_evolve(params, lattice, [10.0], h)[0],
    }
    for name, run in runs.items():
        hs = [0.2 / 2**k for k in range(5)]
        states = [run(h) for h in hs]
        diffs = [np.max(np.abs(a - b)) for a, b in zip(states, states[1:])]
        orders = [math.log2(a / b) for a, b in zip(diffs, diffs[1:])]
        print(f"omega={omega:g} {name:16s} " + " ".join(f"h={h:.4f}: {p:.3f}" for h, p in zip(hs, orders)))
