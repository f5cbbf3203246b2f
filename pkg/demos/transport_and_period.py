"""Transport along the field ``1 + cos 2x`` by alternating phases and free flows.

Each transport factor is a product of large conjugating phases around short
free flows.  Cone terms are combined with symmetric Trotter splitting, and a
backward flow is realized forward by running up to a full period of the flow.

    python demos/transport_and_period.py
"""

import math

from kdvsat import ControlProfileSet, SpectralState, TrigPoly
from kdvsat.flows import flow_period, transport_apply
from kdvsat.spectral import SolverConfig
from kdvsat.synthesis import ConeTerm, TransportParams, measure_ops, negative_ops, signed_transport_ops

Q = ControlProfileSet.standard(3)
cos1, sin1 = TrigPoly.mode(1, "cos"), TrigPoly.mode(1, "sin")
# 2 sin^2 x = 1 - cos 2x, 2 cos^2 x = 1 + cos 2x
terms = [ConeTerm(2.0, sin1)]
field = TrigPoly(1, [0, 1])
psi0 = SpectralState.mode(32, 1)

print("forward transport for t=0.5, field 1 + cos 2x")
target = transport_apply(psi0.resized(128), field, 0.5)
for n in (8, 16, 32, 64):
    ops = signed_transport_ops(terms, 0.5, 0.0, TransportParams(tau=1e-6, n=n))
    err, prog, info = measure_ops(ops, Q, [psi0], SolverConfig(), targets=[target])
    print(f"  n={n}: error {err:.3e}, K={info['K']}, {len(prog)} segments")

g = TrigPoly(1.5, [0, -0.5])  # 1 + sin^2 x
Pi = flow_period(g)
print(f"\nperiod of 1 + sin^2 x: {Pi:.12f} (2 pi / sqrt 2 = {2 * math.pi / math.sqrt(2):.12f})")
back = [ConeTerm(2.0, cos1), ConeTerm(1.0, sin1)]
target = transport_apply(psi0.resized(128), g, -0.3)
for n_outer in (8, 16, 32):
    ops = negative_ops(back, 0.3, 0.0, TransportParams(tau=1e-5, n=32, n_outer=n_outer))
    err, _, _ = measure_ops(ops, Q, [psi0], SolverConfig(), targets=[target])
    print(f"  backward 0.3 via forward {Pi - 0.3:.3f}, n_outer={n_outer}: error {err:.3e}")
