"""Exact saturation certificates in rational arithmetic.

Every Fourier mode is built from ``1, cos x, sin x, cos 2x, sin 2x`` by
linear combinations and cubes of derivatives, and every trigonometric vector
field is a bracket expression of fields ``(phi')^2 d/dx``.  Both are checked
exactly, with no floating point involved.

    python demos/certificates.py
"""

from kdvsat.trig import (TrigPoly, cert_stats, evaluate, evaluate_bracket, h0_basis, mode_certificate,
                         saturation_closure, vectorfield_certificate)

chain = saturation_closure(h0_basis(3), 3, window=12)
print("closure dimensions:", [len(h) for h in chain])

gens = h0_basis(3)
for N in (3, 5, 8, 12):
    cert = mode_certificate(N, "cos")
    st = cert_stats(cert)
    ok = evaluate(cert, gens) == TrigPoly.mode(N, "cos")
    print(f"cos {N}x: exact={ok} depth={st['depth']} distinct nodes={st['distinct_nodes']} "
          f"largest coefficient={st['max_coeff']}")

for p in (TrigPoly(1), TrigPoly.mode(2, "cos"), TrigPoly(0, [1, 0, 2], [0, -3])):
    got = evaluate_bracket(vectorfield_certificate(p)).coeff
    print(f"field {p}: reproduced exactly = {got == p}")
