"""Potential-theory quantities of the walk with edge weights 2^k, end to end.

Prints the voltage, Green function, expected crossings and capacity, then
builds the subdivided chain at delta = 0.3 and reports its checks.
"""
from tracelab.bd_chain import geometric_weights
from tracelab.chain_core import KILLED, truncate
from tracelab.potential import capacity, expected_crossings, green_function, voltage
from tracelab.subdivision import build_aux, exit_distribution, remark_sets, verify_properties

w = geometric_weights(2)
chain = w.trace_chain(9)

v = voltage(chain, [0], outside="cemetery")
print("hitting probability of 0 from x:", [round(v.bounds(x)[0], 6) for x in range(6)])

G = green_function(chain, 0, w.measure)
print(f"G(0,0) = {G[0]:.6f}, G(0,1) = {G[1]:.6f}")
print(f"E_0 N(0,1) = {expected_crossings(chain, 0, w.measure).weight(0, 1):.6f}")

ladder = [truncate(w.kernel(), R, KILLED) for R in (8, 64, 512)]
est = capacity(ladder, w.measure, [0])
print("Cap(0) along truncations:", [f"{c:.12f}" for c in est.sequence])

aux = build_aux(chain, w.measure, delta=0.3)
print("subdivided pairs:", aux.level.J, "new states:", aux.Z)
print("reversed split at the midpoint:", aux.prob(aux.Z[0], 1, reversed_=True), aux.prob(aux.Z[0], 2, reversed_=True))
print("exit law from 1:", exit_distribution(aux, 1))
rep = verify_properties(aux)
print(f"largest property deviation {rep.max():.2e}; all checks pass: {rep.ok()}")
print("level set of the midpoints:", set(remark_sets(aux).Z_hat))
