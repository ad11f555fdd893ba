"""Resistance growth of trace networks and of expected-crossing networks."""
import numpy as np

from tracelab.bd_chain import jlp_weights, simulate
from tracelab.instances import biased_walk, standard_instances
from tracelab.planar_spiral import SpiralConfig
from tracelab.planar_spiral import simulate as simulate_spiral
from tracelab.traces import expected_network_profile, record_trace, trace_resistance_profile

radii = [2 ** k for k in range(2, 13)]
for inst in standard_instances() + [biased_walk()]:
    prof = expected_network_profile(inst.kernel, inst.measure, None, radii)
    print(f"{inst.name:>10}: E_o[N] network resistance", np.round(prof.resistance[[0, 4, 8, 10]], 2),
          prof.verdict)

led = simulate(jlp_weights(), 4096, seed=1)
prof = trace_resistance_profile(record_trace(led), radii)
print("birth-death trace:", np.round(prof.resistance, 2), prof.verdict)

cov = simulate_spiral(SpiralConfig(horizon=64, seed=1))
prof = trace_resistance_profile(record_trace(cov), [4, 8, 16, 32, 64])
print("spiral trace (N weights):", np.round(prof.resistance, 3))
print("spiral trace (unit weights):", np.round(prof.resistance_unit, 3), prof.verdict)
