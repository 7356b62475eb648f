"""A particle spread over three sites leaves the permanent memory entangled with it."""
import numpy as np

from qrobot import SystemParams, build_step_operator
from qrobot.config_space import product_state, site_amplitudes
from qrobot.evolution import evolve
from qrobot.stats import correlation_fidelity, distance_distribution

params = SystemParams(8, 3)
T = build_step_operator(params)

c_y = {2: 0.6, 4: 0.48j, 6: 0.64}
psi0 = product_state(params, site_amplitudes(8, c_y.items()), site_amplitudes(8, [(1, 1.0)]))

for k in (7, 11, 15, 19, 23):
    psi = evolve(T, psi0, k)
    P = distance_distribution(psi)
    rep = correlation_fidelity(psi, x=1)
    print(k, np.round(P.probabilities, 4), "fidelity", round(rep.fidelity, 6), "off-diag", rep.offdiagonal)

# |c_y|^2 at n = y - x
print({y - 1: abs(c) ** 2 for y, c in c_y.items()})
