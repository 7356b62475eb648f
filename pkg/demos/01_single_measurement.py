"""Walk through one distance measurement with the strict kernel.

The particle sits two sites to the right of the robot.  We watch the robot
search, copy the count into its permanent memory, walk back and enter the
ballast part.
"""
from qrobot import KernelSpec, StateVector, SystemParams, build_step_operator, initial_configuration, marginal
from qrobot.evolution import evolve
from qrobot.stats import distance_distribution

params = SystemParams(L=8, N=3)
T = build_step_operator(params, KernelSpec())
print("dimension", T.dimension, "nonzeros", T.nnz, "audit", T.deviation)

psi = StateVector.basis(initial_configuration(y=3, x=1), params)

# one configuration per step, since the strict kernel never branches
for k in range(16):
    ((cfg, amp),) = psi.support()
    print(f"k={k:2d}  x={cfg.x} d={cfg.d:+d} s={cfg.s} {cfg.node.name:2s} {cfg.o.name:5s} c={cfg.c}")
    psi = evolve(T, psi, 1)

# search finishes at k = 4n + 3
print(distance_distribution(evolve(T, StateVector.basis(initial_configuration(3, 1), params), 11)).as_dict())
print(marginal(psi, "s"))
