"""Let the particle hop while the robot measures."""
from qrobot import StateVector, SystemParams, build_step_operator, initial_configuration
from qrobot.assembly import EnvironmentSpec
from qrobot.evolution import evolve
from qrobot.stats import distance_distribution

params = SystemParams(8, 3)
psi0 = StateVector.basis(initial_configuration(y=3, x=1), params)

for gamma in (0.0, 0.02, 0.05, 0.1, 0.2):
    T = build_step_operator(params, env_spec=EnvironmentSpec("hopping", gamma, 1.0))
    P = distance_distribution(evolve(T, psi0, 40))
    print(f"gamma={gamma:<5} audit={T.deviation:.1e}  P_40(2)={P[2]:.4f}  completed={P.completed_mass:.4f}")
