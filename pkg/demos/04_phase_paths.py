"""Phase paths: the evolution amplitude as a sum over alternating phases."""
from qrobot import KernelSpec, SystemParams, build_step_operator, encode, initial_configuration
from qrobot.phase_paths import enumerate_phase_paths, path_statistics, verify_path_sum

params = SystemParams(8, 2)
start = encode(initial_configuration(y=4, x=1), params)

strict = build_step_operator(params)
(path,) = enumerate_phase_paths(strict, start, 11)
print("strict:", path.t, path.h, path.kinds, abs(path.amplitude))

G = build_step_operator(params, KernelSpec.gaussian(4.0))
for n in (4, 8, 12):
    paths = enumerate_phase_paths(G, start, n)
    stats = path_statistics(paths)
    print(f"n={n}: {len(paths)} paths, residual {verify_path_sum(paths, G):.1e}, t histogram {stats.t_hist}")

# the first action phase dwells with probability |a1|^2 per extra step
print(path_statistics(enumerate_phase_paths(G, start, 12)).h_hist[1])

pruned = enumerate_phase_paths(G, start, 12, epsilon=0.05)
print(len(pruned), "paths after pruning; discarded mass", pruned.discarded_mass, "residual", verify_path_sum(pruned, G))
