import json

import numpy as np
import pytest

from oracle import Oracle, start
from qrobot import KernelSpec, StateVector, ValidationError, encode
from qrobot.phase_paths import (
    boundary_violations,
    enumerate_phase_paths,
    path_statistics,
    verify_path_sum,
    write_paths_json,
)


def origin(T, y=3, x=1):
    return encode(start(y, x), T.params)


def test_strict_single_path(operators):
    T = operators(8, 3)
    paths = enumerate_phase_paths(T, origin(T), 11)
    assert len(paths) == 1
    (p,) = paths
    assert p.t == 5 and p.h == (3, 1, 3, 1, 3)
    assert p.kinds == ("c", "a", "c", "a", "c")
    assert abs(p.amplitude) == 1
    assert len(p.boundary) == 6
    assert path_statistics(paths).t_hist == {5: 1.0}


def test_zero_steps(operators):
    T = operators(8, 3)
    paths = enumerate_phase_paths(T, origin(T), 0)
    (p,) = paths
    assert (p.t, p.h, p.amplitude) == (1, (0,), 1)
    assert path_statistics(paths).t_hist == {1: 1.0}
    assert path_statistics(paths).single_phase_paths == 1


def test_rejects_bad_input(operators):
    T = operators(8, 3)
    with pytest.raises(ValidationError):
        enumerate_phase_paths(T, origin(T), -1)
    with pytest.raises(ValidationError):
        enumerate_phase_paths(T, origin(T), 3, epsilon=-1)
    two = StateVector.basis(start(3, 1), T.params) + StateVector.basis(start(4, 1), T.params)
    with pytest.raises(ValidationError):
        enumerate_phase_paths(T, two, 3)


@pytest.mark.parametrize("n", [1, 4, 11, 23, 37, 50])
def test_strict_residual(operators, n):
    T = operators(8, 3)
    paths = enumerate_phase_paths(T, origin(T, 6, 1), n)
    assert verify_path_sum(paths, T) <= 1e-12
    assert boundary_violations(paths, T) == {"computation": 0, "action": 0}
    for p in paths:
        assert sum(p.h) == n


def test_gaussian_alpha4_pruned(operators):
    T = operators(8, 3, KernelSpec.gaussian(4.0))
    paths = enumerate_phase_paths(T, origin(T), 8, 1e-12)
    assert len(paths) > 1
    assert paths.discarded_mass <= 1e-10
    assert verify_path_sum(paths, T) <= 1e-10


@pytest.mark.parametrize("n", [5, 12])
def test_gaussian_matches_dense_oracle(operators, n):
    spec = KernelSpec.gaussian(4.0)
    T = operators(8, 2, spec)
    paths = enumerate_phase_paths(T, origin(T, 4, 1), n)
    order, M = Oracle(T.params, spec).dense([start(4, 1)], n)
    v = np.zeros(len(order), dtype=complex)
    v[0] = 1
    for _ in range(n):
        v = M @ v
    summed = paths.amplitudes_by_final()
    for cfg, amp in zip(order, v):
        assert abs(summed.get(encode(cfg, T.params), 0) - amp) <= 1e-10


def test_pruning_accounting(operators):
    T = operators(8, 2, KernelSpec.gaussian(1.0))
    full = enumerate_phase_paths(T, origin(T, 4, 1), 10)
    pruned = enumerate_phase_paths(T, origin(T, 4, 1), 10, 1e-3)
    assert pruned.discarded_mass > 0 and len(pruned) < len(full)
    assert verify_path_sum(pruned, T) <= max(1e-8, pruned.discarded_bound)
    kept = sum(abs(a) ** 2 for a in pruned.amplitudes_by_final().values())
    assert np.sqrt(kept) + pruned.discarded_bound >= 1 - 1e-9


def test_boundary_constraints_gaussian(operators):
    T = operators(8, 2, KernelSpec.gaussian(2.0))
    paths = enumerate_phase_paths(T, origin(T, 4, 1), 10)
    assert boundary_violations(paths, T)["action"] == 0


def test_dwell_histogram(operators):
    T = operators(8, 2, KernelSpec.gaussian(4.0))
    stats = path_statistics(enumerate_phase_paths(T, origin(T, 4, 1), 12))
    first_action = stats.h_hist[1]
    assert len(first_action) > 1
    assert first_action[1] == pytest.approx(0.5, abs=1e-9)
    assert first_action[2] == pytest.approx(0.25, abs=1e-9)
    assert first_action[2] / first_action[1] == pytest.approx(0.5, abs=1e-9)
    assert stats.tree_nodes >= stats.path_count


def test_action_first_start(operators):
    T = operators(8, 2, KernelSpec.gaussian(2.0))
    j = encode(start(4, 1).replace(c=1), T.params)
    paths = enumerate_phase_paths(T, j, 7)
    assert all(p.kinds[0] == "a" for p in paths)
    assert verify_path_sum(paths, T) <= 1e-10


def test_json_dump(tmp_path, operators):
    T = operators(8, 3)
    write_paths_json(enumerate_phase_paths(T, origin(T), 11), T, tmp_path / "p.json", "h")
    doc = json.loads((tmp_path / "p.json").read_text())
    assert {"params", "n", "epsilon", "discarded_mass", "paths"} <= set(doc)
    (p,) = doc["paths"]
    assert set(p) == {"t", "h", "kinds", "boundary", "amp"}
    assert p["t"] == 5 and p["amp"] == [1.0, 0.0]
