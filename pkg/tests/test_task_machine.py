import dataclasses

import numpy as np
import pytest

from oracle import Oracle, start
from qrobot.action_kernel import DIRECTION
from qrobot import Configuration, Node, Output, SystemParams, ValidationError
from qrobot import audit_injectivity, compile_task, tc_step
from qrobot.config_space import internal_index


@pytest.fixture(scope="module")
def table83():
    return compile_task(SystemParams(8, 3))


def row(table, node, o, d, s, obs):
    return table.row(node, o, d, s, obs)


def test_examples(table83):
    assert row(table83, Node.S0, Output.MR1, 0, 0, 0) == (Node.S1, Output.MR1, 0, 0, 0)
    for obs in (0, 1):
        assert row(table83, Node.S1, Output.MR1, 0, 0, obs) == (Node.S2, Output.MR1, 1, 0, 0)
    assert row(table83, Node.F2, Output.MR1, 0, 0, 0) == (Node.B0, Output.DN, -1, 0, 1)


def test_cap_and_decrement_rows(table83):
    assert row(table83, Node.S2, Output.MR1, 7, 0, 0) == (Node.S0, Output.MRINF, 7, 0, 1)
    assert row(table83, Node.S2, Output.MR1, 3, 0, 0) == (Node.S0, Output.MR1, 3, 0, 1)
    assert row(table83, Node.F1, Output.MR1, 5, 0, 0) == (Node.F2, Output.MR1, 5, 5, 0)
    assert row(table83, Node.F2, Output.MR1, 5, 5, 0) == (Node.R0, Output.ML1, 4, 5, 1)
    assert row(table83, Node.R0, Output.ML1, 0, 5, 0) == (Node.B0, Output.DN, -1, 5, 1)
    assert row(table83, Node.B0, Output.DN, -1, 5, 0) == (Node.B0, Output.DN, -2, 5, 1)
    assert row(table83, Node.B0, Output.DN, -6, 5, 0) == (Node.S0, Output.MLINF, -7, 5, 1)


def test_tc_step_examples(table83):
    found = tc_step(Configuration(2, 2, 0, 0, Node.S0, Output.MR1, 0), table83)
    assert found.node == Node.F1
    missed = tc_step(Configuration(5, 2, 0, 0, Node.S0, Output.MR1, 0), table83)
    assert missed.node == Node.S1


def test_tc_step_rejects_action_sector(table83):
    with pytest.raises(ValidationError):
        tc_step(Configuration(2, 2, 0, 0, Node.S0, Output.MR1, 1), table83)


def test_found_replay_reaches_action_in_three_steps(table83):
    cfg = Configuration(2, 2, 0, 0, Node.S0, Output.MR1, 0)
    trace = [cfg.node]
    for _ in range(3):
        cfg = tc_step(cfg, table83)
        trace.append(cfg.node)
    assert trace[:3] == [Node.S0, Node.F1, Node.F2]
    assert (cfg.c, cfg.s, cfg.d, cfg.o) == (1, 0, -1, Output.DN)


@pytest.mark.parametrize("L,N", [(8, 3), (4, 2), (12, 3), (3, 1), (2, 4), (2, 6)])
def test_injective(L, N):
    report = audit_injectivity(compile_task(SystemParams(L, N)))
    assert report.ok
    assert report.pairs_checked == L * L
    assert report.rows_per_pair == SystemParams(L, N).internal_count


def test_corrupted_table_reports_exactly_that_collision():
    p = SystemParams(4, 2)
    t = compile_task(p)
    succ = t.successor.copy()
    m1 = internal_index(0, 0, Node.S1, Output.MR1, p)
    m2 = internal_index(1, 0, Node.S1, Output.MR1, p)
    succ[:, m1] = succ[:, m2]
    bad = dataclasses.replace(t, successor=succ)
    report = audit_injectivity(bad)
    assert not report.ok
    assert {(target, sources) for _, _, target, sources in report.collisions} == {
        (int(succ[0, m2]), (m1, m2))
    }
    assert len(report.collisions) == p.L * p.L


def test_never_writes_x_or_y(table83):
    for y, x in [(0, 0), (3, 1), (7, 2)]:
        for d in range(-7, 8):
            for node in Node:
                cfg = Configuration(y, x, d, 3, node, Output.MR1, 0)
                out = tc_step(cfg, table83)
                assert (out.x, out.y) == (x, y)


def test_permutation_block_exhaustive(operators):
    T = operators(4, 2)
    csc = T.matrix.tocsc()
    cols = np.arange(0, T.dimension, 2)
    block = csc[:, cols]
    assert np.all(np.diff(block.indptr) == 1)
    assert np.all(block.data == 1)
    rows = block.indices
    assert len(np.unique(rows)) == len(cols)


@pytest.mark.parametrize("n", range(0, 7))
def test_replay_records_distance(table83, n):
    # table rows, with each action step done as a strict single move
    cfg = start((1 + n) % 8, 1)
    for k in range(1, 200):
        if cfg.c == 0:
            cfg = tc_step(cfg, table83)
        else:
            cfg = cfg.replace(x=(cfg.x + DIRECTION[cfg.o]) % 8, c=0)
        if cfg.o != Output.MR1:
            break
    assert cfg.s == n
    assert k == 4 * n + 3
    # the oracle's own transcription agrees
    oracle = Oracle(SystemParams(8, 3))
    assert oracle.run({start((1 + n) % 8, 1): 1}, k) == {cfg: 1}
