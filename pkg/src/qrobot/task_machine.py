"""Reversible transition table for the computation phases of the distance task.

The table maps each internal state ``m = (node, o, d, s)`` with ``c = 0`` and
an observation bit (``obs = [x == y]``) to a successor ``(m', c')``.  The
robot and particle sites are never written.

Besides the task rows proper, the table has to be a bijection so that the
step operator is unitary.  Every internal state therefore gets a *slot*: an
action-entry state (an ``(node, o)`` pair on which an action kernel runs)
receives computation output at ``c = 1``; every other state receives it at
``c = 0``.  Rows that the task never reaches are filled in canonically,
pairing unused sources with unused slots in index order.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .config_space import (
    NODE_COUNT,
    OUTPUT_COUNT,
    Configuration,
    Node,
    Output,
    SystemParams,
    internal_fields,
    internal_index,
)
from .errors import ValidationError

# (node, o) pairs whose c=1 states run an action kernel
ENTRY_PAIRS = frozenset(
    [(Node.S0, Output.MR1), (Node.R0, Output.ML1), (Node.B0, Output.DN)]
    + [(n, o) for n in Node for o in (Output.MRINF, Output.MLINF)]
)


@dataclass(frozen=True, eq=False)
class TransitionTable:
    """Successor arrays indexed ``[obs, m]``.

    ``successor[obs, m]`` is the internal index written by the row and
    ``control[obs, m]`` the control bit it sets.  ``entry[m]`` marks the
    internal states whose action phase is driven by a kernel.  ``task_row``
    marks rows that implement the decision diagram rather than the canonical
    fill-in.
    """

    params: SystemParams
    successor: np.ndarray
    control: np.ndarray
    entry: np.ndarray
    task_row: np.ndarray = field(repr=False)

    def row(self, node, o, d: int, s: int, obs: int) -> tuple[Node, Output, int, int, int]:
        m = internal_index(d, s, int(node), int(o), self.params)
        succ = int(self.successor[obs, m])
        f = _fields_of(succ, self.params)
        return Node(f["node"]), Output(f["o"]), f["d"], f["s"], int(self.control[obs, m])


def _fields_of(m: int, params: SystemParams) -> dict[str, int]:
    o = m % OUTPUT_COUNT
    rest = m // OUTPUT_COUNT
    node = rest % NODE_COUNT
    rest //= NODE_COUNT
    return {"d": rest // params.s_radix - params.d_max, "s": rest % params.s_radix, "node": node, "o": o}


def _circ(d: int, step: int, params: SystemParams) -> int:
    """Circular increment on the odd-size running-memory range."""
    D = params.d_max
    return (d + step + D) % params.d_radix - D


def _drift_chain(params: SystemParams, start_d: int, direction: int) -> list[tuple[int, int]]:
    """Order in which a nonterminating drift walks through ``(node, d)`` pairs."""
    R = params.d_radix
    ds = [_circ(start_d, direction * i, params) for i in range(R)]
    return [(int(node), d) for node in Node for d in ds]


def _task_rows(params: SystemParams) -> dict[int, dict[int, tuple[int, int]]]:
    """The decision-diagram rows: ``{obs: {m: (m', c')}}``."""
    D = params.d_max
    S = params.s_radix
    ix = lambda d, s, node, o: internal_index(d, s, int(node), int(o), params)  # noqa: E731
    rows: dict[int, dict[int, tuple[int, int]]] = {0: {}, 1: {}}

    def put(m, target, c, obs=(0, 1)):
        for b in obs:
            rows[b][m] = (target, c)

    for d in range(-D, D + 1):
        for s in range(S):
            # observe: continue the search or start the copy
            m = ix(d, s, Node.S0, Output.MR1)
            put(m, ix(d, s, Node.S1, Output.MR1), 0, obs=(0,))
            put(m, ix(d, s, Node.F1, Output.MR1), 0, obs=(1,))
            # count one nonobservation
            put(ix(d, s, Node.S1, Output.MR1), ix(_circ(d, 1, params), s, Node.S2, Output.MR1), 0)
            # cap test, then hand off to the search move (or give up)
            if d == D:
                put(ix(d, s, Node.S2, Output.MR1), ix(d, s, Node.S0, Output.MRINF), 1)
            else:
                put(ix(d, s, Node.S2, Output.MR1), ix(d, s, Node.S0, Output.MR1), 1)
            # reversible copy into the permanent memory
            put(ix(d, s, Node.F1, Output.MR1), ix(d, s ^ (d % S), Node.F2, Output.MR1), 0)

    # post-copy decrement: only rows with s == d are reachable (fresh copy)
    for d in range(0, D):
        nd = d - 1
        if nd == -1:
            put(ix(d, d, Node.F2, Output.MR1), ix(-1, d, Node.B0, Output.DN), 1)
        else:
            put(ix(d, d, Node.F2, Output.MR1), ix(nd, d, Node.R0, Output.ML1), 1)
    # return walk: reachable with 0 <= d < s
    for s in range(1, S):
        for d in range(0, min(s, D + 1)):
            nd = d - 1
            if nd == -1:
                put(ix(d, s, Node.R0, Output.ML1), ix(-1, s, Node.B0, Output.DN), 1)
            else:
                put(ix(d, s, Node.R0, Output.ML1), ix(nd, s, Node.R0, Output.ML1), 1)
    # ballast: reachable with -(D-1) <= d <= -1
    for s in range(S):
        if D == 1:
            put(ix(-1, s, Node.B0, Output.DN), ix(-1, s, Node.S0, Output.MLINF), 1)
            continue
        for d in range(-(D - 1), 0):
            nd = d - 1
            if nd == -D:
                put(ix(d, s, Node.B0, Output.DN), ix(nd, s, Node.S0, Output.MLINF), 1)
            else:
                put(ix(d, s, Node.B0, Output.DN), ix(nd, s, Node.B0, Output.DN), 1)
    # nonterminating drifts: each one-step computation advances a (node, d) chain
    for o, start, direction in ((Output.MRINF, D, -1), (Output.MLINF, -D, 1)):
        chain = _drift_chain(params, start, direction)
        for s in range(S):
            for (n0, d0), (n1, d1) in zip(chain[:-1], chain[1:]):
                put(ix(d0, s, n0, o), ix(d1, s, n1, o), 1)
    return rows


def compile_task(params: SystemParams) -> TransitionTable:
    """Compile the distance-measurement decision diagram into a bijective table."""
    M = params.internal_count
    f = internal_fields(params)
    entry = np.zeros(M, dtype=bool)
    for node, o in ENTRY_PAIRS:
        entry |= (f["node"] == node) & (f["o"] == o)

    rows = _task_rows(params)
    successor = np.full((2, M), -1, dtype=np.int64)
    control = np.zeros((2, M), dtype=np.uint8)
    task_row = np.zeros((2, M), dtype=bool)
    for obs in (0, 1):
        for m, (target, c) in rows[obs].items():
            if c != int(entry[target]):
                raise AssertionError(f"task row {m} -> {target} writes c={c} into a slot of the other kind")
            successor[obs, m] = target
            control[obs, m] = c
            task_row[obs, m] = True

    # canonical fill-in, computed for obs=0; obs=1 reuses it with the
    # S1 <-> F1 slots swapped so the two tables differ only where they must
    s1 = (f["node"] == Node.S1) & (f["o"] == Output.MR1)
    swap = np.arange(M)
    swap[s1] = np.flatnonzero(s1) + (Node.F1 - Node.S1) * OUTPUT_COUNT
    swap[swap[s1]] = np.flatnonzero(s1)

    used = np.zeros(M, dtype=bool)
    used[successor[0, task_row[0]]] = True
    if used.sum() != task_row[0].sum():
        raise AssertionError("task rows are not injective")
    free_src = np.flatnonzero(~task_row[0])
    free_dst = np.flatnonzero(~used)
    successor[0, free_src] = free_dst
    control[0, free_src] = entry[free_dst]

    fill1 = ~task_row[1]
    successor[1, fill1] = swap[successor[0, fill1]]
    control[1, fill1] = entry[successor[1, fill1]]
    return TransitionTable(params, successor, control, entry, task_row)


def tc_step(config: Configuration, table: TransitionTable) -> Configuration:
    """Apply the unique table row to a ``c = 0`` configuration."""
    if config.c != 0:
        raise ValidationError("tc_step acts only on the c=0 sector")
    obs = int(config.x == config.y)
    node, o, d, s, c = table.row(config.node, config.o, config.d, config.s, obs)
    return config.replace(node=node, o=o, d=d, s=s, c=c)


@dataclass
class InjectivityReport:
    """Outcome of :func:`audit_injectivity`.

    ``collisions`` lists ``(x, y, target, sources)`` for every successor hit
    by more than one row; ``slot_conflicts`` lists rows whose control bit does
    not match the kind of slot they write into.
    """

    pairs_checked: int
    rows_per_pair: int
    collisions: list[tuple[int, int, int, tuple[int, ...]]]
    slot_conflicts: list[tuple[int, int]]

    @property
    def ok(self) -> bool:
        return not self.collisions and not self.slot_conflicts


def audit_injectivity(table: TransitionTable, params: SystemParams | None = None) -> InjectivityReport:
    """Check that, for every ``(x, y)``, the row map ``m -> (m', c')`` is injective."""
    params = params or table.params
    L = params.L
    M = params.internal_count
    per_obs = {}
    for obs in (0, 1):
        key = table.successor[obs] * 2 + table.control[obs]
        order = np.argsort(key, kind="stable")
        sk = key[order]
        dup = np.flatnonzero(sk[1:] == sk[:-1])
        groups: dict[int, list[int]] = {}
        for i in dup:
            groups.setdefault(int(sk[i]), []).extend([int(order[i]), int(order[i + 1])])
        per_obs[obs] = [(k // 2, tuple(sorted(set(v)))) for k, v in sorted(groups.items())]
    collisions = []
    for x in range(L):
        for y in range(L):
            for target, sources in per_obs[int(x == y)]:
                collisions.append((x, y, target, sources))
    conflicts = []
    for obs in (0, 1):
        bad = np.flatnonzero(table.control[obs] != table.entry[table.successor[obs]])
        conflicts.extend((obs, int(m)) for m in bad)
    return InjectivityReport(L * L, M, collisions, conflicts)


__all__ = [
    "ENTRY_PAIRS",
    "InjectivityReport",
    "TransitionTable",
    "audit_injectivity",
    "compile_task",
    "tc_step",
]
