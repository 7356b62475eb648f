"""Expansion of ``<w| T^n |p1>`` into alternating computation/action phase paths.

Each path records the basis states where the amplitude crossed between the
``c = 0`` and ``c = 1`` sectors, the number of steps spent in each phase and
the product amplitude.  Within a phase the walk keeps a sparse vector
rather than branching per basis state; a new branch starts only at a sector
crossing, so the tree nodes are exactly the phase boundaries.
"""

from __future__ import annotations

import json
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .assembly import StepOperator
from .config_space import StateVector, decode
from .errors import ValidationError
from .evolution import evolve


@dataclass(frozen=True)
class PhasePath:
    """One term of the phase-path sum.

    ``boundary`` has ``t + 1`` basis indices: the start, every sector
    crossing, and the final state.  ``kinds`` alternates ``"c"``/``"a"``
    starting from the sector of the initial state.
    """

    t: int
    h: tuple[int, ...]
    kinds: tuple[str, ...]
    boundary: tuple[int, ...]
    amplitude: complex

    @property
    def final(self) -> int:
        return self.boundary[-1]

    def as_dict(self) -> dict:
        return {
            "t": self.t,
            "h": list(self.h),
            "kinds": list(self.kinds),
            "boundary": list(self.boundary),
            "amp": [self.amplitude.real, self.amplitude.imag],
        }


@dataclass
class PathSet:
    """Result of :func:`enumerate_phase_paths` with pruning bookkeeping.

    ``discarded_mass`` sums ``|phi|^2`` of pruned branches and
    ``discarded_bound`` sums ``|phi|``, which bounds the amplitude error
    at any single final state.
    """

    start: int
    n: int
    epsilon: float
    paths: list[PhasePath]
    discarded_mass: float = 0.0
    discarded_bound: float = 0.0
    tree_nodes: int = 0

    def __len__(self) -> int:
        return len(self.paths)

    def __iter__(self):
        return iter(self.paths)

    def amplitudes_by_final(self) -> dict[int, complex]:
        acc: dict[int, complex] = defaultdict(complex)
        for p in self.paths:
            acc[p.final] += p.amplitude
        return dict(acc)


@dataclass
class _Branch:
    boundary: tuple[int, ...]
    h: tuple[int, ...]
    steps: int
    vec: dict[int, complex]


def _kinds(first_c: int, t: int) -> tuple[str, ...]:
    names = ("c", "a") if first_c == 0 else ("a", "c")
    return tuple(names[j % 2] for j in range(t))


def enumerate_phase_paths(T: StepOperator, start: int | StateVector, n: int, epsilon: float = 0.0) -> PathSet:
    """All phase paths of ``n`` steps from a basis state.

    Branches whose amplitude norm drops below ``epsilon`` are discarded
    and counted in the pruning totals.
    """
    if n < 0:
        raise ValidationError("n must be >= 0")
    if epsilon < 0:
        raise ValidationError("epsilon must be >= 0")
    if isinstance(start, StateVector):
        nz = np.flatnonzero(start.amplitudes)
        if len(nz) != 1 or start.amplitudes[nz[0]] != 1:
            raise ValidationError("phase-path enumeration starts from a single basis state")
        start = int(nz[0])
    start = int(start)
    first_c = start & 1
    if n == 0:
        only = PhasePath(1, (0,), _kinds(first_c, 1), (start, start), 1.0 + 0j)
        return PathSet(start, 0, epsilon, [only], tree_nodes=1)

    cache: dict[int, tuple] = {}

    def column(j):
        col = cache.get(j)
        if col is None:
            rows, vals = T.column(j)
            col = cache[j] = (rows.tolist(), vals.tolist())
        return col

    out = PathSet(start, n, epsilon, [], tree_nodes=1)
    branches = [_Branch((start,), (), 0, {start: 1.0 + 0j})]
    for _ in range(n):
        nxt = []
        for br in branches:
            sector = br.boundary[-1] & 1
            stay: dict[int, complex] = defaultdict(complex)
            leave: dict[int, complex] = defaultdict(complex)
            for j, a in br.vec.items():
                rows, vals = column(j)
                for r, v in zip(rows, vals):
                    (stay if r & 1 == sector else leave)[r] += v * a
            stay = {k: v for k, v in stay.items() if v != 0}
            if stay:
                nxt.append(_Branch(br.boundary, br.h, br.steps + 1, stay))
            for r in sorted(leave):
                if leave[r] != 0:
                    out.tree_nodes += 1
                    nxt.append(_Branch(br.boundary + (r,), br.h + (br.steps + 1,), 0, {r: leave[r]}))
        branches = []
        for br in nxt:
            mass = sum(abs(v) ** 2 for v in br.vec.values())
            if mass < epsilon**2:
                out.discarded_mass += mass
                out.discarded_bound += float(np.sqrt(mass))
            else:
                branches.append(br)

    for br in branches:
        if br.steps == 0:
            t = len(br.h)
            (amp,) = br.vec.values()
            out.paths.append(PhasePath(t, br.h, _kinds(first_c, t), br.boundary, amp))
            continue
        t = len(br.h) + 1
        for f in sorted(br.vec):
            out.paths.append(
                PhasePath(t, br.h + (br.steps,), _kinds(first_c, t), br.boundary + (f,), br.vec[f])
            )
    out.paths.sort(key=lambda p: (p.boundary, p.h))
    return out


def verify_path_sum(paths: PathSet, T: StepOperator, start: int | None = None, n: int | None = None) -> float:
    """Largest ``|sum of path amplitudes - <f| T^n |start>|`` over final states ``f``."""
    start = paths.start if start is None else int(start)
    n = paths.n if n is None else n
    psi = np.zeros(T.dimension, dtype=np.complex128)
    psi[start] = 1
    direct = evolve(T, StateVector(T.params, psi), n).amplitudes
    summed = np.zeros_like(direct)
    for f, a in paths.amplitudes_by_final().items():
        summed[f] = a
    return float(np.max(np.abs(summed - direct)))


def boundary_violations(paths: PathSet, T: StepOperator) -> dict[str, int]:
    """Count phases whose endpoints break the locality constraints.

    Computation phases must keep the robot site; action phases must keep
    ``(node, o, d, s)``.
    """
    p = T.params
    bad = Counter(computation=0, action=0)
    for path in paths:
        cfgs = [decode(b, p) for b in path.boundary]
        for kind, a, b in zip(path.kinds, cfgs[:-1], cfgs[1:]):
            if kind == "c" and a.x != b.x:
                bad["computation"] += 1
            if kind == "a" and (a.node, a.o, a.d, a.s) != (b.node, b.o, b.d, b.s):
                bad["action"] += 1
    return dict(bad)


@dataclass
class PathStatistics:
    """``|amplitude|^2``-weighted histograms, normalized to the total weight."""

    t_hist: dict[int, float]
    h_hist: list[dict[int, float]]
    total_weight: float
    path_count: int
    tree_nodes: int
    single_phase_paths: int
    single_phase_weight: float = field(default=0.0)


def path_statistics(paths: PathSet) -> PathStatistics:
    if not len(paths):
        raise ValidationError("path set is empty")
    weights = [abs(p.amplitude) ** 2 for p in paths]
    total = float(sum(weights))
    norm = total if total > 0 else 1.0
    t_hist: dict[int, float] = defaultdict(float)
    h_hist: list[dict[int, float]] = []
    single = 0
    single_w = 0.0
    for p, w in zip(paths, weights):
        t_hist[p.t] += w / norm
        for j, h in enumerate(p.h):
            while len(h_hist) <= j:
                h_hist.append(defaultdict(float))
            h_hist[j][h] += w / norm
        if p.t == 1:
            single += 1
            single_w += w / norm
    return PathStatistics(
        dict(sorted(t_hist.items())),
        [dict(sorted(h.items())) for h in h_hist],
        total,
        len(paths),
        paths.tree_nodes,
        single,
        single_w,
    )


def paths_document(paths: PathSet, T: StepOperator, config_hash: str = "") -> dict:
    return {
        "config_hash": config_hash,
        "version": __version__,
        "params": T.params.as_dict(),
        "start": paths.start,
        "n": paths.n,
        "epsilon": paths.epsilon,
        "discarded_mass": paths.discarded_mass,
        "discarded_bound": paths.discarded_bound,
        "paths": [p.as_dict() for p in paths],
    }


def write_paths_json(paths: PathSet, T: StepOperator, path, config_hash: str = "") -> None:
    Path(path).write_text(json.dumps(paths_document(paths, T, config_hash), indent=1) + "\n")


__all__ = [
    "PathSet",
    "PathStatistics",
    "PhasePath",
    "boundary_violations",
    "enumerate_phase_paths",
    "path_statistics",
    "paths_document",
    "verify_path_sum",
    "write_paths_json",
]
