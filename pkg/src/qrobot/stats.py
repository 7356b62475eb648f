"""Outcome statistics of the distance task.

``P_k(n)`` is the weight of states whose permanent memory reads ``n`` and
whose output symbol is no longer ``MR1`` (the search part is over).  The
literal form also counts the never-found ``MRINF`` branch, which sits at
``s = 0``; the ``valid`` variant keeps only ``ML1``, ``DN`` and ``MLINF``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import __version__
from .action_kernel import KernelSpec
from .assembly import EnvironmentSpec, StepOperator, build_step_operator
from .config_space import REGISTERS, Output, StateVector, SystemParams, initial_configuration
from .errors import ValidationError
from .evolution import InitialStateSpec, evolve

VARIANTS = {
    "literal": (Output.ML1, Output.DN, Output.MRINF, Output.MLINF),
    "valid": (Output.ML1, Output.DN, Output.MLINF),
}
_S_AXIS = REGISTERS.index("s")
_O_AXIS = REGISTERS.index("o")


@dataclass(frozen=True, eq=False)
class DistanceDistribution:
    k: int
    probabilities: np.ndarray
    variant: str = "literal"

    @property
    def completed_mass(self) -> float:
        return float(self.probabilities.sum())

    def __getitem__(self, n: int) -> float:
        return float(self.probabilities[n])

    def argmax(self) -> int:
        return int(np.argmax(self.probabilities))

    def as_dict(self, tol: float = 0.0) -> dict[int, float]:
        return {n: float(p) for n, p in enumerate(self.probabilities) if p > tol}


def _completed(tensor: np.ndarray, variant: str) -> np.ndarray:
    if variant not in VARIANTS:
        raise ValidationError(f"unknown variant {variant!r}")
    keep = [int(o) for o in VARIANTS[variant]]
    return np.take(tensor, keep, axis=_O_AXIS)


def distance_distribution(state: StateVector, variant: str = "literal") -> DistanceDistribution:
    """``P_k(n) = <Psi| P_n^s (1 - P_MR1^o) |Psi>`` for every ``n``."""
    probs = np.abs(_completed(state.tensor(), variant)) ** 2
    other = tuple(a for a in range(len(REGISTERS)) if a != _S_AXIS)
    return DistanceDistribution(state.step, probs.sum(axis=other), variant)


def _require_still(T: StepOperator) -> None:
    if T.env_spec.moving:
        raise ValidationError("decomposition over particle sites needs a motionless environment")


def conditional_distance_distribution(
    T: StepOperator, psi0: StateVector, k: int, variant: str = "literal"
) -> DistanceDistribution:
    """``P_k(n, y)`` for an initial state with the particle at one site."""
    _require_still(T)
    ys = np.flatnonzero(np.abs(psi0.tensor()).sum(axis=tuple(range(1, len(REGISTERS)))))
    if len(ys) != 1:
        raise ValidationError(f"particle must sit at one site, found support {ys.tolist()}")
    return distance_distribution(evolve(T, psi0, k), variant)


def coherence_decomposition(
    T: StepOperator, x: int, x_prime: int, y: int, k: int, variant: str = "literal"
) -> np.ndarray:
    """Cross terms ``<Theta_k(x', y)| P_n^s (1 - P_MR1^o) |Theta_k(x, y)>`` over ``n``."""
    _require_still(T)
    p = T.params

    def run(xx):
        return evolve(T, StateVector.basis(initial_configuration(y, xx), p), k).tensor()

    a = _completed(run(x), variant)
    b = a if x_prime == x else _completed(run(x_prime), variant)
    cross = np.conj(b) * a
    other = tuple(ax for ax in range(len(REGISTERS)) if ax != _S_AXIS)
    return cross.sum(axis=other)


@dataclass(frozen=True)
class FidelityReport:
    """Correlation fidelity plus the largest off-diagonal ``(y, s)`` coherence."""

    fidelity: float
    completed_mass: float
    offdiagonal: float


def correlation_fidelity(state: StateVector, x: int, variant: str = "literal") -> FidelityReport:
    """Probability that a completed branch stores ``(y - x) mod L`` in ``s``."""
    p = state.params
    t = _completed(state.tensor(), variant)
    probs = np.abs(t) ** 2
    ys = np.arange(p.L)
    n = (ys - x) % p.L
    ok = n < p.s_radix
    # probs axes: y, x, d, s, node, o, c
    per_ys = probs.sum(axis=(1, 2, 4, 5, 6))
    fid = float(per_ys[ys[ok], n[ok]].sum())
    # reduced density matrix on (y, s) of the completed part
    A = np.moveaxis(t, _S_AXIS, 1).reshape(p.L * p.s_radix, -1)
    rho = A @ A.conj().T
    off = rho - np.diag(np.diag(rho))
    return FidelityReport(fid, float(per_ys.sum()), float(np.abs(off).max(initial=0.0)))


@dataclass(frozen=True)
class Scenario:
    """Fixed lattice, packets and true distance for an accuracy sweep."""

    params: SystemParams
    initial: InitialStateSpec
    distance: int
    a0: complex = 2**-0.5
    a1: complex = 2**-0.5
    environment: EnvironmentSpec = EnvironmentSpec()


@dataclass(frozen=True)
class SweepRow:
    alpha: float
    k: int
    argmax: int
    peak_mass: float
    rms_spread: float


def rms_spread(dist: DistanceDistribution, center: int) -> float:
    """Root-mean-square deviation of ``n`` from ``center`` over the completed mass."""
    mass = dist.completed_mass
    if mass <= 0:
        return math.nan
    n = np.arange(len(dist.probabilities))
    return float(np.sqrt(np.sum(dist.probabilities * (n - center) ** 2) / mass))


def sweep_operator(T: StepOperator, scenario: Scenario, ks: Sequence[int], alpha: float) -> list[SweepRow]:
    """Distance statistics at each ``k`` for one built operator (single pass over steps)."""
    ks = sorted(set(int(k) for k in ks))
    state = scenario.initial.build(scenario.params)
    rows = []
    done = 0
    for k in ks:
        state = evolve(T, state, k - done)
        done = k
        dist = distance_distribution(state)
        am = dist.argmax()
        rows.append(SweepRow(alpha, k, am, dist[am], rms_spread(dist, scenario.distance)))
    return rows


def accuracy_sweep(
    alphas: Iterable[float], ks: Sequence[int], scenario: Scenario, include_strict: bool = True
) -> list[SweepRow]:
    """Gaussian-kernel rows for every ``alpha`` and ``k``, plus the strict kernel as ``alpha = inf``."""
    rows = []
    for alpha in alphas:
        spec = KernelSpec.gaussian(alpha, scenario.a0, scenario.a1)
        T = build_step_operator(scenario.params, spec, scenario.environment)
        rows.extend(sweep_operator(T, scenario, ks, float(alpha)))
    if include_strict:
        T = build_step_operator(scenario.params, KernelSpec(), scenario.environment)
        rows.extend(sweep_operator(T, scenario, ks, math.inf))
    return rows


def _header(f, config_hash: str) -> None:
    f.write(f"# config_hash={config_hash} version={__version__}\n")


def _num(v: float) -> str:
    return repr(float(v))


def write_distribution_csv(dists: Iterable[DistanceDistribution], path, config_hash: str = "") -> None:
    with open(Path(path), "w", newline="") as f:
        _header(f, config_hash)
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["k", "n", "P", "variant"])
        for dist in dists:
            for n, prob in enumerate(dist.probabilities):
                w.writerow([dist.k, n, _num(prob), dist.variant])


def write_sweep_csv(rows: Iterable[SweepRow], path, config_hash: str = "") -> None:
    with open(Path(path), "w", newline="") as f:
        _header(f, config_hash)
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["alpha", "k", "argmax", "peak_mass", "rms_spread"])
        for r in rows:
            w.writerow([_num(r.alpha), r.k, r.argmax, _num(r.peak_mass), _num(r.rms_spread)])


def read_csv_table(path) -> tuple[dict, list[dict]]:
    """Parse one of the CSV outputs: ``(header fields, rows)``."""
    lines = Path(path).read_text().splitlines()
    meta = {}
    if lines and lines[0].startswith("#"):
        for token in lines[0][1:].split():
            key, _, value = token.partition("=")
            meta[key] = value
        lines = lines[1:]
    return meta, list(csv.DictReader(lines))


__all__ = [
    "DistanceDistribution",
    "FidelityReport",
    "Scenario",
    "SweepRow",
    "accuracy_sweep",
    "coherence_decomposition",
    "conditional_distance_distribution",
    "correlation_fidelity",
    "distance_distribution",
    "read_csv_table",
    "rms_spread",
    "sweep_operator",
    "write_distribution_csv",
    "write_sweep_csv",
]
