"""Discrete-time iteration ``Psi(k) = T^k Psi(0)`` with norm monitoring."""

from __future__ import annotations

import io
import struct
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .assembly import StepOperator, reachable_subspace
from .config_space import Marginal, StateVector, SystemParams, dimension, marginal, product_state
from .errors import FormatError, NormDriftError, ValidationError

NORM_WARN = 1e-9
NORM_FAIL = 1e-6
DEFAULT_CHOP = 1e-14
STATE_MAGIC = b"QRSV"
STATE_FORMAT_VERSION = 1
HASH_BYTES = 64


@dataclass(frozen=True)
class SitePacket:
    """Amplitudes over lattice sites: explicit ``(site, amp)`` pairs or a Gaussian packet.

    A packet is ``exp(-(y - center)^2 / (4 width^2))`` with periodic
    distance, normalized.  Explicit amplitudes must already be normalized.
    """

    sites: tuple[tuple[int, complex], ...] = ()
    center: float | None = None
    width: float | None = None

    @classmethod
    def at(cls, site: int) -> "SitePacket":
        return cls(((int(site), 1.0),))

    @classmethod
    def uniform(cls, sites: Sequence[int]) -> "SitePacket":
        sites = list(sites)
        if not sites or len(set(sites)) != len(sites):
            raise ValidationError("uniform packet needs distinct sites")
        w = 1 / np.sqrt(len(sites))
        return cls(tuple((int(s), w) for s in sites))

    @classmethod
    def gaussian(cls, center: float, width: float) -> "SitePacket":
        if not width > 0:
            raise ValidationError(f"packet width must be > 0, got {width!r}")
        return cls((), float(center), float(width))

    def amplitudes(self, L: int) -> np.ndarray:
        if self.center is not None:
            y = np.arange(L)
            dist = (y - self.center + L / 2) % L - L / 2
            amps = np.exp(-(dist**2) / (4 * self.width**2)).astype(np.complex128)
            return amps / np.linalg.norm(amps)
        amps = np.zeros(L, dtype=np.complex128)
        for site, a in self.sites:
            if not 0 <= site < L:
                raise ValidationError(f"site {site} outside [0, {L})")
            amps[site] += complex(a)
        norm = float(np.sum(np.abs(amps) ** 2))
        if abs(norm - 1) > 1e-12:
            raise ValidationError(f"site amplitudes have squared norm {norm!r}, expected 1")
        return amps


@dataclass(frozen=True)
class InitialStateSpec:
    """Product of a particle packet and a robot packet, internal state at the task start."""

    particle: SitePacket
    robot: SitePacket

    def build(self, params: SystemParams) -> StateVector:
        return product_state(params, self.particle.amplitudes(params.L), self.robot.amplitudes(params.L))


def _check_norm(norm: float, step: int) -> None:
    drift = abs(norm - 1.0)
    if drift > NORM_FAIL:
        raise NormDriftError(f"norm drifted to {norm!r} at step {step}")
    if drift > NORM_WARN:
        warnings.warn(f"norm drift {drift:.3e} at step {step}", stacklevel=3)


def _stepper(T: StepOperator, psi0: StateVector, compact: bool):
    """Return ``(vector, step_fn, expand_fn)`` working in the full or reachable space."""
    if not compact:
        return psi0.amplitudes.copy(), T.apply, lambda v: v
    sub = reachable_subspace(T, np.flatnonzero(psi0.amplitudes))
    mat = sub.matrix
    return sub.compress(psi0.amplitudes), lambda v: mat @ v, lambda v: sub.expand(v, T.dimension)


def _iterate(T, psi0, k, chop, compact, on_step=None):
    if k < 0:
        raise ValidationError("step count must be >= 0")
    if psi0.params != T.params:
        raise ValidationError("state and operator have different parameters")
    _check_norm(psi0.norm(), psi0.step)
    vec, step, expand = _stepper(T, psi0, compact)
    for j in range(1, k + 1):
        vec = step(vec)
        if chop:
            vec[np.abs(vec) < chop] = 0
        _check_norm(float(np.linalg.norm(vec)), psi0.step + j)
        if on_step is not None:
            on_step(j, expand)(vec)
    return psi0.with_amplitudes(expand(vec), psi0.step + k)


def evolve(
    T: StepOperator, psi0: StateVector, k: int, chop: float = 0.0, compact: bool = False
) -> StateVector:
    """Apply ``T`` ``k`` times.

    ``chop`` drops amplitudes below that magnitude after every step (off by
    default).  ``compact`` restricts the iteration to the basis states
    reachable from the support of ``psi0``; results are identical.
    Raises :class:`NormDriftError` when the norm leaves ``1 +- 1e-6``.
    """
    return _iterate(T, psi0, k, chop, compact)


@dataclass
class EvolutionRecord:
    """Per-step marginals for each selector (steps ``0..k``) and the final state."""

    selectors: list
    marginals: list[dict] = field(default_factory=list)
    final: StateVector | None = None

    def series(self, selector) -> list[Marginal]:
        key = _selector_key(selector)
        return [m[key] for m in self.marginals]


def _selector_key(selector):
    return selector if isinstance(selector, str) else tuple(selector)


def evolve_with_records(
    T: StepOperator,
    psi0: StateVector,
    k: int,
    observables: Sequence,
    chop: float = 0.0,
    compact: bool = False,
) -> EvolutionRecord:
    """Evolve like :func:`evolve`, recording the marginal of every selector at every step."""
    keys = [_selector_key(s) for s in observables]
    rec = EvolutionRecord(keys)

    def snap(state: StateVector):
        rec.marginals.append({key: marginal(state, key) for key in keys})

    snap(psi0)

    def on_step(j, expand):
        return lambda vec: snap(psi0.with_amplitudes(expand(vec), psi0.step + j))

    rec.final = _iterate(T, psi0, k, chop, compact, on_step)
    return rec


def save_state(state: StateVector, path: str | Path, config_hash: str = "") -> None:
    """Write a QRSV file (little-endian)."""
    h = config_hash.encode("ascii")
    if len(h) > HASH_BYTES:
        raise ValidationError("config hash longer than 64 bytes")
    buf = io.BytesIO()
    buf.write(STATE_MAGIC)
    buf.write(struct.pack("<III", STATE_FORMAT_VERSION, state.params.L, state.params.N))
    buf.write(h.ljust(HASH_BYTES, b"\0"))
    buf.write(struct.pack("<QQ", state.step, state.dimension))
    data = np.empty((state.dimension, 2), dtype="<f8")
    data[:, 0] = state.amplitudes.real
    data[:, 1] = state.amplitudes.imag
    buf.write(data.tobytes())
    Path(path).write_bytes(buf.getvalue())


def load_state(path: str | Path) -> tuple[StateVector, str]:
    """Read a QRSV file; returns the state and its stored config hash."""
    raw = Path(path).read_bytes()
    if raw[:4] != STATE_MAGIC:
        raise FormatError("not a QRSV state file")
    version, L, N = struct.unpack_from("<III", raw, 4)
    if version != STATE_FORMAT_VERSION:
        raise FormatError(f"unsupported QRSV version {version}")
    h = raw[16 : 16 + HASH_BYTES].rstrip(b"\0").decode("ascii")
    step, dim = struct.unpack_from("<QQ", raw, 16 + HASH_BYTES)
    params = SystemParams(L, N)
    if dim != dimension(params):
        raise FormatError("QRSV dimension does not match its parameters")
    pos = 32 + HASH_BYTES
    if len(raw) != pos + 16 * dim:
        raise FormatError("QRSV payload length mismatch")
    data = np.frombuffer(raw, dtype="<f8", offset=pos).reshape(dim, 2)
    return StateVector(params, data[:, 0] + 1j * data[:, 1], int(step)), h


__all__ = [
    "DEFAULT_CHOP",
    "EvolutionRecord",
    "InitialStateSpec",
    "SitePacket",
    "evolve",
    "evolve_with_records",
    "load_state",
    "save_state",
]
