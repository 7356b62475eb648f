"""Configuration basis of the robot + particle system.

A basis configuration is the tuple ``(y, x, d, s, node, o, c)``:

* ``y``     particle site on the periodic lattice ``[0, L)``
* ``x``     robot site ``[0, L)``
* ``d``     running memory, a circular signed counter on ``[-(2^N-1), 2^N-1]``
* ``s``     permanent memory ``[0, 2^N)``
* ``node``  on-board machine node (:class:`Node`)
* ``o``     output symbol (:class:`Output`)
* ``c``     control bit, 0 = computation active, 1 = action active

Basis states are packed into a single integer with the fixed mixed-radix
order above (``y`` most significant, ``c`` least significant).  The same
order is used as the C-order axis layout of :meth:`StateVector.tensor`, so
register-wise projections and marginals are plain reshapes.
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import ValidationError

MAX_MEMORY_BITS = 6
NODE_COUNT = 7
OUTPUT_COUNT = 5

REGISTERS = ("y", "x", "d", "s", "node", "o", "c")


class Node(enum.IntEnum):
    """Nodes of the compiled decision diagram (ordering is part of the basis)."""

    S0 = 0  # observe
    S1 = 1  # increment
    S2 = 2  # cap test
    F1 = 3  # copy
    F2 = 4  # post-copy decrement / branch
    R0 = 5  # return decrement / test
    B0 = 6  # ballast decrement / test


class Output(enum.IntEnum):
    """Output-system symbols; each names the pending action."""

    MR1 = 0
    ML1 = 1
    DN = 2
    MRINF = 3
    MLINF = 4


@dataclass(frozen=True)
class SystemParams:
    """Lattice size ``L`` and memory width ``N``; fixes the configuration space."""

    L: int
    N: int

    def __post_init__(self):
        if isinstance(self.L, bool) or not isinstance(self.L, (int, np.integer)):
            raise ValidationError(f"L must be an integer, got {self.L!r}")
        if isinstance(self.N, bool) or not isinstance(self.N, (int, np.integer)):
            raise ValidationError(f"N must be an integer, got {self.N!r}")
        if self.L < 2:
            raise ValidationError(f"L must be >= 2, got {self.L}")
        if not 1 <= self.N <= MAX_MEMORY_BITS:
            raise ValidationError(f"N must be in [1, {MAX_MEMORY_BITS}], got {self.N}")
        object.__setattr__(self, "L", int(self.L))
        object.__setattr__(self, "N", int(self.N))

    @property
    def d_max(self) -> int:
        return 2**self.N - 1

    @property
    def d_radix(self) -> int:
        return 2 ** (self.N + 1) - 1

    @property
    def s_radix(self) -> int:
        return 2**self.N

    @property
    def internal_count(self) -> int:
        """Number of ``(d, s, node, o)`` internal states."""
        return self.d_radix * self.s_radix * NODE_COUNT * OUTPUT_COUNT

    @property
    def shape(self) -> tuple[int, ...]:
        """Axis lengths of the state tensor, in packing order."""
        return (self.L, self.L, self.d_radix, self.s_radix, NODE_COUNT, OUTPUT_COUNT, 2)

    @property
    def dimension(self) -> int:
        return dimension(self)

    def as_dict(self) -> dict:
        return {"L": self.L, "N": self.N}


def dimension(params: SystemParams) -> int:
    """Return ``L^2 (2^{N+1}-1) 2^N * 7 * 5 * 2``."""
    dim = 1
    for n in params.shape:
        dim *= n
    if dim >= 2**63:
        raise OverflowError(f"dimension {dim} does not fit a signed 64-bit index")
    return dim


@dataclass(frozen=True)
class Configuration:
    """One classical configuration of the whole system."""

    y: int
    x: int
    d: int
    s: int
    node: Node
    o: Output
    c: int

    def __post_init__(self):
        object.__setattr__(self, "node", Node(self.node))
        object.__setattr__(self, "o", Output(self.o))

    def replace(self, **changes) -> "Configuration":
        values = {name: getattr(self, name) for name in REGISTERS}
        values.update(changes)
        return Configuration(**values)


def initial_configuration(y: int, x: int) -> Configuration:
    """The task start: ``d=0, s=0, node=S0, o=MR1, c=0``."""
    return Configuration(y=y, x=x, d=0, s=0, node=Node.S0, o=Output.MR1, c=0)


def _check_register(params: SystemParams, name: str, value: int) -> int:
    if name in ("y", "x"):
        lo, hi = 0, params.L - 1
    elif name == "d":
        lo, hi = -params.d_max, params.d_max
    elif name == "s":
        lo, hi = 0, params.s_radix - 1
    elif name == "node":
        lo, hi = 0, NODE_COUNT - 1
    elif name == "o":
        lo, hi = 0, OUTPUT_COUNT - 1
    elif name == "c":
        lo, hi = 0, 1
    else:
        raise ValidationError(f"unknown register {name!r}")
    v = int(value)
    if not lo <= v <= hi:
        raise ValidationError(f"register {name}={value} outside [{lo}, {hi}]")
    return v


def _axis_value(params: SystemParams, name: str, value: int) -> int:
    """Register value -> axis position in the state tensor."""
    v = _check_register(params, name, value)
    return v + params.d_max if name == "d" else v


def encode(config: Configuration, params: SystemParams) -> int:
    """Pack a configuration into its basis index."""
    index = 0
    for name, radix in zip(REGISTERS, params.shape):
        index = index * radix + _axis_value(params, name, getattr(config, name))
    return index


def decode(index: int, params: SystemParams) -> Configuration:
    """Inverse of :func:`encode`."""
    dim = dimension(params)
    index = int(index)
    if not 0 <= index < dim:
        raise ValidationError(f"index {index} outside [0, {dim})")
    values = {}
    for name, radix in zip(reversed(REGISTERS), reversed(params.shape)):
        index, values[name] = divmod(index, radix)
    values["d"] -= params.d_max
    return Configuration(**values)


def internal_index(d: int, s: int, node: int, o: int, params: SystemParams) -> int:
    """Pack the internal registers ``(d, s, node, o)`` (the ``m`` of the basis)."""
    return ((_axis_value(params, "d", d) * params.s_radix + s) * NODE_COUNT + node) * OUTPUT_COUNT + o


def internal_fields(params: SystemParams) -> dict[str, np.ndarray]:
    """Arrays ``d, s, node, o`` over all internal indices ``m``."""
    m = np.arange(params.internal_count)
    o = m % OUTPUT_COUNT
    rest = m // OUTPUT_COUNT
    node = rest % NODE_COUNT
    rest //= NODE_COUNT
    s = rest % params.s_radix
    d = rest // params.s_radix - params.d_max
    return {"d": d, "s": s, "node": node, "o": o}


def register_axes(selector: str | Sequence[str]) -> tuple[int, ...]:
    """Normalize a selector to a sorted tuple of tensor axes."""
    names = (selector,) if isinstance(selector, str) else tuple(selector)
    if not names:
        raise ValidationError("selector must name at least one register")
    for n in names:
        if n not in REGISTERS:
            raise ValidationError(f"unknown register {n!r}")
    if len(set(names)) != len(names):
        raise ValidationError(f"duplicate register in selector {names}")
    return tuple(REGISTERS.index(n) for n in names)


@dataclass(frozen=True, eq=False)
class StateVector:
    """Dense complex amplitudes over the configuration basis."""

    params: SystemParams
    amplitudes: np.ndarray
    step: int = 0

    def __post_init__(self):
        amps = np.ascontiguousarray(self.amplitudes, dtype=np.complex128)
        if amps.shape != (dimension(self.params),):
            raise ValidationError(
                f"amplitude vector has shape {amps.shape}, expected ({dimension(self.params)},)"
            )
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def basis(cls, config: Configuration, params: SystemParams) -> "StateVector":
        amps = np.zeros(dimension(params), dtype=np.complex128)
        amps[encode(config, params)] = 1.0
        return cls(params, amps)

    @property
    def dimension(self) -> int:
        return self.amplitudes.shape[0]

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def tensor(self) -> np.ndarray:
        """View of the amplitudes with one axis per register."""
        return self.amplitudes.reshape(self.params.shape)

    def with_amplitudes(self, amplitudes: np.ndarray, step: int | None = None) -> "StateVector":
        return StateVector(self.params, amplitudes, self.step if step is None else step)

    def __add__(self, other: "StateVector") -> "StateVector":
        return self.with_amplitudes(self.amplitudes + other.amplitudes)

    def __sub__(self, other: "StateVector") -> "StateVector":
        return self.with_amplitudes(self.amplitudes - other.amplitudes)

    def __rmul__(self, scalar: complex) -> "StateVector":
        return self.with_amplitudes(scalar * self.amplitudes)

    def support(self, tol: float = 0.0) -> list[tuple[Configuration, complex]]:
        """Decoded nonzero entries, in index order."""
        idx = np.flatnonzero(np.abs(self.amplitudes) > tol)
        return [(decode(i, self.params), complex(self.amplitudes[i])) for i in idx]


def _value_tuple(selector, value) -> tuple:
    names = (selector,) if isinstance(selector, str) else tuple(selector)
    if isinstance(value, Mapping):
        return tuple(value[n] for n in names)
    if len(names) == 1 and not isinstance(value, (tuple, list)):
        return (value,)
    value = tuple(value)
    if len(value) != len(names):
        raise ValidationError(f"{len(names)} registers selected but {len(value)} values given")
    return value


def _mask(params: SystemParams, selector, value) -> np.ndarray:
    """Boolean tensor that is true where the selected registers equal ``value``."""
    names = (selector,) if isinstance(selector, str) else tuple(selector)
    axes = register_axes(names)
    values = _value_tuple(names, value)
    mask = np.ones(params.shape, dtype=bool)
    for name, axis, v in zip(names, axes, values):
        keep = np.zeros(params.shape[axis], dtype=bool)
        keep[_axis_value(params, name, v)] = True
        shape = [1] * len(params.shape)
        shape[axis] = params.shape[axis]
        mask &= keep.reshape(shape)
    return mask


def project(state: StateVector, selector: str | Sequence[str], value) -> StateVector:
    """Apply the projector onto ``selector == value``.

    ``value`` is a scalar for a single register, or a tuple / mapping aligned
    with ``selector``.  Enumerations (:class:`Node`, :class:`Output`) and plain
    integers are both accepted.
    """
    mask = _mask(state.params, selector, value).reshape(-1)
    return state.with_amplitudes(np.where(mask, state.amplitudes, 0))


class Marginal(dict):
    """Probability table over register values.

    Keys are the register value (single selector) or a tuple of values.  The
    attribute ``unnormalized`` flags an input whose norm was off by more than
    ``1e-9``.
    """

    unnormalized: bool = False
    total: float = 1.0


def _label(name: str, axis_pos: int, params: SystemParams):
    if name == "d":
        return axis_pos - params.d_max
    if name == "node":
        return Node(axis_pos)
    if name == "o":
        return Output(axis_pos)
    return axis_pos


def marginal(state: StateVector, selector: str | Sequence[str], tol: float = 0.0) -> Marginal:
    """Born-rule probabilities of the selected registers.

    Only entries with probability above ``tol`` are listed.
    """
    names = (selector,) if isinstance(selector, str) else tuple(selector)
    axes = register_axes(names)
    probs = np.abs(state.tensor()) ** 2
    other = tuple(a for a in range(len(REGISTERS)) if a not in axes)
    table = probs.sum(axis=other)
    # sum() keeps remaining axes in increasing order; reorder to selector order
    order = np.argsort(np.argsort(axes))
    table = np.transpose(table, order) if len(axes) > 1 else table
    result = Marginal()
    total = float(table.sum())
    for pos in zip(*np.nonzero(table > tol)):
        key = tuple(_label(n, int(p), state.params) for n, p in zip(names, pos))
        result[key[0] if len(names) == 1 else key] = float(table[pos])
    result.total = total
    result.unnormalized = abs(total - 1.0) > 1e-9
    if result.unnormalized:
        warnings.warn(f"marginal of unnormalized state (norm^2 = {total:.12g})", stacklevel=2)
    return result


def site_amplitudes(L: int, sites: Iterable[tuple[int, complex]]) -> np.ndarray:
    """Dense length-``L`` amplitude array from ``(site, amplitude)`` pairs."""
    amps = np.zeros(L, dtype=np.complex128)
    for site, amp in sites:
        if not 0 <= site < L:
            raise ValidationError(f"site {site} outside [0, {L})")
        amps[site] += amp
    return amps


def product_state(
    params: SystemParams, particle: np.ndarray, robot: np.ndarray, **internal
) -> StateVector:
    """``sum_y sum_x c_y d_x |y, x, internal>`` with the task start as default internal state."""
    regs = {"d": 0, "s": 0, "node": Node.S0, "o": Output.MR1, "c": 0}
    regs.update(internal)
    t = np.zeros(params.shape, dtype=np.complex128)
    idx = tuple(_axis_value(params, n, regs[n]) for n in REGISTERS[2:])
    t[(slice(None), slice(None)) + idx] = np.outer(np.asarray(particle), np.asarray(robot))
    return StateVector(params, t.reshape(-1))


__all__ = [
    "Configuration",
    "Marginal",
    "Node",
    "Output",
    "REGISTERS",
    "StateVector",
    "SystemParams",
    "decode",
    "dimension",
    "encode",
    "initial_configuration",
    "internal_fields",
    "internal_index",
    "marginal",
    "product_state",
    "project",
    "site_amplitudes",
]
