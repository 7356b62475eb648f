"""Action-phase kernels and their unitarization.

A kernel ``g(r, i)`` gives the amplitude for the robot to move by ``r``
sites and leave the control bit in state ``i`` during one action step
(``i = 0`` ends the phase, ``i = 1`` keeps it running).  Kernels are
translation invariant on the periodic lattice, so they are diagonal in
momentum: the column map is an isometry iff the two-component symbol
``(g0(k), g1(k))`` has unit norm at every ``k``.

:func:`unitarize` normalizes the symbol momentum by momentum and also builds
the *handoff* columns: the orthonormal complement of the kernel range,
chosen as the isometry nearest to the plain ``|x, c=1>`` embedding.  A
computation phase that starts an action writes into a handoff column, which
is what keeps the full step operator unitary when the kernel dwells.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .config_space import Output
from .errors import DegenerateKernelError, ValidationError

DIRECTION = {
    Output.MR1: +1,
    Output.ML1: -1,
    Output.DN: 0,
    Output.MRINF: +1,
    Output.MLINF: -1,
}
NONTERMINATING = (Output.MRINF, Output.MLINF)

RAW_CUTOFF = 1e-15
ROUNDOFF_FLOOR = 1e-15
DEGENERATE_NORM = 1e-10


@dataclass(frozen=True)
class KernelSpec:
    """Kernel family and coefficients.

    ``a0`` weights the phase-ending move, ``a1`` the dwell.  ``alpha`` is the
    Gaussian dispersion exponent and is ignored for the strict kind.
    """

    kind: str = "strict"
    alpha: float | None = None
    a0: complex = 1.0
    a1: complex = 0.0

    def __post_init__(self):
        object.__setattr__(self, "a0", complex(self.a0))
        object.__setattr__(self, "a1", complex(self.a1))
        if self.kind == "strict":
            norm = abs(self.a0) ** 2 + abs(self.a1) ** 2
            if abs(norm - 1.0) > 1e-12:
                raise ValidationError(f"strict kernel needs |a0|^2+|a1|^2 = 1, got {norm!r}")
        elif self.kind == "gaussian":
            if self.alpha is None or not self.alpha > 0:
                raise ValidationError(f"gaussian kernel needs alpha > 0, got {self.alpha!r}")
            if self.a0 == 0 and self.a1 == 0:
                raise ValidationError("gaussian kernel needs (a0, a1) != (0, 0)")
            object.__setattr__(self, "alpha", float(self.alpha))
        else:
            raise ValidationError(f"unknown kernel kind {self.kind!r}")

    @classmethod
    def gaussian(cls, alpha: float, a0: complex = 2**-0.5, a1: complex = 2**-0.5) -> "KernelSpec":
        return cls("gaussian", alpha, a0, a1)

    def as_dict(self) -> dict:
        return {
            "kind": self.kind,
            "alpha": self.alpha,
            "a0": [self.a0.real, self.a0.imag],
            "a1": [self.a1.real, self.a1.imag],
        }


@dataclass(frozen=True, eq=False)
class RawKernel:
    """Kernel values ``g(r, i)`` stored at row ``r mod L``."""

    symbol: Output
    L: int
    values: np.ndarray

    def at(self, r: int, i: int) -> complex:
        return complex(self.values[r % self.L, i])

    @property
    def window(self) -> range:
        return range(-(self.L // 2), -(-self.L // 2))


def _window(L: int) -> np.ndarray:
    return np.arange(-(L // 2), -(-L // 2))


def gaussian_kernel(o: Output, spec: KernelSpec, L: int) -> RawKernel:
    """``g(r, i) = a_i exp(-alpha (r - 1 + i)^2)`` for a right move, mirrored for left.

    The stationary symbol uses ``a_i exp(-alpha r^2)`` for both ``i``.
    Values below ``1e-15`` in magnitude are dropped.
    """
    if spec.kind != "gaussian":
        raise ValidationError("gaussian_kernel needs a gaussian KernelSpec")
    if L < 2:
        raise ValidationError("L must be >= 2")
    o = Output(o)
    direction = DIRECTION[o]
    r = _window(L)
    values = np.zeros((L, 2), dtype=np.complex128)
    for i, a in enumerate((spec.a0, spec.a1)):
        if direction == 0:
            shift = r
        else:
            shift = direction * r - 1 + i
        g = a * np.exp(-spec.alpha * shift.astype(float) ** 2)
        g[np.abs(g) < RAW_CUTOFF] = 0
        values[r % L, i] = g
    return RawKernel(o, L, values)


def strict_kernel(o: Output, spec: KernelSpec, L: int) -> RawKernel:
    """Single-path kernel: move-and-end with ``a0``, dwell with ``a1``.

    Nonterminating symbols carry one unit move that ends the step; their
    computation rows restart the drift immediately.
    """
    o = Output(o)
    direction = DIRECTION[o]
    values = np.zeros((L, 2), dtype=np.complex128)
    if o in NONTERMINATING:
        values[direction % L, 0] = 1.0
    else:
        values[direction % L, 0] += spec.a0
        values[0, 1] += spec.a1
    return RawKernel(o, L, values)


@dataclass(frozen=True, eq=False)
class ActionColumnMap:
    """Unitarized kernel for one output symbol.

    ``profile[r, c]`` is the amplitude of ``|x + r, c>`` in the column of
    ``|x, c=1>`` (any ``x``; the map is translation covariant).
    ``handoff[r, c]`` is the same for the complement column a computation
    phase writes into when it starts this action.
    """

    symbol: Output
    L: int
    profile: np.ndarray
    handoff: np.ndarray
    raw_deviation: float = 0.0
    support_radius: int = field(default=0)

    def column(self, x: int) -> np.ndarray:
        """Dense ``(L, 2)`` output of ``|x, c=1>``, indexed ``[x', c']``."""
        return np.roll(self.profile, x, axis=0)

    def matrix(self) -> np.ndarray:
        """Explicit ``2L x L`` kernel matrix, rows ordered ``x' * 2 + c'``."""
        return np.stack([self.column(x).reshape(-1) for x in range(self.L)], axis=1)

    def handoff_matrix(self) -> np.ndarray:
        return np.stack([np.roll(self.handoff, x, axis=0).reshape(-1) for x in range(self.L)], axis=1)

    def block(self) -> np.ndarray:
        """``2L x 2L`` unitary ``[kernel | handoff]`` on one internal block."""
        return np.concatenate([self.matrix(), self.handoff_matrix()], axis=1)

    def entries(self, which: str = "profile") -> list[tuple[int, int, complex]]:
        """Nonzero ``(r mod L, c', value)`` triples of the profile or handoff."""
        arr = self.profile if which == "profile" else self.handoff
        return [(int(r), int(c), complex(arr[r, c])) for r, c in zip(*np.nonzero(arr))]


def _floor(a: np.ndarray, floor: float) -> np.ndarray:
    a = a.copy()
    a[np.abs(a) < floor] = 0
    return a


def unitarize(raw: RawKernel, floor: float = ROUNDOFF_FLOOR) -> ActionColumnMap:
    """Normalize the kernel symbol at every lattice momentum.

    Entries below ``floor`` (FFT round-off) are cleared afterwards; pass
    ``floor=0`` to keep every computed entry.
    """
    L = raw.L
    G = np.fft.fft(raw.values, axis=0)
    norms = np.sqrt(np.sum(np.abs(G) ** 2, axis=1))
    if not np.any(raw.values):
        raise DegenerateKernelError(f"kernel for {raw.symbol.name} has no nonzero entry")
    if norms.min() < DEGENERATE_NORM:
        k = int(np.argmin(norms))
        raise DegenerateKernelError(
            f"kernel for {raw.symbol.name} vanishes at momentum index {k} (|v| = {norms[k]:.3e})"
        )
    V = G / norms[:, None]
    # complement of V(k); phase fixed so the c=1 component is real and >= 0
    mag0 = np.abs(V[:, 0])
    phase = np.where(mag0 > 0, V[:, 0] / np.where(mag0 > 0, mag0, 1), 1.0)
    W = np.stack([-np.conj(V[:, 1]) * phase, mag0.astype(np.complex128)], axis=1)
    profile = _floor(np.fft.ifft(V, axis=0), floor)
    handoff = _floor(np.fft.ifft(W, axis=0), floor)
    nz = np.flatnonzero(np.any(profile != 0, axis=1))
    radius = int(max((min(r, L - r) for r in nz), default=0))
    return ActionColumnMap(
        raw.symbol,
        L,
        profile,
        handoff,
        raw_deviation=float(np.max(np.abs(profile - raw.values))),
        support_radius=radius,
    )


def raw_column_map(raw: RawKernel) -> ActionColumnMap:
    """Column map that uses the raw kernel as is (no normalization).

    The handoff is the plain ``|x, c=1>`` embedding.  Only useful for
    demonstrating that an operator built this way fails its audit.
    """
    handoff = np.zeros((raw.L, 2), dtype=np.complex128)
    handoff[0, 1] = 1.0
    nz = np.flatnonzero(np.any(raw.values != 0, axis=1))
    radius = int(max((min(r, raw.L - r) for r in nz), default=0))
    return ActionColumnMap(raw.symbol, raw.L, raw.values.copy(), handoff, 0.0, radius)


def column_gram_deviation(acm: ActionColumnMap) -> float:
    """Max entry of ``|K^H K - I|`` for the explicit kernel matrix."""
    K = acm.matrix()
    return float(np.max(np.abs(K.conj().T @ K - np.eye(acm.L))))


def raw_kernel(o: Output, spec: KernelSpec, L: int) -> RawKernel:
    return gaussian_kernel(o, spec, L) if spec.kind == "gaussian" else strict_kernel(o, spec, L)


def build_kernels(spec: KernelSpec, L: int, floor: float = ROUNDOFF_FLOOR) -> dict[Output, ActionColumnMap]:
    """Unitarized column maps for every output symbol."""
    return {o: unitarize(raw_kernel(o, spec, L), floor=floor) for o in Output}


__all__ = [
    "ActionColumnMap",
    "DIRECTION",
    "KernelSpec",
    "RawKernel",
    "build_kernels",
    "column_gram_deviation",
    "gaussian_kernel",
    "raw_column_map",
    "raw_kernel",
    "strict_kernel",
    "unitarize",
]
