"""Sparse step operator ``T = T_a + T_c`` and its environment composition.

Columns of ``T`` for ``c = 0`` basis states follow the transition table: a
unit entry for rows that continue the computation, a handoff column for rows
that start an action.  Columns for ``c = 1`` states carry the action kernel
of the state's output symbol when the ``(node, o)`` pair is an action entry
and are inert (identity) otherwise; neither case touches ``y, d, s, node, o``.

A moving particle is included by sandwiching ``T`` between half steps of the
hopping evolution on ``y``.  The product is kept factored: the half steps
are dense ``L x L`` matrices and materializing the product would multiply
the fill-in by ``L^2``.
"""

from __future__ import annotations

import hashlib
import io
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from . import __version__
from .action_kernel import ActionColumnMap, KernelSpec, build_kernels
from .config_space import OUTPUT_COUNT, REGISTERS, StateVector, SystemParams, dimension
from .errors import AuditError, FormatError, ValidationError
from .task_machine import TransitionTable, audit_injectivity, compile_task

UNITARITY_TOL = 1e-10
OPERATOR_MAGIC = b"QROP"
OPERATOR_FORMAT_VERSION = 1


@dataclass(frozen=True)
class EnvironmentSpec:
    """Particle dynamics: ``none`` (motionless) or nearest-neighbour ``hopping``."""

    kind: str = "none"
    gamma: float = 0.0
    delta: float = 1.0

    def __post_init__(self):
        if self.kind not in ("none", "hopping"):
            raise ValidationError(f"unknown environment kind {self.kind!r}")
        if self.kind == "hopping" and not self.delta > 0:
            raise ValidationError(f"hopping environment needs delta > 0, got {self.delta!r}")
        object.__setattr__(self, "gamma", float(self.gamma))
        object.__setattr__(self, "delta", float(self.delta))

    @property
    def moving(self) -> bool:
        return self.kind == "hopping" and self.gamma != 0.0

    def as_dict(self) -> dict:
        return {"kind": self.kind, "gamma": self.gamma, "delta": self.delta}


@dataclass(frozen=True, eq=False)
class EnvironmentStep:
    """``exp(-i delta H_E)`` on the particle site, with its half step."""

    spec: EnvironmentSpec
    L: int
    matrix: np.ndarray
    half: np.ndarray

    def deviation(self) -> float:
        U = self.matrix
        return float(np.max(np.abs(U.conj().T @ U - np.eye(self.L))))


def hopping_propagator(L: int, gamma: float, duration: float) -> np.ndarray:
    """``exp(-i t H)`` for ``H`` with ``gamma`` between periodic neighbours.

    Built from the plane-wave eigenbasis: momentum ``m`` has energy
    ``2 gamma cos(2 pi m / L)``.
    """
    m = np.arange(L)
    energies = 2.0 * gamma * np.cos(2.0 * np.pi * m / L)
    F = np.exp(2j * np.pi * np.outer(m, m) / L) / np.sqrt(L)
    return (F * np.exp(-1j * duration * energies)) @ F.conj().T


def build_environment_step(env: EnvironmentSpec, params: SystemParams) -> EnvironmentStep:
    L = params.L
    if env.kind == "none":
        eye = np.eye(L, dtype=np.complex128)
        return EnvironmentStep(env, L, eye, eye.copy())
    return EnvironmentStep(
        env,
        L,
        hopping_propagator(L, env.gamma, env.delta),
        hopping_propagator(L, env.gamma, env.delta / 2),
    )


def spec_hash(params: SystemParams, kernel: KernelSpec, env: EnvironmentSpec) -> str:
    blob = json.dumps(
        {"params": params.as_dict(), "kernel": kernel.as_dict(), "environment": env.as_dict()},
        sort_keys=True,
    )
    return hashlib.sha256(blob.encode()).hexdigest()


@dataclass(frozen=True, eq=False)
class StepOperator:
    """Unitary single-step operator on the configuration basis.

    ``matrix`` holds the robot step ``T`` (CSR, column ``j`` is ``T e_j``).
    When ``env_half`` is set the operator is ``E T E`` with ``E`` the
    environment half step acting on ``y``.  ``audit`` is filled in by
    :func:`audit_unitarity`.
    """

    params: SystemParams
    matrix: sp.csr_matrix
    kernel_spec: KernelSpec
    env_spec: EnvironmentSpec = field(default_factory=EnvironmentSpec)
    env_half: np.ndarray | None = None
    audit: dict = field(default_factory=dict)

    @property
    def dimension(self) -> int:
        return self.matrix.shape[0]

    @property
    def nnz(self) -> int:
        return int(self.matrix.nnz)

    @property
    def composed(self) -> bool:
        return self.env_half is not None

    @property
    def build_hash(self) -> str:
        return spec_hash(self.params, self.kernel_spec, self.env_spec)

    @property
    def deviation(self) -> float | None:
        return self.audit.get("deviation")

    def _apply_env(self, vec: np.ndarray) -> np.ndarray:
        # fixed summation order over y' so results do not depend on BLAS threading
        E = self.env_half
        L = self.params.L
        blocks = vec.reshape(L, -1)
        out = np.zeros_like(blocks)
        for y in range(L):
            acc = out[y]
            for yp in range(L):
                if E[y, yp] != 0:
                    acc += E[y, yp] * blocks[yp]
        return out.reshape(-1)

    def apply(self, vec: np.ndarray) -> np.ndarray:
        """Return ``T @ vec`` for a dense amplitude vector."""
        if self.env_half is None:
            return self.matrix @ vec
        return self._apply_env(self.matrix @ self._apply_env(vec))

    def __matmul__(self, state):
        if isinstance(state, StateVector):
            return state.with_amplitudes(self.apply(state.amplitudes), state.step + 1)
        return self.apply(np.asarray(state, dtype=np.complex128))

    def column(self, j: int) -> tuple[np.ndarray, np.ndarray]:
        """Nonzero ``(rows, values)`` of column ``j``, rows sorted."""
        if self.env_half is None:
            csc = self._csc()
            lo, hi = csc.indptr[j], csc.indptr[j + 1]
            return csc.indices[lo:hi].astype(np.int64), csc.data[lo:hi]
        L = self.params.L
        block = self.dimension // L
        y, rest = divmod(j, block)
        acc: dict[int, complex] = {}
        for yp in range(L):
            e = self.env_half[yp, y]
            if e == 0:
                continue
            rows, vals = self._column_base(yp * block + rest)
            for r, v in zip(rows, vals):
                ry, rr = divmod(int(r), block)
                for y2 in range(L):
                    f = self.env_half[y2, ry]
                    if f != 0:
                        key = y2 * block + rr
                        acc[key] = acc.get(key, 0) + f * v * e
        keys = np.array(sorted(acc), dtype=np.int64)
        return keys, np.array([acc[k] for k in keys], dtype=np.complex128)

    def _column_base(self, j: int):
        csc = self._csc()
        lo, hi = csc.indptr[j], csc.indptr[j + 1]
        return csc.indices[lo:hi], csc.data[lo:hi]

    def _csc(self) -> sp.csc_matrix:
        cached = self.__dict__.get("_csc_cache")
        if cached is None:
            cached = self.matrix.tocsc()
            cached.sort_indices()
            object.__setattr__(self, "_csc_cache", cached)
        return cached

    def materialize(self, chop: float = 0.0) -> sp.csr_matrix:
        """Explicit sparse matrix of the full operator (small systems only)."""
        if self.env_half is None:
            return self.matrix.copy()
        rest = self.dimension // self.params.L
        E = sp.kron(sp.csr_matrix(self.env_half), sp.identity(rest, format="csr"), format="csr")
        M = (E @ self.matrix @ E).tocsr()
        if chop > 0:
            M.data[np.abs(M.data) < chop] = 0
            M.eliminate_zeros()
        return M


def assemble_step_operator(
    table: TransitionTable,
    kernels: dict,
    params: SystemParams,
    kernel_spec: KernelSpec | None = None,
) -> StepOperator:
    """Build the sparse ``T`` from an audited table and unitarized kernels."""
    from .config_space import Output

    missing = [o.name for o in Output if o not in kernels]
    if missing:
        raise ValidationError(f"missing kernel for symbols {missing}")
    L, M = params.L, params.internal_count
    dim = dimension(params)

    y = np.arange(L)[:, None, None]
    x = np.arange(L)[None, :, None]
    m = np.arange(M)[None, None, :]
    y, x, m = np.broadcast_arrays(y, x, m)
    y, x, m = y.ravel(), x.ravel(), m.ravel()
    obs = (x == y).astype(np.int64)

    def index(yy, xx, mm, c):
        return ((yy * L + xx) * M + mm) * 2 + c

    rows, cols, vals = [], [], []

    # computation columns
    succ = table.successor[obs, m]
    ctl = table.control[obs, m].astype(bool)
    col0 = index(y, x, m, 0)
    keep = ~ctl
    rows.append(index(y[keep], x[keep], succ[keep], 0))
    cols.append(col0[keep])
    vals.append(np.ones(int(keep.sum()), dtype=np.complex128))
    target_o = succ % OUTPUT_COUNT
    for o, acm in kernels.items():
        sel = ctl & (target_o == int(o))
        if not sel.any():
            continue
        for r, c, v in acm.entries("handoff"):
            rows.append(index(y[sel], (x[sel] + r) % L, succ[sel], c))
            cols.append(col0[sel])
            vals.append(np.full(int(sel.sum()), v))

    # action columns
    col1 = index(y, x, m, 1)
    entry = table.entry[m]
    own_o = m % OUTPUT_COUNT
    rows.append(col1[~entry])
    cols.append(col1[~entry])
    vals.append(np.ones(int((~entry).sum()), dtype=np.complex128))
    for o, acm in kernels.items():
        sel = entry & (own_o == int(o))
        if not sel.any():
            continue
        for r, c, v in acm.entries("profile"):
            rows.append(index(y[sel], (x[sel] + r) % L, m[sel], c))
            cols.append(col1[sel])
            vals.append(np.full(int(sel.sum()), v))

    coo = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(dim, dim)
    )
    mat = coo.tocsr()
    mat.sum_duplicates()
    mat.sort_indices()
    return StepOperator(params, mat, kernel_spec or KernelSpec())


def _gram_deviation(mat: sp.spmatrix) -> tuple[float, tuple[int, int], float]:
    """Max-entry deviation of ``A^H A`` from identity, worst entry, and a spectral-norm bound."""
    A = mat.tocsc()
    G = (A.conj().T @ A).tocsr()
    G = (G - sp.identity(A.shape[1], format="csr", dtype=G.dtype)).tocoo()
    if G.nnz == 0:
        return 0.0, (0, 0), 0.0
    mags = np.abs(G.data)
    k = int(np.argmax(mags))
    # ||D||_2 <= sqrt(||D||_1 ||D||_inf)
    D = sp.csr_matrix((mags, (G.row, G.col)), shape=G.shape)
    norm1 = float(D.sum(axis=0).max())
    norminf = float(D.sum(axis=1).max())
    return float(mags[k]), (int(G.row[k]), int(G.col[k])), float(np.sqrt(norm1 * norminf))


def audit_unitarity(T: StepOperator, tol: float = UNITARITY_TOL, raise_on_failure: bool = True) -> float:
    """Certify ``|(T^H T - I)_ij| <= tol`` and record the result in ``T.audit``.

    For a plain operator the column Gram matrix is computed exactly from the
    sparse columns.  For a composed operator the factors are audited
    separately and the returned value is a rigorous upper bound on the
    largest Gram entry of the product.
    """
    dev, worst, spec_bound = _gram_deviation(T.matrix)
    info = {"robot_deviation": dev, "worst": worst, "method": "column-gram"}
    if T.env_half is not None:
        E = T.env_half
        a = float(np.linalg.norm(E.conj().T @ E - np.eye(E.shape[0]), ord=2))
        b = spec_bound
        dev = a + (1 + a) * (b + (1 + b) * a)
        info.update(env_deviation=a, method="factored-bound")
    info["deviation"] = dev
    T.audit.clear()
    T.audit.update(info)
    if raise_on_failure and dev > tol:
        raise AuditError(
            f"unitarity audit failed: deviation {dev:.3e} > {tol:.1e} at (row, col) = {worst}",
            dev,
            worst,
        )
    return dev


def compose_environment(T: StepOperator, env: EnvironmentStep, tol: float = UNITARITY_TOL) -> StepOperator:
    """``E T E`` with ``E`` the environment half step; re-audited."""
    if T.env_half is not None:
        raise ValidationError("operator is already composed with an environment")
    if not env.spec.moving:
        out = StepOperator(T.params, T.matrix, T.kernel_spec, env.spec, None)
    else:
        out = StepOperator(T.params, T.matrix, T.kernel_spec, env.spec, env.half)
    audit_unitarity(out, tol)
    return out


def build_step_operator(
    params: SystemParams,
    kernel_spec: KernelSpec | None = None,
    env_spec: EnvironmentSpec | None = None,
    tol: float = UNITARITY_TOL,
) -> StepOperator:
    """Compile, audit and assemble the full operator for one configuration."""
    kernel_spec = kernel_spec or KernelSpec()
    env_spec = env_spec or EnvironmentSpec()
    table = compile_task(params)
    report = audit_injectivity(table)
    if not report.ok:
        raise AuditError(
            f"transition table not injective: {len(report.collisions)} collisions",
            float("inf"),
            (-1, -1),
        )
    T = assemble_step_operator(table, build_kernels(kernel_spec, params.L), params, kernel_spec)
    audit_unitarity(T, tol)
    if env_spec.kind != "none":
        T = compose_environment(T, build_environment_step(env_spec, params), tol)
    return T


def structure_report(T: StepOperator) -> dict:
    """Check the locality conditions on the robot step entry by entry.

    Returns counts of computation entries that move the robot (and their
    largest column weight), and of entries that change a register they must
    not touch.
    """
    coo = T.matrix.tocoo()
    shape = T.params.shape
    rc = dict(zip(REGISTERS, np.unravel_index(coo.row, shape)))
    cc = dict(zip(REGISTERS, np.unravel_index(coo.col, shape)))
    comp = cc["c"] == 0
    moved = comp & (rc["x"] != cc["x"])
    weight = np.zeros(T.dimension)
    np.add.at(weight, coo.col[moved], np.abs(coo.data[moved]) ** 2)
    act = ~comp
    internal_changed = act & np.any(
        [rc[n] != cc[n] for n in ("y", "d", "s", "node", "o")], axis=0
    )
    return {
        "computation_moves_robot": int(moved.sum()),
        "computation_move_weight": float(weight.max()) if moved.any() else 0.0,
        "computation_moves_particle": int((comp & (rc["y"] != cc["y"])).sum()),
        "action_changes_internal": int(internal_changed.sum()),
        "action_changes_particle": int((act & (rc["y"] != cc["y"])).sum()),
    }


@dataclass(frozen=True, eq=False)
class ReachableSubspace:
    """Basis states reachable from a start set, with ``T`` restricted to them."""

    indices: np.ndarray
    matrix: sp.csr_matrix

    def compress(self, vec: np.ndarray) -> np.ndarray:
        return vec[self.indices]

    def expand(self, vec: np.ndarray, dim: int) -> np.ndarray:
        out = np.zeros(dim, dtype=np.complex128)
        out[self.indices] = vec
        return out


def reachable_subspace(T: StepOperator, start: np.ndarray) -> ReachableSubspace:
    """Close ``start`` under the sparsity pattern of ``T``."""
    if T.env_half is not None:
        raise ValidationError("reachable-subspace compaction needs a motionless environment")
    csc = T._csc()
    seen = np.zeros(T.dimension, dtype=bool)
    frontier = np.unique(np.asarray(start, dtype=np.int64))
    seen[frontier] = True
    while frontier.size:
        rows = csc[:, frontier].indices
        new = np.unique(rows[~seen[rows]])
        seen[new] = True
        frontier = new
    idx = np.flatnonzero(seen)
    return ReachableSubspace(idx, T.matrix[idx][:, idx].tocsr())


def save_operator(T: StepOperator, path: str | Path, config_hash: str = "") -> None:
    """Write the QROP file: header, then column-compressed data (little-endian)."""
    csc = T._csc()
    meta = {
        "kernel": T.kernel_spec.as_dict(),
        "environment": T.env_spec.as_dict(),
        "config_hash": config_hash,
        "build_hash": T.build_hash,
        "tool_version": __version__,
    }
    blob = json.dumps(meta, sort_keys=True).encode()
    dev = T.audit.get("deviation", float("nan"))
    buf = io.BytesIO()
    buf.write(OPERATOR_MAGIC)
    buf.write(struct.pack("<III", OPERATOR_FORMAT_VERSION, T.params.L, T.params.N))
    buf.write(struct.pack("<I", len(blob)))
    buf.write(blob)
    buf.write(struct.pack("<d", dev))
    buf.write(struct.pack("<QQ", T.dimension, csc.nnz))
    buf.write(csc.indptr.astype("<u8").tobytes())
    buf.write(csc.indices.astype("<u4").tobytes())
    data = np.empty((csc.nnz, 2), dtype="<f8")
    data[:, 0] = csc.data.real
    data[:, 1] = csc.data.imag
    buf.write(data.tobytes())
    Path(path).write_bytes(buf.getvalue())


def read_operator_header(path: str | Path) -> dict:
    raw = Path(path).read_bytes()
    return _parse_header(raw)[0]


def _parse_header(raw: bytes) -> tuple[dict, int]:
    if raw[:4] != OPERATOR_MAGIC:
        raise FormatError("not a QROP operator file")
    version, L, N = struct.unpack_from("<III", raw, 4)
    if version != OPERATOR_FORMAT_VERSION:
        raise FormatError(f"unsupported QROP version {version}")
    (n,) = struct.unpack_from("<I", raw, 16)
    meta = json.loads(raw[20 : 20 + n])
    pos = 20 + n
    (dev,) = struct.unpack_from("<d", raw, pos)
    meta.update(L=L, N=N, deviation=dev, version=version)
    return meta, pos + 8


def load_operator(path: str | Path) -> StepOperator:
    raw = Path(path).read_bytes()
    meta, pos = _parse_header(raw)
    dim, nnz = struct.unpack_from("<QQ", raw, pos)
    pos += 16
    indptr = np.frombuffer(raw, dtype="<u8", count=dim + 1, offset=pos).astype(np.int64)
    pos += 8 * (dim + 1)
    indices = np.frombuffer(raw, dtype="<u4", count=nnz, offset=pos).astype(np.int64)
    pos += 4 * nnz
    data = np.frombuffer(raw, dtype="<f8", count=2 * nnz, offset=pos).reshape(nnz, 2)
    if pos + 16 * nnz != len(raw):
        raise FormatError("QROP payload length mismatch")
    params = SystemParams(meta["L"], meta["N"])
    if dim != dimension(params):
        raise FormatError("QROP dimension does not match its parameters")
    k = meta["kernel"]
    kernel = KernelSpec(k["kind"], k["alpha"], complex(*k["a0"]), complex(*k["a1"]))
    env = EnvironmentSpec(**meta["environment"])
    csc = sp.csc_matrix((data[:, 0] + 1j * data[:, 1], indices, indptr), shape=(dim, dim))
    T = StepOperator(params, csc.tocsr(), kernel, env)
    if env.moving:
        T = StepOperator(params, T.matrix, kernel, env, build_environment_step(env, params).half)
    T.audit["deviation"] = meta["deviation"]
    T.audit["config_hash"] = meta.get("config_hash", "")
    return T


__all__ = [
    "EnvironmentSpec",
    "EnvironmentStep",
    "ReachableSubspace",
    "StepOperator",
    "assemble_step_operator",
    "audit_unitarity",
    "build_environment_step",
    "build_step_operator",
    "compose_environment",
    "hopping_propagator",
    "load_operator",
    "reachable_subspace",
    "read_operator_header",
    "save_operator",
    "structure_report",
]
