"""Pure two-quNit states, density matrices and the overlap/entanglement measures.

Density matrices for an N-path pair live in a d = N**2 dimensional space whose
basis is ordered with the N correlated kets |i,i'> first, followed by the
cross kets |i,j'> (i != j) in lexicographic order.  Use :func:`basis_order`
and :func:`to_tensor_order` to move between this ordering and the usual
Kronecker-product ordering (index ``i * N + j``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Sequence

import numpy as np

NORM_TOL = 1e-12
HERMITIAN_TOL = 1e-10
TRACE_TOL = 1e-10
PSD_TOL = -1e-9


class StateError(ValueError):
    """Raised when a state or density matrix violates its invariants."""


@dataclass(frozen=True, eq=False)
class QuNitPair:
    """Pure path-entangled pair: amplitude ``amps[i]`` sits on |i,i'>."""

    dim: int
    amps: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amps, dtype=complex).copy()
        amps.setflags(write=False)
        object.__setattr__(self, "amps", amps)
        if self.dim < 2 or amps.shape != (self.dim,):
            raise StateError(f"expected {self.dim} amplitudes, got shape {amps.shape}")
        norm = float(np.sum(np.abs(amps) ** 2))
        if abs(norm - 1.0) > NORM_TOL:
            raise StateError(f"amplitudes not normalized (sum |a|^2 = {norm!r})")

    def vector(self) -> np.ndarray:
        """State vector in the ordered d = N**2 basis."""
        vec = np.zeros(self.dim**2, dtype=complex)
        vec[: self.dim] = self.amps
        return vec


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Hermitian, unit-trace, positive semidefinite operator (checked on construction)."""

    dim: int
    entries: np.ndarray

    def __post_init__(self):
        rho = np.array(self.entries, dtype=complex)
        rho.setflags(write=False)
        object.__setattr__(self, "entries", rho)
        if rho.shape != (self.dim, self.dim):
            raise StateError(f"expected {self.dim}x{self.dim} matrix, got {rho.shape}")
        herm = float(np.max(np.abs(rho - rho.conj().T)))
        if herm > HERMITIAN_TOL:
            raise StateError(f"matrix not Hermitian (max deviation {herm:.3g})")
        tr = np.trace(rho)
        if abs(tr - 1.0) > TRACE_TOL:
            raise StateError(f"trace is {tr.real:.12g}, expected 1")
        lam_min = float(np.linalg.eigvalsh((rho + rho.conj().T) / 2)[0])
        if lam_min < PSD_TOL:
            raise StateError(f"matrix not positive semidefinite (eigenvalue {lam_min:.3g})")

    @property
    def n_paths(self) -> int:
        return math.isqrt(self.dim)


def make_pair_state(amps: Sequence[complex]) -> QuNitPair:
    """Normalize ``amps`` by its Euclidean norm and wrap it as a :class:`QuNitPair`."""
    vec = np.asarray(amps, dtype=complex).ravel()
    if vec.size < 2:
        raise StateError("need at least two amplitudes")
    norm = np.linalg.norm(vec)
    if norm == 0.0 or not np.isfinite(norm):
        raise StateError("degenerate amplitude vector")
    return QuNitPair(dim=vec.size, amps=vec / norm)


def target_state(theta: float = math.pi) -> QuNitPair:
    """Ideal comparison state (|1,1'> + exp(i theta)|2,2'>)/sqrt(2).

    The default ``theta = pi`` is the singlet-like comparison state; pass the
    phase of the source actually being characterized when it differs.
    """
    return make_pair_state([1.0, np.exp(1j * theta)])


@lru_cache(maxsize=None)
def basis_order(n_paths: int) -> tuple[tuple[int, int], ...]:
    """Path pairs (i, j) labelling the ordered basis: correlated first, then cross terms."""
    diag = [(i, i) for i in range(n_paths)]
    cross = [(i, j) for i in range(n_paths) for j in range(n_paths) if i != j]
    return tuple(diag + cross)


@lru_cache(maxsize=None)
def _tensor_index(n_paths: int) -> np.ndarray:
    idx = np.array([i * n_paths + j for i, j in basis_order(n_paths)])
    idx.setflags(write=False)
    return idx


def to_tensor_order(matrix: np.ndarray, n_paths: int) -> np.ndarray:
    """Reorder a d x d matrix from the ordered basis into Kronecker order."""
    idx = _tensor_index(n_paths)
    out = np.zeros_like(matrix, dtype=complex)
    out[np.ix_(idx, idx)] = matrix
    return out


def from_tensor_order(matrix: np.ndarray, n_paths: int) -> np.ndarray:
    """Inverse of :func:`to_tensor_order`."""
    idx = _tensor_index(n_paths)
    return np.asarray(matrix, dtype=complex)[np.ix_(idx, idx)]


def pure_density(state: QuNitPair) -> DensityMatrix:
    vec = state.vector()
    return DensityMatrix(dim=vec.size, entries=np.outer(vec, vec.conj()))


def dephase(state: QuNitPair, p: float) -> DensityMatrix:
    """Scale every coherence between distinct correlated terms by ``p``.

    This is the distinguishability channel of the source model: ``p = 1``
    leaves the pure state, ``p = 0`` leaves the classical mixture of the N
    correlated path pairs.
    """
    if not 0.0 <= p <= 1.0:
        raise StateError(f"dephasing factor must lie in [0, 1], got {p}")
    rho = pure_density(state).entries.copy()
    n = state.dim
    block = rho[:n, :n]
    mask = ~np.eye(n, dtype=bool)
    block[mask] *= p
    rho[:n, :n] = block
    return DensityMatrix(dim=rho.shape[0], entries=rho)


def fidelity(rho: DensityMatrix, target: QuNitPair) -> float:
    """Pure-target fidelity F = <psi|rho|psi> (no square root)."""
    vec = target.vector()
    if rho.dim != vec.size:
        raise StateError(f"dimension mismatch: rho is {rho.dim}, target is {vec.size}")
    value = np.real(vec.conj() @ rho.entries @ vec)
    return float(min(1.0, max(0.0, value)))


_SPIN_FLIP = np.array(
    [[0, 0, 0, -1], [0, 0, 1, 0], [0, 1, 0, 0], [-1, 0, 0, 0]], dtype=complex
)


def concurrence(rho: DensityMatrix) -> float:
    """Wootters concurrence of a two-qubit density matrix.

    The lambdas (square roots of the eigenvalues of rho times its spin flip)
    are computed as the singular values of W^T F W with rho = W W^dag and F
    the spin-flip operator; this avoids square roots of round-off-sized
    eigenvalues, which would cost ~1e-8 accuracy on rank-deficient states.
    """
    if rho.dim != 4:
        raise StateError("tangle defined for two qubits only")
    r = to_tensor_order(rho.entries, 2)
    w, v = np.linalg.eigh((r + r.conj().T) / 2)
    half = v * np.sqrt(np.clip(w, 0.0, None))
    lam = np.linalg.svd(half.T @ _SPIN_FLIP @ half, compute_uv=False)
    return float(max(0.0, lam[0] - lam[1] - lam[2] - lam[3]))


def tangle(rho: DensityMatrix) -> float:
    """Tangle T = C**2 of a two-qubit state."""
    return concurrence(rho) ** 2


def trace_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Half the trace norm of ``a - b`` for Hermitian matrices."""
    diff = np.asarray(a) - np.asarray(b)
    return float(0.5 * np.sum(np.abs(np.linalg.eigvalsh((diff + diff.conj().T) / 2))))


def _fmt_complex(z: complex) -> str:
    return f"{z.real:.17g}{z.imag:+.17g}j"


def format_matrix(matrix: np.ndarray) -> str:
    """Text form: ``dim=<d>`` then d rows of ``re+imj`` literals."""
    m = np.asarray(matrix, dtype=complex)
    lines = [f"dim={m.shape[0]}"]
    lines += [" ".join(_fmt_complex(z) for z in row) for row in m]
    return "\n".join(lines) + "\n"


def parse_matrix(text: str) -> np.ndarray:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("dim="):
        raise ValueError("matrix file must start with 'dim=<d>'")
    d = int(lines[0][4:])
    rows = lines[1:]
    if len(rows) != d:
        raise ValueError(f"expected {d} rows, found {len(rows)}")
    out = np.empty((d, d), dtype=complex)
    for r, line in enumerate(rows):
        fields = line.split()
        if len(fields) != d:
            raise ValueError(f"row {r + 1}: expected {d} entries, found {len(fields)}")
        out[r] = [complex(f) for f in fields]
    return out


def save_density(rho: DensityMatrix, path: str | Path) -> None:
    Path(path).write_text(format_matrix(rho.entries))


def load_density(path: str | Path) -> DensityMatrix:
    m = parse_matrix(Path(path).read_text())
    return DensityMatrix(dim=m.shape[0], entries=m)
