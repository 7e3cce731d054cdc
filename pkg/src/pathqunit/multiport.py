"""Beam-splitter meshes, their triangular (Reck) compilation, and analyzer matrices.

Cell convention: a cell with reflectivity R and phase phi acting on adjacent
modes (a, a+1) embeds the Hermitian unitary

    [[sqrt(R),                  sqrt(1-R) exp(-i phi)],
     [sqrt(1-R) exp(+i phi),    -sqrt(R)             ]]

into the N x N identity.  A mesh applies its cells in list order and then the
diagonal output phases, i.e. ``U = diag(exp(i out)) @ T_K @ ... @ T_1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .statecore import format_matrix, parse_matrix

TWO_PI = 2.0 * math.pi
UNITARY_TOL = 1e-8
PASS_THROUGH_TOL = 1e-14


class MeshError(ValueError):
    pass


@dataclass(frozen=True)
class BeamsplitterCell:
    mode_a: int
    mode_b: int
    reflectivity: float
    phase: float

    def __post_init__(self):
        if not 0 <= self.mode_a < self.mode_b:
            raise MeshError(f"need 0 <= mode_a < mode_b, got ({self.mode_a}, {self.mode_b})")
        if not 0.0 <= self.reflectivity <= 1.0:
            raise MeshError(f"reflectivity {self.reflectivity} outside [0, 1]")
        if not 0.0 <= self.phase < TWO_PI:
            raise MeshError(f"phase {self.phase} outside [0, 2pi)")


@dataclass(frozen=True)
class ReckMesh:
    dim: int
    cells: tuple[BeamsplitterCell, ...]
    output_phases: tuple[float, ...] = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "cells", tuple(self.cells))
        phases = tuple(float(x) for x in self.output_phases) or (0.0,) * self.dim
        object.__setattr__(self, "output_phases", phases)
        expected = self.dim * (self.dim - 1) // 2
        if len(self.cells) != expected:
            raise MeshError(f"mesh of dim {self.dim} needs {expected} cells, got {len(self.cells)}")
        if len(phases) != self.dim:
            raise MeshError(f"need {self.dim} output phases, got {len(phases)}")
        for c in self.cells:
            if c.mode_b >= self.dim:
                raise MeshError(f"cell modes ({c.mode_a}, {c.mode_b}) exceed dim {self.dim}")


@dataclass(frozen=True)
class AnalyzerSetting:
    """Two-path analyzer: reflectivity ``alpha`` and phase ``phase``."""

    reflectivity: float
    phase: float

    def __post_init__(self):
        if not 0.0 <= self.reflectivity <= 1.0:
            raise MeshError(f"analyzer reflectivity {self.reflectivity} outside [0, 1]")


def _block(reflectivity: float, phase: float) -> np.ndarray:
    r = math.sqrt(reflectivity)
    t = math.sqrt(max(0.0, 1.0 - reflectivity))
    return np.array(
        [[r, t * np.exp(-1j * phase)], [t * np.exp(1j * phase), -r]], dtype=complex
    )


def cell_unitary(cell: BeamsplitterCell, dim: int) -> np.ndarray:
    if cell.mode_b >= dim:
        raise MeshError(f"mode {cell.mode_b} out of range for dim {dim}")
    u = np.eye(dim, dtype=complex)
    idx = np.ix_([cell.mode_a, cell.mode_b], [cell.mode_a, cell.mode_b])
    u[idx] = _block(cell.reflectivity, cell.phase)
    return u


def _apply_cell_right(u: np.ndarray, cell: BeamsplitterCell) -> None:
    # u <- u @ T in place; only two columns change.
    a, b = cell.mode_a, cell.mode_b
    blk = _block(cell.reflectivity, cell.phase)
    cols = u[:, [a, b]] @ blk
    u[:, a] = cols[:, 0]
    u[:, b] = cols[:, 1]


def mesh_to_unitary(mesh: ReckMesh) -> np.ndarray:
    u = np.eye(mesh.dim, dtype=complex)
    for cell in mesh.cells:
        u = cell_unitary(cell, mesh.dim) @ u
    return np.exp(1j * np.asarray(mesh.output_phases))[:, None] * u


def unitarity_error(u: np.ndarray) -> float:
    u = np.asarray(u, dtype=complex)
    return float(np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0]))))


def _nulling_cell(x: complex, y: complex, mode: int) -> BeamsplitterCell:
    """Cell on (mode, mode+1) whose right action zeroes x in the row (x, y)."""
    if abs(x) < PASS_THROUGH_TOL:
        return BeamsplitterCell(mode, mode + 1, 1.0, 0.0)
    if abs(y) < PASS_THROUGH_TOL:
        return BeamsplitterCell(mode, mode + 1, 0.0, 0.0)
    refl = abs(y) ** 2 / (abs(x) ** 2 + abs(y) ** 2)
    phase = float(np.angle(-x / y)) % TWO_PI
    if phase >= TWO_PI:  # float rounding of a tiny negative angle
        phase = 0.0
    return BeamsplitterCell(mode, mode + 1, refl, phase)


def reck_decompose(u: np.ndarray) -> ReckMesh:
    """Compile a unitary into a triangular mesh of N(N-1)/2 two-mode cells.

    Rows are cleared from the bottom up: for row i, entries (i, 0) ... (i, i-1)
    are nulled left to right by cells acting on neighbouring columns.  Cells are
    Hermitian, so the residual diagonal D = U T_1 ... T_K gives
    U = D T_K ... T_1, which is exactly the mesh ordering.
    """
    u = np.array(u, dtype=complex)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        raise MeshError(f"expected a square matrix, got shape {u.shape}")
    n = u.shape[0]
    dev = unitarity_error(u)
    if dev > UNITARY_TOL:
        raise MeshError(f"matrix is not unitary (max |U^dag U - I| = {dev:.3g})")

    work = u.copy()
    cells = []
    for row in range(n - 1, 0, -1):
        for col in range(row):
            cell = _nulling_cell(work[row, col], work[row, col + 1], col)
            _apply_cell_right(work, cell)
            cells.append(cell)
    phases = tuple(float(np.angle(work[k, k])) for k in range(n))
    return ReckMesh(dim=n, cells=tuple(cells), output_phases=phases)


def fourier_matrix(n: int) -> np.ndarray:
    """Balanced N-port: F[j, k] = exp(2 pi i j k / N) / sqrt(N)."""
    if n < 2:
        raise MeshError(f"Fourier multiport needs N >= 2, got {n}")
    jk = np.outer(np.arange(n), np.arange(n))
    return np.exp(2j * np.pi * jk / n) / math.sqrt(n)


def analyzer_unitary(setting: AnalyzerSetting) -> np.ndarray:
    """2x2 analyzer whose output 0 projects onto sqrt(a)|1> + sqrt(1-a) e^{-i phi}|2>.

    Row 0 is the bra of that state, (sqrt(a), sqrt(1-a) e^{+i phi}); the matrix
    is the mesh cell with R = a and cell phase -phi.
    """
    return _block(setting.reflectivity, -setting.phase)


def analyzer_state(setting: AnalyzerSetting) -> np.ndarray:
    """Ket projected onto by output 0 of :func:`analyzer_unitary`."""
    a = setting.reflectivity
    return np.array([math.sqrt(a), math.sqrt(1 - a) * np.exp(-1j * setting.phase)])


def haar_unitary(n: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random unitary via QR of a complex Ginibre matrix."""
    z = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / math.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diagonal(r)
    return q * (d / np.abs(d))


def format_mesh(mesh: ReckMesh) -> str:
    lines = [f"{c.mode_a} {c.mode_b} {c.reflectivity:.17g} {c.phase:.17g}" for c in mesh.cells]
    lines.append("out " + " ".join(f"{p:.17g}" for p in mesh.output_phases))
    return "\n".join(lines) + "\n"


def parse_mesh(text: str) -> ReckMesh:
    lines = [ln.split() for ln in text.splitlines() if ln.strip()]
    if not lines or lines[-1][0] != "out":
        raise MeshError("mesh file must end with an 'out <phases>' line")
    phases = tuple(float(x) for x in lines[-1][1:])
    cells = []
    for lineno, fields in enumerate(lines[:-1], start=1):
        if len(fields) != 4:
            raise MeshError(f"line {lineno}: expected 'a b R phi'")
        cells.append(
            BeamsplitterCell(int(fields[0]), int(fields[1]), float(fields[2]), float(fields[3]))
        )
    return ReckMesh(dim=len(phases), cells=tuple(cells), output_phases=phases)


def save_mesh(mesh: ReckMesh, path: str | Path) -> None:
    Path(path).write_text(format_mesh(mesh))


def load_mesh(path: str | Path) -> ReckMesh:
    return parse_mesh(Path(path).read_text())


def load_unitary(path: str | Path) -> np.ndarray:
    return parse_matrix(Path(path).read_text())


def save_unitary(u: np.ndarray, path: str | Path) -> None:
    Path(path).write_text(format_matrix(u))
