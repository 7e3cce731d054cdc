"""Maximum-likelihood reconstruction of the two-qubit path state.

Each photon is measured in three mutually unbiased bases realised by the
two-path analyzer: Z (no beam splitter, direct path readout), X (balanced
splitter, phase 0) and Y (balanced splitter, phase pi/2).  The nine basis
pairs give 36 coincidence counts.

The state is parameterized as rho = T^dag T / tr(T^dag T) with T lower
triangular (4 real diagonal + 6 complex off-diagonal entries = 16 reals), and
fitted by minimizing the Gaussian approximation to the Poisson likelihood,

    sum_k (n_k - N_k p_k(rho))**2 / (2 max(n_k, 1)),

where N_k is the total count of the basis pair that outcome k belongs to.
A trust-region least-squares fit on T converges quickly for full-rank
optima.  When the optimum lies on the boundary (a zero eigenvalue, typical
after accidental subtraction) it crawls, and the fit is finished by projected
gradient on rho.  scipy's MINPACK ("lm") backend is avoided because it is not
bitwise repeatable on identical input, which breaks run determinism.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Mapping

import numpy as np
from scipy.optimize import least_squares, minimize

from ..counting import CountRecord, derive_seed, subtract_accidentals
from ..multiport import AnalyzerSetting, analyzer_unitary
from ..statecore import (
    DensityMatrix,
    QuNitPair,
    fidelity,
    from_tensor_order,
    tangle,
    target_state,
    to_tensor_order,
)
from .fringe import AnalysisError

BASES = ("Z", "X", "Y")
BASIS_PAIRS = tuple(a + b for a in BASES for b in BASES)
MAX_EVALUATIONS = 100  # trust-region evaluations before the projected-gradient fallback
MAX_ITERATIONS = 20000  # projected-gradient iterations
STEP_TOLERANCE = 1e-10
_TRIL = np.tril_indices(4, -1)


class TomographyError(AnalysisError):
    """Reconstruction failed; ``best`` holds the best state found, if any."""

    def __init__(self, message: str, best: np.ndarray | None = None):
        super().__init__(message)
        self.best = best


def basis_unitary(name: str) -> np.ndarray:
    if name == "Z":
        return np.eye(2, dtype=complex)
    if name == "X":
        return analyzer_unitary(AnalyzerSetting(0.5, 0.0))
    if name == "Y":
        return analyzer_unitary(AnalyzerSetting(0.5, math.pi / 2))
    raise AnalysisError(f"unknown basis {name!r}")


def tomo_label(pair: str) -> str:
    return f"tomo@{pair}"


@lru_cache(maxsize=None)
def _projectors() -> np.ndarray:
    """(36, 4, 4) projectors in Kronecker order, basis-pair major."""
    out = []
    for pair in BASIS_PAIRS:
        u = np.kron(basis_unitary(pair[0]), basis_unitary(pair[1]))
        for row in range(4):
            out.append(np.outer(u[row].conj(), u[row]))
    proj = np.array(out)
    proj.setflags(write=False)
    return proj


@dataclass(frozen=True)
class TomographyRecord:
    counts: Mapping[str, CountRecord]

    def __post_init__(self):
        missing = [p for p in BASIS_PAIRS if p not in self.counts]
        if missing:
            raise AnalysisError(f"tomography record missing basis pairs {missing}")
        for p in BASIS_PAIRS:
            if self.counts[p].outcome_counts.shape != (2, 2):
                raise AnalysisError(f"basis pair {p}: expected a 2x2 table")

    @classmethod
    def from_records(cls, records) -> "TomographyRecord":
        by_pair = {}
        for rec in records:
            if rec.setting_label.startswith("tomo@"):
                by_pair[rec.setting_label[5:]] = rec
        return cls(by_pair)

    def records(self) -> list[CountRecord]:
        return [self.counts[p] for p in BASIS_PAIRS]

    def raw(self) -> np.ndarray:
        return np.concatenate([self.counts[p].outcome_counts.ravel() for p in BASIS_PAIRS]).astype(float)

    def corrected(self) -> np.ndarray:
        return np.concatenate([subtract_accidentals(self.counts[p]).ravel() for p in BASIS_PAIRS])


@dataclass(frozen=True)
class TomographyResult:
    rho: DensityMatrix
    fidelity: float
    tangle: float
    fidelity_err: float
    tangle_err: float
    loglikelihood: float
    negative_counts: bool = False


def born_probabilities(rho_tensor: np.ndarray) -> np.ndarray:
    """The 36 outcome probabilities of a Kronecker-ordered 4x4 density matrix."""
    return np.real(np.einsum("kab,ba->k", _projectors(), rho_tensor))


def _unpack(x: np.ndarray) -> np.ndarray:
    t = np.zeros((4, 4), dtype=complex)
    t[np.diag_indices(4)] = x[:4]
    t[_TRIL] = x[4:10] + 1j * x[10:16]
    return t


def _pack(t: np.ndarray) -> np.ndarray:
    return np.concatenate([np.real(np.diag(t)), t[_TRIL].real, t[_TRIL].imag])


def _rho_from_params(x: np.ndarray) -> np.ndarray:
    t = _unpack(x)
    a = t.conj().T @ t
    return a / np.real(np.trace(a))


def _params_from_rho(rho_tensor: np.ndarray) -> np.ndarray:
    """Lower-triangular T with T^dag T = rho (rho must be positive definite)."""
    flip = np.eye(4)[::-1]
    chol = np.linalg.cholesky(flip @ rho_tensor @ flip)
    return _pack((flip @ chol @ flip).conj().T)


def _prob_jacobian(x: np.ndarray, probs: np.ndarray) -> np.ndarray:
    """d p_k / d x for all 36 outcomes, shape (36, 16)."""
    t = _unpack(x)
    tr = np.real(np.trace(t.conj().T @ t))
    h = (_projectors() - probs[:, None, None] * np.eye(4)) / tr
    th = np.einsum("ij,kjl->kil", t, h)
    diag = 2 * np.real(th[:, np.arange(4), np.arange(4)])
    lower = th[:, _TRIL[0], _TRIL[1]]
    return np.concatenate([diag, 2 * lower.real, 2 * lower.imag], axis=1)


def linear_inversion(freqs: np.ndarray) -> np.ndarray:
    """Least-squares density matrix (Kronecker order) from 36 outcome frequencies."""
    paulis = [
        np.eye(2),
        np.array([[0, 1], [1, 0]]),
        np.array([[0, -1j], [1j, 0]]),
        np.array([[1, 0], [0, -1]]),
    ]
    herm = np.array([np.kron(p, q) / 4 for p in paulis for q in paulis])
    design = np.real(np.einsum("kab,mba->km", _projectors(), herm))
    coef = np.linalg.lstsq(design, freqs, rcond=None)[0]
    return np.einsum("m,mab->ab", coef, herm)


def _project_psd(rho: np.ndarray, floor: float = 1e-6) -> np.ndarray:
    rho = (rho + rho.conj().T) / 2
    w, v = np.linalg.eigh(rho)
    w = np.maximum(w, floor)
    out = (v * w) @ v.conj().T
    return out / np.real(np.trace(out))


def _basis_totals(counts: np.ndarray) -> np.ndarray:
    return np.repeat(counts.reshape(9, 4).sum(axis=1), 4)


def _project_state(rho: np.ndarray) -> np.ndarray:
    """Euclidean projection onto {rho >= 0, tr rho = 1} (eigenvalues onto the simplex)."""
    w, v = np.linalg.eigh((rho + rho.conj().T) / 2)
    u = np.sort(w)[::-1]
    css = np.cumsum(u) - 1.0
    k = np.nonzero(u - css / np.arange(1, w.size + 1) > 0)[0][-1]
    w = np.maximum(w - css[k] / (k + 1), 0.0)
    return (v * w) @ v.conj().T


def _polish_gaussian(counts: np.ndarray, rho0: np.ndarray) -> np.ndarray:
    """Accelerated projected gradient on the (convex, quadratic) Gaussian objective.

    With the basis totals held fixed the Born probabilities are linear in rho,
    so the objective is a convex quadratic over the state set.  Used when the
    T parameterization stalls at a rank-deficient optimum, where its Jacobian
    vanishes along the missing eigenvector.
    """
    totals = _basis_totals(counts)
    weight = 1.0 / (2.0 * np.maximum(counts, 1.0))
    proj = _projectors()
    a = (np.sqrt(weight) * totals)[:, None] * proj.reshape(36, 16)
    step = 1.0 / (2.0 * np.linalg.norm(a, 2) ** 2)

    def objective(rho):
        r = counts - totals * born_probabilities(rho)
        return float(np.sum(weight * r * r))

    rho = _project_state(rho0)
    y, mom = rho, 1.0
    f_prev = objective(rho)
    for _ in range(MAX_ITERATIONS):
        r = counts - totals * born_probabilities(y)
        grad = -2.0 * np.einsum("k,kij->ij", weight * totals * r, proj)
        new = _project_state(y - step * grad)
        f_new = objective(new)
        if f_new > f_prev and mom > 1.0:
            # Momentum overshot: restart from the last iterate (a plain
            # projected step from there always descends).
            y, mom = rho, 1.0
            continue
        moved = float(np.abs(new - rho).max())
        mom_next = (1 + math.sqrt(1 + 4 * mom * mom)) / 2
        y = new + ((mom - 1) / mom_next) * (new - rho)
        rho, mom, f_prev = new, mom_next, f_new
        if moved < STEP_TOLERANCE:
            return rho
    raise TomographyError(
        f"optimizer did not converge within {MAX_ITERATIONS} iterations", best=rho
    )


def _fit_gaussian(counts: np.ndarray, x0: np.ndarray) -> tuple[np.ndarray, float]:
    totals = _basis_totals(counts)
    scale = 1.0 / np.sqrt(2.0 * np.maximum(counts, 1.0))

    def resid(x):
        return (counts - totals * born_probabilities(_rho_from_params(x))) * scale

    def jac(x):
        p = born_probabilities(_rho_from_params(x))
        return -(totals * scale)[:, None] * _prob_jacobian(x, p)

    sol = least_squares(
        resid, x0, jac=jac, method="trf", xtol=STEP_TOLERANCE, ftol=1e-15, gtol=1e-15,
        max_nfev=MAX_EVALUATIONS,
    )
    rho = _rho_from_params(sol.x)
    if sol.status == 0:
        rho = _polish_gaussian(counts, rho)
    r = (counts - totals * born_probabilities(rho)) * scale
    return rho, -float(np.sum(r * r))


def _fit_poisson(counts: np.ndarray, x0: np.ndarray) -> tuple[np.ndarray, float]:
    n = np.maximum(counts, 0.0)
    totals = np.maximum(_basis_totals(n), 1e-300)

    def objective(x):
        p = np.maximum(born_probabilities(_rho_from_params(x)), 1e-300)
        mu = totals * p
        value = float(np.sum(mu - n * np.log(mu)))
        grad = (totals - n / p) @ _prob_jacobian(x, p)
        return value, grad

    sol = minimize(objective, x0, jac=True, method="BFGS",
                   options={"gtol": 1e-10, "maxiter": MAX_ITERATIONS})
    if not sol.success and sol.nit >= MAX_ITERATIONS:
        raise TomographyError("Poisson likelihood fit did not converge", best=_rho_from_params(sol.x))
    return _rho_from_params(sol.x), -float(sol.fun)


def reconstruct(counts: np.ndarray, likelihood: str = "gaussian") -> tuple[np.ndarray, float]:
    """Fit 36 counts; returns (rho in Kronecker order, log-likelihood)."""
    counts = np.asarray(counts, dtype=float)
    if counts.shape != (36,) or not np.all(np.isfinite(counts)):
        raise TomographyError("tomography needs 36 finite counts")
    totals = _basis_totals(counts)
    if np.any(totals <= 0):
        raise TomographyError("every basis pair needs a positive total count")
    seed = _project_psd(linear_inversion(counts / totals))
    x0 = _params_from_rho(seed)
    if likelihood == "gaussian":
        return _fit_gaussian(counts, x0)
    if likelihood == "poisson":
        return _fit_poisson(counts, x0)
    raise AnalysisError(f"unknown likelihood {likelihood!r}")


def mle_tomography(
    record: TomographyRecord,
    subtract: bool = True,
    target: QuNitPair | None = None,
    likelihood: str = "gaussian",
) -> TomographyResult:
    """Reconstruct rho from a tomography record and score it against ``target``.

    With ``subtract`` the accidental estimate is removed first (negative
    cells are passed to the fit as-is).  ``target`` defaults to
    :func:`~pathqunit.statecore.target_state`.  Error fields are NaN until
    :func:`monte_carlo_uncertainty` fills them.
    """
    counts = record.corrected() if subtract else record.raw()
    rho_t, loglik = reconstruct(counts, likelihood)
    entries = from_tensor_order(rho_t, 2)
    entries = (entries + entries.conj().T) / 2
    rho = DensityMatrix(dim=4, entries=entries)
    target = target if target is not None else target_state()
    return TomographyResult(
        rho=rho,
        fidelity=fidelity(rho, target),
        tangle=tangle(rho),
        fidelity_err=math.nan,
        tangle_err=math.nan,
        loglikelihood=loglik,
        negative_counts=bool(np.any(counts < 0)),
    )


def resample(record: TomographyRecord, rng: np.random.Generator) -> TomographyRecord:
    """Poisson-resample every observed count, keeping accidental estimates."""
    out = {}
    for pair, rec in record.counts.items():
        counts = rng.poisson(rec.outcome_counts.astype(float))
        out[pair] = CountRecord(rec.setting_label, counts, rec.integration_time_s, rec.accidental_estimate)
    return TomographyRecord(out)


def monte_carlo_uncertainty(
    record: TomographyRecord,
    n_samples: int,
    seed: int,
    subtract: bool = True,
    target: QuNitPair | None = None,
) -> tuple[float, float]:
    """Standard deviations of fidelity and tangle over Poisson resamples.

    Sample ``s`` draws from ``derive_seed(seed, s)``, so the result does not
    depend on evaluation order.
    """
    if n_samples < 2:
        raise AnalysisError("Monte Carlo error estimate needs n_samples >= 2")
    fids, tangles = [], []
    for s in range(n_samples):
        rng = np.random.Generator(np.random.PCG64(derive_seed(seed, s)))
        res = mle_tomography(resample(record, rng), subtract=subtract, target=target)
        fids.append(res.fidelity)
        tangles.append(res.tangle)
    return float(np.std(fids, ddof=1)), float(np.std(tangles, ddof=1))


def with_uncertainty(result: TomographyResult, fidelity_err: float, tangle_err: float) -> TomographyResult:
    return replace(result, fidelity_err=fidelity_err, tangle_err=tangle_err)


def expected_counts(rho: DensityMatrix, counts_per_basis: float) -> np.ndarray:
    """Noise-free 36 counts for ``rho`` with a fixed total per basis pair."""
    return counts_per_basis * born_probabilities(to_tensor_order(rho.entries, 2))
