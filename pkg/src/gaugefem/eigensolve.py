"""Generalized Hermitian eigensolvers and spectrum post-processing.

Small problems go through dense LAPACK (scipy.linalg.eigh on the pencil);
larger ones use ARPACK shift-invert with a deterministic start vector.  All
returned eigenvectors are M-normalized and phase-fixed so repeated runs are
reproducible and gauge-paired solves can be compared pointwise.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse.linalg as spla
from scipy.sparse.linalg import ArpackNoConvergence

__all__ = [
    "DENSE_CUTOFF",
    "MULTIPLET_GAP",
    "DefinitenessError",
    "ConvergenceError",
    "SpectrumResult",
    "solve_hermitian_gevp",
    "reconstruct_field",
]

# Problems at or below this many DOFs are solved densely.
DENSE_CUTOFF = 2000

# Neighbouring eigenvalues closer than this (relative) are flagged as a
# multiplet; their eigenvectors are only defined up to mixing.
MULTIPLET_GAP = 1e-12


class DefinitenessError(RuntimeError):
    """The mass matrix is not positive definite."""

    def __init__(self, pivot):
        self.pivot = float(pivot)
        super().__init__(
            f"mass matrix is not positive definite "
            f"(smallest detected pivot {self.pivot:.6e})"
        )


class ConvergenceError(RuntimeError):
    """The iterative eigensolver did not reach the requested tolerance."""

    def __init__(self, best_residual, message=None):
        self.best_residual = float(best_residual)
        super().__init__(
            message
            or f"eigensolver did not converge (best residual {self.best_residual:.3e})"
        )


@dataclass
class SpectrumResult:
    """Eigenpairs of a Hermitian pencil (H, M).

    Attributes
    ----------
    eigenvalues : (k,) float ndarray, ascending
    eigenvectors : (k, n) complex ndarray
        M-normalized; the largest-modulus entry of each vector is rotated to
        be real and positive so phases are deterministic.
    residuals : (k,) float ndarray
        ||H u - E M u||_2 / ||u||_2 per pair.
    multiplet : (k,) bool ndarray
        True where the eigenvalue sits within ``MULTIPLET_GAP`` (relative) of
        a neighbour; such eigenvectors are only fixed up to mixing.
    iterations : int or None
        Iteration count when the backend reports one.
    method_tag : str
        "dense-eigh" or "arpack-shift-invert".
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    residuals: np.ndarray
    multiplet: np.ndarray
    iterations: "int | None"
    method_tag: str


def _flag_multiplets(vals):
    flags = np.zeros(vals.size, dtype=bool)
    if vals.size > 1:
        gap = np.abs(np.diff(vals))
        close = gap < MULTIPLET_GAP * np.maximum(1.0, np.abs(vals[:-1]))
        flags[:-1] |= close
        flags[1:] |= close
    return flags


def _postprocess(vals, vecs, h_csr, m_csr, tol, iterations, tag):
    order = np.argsort(vals, kind="stable")
    vals = np.asarray(vals[order], dtype=np.float64)
    vecs = np.ascontiguousarray(vecs[:, order].T, dtype=np.complex128)  # (k, n)

    residuals = np.empty(vals.size)
    for i in range(vals.size):
        v = vecs[i]
        norm = np.sqrt(np.real(np.vdot(v, m_csr @ v)))
        if norm == 0.0:
            raise ConvergenceError(np.inf, "eigensolver returned a zero vector")
        v = v / norm
        j = int(np.argmax(np.abs(v)))
        phase = v[j] / abs(v[j])
        v = v * np.conj(phase)
        vecs[i] = v
        residuals[i] = np.linalg.norm(h_csr @ v - vals[i] * (m_csr @ v)) / np.linalg.norm(v)

    worst = residuals.max() if residuals.size else 0.0
    if worst > tol:
        raise ConvergenceError(worst)
    return SpectrumResult(
        vals, vecs, residuals, _flag_multiplets(vals), iterations, tag
    )


def _gershgorin_lower(h_csr):
    diag = h_csr.diagonal()
    radii = np.asarray(np.abs(h_csr).sum(axis=1)).ravel() - np.abs(diag)
    return float((diag.real - radii).min())


def solve_hermitian_gevp(H, M, k, tol=1e-9, seed=0, dense_cutoff=DENSE_CUTOFF,
                         maxiter=None):
    """Smallest k eigenpairs of H u = E M u with H Hermitian, M HPD.

    Parameters
    ----------
    H, M : HermitianSparse
        Same size n; M must be positive definite (checked, raises
        :class:`DefinitenessError` naming the smallest detected pivot).
    k : int
        Number of eigenpairs, 1 <= k <= n.
    tol : float
        Acceptance threshold for the relative residuals.
    seed : int
        Seeds the ARPACK start vector; fixed seed gives bit-reproducible runs.
    dense_cutoff : int
        Problems with n <= dense_cutoff use dense LAPACK, larger ones ARPACK
        shift-invert.
    """
    if H.n != M.n:
        raise ValueError("H and M sizes differ")
    n = H.n
    if n == 0:
        raise ValueError("empty problem")
    if not isinstance(k, (int, np.integer)) or not 1 <= k <= n:
        raise ValueError(f"k must be in [1, {n}], got {k!r}")
    if tol <= 0:
        raise ValueError("tol must be positive")

    h_csr = H.to_csr()
    m_csr = M.to_csr()

    if n <= dense_cutoff:
        hd = h_csr.toarray()
        md = m_csr.toarray()
        try:
            np.linalg.cholesky(md)
        except np.linalg.LinAlgError:
            pivot = scipy.linalg.eigh(md, eigvals_only=True, subset_by_index=[0, 0])[0]
            raise DefinitenessError(pivot) from None
        vals, vecs = scipy.linalg.eigh(hd, md, subset_by_index=[0, k - 1])
        return _postprocess(vals, vecs, h_csr, m_csr, tol, None, "dense-eigh")

    rng = np.random.default_rng(seed)
    v0 = rng.standard_normal(n) + 1j * rng.standard_normal(n)

    # Positive-definiteness probe; also feeds the shift heuristic below.
    try:
        m_min = spla.eigsh(
            m_csr, k=1, which="SA", tol=1e-8, v0=v0, return_eigenvectors=False
        )[0]
    except ArpackNoConvergence as exc:
        raise ConvergenceError(np.inf, f"mass definiteness probe stalled: {exc}") from None
    if m_min <= 0.0:
        raise DefinitenessError(m_min)

    # Any sigma strictly below the smallest pencil eigenvalue keeps H - sigma M
    # invertible and makes the smallest eigenvalues the ARPACK 'LM' targets.
    lower = _gershgorin_lower(h_csr)
    sigma = 0.0 if lower > 0.0 else lower / (0.9 * m_min) - 1.0

    try:
        vals, vecs = spla.eigsh(
            h_csr,
            k=k,
            M=m_csr,
            sigma=sigma,
            which="LM",
            tol=tol * 1e-2,
            v0=v0,
            maxiter=maxiter,
        )
    except ArpackNoConvergence as exc:
        best = np.inf
        if len(exc.eigenvalues):
            vv = exc.eigenvectors
            best = min(
                np.linalg.norm(h_csr @ vv[:, i] - exc.eigenvalues[i] * (m_csr @ vv[:, i]))
                / np.linalg.norm(vv[:, i])
                for i in range(vv.shape[1])
            )
        raise ConvergenceError(best) from None
    return _postprocess(vals, vecs, h_csr, m_csr, tol, None, "arpack-shift-invert")


def reconstruct_field(coefficients, mesh, dof_map):
    """Scatter interior coefficient vectors to per-vertex fields.

    Accepts a single (n_int,) vector or a stack (..., n_int); boundary
    vertices get exact zeros (the Dirichlet condition).
    """
    coefficients = np.asarray(coefficients, dtype=np.complex128)
    dof_map = np.asarray(dof_map)
    interior = np.flatnonzero(dof_map >= 0)
    if coefficients.shape[-1] != interior.size:
        raise ValueError(
            f"expected {interior.size} interior coefficients, "
            f"got {coefficients.shape[-1]}"
        )
    out = np.zeros(coefficients.shape[:-1] + (dof_map.shape[0],), dtype=np.complex128)
    out[..., interior] = coefficients
    return out
