"""Decomposition of channel kernels into jointly orthogonal eigenwaves.

On a finite grid the decomposition of the unfolded kernel is its singular
value decomposition: ``K = sum_n sigma_n psi_n phi_n^H``.  The multi-index
eigenwaves are the folded singular vectors; folding follows the row-major
flat index documented in the kernel module.

Conjugation convention, used consistently everywhere: transmitting column
``phi_n`` yields ``K @ phi_n = sigma_n * psi_n``, and demodulation is the
conjugated inner product ``psi_n^H @ r``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericError
from .kernel import Domain, FrameGrid, KernelMatrix


@dataclass(frozen=True)
class EigenwaveSet:
    """Ordered triples (sigma_n, psi_n, phi_n) from a kernel decomposition.

    ``psis[:, n]`` is the output-side eigenwave and ``phis[:, n]`` the
    input-side eigenwave for the n-th singular value; ``sigmas`` is sorted
    non-increasing and each psi column is phase-canonicalized so its
    largest-magnitude entry is real and positive.
    """

    sigmas: np.ndarray
    psis: np.ndarray
    phis: np.ndarray
    grid_out: FrameGrid
    grid_in: FrameGrid
    domain: Domain

    def __post_init__(self):
        n = self.sigmas.size
        if self.psis.shape != (self.grid_out.dim_rx, n):
            raise NumericError("psi matrix shape does not match grid/rank")
        if self.phis.shape != (self.grid_in.dim_tx, n):
            raise NumericError("phi matrix shape does not match grid/rank")
        if np.any(self.sigmas < 0) or np.any(np.diff(self.sigmas) > 0):
            raise NumericError("sigmas must be non-negative and non-increasing")

    def __len__(self) -> int:
        return self.sigmas.size

    @property
    def lambdas(self) -> np.ndarray:
        """Eigenvalues lambda_n = sigma_n**2."""
        return self.sigmas**2

    def psi_folded(self, n: int) -> np.ndarray:
        """psi_n reshaped onto the output grid (n_symbols, n_subcarriers)."""
        g = self.grid_out
        if g.n_users_rx != 1:
            raise NumericError("folding to 2-D requires a single-user grid")
        return self.psis[:, n].reshape(g.n_symbols, g.n_subcarriers)

    def phi_folded(self, n: int) -> np.ndarray:
        """phi_n reshaped onto the input grid (n_symbols, n_subcarriers)."""
        g = self.grid_in
        if g.n_users_tx != 1:
            raise NumericError("folding to 2-D requires a single-user grid")
        return self.phis[:, n].reshape(g.n_symbols, g.n_subcarriers)

    def orthonormality_defect(self) -> float:
        """max of ||Psi^H Psi - I||_max and ||Phi^H Phi - I||_max."""
        eye = np.eye(len(self))
        d_psi = np.abs(self.psis.conj().T @ self.psis - eye).max()
        d_phi = np.abs(self.phis.conj().T @ self.phis - eye).max()
        return float(max(d_psi, d_phi))


def _canonicalize(psis: np.ndarray, phis: np.ndarray) -> None:
    """Rotate each (psi, phi) pair so psi's largest entry is real positive.

    Multiplying both sides of a pair by one unit scalar leaves
    ``sigma * psi @ phi^H`` unchanged; ties in magnitude resolve to the
    lowest index via argmax.
    """
    for n in range(psis.shape[1]):
        k = int(np.argmax(np.abs(psis[:, n])))
        pivot = psis[k, n]
        if pivot != 0:
            rot = np.conj(pivot) / abs(pivot)
            psis[:, n] *= rot
            phis[:, n] *= rot


def decompose(k: KernelMatrix, rank_limit: int | None = None) -> EigenwaveSet:
    """Singular value decomposition of the kernel into an eigenwave set.

    With ``rank_limit`` the set is truncated to the leading r triples (the
    best rank-r approximation); otherwise the reconstruction matches K to
    numerical precision.
    """
    if not np.all(np.isfinite(k.data)):
        raise NumericError("cannot decompose a kernel with non-finite entries")
    if rank_limit is not None and not 0 <= rank_limit <= min(k.data.shape):
        raise NumericError(
            f"rank_limit {rank_limit} outside [0, {min(k.data.shape)}]"
        )
    try:
        u, s, vh = np.linalg.svd(k.data, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise NumericError(
            f"decomposition failed to converge on a "
            f"{k.data.shape[0]}x{k.data.shape[1]} kernel "
            f"(||K||_F = {k.frobenius():g}): {exc}"
        ) from exc
    if rank_limit is not None:
        u, s, vh = u[:, :rank_limit], s[:rank_limit], vh[:rank_limit]
    psis = np.ascontiguousarray(u)
    phis = np.ascontiguousarray(vh.conj().T)
    _canonicalize(psis, phis)
    return EigenwaveSet(s, psis, phis, k.grid_out, k.grid_in, k.domain)


def reconstruct(e: EigenwaveSet) -> KernelMatrix:
    """Rebuild ``sum_n sigma_n psi_n phi_n^H`` with the original grids."""
    data = (e.psis * e.sigmas) @ e.phis.conj().T
    return KernelMatrix(data.astype(complex), e.grid_out, e.grid_in, e.domain)


def crosstalk(e: EigenwaveSet, k: KernelMatrix) -> np.ndarray:
    """Cross-talk matrix ``C[m, n] = psi_m^H @ K @ phi_n``.

    For ``e = decompose(k)`` this is ``diag(sigma)``; off-diagonal energy
    measures how far k has drifted from the decomposed kernel.
    """
    if k.data.shape != (e.psis.shape[0], e.phis.shape[0]):
        raise NumericError(
            f"kernel shape {k.data.shape} inconsistent with eigenwave dims "
            f"({e.psis.shape[0]}, {e.phis.shape[0]})"
        )
    return e.psis.conj().T @ k.data @ e.phis


def eigenwave_projection(e: EigenwaveSet, a: np.ndarray, b: np.ndarray) -> complex:
    """Projection of the eigenwave superposition of ``a`` onto that of ``b``.

    Computed by explicit summation over the grid:
    ``sum_k (sum_n a_n phi_n[k]) * conj(sum_m b_m phi_m[k])``, which under
    exact orthonormality collapses to ``sum_n a_n conj(b_n)``.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != (len(e),) or b.shape != (len(e),):
        raise NumericError(
            f"coefficient vectors must have length {len(e)}; "
            f"got {a.shape} and {b.shape}"
        )
    wave_a = e.phis @ a
    wave_b = e.phis @ b
    return complex(np.sum(wave_a * np.conj(wave_b)))
