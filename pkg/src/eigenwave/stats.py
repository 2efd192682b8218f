"""Eigen-characterized channel statistics and capacity.

The second-order statistics of a non-stationary channel are assembled from
the eigenvalues and eigenwave magnitudes of the delay-Doppler-unfolded
kernel, where the output-side eigenwaves live on the (tau, nu) plane and
the input-side eigenwaves on the (t, f) plane.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, NumericError
from .hogmt import EigenwaveSet, decompose
from .kernel import Domain, KernelMatrix, LocalResponse, ldr_matrix
from .modem import PowerAllocation, waterfill


def total_gain(k: KernelMatrix, e: EigenwaveSet) -> tuple[float, float]:
    """Total transmission gain, computed two independent ways.

    ``direct`` sums |K|^2 over all kernel elements; ``eigen`` sums the
    eigenvalues of the decomposition.  The two must agree to 1e-8 relative
    whenever ``e`` is the full-rank decomposition of ``k``.
    """
    direct = float(np.sum(np.abs(k.data) ** 2))
    eigen = float(np.sum(e.lambdas))
    if len(e) == min(k.data.shape) and abs(direct - eigen) > 1e-8 * max(direct, 1e-300):
        raise NumericError(
            f"gain identity violated: sum|K|^2 = {direct:.15g} but "
            f"sum lambda = {eigen:.15g}"
        )
    return direct, eigen


def _require_ldr_domain(e: EigenwaveSet) -> None:
    if e.domain is not Domain.DELAY_DOPPLER_LOCAL:
        raise ConfigurationError(
            "statistics expect eigenwaves of a DELAY_DOPPLER_LOCAL kernel "
            "(see kernel.ldr_matrix)"
        )


def eigen_scattering(e: EigenwaveSet) -> tuple[np.ndarray, np.ndarray]:
    """Global scattering function over (tau, nu) and TF path gain over (t, f).

    Both are eigenvalue-weighted spectral densities of the eigenwaves and
    both sum to the total gain.
    """
    _require_ldr_domain(e)
    lam = e.lambdas
    psi2 = np.abs(e.psis) ** 2  # rows (tau, nu)
    phi2 = np.abs(e.phis) ** 2  # rows (t, f)
    go, gi = e.grid_out, e.grid_in
    scattering = (psi2 @ lam).reshape(go.n_symbols, go.n_subcarriers)
    tf_path_gain = (phi2 @ lam).reshape(gi.n_symbols, gi.n_subcarriers)
    return scattering, tf_path_gain


def _cyclic_autocorr2(x: np.ndarray) -> np.ndarray:
    """Cyclic 2-D autocorrelation R[d] = sum_k x[k] conj(x[k - d])."""
    f = np.fft.fft2(x)
    return np.fft.ifft2(np.abs(f) ** 2)


def eigen_ccf(e: EigenwaveSet) -> np.ndarray:
    """Channel correlation magnitude over (dt, df, dtau, dnu).

    Sum over eigenwaves of the eigenvalue times the magnitudes of the two
    cyclic autocorrelations: the TF-side eigenwave correlates over
    (dt, df), the delay-Doppler side over (dtau, dnu).  The zero-lag entry
    equals the total gain.
    """
    _require_ldr_domain(e)
    s, f = e.grid_in.n_symbols, e.grid_in.n_subcarriers
    out = np.zeros((s, f, s, f))
    for n in range(len(e)):
        r_tf = np.abs(_cyclic_autocorr2(e.phi_folded(n)))
        r_dd = np.abs(_cyclic_autocorr2(e.psi_folded(n)))
        out += e.lambdas[n] * (r_tf[:, :, None, None] * r_dd[None, None, :, :])
    return out


def eigen_lsf(e: EigenwaveSet) -> np.ndarray:
    """Local scattering density over (t, f, tau, nu).

    Marginalizing over (tau, nu) returns the TF path gain; over (t, f) the
    global scattering function.
    """
    _require_ldr_domain(e)
    s, f = e.grid_in.n_symbols, e.grid_in.n_subcarriers
    phi2 = (np.abs(e.phis) ** 2).T.reshape(len(e), s, f)  # (n, t, f)
    psi2 = (np.abs(e.psis) ** 2).T.reshape(len(e), s, f)  # (n, tau, nu)
    return np.einsum("n,ntf,nuv->tfuv", e.lambdas, phi2, psi2)


def average_capacity(lambdas: np.ndarray, n0: float, p: float,
                     frame_duration_s: float) -> tuple[float, PowerAllocation]:
    """Water-filled sum capacity of the eigenchannels, in bits per second."""
    if frame_duration_s <= 0:
        raise ConfigurationError("frame_duration_s must be positive")
    alloc = waterfill(lambdas, n0, p)
    rate = np.log2(1.0 + alloc.powers * np.asarray(lambdas, dtype=float) / n0).sum()
    return float(rate / frame_duration_s), alloc


@dataclass(frozen=True)
class ChannelStats:
    """Per-realization statistics bundle from one LDR-domain decomposition."""

    total_gain: float
    lambda_spectrum: np.ndarray
    scattering: np.ndarray
    tf_path_gain: np.ndarray
    ccf: np.ndarray
    lsf: np.ndarray

    def __post_init__(self):
        for name in ("scattering", "tf_path_gain", "ccf", "lsf"):
            if np.any(getattr(self, name) < 0):
                raise NumericError(f"{name} must be non-negative")
        total = float(self.lambda_spectrum.sum())
        if abs(self.total_gain - total) > 1e-10 * max(total, 1e-300):
            raise NumericError("total_gain inconsistent with lambda spectrum")


def channel_stats(h: LocalResponse) -> ChannelStats:
    """Decompose an LDR and assemble the full statistics bundle."""
    m = ldr_matrix(h)
    e = decompose(m)
    _, eigen = total_gain(m, e)
    scattering, tf_path_gain = eigen_scattering(e)
    return ChannelStats(eigen, e.lambdas, scattering, tf_path_gain,
                        eigen_ccf(e), eigen_lsf(e))
