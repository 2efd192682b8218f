"""OTFS baseline: symplectic transforms and a single-tap TF detector.

The detector is the canonical per-bin time-frequency equalizer standing in
for an external single-tap detector; it is exact on block-diagonal kernels
with nonzero diagonal and leaves residual interference on non-stationary
kernels, which is part of what the simulations measure.  Rectangular
transmit/receive windows throughout.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError
from .kernel import Domain, FrameGrid, KernelMatrix, ofdm_operator


@dataclass(frozen=True)
class DelayDopplerGrid:
    """Delay-Doppler symbol grid: rows are delay bins, columns Doppler bins."""

    symbols: np.ndarray
    grid: FrameGrid

    def __post_init__(self):
        expect = (self.grid.n_subcarriers, self.grid.n_symbols)
        if self.symbols.shape != expect:
            raise ConfigurationError(
                f"delay-Doppler grid shape {self.symbols.shape}, expected {expect}"
            )

    @property
    def n_delay(self) -> int:
        return self.grid.n_subcarriers

    @property
    def n_doppler(self) -> int:
        return self.grid.n_symbols


def isfft(dd: DelayDopplerGrid) -> np.ndarray:
    """Unitary inverse symplectic finite Fourier transform to the TF grid.

    ``X_tf[t, f] = (1/sqrt(MN)) sum_{tau,nu} x[tau, nu]
    exp(j 2 pi (t nu / N - f tau / M))`` with M delay and N Doppler bins;
    output is indexed (symbol t, subcarrier f).
    """
    m, n = dd.n_delay, dd.n_doppler
    x = np.fft.ifft(np.fft.fft(dd.symbols, axis=0), axis=1)
    return x.T * np.sqrt(n / m)


def sfft(x_tf: np.ndarray, grid: FrameGrid) -> DelayDopplerGrid:
    """Unitary symplectic finite Fourier transform; inverse of :func:`isfft`."""
    m, n = grid.n_subcarriers, grid.n_symbols
    if x_tf.shape != (n, m):
        raise ConfigurationError(
            f"TF grid shape {x_tf.shape}, expected ({n}, {m})"
        )
    x = np.fft.fft(np.fft.ifft(x_tf, axis=1), axis=0)
    return DelayDopplerGrid(x.T * np.sqrt(m / n), grid)


def otfs_modulate(dd: DelayDopplerGrid, grid: FrameGrid) -> np.ndarray:
    """Time-domain OTFS signal: OFDM-modulate the ISFFT of the DD grid."""
    if grid.n_users_rx != 1 or grid.n_users_tx != 1:
        raise ConfigurationError("otfs_modulate supports single-user grids only")
    return ofdm_operator(grid) @ isfft(dd).ravel()


def single_tap_equalize(y_tf: np.ndarray, k_tf: KernelMatrix) -> np.ndarray:
    """Divide each TF bin by the kernel diagonal (regularized at ~0)."""
    diag = np.diag(k_tf.data)
    eps = 1e-12 * k_tf.frobenius()
    out = np.zeros_like(y_tf)
    ok = np.abs(diag) > eps
    out[ok] = y_tf[ok] / diag[ok]
    return out


def otfs_demodulate_tfst(r_time: np.ndarray, k_tf: KernelMatrix,
                         grid: FrameGrid) -> DelayDopplerGrid:
    """Single-tap TF equalization followed by SFFT back to delay-Doppler.

    Uses the TF kernel as perfect CSI; only its diagonal enters the
    equalizer, so off-diagonal (inter-cell) terms survive as residual
    interference.
    """
    if k_tf.domain is not Domain.TIME_FREQUENCY:
        raise ConfigurationError("the detector needs a TIME_FREQUENCY kernel")
    y_tf = ofdm_operator(grid).conj().T @ r_time
    eq = single_tap_equalize(y_tf, k_tf)
    return sfft(eq.reshape(grid.n_symbols, grid.n_subcarriers), grid)
