"""Discrete channel kernels on the time-frequency grid.

The frame is discretized into ``n_symbols`` OFDM-like symbols of
``n_subcarriers`` samples each.  A kernel is the flattened linear map from
the transmit grid to the receive grid; flattening is row-major with the
user index slowest and the subcarrier index fastest::

    idx = u * (n_symbols * n_subcarriers) + t * n_subcarriers + f

so per-user sub-blocks are contiguous.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from .errors import ConfigurationError, NumericError


class Domain(Enum):
    TIME_FREQUENCY = 1
    TIME_DOMAIN = 2
    DELAY_DOPPLER_LOCAL = 3


@dataclass(frozen=True)
class FrameGrid:
    """Discretization of one frame: user, symbol and subcarrier counts."""

    n_users_rx: int
    n_users_tx: int
    n_symbols: int
    n_subcarriers: int
    subcarrier_spacing_hz: float

    def __post_init__(self):
        for name in ("n_users_rx", "n_users_tx", "n_symbols", "n_subcarriers"):
            if getattr(self, name) < 1:
                raise ConfigurationError(f"{name} must be >= 1")
        if self.subcarrier_spacing_hz <= 0:
            raise ConfigurationError("subcarrier_spacing_hz must be positive")

    @property
    def symbol_duration_s(self) -> float:
        return 1.0 / self.subcarrier_spacing_hz

    @property
    def frame_duration_s(self) -> float:
        return self.n_symbols * self.symbol_duration_s

    @property
    def sample_rate_hz(self) -> float:
        return self.n_subcarriers * self.subcarrier_spacing_hz

    @property
    def cells_per_user(self) -> int:
        return self.n_symbols * self.n_subcarriers

    @property
    def dim_rx(self) -> int:
        return self.n_users_rx * self.cells_per_user

    @property
    def dim_tx(self) -> int:
        return self.n_users_tx * self.cells_per_user

    def single_user(self) -> "FrameGrid":
        return replace(self, n_users_rx=1, n_users_tx=1)


@dataclass(frozen=True)
class KernelMatrix:
    """Flattened discrete channel kernel: rows = output grid, cols = input grid."""

    data: np.ndarray
    grid_out: FrameGrid
    grid_in: FrameGrid
    domain: Domain

    def __post_init__(self):
        if self.data.ndim != 2:
            raise ConfigurationError("kernel data must be a 2-D array")
        expect = (self.grid_out.dim_rx, self.grid_in.dim_tx)
        if self.data.shape != expect:
            raise ConfigurationError(
                f"kernel shape {self.data.shape} does not match grids {expect}"
            )
        if not np.all(np.isfinite(self.data)):
            raise NumericError("kernel contains non-finite entries")

    @property
    def dim_out(self) -> int:
        return self.data.shape[0]

    @property
    def dim_in(self) -> int:
        return self.data.shape[1]

    def frobenius(self) -> float:
        return float(np.linalg.norm(self.data))


@dataclass(frozen=True)
class LocalResponse:
    """Delay-Doppler view of a time-frequency kernel, indexed (t, f, tau, nu)."""

    data: np.ndarray
    grid: FrameGrid

    def __post_init__(self):
        s, f = self.grid.n_symbols, self.grid.n_subcarriers
        if self.data.shape != (s, f, s, f):
            raise ConfigurationError(
                f"LDR shape {self.data.shape} does not match grid ({s},{f},{s},{f})"
            )


def ofdm_operator(grid: FrameGrid) -> np.ndarray:
    """Unitary map from TF-grid coefficients to time samples.

    Block-diagonal over symbols; each block is the unitary inverse DFT of
    size ``n_subcarriers``.  Single-user grids only.
    """
    if grid.n_users_rx != 1 or grid.n_users_tx != 1:
        raise ConfigurationError("ofdm_operator only supports single-user grids")
    n = grid.n_subcarriers
    idft = np.fft.ifft(np.eye(n), axis=0) * np.sqrt(n)  # unitary inverse DFT
    blocks = [idft] * grid.n_symbols
    out = np.zeros((grid.cells_per_user, grid.cells_per_user), dtype=complex)
    for t in range(grid.n_symbols):
        sl = slice(t * n, (t + 1) * n)
        out[sl, sl] = blocks[t]
    return out


def tf_kernel_from_time(h_td: np.ndarray, grid: FrameGrid) -> KernelMatrix:
    """Conjugate the time-domain channel matrix into the TF-grid kernel.

    ``K = A^H @ H_td @ A`` with ``A = ofdm_operator(grid)``, so ``K @ s_tf``
    reproduces time-domain propagation of the OFDM-modulated grid exactly.
    """
    d = grid.cells_per_user
    h_td = np.asarray(h_td, dtype=complex)
    if h_td.shape != (d, d):
        raise ConfigurationError(
            f"time-domain matrix shape {h_td.shape} does not match grid dim {d}"
        )
    a = ofdm_operator(grid)
    k = a.conj().T @ h_td @ a
    return KernelMatrix(k, grid.single_user(), grid.single_user(), Domain.TIME_FREQUENCY)


def kernel_to_ldr(k: KernelMatrix) -> LocalResponse:
    """Reindex a TF kernel to the local delay-Doppler response.

    ``h_w[t, f, tau, nu] = K[(t, f), (t - tau mod S, f - nu mod F)]``; the
    cyclic reindex is bijective, so delays beyond half the frame alias.
    """
    if k.domain is not Domain.TIME_FREQUENCY:
        raise ConfigurationError("kernel_to_ldr expects a TIME_FREQUENCY kernel")
    if k.grid_out.n_users_rx != 1 or k.grid_in.n_users_tx != 1:
        raise ConfigurationError("kernel_to_ldr supports single-user kernels only")
    s, f = k.grid_out.n_symbols, k.grid_out.n_subcarriers
    k4 = k.data.reshape(s, f, s, f)  # (t, f, t', f')
    t = np.arange(s)
    fr = np.arange(f)
    # gather K[t, f, (t - tau) % S, (f - nu) % F] into (t, f, tau, nu)
    tp = (t[:, None] - t[None, :]) % s  # [t, tau] -> t'
    fp = (fr[:, None] - fr[None, :]) % f  # [f, nu] -> f'
    h = k4[
        t[:, None, None, None],
        fr[None, :, None, None],
        tp[:, None, :, None],
        fp[None, :, None, :],
    ]
    return LocalResponse(h, k.grid_out.single_user())


def ldr_to_kernel(h: LocalResponse) -> KernelMatrix:
    """Inverse of :func:`kernel_to_ldr` (exact elementwise)."""
    s, f = h.grid.n_symbols, h.grid.n_subcarriers
    t = np.arange(s)
    fr = np.arange(f)
    tp = (t[:, None] - t[None, :]) % s
    fp = (fr[:, None] - fr[None, :]) % f
    k4 = np.empty((s, f, s, f), dtype=complex)
    k4[
        t[:, None, None, None],
        fr[None, :, None, None],
        tp[:, None, :, None],
        fp[None, :, None, :],
    ] = h.data
    return KernelMatrix(
        k4.reshape(s * f, s * f), h.grid, h.grid, Domain.TIME_FREQUENCY
    )


def ldr_matrix(h: LocalResponse) -> KernelMatrix:
    """Unfold an LDR into a matrix with rows (tau, nu) and columns (t, f).

    This is the unfolding whose decomposition places the output-side
    eigenwaves on the delay-Doppler plane and the input-side eigenwaves on
    the time-frequency plane, as the channel-statistics operators expect.
    """
    s, f = h.grid.n_symbols, h.grid.n_subcarriers
    d = s * f
    m = h.data.transpose(2, 3, 0, 1).reshape(d, d)  # rows (tau, nu), cols (t, f)
    return KernelMatrix(m, h.grid, h.grid, Domain.DELAY_DOPPLER_LOCAL)


def mu_kernel(per_link) -> KernelMatrix:
    """Assemble per-link single-user kernels into one multi-user kernel.

    ``per_link[u][u']`` is the kernel from transmit user ``u'`` to receive
    user ``u``; all links must share one frame grid and domain.
    """
    n_rx = len(per_link)
    if n_rx == 0 or len(per_link[0]) == 0:
        raise ConfigurationError("per_link must be a non-empty matrix of kernels")
    n_tx = len(per_link[0])
    ref = per_link[0][0]
    base = ref.grid_out.single_user()
    d = base.cells_per_user
    blocks = np.empty((n_rx * d, n_tx * d), dtype=complex)
    for u in range(n_rx):
        if len(per_link[u]) != n_tx:
            raise ConfigurationError("per_link rows must have equal length")
        for up in range(n_tx):
            k = per_link[u][up]
            if k.grid_out.single_user() != base or k.grid_in.single_user() != base:
                raise ConfigurationError("per-link kernels must share one grid")
            if k.domain is not ref.domain:
                raise ConfigurationError("per-link kernels must share one domain")
            blocks[u * d : (u + 1) * d, up * d : (up + 1) * d] = k.data
    grid_out = replace(base, n_users_rx=n_rx, n_users_tx=n_tx)
    return KernelMatrix(blocks, grid_out, grid_out, ref.domain)


def cyclic_time_domain_matrix(taps: np.ndarray, grid: FrameGrid) -> np.ndarray:
    """Per-symbol circulant channel matrix (cyclic-prefix abstraction).

    Builds a block-diagonal matrix whose symbol blocks are circulants of
    ``taps``.  Intended for LTI sanity tests only; the physical model is
    linear convolution (see the channel module).
    """
    taps = np.asarray(taps, dtype=complex)
    n = grid.n_subcarriers
    if taps.ndim != 1 or taps.size > n:
        raise ConfigurationError("taps must be 1-D with length <= n_subcarriers")
    first_col = np.zeros(n, dtype=complex)
    first_col[: taps.size] = taps
    idx = (np.arange(n)[:, None] - np.arange(n)[None, :]) % n
    circ = first_col[idx]
    d = grid.cells_per_user
    out = np.zeros((d, d), dtype=complex)
    for t in range(grid.n_symbols):
        sl = slice(t * n, (t + 1) * n)
        out[sl, sl] = circ
    return out
