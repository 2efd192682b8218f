"""Bit mapping, eigenwave multiplexing modem, and power allocation.

Modulation places one data symbol on each active input-side eigenwave; the
matched filter projects the received grid signal back onto the output-side
eigenwaves, so each estimate is the transmitted symbol scaled by its
singular value plus projected noise, with no contribution from other
symbols.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import ConfigurationError, NoCapacityError
from .hogmt import EigenwaveSet

CONSTELLATIONS = ("qpsk", "qam16", "qam64")


@dataclass(frozen=True)
class ConstellationMap:
    """Gray-labeled constellation with unit average symbol energy.

    ``points[label]`` is the symbol whose bit label is the binary expansion
    of ``label`` (first bit = MSB).  The first half of the bits selects the
    I level and the second half the Q level, each through a binary-reflected
    Gray code, so neighbouring levels on either axis differ in one bit.
    """

    name: str
    points: np.ndarray

    @property
    def bits_per_symbol(self) -> int:
        return int(math.log2(self.points.size))

    def bit_labels(self) -> list[str]:
        """Bit string per point, index-aligned with ``points``."""
        k = self.bits_per_symbol
        return [format(i, f"0{k}b") for i in range(self.points.size)]


def _gray_to_index(g: np.ndarray) -> np.ndarray:
    """Binary-reflected Gray word -> level index."""
    n = g.copy()
    shift = 1
    while shift < 32:
        n ^= n >> shift
        shift *= 2
    return n


def _axis_levels(bits_per_axis: int) -> np.ndarray:
    """Amplitude per axis label: Gray-adjacent labels sit on adjacent levels."""
    m = 1 << bits_per_axis
    labels = np.arange(m)
    idx = _gray_to_index(labels)
    return (m - 1) - 2.0 * idx


@lru_cache(maxsize=None)
def constellation(name: str) -> ConstellationMap:
    if name not in CONSTELLATIONS:
        raise ConfigurationError(
            f"unknown constellation {name!r}; expected one of {CONSTELLATIONS}"
        )
    bits = {"qpsk": 2, "qam16": 4, "qam64": 6}[name]
    half = bits // 2
    amps = _axis_levels(half)
    labels = np.arange(1 << bits)
    i_amp = amps[labels >> half]
    q_amp = amps[labels & ((1 << half) - 1)]
    points = i_amp + 1j * q_amp
    points /= np.sqrt(np.mean(np.abs(points) ** 2))
    return ConstellationMap(name, points)


def map_bits(bits: np.ndarray, cmap: ConstellationMap) -> np.ndarray:
    """Gray-map a flat 0/1 array onto constellation symbols."""
    bits = np.asarray(bits, dtype=np.int64)
    k = cmap.bits_per_symbol
    if bits.size % k:
        raise ConfigurationError(
            f"bit count {bits.size} is not a multiple of {k} bits/symbol"
        )
    if bits.size and not np.isin(bits, (0, 1)).all():
        raise ConfigurationError("bits must be 0 or 1")
    weights = 1 << np.arange(k)[::-1]
    labels = bits.reshape(-1, k) @ weights
    return cmap.points[labels]


def demap(symbols: np.ndarray, cmap: ConstellationMap) -> np.ndarray:
    """Minimum-distance hard decision back to bits (ties -> lowest label)."""
    symbols = np.asarray(symbols, dtype=complex).ravel()
    d2 = np.abs(symbols[:, None] - cmap.points[None, :]) ** 2
    labels = d2.argmin(axis=1)
    k = cmap.bits_per_symbol
    weights = 1 << np.arange(k)[::-1]
    return ((labels[:, None] & weights) > 0).astype(np.int64).ravel()


@dataclass(frozen=True)
class PowerAllocation:
    """Per-eigenwave transmit powers under a total power budget."""

    powers: np.ndarray
    total_power: float
    noise_power: float

    def __post_init__(self):
        if self.total_power <= 0 or self.noise_power <= 0:
            raise ConfigurationError("total_power and noise_power must be positive")
        if np.any(self.powers < 0):
            raise ConfigurationError("eigenwave powers must be non-negative")
        if self.powers.sum() > self.total_power + 1e-9:
            raise ConfigurationError("allocated power exceeds the budget")

    @property
    def active_mask(self) -> np.ndarray:
        return self.powers > 0


def equal_power(n_eigenwaves: int, total_power: float, noise_power: float,
                active_mask: np.ndarray | None = None) -> PowerAllocation:
    """Split the budget evenly over the active eigenwaves."""
    if active_mask is None:
        active_mask = np.ones(n_eigenwaves, dtype=bool)
    n_active = int(active_mask.sum())
    if n_active == 0:
        raise NoCapacityError("no active eigenwaves to allocate power to")
    powers = np.zeros(n_eigenwaves)
    powers[active_mask] = total_power / n_active
    return PowerAllocation(powers, total_power, noise_power)


def waterfill(lambdas: np.ndarray, n0: float, p: float) -> PowerAllocation:
    """Water-filling over parallel eigenchannels: ``P_n = (mu - N0/lambda_n)+``.

    Solves the active set exactly: channels are dropped worst-first until
    the water level keeps every remaining power positive, then ``mu`` makes
    the powers sum to the budget.
    """
    lambdas = np.asarray(lambdas, dtype=float)
    if p <= 0 or n0 <= 0:
        raise ConfigurationError("waterfill needs positive total power and noise")
    if np.any(lambdas < 0):
        raise ConfigurationError("eigenvalues must be non-negative")
    if not np.any(lambdas > 0):
        raise NoCapacityError("all eigenvalues are zero; channel carries no power")
    powers = np.zeros_like(lambdas)
    candidates = np.flatnonzero(lambdas > 0)
    inv = n0 / lambdas[candidates]
    order = candidates[np.argsort(inv, kind="stable")]
    inv_sorted = n0 / lambdas[order]
    for k in range(order.size, 0, -1):
        mu = (p + inv_sorted[:k].sum()) / k
        if mu > inv_sorted[k - 1]:
            active = order[:k]
            powers[active] = mu - n0 / lambdas[active]
            break
    return PowerAllocation(powers, p, n0)


@dataclass(frozen=True)
class MemFrame:
    """One modulated frame: symbols, the synthesized grid signal, and mask."""

    data_symbols: np.ndarray
    tx_signal: np.ndarray
    active_mask: np.ndarray


def mem_modulate(e: EigenwaveSet, symbols: np.ndarray,
                 alloc: PowerAllocation) -> MemFrame:
    """Superpose ``sqrt(P_n) * s_n`` onto the active input-side eigenwaves.

    ``symbols`` holds one entry per active eigenwave, in eigenwave order;
    inactive eigenwaves carry exactly zero.
    """
    if alloc.powers.shape != (len(e),) :
        raise ConfigurationError(
            f"allocation covers {alloc.powers.size} eigenwaves, set has {len(e)}"
        )
    active = alloc.active_mask
    symbols = np.asarray(symbols, dtype=complex)
    if symbols.shape != (int(active.sum()),):
        raise ConfigurationError(
            f"expected {int(active.sum())} symbols for the active eigenwaves, "
            f"got {symbols.shape}"
        )
    s_full = np.zeros(len(e), dtype=complex)
    s_full[active] = symbols
    tx = e.phis @ (np.sqrt(alloc.powers) * s_full)
    return MemFrame(s_full, tx, active)


@dataclass(frozen=True)
class DemodResult:
    """Matched-filter outputs: raw ``psi_n^H r`` and per-eigenwave equalized."""

    raw: np.ndarray
    equalized: np.ndarray
    active_mask: np.ndarray

    def active_symbols(self) -> np.ndarray:
        return self.equalized[self.active_mask]


def mem_demodulate(e: EigenwaveSet, r: np.ndarray,
                   alloc: PowerAllocation) -> DemodResult:
    """Project the received grid signal onto the output-side eigenwaves.

    ``raw[n] = psi_n^H r``; the equalized symbol divides out the known
    ``sigma_n * sqrt(P_n)`` scale. Eigenwaves that are inactive or have
    zero gain equalize to 0.
    """
    r = np.asarray(r, dtype=complex)
    if r.shape != (e.psis.shape[0],):
        raise ConfigurationError(
            f"received signal length {r.shape} does not match grid "
            f"dimension {e.psis.shape[0]}"
        )
    raw = e.psis.conj().T @ r
    scale = e.sigmas * np.sqrt(alloc.powers)
    ok = alloc.active_mask & (scale > 0)
    equalized = np.zeros_like(raw)
    equalized[ok] = raw[ok] / scale[ok]
    return DemodResult(raw, equalized, alloc.active_mask)


def zp_select(e: EigenwaveSet, zp_fraction: float) -> np.ndarray:
    """Mask deactivating the ``ceil(fraction * N)`` weakest eigenwaves.

    Ties on sigma deactivate the higher index first.
    """
    if not 0 <= zp_fraction < 1:
        raise ConfigurationError("zp_fraction must lie in [0, 1)")
    n = len(e)
    n_off = math.ceil(zp_fraction * n)
    mask = np.ones(n, dtype=bool)
    if n_off:
        # sort by (sigma asc, index desc); the first n_off entries drop out
        order = np.lexsort((-np.arange(n), e.sigmas))
        mask[order[:n_off]] = False
    return mask
