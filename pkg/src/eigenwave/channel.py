"""Non-stationary multipath channel generation.

A channel realization is a set of discrete taps ``h[m, l]`` (time sample m,
integer delay tap l).  Each path contributes a fixed complex gain rotating
at its Doppler frequency; at every stationarity-interval boundary the
Doppler of every path is re-drawn from the Jakes-style distribution (or, if
``redraw_doppler`` is off, held and optionally drifted), with tap phase kept
continuous across boundaries.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigurationError
from .kernel import FrameGrid

SPEED_OF_LIGHT = 299792458.0

# Extended Vehicular A power-delay profile: (delay ns, power dB).
EVA_PROFILE = (
    (0.0, 0.0),
    (30.0, -1.5),
    (150.0, -1.4),
    (310.0, -3.6),
    (370.0, -0.6),
    (710.0, -9.1),
    (1090.0, -7.0),
    (1730.0, -12.0),
    (2510.0, -16.9),
)

PROFILES = ("eva", "single_path", "two_path", "custom")


@dataclass(frozen=True)
class Path:
    gain: complex
    delay_s: float
    doppler_hz: float
    doppler_drift_hz_per_s: float = 0.0


@dataclass(frozen=True)
class PathSet:
    """Multipath rays with the carrier and receiver speed they were drawn for."""

    paths: tuple[Path, ...]
    carrier_hz: float
    speed_mps: float

    def __post_init__(self):
        if len(self.paths) == 0:
            raise ConfigurationError("a PathSet needs at least one path")
        if all(p.gain == 0 for p in self.paths):
            raise ConfigurationError("path gains must not all be zero")
        nu_bound = self.carrier_hz * self.speed_mps / SPEED_OF_LIGHT
        for p in self.paths:
            if p.delay_s < 0:
                raise ConfigurationError("path delays must be non-negative")
            if abs(p.doppler_hz) > nu_bound * (1 + 1e-12) + 1e-12:
                raise ConfigurationError(
                    f"|doppler| {abs(p.doppler_hz):g} Hz exceeds f_c*v/c = {nu_bound:g} Hz"
                )

    @property
    def max_doppler_hz(self) -> float:
        return self.carrier_hz * self.speed_mps / SPEED_OF_LIGHT


@dataclass(frozen=True)
class ChannelConfig:
    profile: str
    bandwidth_hz: float
    carrier_hz: float
    n_subcarriers: int
    n_symbols: int
    subcarrier_spacing_hz: float
    speed_range_mps: tuple[float, float]
    stationarity_interval_samples: int
    seed: int
    custom_paths: PathSet | None = None
    redraw_doppler: bool = True

    def __post_init__(self):
        if self.profile not in PROFILES:
            raise ConfigurationError(
                f"unknown channel profile {self.profile!r}; expected one of {PROFILES}"
            )
        if self.profile == "custom" and self.custom_paths is None:
            raise ConfigurationError("profile 'custom' requires custom_paths")
        if self.n_subcarriers < 1 or self.n_symbols < 1:
            raise ConfigurationError("grid counts must be >= 1")
        expected_bw = self.n_subcarriers * self.subcarrier_spacing_hz
        if not math.isclose(self.bandwidth_hz, expected_bw, rel_tol=1e-9):
            raise ConfigurationError(
                f"bandwidth_hz {self.bandwidth_hz:g} != n_subcarriers * "
                f"subcarrier_spacing_hz = {expected_bw:g}"
            )
        n = self.n_subcarriers * self.n_symbols
        if not 1 <= self.stationarity_interval_samples <= n:
            raise ConfigurationError(
                f"stationarity_interval_samples must be in [1, {n}]"
            )
        lo, hi = self.speed_range_mps
        if lo < 0 or hi < lo:
            raise ConfigurationError("speed_range_mps must satisfy 0 <= min <= max")

    @property
    def n_samples(self) -> int:
        return self.n_subcarriers * self.n_symbols

    @property
    def sample_rate_hz(self) -> float:
        return self.bandwidth_hz

    def frame_grid(self) -> FrameGrid:
        return FrameGrid(1, 1, self.n_symbols, self.n_subcarriers,
                         self.subcarrier_spacing_hz)


@dataclass(frozen=True)
class ChannelRealization:
    """Per-sample multipath taps h[m, l]; the ground-truth channel."""

    taps: np.ndarray
    sample_rate_hz: float
    meta: ChannelConfig = field(repr=False)

    def __post_init__(self):
        if self.taps.ndim != 2 or self.taps.shape[0] != self.meta.n_samples:
            raise ConfigurationError(
                f"taps shape {self.taps.shape} does not match "
                f"{self.meta.n_samples} frame samples"
            )


def _profile_rays(cfg: ChannelConfig) -> tuple[tuple[float, float], ...]:
    """(delay s, amplitude) pairs, normalized to unit total power."""
    if cfg.profile == "eva":
        pairs = [(d * 1e-9, 10.0 ** (p / 20.0)) for d, p in EVA_PROFILE]
    elif cfg.profile == "single_path":
        pairs = [(0.0, 1.0)]
    else:  # two_path
        pairs = [(0.0, 1.0), (2.0 / cfg.bandwidth_hz, 10.0 ** (-3.0 / 20.0))]
    total = math.sqrt(sum(a * a for _, a in pairs))
    return tuple((d, a / total) for d, a in pairs)


def _jakes_doppler(nu_max: float, rng: np.random.Generator) -> float:
    return nu_max * math.cos(rng.uniform(0.0, 2.0 * math.pi))


def draw_paths(cfg: ChannelConfig, rng: np.random.Generator) -> PathSet:
    """Draw one multipath realization for the configured profile.

    Gains follow the profile's power-delay constants with uniform random
    phase (the single-path profile keeps its gain at exactly 1+0j); per-path
    Doppler is ``nu_max * cos(theta)`` with theta uniform and
    ``nu_max = f_c * v / c`` for one speed v uniform on the speed range.
    """
    v = float(rng.uniform(*cfg.speed_range_mps))
    nu_max = cfg.carrier_hz * v / SPEED_OF_LIGHT
    if cfg.profile == "custom":
        return cfg.custom_paths
    frame_s = cfg.n_samples / cfg.sample_rate_hz
    paths = []
    for delay_s, amp in _profile_rays(cfg):
        if delay_s >= frame_s:
            raise ConfigurationError(
                f"path delay {delay_s:g} s not below frame duration {frame_s:g} s"
            )
        if cfg.profile == "single_path":
            gain = complex(amp)
        else:
            gain = amp * np.exp(1j * rng.uniform(0.0, 2.0 * math.pi))
        paths.append(Path(gain, delay_s, _jakes_doppler(nu_max, rng)))
    return PathSet(tuple(paths), cfg.carrier_hz, v)


def realize(paths: PathSet, cfg: ChannelConfig,
            rng: np.random.Generator) -> ChannelRealization:
    """Roll the paths forward over one frame into discrete taps.

    ``h[m, l] = sum_p a_p * exp(j * phi_p(m))`` with ``l = round(tau_p * f_s)``
    and ``phi_p`` accumulated from the per-sample Doppler, so phase stays
    continuous when the Doppler is re-drawn at interval boundaries.
    """
    n = cfg.n_samples
    fs = cfg.sample_rate_hz
    ts = 1.0 / fs
    tap_idx = [round(p.delay_s * fs) for p in paths.paths]
    if max(tap_idx) >= n:
        raise ConfigurationError(
            f"rounded tap index {max(tap_idx)} reaches past the frame length {n}"
        )
    interval = cfg.stationarity_interval_samples
    n_intervals = -(-n // interval)
    nu_max = paths.max_doppler_hz
    taps = np.zeros((n, max(tap_idx) + 1), dtype=complex)
    m = np.arange(n)
    for p, l in zip(paths.paths, tap_idx):
        nu = np.empty(n)
        nu[:interval] = p.doppler_hz
        if cfg.redraw_doppler:
            for k in range(1, n_intervals):
                nu[k * interval : (k + 1) * interval] = _jakes_doppler(nu_max, rng)
        else:
            nu[interval:] = p.doppler_hz
        nu += p.doppler_drift_hz_per_s * m * ts
        phase = 2.0 * math.pi * ts * (np.cumsum(nu) - nu[0])
        taps[:, l] += p.gain * np.exp(1j * phase)
    return ChannelRealization(taps, fs, cfg)


def generate(cfg: ChannelConfig) -> ChannelRealization:
    """Draw and realize one frame from the config's own seed.

    Identical (cfg, seed) produce bit-identical realizations.
    """
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed))
    return realize(draw_paths(cfg, rng), cfg, rng)


def time_domain_matrix(ch: ChannelRealization) -> np.ndarray:
    """Lower-triangular banded matrix of the linear (not cyclic) convolution.

    ``H[m, m'] = h[m, m - m']`` when the lag is a populated tap, else 0.
    """
    n, n_taps = ch.taps.shape
    h = np.zeros((n, n), dtype=complex)
    for l in range(n_taps):
        rows = np.arange(l, n)
        h[rows, rows - l] = ch.taps[rows, l]
    return h


def channel_b_variant(cfg: ChannelConfig) -> ChannelConfig:
    """Same channel with the stationarity interval shrunk to one sample."""
    return replace(cfg, stationarity_interval_samples=1)


def channel_a_variant(cfg: ChannelConfig) -> ChannelConfig:
    """Same channel with the stationarity interval set to one symbol."""
    return replace(cfg, stationarity_interval_samples=cfg.n_subcarriers)
