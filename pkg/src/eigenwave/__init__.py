"""Eigenwave multiplexing over non-stationary channels, at link-simulation scale.

The pipeline: generate a time-varying multipath channel, form its exact
discrete kernel on the time-frequency grid, decompose the kernel into
jointly orthogonal eigenwaves, and use those eigenwaves as modulation
subcarriers.  OTFS and single-tap OFDM baselines, channel statistics, and a
seeded Monte Carlo sweep engine round out the toolkit.
"""

from .channel import (
    ChannelConfig,
    ChannelRealization,
    Path,
    PathSet,
    draw_paths,
    generate,
    realize,
    time_domain_matrix,
)
from .errors import ConfigurationError, NoCapacityError, NumericError
from .hogmt import EigenwaveSet, crosstalk, decompose, eigenwave_projection, reconstruct
from .kernel import (
    Domain,
    FrameGrid,
    KernelMatrix,
    LocalResponse,
    kernel_to_ldr,
    ldr_matrix,
    ldr_to_kernel,
    mu_kernel,
    ofdm_operator,
    tf_kernel_from_time,
)
from .modem import (
    ConstellationMap,
    MemFrame,
    PowerAllocation,
    constellation,
    demap,
    equal_power,
    map_bits,
    mem_demodulate,
    mem_modulate,
    waterfill,
    zp_select,
)
from .otfs import DelayDopplerGrid, isfft, otfs_demodulate_tfst, otfs_modulate, sfft
from .sim import ModemConfig, SimConfig, SimReport, awgn, run_frame, run_sweep
from .stats import average_capacity, channel_stats, eigen_ccf, eigen_lsf, eigen_scattering, total_gain

__version__ = "0.1.0"
