"""File formats and atomic writes.

Kernel files ("EIGK"): magic, version u16, domain tag u8, then the output
and input grids as five little-endian u32 each (n_users_rx, n_users_tx,
n_symbols, n_subcarriers, subcarrier spacing in integer Hz), then the
kernel elements as interleaved little-endian f64 (re, im), row-major.

Eigenwave files ("EIGW"): magic, version u16, D_out u32, D_in u32, N u32,
sigma as f64[N], then Psi and Phi column-major as interleaved complex f64.
Grids are not part of this format; loading synthesizes a flat single-user
grid unless explicit grids are supplied.
"""

from __future__ import annotations

import os
import struct
import tempfile

import numpy as np

from .errors import ConfigurationError
from .hogmt import EigenwaveSet
from .kernel import Domain, FrameGrid, KernelMatrix

KERNEL_MAGIC = b"EIGK"
EIGENWAVE_MAGIC = b"EIGW"
FORMAT_VERSION = 1

_KERNEL_HEADER = struct.Struct("<4sHB10I")
_EIGENWAVE_HEADER = struct.Struct("<4sH3I")


def atomic_write_bytes(path: str, payload: bytes) -> None:
    """Write via a temp file in the target directory, then rename."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-eigenwave-")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path: str, text: str) -> None:
    atomic_write_bytes(path, text.encode())


def _grid_fields(grid: FrameGrid) -> tuple[int, ...]:
    spacing = round(grid.subcarrier_spacing_hz)
    if spacing < 1 or abs(spacing - grid.subcarrier_spacing_hz) > 1e-6:
        raise ConfigurationError(
            "kernel files store subcarrier spacing as integer Hz; "
            f"got {grid.subcarrier_spacing_hz!r}"
        )
    return (grid.n_users_rx, grid.n_users_tx, grid.n_symbols,
            grid.n_subcarriers, spacing)


def _complex_bytes(arr: np.ndarray, order: str) -> bytes:
    flat = np.asarray(arr, dtype=np.complex128).ravel(order=order)
    return flat.astype("<c16", copy=False).tobytes()


def kernel_bytes(k: KernelMatrix) -> bytes:
    header = _KERNEL_HEADER.pack(
        KERNEL_MAGIC, FORMAT_VERSION, k.domain.value,
        *_grid_fields(k.grid_out), *_grid_fields(k.grid_in),
    )
    return header + _complex_bytes(k.data, order="C")


def write_kernel(path: str, k: KernelMatrix) -> None:
    atomic_write_bytes(path, kernel_bytes(k))


def read_kernel(path: str) -> KernelMatrix:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _KERNEL_HEADER.size or raw[:4] != KERNEL_MAGIC:
        raise ConfigurationError(f"{path}: not a kernel file (bad magic)")
    magic, version, domain, *fields = _KERNEL_HEADER.unpack_from(raw)
    if version != FORMAT_VERSION:
        raise ConfigurationError(f"{path}: unsupported kernel version {version}")
    grid_out = FrameGrid(fields[0], fields[1], fields[2], fields[3],
                         float(fields[4]))
    grid_in = FrameGrid(fields[5], fields[6], fields[7], fields[8],
                        float(fields[9]))
    n = grid_out.dim_rx * grid_in.dim_tx
    if len(raw) < _KERNEL_HEADER.size + 16 * n:
        raise ConfigurationError(f"{path}: truncated kernel payload")
    data = np.frombuffer(raw, dtype="<c16", count=n,
                         offset=_KERNEL_HEADER.size)
    data = data.astype(np.complex128).reshape(grid_out.dim_rx, grid_in.dim_tx)
    return KernelMatrix(data, grid_out, grid_in, Domain(domain))


def eigenwave_bytes(e: EigenwaveSet) -> bytes:
    d_out, n = e.psis.shape
    d_in = e.phis.shape[0]
    header = _EIGENWAVE_HEADER.pack(EIGENWAVE_MAGIC, FORMAT_VERSION,
                                    d_out, d_in, n)
    return (header
            + np.asarray(e.sigmas, dtype="<f8").tobytes()
            + _complex_bytes(e.psis, order="F")
            + _complex_bytes(e.phis, order="F"))


def write_eigenwaves(path: str, e: EigenwaveSet) -> None:
    atomic_write_bytes(path, eigenwave_bytes(e))


def read_eigenwaves(path: str, grid_out: FrameGrid | None = None,
                    grid_in: FrameGrid | None = None,
                    domain: Domain = Domain.TIME_FREQUENCY) -> EigenwaveSet:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _EIGENWAVE_HEADER.size or raw[:4] != EIGENWAVE_MAGIC:
        raise ConfigurationError(f"{path}: not an eigenwave file (bad magic)")
    magic, version, d_out, d_in, n = _EIGENWAVE_HEADER.unpack_from(raw)
    if version != FORMAT_VERSION:
        raise ConfigurationError(f"{path}: unsupported eigenwave version {version}")
    expect = _EIGENWAVE_HEADER.size + 8 * n + 16 * n * (d_out + d_in)
    if len(raw) < expect:
        raise ConfigurationError(f"{path}: truncated eigenwave payload")
    offset = _EIGENWAVE_HEADER.size
    sigmas = np.frombuffer(raw, dtype="<f8", count=n, offset=offset).astype(float)
    offset += 8 * n
    psis = np.frombuffer(raw, dtype="<c16", count=d_out * n, offset=offset)
    offset += 16 * d_out * n
    phis = np.frombuffer(raw, dtype="<c16", count=d_in * n, offset=offset)
    psis = psis.astype(np.complex128).reshape(d_out, n, order="F")
    phis = phis.astype(np.complex128).reshape(d_in, n, order="F")
    if grid_out is None:
        grid_out = FrameGrid(1, 1, 1, d_out, 1.0)
    if grid_in is None:
        grid_in = FrameGrid(1, 1, 1, d_in, 1.0)
    return EigenwaveSet(sigmas, psis, phis, grid_out, grid_in, domain)


def array_bytes(arr: np.ndarray) -> bytes:
    """Raw dump in the kernel element format (interleaved complex f64)."""
    return _complex_bytes(np.asarray(arr), order="C")
