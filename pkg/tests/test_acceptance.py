"""Acceptance suite: one test per criterion, each printing a PASS line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the per-criterion
lines.  Stated tolerances are asserted directly; Monte Carlo criteria use
fixed seeds so the suite is deterministic.
"""

import math
import time

import numpy as np
import pytest

from eigenwave.channel import ChannelConfig, generate, time_domain_matrix
from eigenwave.hogmt import crosstalk, decompose, eigenwave_projection, reconstruct
from eigenwave.kernel import (
    Domain,
    FrameGrid,
    KernelMatrix,
    cyclic_time_domain_matrix,
    kernel_to_ldr,
    ldr_matrix,
    mu_kernel,
    ofdm_operator,
    tf_kernel_from_time,
)
from eigenwave.modem import (
    constellation,
    demap,
    equal_power,
    map_bits,
    mem_demodulate,
    mem_modulate,
    waterfill,
)
from eigenwave.otfs import DelayDopplerGrid, otfs_demodulate_tfst, otfs_modulate
from eigenwave.sim import ModemConfig, SimConfig, demod_power_relation, run_sweep
from eigenwave.stats import average_capacity, eigen_ccf, eigen_lsf, eigen_scattering

KMH = 1000.0 / 3600.0

# Desk-scale stand-ins for the reference channels.  The 1 kHz spacing keeps
# the Doppler-to-spacing ratio high enough that per-sample non-stationarity
# is visible at 16x4; the 15 kHz / 64x10 variant mirrors the full-scale
# parameter table.
def channel_b_cfg(seed):
    return ChannelConfig("eva", 16e3, 5e9, 16, 4, 1e3,
                         (100 * KMH, 150 * KMH), 1, seed)


def channel_cfg_full(n_subcarriers, n_symbols, interval, seed):
    return ChannelConfig("eva", n_subcarriers * 15e3, 5e9, n_subcarriers,
                         n_symbols, 15e3, (100 * KMH, 150 * KMH), interval,
                         seed)


def random_kernel(d, seed):
    rng = np.random.default_rng(seed)
    g = FrameGrid(1, 1, 1, d, 1.0)
    data = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    return KernelMatrix(data, g, g, Domain.TIME_FREQUENCY)


def channel_b_kernel(seed):
    cfg = channel_b_cfg(seed)
    return tf_kernel_from_time(time_domain_matrix(generate(cfg)),
                               cfg.frame_grid())


def wilson_interval(errors, trials, z=1.96):
    if trials == 0:
        return 0.0, 1.0
    p = errors / trials
    denom = 1 + z**2 / trials
    center = (p + z**2 / (2 * trials)) / denom
    half = z * math.sqrt(p * (1 - p) / trials
                         + z**2 / (4 * trials**2)) / denom
    return max(0.0, center - half), min(1.0, center + half)


@pytest.fixture(scope="module")
def channel_b_sweep():
    """Shared Channel-B sweep: >= 2e5 bits per (scheme, snr) point."""
    cfg = SimConfig(
        channel=channel_b_cfg(seed=2024),
        modem=ModemConfig("qpsk", zp_fraction=1 / 8),
        schemes=("mem", "zpmem", "otfs-tfst"),
        snr_db=(20.0, 25.0, 30.0),
        frames_per_point=1600,
        master_seed=31,
    )
    start = time.monotonic()
    report = run_sweep(cfg)
    return report, time.monotonic() - start


def test_criterion_01_decomposition_exactness():
    start = time.monotonic()
    worst_recon = worst_ortho = worst_xtalk = 0.0
    for d in (4, 16, 64, 256):
        for rep in range(50):
            k = random_kernel(d, seed=1000 * d + rep)
            e = decompose(k)
            worst_recon = max(worst_recon,
                              np.linalg.norm(reconstruct(e).data - k.data)
                              / k.frobenius())
            worst_ortho = max(worst_ortho, e.orthonormality_defect())
            c = crosstalk(e, k)
            off = np.abs(c - np.diag(np.diag(c))).max()
            worst_xtalk = max(worst_xtalk, off / e.sigmas[0])
    elapsed = time.monotonic() - start
    assert worst_recon < 1e-10
    assert worst_ortho < 1e-10
    assert worst_xtalk < 1e-9
    assert elapsed < 60.0
    print(f"\nACCEPTANCE 1 PASS: 200 kernels, recon<{worst_recon:.2e}, "
          f"ortho<{worst_ortho:.2e}, xtalk<{worst_xtalk:.2e}, {elapsed:.1f}s")


def test_criterion_02_interference_free_loopback():
    worst_sym_err = 0.0
    total_bit_errors = 0
    for seed in range(100):
        k = channel_b_kernel(seed)
        e = decompose(k)
        for name in ("qpsk", "qam16", "qam64"):
            cmap = constellation(name)
            alloc = equal_power(len(e), float(len(e)), 1.0)
            rng = np.random.default_rng(7000 + seed)
            bits = rng.integers(0, 2, len(e) * cmap.bits_per_symbol)
            frame = mem_modulate(e, map_bits(bits, cmap), alloc)
            r_tf = k.data @ frame.tx_signal
            demod = mem_demodulate(e, r_tf, alloc)
            est = demod.active_symbols()
            ref = frame.data_symbols[alloc.active_mask]
            worst_sym_err = max(worst_sym_err, np.abs(est - ref).max())
            total_bit_errors += int(np.sum(bits != demap(est, cmap)))
    assert total_bit_errors == 0
    assert worst_sym_err < 1e-9
    print(f"\nACCEPTANCE 2 PASS: 100 kernels x 3 constellations, 0 bit "
          f"errors, symbol err<{worst_sym_err:.2e}")


def test_criterion_03_total_gain_identity():
    kernels = [random_kernel(16, seed=0), random_kernel(64, seed=1)]
    for n_sc, n_sym in ((16, 4), (64, 10)):
        for interval in (n_sc, 1):  # one symbol (A) and one sample (B)
            cfg = channel_cfg_full(n_sc, n_sym, interval, seed=interval)
            kernels.append(tf_kernel_from_time(
                time_domain_matrix(generate(cfg)), cfg.frame_grid()))
    worst = 0.0
    for k in kernels:
        e = decompose(k)
        fro2 = k.frobenius() ** 2
        worst = max(worst, abs(fro2 - float(np.sum(e.lambdas))) / fro2)
    assert worst < 1e-8
    print(f"\nACCEPTANCE 3 PASS: gain identity on {len(kernels)} kernels, "
          f"rel err<{worst:.2e}")


def test_criterion_04_projection_lemma():
    rng = np.random.default_rng(4)
    worst = 0.0
    for d in (2, 4, 8, 16):
        e = decompose(random_kernel(d, seed=40 + d))
        for _ in range(100):
            a = rng.standard_normal(d) + 1j * rng.standard_normal(d)
            b = rng.standard_normal(d) + 1j * rng.standard_normal(d)
            proj = eigenwave_projection(e, a, b)
            brute = 0j
            for n in range(d):
                for m in range(d):
                    brute += a[n] * np.conj(b[m]) * np.sum(
                        e.phis[:, n] * np.conj(e.phis[:, m]))
            target = np.sum(a * np.conj(b))
            worst = max(worst, abs(proj - brute), abs(proj - target))
    assert worst < 1e-10
    print(f"\nACCEPTANCE 4 PASS: projection lemma, 400 draws, err<{worst:.2e}")


def test_criterion_05_waterfilling():
    import itertools

    def oracle(lambdas, n0, p):
        n = len(lambdas)
        best_rate, best = -1.0, None
        for r in range(1, n + 1):
            for subset in itertools.combinations(range(n), r):
                if any(lambdas[i] == 0 for i in subset):
                    continue
                inv = [n0 / lambdas[i] for i in subset]
                mu = (p + sum(inv)) / r
                powers = np.zeros(n)
                for i, w in zip(subset, inv):
                    powers[i] = mu - w
                if np.any(powers[list(subset)] < -1e-12):
                    continue
                powers = np.maximum(powers, 0)
                rate = np.sum(np.log2(1 + powers * lambdas / n0))
                if rate > best_rate:
                    best_rate, best = rate, powers
        return best

    rng = np.random.default_rng(5)
    checked = 0
    while checked < 1000:
        n = rng.integers(1, 7)
        lam = rng.uniform(0, 5, n)
        if rng.uniform() < 0.2:
            lam[rng.integers(0, n)] = 0.0
        if not np.any(lam > 0):
            continue
        n0, p = rng.uniform(0.05, 2.0), rng.uniform(0.05, 6.0)
        assert np.allclose(waterfill(lam, n0, p).powers, oracle(lam, n0, p),
                           atol=1e-9)
        checked += 1

    alloc = waterfill(np.array([4.0, 1.0]), 1.0, 2.0)
    assert np.abs(alloc.powers - [1.375, 0.625]).max() < 1e-9
    cap, _ = average_capacity(np.array([4.0, 1.0]), 1.0, 2.0, 1.0)
    assert abs(cap - 3.40088) < 1e-5
    assert abs(cap - (np.log2(6.5) + np.log2(1.625))) < 1e-9
    print(f"\nACCEPTANCE 5 PASS: waterfilling matches enumeration on "
          f"{checked} instances; hand example exact")


def test_criterion_06_demod_power_relation():
    k = channel_b_kernel(seed=99)
    n0 = 0.1  # Es = 1 at 10 dB
    alloc = equal_power(64, 64.0, n0)
    rel = demod_power_relation(k, alloc, constellation("qpsk"), n0,
                               n_frames=10_000,
                               rng=np.random.default_rng(7))
    dev = np.abs(rel.empirical - rel.predicted) / rel.stderr
    assert rel.within(3.0), f"max deviation {dev.max():.2f} standard errors"
    print(f"\nACCEPTANCE 6 PASS: per-eigenwave power within 3 SE "
          f"(max {dev.max():.2f}); summed form reported "
          f"{rel.summed_empirical:.1f} vs claim {rel.summed_claim:.1f}")


def test_criterion_07_stationary_degenerate_case():
    grid = FrameGrid(1, 1, 4, 16, 15e3)
    taps = np.array([1.0, 0.45 + 0.3j, 0.2 - 0.1j])
    h = cyclic_time_domain_matrix(taps, grid)
    k = tf_kernel_from_time(h, grid)
    e = decompose(k)
    freq = np.fft.fft(taps, n=16)
    expect = np.sort(np.abs(np.tile(freq, 4)))[::-1]
    assert np.abs(e.sigmas - expect).max() < 1e-9

    from eigenwave.otfs import single_tap_equalize

    a = ofdm_operator(grid)
    cmap = constellation("qpsk")
    results = {}
    rng = np.random.default_rng(77)
    for snr in (5.0, 10.0, 15.0):
        n0 = 10 ** (-snr / 10)
        alloc = equal_power(64, 64.0, n0)
        errs = {"mem": 0, "ofdm": 0}
        bits_total = 0
        while bits_total < 100_000:
            bits = rng.integers(0, 2, 128)
            s = map_bits(bits, cmap)
            frame = mem_modulate(e, s, alloc)
            noise = math.sqrt(n0 / 2) * (rng.standard_normal(64)
                                         + 1j * rng.standard_normal(64))
            r = a.conj().T @ (h @ (a @ frame.tx_signal)) + noise
            est = mem_demodulate(e, r, alloc).active_symbols()
            errs["mem"] += int(np.sum(bits != demap(est, cmap)))

            noise2 = math.sqrt(n0 / 2) * (rng.standard_normal(64)
                                          + 1j * rng.standard_normal(64))
            y = a.conj().T @ (h @ (a @ s)) + noise2
            est2 = single_tap_equalize(y, k)
            errs["ofdm"] += int(np.sum(bits != demap(est2, cmap)))
            bits_total += 128
        results[snr] = (errs, bits_total)
        lo_m, hi_m = wilson_interval(errs["mem"], bits_total)
        lo_o, hi_o = wilson_interval(errs["ofdm"], bits_total)
        assert lo_m <= hi_o and lo_o <= hi_m, (
            f"BER intervals separate at {snr} dB: mem [{lo_m:.2e},{hi_m:.2e}]"
            f" vs ofdm [{lo_o:.2e},{hi_o:.2e}]")
    summary = ", ".join(
        f"{snr}dB mem={e_['mem'] / n:.2e}/ofdm={e_['ofdm'] / n:.2e}"
        for snr, (e_, n) in results.items())
    print(f"\nACCEPTANCE 7 PASS: LTI singular values match |H(f)|; "
          f"BER overlap at {summary}")


def test_criterion_08_nonstationary_ordering(channel_b_sweep):
    report, elapsed = channel_b_sweep

    # (a) noiseless residual: TFST strictly interferes, MEM does not
    cfg = channel_b_cfg(seed=321)
    grid = cfg.frame_grid()
    h = time_domain_matrix(generate(cfg))
    k = tf_kernel_from_time(h, grid)
    rng = np.random.default_rng(8)
    syms = (rng.standard_normal((16, 4)) + 1j * rng.standard_normal((16, 4)))
    dd = DelayDopplerGrid(syms / np.linalg.norm(syms) * 8, grid)
    est = otfs_demodulate_tfst(h @ otfs_modulate(dd, grid), k, grid)
    tfst_residual = float(np.sum(np.abs(est.symbols - dd.symbols) ** 2))

    e = decompose(k)
    alloc = equal_power(64, 64.0, 1.0)
    s = rng.standard_normal(64) + 1j * rng.standard_normal(64)
    frame = mem_modulate(e, s, alloc)
    a = ofdm_operator(grid)
    r = a.conj().T @ (h @ (a @ frame.tx_signal))
    mem_est = mem_demodulate(e, r, alloc).active_symbols()
    mem_residual = float(np.sum(np.abs(mem_est - s) ** 2))
    assert tfst_residual > 1e-6
    # interference-free up to floating point: residual power at the scale of
    # (1e-9 per symbol)^2, i.e. zero in exact arithmetic
    assert mem_residual < 1e-18 * np.sum(np.abs(s) ** 2)

    # (b) MEM beats OTFS-TFST at every SNR >= 20 dB, non-overlapping 95% CIs
    rows = {(r.scheme, r.snr_db): r for r in report.rows}
    for snr in (20.0, 25.0, 30.0):
        mem = rows[("mem", snr)]
        otfs = rows[("otfs-tfst", snr)]
        assert mem.bits_sent >= 200_000 and otfs.bits_sent >= 200_000
        _, mem_hi = wilson_interval(mem.bit_errors, mem.bits_sent)
        otfs_lo, _ = wilson_interval(otfs.bit_errors, otfs.bits_sent)
        assert mem.ber < otfs.ber
        assert mem_hi < otfs_lo, f"intervals touch at {snr} dB"
    assert elapsed < 600.0
    print(f"\nACCEPTANCE 8 PASS: TFST residual {tfst_residual:.3e} > 0, MEM "
          f"residual {mem_residual:.3e}; MEM < OTFS at 20/25/30 dB "
          f"(sweep {elapsed:.0f}s)")


def test_criterion_09_zero_padding_tradeoff(channel_b_sweep):
    report, _ = channel_b_sweep
    rows = {(r.scheme, r.snr_db): r for r in report.rows}
    mem, zp = rows[("mem", 25.0)], rows[("zpmem", 25.0)]
    _, zp_hi = wilson_interval(zp.bit_errors, zp.bits_sent)
    _, mem_hi = wilson_interval(mem.bit_errors, mem.bits_sent)
    assert zp.ber <= mem.ber
    assert zp_hi <= mem_hi
    assert mem.goodput_bps > zp.goodput_bps

    # noiseless rate accounting is exactly 8:7
    cfg = SimConfig(channel=channel_b_cfg(seed=55),
                    modem=ModemConfig("qpsk", zp_fraction=1 / 8),
                    schemes=("mem", "zpmem"), snr_db=(math.inf,),
                    frames_per_point=2, master_seed=1)
    clean = run_sweep(cfg)
    m, z = clean.rows
    assert m.bit_errors == 0 and z.bit_errors == 0
    assert m.bits_sent * 7 == z.bits_sent * 8
    assert m.goodput_bps / z.goodput_bps == pytest.approx(8 / 7, rel=1e-12)
    print(f"\nACCEPTANCE 9 PASS: at 25 dB zp ber {zp.ber:.2e} <= mem "
          f"{mem.ber:.2e}; goodput {mem.goodput_bps:.0f} > "
          f"{zp.goodput_bps:.0f}; noiseless ratio exactly 8:7")


def test_criterion_10_mu_mimo():
    g1 = channel_b_cfg(0).frame_grid()

    def link(seed):
        return channel_b_kernel(seed)

    # full 2x2 links: loopback exact across users
    km = mu_kernel([[link(10), link(11)], [link(12), link(13)]])
    e = decompose(km)
    cmap = constellation("qam16")
    alloc = equal_power(len(e), float(len(e)), 1.0)
    rng = np.random.default_rng(10)
    bits = rng.integers(0, 2, len(e) * 4)
    frame = mem_modulate(e, map_bits(bits, cmap), alloc)
    demod = mem_demodulate(e, km.data @ frame.tx_signal, alloc)
    est = demod.active_symbols()
    assert np.abs(est - frame.data_symbols[alloc.active_mask]).max() < 1e-9
    assert np.array_equal(demap(est, cmap), bits)

    # block-diagonal links: eigenwaves confine to one user block
    zero = KernelMatrix(np.zeros((64, 64), dtype=complex), g1, g1,
                        Domain.TIME_FREQUENCY)
    kbd = mu_kernel([[link(10), zero], [zero, link(13)]])
    ebd = decompose(kbd)
    worst = 0.0
    for n in range(len(ebd)):
        for vec in (ebd.psis[:, n], ebd.phis[:, n]):
            e_top = float(np.sum(np.abs(vec[:64]) ** 2))
            e_bot = float(np.sum(np.abs(vec[64:]) ** 2))
            worst = max(worst, min(e_top, e_bot))
    assert worst < 1e-10
    print(f"\nACCEPTANCE 10 PASS: 2-user loopback exact; block-diagonal "
          f"cross-user energy<{worst:.2e}")


def test_criterion_11_statistics():
    k = channel_b_kernel(seed=60)
    e = decompose(ldr_matrix(kernel_to_ldr(k)))
    total = float(np.sum(e.lambdas))

    ccf = eigen_ccf(e)
    assert abs(ccf[0, 0, 0, 0] - total) < 1e-10 * total

    lsf = eigen_lsf(e)
    scattering, tf_path_gain = eigen_scattering(e)
    assert np.abs(lsf.sum(axis=(2, 3)) - tf_path_gain).max() < 1e-10
    assert np.abs(lsf.sum(axis=(0, 1)) - scattering).max() < 1e-10

    # rank-2 CCF against the brute-force definition
    g = FrameGrid(1, 1, 3, 2, 1.0)
    rng = np.random.default_rng(11)
    data = rng.standard_normal((6, 6)) + 1j * rng.standard_normal((6, 6))
    full = decompose(KernelMatrix(data, g, g, Domain.DELAY_DOPPLER_LOCAL))
    low = decompose(reconstruct(
        decompose(KernelMatrix(data, g, g, Domain.DELAY_DOPPLER_LOCAL),
                  rank_limit=2)), rank_limit=2)
    got = eigen_ccf(low)
    brute = np.zeros_like(got)
    s, f = 3, 2
    for n in range(2):
        phi, psi = low.phi_folded(n), low.psi_folded(n)
        r_phi = np.zeros((s, f), dtype=complex)
        r_psi = np.zeros((s, f), dtype=complex)
        for dt in range(s):
            for df in range(f):
                for t in range(s):
                    for ff in range(f):
                        r_phi[dt, df] += phi[t, ff] * np.conj(
                            phi[(t - dt) % s, (ff - df) % f])
                        r_psi[dt, df] += psi[t, ff] * np.conj(
                            psi[(t - dt) % s, (ff - df) % f])
        brute += low.lambdas[n] * (np.abs(r_phi)[:, :, None, None]
                                   * np.abs(r_psi)[None, None, :, :])
    assert np.abs(got - brute).max() < 1e-10
    print(f"\nACCEPTANCE 11 PASS: ccf zero lag={ccf[0, 0, 0, 0]:.6g}, lsf "
          f"marginals consistent, rank-2 ccf matches brute force")


def test_criterion_12_determinism(tmp_path):
    from eigenwave.cli import main

    config = tmp_path / "sim.toml"
    config.write_text("""
[channel]
profile = "eva"
bandwidth_hz = 16000.0
carrier_hz = 5.0e9
n_subcarriers = 16
n_symbols = 4
subcarrier_spacing_hz = 1000.0
speed_kmh = [100.0, 150.0]
stationarity_interval = 1
seed = 3

[modem]
constellation = "qam16"

[sim]
schemes = ["mem", "zpmem", "otfs-tfst", "ofdm-singletap"]
snr_db = [10.0, 20.0]
frames_per_point = 5
master_seed = 13
""")
    outputs = []
    for run, threads in enumerate(("1", "4", "1")):
        out = tmp_path / f"run{run}.csv"
        assert main(["simulate", "--config", str(config), "--out", str(out),
                     "--threads", threads]) == 0
        outputs.append(out.read_bytes())
    assert outputs[0] == outputs[1] == outputs[2]
    print("\nACCEPTANCE 12 PASS: byte-identical CSV across runs and "
          "thread counts")
