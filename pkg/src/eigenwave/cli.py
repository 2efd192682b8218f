"""Command-line frontend: decompose, simulate, stats, compare, channel-dump.

Config files are TOML with the per-module key tables documented in the
README; command-line flags override file values.  Exit codes: 0 success,
1 runtime error, 2 usage error.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import os
import sys

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import io as eio
from . import sim, stats
from .channel import ChannelConfig, generate, time_domain_matrix
from .errors import ConfigurationError
from .hogmt import decompose
from .kernel import Domain, KernelMatrix, kernel_to_ldr, tf_kernel_from_time

KMH_TO_MPS = 1000.0 / 3600.0

CHANNEL_PRESETS = ("a", "b", "lti")


def _load_toml(path: str) -> dict:
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigurationError(f"config file not found: {path}")
    except tomllib.TOMLDecodeError as exc:
        raise ConfigurationError(f"unreadable config {path}: {exc}")


def _channel_from_table(table: dict) -> ChannelConfig:
    try:
        speed_kmh = table["speed_kmh"]
        return ChannelConfig(
            profile=table["profile"],
            bandwidth_hz=float(table["bandwidth_hz"]),
            carrier_hz=float(table["carrier_hz"]),
            n_subcarriers=int(table["n_subcarriers"]),
            n_symbols=int(table["n_symbols"]),
            subcarrier_spacing_hz=float(table["subcarrier_spacing_hz"]),
            speed_range_mps=(float(speed_kmh[0]) * KMH_TO_MPS,
                             float(speed_kmh[1]) * KMH_TO_MPS),
            stationarity_interval_samples=int(table["stationarity_interval"]),
            seed=int(table.get("seed", 0)),
            redraw_doppler=bool(table.get("redraw_doppler", True)),
        )
    except KeyError as exc:
        raise ConfigurationError(f"config missing channel key: {exc}")


def _modem_from_table(table: dict) -> sim.ModemConfig:
    return sim.ModemConfig(
        constellation=table.get("constellation", "qpsk"),
        allocation=table.get("allocation", "equal"),
        zp_fraction=float(table.get("zp_fraction", 0.125)),
        total_power=(float(table["total_power"])
                     if "total_power" in table else None),
    )


def _apply_channel_preset(cfg: ChannelConfig, preset: str | None,
                          interval: int | None) -> ChannelConfig:
    if preset is not None and interval is not None:
        raise ConfigurationError(
            "--channel and --interval conflict: the preset fixes "
            "channel.stationarity_interval; give only one"
        )
    if preset is not None:
        if preset == "a":
            return dataclasses.replace(
                cfg, stationarity_interval_samples=cfg.n_subcarriers)
        if preset == "b":
            return dataclasses.replace(cfg, stationarity_interval_samples=1)
        return dataclasses.replace(
            cfg, stationarity_interval_samples=cfg.n_samples,
            speed_range_mps=(0.0, 0.0))
    if interval is not None:
        return dataclasses.replace(cfg, stationarity_interval_samples=interval)
    return cfg


def _sim_config(args) -> sim.SimConfig:
    table = _load_toml(args.config)
    channel = _apply_channel_preset(_channel_from_table(table.get("channel", {})),
                                    args.channel, args.interval)
    sim_table = table.get("sim", {})
    schemes = getattr(args, "schemes", None) or sim_table.get("schemes", ["mem"])
    master_seed = args.seed if args.seed is not None \
        else int(sim_table.get("master_seed", 0))
    frames = args.frames if args.frames is not None \
        else int(sim_table.get("frames_per_point", 1))
    return sim.SimConfig(
        channel=channel,
        modem=_modem_from_table(table.get("modem", {})),
        schemes=tuple(schemes),
        snr_db=tuple(float(v) for v in sim_table.get("snr_db", [10.0])),
        frames_per_point=frames,
        master_seed=master_seed,
        track_demod_power=bool(sim_table.get("track_demod_power", False)),
    )


def _check_parent_dir(path: str) -> None:
    parent = os.path.dirname(os.path.abspath(path))
    if not os.path.isdir(parent):
        raise ConfigurationError(f"output directory does not exist: {parent}")


def _check_input(path: str) -> None:
    if not os.path.isfile(path):
        raise ConfigurationError(f"input file not found: {path}")


def _cmd_decompose(args) -> int:
    _check_input(args.kernel)
    _check_parent_dir(args.out)
    k = eio.read_kernel(args.kernel)
    e = decompose(k, rank_limit=args.rank)
    eio.write_eigenwaves(args.out, e)
    print(f"decomposed {args.kernel} -> {args.out} "
          f"({len(e)} eigenwaves, sigma_1 = {e.sigmas[0] if len(e) else 0:.6g})")
    return 0


def _run_sweep_command(args, force_all_schemes: bool) -> int:
    if force_all_schemes and not getattr(args, "schemes", None):
        args.schemes = list(sim.SCHEMES)
    cfg = _sim_config(args)
    _check_parent_dir(args.out)
    if args.json:
        _check_parent_dir(args.json)
    report = sim.run_sweep(cfg, n_threads=args.threads)
    eio.atomic_write_text(args.out, report.to_csv_text())
    if args.json:
        eio.atomic_write_text(
            args.json, json.dumps(report.to_json_dict(cfg), indent=2) + "\n")
    print(f"wrote {args.out} ({len(report.rows)} rows, "
          f"config_hash={report.config_hash})")
    return 0


def _cmd_simulate(args) -> int:
    return _run_sweep_command(args, force_all_schemes=False)


def _cmd_compare(args) -> int:
    return _run_sweep_command(args, force_all_schemes=True)


def _cmd_stats(args) -> int:
    _check_input(args.kernel)
    if args.out:
        _check_parent_dir(args.out)
    if args.dump:
        if not os.path.isdir(args.dump):
            raise ConfigurationError(f"dump directory does not exist: {args.dump}")
    k = eio.read_kernel(args.kernel)
    e = decompose(k)
    direct, eigen = stats.total_gain(k, e)
    n0 = args.noise
    p = args.power if args.power is not None else float(k.dim_in)
    frame_s = k.grid_in.n_symbols * k.grid_in.symbol_duration_s
    capacity, _ = stats.average_capacity(e.lambdas, n0, p, frame_s)
    with open(args.kernel, "rb") as fh:
        digest = hashlib.sha256(fh.read()).hexdigest()[:16]
    payload = {
        "total_gain": eigen,
        "total_gain_direct": direct,
        "lambda_spectrum": [float(v) for v in e.lambdas],
        "capacity_bits_per_s": capacity,
        "capacity_inputs": {"total_power": p, "noise_power": n0,
                            "frame_duration_s": frame_s},
        "source": os.path.abspath(args.kernel),
        "kernel_sha256": digest,
    }
    if args.dump:
        if k.domain is not Domain.TIME_FREQUENCY:
            raise ConfigurationError(
                "--dump requires a TIME_FREQUENCY kernel to reindex")
        bundle = stats.channel_stats(kernel_to_ldr(k))
        for name in ("scattering", "tf_path_gain", "ccf", "lsf"):
            path = os.path.join(args.dump, f"{name}.bin")
            eio.atomic_write_bytes(path, eio.array_bytes(getattr(bundle, name)))
            payload[f"dump_{name}"] = path
    text = json.dumps(payload, indent=2) + "\n"
    if args.out:
        eio.atomic_write_text(args.out, text)
        print(f"wrote {args.out}")
    else:
        print(text, end="")
    return 0


def _cmd_channel_dump(args) -> int:
    table = _load_toml(args.config)
    cfg = _apply_channel_preset(_channel_from_table(table.get("channel", {})),
                                args.channel, args.interval)
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    _check_parent_dir(args.out)
    ch = generate(cfg)
    grid = cfg.frame_grid()
    h_td = time_domain_matrix(ch)
    if args.domain == "tf":
        k = tf_kernel_from_time(h_td, grid)
    else:
        k = KernelMatrix(h_td, grid, grid, Domain.TIME_DOMAIN)
    eio.write_kernel(args.out, k)
    print(f"wrote {args.out} (domain={k.domain.name}, "
          f"dim={k.dim_out}x{k.dim_in}, seed={cfg.seed})")
    return 0


def _add_sweep_flags(p: argparse.ArgumentParser, with_schemes: bool) -> None:
    p.add_argument("--config", required=True, help="TOML config file")
    p.add_argument("--out", required=True, help="output CSV path")
    p.add_argument("--json", help="also write a JSON report")
    p.add_argument("--channel", choices=CHANNEL_PRESETS,
                   help="stationarity preset: a=one symbol, b=one sample, lti=static")
    p.add_argument("--interval", type=int,
                   help="explicit stationarity interval in samples")
    p.add_argument("--seed", type=int, help="override sim.master_seed")
    p.add_argument("--frames", type=int, help="override sim.frames_per_point")
    p.add_argument("--threads", type=int, default=None,
                   help="worker threads (default: $EIGENWAVE_THREADS or 1)")
    if with_schemes:
        p.add_argument("--schemes", nargs="+", choices=sim.SCHEMES,
                       help="restrict the schemes to compare")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="eigenwave",
        description="Eigenwave-multiplexing link simulator and kernel tools",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("decompose", help="decompose a kernel file into eigenwaves")
    p.add_argument("--kernel", required=True, help="input EIGK file")
    p.add_argument("--out", required=True, help="output EIGW file")
    p.add_argument("--rank", type=int, default=None, help="truncate to rank N")
    p.set_defaults(func=_cmd_decompose)

    p = sub.add_parser("simulate", help="run a Monte Carlo SNR sweep")
    _add_sweep_flags(p, with_schemes=True)
    p.set_defaults(func=_cmd_simulate, schemes=None)

    p = sub.add_parser("compare",
                       help="sweep all schemes and emit one tidy CSV")
    _add_sweep_flags(p, with_schemes=True)
    p.set_defaults(func=_cmd_compare, schemes=None)

    p = sub.add_parser("stats", help="eigen statistics of a kernel file")
    p.add_argument("--kernel", required=True, help="input EIGK file")
    p.add_argument("--out", help="write JSON here instead of stdout")
    p.add_argument("--power", type=float, default=None,
                   help="total power for capacity (default: kernel dim)")
    p.add_argument("--noise", type=float, default=1.0,
                   help="noise power for capacity (default 1.0)")
    p.add_argument("--dump", help="directory for binary statistic dumps")
    p.set_defaults(func=_cmd_stats)

    p = sub.add_parser("channel-dump", help="realize a channel and save it")
    p.add_argument("--config", required=True, help="TOML config file")
    p.add_argument("--out", required=True, help="output EIGK file")
    p.add_argument("--channel", choices=CHANNEL_PRESETS)
    p.add_argument("--interval", type=int)
    p.add_argument("--seed", type=int, help="override channel.seed")
    p.add_argument("--domain", choices=("time", "tf"), default="time",
                   help="store the time-domain matrix or the TF kernel")
    p.set_defaults(func=_cmd_channel_dump)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        target = getattr(exc, "filename", None)
        where = f" ({target})" if target else ""
        print(f"error: {exc}{where}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
