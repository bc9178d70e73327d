"""Command-line front end.

Configuration is resolved as: built-in defaults < ``--preset paper`` <
``--config FILE`` (flat ``key = value`` lines, ``#`` comments) < ``--set
key=value`` flags. Every CSV written embeds the resolved configuration as
``# key: value`` header lines, so identical inputs give identical bytes.

Exit codes: 0 success, 2 configuration error, 3 buffer overflow.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import io
import os
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from .bufctl import Mechanism, ThresholdConfig, TrialStats, select_thresholds
from .harness import (
    IdealTrace,
    SystemConfig,
    format_header,
    parse_upsilon,
    run_ideal_sim,
    run_system_sim,
    steady_state_start,
)
from .polarcode import CRC16_POLY, CodeSpec, load_frozen_set, save_frozen_set
from .scfdec import ScfConfig

EXIT_OK, EXIT_CONFIG, EXIT_OVERFLOW = 0, 2, 3
OUT_ENV = "SCFBUF_OUT"

REFERENCE_SNRS = (1.75, 1.875, 2.0, 2.125, 2.25, 2.375, 2.5)
REFERENCE_UPSILONS = ("1.091", "1.11", "1.125", "1.15", "1.2")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    N: int = 1024
    k: int = 512
    r: int = 16
    crc_poly: int = 0  # 0: CRC-16 0x18005 when r=16, none when r=0
    design_snr_db: float = 2.365
    frozen_file: str = ""
    t_max: int = 11
    c: float = 0.3
    f_kernel: str = "min-sum"
    snr_rate: str = "info"
    snr_db: tuple[float, ...] = (2.25,)
    upsilon: tuple[str, ...] = ("1.125",)
    b_tot: int = 100
    mechanism: tuple[str, ...] = ("multi", "drop")
    b_thresholds: str = ""
    t_thresholds: str = ""
    warmup: int = -1
    tau_sc: int = 0
    frames: int = 10_000
    seed: int = 2024
    workers: int = 0
    fig5_snr: float = 2.25
    fig5_upsilon: str = "1.125"
    out_dir: str = field(default_factory=lambda: os.environ.get(OUT_ENV, "results"))

    def set(self, key: str, value: str) -> None:
        key = key.strip()
        fields = {f.name: f for f in dataclasses.fields(self)}
        if key not in fields:
            raise ConfigError(f"unknown config key {key!r}")
        current = getattr(self, key)
        value = value.strip()
        try:
            if isinstance(current, tuple):
                items = [v for v in value.replace(" ", "").split(",") if v]
                conv = float if key == "snr_db" else str
                setattr(self, key, tuple(conv(v) for v in items))
            elif isinstance(current, bool):
                setattr(self, key, value.lower() in ("1", "true", "yes"))
            elif isinstance(current, int):
                setattr(self, key, int(value, 0))
            elif isinstance(current, float):
                setattr(self, key, float(value))
            else:
                setattr(self, key, value)
        except ValueError as exc:
            raise ConfigError(f"bad value for {key}: {value!r}") from exc

    def items(self) -> list[tuple[str, str]]:
        out = []
        for f in dataclasses.fields(self):
            if f.name == "out_dir":
                continue
            v = getattr(self, f.name)
            if isinstance(v, tuple):
                v = ",".join(str(x) for x in v)
            elif f.name == "crc_poly":
                v = hex(v)
            out.append((f.name, str(v)))
        return out

    # -- derived objects --

    def code_spec(self) -> CodeSpec:
        try:
            if self.frozen_file:
                spec = load_frozen_set(self.frozen_file, self.crc_poly or None)
                if (spec.N, spec.k, spec.r) != (self.N, self.k, self.r):
                    raise ConfigError(
                        f"frozen file is for ({spec.N},{spec.k},{spec.r}), config says "
                        f"({self.N},{self.k},{self.r})"
                    )
                return spec
            return CodeSpec.construct(self.N, self.k, self.r, self.design_snr_db, self.crc_poly or None)
        except (ValueError, OSError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc)) from exc

    def scf_config(self) -> ScfConfig:
        if self.f_kernel not in ("min-sum", "exact"):
            raise ConfigError(f"f_kernel must be min-sum or exact, got {self.f_kernel!r}")
        try:
            return ScfConfig(self.t_max, self.c, self.f_kernel == "exact")
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def upsilons(self) -> list[Fraction]:
        try:
            return [parse_upsilon(u) for u in self.upsilon]
        except (ValueError, ZeroDivisionError) as exc:
            raise ConfigError(f"bad production coefficient: {exc}") from exc

    def mechanisms(self) -> list[Mechanism]:
        try:
            return [Mechanism(m) for m in self.mechanism]
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def threshold_override(self) -> ThresholdConfig | None:
        if not self.b_thresholds and not self.t_thresholds:
            return None
        try:
            return ThresholdConfig.parse(self.b_thresholds, self.t_thresholds)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc


def apply_preset(cfg: RunConfig, name: str) -> None:
    if name != "paper":
        raise ConfigError(f"unknown preset {name!r}")
    cfg.N, cfg.k, cfg.r, cfg.crc_poly = 1024, 512, 16, CRC16_POLY
    cfg.design_snr_db, cfg.t_max, cfg.c, cfg.b_tot = 2.365, 11, 0.3, 100
    cfg.snr_db = REFERENCE_SNRS
    cfg.upsilon = REFERENCE_UPSILONS
    cfg.frames = 1_000_000


def load_config_file(cfg: RunConfig, path) -> None:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}") from exc
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"{path}:{n}: expected key = value")
        cfg.set(key, value)


def resolve_config(args) -> RunConfig:
    cfg = RunConfig()
    if args.preset:
        apply_preset(cfg, args.preset)
    if args.config:
        load_config_file(cfg, args.config)
    for item in args.set or []:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        cfg.set(key, value)
    if args.out:
        cfg.out_dir = args.out
    return cfg


# -- output helpers --


def git_blob_hash(data: bytes) -> str:
    return hashlib.sha1(b"blob %d\0" % len(data) + data).hexdigest()


def header_for(cfg: RunConfig, kind: str, **extra) -> dict[str, str]:
    head = {"kind": kind}
    head.update({f"config.{k}": v for k, v in cfg.items()})
    head.update({k: str(v) for k, v in extra.items()})
    return head


def write_csv(path: Path, head: dict[str, str], columns: list[str], rows) -> None:
    body = io.StringIO()
    body.write(",".join(columns) + "\n")
    for row in rows:
        body.write(",".join(_fmt(v) for v in row) + "\n")
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(format_header(head) + body.getvalue())


def write_int_columns(path: Path, head: dict[str, str], columns: list[str], data: np.ndarray) -> None:
    body = io.StringIO()
    body.write(",".join(columns) + "\n")
    np.savetxt(body, data, fmt="%d", delimiter=",")
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(format_header(head) + body.getvalue())


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.6g}" if abs(v) >= 1e-4 or v == 0 else f"{v:.6e}"
    if isinstance(v, Fraction):
        return f"{v.numerator}/{v.denominator}"
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    return str(v)


def _tag(x) -> str:
    if isinstance(x, Fraction):
        return f"{x.numerator}-{x.denominator}"
    return f"{x:g}"


def trace_path(out: Path, snr: float) -> Path:
    return out / f"ideal_snr{_tag(snr)}.csv"


# -- commands --


def cmd_construct(cfg: RunConfig, output: str | None = None) -> Path:
    spec = cfg.code_spec()
    path = Path(output) if output else Path(cfg.out_dir) / f"frozen_N{spec.N}_k{spec.k}_r{spec.r}.txt"
    path.parent.mkdir(parents=True, exist_ok=True)
    save_frozen_set(spec, path)
    print(f"wrote {path} ({len(spec.frozen)} frozen indices)")
    return path


def _ideal_trace_for(cfg: RunConfig, snr: float, spec: CodeSpec, scf: ScfConfig) -> IdealTrace:
    trace = run_ideal_sim(spec, scf, snr, cfg.frames, cfg.seed, cfg.snr_rate, workers=cfg.workers or None)
    trace.meta.update({f"config.{k}": v for k, v in cfg.items()})
    return trace


def tav_rows(trace: IdealTrace) -> list[tuple]:
    rows = []
    for m in range(1, trace.t_max + 1):
        sub = trace.restrict(m)
        rows.append((m, sub.t_av, sub.fer))
    return rows


def cmd_ideal(cfg: RunConfig) -> list[Path]:
    spec, scf = cfg.code_spec(), cfg.scf_config()
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for snr in cfg.snr_db:
        trace = _ideal_trace_for(cfg, snr, spec, scf)
        tpath = trace_path(out, snr)
        trace.save(tpath)
        head = header_for(cfg, "tav_table", snr_db=snr, trace_sha1=git_blob_hash(tpath.read_bytes()))
        spath = out / f"tav_snr{_tag(snr)}.csv"
        write_csv(spath, head, ["tmax", "t_av", "fer"], tav_rows(trace))
        print(f"snr={snr:g} dB: T_av({trace.t_max})={trace.t_av:.6f} FER={trace.fer:.6g} -> {tpath}")
        written += [tpath, spath]
    return written


def _stats_for(trace: IdealTrace) -> TrialStats:
    return TrialStats.from_required_trials(trace.psi_req, trace.t_max, trace.snr_db)


def _thresholds(cfg: RunConfig, trace: IdealTrace, upsilon: Fraction, mech: Mechanism):
    override = cfg.threshold_override()
    stats = _stats_for(trace)
    try:
        chosen, t_bal = select_thresholds(stats, upsilon, trace.t_max, cfg.b_tot, mech)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    if override is not None and mech is Mechanism.MULTI:
        chosen = override
    return chosen, t_bal


def cmd_thresholds(cfg: RunConfig, trace_files: list[str]) -> list[Path]:
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for tf in trace_files:
        trace = _load_trace(tf)
        for upsilon in cfg.upsilons():
            for mech in cfg.mechanisms():
                chosen, t_bal = _thresholds(cfg, trace, upsilon, mech)
                print(
                    f"snr={trace.snr_db:g} upsilon={upsilon} ({float(upsilon):.4f}) {mech.value}: "
                    f"T_bal={t_bal} B={list(chosen.b_thresholds)} T={list(chosen.t_thresholds)}"
                )
                path = out / f"thresholds_snr{_tag(trace.snr_db)}_u{_tag(upsilon)}_{mech.value}.txt"
                head = header_for(cfg, "thresholds", snr_db=trace.snr_db, upsilon=_fmt(upsilon),
                                  mechanism=mech.value, t_bal=t_bal,
                                  trace_sha1=git_blob_hash(Path(tf).read_bytes()))
                path.write_text(format_header(head) + f"t_bal = {t_bal}\n" + chosen.to_text())
                written.append(path)
    return written


def _load_trace(path) -> IdealTrace:
    try:
        return IdealTrace.load(path)
    except (OSError, ValueError, KeyError) as exc:
        raise ConfigError(f"cannot load trace {path}: {exc}") from exc


SUMMARY_COLUMNS = [
    "snr", "upsilon", "mechanism", "fer", "drops", "max_occ",
    "fer_full", "fer_ideal", "t_bal", "b_thresholds", "t_thresholds", "overflow", "words",
]


def simulate_point(cfg: RunConfig, trace: IdealTrace, upsilon: Fraction, mech: Mechanism):
    """Run one (trace, upsilon, mechanism) point; returns (summary row, SimTrace, SystemConfig)."""
    chosen, t_bal = _thresholds(cfg, trace, upsilon, mech)
    try:
        sys_cfg = SystemConfig(
            upsilon, chosen, cfg.b_tot, cfg.tau_sc or None, None if cfg.warmup < 0 else cfg.warmup
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    sim = run_system_sim(sys_cfg, trace, strict=False)
    warm = min(sys_cfg.warmup, len(trace) - 1)
    t0 = steady_state_start(sys_cfg)
    ss_occ = sim.chi_occ[t0:] if t0 < len(sim.chi_occ) else sim.chi_occ
    row = (
        trace.snr_db, upsilon, mech.value, sim.fer(warm), sim.drops,
        int(ss_occ.max()) if ss_occ.size else 0,
        sim.fer(), float(trace.e_flags[warm:].mean()), t_bal,
        " ".join(map(str, chosen.b_thresholds)), " ".join(map(str, chosen.t_thresholds)),
        sim.overflow, sim.words_done,
    )
    return row, sim, sys_cfg


def _write_sim_files(cfg: RunConfig, out: Path, trace: IdealTrace, upsilon, mech, sim, sys_cfg, trace_sha1):
    tag = f"snr{_tag(trace.snr_db)}_u{_tag(upsilon)}_{mech.value}"
    tau_sc, tau_ch = sys_cfg.timing
    head = header_for(cfg, "occupancy", snr_db=trace.snr_db, upsilon=_fmt(upsilon),
                      mechanism=mech.value, tau_sc=tau_sc, tau_ch=tau_ch,
                      b_thresholds=list(sys_cfg.thresholds.b_thresholds),
                      t_thresholds=list(sys_cfg.thresholds.t_thresholds),
                      trace_sha1=trace_sha1)
    occ = np.column_stack([np.arange(sim.chi_occ.size), sim.chi_occ])
    write_int_columns(out / f"occupancy_{tag}.csv", head, ["time_unit", "b_occ"], occ)
    head["kind"] = "words"
    words = np.column_stack([np.arange(len(trace)), sim.psi_res, sim.e_prime.astype(np.int32)])
    write_int_columns(out / f"words_{tag}.csv", head, ["s", "psi_res", "e_prime"], words)


def cmd_system(cfg: RunConfig, trace_files: list[str], write_traces: bool = True) -> int:
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    overflow = False
    hashes = []
    for tf in trace_files:
        trace = _load_trace(tf)
        sha = git_blob_hash(Path(tf).read_bytes())
        hashes.append(sha)
        for upsilon in cfg.upsilons():
            for mech in cfg.mechanisms():
                row, sim, sys_cfg = simulate_point(cfg, trace, upsilon, mech)
                rows.append(row)
                overflow |= sim.overflow
                if write_traces:
                    _write_sim_files(cfg, out, trace, upsilon, mech, sim, sys_cfg, sha)
                print(f"snr={row[0]:g} upsilon={upsilon} {mech.value}: FER={row[3]:.5g} "
                      f"drops={row[4]} max_occ={row[5]} overflow={sim.overflow}")
    head = header_for(cfg, "system_summary", trace_sha1=",".join(hashes))
    write_csv(out / "system_summary.csv", head, SUMMARY_COLUMNS, rows)
    if overflow:
        print("buffer overflow occurred", file=sys.stderr)
        return EXIT_OVERFLOW
    return EXIT_OK


def cmd_sweep(cfg: RunConfig) -> int:
    """Ideal traces for every SNR, then the FER-vs-SNR, FER-vs-rate and occupancy grids."""
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    spec, scf = cfg.code_spec(), cfg.scf_config()
    save_frozen_set(spec, out / f"frozen_N{spec.N}_k{spec.k}_r{spec.r}.txt")
    traces = {}
    fig2 = []
    for snr in cfg.snr_db:
        tpath = trace_path(out, snr)
        trace = _ideal_trace_for(cfg, snr, spec, scf)
        trace.save(tpath)
        traces[snr] = trace
        fig2 += [(snr, m, t_av, fer) for m, t_av, fer in tav_rows(trace)]
        print(f"ideal snr={snr:g}: T_av={trace.t_av:.6f} FER={trace.fer:.6g}")
    write_csv(out / "fig2_tav.csv", header_for(cfg, "fig2"), ["snr", "tmax", "t_av", "fer"], fig2)

    rows = []
    overflow = False
    ups = cfg.upsilons()
    fig5_u = parse_upsilon(cfg.fig5_upsilon)
    for snr, trace in traces.items():
        for upsilon in ups:
            for mech in cfg.mechanisms():
                row, sim, sys_cfg = simulate_point(cfg, trace, upsilon, mech)
                rows.append(row)
                overflow |= sim.overflow
                if snr == cfg.fig5_snr and upsilon == fig5_u:
                    _write_sim_files(cfg, out, trace, upsilon, mech, sim, sys_cfg,
                                     git_blob_hash(trace_path(out, snr).read_bytes()))
                print(f"system snr={snr:g} upsilon={upsilon} {mech.value}: FER={row[3]:.5g} "
                      f"drops={row[4]} max_occ={row[5]}")
    write_csv(out / "sweep_summary.csv", header_for(cfg, "sweep_summary"), SUMMARY_COLUMNS, rows)
    if overflow:
        print("buffer overflow occurred", file=sys.stderr)
        return EXIT_OVERFLOW
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--preset", choices=["paper"],
                        help="load the reference experiment defaults (7 SNRs, 5 rates, 10^6 frames)")
    common.add_argument("--config", help="flat key = value config file")
    common.add_argument("--set", action="append", metavar="KEY=VALUE", help="override one config key")
    common.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./results)")

    parser = argparse.ArgumentParser(prog="scfbuf", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("construct", parents=[common], help="write a frozen-set file")
    p.add_argument("--output", help="explicit output path")
    sub.add_parser("ideal", parents=[common], help="ideal-system Monte Carlo per SNR")
    p = sub.add_parser("thresholds", parents=[common], help="derive controller thresholds from traces")
    p.add_argument("traces", nargs="+")
    p = sub.add_parser("system", parents=[common], help="buffer-controlled system simulation")
    p.add_argument("traces", nargs="+")
    p.add_argument("--no-traces", action="store_true", help="only write the summary CSV")
    sub.add_parser("sweep", parents=[common], help="full reproduction pipeline")
    sub.add_parser("show-config", parents=[common], help="print the resolved configuration")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
        if args.command == "construct":
            cmd_construct(cfg, args.output)
        elif args.command == "ideal":
            cmd_ideal(cfg)
        elif args.command == "thresholds":
            cmd_thresholds(cfg, args.traces)
        elif args.command == "system":
            return cmd_system(cfg, args.traces, not args.no_traces)
        elif args.command == "sweep":
            return cmd_sweep(cfg)
        elif args.command == "show-config":
            for k, v in cfg.items():
                print(f"{k} = {v}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
