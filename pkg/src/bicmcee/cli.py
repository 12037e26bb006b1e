"""Command-line entry point: ``bicmcee {ber,outage,metric-table,export-channels}``."""

from __future__ import annotations

import argparse
import csv
import sys
from dataclasses import replace

from . import rng as _rng
from .channel import draw_rayleigh, export_fade_vectors
from .errors import ConfigError
from .harness import load_channels, parse_config, run_ber_sweep, run_outage_sweep
from .modem import QAM16, MetricMode, PosteriorParams, symbol_metric


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", metavar="PATH", help="key=value configuration file")
    p.add_argument("--seed", type=int, metavar="U64")
    p.add_argument("--pilots", metavar="N[,N...]")
    p.add_argument("--decoders", metavar="LIST", help="comma list of perfect,mismatched,modified")
    p.add_argument("--m-subcarriers", type=int, metavar="K")
    p.add_argument("--out", metavar="PATH")
    p.add_argument("--json", metavar="PATH", help="also write a JSON mirror of the results")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="bicmcee", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    ber = sub.add_parser("ber", help="BER sweep over Eb/N0, pilot counts and decoders")
    _common(ber)
    ber.add_argument("--ebn0", metavar="START:STEP:STOP")
    ber.add_argument("--channels", metavar="PATH", help="import fade vectors instead of drawing Rayleigh")
    ber.add_argument("--iters", type=int, metavar="K", help="demapping passes (1 = non-iterative)")
    ber.add_argument("--tau", type=int, help="OFDM data symbols per frame")
    ber.add_argument("--max-bits", type=int)
    ber.add_argument("--max-errors", type=int)
    ber.add_argument("--workers", type=int, default=1)

    out = sub.add_parser("outage", help="expected outage-rate sweep over SNR")
    _common(out)
    out.add_argument("--snr", metavar="START:STEP:STOP")
    out.add_argument("--gamma", type=float, metavar="F")
    out.add_argument("--n-outer", type=int)
    out.add_argument("--n-inner", type=int)

    mt = sub.add_parser("metric-table", help="dump D(s, y) for all 16-QAM points as CSV")
    mt.add_argument("--y", type=complex, required=True, help="received sample, e.g. 0.3+0.1j")
    mt.add_argument("--hhat", type=complex, required=True, help="channel estimate")
    mt.add_argument("--rho", type=float, required=True)
    mt.add_argument("--noise-var", type=float, required=True)
    mt.add_argument("--prior-var", type=float, default=1.0)
    mt.add_argument("--out", metavar="PATH", help="default: stdout")

    ex = sub.add_parser("export-channels", help="write Rayleigh fade vectors in the import format")
    ex.add_argument("--count", type=int, required=True)
    ex.add_argument("--m-subcarriers", type=int, default=100, metavar="K")
    ex.add_argument("--prior-var", type=float, default=1.0)
    ex.add_argument("--seed", type=int, default=0, metavar="U64")
    ex.add_argument("--out", metavar="PATH", required=True)
    return ap


def _overrides(args, **names) -> dict:
    return {key: getattr(args, attr, None) for key, attr in names.items()}


def _cmd_ber(args) -> None:
    cfg = parse_config(args.config, _overrides(
        args, seed="seed", ebn0="ebn0", N="pilots", decoders="decoders", channels="channels",
        out="out", M="m_subcarriers", iters="iters", tau="tau", max_bits="max_bits", max_errors="max_errors",
    ))
    if cfg.out is None and args.json is None:
        raise ConfigError("--out PATH is required")
    run_ber_sweep(
        cfg.frame, cfg.ebn0_db, cfg.decoders, cfg.seed, cfg.out,
        pilots=cfg.pilots, stop=cfg.stop, symbol_energy=cfg.symbol_energy,
        channels=load_channels(cfg), workers=args.workers, json_path=args.json,
    )


def _cmd_outage(args) -> None:
    ov = _overrides(args, seed="seed", snr="snr", N="pilots", decoders="decoders", out="out",
                    M="m_subcarriers", gamma="gamma", n_outer="n_outer", n_inner="n_inner")
    cfg = parse_config(args.config, ov)
    if "M" not in cfg.explicit:
        cfg.frame = replace(cfg.frame, M=16)
    if cfg.out is None and args.json is None:
        raise ConfigError("--out PATH is required")
    run_outage_sweep(
        cfg.snr_db, cfg.decoders, M=cfg.frame.M, n_pilots=cfg.pilots[0], gamma=cfg.gamma,
        n_outer=cfg.n_outer, n_inner=cfg.n_inner, run_seed=cfg.seed, prior_var=cfg.frame.prior_var,
        out_path=cfg.out, json_path=args.json,
    )


def metric_table(y: complex, h_hat: complex, rho: float, noise_var: float, prior_var: float = 1.0) -> list[list]:
    if not 0 < rho <= 1:
        raise ConfigError("--rho must lie in (0, 1]")
    pp = PosteriorParams.from_variances(prior_var, prior_var * (1 - rho) / rho, noise_var)
    eu = symbol_metric(y, QAM16.points, h_hat, MetricMode.MISMATCHED, pp)
    mod = symbol_metric(y, QAM16.points, h_hat, MetricMode.MODIFIED, pp)
    rows = []
    for i, s in enumerate(QAM16.points):
        label = "".join(str(b) for b in QAM16.labels[i])
        rows.append([label, repr(float(s.real)), repr(float(s.imag)), repr(float(eu[i])), repr(float(mod[i]))])
    return rows


def _cmd_metric_table(args) -> None:
    rows = metric_table(args.y, args.hhat, args.rho, args.noise_var, args.prior_var)
    header = ["label", "s_re", "s_im", "euclidean", "modified"]
    fh = open(args.out, "w", newline="", encoding="utf-8") if args.out else sys.stdout
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    finally:
        if args.out:
            fh.close()


def _cmd_export(args) -> None:
    if args.count < 0:
        raise ConfigError("--count must be >= 0")
    vecs = [draw_rayleigh(args.m_subcarriers, args.prior_var, _rng.stream(args.seed, _rng.EXPORT, i))
            for i in range(args.count)]
    export_fade_vectors(args.out, vecs, header=f"rayleigh M={args.m_subcarriers} var={args.prior_var} seed={args.seed}")


_COMMANDS = {
    "ber": _cmd_ber,
    "outage": _cmd_outage,
    "metric-table": _cmd_metric_table,
    "export-channels": _cmd_export,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        _COMMANDS[args.command](args)
    except (ValueError, ArithmeticError, OSError) as exc:
        print(f"bicmcee {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
