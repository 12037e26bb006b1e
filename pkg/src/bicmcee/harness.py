"""Experiment orchestration: BER sweeps, outage-rate sweeps, configuration
and CSV output.

Frame layout: ``n_pilots`` pilot OFDM symbols (used only for estimation)
followed by ``tau`` data OFDM symbols of ``M`` subcarriers.  Each frame
carries ``n_info = tau*M*B/2 - 2`` information bits; the encoded frame fills
exactly ``tau*M*B`` coded bits (a zero pad is appended only when that count
is odd).  Errors are counted on information bits only.

Frame ``f`` of a run draws every random quantity from streams keyed by
``(run_seed, purpose, f)`` (see :mod:`bicmcee.rng`).  Decoders, Eb/N0 points
and pilot counts therefore see the same underlying draws, and results do
not depend on the number of worker processes.
"""

from __future__ import annotations

import csv
import io
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from . import rng as _rng
from .capacity import RateParams, expected_outage_rates
from .channel import FadeVector, LinkBudget, apply_channel, draw_rayleigh, estimate_channel, import_fade_vectors
from .errors import ConfigError
from .fec import ConvCode, Interleaver, clamp_llrs, conv_encode, deinterleave, interleave, trellis_decode
from .modem import MetricMode, QamConstellation, bit_metrics, qam_map


@dataclass(frozen=True)
class FrameConfig:
    M: int = 100
    tau: int = 100
    n_pilots: int = 2
    bits_per_symbol: int = 4
    code: ConvCode = field(default_factory=ConvCode)
    demap_iterations: int = 1
    prior_var: float = 1.0
    max_log: bool = False

    def __post_init__(self):
        if self.M < 1 or self.tau < 1:
            raise ConfigError("M and tau must be >= 1")
        if self.n_pilots < 1:
            raise ConfigError("N (pilot symbols) must be >= 1")
        if self.bits_per_symbol != 4:
            raise ConfigError("only 16-QAM (B=4) is supported")
        if self.demap_iterations < 1:
            raise ConfigError("iters must be >= 1")
        if self.prior_var <= 0:
            raise ConfigError("prior_var must be positive")
        if self.n_info < 1:
            raise ConfigError("frame too short to carry information bits")

    @property
    def n_coded(self) -> int:
        return self.tau * self.M * self.bits_per_symbol

    @property
    def n_info(self) -> int:
        return self.n_coded // self.code.n_out - self.code.tail_length

    @property
    def n_pad(self) -> int:
        return self.n_coded - self.code.coded_length(self.n_info)

    def snapshot(self) -> dict:
        d = asdict(self)
        d["code"] = {
            "constraint_length": self.code.constraint_length,
            "generators": [oct(g) for g in self.code.generators],
        }
        d["n_info"] = self.n_info
        d["n_pad"] = self.n_pad
        return d


@dataclass(frozen=True)
class StopRule:
    """Stop a point once ``max_bits`` bits were simulated or ``max_errors`` errors seen."""

    max_bits: int = 2_000_000
    max_errors: int = 200
    min_frames: int = 1
    max_frames: int | None = None

    def done(self, n_frames: int, n_bits: int, n_errors: int) -> bool:
        if self.max_frames is not None and n_frames >= self.max_frames:
            return True
        if n_frames < self.min_frames:
            return False
        return n_bits >= self.max_bits or n_errors >= self.max_errors


@dataclass
class BerPoint:
    ebn0_db: float
    n_bits: int
    n_errors: int
    decoder: MetricMode
    N: int
    n_frames: int = 0

    @property
    def ber(self) -> float:
        return self.n_errors / self.n_bits if self.n_bits else float("nan")

    @property
    def std_err(self) -> float:
        """Binomial standard error of ``ber``."""
        p = self.ber
        return math.sqrt(max(p * (1 - p), 0.0) / self.n_bits) if self.n_bits else float("nan")


@dataclass
class RunManifest:
    run_seed: int
    config: dict
    version: str = __version__
    created: str | None = None  # wall-clock stamp; left out of CSV headers to keep them reproducible

    def header_lines(self) -> list[str]:
        lines = [f"# bicmcee {self.version}", f"# run_seed: {self.run_seed}"]
        lines += [f"# {k}: {json.dumps(v, sort_keys=True)}" for k, v in sorted(self.config.items())]
        return lines


def simulate_frame(
    cfg: FrameConfig,
    lb: LinkBudget,
    modes: Sequence[MetricMode],
    run_seed: int,
    frame_index: int,
    fade: FadeVector | None = None,
) -> dict[MetricMode, int]:
    """Run one frame through the chain and return info-bit errors per decoder."""
    f = frame_index
    const = QamConstellation.qam16(lb.symbol_energy)
    if fade is None:
        fade = draw_rayleigh(cfg.M, cfg.prior_var, _rng.stream(run_seed, _rng.FADE, f))
    elif fade.M != cfg.M:
        raise ConfigError(f"imported channel has {fade.M} subcarriers, expected {cfg.M}")
    info = _rng.stream(run_seed, _rng.INFO_BITS, f).integers(0, 2, cfg.n_info, dtype=np.int8)
    ce = estimate_channel(fade, cfg.n_pilots, lb.pilot_energy, lb.noise_var, _rng.stream(run_seed, _rng.PILOT_NOISE, f))
    coded = np.concatenate([conv_encode(info, cfg.code), np.zeros(cfg.n_pad, dtype=np.int8)])
    pi = Interleaver.from_seed(cfg.n_coded, run_seed, f)
    symbols = qam_map(interleave(coded, pi), const).reshape(cfg.tau, cfg.M)
    y = apply_channel(symbols, fade, lb.noise_var, _rng.stream(run_seed, _rng.DATA_NOISE, f))

    n_payload = cfg.n_coded - cfg.n_pad
    errors = {}
    for mode in modes:
        h = fade.h if mode is MetricMode.PERFECT else ce.h_hat
        apriori = None
        for it in range(cfg.demap_iterations):
            llr = bit_metrics(y, h, const, mode, ce.pp, apriori, max_log=cfg.max_log)
            llr = deinterleave(clamp_llrs(llr.ravel()), pi)[:n_payload]
            last = it == cfg.demap_iterations - 1
            decoded, ext = trellis_decode(llr, cfg.code, extrinsic=not last)
            if not last:
                fb = np.concatenate([ext, np.zeros(cfg.n_pad)])
                apriori = interleave(fb, pi).reshape(cfg.tau, cfg.M, cfg.bits_per_symbol)
        errors[mode] = int(np.count_nonzero(decoded != info))
    return errors


def run_ber_points(
    cfg: FrameConfig,
    lb: LinkBudget,
    modes: Sequence[MetricMode | str],
    stop: StopRule = StopRule(),
    run_seed: int = 0,
    channels: Sequence[FadeVector] | None = None,
) -> dict[MetricMode, BerPoint]:
    """BER of several decoders at one operating point, on shared frames.

    Each decoder stops independently; because frame draws depend only on
    the frame index, the result for a decoder equals what a separate run
    would give.
    """
    modes = [MetricMode.parse(m) for m in modes]
    ebn0 = lb.ebn0_db(float(cfg.code.rate), cfg.bits_per_symbol)
    points = {m: BerPoint(ebn0, 0, 0, m, cfg.n_pilots) for m in modes}
    active = list(modes)
    f = 0
    while active:
        fade = None
        if channels is not None:
            if f >= len(channels):
                raise ConfigError(f"imported channel realizations exhausted after {f} frames")
            fade = channels[f]
        errs = simulate_frame(cfg, lb, active, run_seed, f, fade)
        f += 1
        for m in active:
            p = points[m]
            p.n_bits += cfg.n_info
            p.n_errors += errs[m]
            p.n_frames += 1
        active = [m for m in active if not stop.done(points[m].n_frames, points[m].n_bits, points[m].n_errors)]
    return points


def run_ber_point(
    cfg: FrameConfig,
    lb: LinkBudget,
    mode: MetricMode | str,
    stop: StopRule = StopRule(),
    run_seed: int = 0,
    channels: Sequence[FadeVector] | None = None,
) -> BerPoint:
    m = MetricMode.parse(mode)
    return run_ber_points(cfg, lb, [m], stop, run_seed, channels)[m]


BER_COLUMNS = ["ebn0_db", "N", "decoder", "n_bits", "n_errors", "ber"]
OUTAGE_COLUMNS = ["snr_db", "decoder", "mean_rate_bits", "std_err", "n_outer", "n_inner", "rejects"]


def _ber_task(args):
    cfg, ebn0, modes, stop, run_seed, symbol_energy, channels = args
    lb = LinkBudget.from_ebn0(ebn0, code_rate=float(cfg.code.rate), bits_per_symbol=cfg.bits_per_symbol,
                              symbol_energy=symbol_energy)
    pts = run_ber_points(cfg, lb, modes, stop, run_seed, channels)
    for p in pts.values():
        p.ebn0_db = ebn0
    return [pts[m] for m in modes]


def run_ber_sweep(
    cfg: FrameConfig,
    ebn0_db: Sequence[float],
    modes: Sequence[MetricMode | str],
    run_seed: int = 0,
    out_path=None,
    *,
    pilots: Sequence[int] | None = None,
    stop: StopRule = StopRule(),
    symbol_energy: float = 1.0,
    channels: Sequence[FadeVector] | None = None,
    workers: int = 1,
    json_path=None,
) -> list[BerPoint]:
    """One :class:`BerPoint` per (Eb/N0, N, decoder); optionally written as CSV."""
    modes = [MetricMode.parse(m) for m in modes]
    pilots = list(pilots) if pilots is not None else [cfg.n_pilots]
    tasks = []
    if modes:
        for N in pilots:
            c = replace(cfg, n_pilots=N)
            for e in ebn0_db:
                tasks.append((c, float(e), modes, stop, run_seed, symbol_energy, channels))
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            chunks = list(ex.map(_ber_task, tasks))
    else:
        chunks = [_ber_task(t) for t in tasks]
    points = [p for chunk in chunks for p in chunk]
    manifest = RunManifest(
        run_seed,
        {
            "kind": "ber",
            "frame": cfg.snapshot(),
            "pilots": pilots,
            "decoders": [m.value for m in modes],
            "ebn0_db": [float(e) for e in ebn0_db],
            "stop": asdict(stop),
            "symbol_energy": symbol_energy,
            "channels": "imported" if channels is not None else "rayleigh",
        },
    )
    if out_path is not None:
        rows = [[repr(p.ebn0_db), p.N, p.decoder.value, p.n_bits, p.n_errors, repr(p.ber)] for p in points]
        write_csv(out_path, manifest, BER_COLUMNS, rows)
    if json_path is not None:
        _write_json(json_path, manifest, [
            {"ebn0_db": p.ebn0_db, "N": p.N, "decoder": p.decoder.value, "n_bits": p.n_bits,
             "n_errors": p.n_errors, "ber": p.ber} for p in points
        ])
    return points


@dataclass
class OutageRow:
    snr_db: float
    decoder: MetricMode
    mean_rate_bits: float
    std_err: float
    n_outer: int
    n_inner: int
    rejects: int
    denominator_violations: int = 0


def run_outage_sweep(
    snr_db: Sequence[float],
    decoders: Sequence[MetricMode | str],
    *,
    M: int = 16,
    n_pilots: int = 1,
    gamma: float = 0.01,
    n_outer: int = 200,
    n_inner: int = 2000,
    run_seed: int = 0,
    prior_var: float = 1.0,
    out_path=None,
    json_path=None,
) -> list[OutageRow]:
    """Expected outage rate per (SNR, decoder); SNR is ``P / noise_var`` with unit noise."""
    decoders = [MetricMode.parse(d) for d in decoders]
    rows = []
    for snr in snr_db:
        rp = RateParams.from_snr(float(snr), M, n_pilots, prior_var=prior_var)
        res = expected_outage_rates(decoders, rp, gamma, n_outer, n_inner, run_seed) if decoders else {}
        for d in decoders:
            r = res[d]
            rows.append(OutageRow(float(snr), d, r.rate_bits, r.std_err, n_outer, n_inner, r.rejects,
                                  r.denominator_violations))
    manifest = RunManifest(
        run_seed,
        {
            "kind": "outage",
            "M": M,
            "N": n_pilots,
            "gamma": gamma,
            "n_outer": n_outer,
            "n_inner": n_inner,
            "prior_var": prior_var,
            "decoders": [d.value for d in decoders],
            "snr_db": [float(s) for s in snr_db],
        },
    )
    if out_path is not None:
        write_csv(out_path, manifest, OUTAGE_COLUMNS, [
            [repr(r.snr_db), r.decoder.value, repr(r.mean_rate_bits), repr(r.std_err), r.n_outer, r.n_inner, r.rejects]
            for r in rows
        ])
    if json_path is not None:
        _write_json(json_path, manifest, [
            {"snr_db": r.snr_db, "decoder": r.decoder.value, "mean_rate_bits": r.mean_rate_bits,
             "std_err": r.std_err, "n_outer": r.n_outer, "n_inner": r.n_inner, "rejects": r.rejects}
            for r in rows
        ])
    return rows


def write_csv(path, manifest: RunManifest, columns: Sequence[str], rows) -> None:
    buf = io.StringIO()
    for line in manifest.header_lines():
        buf.write(line + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    w.writerows(rows)
    try:
        Path(path).write_text(buf.getvalue(), encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot write {path}: {exc.strerror}") from exc


def _write_json(path, manifest: RunManifest, records) -> None:
    m = asdict(manifest)
    m["created"] = m["created"] or time.strftime("%Y-%m-%dT%H:%M:%S%z")
    Path(path).write_text(json.dumps({"manifest": m, "points": records}, indent=2, sort_keys=True), encoding="utf-8")


# --- crossing-point helpers -------------------------------------------------

def ebn0_at_ber(ebn0_db, ber, target: float = 1e-3) -> float:
    """Eb/N0 where the BER curve crosses ``target``, interpolating log10(BER) linearly.

    Returns NaN if the curve never crosses.  Points with zero errors are
    skipped.
    """
    x = np.asarray(ebn0_db, dtype=float)
    b = np.asarray(ber, dtype=float)
    keep = b > 0
    x, lb = x[keep], np.log10(b[keep])
    t = math.log10(target)
    for i in range(len(x) - 1):
        if (lb[i] - t) * (lb[i + 1] - t) <= 0 and lb[i] != lb[i + 1]:
            return float(x[i] + (t - lb[i]) * (x[i + 1] - x[i]) / (lb[i + 1] - lb[i]))
    return float("nan")


def snr_at_rate(snr_db, rate, target: float) -> float:
    """SNR where an increasing rate curve reaches ``target`` (linear interpolation)."""
    x = np.asarray(snr_db, dtype=float)
    r = np.asarray(rate, dtype=float)
    for i in range(len(x) - 1):
        if (r[i] - target) * (r[i + 1] - target) <= 0 and r[i] != r[i + 1]:
            return float(x[i] + (target - r[i]) * (x[i + 1] - x[i]) / (r[i + 1] - r[i]))
    return float("nan")


# --- configuration ------------------------------------------------------------

@dataclass
class ExperimentConfig:
    frame: FrameConfig = field(default_factory=FrameConfig)
    stop: StopRule = field(default_factory=StopRule)
    seed: int = 0
    ebn0_db: list[float] = field(default_factory=lambda: parse_range("0:1:16"))
    snr_db: list[float] = field(default_factory=lambda: parse_range("-10:2:30"))
    pilots: list[int] = field(default_factory=lambda: [2])
    decoders: list[MetricMode] = field(default_factory=lambda: list(MetricMode))
    gamma: float = 0.01
    n_outer: int = 200
    n_inner: int = 2000
    symbol_energy: float = 1.0
    channels: str | None = None
    out: str | None = None
    explicit: frozenset = frozenset()  # keys set by the file or overrides


def parse_range(text: str) -> list[float]:
    """``START:STEP:STOP`` (inclusive), a comma list, or a single number."""
    text = str(text).strip()
    try:
        if ":" in text:
            parts = [float(p) for p in text.split(":")]
            if len(parts) != 3:
                raise ValueError
            start, step, stop = parts
            if step <= 0 or stop < start:
                raise ConfigError(f"bad range {text!r}: need STEP > 0 and STOP >= START")
            n = int(math.floor((stop - start) / step + 1e-9)) + 1
            return [round(start + i * step, 12) for i in range(n)]
        return [float(p) for p in text.split(",") if p.strip()]
    except ValueError:
        raise ConfigError(f"bad range {text!r}; expected START:STEP:STOP or a comma list") from None


def _int(v: str) -> int:
    return int(v)


def _bool(v: str) -> bool:
    s = v.strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {v!r}")


def _ints(v: str) -> list[int]:
    return [int(p) for p in v.split(",") if p.strip()]


def _modes(v: str) -> list[MetricMode]:
    return [MetricMode.parse(p) for p in v.split(",") if p.strip()]


# key -> (parser, section, attribute)
_KEYS = {
    "M": (_int, "frame", "M"),
    "tau": (_int, "frame", "tau"),
    "N": (_ints, "top", "pilots"),
    "pilots": (_ints, "top", "pilots"),
    "B": (_int, "frame", "bits_per_symbol"),
    "iters": (_int, "frame", "demap_iterations"),
    "prior_var": (float, "frame", "prior_var"),
    "max_log": (_bool, "frame", "max_log"),
    "max_bits": (_int, "stop", "max_bits"),
    "max_errors": (_int, "stop", "max_errors"),
    "min_frames": (_int, "stop", "min_frames"),
    "max_frames": (_int, "stop", "max_frames"),
    "seed": (_int, "top", "seed"),
    "ebn0": (parse_range, "top", "ebn0_db"),
    "snr": (parse_range, "top", "snr_db"),
    "decoders": (_modes, "top", "decoders"),
    "gamma": (float, "top", "gamma"),
    "n_outer": (_int, "top", "n_outer"),
    "n_inner": (_int, "top", "n_inner"),
    "symbol_energy": (float, "top", "symbol_energy"),
    "channels": (str, "top", "channels"),
    "out": (str, "top", "out"),
}


def parse_config(path=None, overrides: dict | None = None) -> ExperimentConfig:
    """Build an :class:`ExperimentConfig` from a ``key=value`` file and overrides.

    Overrides (e.g. from command-line flags) take precedence over the file.
    Unknown keys, unparsable values and constraint violations raise
    :class:`ConfigError` naming the key and, for file entries, the line.
    """
    entries: list[tuple[str, str, str]] = []  # (key, value, where)
    if path is not None:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"line {lineno}: expected key=value, got {line!r}")
            k, v = (s.strip() for s in line.split("=", 1))
            entries.append((k, v, f"line {lineno}"))
    for k, v in (overrides or {}).items():
        if v is not None:
            entries.append((k, str(v) if not isinstance(v, str) else v, "override"))

    frame_kw: dict = {}
    stop_kw: dict = {}
    top_kw: dict = {}
    sections = {"frame": frame_kw, "stop": stop_kw, "top": top_kw}
    for k, v, where in entries:
        if k not in _KEYS:
            raise ConfigError(f"{where}: unknown key {k!r}")
        parser, section, attr = _KEYS[k]
        try:
            sections[section][attr] = parser(v)
        except ConfigError as exc:
            raise ConfigError(f"{where}: {k}: {exc}") from None
        except ValueError as exc:
            raise ConfigError(f"{where}: {k}: invalid value {v!r} ({exc})") from None

    pilots = top_kw.get("pilots", [2])
    if not pilots or min(pilots) < 1:
        raise ConfigError("N: pilot counts must be >= 1")
    try:
        frame = FrameConfig(n_pilots=pilots[0], **frame_kw)
        stop = StopRule(**stop_kw)
    except ConfigError as exc:
        raise ConfigError(f"invalid configuration: {exc}") from None
    cfg = ExperimentConfig(frame=frame, stop=stop, explicit=frozenset(k for k, _, _ in entries), **top_kw)
    if not 0 < cfg.gamma < 1:
        raise ConfigError("gamma: must lie in (0, 1)")
    if cfg.seed < 0:
        raise ConfigError("seed: must be non-negative")
    return cfg


def load_channels(cfg: ExperimentConfig) -> list[FadeVector] | None:
    if cfg.channels is None:
        return None
    vecs = import_fade_vectors(cfg.channels, M=cfg.frame.M, var=cfg.frame.prior_var)
    if not vecs:
        raise ConfigError(f"{cfg.channels}: no channel realizations")
    return vecs
