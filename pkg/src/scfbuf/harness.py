"""Two-phase experiment engine.

Phase 1 decodes random codewords in an unconstrained ("ideal") receiver and
records, per word, the trials it needed and whether it was decoded
correctly. Phase 2 replays those requirements through a time-stepped model
of channel, buffer, controller, and decoder.
"""

from __future__ import annotations

import hashlib
import io
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np
from numba import njit

from . import __version__
from .bufctl import (
    BufferOverflow,
    CircularBuffer,
    ThresholdConfig,
    gen_ctrl_sigs,
)
from .channel import GENERATOR_ID, StreamCursor, random_bits, snr_to_noise_var
from .polarcode import CRC_CONVENTION, CodeSpec, _crc_register, _polar_transform
from .scfdec import ScfConfig, scf_kernel

SNR_RATES = ("info", "effective")


def channel_rate(spec: CodeSpec, snr_rate: str = "info") -> float:
    """Rate entering the Eb/N0 conversion: k/N ("info") or (k+r)/N."""
    if snr_rate == "info":
        return spec.k / spec.N
    if snr_rate == "effective":
        return spec.rate
    raise ValueError(f"snr_rate must be one of {SNR_RATES}, got {snr_rate!r}")


def spec_fingerprint(spec: CodeSpec) -> str:
    h = hashlib.sha256(f"{spec.N} {spec.k} {spec.r} {spec.crc_poly:x}\n".encode())
    h.update(" ".join(map(str, spec.frozen)).encode())
    return h.hexdigest()[:16]


# -- phase 1 -----------------------------------------------------------------


@dataclass
class IdealTrace:
    psi_req: np.ndarray
    e_flags: np.ndarray
    snr_db: float
    t_max: int
    c: float
    seed: int
    meta: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        self.psi_req = np.asarray(self.psi_req, dtype=np.int32)
        self.e_flags = np.asarray(self.e_flags, dtype=np.bool_)
        if self.psi_req.shape != self.e_flags.shape:
            raise ValueError("psi_req and e_flags differ in length")

    def __len__(self) -> int:
        return self.psi_req.shape[0]

    @property
    def t_av(self) -> float:
        return float(self.psi_req.mean())

    @property
    def fer(self) -> float:
        return float(self.e_flags.mean())

    def restrict(self, t_max: int) -> "IdealTrace":
        """Outcome of the same words under a smaller trial budget.

        The flip list does not depend on ``T_max``, so trials ``1..m`` are
        identical; a word needing more than ``m`` trials fails at ``m``.
        """
        if not 1 <= t_max <= self.t_max:
            raise ValueError(f"t_max must lie in [1, {self.t_max}]")
        cut = self.psi_req > t_max
        meta = dict(self.meta, t_max=str(t_max))
        return IdealTrace(
            np.minimum(self.psi_req, t_max), self.e_flags | cut,
            self.snr_db, t_max, self.c, self.seed, meta,
        )

    def save(self, path) -> None:
        body = io.StringIO()
        body.write("s,t_req,error_flag\n")
        rows = np.column_stack([np.arange(len(self)), self.psi_req, self.e_flags.astype(np.int32)])
        np.savetxt(body, rows, fmt="%d", delimiter=",")
        Path(path).write_text(format_header(self.header()) + body.getvalue())

    def header(self) -> dict[str, str]:
        head = {
            "kind": "ideal_trace",
            "snr_db": repr(float(self.snr_db)),
            "t_max": str(self.t_max),
            "c": repr(float(self.c)),
            "seed": str(self.seed),
            "frames": str(len(self)),
        }
        head.update({k: v for k, v in self.meta.items() if k not in head})
        return head

    @classmethod
    def load(cls, path) -> "IdealTrace":
        head, lines = read_header(path)
        if head.get("kind") != "ideal_trace":
            raise ValueError(f"{path}: not an ideal trace file")
        data = np.loadtxt(lines[1:], delimiter=",", dtype=np.int64, ndmin=2)
        if data.shape[0] and not np.array_equal(data[:, 0], np.arange(data.shape[0])):
            raise ValueError(f"{path}: rows are not in frame order")
        meta = {k: v for k, v in head.items() if k not in ("kind", "snr_db", "t_max", "c", "seed", "frames")}
        return cls(
            data[:, 1], data[:, 2].astype(bool), float(head["snr_db"]),
            int(head["t_max"]), float(head["c"]), int(head["seed"]), meta,
        )


def format_header(head: dict[str, str]) -> str:
    return "".join(f"# {k}: {v}\n" for k, v in head.items())


def read_header(path) -> tuple[dict[str, str], list[str]]:
    head: dict[str, str] = {}
    lines = Path(path).read_text().splitlines()
    i = 0
    while i < len(lines) and lines[i].startswith("#"):
        key, _, value = lines[i][1:].strip().partition(":")
        head[key.strip()] = value.strip()
        i += 1
    return head, lines[i:]


@njit(cache=True)
def _simulate_batch(payloads, noise, noise_var, frozen_mask, info_idx, poly_low, r,
                    t_max, c, exact, t_req_out, err_out):
    N = frozen_mask.shape[0]
    kr = info_idx.shape[0]
    k = kr - r
    n = 0
    while (1 << n) < N:
        n += 1
    alpha = np.zeros((n + 1, N))
    beta_left = np.zeros((n + 1, N), dtype=np.uint8)
    beta_cur = np.zeros((n + 1, N), dtype=np.uint8)
    u_hat = np.zeros(N, dtype=np.uint8)
    alpha_dec = np.zeros(N)
    word = np.zeros(kr, dtype=np.uint8)
    x = np.zeros(N, dtype=np.uint8)
    llr = np.zeros(N)
    sigma = np.sqrt(noise_var)
    for b in range(payloads.shape[0]):
        reg = _crc_register(payloads[b], k, poly_low, r)
        x[:] = 0
        for m in range(k):
            x[info_idx[m]] = payloads[b, m]
        for j in range(r):
            x[info_idx[k + j]] = (reg >> (r - 1 - j)) & 1
        _polar_transform(x)
        for j in range(N):
            llr[j] = 2.0 * (1.0 - 2.0 * x[j] + sigma * noise[b, j]) / noise_var
        t, ok = scf_kernel(llr, frozen_mask, info_idx, poly_low, r, t_max, c, exact,
                           u_hat, alpha_dec, alpha, beta_left, beta_cur, word)
        err = not ok
        for m in range(k):
            if word[m] != payloads[b, m]:
                err = True
        t_req_out[b] = t
        err_out[b] = err


def _run_frames(spec: CodeSpec, cfg: ScfConfig, noise_var: float, seed: int,
                start: int, stop: int, batch: int = 2048):
    t_req = np.zeros(stop - start, dtype=np.int32)
    err = np.zeros(stop - start, dtype=np.bool_)
    mask, info = spec.frozen_mask, spec.info_indices
    poly_low = spec.crc_poly & ((1 << spec.r) - 1)
    cursor = StreamCursor(seed)
    for lo in range(start, stop, batch):
        hi = min(lo + batch, stop)
        payloads = np.empty((hi - lo, spec.k), dtype=np.uint8)
        noise = np.empty((hi - lo, spec.N))
        for j, s in enumerate(range(lo, hi)):
            gen = cursor.seek(s)
            payloads[j] = random_bits(gen, spec.k)
            gen.standard_normal(out=noise[j])
        _simulate_batch(payloads, noise, noise_var, mask, info, poly_low, spec.r,
                        cfg.t_max, cfg.c, cfg.exact_f,
                        t_req[lo - start: hi - start], err[lo - start: hi - start])
    return t_req, err


def _run_frames_star(args):
    return _run_frames(*args)


def run_ideal_sim(
    spec: CodeSpec,
    cfg: ScfConfig,
    snr_db: float,
    num_frames: int,
    seed: int,
    snr_rate: str = "info",
    workers: int | None = 1,
    chunk: int = 65536,
) -> IdealTrace:
    """Monte Carlo SCF decoding; word ``s`` draws from substream ``(seed, s)``.

    Per word: random payload, CRC, polar encoding, BPSK/AWGN, SCF decoding.
    A word is in error if decoding fails or the accepted payload is wrong.
    Results do not depend on ``workers``.
    """
    if num_frames < 1:
        raise ValueError("num_frames must be >= 1")
    cfg.check_against(spec)
    noise_var = snr_to_noise_var(snr_db, channel_rate(spec, snr_rate))
    workers = workers or os.cpu_count() or 1
    bounds = [(lo, min(lo + chunk, num_frames)) for lo in range(0, num_frames, chunk)]
    jobs = [(spec, cfg, noise_var, seed, lo, hi) for lo, hi in bounds]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_run_frames_star, jobs))
    else:
        parts = [_run_frames(*job) for job in jobs]
    t_req = np.concatenate([p[0] for p in parts])
    err = np.concatenate([p[1] for p in parts])
    meta = run_metadata(spec, cfg, snr_rate)
    return IdealTrace(t_req, err, snr_db, cfg.t_max, cfg.c, seed, meta)


def run_metadata(spec: CodeSpec, cfg: ScfConfig, snr_rate: str) -> dict[str, str]:
    return {
        "N": str(spec.N),
        "k": str(spec.k),
        "r": str(spec.r),
        "crc_poly": hex(spec.crc_poly),
        "crc_convention": CRC_CONVENTION,
        "design_snr_db": repr(spec.design_snr_db),
        "frozen_sha256_16": spec_fingerprint(spec),
        "f_kernel": "exact" if cfg.exact_f else "min-sum",
        "snr_rate": f"{snr_rate} ({channel_rate(spec, snr_rate)!r})",
        "rng": GENERATOR_ID,
        "version": __version__,
    }


# -- phase 2 -----------------------------------------------------------------


def resolve_timing(upsilon_pr) -> tuple[int, int]:
    """Smallest integer ``(tau_sc, tau_ch)`` with ``tau_ch / tau_sc == upsilon_pr``."""
    u = Fraction(upsilon_pr)
    if u < 1:
        raise ValueError(f"production coefficient must be >= 1, got {u}")
    return u.denominator, u.numerator


# decimal production coefficients used in the experiments, as exact ratios
UPSILON_PRESETS = {
    "1.091": Fraction(12, 11),
    "1.11": Fraction(10, 9),
    "1.125": Fraction(9, 8),
    "1.15": Fraction(23, 20),
    "1.2": Fraction(6, 5),
}


def parse_upsilon(text: str) -> Fraction:
    text = text.strip()
    if text in UPSILON_PRESETS:
        return UPSILON_PRESETS[text]
    return Fraction(text)


@dataclass(frozen=True)
class SystemConfig:
    upsilon_pr: Fraction
    thresholds: ThresholdConfig
    b_tot: int = 100
    tau_sc: int | None = None
    warmup_words: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "upsilon_pr", Fraction(self.upsilon_pr))
        q, _ = resolve_timing(self.upsilon_pr)
        if self.tau_sc is not None and self.tau_sc % q:
            raise ValueError(f"tau_sc={self.tau_sc} must be a multiple of {q} for upsilon={self.upsilon_pr}")
        if self.b_tot < 1:
            raise ValueError("b_tot must be >= 1")
        self.thresholds.validate_for(self.b_tot)

    @property
    def timing(self) -> tuple[int, int]:
        tau_sc, tau_ch = resolve_timing(self.upsilon_pr)
        if self.tau_sc is not None:
            scale = self.tau_sc // tau_sc
            tau_sc, tau_ch = tau_sc * scale, tau_ch * scale
        return tau_sc, tau_ch

    @property
    def warmup(self) -> int:
        return self.b_tot if self.warmup_words is None else self.warmup_words


@dataclass
class SimTrace:
    chi_occ: np.ndarray
    psi_res: np.ndarray
    e_prime: np.ndarray
    drops: int
    overflow: bool = False
    peak_occ: int = 0
    words_done: int = 0

    @property
    def max_occ(self) -> int:
        return int(self.chi_occ.max()) if self.chi_occ.size else 0

    def fer(self, skip_words: int = 0) -> float:
        """FER over completed words after ``skip_words``; NaN if there are none."""
        if self.words_done <= skip_words:
            return float("nan")
        return float(self.e_prime[skip_words: self.words_done].mean())


def calc_fer_impact(psi_res, psi_req, e_flags) -> np.ndarray:
    """A word is in error if it failed ideally or was stopped early."""
    psi_res, psi_req = np.asarray(psi_res), np.asarray(psi_req)
    e_flags = np.asarray(e_flags, dtype=np.bool_)
    if not psi_res.shape == psi_req.shape == e_flags.shape:
        raise ValueError("psi_res, psi_req and e_flags must have equal lengths")
    return e_flags | (psi_res < psi_req)


def _time_bound(psi_req, tau_sc: int, tau_ch: int) -> int:
    return (len(psi_req) - 1) * tau_ch + int(np.sum(psi_req, dtype=np.int64)) * tau_sc + len(psi_req) + 2


@njit(cache=True)
def _system_kernel(psi_req, tau_sc, tau_ch, b_tot, b_thr, t_thr, psi_res, chi_occ):
    """Time-unit loop; returns (units, words_done, overflow, peak)."""
    S = psi_req.shape[0]
    P = b_thr.shape[0]
    b_occ = 0
    produced = 0
    next_arrival = 0
    busy = False
    t_cur = 0
    phase = 0
    t_req = 0
    s = 0
    peak = 0
    i = 0
    while s < S:
        if produced < S and i == next_arrival:
            if b_occ == b_tot:
                return i, s, True, peak
            b_occ += 1
            produced += 1
            next_arrival += tau_ch
            if b_occ > peak:
                peak = b_occ
        if busy:
            stop = t_cur >= t_req
            if not stop:
                for p in range(P):
                    if b_occ > b_thr[p] and t_cur >= t_thr[p]:
                        stop = True
                        break
            if stop:
                psi_res[s] = t_cur
                s += 1
                busy = False
                if s == S:
                    chi_occ[i] = b_occ
                    i += 1
                    break
        if not busy and b_occ > 0:
            b_occ -= 1
            busy = True
            t_cur = 0
            phase = 0
            t_req = psi_req[s]
        if busy:
            phase += 1
            if phase == tau_sc:
                t_cur += 1
                phase = 0
        chi_occ[i] = b_occ
        i += 1
    return i, s, False, peak


def _finish(psi_res, chi_occ, units, done, overflow, peak, trace, strict):
    psi_req = trace.psi_req
    if overflow and strict:
        raise BufferOverflow(f"buffer overflow at time unit {units} after {done} words")
    e_prime = calc_fer_impact(psi_res, psi_req, trace.e_flags)
    e_prime[done:] = True
    drops = int(np.count_nonzero(psi_res[:done] < psi_req[:done]))
    return SimTrace(chi_occ[:units].copy(), psi_res, e_prime, drops, overflow, peak, done)


def run_system_sim(sys: SystemConfig, trace: IdealTrace, strict: bool = True) -> SimTrace:
    """Replay ``trace`` through channel, buffer, controller and decoder.

    Each loop iteration is one time unit: the channel pushes a word every
    ``tau_ch`` units, the controller may stop the word in service, an idle
    decoder fetches the next word (releasing its slot), and the decoder
    spends the unit on the current trial (``tau_sc`` units per trial).

    On overflow raises :class:`BufferOverflow` when ``strict``; otherwise
    returns the truncated trace with ``overflow=True``, unfinished words
    counted as errors.
    """
    psi_req = trace.psi_req
    if len(psi_req) == 0:
        raise ValueError("empty trace")
    tau_sc, tau_ch = sys.timing
    thr = sys.thresholds
    psi_res = np.zeros(len(psi_req), dtype=np.int32)
    dtype = np.int16 if sys.b_tot < 2**15 else np.int32
    chi_occ = np.zeros(_time_bound(psi_req, tau_sc, tau_ch), dtype=dtype)
    units, done, overflow, peak = _system_kernel(
        psi_req, tau_sc, tau_ch, sys.b_tot,
        np.asarray(thr.b_thresholds, dtype=np.int64), np.asarray(thr.t_thresholds, dtype=np.int64),
        psi_res, chi_occ,
    )
    return _finish(psi_res, chi_occ, units, done, overflow, peak, trace, strict)


def run_system_sim_reference(sys: SystemConfig, trace: IdealTrace, strict: bool = True,
                             check_conservation: bool = False) -> SimTrace:
    """Object-level twin of :func:`run_system_sim` built on ``CircularBuffer``.

    Slow; used to cross-check the compiled loop.
    """
    psi_req = trace.psi_req
    S = len(psi_req)
    if S == 0:
        raise ValueError("empty trace")
    tau_sc, tau_ch = sys.timing
    buf = CircularBuffer(sys.b_tot)
    psi_res = np.zeros(S, dtype=np.int32)
    chi: list[int] = []
    produced = s = peak = 0
    current = None
    t_cur = phase = 0
    i = 0
    overflow = False
    while s < S:
        if produced < S and i % tau_ch == 0:
            try:
                buf.push(produced)
            except BufferOverflow:
                overflow = True
                break
            produced += 1
            peak = max(peak, buf.b_occ)
        if current is not None:
            if t_cur >= psi_req[current] or gen_ctrl_sigs(sys.thresholds, buf.b_occ, t_cur):
                psi_res[current] = t_cur
                s += 1
                current = None
                if s == S:
                    chi.append(buf.b_occ)
                    i += 1
                    break
        if current is None and buf.b_occ:
            current = buf.pop()
            if current != s:
                raise AssertionError("FIFO order violated")
            t_cur = phase = 0
        if current is not None:
            phase += 1
            if phase == tau_sc:
                t_cur += 1
                phase = 0
        if check_conservation and produced != s + buf.b_occ + (current is not None):
            raise AssertionError(f"word conservation violated at unit {i}")
        chi.append(buf.b_occ)
        i += 1
    chi_occ = np.asarray(chi, dtype=np.int32)
    return _finish(psi_res, chi_occ, len(chi), s, overflow, peak, trace, strict)


def steady_state_start(sys: SystemConfig) -> int:
    """First time unit counted as steady state: arrival of word ``warmup``."""
    return sys.warmup * sys.timing[1]


def fer_std_error(p: float, n: int) -> float:
    return math.sqrt(max(p * (1.0 - p), 0.0) / n) if n else float("nan")
