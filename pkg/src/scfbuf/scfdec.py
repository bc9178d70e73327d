"""SC-Flip decoding with the successive flip metric.

The flip list is built once from the initial SC pass: each non-frozen bit
``i`` is scored by ``|a_i| + (1/c) * sum_{j in A, j <= i} softplus(-c |a_j|)``
where ``a`` are the decision LLRs, and the smallest scores are tried first,
one flipped bit per trial.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from numba import njit

from .polarcode import CodeSpec, _crc_matches
from .scdec import Workspace, sc_pass


class FlipCandidate(NamedTuple):
    index: int
    metric: float


@dataclass(frozen=True)
class ScfConfig:
    t_max: int = 11
    c: float = 0.3
    exact_f: bool = False

    def __post_init__(self):
        if self.t_max < 1:
            raise ValueError(f"t_max must be >= 1, got {self.t_max}")
        if not 0.0 < self.c <= 1.0:
            raise ValueError(f"c must lie in (0, 1], got {self.c}")

    def check_against(self, spec: CodeSpec) -> None:
        if self.t_max > spec.num_nonfrozen:
            raise ValueError(f"t_max must not exceed k+r={spec.num_nonfrozen}")


@dataclass
class DecodeOutcome:
    success: bool
    t_req: int
    payload: np.ndarray


@njit(cache=True)
def flip_metrics(alpha_dec, info_idx, c):
    out = np.empty(info_idx.shape[0])
    acc = 0.0
    for m in range(info_idx.shape[0]):
        a = abs(alpha_dec[info_idx[m]])
        # softplus(-c|a|) = log1p(exp(-c|a|)); exp argument <= 0 so no overflow
        acc += np.log1p(np.exp(-c * a))
        out[m] = a + acc / c
    return out


def build_flip_list(alpha_dec, spec: CodeSpec, c: float) -> list[FlipCandidate]:
    """All non-frozen bits ordered by ascending metric, ties by index."""
    info = spec.info_indices
    metrics = flip_metrics(np.asarray(alpha_dec, dtype=np.float64), info, c)
    order = np.argsort(metrics, kind="stable")
    return [FlipCandidate(int(info[o]), float(metrics[o])) for o in order]


@njit(cache=True)
def _payload_ok(u_hat, info_idx, word, poly_low, r):
    for m in range(info_idx.shape[0]):
        word[m] = u_hat[info_idx[m]]
    return _crc_matches(word, info_idx.shape[0] - r, poly_low, r)


@njit(cache=True)
def scf_kernel(alpha_ch, frozen_mask, info_idx, poly_low, r, t_max, c, exact,
               u_hat, alpha_dec, alpha, beta_left, beta_cur, word):
    """Return ``(t_req, crc_matched)``; ``word`` receives the final payload."""
    sc_pass(alpha_ch, frozen_mask, -1, exact, u_hat, alpha_dec, alpha, beta_left, beta_cur)
    if _payload_ok(u_hat, info_idx, word, poly_low, r):
        return 1, True
    if t_max == 1:
        return 1, False
    metrics = flip_metrics(alpha_dec, info_idx, c)
    order = np.argsort(metrics, kind="mergesort")
    for t in range(2, t_max + 1):
        flip = info_idx[order[t - 2]]
        sc_pass(alpha_ch, frozen_mask, flip, exact, u_hat, alpha_dec, alpha, beta_left, beta_cur)
        if _payload_ok(u_hat, info_idx, word, poly_low, r):
            return t, True
    return t_max, False


class ScfDecoder:
    """Owns an SC workspace; one instance per worker."""

    def __init__(self, spec: CodeSpec, cfg: ScfConfig):
        cfg.check_against(spec)
        self.spec = spec
        self.cfg = cfg
        self._mask = spec.frozen_mask
        self._info = spec.info_indices
        self._poly_low = spec.crc_poly & ((1 << spec.r) - 1)
        self._ws = Workspace(spec.N)
        self._u_hat = np.zeros(spec.N, dtype=np.uint8)
        self._alpha_dec = np.zeros(spec.N)

    def decode(self, alpha_ch) -> DecodeOutcome:
        alpha_ch = np.ascontiguousarray(alpha_ch, dtype=np.float64)
        if alpha_ch.shape != (self.spec.N,):
            raise ValueError(f"expected {self.spec.N} channel LLRs, got shape {alpha_ch.shape}")
        word = np.zeros(self.spec.num_nonfrozen, dtype=np.uint8)
        t_req, ok = scf_kernel(
            alpha_ch, self._mask, self._info, self._poly_low, self.spec.r,
            self.cfg.t_max, self.cfg.c, self.cfg.exact_f,
            self._u_hat, self._alpha_dec, self._ws.alpha, self._ws.beta_left,
            self._ws.beta_cur, word,
        )
        return DecodeOutcome(bool(ok), int(t_req), word)


def scf_decode(alpha_ch, spec: CodeSpec, cfg: ScfConfig) -> DecodeOutcome:
    """Decode with up to ``cfg.t_max`` CRC-checked SC trials."""
    return ScfDecoder(spec, cfg).decode(alpha_ch)
