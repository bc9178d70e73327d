"""Successive-cancellation decoding with an optional forced bit flip."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .polarcode import CodeSpec


@njit(cache=True)
def f_node(a, b, exact=False):
    """Check-node update; min-sum unless ``exact``."""
    if exact:
        # 2 atanh(tanh(a/2) tanh(b/2)) rewritten so large LLRs keep full precision
        x, y = abs(a), abs(b)
        m = min(x, y) + math.log1p(math.exp(-(x + y))) - math.log1p(math.exp(-abs(x - y)))
    else:
        m = min(abs(a), abs(b))
    if (a < 0.0) != (b < 0.0):
        return -m
    return m


@njit(cache=True)
def g_node(a, b, u):
    """Variable-node update ``b + (1 - 2u) a``."""
    if u:
        return b - a
    return b + a


@njit(cache=True)
def hard_decision(llr):
    # LLR exactly zero decides 0
    return 1 if llr < 0.0 else 0


class Workspace:
    """Scratch arrays for one decoder instance; not shared between threads."""

    def __init__(self, N: int):
        n = N.bit_length() - 1
        self.alpha = np.zeros((n + 1, N))
        self.beta_left = np.zeros((n + 1, N), dtype=np.uint8)
        self.beta_cur = np.zeros((n + 1, N), dtype=np.uint8)


@njit(cache=True)
def sc_pass(alpha_ch, frozen_mask, flip_index, exact, u_hat, alpha_dec, alpha, beta_left, beta_cur):
    """One SC pass in natural index order.

    ``alpha[d, :N >> d]`` holds the LLRs of the active node at depth ``d``
    (depth 0 is the channel). ``beta_left[d]`` keeps the re-encoded bits of
    the most recent completed left child at depth ``d``.
    """
    N = alpha_ch.shape[0]
    n = 0
    while (1 << n) < N:
        n += 1
    for j in range(N):
        alpha[0, j] = alpha_ch[j]

    for i in range(N):
        if i == 0:
            d0 = 0
        else:
            diff = i ^ (i - 1)
            h = 0
            while diff > 1:
                diff >>= 1
                h += 1
            # branch point: node at depth n-1-h takes its right (g) child
            d0 = n - 1 - h
            half = N >> (d0 + 1)
            for j in range(half):
                alpha[d0 + 1, j] = g_node(alpha[d0, j], alpha[d0, j + half], beta_left[d0 + 1, j])
            d0 += 1
        for d in range(d0, n):
            half = N >> (d + 1)
            for j in range(half):
                alpha[d + 1, j] = f_node(alpha[d, j], alpha[d, j + half], exact)

        llr = alpha[n, 0]
        alpha_dec[i] = llr
        if frozen_mask[i]:
            bit = 0
        else:
            bit = hard_decision(llr)
            if i == flip_index:
                bit = 1 - bit
        u_hat[i] = bit

        # propagate partial sums upward through completed right children
        d = n
        beta_cur[n, 0] = bit
        while d > 0 and (i >> (n - d)) & 1:
            size = N >> d
            for j in range(size):
                b = beta_cur[d, j]
                beta_cur[d - 1, j] = beta_left[d, j] ^ b
                beta_cur[d - 1, j + size] = b
            d -= 1
        if d > 0:
            size = N >> d
            for j in range(size):
                beta_left[d, j] = beta_cur[d, j]


@dataclass
class ScResult:
    u_hat: np.ndarray
    alpha_dec: np.ndarray


def sc_decode(
    alpha_ch,
    spec: CodeSpec,
    flip_index: int | None = None,
    exact: bool = False,
    workspace: Workspace | None = None,
) -> ScResult:
    """Run one SC pass; ``flip_index`` inverts that bit's hard decision."""
    alpha_ch = np.ascontiguousarray(alpha_ch, dtype=np.float64)
    if alpha_ch.shape != (spec.N,):
        raise ValueError(f"expected {spec.N} channel LLRs, got shape {alpha_ch.shape}")
    mask = spec.frozen_mask
    if flip_index is None:
        flip_index = -1
    elif not 0 <= flip_index < spec.N or mask[flip_index]:
        raise ValueError(f"flip index {flip_index} is frozen or out of range")
    ws = workspace or Workspace(spec.N)
    u_hat = np.zeros(spec.N, dtype=np.uint8)
    alpha_dec = np.zeros(spec.N)
    sc_pass(alpha_ch, mask, flip_index, exact, u_hat, alpha_dec, ws.alpha, ws.beta_left, ws.beta_cur)
    return ScResult(u_hat, alpha_dec)
