"""Polar code construction, encoding, and CRC handling.

Bit ordering is natural (no bit reversal): ``x = u F^{(x)n}`` with
``F = [[1, 0], [1, 1]]``, so index ``i`` of ``u`` is refined from its most
significant bit downwards during decoding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numba import njit
from scipy.optimize import brentq

# z^16 + z^15 + z^2 + 1, leading term included
CRC16_POLY = 0x18005

# Register convention stamped into output metadata.
CRC_CONVENTION = "init=0,refin=false,refout=false,xorout=0,msb-first"


def is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


def _as_bits(bits) -> np.ndarray:
    arr = np.asarray(bits, dtype=np.uint8)
    if arr.ndim != 1:
        raise ValueError("bit vector must be one-dimensional")
    if np.any(arr > 1):
        raise ValueError("bit vector entries must be 0 or 1")
    return arr


@dataclass(frozen=True)
class CodeSpec:
    """Parameters of a CRC-concatenated polar code.

    ``frozen`` holds the ``N - (k + r)`` frozen positions in ascending order;
    ``crc_poly`` is the generator polynomial as an integer whose bit ``j`` is
    the coefficient of ``z^j`` (degree ``r``).
    """

    N: int
    k: int
    r: int
    frozen: tuple[int, ...]
    crc_poly: int = CRC16_POLY
    design_snr_db: float | None = None
    info: tuple[int, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not is_power_of_two(self.N) or self.N < 2:
            raise ValueError(f"N must be a power of two >= 2, got {self.N}")
        if self.k < 0 or self.r < 0 or self.k + self.r < 1 or self.k + self.r > self.N:
            raise ValueError(f"need 0 < k + r <= N, got k={self.k}, r={self.r}, N={self.N}")
        frozen = tuple(sorted(int(i) for i in self.frozen))
        if len(set(frozen)) != len(frozen):
            raise ValueError("duplicate frozen indices")
        if frozen and (frozen[0] < 0 or frozen[-1] >= self.N):
            raise ValueError("frozen index out of range")
        if len(frozen) != self.N - (self.k + self.r):
            raise ValueError(
                f"|frozen| must be N-(k+r)={self.N - self.k - self.r}, got {len(frozen)}"
            )
        if self.crc_poly.bit_length() - 1 != self.r:
            raise ValueError(f"CRC polynomial degree must equal r={self.r}")
        if self.r > 0 and not self.crc_poly & 1:
            raise ValueError("CRC polynomial must have a nonzero constant term")
        object.__setattr__(self, "frozen", frozen)
        fset = set(frozen)
        object.__setattr__(self, "info", tuple(i for i in range(self.N) if i not in fset))

    @property
    def n(self) -> int:
        return self.N.bit_length() - 1

    @property
    def num_nonfrozen(self) -> int:
        return self.k + self.r

    @property
    def rate(self) -> float:
        """Effective rate (k + r) / N."""
        return (self.k + self.r) / self.N

    @property
    def frozen_mask(self) -> np.ndarray:
        mask = np.zeros(self.N, dtype=np.bool_)
        mask[list(self.frozen)] = True
        return mask

    @property
    def info_indices(self) -> np.ndarray:
        return np.asarray(self.info, dtype=np.int64)

    @classmethod
    def construct(
        cls,
        N: int,
        k: int,
        r: int = 16,
        design_snr_db: float = 2.365,
        crc_poly: int | None = None,
    ) -> "CodeSpec":
        """Build a code whose frozen set comes from :func:`build_frozen_set`."""
        if crc_poly is None:
            crc_poly = CRC16_POLY if r == 16 else _default_poly(r)
        _, frozen = build_frozen_set(N, k + r, design_snr_db)
        return cls(N, k, r, tuple(frozen), crc_poly, design_snr_db)


def _default_poly(r: int) -> int:
    if r == 0:
        return 1
    raise ValueError(f"no default CRC polynomial for r={r}; pass crc_poly")


# -- Gaussian-approximation construction ------------------------------------

_PHI_A, _PHI_B, _PHI_G = 0.4527, 0.86, 0.0218
_PHI_SPLIT = 10.0
_LOG_PHI_AT_SPLIT = -_PHI_A * _PHI_SPLIT**_PHI_B + _PHI_G


def _log_phi(m: float) -> float:
    """log of the Chung et al. approximation of phi(m)."""
    if m <= 0.0:
        return 0.0
    if m < _PHI_SPLIT:
        return -_PHI_A * m**_PHI_B + _PHI_G
    return 0.5 * math.log(math.pi / m) - m / 4.0 + math.log1p(-10.0 / (7.0 * m))


def _inv_log_phi(log_y: float) -> float:
    if log_y >= 0.0:
        return 0.0
    if log_y > _LOG_PHI_AT_SPLIT:
        return ((_PHI_G - log_y) / _PHI_A) ** (1.0 / _PHI_B)
    hi = max(2.0 * _PHI_SPLIT, -8.0 * log_y)
    while _log_phi(hi) > log_y:
        hi *= 2.0
    return brentq(lambda m: _log_phi(m) - log_y, _PHI_SPLIT, hi, xtol=1e-12, rtol=1e-14)


def _check_mean(m: float) -> float:
    # phi^{-1}(1 - (1 - phi(m))^2), with 1-(1-p)^2 written as p(2-p)
    lp = _log_phi(m)
    p = math.exp(lp)
    return _inv_log_phi(lp + math.log(2.0 - p))


def ga_mean_llrs(N: int, design_snr_db: float, rate: float) -> np.ndarray:
    """Mean LLR of each synthetic channel under the Gaussian approximation.

    The physical channel is BPSK/AWGN at Eb/N0 ``design_snr_db`` with the
    given effective rate; larger means are more reliable.
    """
    if not is_power_of_two(N):
        raise ValueError(f"N must be a power of two, got {N}")
    sigma2 = 1.0 / (2.0 * rate * 10.0 ** (design_snr_db / 10.0))
    means = np.array([2.0 / sigma2])
    for _ in range(N.bit_length() - 1):
        upper = np.array([_check_mean(m) for m in means])
        means = np.stack([upper, 2.0 * means], axis=1).reshape(-1)
    return means


def build_frozen_set(
    N: int, num_nonfrozen: int, design_snr_db: float, rate: float | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """Rank bit channels and freeze the least reliable ones.

    Returns ``(ranking, frozen)``: ``ranking`` lists every index from least
    to most reliable (ties broken by ascending index) and ``frozen`` is the
    sorted set of the ``N - num_nonfrozen`` least reliable indices.
    ``rate`` converts the design Eb/N0 to a noise variance and defaults to
    ``num_nonfrozen / N``.
    """
    if not is_power_of_two(N):
        raise ValueError(f"N must be a power of two, got {N}")
    if not 1 <= num_nonfrozen <= N:
        raise ValueError(f"num_nonfrozen must lie in [1, {N}], got {num_nonfrozen}")
    if rate is None:
        rate = num_nonfrozen / N
    means = ga_mean_llrs(N, design_snr_db, rate)
    ranking = np.lexsort((np.arange(N), means))
    frozen = np.sort(ranking[: N - num_nonfrozen])
    return ranking, frozen


# -- encoding ----------------------------------------------------------------


@njit(cache=True)
def _polar_transform(x):
    n = x.shape[0]
    half = 1
    while half < n:
        for start in range(0, n, 2 * half):
            for j in range(start, start + half):
                x[j] ^= x[j + half]
        half *= 2


def polar_encode(u) -> np.ndarray:
    """Return ``u F^{(x)n}`` over GF(2) using butterfly stages."""
    x = _as_bits(u).copy()
    if not is_power_of_two(x.shape[0]):
        raise ValueError(f"length must be a power of two, got {x.shape[0]}")
    _polar_transform(x)
    return x


def assemble_u(payload, spec: CodeSpec) -> np.ndarray:
    """Place payload bits at the non-frozen indices; frozen bits are zero."""
    payload = _as_bits(payload)
    if payload.shape[0] != spec.num_nonfrozen:
        raise ValueError(f"payload length must be {spec.num_nonfrozen}, got {payload.shape[0]}")
    u = np.zeros(spec.N, dtype=np.uint8)
    u[spec.info_indices] = payload
    return u


def extract_payload(u, spec: CodeSpec) -> np.ndarray:
    return np.asarray(u, dtype=np.uint8)[spec.info_indices]


# -- CRC ---------------------------------------------------------------------


@njit(cache=True)
def _crc_register(bits, stop, poly_low, r):
    # remainder of bits[:stop] * z^r modulo the generator
    if r == 0:
        return 0
    top = r - 1
    mask = (1 << r) - 1
    reg = 0
    for i in range(stop):
        fb = ((reg >> top) & 1) ^ bits[i]
        reg = (reg << 1) & mask
        if fb:
            reg ^= poly_low
    return reg


@njit(cache=True)
def _crc_matches(word, k, poly_low, r):
    reg = _crc_register(word, k, poly_low, r)
    for j in range(r):
        if word[k + j] != (reg >> (r - 1 - j)) & 1:
            return False
    return True


def crc_remainder(info, poly: int = CRC16_POLY) -> np.ndarray:
    """r-bit remainder of ``info(z) * z^r`` modulo ``poly``, MSB first."""
    info = _as_bits(info)
    r = poly.bit_length() - 1
    reg = _crc_register(info, info.shape[0], poly & ((1 << r) - 1), r)
    return np.array([(reg >> (r - 1 - j)) & 1 for j in range(r)], dtype=np.uint8)


def crc_encode(info, poly: int = CRC16_POLY) -> np.ndarray:
    """Append the CRC remainder to ``info`` (systematic, length k + r)."""
    info = _as_bits(info)
    return np.concatenate([info, crc_remainder(info, poly)])


def crc_check(word, poly: int = CRC16_POLY) -> bool:
    """True iff ``word`` is divisible by ``poly``."""
    word = _as_bits(word)
    r = poly.bit_length() - 1
    if word.shape[0] < r:
        raise ValueError(f"word shorter than CRC length {r}")
    return bool(_crc_matches(word, word.shape[0] - r, poly & ((1 << r) - 1), r))


# -- frozen-set files --------------------------------------------------------


def save_frozen_set(spec: CodeSpec, path) -> None:
    """Write ``N k r`` on line 1 and the ascending frozen indices on line 2."""
    lines = [f"{spec.N} {spec.k} {spec.r}", " ".join(str(i) for i in spec.frozen)]
    Path(path).write_text("\n".join(lines) + "\n")


def load_frozen_set(path, crc_poly: int | None = None) -> CodeSpec:
    text = Path(path).read_text().splitlines()
    if not text:
        raise ValueError(f"{path}: empty frozen-set file")
    try:
        N, k, r = (int(v) for v in text[0].split())
        frozen = [int(v) for v in text[1].split()] if len(text) > 1 else []
    except ValueError as exc:
        raise ValueError(f"{path}: malformed frozen-set file") from exc
    if frozen != sorted(frozen):
        raise ValueError(f"{path}: frozen indices must be ascending")
    if crc_poly is None:
        crc_poly = CRC16_POLY if r == 16 else _default_poly(r)
    return CodeSpec(N, k, r, tuple(frozen), crc_poly)
