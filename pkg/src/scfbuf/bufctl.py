"""Input buffer, threshold controller, and threshold selection."""

from __future__ import annotations

import enum
import math
from collections.abc import Mapping
from dataclasses import dataclass
from fractions import Fraction

import numpy as np


class BufferOverflow(RuntimeError):
    pass


class BufferUnderflow(RuntimeError):
    pass


class CircularBuffer:
    """Fixed-capacity FIFO of word handles backed by a ring of slots."""

    def __init__(self, b_tot: int):
        if b_tot < 1:
            raise ValueError(f"b_tot must be >= 1, got {b_tot}")
        self.b_tot = b_tot
        self._slots = [None] * b_tot
        self._head = 0
        self.b_occ = 0

    def __len__(self) -> int:
        return self.b_occ

    @property
    def full(self) -> bool:
        return self.b_occ == self.b_tot

    def push(self, word) -> None:
        if self.b_occ == self.b_tot:
            raise BufferOverflow(f"push into full buffer ({self.b_tot} slots)")
        self._slots[(self._head + self.b_occ) % self.b_tot] = word
        self.b_occ += 1

    def peek(self):
        if self.b_occ == 0:
            raise BufferUnderflow("peek on empty buffer")
        return self._slots[self._head]

    def pop(self):
        if self.b_occ == 0:
            raise BufferUnderflow("pop on empty buffer")
        word = self._slots[self._head]
        self._slots[self._head] = None
        self._head = (self._head + 1) % self.b_tot
        self.b_occ -= 1
        return word


class Mechanism(str, enum.Enum):
    DROP = "drop"
    MULTI = "multi"
    NONE = "none"


@dataclass(frozen=True)
class ThresholdConfig:
    """Paired thresholds: stop when ``b_occ > B_i`` and ``t_cur >= T_i``.

    ``b_thresholds`` must be strictly descending and ``t_thresholds``
    non-decreasing (equal trial thresholds appear when the budget
    degenerates to ``T_max``). An empty config never stops the decoder.
    """

    b_thresholds: tuple[int, ...]
    t_thresholds: tuple[int, ...]

    def __post_init__(self):
        b = tuple(int(v) for v in self.b_thresholds)
        t = tuple(int(v) for v in self.t_thresholds)
        if len(b) != len(t):
            raise ValueError("B and T must have the same number of thresholds")
        if any(x <= y for x, y in zip(b, b[1:])):
            raise ValueError(f"buffer thresholds must be strictly descending, got {b}")
        if any(x > y for x, y in zip(t, t[1:])):
            raise ValueError(f"trial thresholds must be ascending, got {t}")
        if any(v < 0 for v in b + t):
            raise ValueError("thresholds must be non-negative")
        object.__setattr__(self, "b_thresholds", b)
        object.__setattr__(self, "t_thresholds", t)

    @property
    def p(self) -> int:
        return len(self.b_thresholds)

    def validate_for(self, b_tot: int, t_max: int | None = None) -> None:
        if self.p and self.b_thresholds[0] >= b_tot:
            raise ValueError(f"B_1={self.b_thresholds[0]} must be below b_tot={b_tot}")
        if t_max is not None and self.p and self.t_thresholds[-1] > t_max:
            raise ValueError(f"T_P={self.t_thresholds[-1]} exceeds t_max={t_max}")

    @classmethod
    def codeword_dropping(cls, b_tot: int) -> "ThresholdConfig":
        return cls((b_tot - 1,), (0,))

    @classmethod
    def multi_threshold(cls, b_tot: int, t_bal: int, t_max: int) -> "ThresholdConfig":
        return cls(default_buffer_thresholds(b_tot), (0, min(t_bal, t_max), min(t_bal + 1, t_max)))

    @classmethod
    def unlimited(cls) -> "ThresholdConfig":
        return cls((), ())

    def to_text(self) -> str:
        return (
            f"b_thresholds = {','.join(map(str, self.b_thresholds))}\n"
            f"t_thresholds = {','.join(map(str, self.t_thresholds))}\n"
        )

    @classmethod
    def parse(cls, b: str, t: str) -> "ThresholdConfig":
        def ints(s):
            return tuple(int(v) for v in s.replace(" ", "").split(",") if v)

        return cls(ints(b), ints(t))


def default_buffer_thresholds(b_tot: int) -> tuple[int, int, int]:
    """{b_tot-1, floor(b_tot/2), ceil(b_tot/10)}, i.e. {99, 50, 10} at 100."""
    b = (b_tot - 1, b_tot // 2, math.ceil(b_tot / 10))
    if not b[0] > b[1] > b[2] >= 0:
        raise ValueError(f"b_tot={b_tot} too small for three distinct buffer thresholds")
    return b


def gen_ctrl_sigs(cfg: ThresholdConfig, b_occ: int, t_cur: int) -> bool:
    """Stop signal from the first pair with ``b_occ > B_i and t_cur >= T_i``."""
    for b_i, t_i in zip(cfg.b_thresholds, cfg.t_thresholds):
        if b_occ > b_i and t_cur >= t_i:
            return True
    return False


@dataclass
class TrialStats:
    """Average trial count per ``T_max`` measured in the ideal system."""

    t_av_by_tmax: Mapping[int, float]
    snr_db: float | None = None

    @classmethod
    def from_required_trials(cls, psi_req, t_max: int, snr_db: float | None = None) -> "TrialStats":
        # a word needing t trials under T_max uses min(t, m) trials under m <= T_max
        psi = np.asarray(psi_req)
        table = {m: float(np.minimum(psi, m).mean()) for m in range(1, t_max + 1)}
        return cls(table, snr_db)


def balanced_trials(stats: TrialStats, upsilon_pr, t_max: int) -> int:
    """Largest ``T_max`` whose average trial count is strictly below ``upsilon_pr``."""
    upsilon_pr = Fraction(upsilon_pr)
    missing = [m for m in range(1, t_max + 1) if m not in stats.t_av_by_tmax]
    if missing:
        raise ValueError(f"trial statistics missing T_max values {missing}")
    feasible = [m for m in range(1, t_max + 1) if stats.t_av_by_tmax[m] < upsilon_pr]
    if not feasible:
        raise ValueError(
            f"production coefficient {upsilon_pr} is infeasible: T_av(1)="
            f"{stats.t_av_by_tmax[1]} is not below it"
        )
    return max(feasible)


def select_thresholds(
    stats: TrialStats,
    upsilon_pr,
    t_max: int,
    b_tot: int,
    mechanism: Mechanism | str = Mechanism.MULTI,
) -> tuple[ThresholdConfig, int]:
    """Derive controller thresholds for a target production coefficient.

    Returns ``(thresholds, t_bal)``. Multi-threshold uses ``T = {0, T_bal,
    T_bal + 1}`` capped at ``t_max``; codeword dropping ignores ``T_bal``.
    """
    mechanism = Mechanism(mechanism)
    t_bal = balanced_trials(stats, upsilon_pr, t_max)
    if mechanism is Mechanism.MULTI:
        cfg = ThresholdConfig.multi_threshold(b_tot, t_bal, t_max)
    elif mechanism is Mechanism.DROP:
        cfg = ThresholdConfig.codeword_dropping(b_tot)
    else:
        cfg = ThresholdConfig.unlimited()
    cfg.validate_for(b_tot, t_max)
    return cfg, t_bal
