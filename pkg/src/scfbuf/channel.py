"""BPSK over AWGN and channel LLRs."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Recorded in run metadata so noise can be replayed.
GENERATOR_ID = "numpy.Philox(key=seed, counter=[0,0,0,stream_id])+Generator.standard_normal"


def snr_to_noise_var(ebn0_db: float, rate: float) -> float:
    """Noise variance per real dimension for unit-energy BPSK at Eb/N0."""
    if not 0.0 < rate <= 1.0:
        raise ValueError(f"rate must lie in (0, 1], got {rate}")
    return 1.0 / (2.0 * rate * 10.0 ** (ebn0_db / 10.0))


@dataclass(frozen=True)
class ChannelParams:
    ebn0_db: float
    rate: float

    @property
    def noise_var(self) -> float:
        return snr_to_noise_var(self.ebn0_db, self.rate)


@dataclass(frozen=True)
class RngStream:
    """Counter-based substream: one per codeword index."""

    seed: int
    stream_id: int

    def generator(self) -> np.random.Generator:
        bg = np.random.Philox(key=self.seed, counter=[0, 0, 0, self.stream_id])
        return np.random.Generator(bg)


class StreamCursor:
    """Reuses one Philox bit generator and jumps it between substreams.

    Cheaper than building a fresh generator per word; yields exactly the
    samples of ``RngStream(seed, stream_id).generator()``.
    """

    def __init__(self, seed: int):
        self.seed = seed
        self._bg = np.random.Philox(key=seed)
        self._key = self._bg.state["state"]["key"].copy()
        self.gen = np.random.Generator(self._bg)

    def seek(self, stream_id: int) -> np.random.Generator:
        self._bg.state = {
            "bit_generator": "Philox",
            "state": {
                "counter": np.array([0, 0, 0, stream_id], dtype=np.uint64),
                "key": self._key,
            },
            "buffer": np.zeros(4, dtype=np.uint64),
            "buffer_pos": 4,
            "has_uint32": 0,
            "uinteger": 0,
        }
        return self.gen


def random_bits(gen: np.random.Generator, k: int) -> np.ndarray:
    return np.unpackbits(np.frombuffer(gen.bytes((k + 7) // 8), dtype=np.uint8))[:k]


def llr_from_noise(x, noise, noise_var: float) -> np.ndarray:
    """Channel LLRs ``2 y / sigma^2`` for ``y = (1 - 2x) + sigma * noise``."""
    y = 1.0 - 2.0 * np.asarray(x, dtype=np.float64) + np.sqrt(noise_var) * noise
    return 2.0 * y / noise_var


def transmit(x, params: ChannelParams, rng) -> np.ndarray:
    """Send codeword ``x`` through BPSK/AWGN and return channel LLRs.

    ``rng`` is an :class:`RngStream` or a numpy ``Generator``.
    """
    if isinstance(rng, RngStream):
        rng = rng.generator()
    x = np.asarray(x)
    return llr_from_noise(x, rng.standard_normal(x.shape[0]), params.noise_var)
