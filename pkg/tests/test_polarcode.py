import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from scfbuf.polarcode import (
    CRC16_POLY,
    CodeSpec,
    assemble_u,
    build_frozen_set,
    crc_check,
    crc_encode,
    crc_remainder,
    extract_payload,
    load_frozen_set,
    polar_encode,
    save_frozen_set,
)


def kron_matrix(n):
    F = np.array([[1, 0], [1, 1]], dtype=np.int64)
    G = np.array([[1]], dtype=np.int64)
    for _ in range(n):
        G = np.kron(G, F)
    return G


def long_division_remainder(bits, poly):
    """Remainder of bits(z) * z^r mod poly via integer polynomial arithmetic."""
    r = poly.bit_length() - 1
    value = 0
    for b in bits:
        value = (value << 1) | int(b)
    value <<= r
    while value.bit_length() > r:
        value ^= poly << (value.bit_length() - 1 - r)
    return [(value >> (r - 1 - j)) & 1 for j in range(r)]


def poly_mod(bits, poly):
    value = 0
    for b in bits:
        value = (value << 1) | int(b)
    r = poly.bit_length() - 1
    while value.bit_length() > r:
        value ^= poly << (value.bit_length() - 1 - r)
    return value


bitvecs = st.integers(1, 8).flatmap(
    lambda n: st.lists(st.integers(0, 1), min_size=2**n, max_size=2**n)
)


# -- construction --


def test_n2_freezes_the_degraded_channel():
    ranking, frozen = build_frozen_set(2, 1, 2.0)
    assert list(frozen) == [0]
    assert list(ranking) == [0, 1]


def de_error_probabilities(N, sigma2, samples=400_000, seed=3):
    """Monte Carlo density evolution with exact LLR updates (all-zero codeword)."""
    rng = np.random.default_rng(seed)
    n = N.bit_length() - 1

    def synth(i, depth, llrs):
        if depth == n:
            return llrs[0]
        half = llrs.shape[0] // 2
        a, b = llrs[:half], llrs[half:]
        bit = (i >> (n - 1 - depth)) & 1
        if bit == 0:
            nxt = 2 * np.arctanh(np.clip(np.tanh(a / 2) * np.tanh(b / 2), -1 + 1e-15, 1 - 1e-15))
        else:
            nxt = a + b  # genie-aided: previous bits all zero
        return synth(i, depth + 1, nxt)

    y = 1.0 + np.sqrt(sigma2) * rng.standard_normal((N, samples))
    llr = 2 * y / sigma2
    return np.array([np.mean(synth(i, 0, llr) < 0) for i in range(N)])


def test_n4_order_matches_density_evolution_oracle():
    # moderate SNR at rate 1/2
    sigma2 = 1.0 / (2 * 0.5 * 10 ** (2.0 / 10))
    pe = de_error_probabilities(4, sigma2)
    assert list(np.argsort(-pe)) == [0, 1, 2, 3]
    _, frozen = build_frozen_set(4, 2, 2.0)
    assert list(frozen) == [0, 1]
    ranking, _ = build_frozen_set(4, 2, 2.0)
    assert list(ranking) == [0, 1, 2, 3]


def test_n8_ranking_agrees_with_density_evolution_on_clear_gaps():
    sigma2 = 1.0 / (2 * 0.5 * 10 ** (1.0 / 10))
    pe = de_error_probabilities(8, sigma2, samples=200_000)
    ranking, _ = build_frozen_set(8, 4, 1.0, rate=0.5)
    pos = {int(i): p for p, i in enumerate(ranking)}
    for i in range(8):
        for j in range(8):
            if pe[i] > 2 * pe[j] + 1e-3:
                assert pos[i] < pos[j], (i, j, pe[i], pe[j])


def test_reference_code_size(ref_spec):
    ranking, frozen = build_frozen_set(1024, 528, 2.365)
    assert len(frozen) == 496
    assert sorted(ranking[:496]) == list(frozen)
    assert ref_spec.frozen == tuple(frozen)
    assert len(ref_spec.info) == 528
    assert not set(ref_spec.frozen) & set(ref_spec.info)
    assert ref_spec.rate == pytest.approx(528 / 1024)


def test_construction_is_deterministic():
    a = build_frozen_set(256, 100, 1.5)
    b = build_frozen_set(256, 100, 1.5)
    assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])


def test_construction_sanity():
    ranking, frozen = build_frozen_set(1024, 528, 2.365)
    assert ranking[-1] == 1023
    assert 0 in frozen


@pytest.mark.parametrize("N,kr,snr", [(64, 32, 1.0), (256, 140, 2.0), (1024, 528, 2.365)])
def test_info_set_respects_partial_order(N, kr, snr):
    # setting a zero bit of an index to one never degrades the channel
    _, frozen = build_frozen_set(N, kr, snr)
    fs = set(frozen.tolist())
    n = N.bit_length() - 1
    for i in set(range(N)) - fs:
        for b in range(n):
            assert (i | (1 << b)) not in fs


@pytest.mark.parametrize("N,k", [(3, 1), (0, 1), (8, 0), (8, 9)])
def test_construction_rejects_bad_arguments(N, k):
    with pytest.raises(ValueError):
        build_frozen_set(N, k, 1.0)


def test_codespec_validation():
    with pytest.raises(ValueError):
        CodeSpec(6, 2, 0, (0, 1, 2, 3), 1)
    with pytest.raises(ValueError):
        CodeSpec(8, 2, 0, (0, 1, 2), 1)
    with pytest.raises(ValueError):
        CodeSpec(8, 4, 16, (), CRC16_POLY)
    with pytest.raises(ValueError):
        CodeSpec(8, 4, 2, (0, 1), 0b101 << 1)


# -- encoding --


def test_encode_examples():
    assert list(polar_encode([0] * 8)) == [0] * 8
    assert list(polar_encode([0, 0, 0, 1])) == [1, 1, 1, 1]
    assert list(polar_encode([1, 0, 0, 0])) == [1, 0, 0, 0]


@pytest.mark.parametrize("n", range(1, 7))
def test_encode_matches_kronecker_matrix(n):
    rng = np.random.default_rng(n)
    G = kron_matrix(n)
    for _ in range(20):
        u = rng.integers(0, 2, 2**n)
        assert np.array_equal(polar_encode(u), (u @ G) % 2)


def test_encode_rejects_non_power_of_two():
    with pytest.raises(ValueError):
        polar_encode([0, 1, 0])


@given(bitvecs)
def test_encode_is_involution(u):
    assert np.array_equal(polar_encode(polar_encode(u)), np.array(u, dtype=np.uint8))


@given(bitvecs, st.randoms())
def test_encode_is_linear(a, rnd):
    b = [rnd.randint(0, 1) for _ in a]
    lhs = polar_encode(np.bitwise_xor(a, b))
    assert np.array_equal(lhs, polar_encode(a) ^ polar_encode(b))


# -- CRC --


def test_crc_zero_info_gives_zero_crc():
    assert not crc_encode(np.zeros(512, dtype=np.uint8))[512:].any()


def test_crc_standard_check_value():
    # CRC-16/UMTS (poly 0x8005, init 0, no reflection) of "123456789" is 0xFEE8
    bits = np.unpackbits(np.frombuffer(b"123456789", dtype=np.uint8))
    rem = crc_remainder(bits)
    assert int("".join(map(str, rem)), 2) == 0xFEE8


def test_crc_single_one_matches_long_division():
    for pos in range(8):
        info = np.zeros(8, dtype=np.uint8)
        info[pos] = 1
        assert list(crc_remainder(info)) == long_division_remainder(info, CRC16_POLY)


@settings(max_examples=200)
@given(st.lists(st.integers(0, 1), min_size=1, max_size=600))
def test_crc_matches_long_division(info):
    assert list(crc_remainder(info)) == long_division_remainder(info, CRC16_POLY)


def test_crc_round_trip_random():
    rng = np.random.default_rng(7)
    for _ in range(1000):
        m = rng.integers(0, 2, int(rng.integers(1, 600)), dtype=np.uint8)
        assert crc_check(crc_encode(m))


def test_crc_detects_every_single_bit_error():
    rng = np.random.default_rng(8)
    word = crc_encode(rng.integers(0, 2, 512, dtype=np.uint8))
    for i in range(word.size):
        bad = word.copy()
        bad[i] ^= 1
        assert not crc_check(bad)


def test_crc_detects_bursts_up_to_16():
    rng = np.random.default_rng(9)
    for _ in range(2000):
        word = crc_encode(rng.integers(0, 2, 128, dtype=np.uint8))
        length = int(rng.integers(1, 17))
        start = int(rng.integers(0, word.size - length + 1))
        pattern = rng.integers(0, 2, length, dtype=np.uint8)
        pattern[0] = pattern[-1] = 1
        word[start:start + length] ^= pattern
        assert not crc_check(word)


def test_crc_check_agrees_with_oracle_on_random_words():
    rng = np.random.default_rng(10)
    hits = 0
    for _ in range(3000):
        w = rng.integers(0, 2, 24, dtype=np.uint8)
        if rng.random() < 0.3:
            w = crc_encode(w[:8])
        expected = poly_mod(w, CRC16_POLY) == 0
        hits += expected
        assert crc_check(w) == expected
    assert hits > 0


# -- placement and files --


def test_assemble_examples():
    spec = CodeSpec(4, 2, 0, (0, 1), 1)
    assert list(assemble_u([1, 0], spec)) == [0, 0, 1, 0]
    all_frozen = CodeSpec(4, 1, 0, (0, 1, 2), 1)
    assert list(assemble_u([0], all_frozen)) == [0, 0, 0, 0]
    with pytest.raises(ValueError):
        assemble_u([1, 0, 1], spec)


@given(st.data())
def test_assemble_extract_round_trip(data):
    rng = np.random.default_rng(data.draw(st.integers(0, 2**32 - 1)))
    N = 2 ** data.draw(st.integers(1, 7))
    kr = data.draw(st.integers(1, N))
    frozen = tuple(int(i) for i in np.sort(rng.choice(N, N - kr, replace=False)))
    spec = CodeSpec(N, kr, 0, frozen, 1)
    p = rng.integers(0, 2, kr, dtype=np.uint8)
    u = assemble_u(p, spec)
    assert np.array_equal(extract_payload(u, spec), p)
    assert not u[list(frozen)].any()


def test_frozen_file_round_trip(tmp_path, ref_spec):
    path = tmp_path / "frozen.txt"
    save_frozen_set(ref_spec, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "1024 512 16"
    assert len(lines[1].split()) == 496
    loaded = load_frozen_set(path)
    assert loaded.frozen == ref_spec.frozen
    save_frozen_set(loaded, tmp_path / "again.txt")
    assert (tmp_path / "again.txt").read_bytes() == path.read_bytes()


def test_frozen_file_rejects_garbage(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("8 4 0\n3 2 1 0\n")
    with pytest.raises(ValueError):
        load_frozen_set(path)
    path.write_text("eight\n")
    with pytest.raises(ValueError):
        load_frozen_set(path)
