import itertools
from fractions import Fraction

import numpy as np
import pytest

from conftest import cyc
from quasiflat.fixtures import load_group
from quasiflat.latin import SparseLatinSquare, enumerate_squares
from quasiflat.magic import frame_from_unitary, haar_unitary, rank_pattern, validate_magic
from quasiflat.models import (
    Amalgamated,
    Classical,
    CommutingPowers,
    CyclicFlat,
    FreeProduct,
    FreeProductOfDirectProducts,
    FreeTimesCentral,
    InducedVirtuallyAbelian,
    ModelPoint,
    ReducedWord,
    canonical_word,
    classical_magic,
    cyclic_magic,
    diagonal_W,
    direct_trace,
    eval_classical_coordinate,
    eval_cyclic_coordinate,
    eval_generator,
    eval_word,
    family_from_json,
    induced_rep,
    inverse_word,
    magic_matrix,
    parse_word,
    root_of_unity,
    sample_point,
    spectral_projections,
    word_trace,
)
from quasiflat.perm import Permutation, PermutationGroup, compose

WORD_FAMILIES = [
    FreeProduct(3, 2),
    FreeProduct(2, 3),
    FreeProductOfDirectProducts(3, (2, 1)),
    FreeProductOfDirectProducts(2, (1, 2, 1)),
    Amalgamated(4, 2, 2, 2),
    Amalgamated(6, 3, 2, 2),
    Amalgamated(6, 2, 3, 3),
    CommutingPowers(4, 2, 2, 2),
    CommutingPowers(6, 3, 2, 2),
    CommutingPowers(6, 2, 3, 3),
    FreeTimesCentral(3),
    CyclicFlat(5),
]


def random_raw(f, rng, max_len=6):
    n = int(rng.integers(1, max_len + 1))
    return [(int(rng.integers(1, f.num_generators + 1)), int(rng.integers(-2 * f.K, 2 * f.K)))
            for _ in range(n)]


def raw_product(f, p, raw):
    out = np.eye(f.K, dtype=complex)
    for i, k in raw:
        out = out @ np.linalg.matrix_power(eval_generator(f, p, i), k % f.K)
    return out


def test_root_of_unity():
    for K in (1, 2, 5, 12):
        assert abs(root_of_unity(K) ** K - 1) < 1e-12


def test_diagonal_W():
    assert np.array_equal(diagonal_W(4, 0), np.eye(4))
    assert np.allclose(diagonal_W(2, 1), np.diag([-1, 1]), atol=1e-15)
    assert np.array_equal(diagonal_W(3, 2, Permutation.identity(3)), diagonal_W(3, 2))
    s = cyc(3, (1, 2, 3))
    assert np.allclose(np.diag(diagonal_W(3, 1, s)), root_of_unity(3) ** np.array([2, 3, 1]))


# normal forms ---------------------------------------------------------------

def test_free_product_reduction():
    f = FreeProduct(3, 2)
    assert canonical_word(FreeProduct(4, 2), [(1, 4)]).is_identity()
    assert canonical_word(f, [(1, 2), (1, 1)]).is_identity()
    assert canonical_word(f, [(1, 1), (2, 1), (2, 2), (1, 1)]).letters == ((1, 2),)
    assert canonical_word(f, [(1, -1)]).letters == ((1, 2),)
    with pytest.raises(ValueError):
        canonical_word(f, [(3, 1)])


def test_amalgamated_normal_form():
    f = Amalgamated(4, 2, 2, 2)
    w = canonical_word(f, [(1, 3), (2, 1)])
    # g_1^3 = h g_1, so the word is h g_1 g_2
    assert w == ReducedWord(((1, 1), (2, 1)), central=1)
    rng = np.random.default_rng(0)
    for _ in range(5):
        p = sample_point(f, rng)
        assert np.abs(eval_word(f, p, w) - raw_product(f, p, [(1, 3), (2, 1)])).max() < 1e-10
    # powers of h are shared between the generators
    assert canonical_word(f, [(1, 2), (2, 2)]).is_identity()
    assert canonical_word(f, [(1, 1), (2, 2), (1, 1)]) == ReducedWord((), central=0)


def test_commuting_powers_normal_form():
    f = CommutingPowers(4, 2, 2, 2)
    # h_1 h_2 h_1^{-1} h_2^{-1} is trivial
    assert canonical_word(f, [(1, 2), (2, 2), (1, -2), (2, -2)]).is_identity()
    # g_1 h_1 = h_1 g_1 inside <g_1>
    assert canonical_word(f, [(1, 1), (1, 2)]) == canonical_word(f, [(1, 2), (1, 1)])
    # h_2 does not commute with g_1
    assert canonical_word(f, [(1, 1), (2, 2)]) != canonical_word(f, [(2, 2), (1, 1)])
    w = canonical_word(f, [(2, 2), (1, 1), (2, 2)])
    assert w.letters == ((1, 1),) and w.torus == ((0, 1), (0, 1))


def test_direct_product_syllables():
    f = FreeProductOfDirectProducts(3, (2, 1))
    # generators 1 and 2 commute, 3 is free
    assert canonical_word(f, [(1, 1), (2, 1), (1, 2), (2, 2)]).is_identity()
    w = canonical_word(f, [(1, 1), (3, 1), (2, 1)])
    assert w.letters == ((1, (1, 0)), (2, (1,)), (1, (0, 1)))
    assert f.to_raw(w) == [(1, 1), (3, 1), (2, 1)]


@pytest.mark.parametrize("f", WORD_FAMILIES, ids=lambda f: repr(f))
def test_normal_form_consistency(f):
    rng = np.random.default_rng(11)
    for _ in range(60):
        raw = random_raw(f, rng)
        w = canonical_word(f, raw)
        assert canonical_word(f, f.to_raw(w)) == w
        assert canonical_word(f, f.to_raw(w) + f.to_raw(inverse_word(f, w))).is_identity()
        p = sample_point(f, rng)
        assert np.abs(eval_word(f, p, w) - raw_product(f, p, raw)).max() < 1e-10


# sampling and generators --------------------------------------------------

def test_sample_invariants(rng):
    p = sample_point(CyclicFlat(4), rng)
    assert p.frame.is_valid(1e-10)
    f = FreeProduct(3, 2)
    p = sample_point(f, rng)
    assert len(p.unitaries) == 2
    for U in p.unitaries:
        assert np.abs(U.conj().T @ U - np.eye(3)).max() < 1e-12


def test_amalgamated_block_structure(rng):
    f = Amalgamated(4, 2, 2, 2)
    for _ in range(10):
        for U in sample_point(f, rng).unitaries:
            # columns 1, 3 span coordinates {1, 2}; columns 2, 4 span {3, 4}
            assert np.abs(U[2:, [0, 2]]).max() < 1e-12
            assert np.abs(U[:2, [1, 3]]).max() < 1e-12


def test_commuting_powers_block_structure(rng):
    f = CommutingPowers(6, 3, 2, 2)
    for _ in range(10):
        p = sample_point(f, rng)
        for U, (sigma,) in zip(p.unitaries, p.permutations):
            for t in range(1, 4):
                cols = [t - 1 + s * 3 for s in range(2)]
                u = sigma.inverse()(t)
                outside = [r for r in range(6) if not (u - 1) * 2 <= r < u * 2]
                assert np.abs(U[np.ix_(outside, cols)]).max() < 1e-12


def test_free_product_generator_at_identity():
    f = FreeProduct(3, 2)
    p = ModelPoint((np.eye(3), np.eye(3)))
    w = root_of_unity(3)
    assert np.allclose(eval_generator(f, p, 1), np.diag([w, w**2, w**3]), atol=1e-15)
    with pytest.raises(ValueError):
        eval_generator(f, p, 3)


@pytest.mark.parametrize("f", WORD_FAMILIES, ids=lambda f: repr(f))
def test_generators_unitary_of_order_K(f, rng):
    for _ in range(20):
        p = sample_point(f, rng)
        for i in range(1, f.num_generators + 1):
            g = eval_generator(f, p, i)
            assert np.abs(g.conj().T @ g - np.eye(f.K)).max() < 1e-10
            assert np.abs(np.linalg.matrix_power(g, f.K) - np.eye(f.K)).max() < 1e-10


@pytest.mark.parametrize("f", [Amalgamated(4, 2, 2, 2), Amalgamated(6, 2, 3, 3)])
def test_amalgamated_powers_coincide(f, rng):
    w = root_of_unity(f.K)
    expected_diag = np.repeat([w ** (t * f.R) for t in range(1, f.L + 1)], f.R)
    for _ in range(100):
        p = sample_point(f, rng)
        hs = [np.linalg.matrix_power(eval_generator(f, p, i), f.R) for i in range(1, f.M + 1)]
        for a, b in itertools.combinations(hs, 2):
            assert np.linalg.norm(a - b, 2) < 1e-12
        assert np.abs(hs[0] - np.diag(expected_diag)).max() < 1e-12
        hL = np.linalg.matrix_power(hs[0], f.L)
        assert np.abs(hL - np.eye(f.K)).max() < 1e-10


@pytest.mark.parametrize("f", [CommutingPowers(4, 2, 2, 2), CommutingPowers(6, 3, 2, 3)])
def test_commuting_powers_commute(f, rng):
    for _ in range(100):
        p = sample_point(f, rng)
        hs = [np.linalg.matrix_power(eval_generator(f, p, i), f.R) for i in range(1, f.M + 1)]
        for a, b in itertools.combinations(hs, 2):
            assert np.linalg.norm(a @ b - b @ a, 2) < 1e-12


def test_direct_product_generator_indexing(rng):
    f = FreeProductOfDirectProducts(3, (2, 1))
    p = sample_point(f, rng)
    assert np.array_equal(eval_generator(f, p, 1, 2), eval_generator(f, p, 2))
    assert np.array_equal(eval_generator(f, p, 2, 1), eval_generator(f, p, 3))
    a, b = eval_generator(f, p, 1), eval_generator(f, p, 2)
    assert np.abs(a @ b - b @ a).max() < 1e-12
    with pytest.raises(ValueError):
        eval_generator(f, p, 2, 2)
    with pytest.raises(ValueError):
        eval_generator(FreeProduct(2, 2), sample_point(FreeProduct(2, 2), rng), 1, 1)


# words and traces -------------------------------------------------------------

def test_eval_word_identity_and_inverse(rng):
    for f in WORD_FAMILIES:
        p = sample_point(f, rng)
        assert np.array_equal(eval_word(f, p, ReducedWord()), np.eye(f.K))
        w = canonical_word(f, random_raw(f, rng))
        prod = eval_word(f, p, w) @ eval_word(f, p, inverse_word(f, w))
        assert np.abs(prod - np.eye(f.K)).max() < 1e-10


def test_coincident_unitaries(rng):
    f = FreeProduct(3, 2)
    U = haar_unitary(3, rng)
    p = ModelPoint((U, U))
    g = eval_generator(f, p, 1)
    assert np.abs(eval_word(f, p, canonical_word(f, [(1, 1), (2, 1)])) - g @ g).max() < 1e-12


@pytest.mark.parametrize("f", WORD_FAMILIES, ids=lambda f: repr(f))
def test_closed_form_trace_matches_direct(f):
    rng = np.random.default_rng(99)
    for _ in range(200):
        p = sample_point(f, rng)
        w = canonical_word(f, random_raw(f, rng))
        assert abs(word_trace(f, p, w) - direct_trace(f, p, w)) < 1e-10


def test_single_generator_trace(rng):
    f = FreeProduct(4, 2)
    p = sample_point(f, rng)
    assert word_trace(f, p, ReducedWord()) == 1
    for k in range(1, 4):
        assert abs(word_trace(f, p, canonical_word(f, [(1, k)]))) < 1e-12


def test_first_moment_of_two_letter_word():
    # averaging U W U^* over Haar U gives tr(W) I = 0, so E tr(g_1 g_2) = 0
    f = FreeProduct(3, 2)
    rng = np.random.default_rng(31)
    w = canonical_word(f, [(1, 1), (2, 1)])
    vals = np.array([word_trace(f, sample_point(f, rng), w) for _ in range(20000)])
    stderr = np.sqrt(vals.real.var(ddof=1) + vals.imag.var(ddof=1)) / np.sqrt(len(vals))
    assert abs(vals.mean()) < 3 * stderr


def test_commuting_powers_model_kills_commutator_of_generator_and_power():
    # In the group, [g_1, g_2^2] is not trivial: the assignment g_1 -> (1234),
    # g_2 -> (1324) respects every defining relation (both have order 4 and
    # their squares commute) but g_1 does not commute with (1324)^2.
    a, b = cyc(4, (1, 2, 3, 4)), cyc(4, (1, 3, 2, 4))
    a2, b2 = compose(a, a), compose(b, b)
    assert compose(a2, a2).is_identity() and compose(b2, b2).is_identity()
    assert compose(a2, b2) == compose(b2, a2)
    assert compose(a, b2) != compose(b2, a)
    f = CommutingPowers(4, 2, 2, 2)
    w = canonical_word(f, [(1, 1), (2, 2), (1, -1), (2, -2)])
    assert not w.is_identity()
    # every power g_i^2 acts as a scalar on each fixed block, so the model
    # sends this commutator to the identity at every point
    rng = np.random.default_rng(3)
    for _ in range(50):
        p = sample_point(f, rng)
        assert np.abs(eval_word(f, p, w) - np.eye(4)).max() < 1e-12


# magic matrices -------------------------------------------------------------

def test_classical_coordinates(rng):
    L = SparseLatinSquare.from_grid([[1, 2, 0], [2, 0, 1], [0, 1, 2]])
    F = frame_from_unitary(haar_unitary(2, rng))
    assert np.array_equal(eval_classical_coordinate(L, F, 1, 3), np.zeros((2, 2)))
    assert np.array_equal(eval_classical_coordinate(L, F, 2, 1), F[2])
    with pytest.raises(ValueError):
        eval_classical_coordinate(L, frame_from_unitary(np.eye(3)), 1, 1)
    std = frame_from_unitary(np.eye(2))
    for i, j in itertools.product(range(1, 4), repeat=2):
        tr = np.trace(eval_classical_coordinate(L, std, i, j)).real / 2
        assert tr == pytest.approx(0.5 if L[i, j] else 0.0)


@pytest.mark.parametrize("N,K", [(3, 2), (4, 2), (4, 3), (3, 3)])
def test_classical_magic_valid_with_pattern(N, K, rng):
    for L in list(enumerate_squares(N, K))[:20]:
        M = classical_magic(L, frame_from_unitary(haar_unitary(K, rng)))
        assert validate_magic(M, 1e-10).passed
        assert np.array_equal(rank_pattern(M), (np.array(L.grid) != 0).astype(int))


def test_classical_family(rng):
    f = family_from_json({"variant": "Classical", "square": [[1, 2], [2, 1]]})
    assert isinstance(f, Classical) and f.K == 2 and f.N == 2
    assert validate_magic(magic_matrix(f, sample_point(f, rng))).passed
    with pytest.raises(ValueError):
        canonical_word(f, [(1, 1)])


def test_cyclic_coordinates(rng):
    F = frame_from_unitary(haar_unitary(4, rng))
    assert np.array_equal(eval_cyclic_coordinate(F, 2, 2), F[4])
    M = cyclic_magic(F)
    assert validate_magic(M, 1e-10).passed
    for i, j in itertools.product(range(1, 5), repeat=2):
        assert np.array_equal(M[i, j], M[i % 4 + 1, j % 4 + 1])
    w = root_of_unity(4)
    gens = [sum(w ** (j - i) * M[i, j] for j in range(1, 5)) for i in range(1, 5)]
    f = CyclicFlat(4)
    g = eval_generator(f, ModelPoint(frame=F), 1)
    for h in gens:
        assert np.abs(h - g).max() < 1e-12


def test_cyclic_spectral_projections_recover_frame(rng):
    f = CyclicFlat(5)
    for _ in range(20):
        p = sample_point(f, rng)
        g = eval_generator(f, p, 1)
        assert np.abs(np.linalg.matrix_power(g, 5) - np.eye(5)).max() < 1e-10
        assert np.abs(spectral_projections(g, 5) - p.frame.projections).max() < 1e-10


@pytest.mark.parametrize("f", [FreeProduct(2, 2), FreeProduct(3, 2), Amalgamated(4, 2, 2, 2),
                               CommutingPowers(4, 2, 2, 2), FreeProductOfDirectProducts(3, (2, 1))],
                         ids=repr)
def test_group_dual_magic_rank_pattern(f, rng):
    expected = np.kron(np.eye(f.num_generators, dtype=int), np.ones((f.K, f.K), dtype=int))
    for _ in range(5):
        M = magic_matrix(f, sample_point(f, rng))
        assert validate_magic(M, 1e-10).passed
        assert np.array_equal(rank_pattern(M), expected)


# induced representations ------------------------------------------------------

@pytest.fixture(scope="module")
def s3_a3():
    return InducedVirtuallyAbelian(load_group("S3"), load_group("A3"))


def test_induced_identity(s3_a3):
    e = Permutation.identity(3)
    for c in range(3):
        A = induced_rep(s3_a3, c, e)
        assert np.array_equal(A, np.eye(2)) and np.trace(A) == s3_a3.index


def test_induced_transposition_has_zero_diagonal(s3_a3):
    for c in range(3):
        A = induced_rep(s3_a3, c, cyc(3, (1, 2)))
        assert np.all(np.diag(A) == 0)


def test_induced_character_of_three_cycle(s3_a3):
    r = cyc(3, (1, 2, 3))
    omega = np.exp(2j * np.pi / 3)
    for t in range(3):
        chi = {Permutation.identity(3): Fraction(0), r: Fraction(t, 3), compose(r, r): Fraction(2 * t, 3)}
        tr = np.trace(induced_rep(s3_a3, chi, r))
        assert abs(tr - (omega**t + omega**(-t))) < 1e-12


def test_induced_errors(s3_a3):
    with pytest.raises(ValueError):
        induced_rep(s3_a3, 0, cyc(4, (1, 2)))
    r = cyc(3, (1, 2, 3))
    bad = {Permutation.identity(3): 0, r: 0.5, compose(r, r): 0.5}
    with pytest.raises(ValueError, match="multiplicative"):
        induced_rep(s3_a3, bad, r)
    with pytest.raises(ValueError, match="abelian"):
        InducedVirtuallyAbelian(load_group("S4"), PermutationGroup.symmetric(4))
    with pytest.raises(ValueError):
        InducedVirtuallyAbelian(load_group("S3"), load_group("C4"))


@pytest.mark.parametrize("g,h", [("S3", "A3"), ("D4", "C4"), ("D4", "V4"), ("S4", "V4")])
def test_induced_is_homomorphism(g, h):
    f = InducedVirtuallyAbelian(load_group(g), load_group(h))
    assert len(f.characters) == f.subgroup.order
    elems = sorted(f.group.elements)
    for c in range(len(f.characters)):
        mats = {x: induced_rep(f, c, x) for x in elems}
        for a, b in itertools.product(elems, repeat=2):
            assert np.abs(mats[compose(a, b)] - mats[a] @ mats[b]).max() < 1e-12
        for a in elems:
            assert np.abs(mats[a].conj().T @ mats[a] - np.eye(f.index)).max() < 1e-12


# serialization --------------------------------------------------------------

@pytest.mark.parametrize("f", WORD_FAMILIES, ids=lambda f: repr(f))
def test_family_and_point_json(f, rng):
    assert family_from_json(f.to_json()) == f
    p = sample_point(f, rng)
    q = ModelPoint.from_json(p.to_json())
    w = canonical_word(f, random_raw(f, rng))
    assert abs(word_trace(f, p, w) - word_trace(f, q, w)) < 1e-15


def test_family_json_errors():
    with pytest.raises(ValueError):
        family_from_json({"variant": "Nope"})
    with pytest.raises(ValueError):
        family_from_json({"variant": "Amalgamated", "K": 4, "L": 3, "R": 2, "M": 2})
    f = family_from_json({"variant": "CommutingPowers", "K": 6, "L": 3, "M": 2})
    assert f.R == 2


def test_parse_word():
    assert parse_word("1:2,2:1") == [(1, 2), (2, 1)]
    assert parse_word("1, 2:-1") == [(1, 1), (2, -1)]
    assert parse_word("") == []
