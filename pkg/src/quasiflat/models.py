"""Explicit quasi-flat model families and their evaluation.

Every group-dual family below is a quotient of the free product of M copies
of Z_K, generated by g_1..g_M of order K.  A model point assigns to each
generator a unitary ``sum_j w^j P_j`` built from a rank-one projection frame,
with ``w = exp(2 pi i / K)``.  The families differ in the constraints on the
frames and in the normal form of their words:

=========================  ==================================================
FreeProduct                Z_K^{*M}; M independent Haar unitaries
FreeProductOfDirectProducts Z_K^{M_1} * ... * Z_K^{M_n}; one unitary per part,
                           one permutation of the eigenvalues per generator
Amalgamated                Z_K^{*M} / <g_i^R = g_j^R>, K = L R
CommutingPowers            Z_K^{*M} / <g_i^R g_j^R = g_j^R g_i^R>, K = L R
FreeTimesCentral           (Z_K * Z_K) x Z_K, the obstruction example
CyclicFlat                 Z_K on a single frame
=========================  ==================================================

``Classical`` (a frame paired with a sparse Latin square) and
``InducedVirtuallyAbelian`` (induced representations of a finite group from
an abelian subgroup) are not word-based and only support their own
evaluation functions.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Optional, Sequence

import numpy as np

from .latin import STAR, SparseLatinSquare
from .magic import (
    NumericMagicUnitary,
    ProjectionFrame,
    assemble_block_magic,
    frame_from_unitary,
    haar_unitary,
    matrix_from_json,
    matrix_to_json,
)
from .perm import Permutation, PermutationGroup, compose, generate_group

__all__ = [
    "root_of_unity",
    "diagonal_W",
    "spectral_projections",
    "ReducedWord",
    "ModelPoint",
    "ModelFamily",
    "FreeProduct",
    "FreeProductOfDirectProducts",
    "Amalgamated",
    "CommutingPowers",
    "FreeTimesCentral",
    "CyclicFlat",
    "Classical",
    "InducedVirtuallyAbelian",
    "family_from_json",
    "canonical_word",
    "inverse_word",
    "sample_point",
    "eval_generator",
    "eval_word",
    "word_trace",
    "direct_trace",
    "magic_matrix",
    "eval_classical_coordinate",
    "eval_cyclic_coordinate",
    "classical_magic",
    "cyclic_magic",
    "induced_rep",
    "parse_word",
]


def root_of_unity(K: int) -> complex:
    return np.exp(2j * np.pi / K)


def _phases(K: int, exponents) -> np.ndarray:
    # reduce mod K before exponentiating so large exponents stay accurate
    e = np.mod(np.asarray(exponents, dtype=np.int64), K)
    return np.exp(2j * np.pi * e / K)


def diagonal_W(K: int, k: int = 1, sigma: Optional[Permutation] = None) -> np.ndarray:
    """``W^k`` with ``W = diag(w, w^2, ..., w^K)``, or ``W_sigma^k`` with
    ``(W_sigma)_ii = w^{sigma(i)}``."""
    idx = np.arange(1, K + 1) if sigma is None else np.array(sigma.images)
    return np.diag(_phases(K, idx * k))


def spectral_projections(g: np.ndarray, K: int) -> np.ndarray:
    """Eigenprojections ``P_m`` (m = 1..K, with P_K for eigenvalue 1) of a
    unitary with ``g^K = 1``: ``P_m = (1/K) sum_s w^{-ms} g^s``."""
    d = g.shape[0]
    powers = np.empty((K, d, d), dtype=complex)
    powers[0] = np.eye(d)
    for s in range(1, K):
        powers[s] = powers[s - 1] @ g
    m = np.arange(1, K + 1)
    coeff = _phases(K, -np.outer(m, np.arange(K))) / K
    return np.einsum("ms,sab->mab", coeff, powers)


def _frame_sum(U: np.ndarray, exps) -> np.ndarray:
    """``sum_j w^{e_j} P_{U_j}`` as a sum of outer products."""
    K = U.shape[0]
    ph = _phases(K, exps)
    return np.einsum("j,aj,bj->ab", ph, U, U.conj())


def _gram_trace(unitaries: Sequence[np.ndarray], diagonals: Sequence[np.ndarray]) -> complex:
    """Normalized trace of ``prod_t U_t D_t U_t^*`` written as
    ``tr(prod_t D_t (U_t^* U_{t+1}))`` with indices taken cyclically."""
    n = len(unitaries)
    acc = None
    for t in range(n):
        gram = unitaries[t].conj().T @ unitaries[(t + 1) % n]
        term = diagonals[t][:, None] * gram
        acc = term if acc is None else acc @ term
    return complex(np.trace(acc) / acc.shape[0])


@dataclass(frozen=True)
class ReducedWord:
    """Normal-form word of a group-dual family.

    ``letters`` holds (block, exponent) pairs; for direct-product syllables
    the exponent is a tuple, one entry per generator of the part.
    ``central`` is the leading power of the central element (the common
    g_i^R of the amalgamated family).  ``torus`` is used by the commuting-
    powers family only: elements a_0..a_n of Z_L^M, interleaved as
    ``a_0 x_1 a_1 ... x_n a_n`` with the letters x_t.  The empty word is the
    identity.
    """

    letters: tuple = ()
    central: int = 0
    torus: tuple = ()

    def is_identity(self) -> bool:
        return not self.letters and not self.central and not any(any(a) for a in self.torus)

    def __len__(self):
        return len(self.letters) + (1 if self.central else 0)

    def to_json(self) -> dict:
        out = {"letters": [[i, list(k) if isinstance(k, tuple) else k] for i, k in self.letters]}
        if self.central:
            out["central"] = self.central
        if self.torus:
            out["torus"] = [list(a) for a in self.torus]
        return out


IDENTITY_WORD = ReducedWord()


@dataclass(frozen=True)
class ModelPoint:
    unitaries: tuple = ()
    permutations: tuple = ()  # one tuple of Permutations per unitary
    frame: Optional[ProjectionFrame] = None
    character: Optional[int] = None

    def to_json(self) -> dict:
        out = {}
        if self.unitaries:
            out["unitaries"] = [matrix_to_json(U) for U in self.unitaries]
        if self.permutations:
            out["permutations"] = [[p.to_json() for p in ps] for ps in self.permutations]
        if self.frame is not None:
            out["frame"] = self.frame.to_json()
        if self.character is not None:
            out["character"] = self.character
        return out

    @classmethod
    def from_json(cls, data: dict) -> "ModelPoint":
        return cls(
            unitaries=tuple(matrix_from_json(U) for U in data.get("unitaries", [])),
            permutations=tuple(tuple(Permutation(tuple(p)) for p in ps)
                               for ps in data.get("permutations", [])),
            frame=ProjectionFrame.from_json(data["frame"]) if "frame" in data else None,
            character=data.get("character"),
        )


def _random_perm(n: int, rng: np.random.Generator) -> Permutation:
    return Permutation(tuple(int(x) + 1 for x in rng.permutation(n)))


def _free_reduce(raw, K: int) -> tuple:
    stack: list[tuple[int, int]] = []
    for i, k in raw:
        k %= K
        if not k:
            continue
        if stack and stack[-1][0] == i:
            merged = (stack.pop()[1] + k) % K
            if merged:
                stack.append((i, merged))
        else:
            stack.append((i, k))
    return tuple(stack)


class ModelFamily:
    """Base class; concrete families fill in the hooks below."""

    variant: str = ""
    K: int
    word_based = True

    @property
    def num_generators(self) -> int:
        raise NotImplementedError

    def _check_raw(self, raw):
        out = []
        for i, k in raw:
            i, k = int(i), int(k)
            if not 1 <= i <= self.num_generators:
                raise ValueError(f"generator index {i} outside 1..{self.num_generators}")
            out.append((i, k))
        return out

    def canonical(self, raw) -> ReducedWord:
        raise NotImplementedError

    def to_raw(self, word: ReducedWord) -> list[tuple[int, int]]:
        return [(i, k) for i, k in word.letters]

    def sample(self, rng: np.random.Generator) -> ModelPoint:
        raise NotImplementedError

    def generator(self, point: ModelPoint, i: int) -> np.ndarray:
        raise NotImplementedError

    def evaluate(self, point: ModelPoint, word: ReducedWord) -> np.ndarray:
        # default: multiply generator powers along the raw expansion
        out = np.eye(self.K, dtype=complex)
        gens = {}
        for i, k in self.to_raw(word):
            if i not in gens:
                gens[i] = self.generator(point, i)
            out = out @ np.linalg.matrix_power(gens[i], k % self.K)
        return out

    def trace(self, point: ModelPoint, word: ReducedWord) -> complex:
        raise NotImplementedError

    def magic(self, point: ModelPoint) -> NumericMagicUnitary:
        """Block-diagonal magic unitary, one circulant K x K block per generator."""
        K = self.K
        blocks = []
        for i in range(1, self.num_generators + 1):
            P = spectral_projections(self.generator(point, i), K)
            entries = np.empty((K, K, K, K), dtype=complex)
            for a in range(K):
                for b in range(K):
                    entries[a, b] = P[(b - a - 1) % K]
            blocks.append(NumericMagicUnitary(entries))
        return assemble_block_magic(blocks)

    def to_json(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class FreeProduct(ModelFamily):
    K: int
    M: int
    variant = "FreeProduct"

    def __post_init__(self):
        if self.K < 2 or self.M < 1:
            raise ValueError("need K >= 2 and M >= 1")

    @property
    def num_generators(self):
        return self.M

    def canonical(self, raw):
        return ReducedWord(_free_reduce(self._check_raw(raw), self.K))

    def sample(self, rng):
        return ModelPoint(tuple(haar_unitary(self.K, rng) for _ in range(self.M)))

    def generator(self, point, i):
        return _frame_sum(point.unitaries[i - 1], np.arange(1, self.K + 1))

    def trace(self, point, word):
        if not word.letters:
            return 1.0 + 0j
        K = self.K
        idx = np.arange(1, K + 1)
        Us = [point.unitaries[i - 1] for i, _ in word.letters]
        Ds = [_phases(K, idx * k) for _, k in word.letters]
        return _gram_trace(Us, Ds)

    def to_json(self):
        return {"variant": self.variant, "K": self.K, "M": self.M}


@dataclass(frozen=True)
class FreeProductOfDirectProducts(ModelFamily):
    """Free product of the direct products Z_K^{M_p}; generators are numbered
    globally, part by part."""

    K: int
    parts: tuple[int, ...]
    variant = "FreeProductOfDirectProducts"

    def __post_init__(self):
        object.__setattr__(self, "parts", tuple(int(m) for m in self.parts))
        if self.K < 2 or not self.parts or min(self.parts) < 1:
            raise ValueError("need K >= 2 and nonempty positive parts")

    @property
    def num_generators(self):
        return sum(self.parts)

    def locate(self, g: int) -> tuple[int, int]:
        """Global generator index -> (part, index within part), both one-based."""
        for p, m in enumerate(self.parts, start=1):
            if g <= m:
                return p, g
            g -= m
        raise ValueError("generator index out of range")

    def _global(self, p: int, s: int) -> int:
        return sum(self.parts[:p - 1]) + s

    def canonical(self, raw):
        K = self.K
        stack: list[tuple[int, tuple]] = []
        for g, k in self._check_raw(raw):
            p, s = self.locate(g)
            vec = [0] * self.parts[p - 1]
            vec[s - 1] = k % K
            if not any(vec):
                continue
            if stack and stack[-1][0] == p:
                top = stack.pop()[1]
                merged = tuple((a + b) % K for a, b in zip(top, vec))
                if any(merged):
                    stack.append((p, merged))
            else:
                stack.append((p, tuple(vec)))
        return ReducedWord(tuple(stack))

    def to_raw(self, word):
        out = []
        for p, vec in word.letters:
            out.extend((self._global(p, s), k) for s, k in enumerate(vec, start=1) if k)
        return out

    def sample(self, rng):
        K = self.K
        Us = tuple(haar_unitary(K, rng) for _ in self.parts)
        perms = tuple(tuple(_random_perm(K, rng) for _ in range(m)) for m in self.parts)
        return ModelPoint(Us, perms)

    def generator(self, point, g):
        p, s = self.locate(g)
        sigma = point.permutations[p - 1][s - 1]
        return _frame_sum(point.unitaries[p - 1], sigma.images)

    def trace(self, point, word):
        if not word.letters:
            return 1.0 + 0j
        K = self.K
        Us, Ds = [], []
        for p, vec in word.letters:
            expo = np.zeros(K, dtype=np.int64)
            for sigma, k in zip(point.permutations[p - 1], vec):
                expo += k * np.array(sigma.images)
            Us.append(point.unitaries[p - 1])
            Ds.append(_phases(K, expo))
        return _gram_trace(Us, Ds)

    def to_json(self):
        return {"variant": self.variant, "K": self.K, "parts": list(self.parts)}


def _block_columns(K: int, L: int, t: int) -> np.ndarray:
    """Zero-based column indices t, t+L, ..., t+(R-1)L for one-based t."""
    return np.arange(t - 1, K, L)


def _block_rows(R: int, u: int) -> np.ndarray:
    """Zero-based coordinates spanning V_u."""
    return np.arange((u - 1) * R, u * R)


class _BlockFamily(ModelFamily):
    """Shared machinery for the two families living on X_{K,L}."""

    K: int
    L: int
    R: int
    M: int

    def _check_params(self):
        if self.L * self.R != self.K:
            raise ValueError(f"need K = L*R, got K={self.K}, L={self.L}, R={self.R}")
        if self.L < 1 or self.R < 1 or self.M < 1 or self.K < 2:
            raise ValueError("parameters must be positive, K >= 2")

    @property
    def num_generators(self):
        return self.M

    def _block_unitary(self, rng, sigma: Optional[Permutation]) -> np.ndarray:
        # columns t + sL span V_{sigma^{-1}(t)}; sigma = None means the identity
        K, L, R = self.K, self.L, self.R
        U = np.zeros((K, K), dtype=complex)
        for u in range(1, L + 1):
            t = u if sigma is None else sigma(u)
            B = haar_unitary(R, rng)
            U[np.ix_(_block_rows(R, u), _block_columns(K, L, t))] = B
        return U

    def generator(self, point, i):
        return _frame_sum(point.unitaries[i - 1], np.arange(1, self.K + 1))

    def _sigma(self, point, i) -> Optional[Permutation]:
        return None

    def _block_trace(self, point, items) -> complex:
        """Closed-form normalized trace of a product of items.

        ``items`` is a list of ('g', i, k) for g_i^k and ('h', j, c) for
        (g_j^R)^c.  Every generator preserves each V_u, acting there as
        ``w^{sigma_i(u)} U_i(u) D U_i(u)^*`` with ``D = diag(w^{Ls})``, so the
        trace splits into L traces of R x R products.
        """
        K, L, R = self.K, self.L, self.R
        s = np.arange(R)
        total = 0j
        for u in range(1, L + 1):
            rows = _block_rows(R, u)
            phase_exp = 0
            Us, Ds = [], []
            for kind, i, k in items:
                sigma = self._sigma(point, i)
                t = u if sigma is None else sigma(u)
                if kind == "h":
                    phase_exp += t * R * k
                    continue
                phase_exp += t * k
                Us.append(point.unitaries[i - 1][np.ix_(rows, _block_columns(K, L, t))])
                Ds.append(_phases(K, L * s * k))
            block = _gram_trace(Us, Ds) if Us else 1.0
            total += _phases(K, [phase_exp])[0] * block
        return complex(total / L)


@dataclass(frozen=True)
class Amalgamated(_BlockFamily):
    """Z_K^{*M} with all g_i^R identified to a single central h of order L."""

    K: int
    L: int
    R: int
    M: int
    variant = "Amalgamated"

    def __post_init__(self):
        self._check_params()

    def canonical(self, raw):
        K, R, L = self.K, self.R, self.L
        stack: list[list[int]] = []
        central = 0
        for i, k in self._check_raw(raw):
            a, r = divmod(k % K, R)
            central += a
            if not r:
                continue
            if stack and stack[-1][0] == i:
                a2, r2 = divmod(stack[-1][1] + r, R)
                central += a2
                if r2:
                    stack[-1][1] = r2
                else:
                    stack.pop()
            else:
                stack.append([i, r])
        return ReducedWord(tuple((i, r) for i, r in stack), central % L)

    def to_raw(self, word):
        head = [(1, self.R * word.central)] if word.central else []
        return head + list(word.letters)

    def sample(self, rng):
        return ModelPoint(tuple(self._block_unitary(rng, None) for _ in range(self.M)))

    def trace(self, point, word):
        if word.is_identity():
            return 1.0 + 0j
        items = ([("h", 1, word.central)] if word.central else []) + \
                [("g", i, k) for i, k in word.letters]
        return self._block_trace(point, items)

    def to_json(self):
        return {"variant": self.variant, "K": self.K, "L": self.L, "R": self.R, "M": self.M}


@dataclass(frozen=True)
class CommutingPowers(_BlockFamily):
    """Z_K^{*M} with the powers h_i = g_i^R commuting pairwise.

    The group is a tree of groups: Z_L^M = <h_1..h_M> in the middle, each
    <g_i> amalgamated to it over <h_i>.  Words are kept in the normal form
    ``a_0 g_{i_1}^{k_1} a_1 ... g_{i_n}^{k_n} a_n`` with ``1 <= k_t < R``,
    each ``a_t`` in Z_L^M, ``a_{t-1}`` free of h_{i_t}, and ``a_t != 0``
    whenever ``i_t = i_{t+1}``.  Reading it back as generator powers gives the
    Euclidean split k = k' + aR of every letter.
    """

    K: int
    L: int
    R: int
    M: int
    variant = "CommutingPowers"

    def __post_init__(self):
        self._check_params()

    def canonical(self, raw):
        K, R, L, M = self.K, self.R, self.L, self.M
        torus: list[list[int]] = [[0] * M]
        letters: list[list[int]] = []
        for i, k in self._check_raw(raw):
            a, r = divmod(k % K, R)
            tail = torus[-1]
            if not r:
                tail[i - 1] = (tail[i - 1] + a) % L
                continue
            # move the h_i part of the tail to the right of g_i^r
            c = tail[i - 1]
            tail[i - 1] = 0
            if letters and letters[-1][0] == i and not any(tail):
                a2, r2 = divmod(letters[-1][1] + r, R)
                if r2:
                    letters[-1][1] = r2
                    tail[i - 1] = (c + a + a2) % L
                else:
                    letters.pop()
                    torus.pop()
                    prev = torus[-1]
                    prev[i - 1] = (prev[i - 1] + c + a + a2) % L
            else:
                letters.append([i, r])
                new = [0] * M
                new[i - 1] = (c + a) % L
                torus.append(new)
        if not letters and not any(torus[0]):
            return IDENTITY_WORD
        return ReducedWord(tuple((i, r) for i, r in letters),
                           torus=tuple(tuple(a) for a in torus))

    def _expand(self, word):
        """Flatten the normal form into ('g' | 'h', index, power) items."""
        items = []
        torus = word.torus or ((0,) * self.M,)
        for t, a in enumerate(torus):
            if t:
                i, k = word.letters[t - 1]
                items.append(("g", i, k))
            items.extend(("h", j, c) for j, c in enumerate(a, start=1) if c)
        return items

    def to_raw(self, word):
        return [(i, k if kind == "g" else self.R * k) for kind, i, k in self._expand(word)]

    def sample(self, rng):
        sigmas = tuple(_random_perm(self.L, rng) for _ in range(self.M))
        Us = tuple(self._block_unitary(rng, s) for s in sigmas)
        return ModelPoint(Us, tuple((s,) for s in sigmas))

    def _sigma(self, point, i):
        return point.permutations[i - 1][0]

    def trace(self, point, word):
        if word.is_identity():
            return 1.0 + 0j
        return self._block_trace(point, self._expand(word))

    def to_json(self):
        return {"variant": self.variant, "K": self.K, "L": self.L, "R": self.R, "M": self.M}


@dataclass(frozen=True)
class FreeTimesCentral(ModelFamily):
    """Quasi-flat models of (Z_K * Z_K) x Z_K, generators g_1, g_2 and the
    central g_3.

    A multiplicity-free unitary commutes only with operators diagonal in its
    eigenbasis, so every model point is one frame U with the eigenvalues of
    g_1 and g_2 permuted: ``pi(g_i) = sum_j w^{sigma_i(j)} P_{U_j}``.  Words are
    reduced in the free product of three copies of Z_K (no relations imposed),
    so that relations the model satisfies pointwise can be tested as words.
    """

    K: int
    variant = "FreeTimesCentral"

    def __post_init__(self):
        if self.K < 2:
            raise ValueError("need K >= 2")

    @property
    def num_generators(self):
        return 3

    def canonical(self, raw):
        return ReducedWord(_free_reduce(self._check_raw(raw), self.K))

    def sample(self, rng):
        K = self.K
        U = haar_unitary(K, rng)
        perms = (_random_perm(K, rng), _random_perm(K, rng), Permutation.identity(K))
        return ModelPoint((U,), (perms,))

    def generator(self, point, i):
        return _frame_sum(point.unitaries[0], point.permutations[0][i - 1].images)

    def trace(self, point, word):
        if not word.letters:
            return 1.0 + 0j
        U = point.unitaries[0]
        perms = point.permutations[0]
        Ds = [_phases(self.K, k * np.array(perms[i - 1].images)) for i, k in word.letters]
        return _gram_trace([U] * len(Ds), Ds)

    def to_json(self):
        return {"variant": self.variant, "K": self.K}


@dataclass(frozen=True)
class CyclicFlat(ModelFamily):
    """Universal flat model of Z_K: ``pi(g) = sum_j w^j P_j`` on one frame."""

    K: int
    variant = "CyclicFlat"

    def __post_init__(self):
        if self.K < 2:
            raise ValueError("need K >= 2")

    @property
    def num_generators(self):
        return 1

    def canonical(self, raw):
        return ReducedWord(_free_reduce(self._check_raw(raw), self.K))

    def sample(self, rng):
        return ModelPoint(frame=frame_from_unitary(haar_unitary(self.K, rng)))

    def generator(self, point, i=1):
        P = point.frame.projections
        return np.einsum("j,jab->ab", _phases(self.K, np.arange(1, self.K + 1)), P)

    def trace(self, point, word):
        if not word.letters:
            return 1.0 + 0j
        # only the spectrum matters: tr(g^k) = mean of w^{jk}
        (_, k), = word.letters
        return complex(np.mean(_phases(self.K, np.arange(1, self.K + 1) * k)))

    def magic(self, point):
        return cyclic_magic(point.frame)

    def to_json(self):
        return {"variant": self.variant, "K": self.K}


@dataclass(frozen=True)
class Classical(ModelFamily):
    """Quasi-flat representation of C(S_N) given by a sparse Latin square."""

    square: SparseLatinSquare
    variant = "Classical"
    word_based = False

    @property
    def K(self):
        return self.square.K

    @property
    def N(self):
        return self.square.N

    def sample(self, rng):
        return ModelPoint(frame=frame_from_unitary(haar_unitary(self.K, rng)))

    def magic(self, point):
        return classical_magic(self.square, point.frame)

    def to_json(self):
        return {"variant": self.variant, "K": self.K, "square": self.square.to_json()}


@dataclass(frozen=True, eq=False)
class InducedVirtuallyAbelian(ModelFamily):
    """Induced representations Ind(chi) of a finite group from an abelian
    subgroup, parametrized by the characters chi of the subgroup."""

    group: PermutationGroup
    subgroup: PermutationGroup
    variant = "InducedVirtuallyAbelian"
    word_based = False
    cosets: tuple = field(init=False, repr=False)
    characters: tuple = field(init=False, repr=False)

    def __post_init__(self):
        if not self.subgroup.issubgroup(self.group):
            raise ValueError("subgroup is not contained in the group")
        if not self.subgroup.is_abelian():
            raise ValueError("subgroup is not abelian")
        object.__setattr__(self, "cosets", _left_coset_representatives(self.group, self.subgroup))
        object.__setattr__(self, "characters", _abelian_dual(self.subgroup))

    @property
    def K(self):
        return len(self.cosets)

    @property
    def index(self):
        return len(self.cosets)

    def sample(self, rng):
        return ModelPoint(character=int(rng.integers(len(self.characters))))

    def to_json(self):
        return {"variant": self.variant,
                "group": [g.to_json() for g in self.group.generators],
                "subgroup": [g.to_json() for g in self.subgroup.generators]}


def _left_coset_representatives(G: PermutationGroup, H: PermutationGroup) -> tuple:
    reps, covered = [], set()
    for x in sorted(G.elements):
        if x in covered:
            continue
        reps.append(x)
        covered.update(compose(x, h) for h in H.elements)
    return tuple(reps)


def _element_order(g: Permutation) -> int:
    n, x = 1, g
    while not x.is_identity():
        x = compose(x, g)
        n += 1
    return n


def _abelian_dual(A: PermutationGroup) -> tuple:
    """All characters of a finite abelian group, as maps element -> angle in
    turns (a Fraction mod 1).

    Candidate values on the generators are propagated along the Cayley graph;
    a candidate survives iff it is consistent on every edge, which makes it a
    homomorphism.
    """
    gens = A.generators
    orders = [_element_order(g) for g in gens]
    identity = A.identity()
    chars = []
    for nums in itertools.product(*(range(o) for o in orders)):
        theta = [Fraction(n, o) for n, o in zip(nums, orders)]
        value = {identity: Fraction(0)}
        queue = [identity]
        ok = True
        while queue and ok:
            x = queue.pop()
            for g, th in zip(gens, theta):
                y = compose(x, g)
                v = (value[x] + th) % 1
                if y in value:
                    if value[y] != v:
                        ok = False
                        break
                else:
                    value[y] = v
                    queue.append(y)
        if ok:
            chars.append(value)
    if len(chars) != A.order:
        raise ValueError("subgroup is not abelian")
    return tuple(chars)


def _check_character(A: PermutationGroup, chi: Mapping) -> None:
    for a in A.elements:
        for b in A.elements:
            if (chi[a] + chi[b] - chi[compose(a, b)]) % 1 != 0:
                raise ValueError("character is not multiplicative on the subgroup")


def induced_rep(f: InducedVirtuallyAbelian, chi, gamma: Permutation) -> np.ndarray:
    """Matrix of Ind(chi)(gamma) in the basis of left cosets x_1 H, ..., x_m H.

    Entry (x, y) is chi(x^{-1} gamma y) when that element lies in H, else 0.
    ``chi`` is an index into ``f.characters`` or an explicit mapping from
    subgroup elements to angles in turns.
    """
    if gamma not in f.group.elements:
        raise ValueError("element is not in the group")
    if isinstance(chi, (int, np.integer)):
        chi = f.characters[int(chi)]
    else:
        chi = {p: Fraction(v) for p, v in chi.items()}
        _check_character(f.subgroup, chi)
    reps = f.cosets
    m = len(reps)
    out = np.zeros((m, m), dtype=complex)
    for a, x in enumerate(reps):
        xg = compose(x.inverse(), gamma)
        for b, y in enumerate(reps):
            z = compose(xg, y)
            if z in f.subgroup.elements:
                out[a, b] = np.exp(2j * np.pi * float(chi[z]))
    return out


def eval_classical_coordinate(L: SparseLatinSquare, frame: ProjectionFrame, i: int, j: int) -> np.ndarray:
    """``P_{L_ij}``, with the zero matrix for a ``*`` cell."""
    if frame.dimension != L.K:
        raise ValueError(f"frame dimension {frame.dimension} != K={L.K}")
    x = L[i, j]
    return np.zeros((L.K, L.K), dtype=complex) if x == STAR else frame[x]


def classical_magic(L: SparseLatinSquare, frame: ProjectionFrame) -> NumericMagicUnitary:
    N, K = L.N, L.K
    E = np.empty((N, N, K, K), dtype=complex)
    for i in range(1, N + 1):
        for j in range(1, N + 1):
            E[i - 1, j - 1] = eval_classical_coordinate(L, frame, i, j)
    return NumericMagicUnitary(E)


def eval_cyclic_coordinate(frame: ProjectionFrame, i: int, j: int) -> np.ndarray:
    """``P_{j-i}`` with the index read mod K in 1..K."""
    K = frame.dimension
    return frame[(j - i - 1) % K + 1]


def cyclic_magic(frame: ProjectionFrame) -> NumericMagicUnitary:
    K = frame.dimension
    E = np.empty((K, K, K, K), dtype=complex)
    for i in range(1, K + 1):
        for j in range(1, K + 1):
            E[i - 1, j - 1] = eval_cyclic_coordinate(frame, i, j)
    return NumericMagicUnitary(E)


# functional surface ---------------------------------------------------------

def _word_family(f: ModelFamily) -> ModelFamily:
    if not f.word_based:
        raise ValueError(f"{f.variant} models are not evaluated on words")
    return f


def canonical_word(f: ModelFamily, raw) -> ReducedWord:
    return _word_family(f).canonical(raw)


def inverse_word(f: ModelFamily, word: ReducedWord) -> ReducedWord:
    raw = f.to_raw(word)
    return f.canonical([(i, -k) for i, k in reversed(raw)])


def sample_point(f: ModelFamily, rng) -> ModelPoint:
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    return f.sample(rng)


def eval_generator(f: ModelFamily, point: ModelPoint, i: int, s: Optional[int] = None) -> np.ndarray:
    """``pi(g_i)`` at ``point``.  With ``s`` given, ``i`` names a part of a
    direct-product family and ``s`` the generator within it; otherwise ``i``
    is the global generator index."""
    f = _word_family(f)
    if s is not None:
        if not isinstance(f, FreeProductOfDirectProducts):
            raise ValueError("within-part generator index only applies to direct-product parts")
        if not (1 <= i <= len(f.parts) and 1 <= s <= f.parts[i - 1]):
            raise ValueError(f"generator ({i}, {s}) out of range")
        i = f._global(i, s)
    if not 1 <= i <= f.num_generators:
        raise ValueError(f"generator index {i} outside 1..{f.num_generators}")
    return f.generator(point, i)


def eval_word(f: ModelFamily, point: ModelPoint, word: ReducedWord) -> np.ndarray:
    return _word_family(f).evaluate(point, word)


def word_trace(f: ModelFamily, point: ModelPoint, word: ReducedWord) -> complex:
    """Closed-form normalized trace of the model evaluated on ``word``."""
    return _word_family(f).trace(point, word)


def direct_trace(f: ModelFamily, point: ModelPoint, word: ReducedWord) -> complex:
    """Normalized trace of the explicitly multiplied matrix."""
    A = eval_word(f, point, word)
    return complex(np.trace(A) / A.shape[0])


def magic_matrix(f: ModelFamily, point: ModelPoint) -> NumericMagicUnitary:
    return f.magic(point)


def parse_word(text: str) -> list[tuple[int, int]]:
    """Parse ``"1:2,2:1"`` into ``[(1, 2), (2, 1)]``; a bare index means power 1."""
    out = []
    text = text.strip()
    if not text:
        return out
    for part in text.split(","):
        part = part.strip()
        if ":" in part:
            i, k = part.split(":")
            out.append((int(i), int(k)))
        else:
            out.append((int(part), 1))
    return out


def _group_from_json(data) -> PermutationGroup:
    gens = data["generators"] if isinstance(data, dict) else data
    return generate_group([Permutation(tuple(g)) for g in gens])


def family_from_json(data: dict) -> ModelFamily:
    """Build a family from ``{"variant": ..., params...}``."""
    data = dict(data)
    variant = data.pop("variant", None)
    if variant == "FreeProduct":
        return FreeProduct(int(data["K"]), int(data["M"]))
    if variant == "FreeProductOfDirectProducts":
        return FreeProductOfDirectProducts(int(data["K"]), tuple(data["parts"]))
    if variant in ("Amalgamated", "CommutingPowers"):
        K, L = int(data["K"]), int(data["L"])
        R = int(data.get("R", K // L if L else 0))
        cls = Amalgamated if variant == "Amalgamated" else CommutingPowers
        return cls(K, L, R, int(data["M"]))
    if variant == "FreeTimesCentral":
        return FreeTimesCentral(int(data["K"]))
    if variant == "CyclicFlat":
        return CyclicFlat(int(data["K"]))
    if variant == "Classical":
        return Classical(SparseLatinSquare.from_grid(data["square"], data.get("K")))
    if variant == "InducedVirtuallyAbelian":
        return InducedVirtuallyAbelian(_group_from_json(data["group"]),
                                       _group_from_json(data["subgroup"]))
    raise ValueError(f"unknown family variant {variant!r}")
