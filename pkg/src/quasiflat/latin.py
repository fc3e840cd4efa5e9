"""Sparse Latin squares and their dictionary with tuples of permutations.

A sparse Latin square of size N over K symbols is an N x N grid in which
every row and every column holds each of 1..K exactly once and ``*``
elsewhere.  Grids are plain integer matrices with 0 standing for ``*``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Iterator, Optional, Sequence

from .perm import DEFAULT_CAP, Permutation, PermutationGroup, generate_group

__all__ = [
    "STAR",
    "SparseLatinSquare",
    "LatinValidation",
    "DistinctnessError",
    "validate",
    "enumerate_squares",
    "to_permutations",
    "from_permutations",
    "hopf_image_group",
    "admissible_squares",
    "act",
]

STAR = 0


def _cell(v) -> int:
    if v == "*" or v is None:
        return STAR
    if isinstance(v, bool) or int(v) != v:
        raise ValueError(f"bad symbol {v!r}")
    return int(v)


def _normalize(grid) -> tuple[tuple[int, ...], ...]:
    rows = tuple(tuple(_cell(v) for v in row) for row in grid)
    n = len(rows)
    if n == 0 or any(len(r) != n for r in rows):
        raise ValueError("grid must be a nonempty square")
    return rows


@dataclass
class LatinValidation:
    valid: bool
    defects: list[str]

    def __bool__(self):
        return self.valid


def validate(grid, k: Optional[int] = None) -> LatinValidation:
    """Check the sparse Latin square condition on a raw grid.

    ``k`` defaults to the largest symbol present.  Symbols outside 0..k are
    an error rather than a defect.
    """
    rows = _normalize(grid)
    n = len(rows)
    present = max((v for row in rows for v in row), default=0)
    K = present if k is None else int(k)
    for i, row in enumerate(rows, start=1):
        for j, v in enumerate(row, start=1):
            if v < 0 or v > K:
                raise ValueError(f"symbol {v} at ({i}, {j}) outside 0..{K}")
    defects = []
    if K < 1:
        defects.append("no symbols")
    if K > n:
        defects.append(f"K={K} exceeds size {n}")
    want = list(range(1, K + 1))
    for i, row in enumerate(rows, start=1):
        if sorted(v for v in row if v) != want:
            defects.append(f"row {i} is not a permutation of 1..{K} padded with *")
    for j in range(n):
        col = [rows[i][j] for i in range(n)]
        if sorted(v for v in col if v) != want:
            defects.append(f"column {j + 1} is not a permutation of 1..{K} padded with *")
    return LatinValidation(not defects, defects)


@dataclass(frozen=True, order=True)
class SparseLatinSquare:
    grid: tuple[tuple[int, ...], ...]
    K: int

    def __post_init__(self):
        grid = _normalize(self.grid)
        report = validate(grid, self.K)
        if not report:
            raise ValueError("invalid sparse Latin square: " + "; ".join(report.defects))
        object.__setattr__(self, "grid", grid)

    @classmethod
    def from_grid(cls, grid, k: Optional[int] = None) -> "SparseLatinSquare":
        rows = _normalize(grid)
        K = max(v for row in rows for v in row) if k is None else k
        return cls(rows, K)

    @property
    def N(self) -> int:
        return len(self.grid)

    def __getitem__(self, ij: tuple[int, int]) -> int:
        i, j = ij
        return self.grid[i - 1][j - 1]

    def to_json(self) -> list[list[int]]:
        return [list(r) for r in self.grid]

    def __str__(self):
        return "\n".join(" ".join(str(v) if v else "*" for v in row) for row in self.grid)


def enumerate_squares(N: int, K: int) -> Iterator[SparseLatinSquare]:
    """All N x N sparse Latin squares over K symbols.

    Row-major backtracking over cells, trying ``*`` before 1..K, so squares
    come out in lexicographic order of their flattened grids.
    """
    if not 1 <= K <= N:
        raise ValueError("need 1 <= K <= N")
    full = (1 << (K + 1)) - 2  # bits 1..K
    max_stars = N - K
    row_used = [0] * N
    col_used = [0] * N
    row_stars = [0] * N
    col_stars = [0] * N
    grid = [[STAR] * N for _ in range(N)]

    def missing(mask):
        return K - bin(mask).count("1")

    def feasible(r, c):
        # row r has cells c+1..N-1 left, column c has rows r+1..N-1 left
        return missing(row_used[r]) <= N - c - 1 and missing(col_used[c]) <= N - r - 1

    def rec(pos):
        if pos == N * N:
            yield SparseLatinSquare(tuple(tuple(row) for row in grid), K)
            return
        r, c = divmod(pos, N)
        if row_stars[r] < max_stars and col_stars[c] < max_stars:
            row_stars[r] += 1
            col_stars[c] += 1
            grid[r][c] = STAR
            if feasible(r, c):
                yield from rec(pos + 1)
            row_stars[r] -= 1
            col_stars[c] -= 1
        free = full & ~row_used[r] & ~col_used[c]
        for x in range(1, K + 1):
            bit = 1 << x
            if not free & bit:
                continue
            row_used[r] |= bit
            col_used[c] |= bit
            grid[r][c] = x
            if feasible(r, c):
                yield from rec(pos + 1)
            row_used[r] &= ~bit
            col_used[c] &= ~bit
        grid[r][c] = STAR

    yield from rec(0)


def to_permutations(L: SparseLatinSquare) -> list[Permutation]:
    """The permutations sigma_x with sigma_x(j) = i exactly when L[i, j] = x."""
    N = L.N
    images = [[0] * N for _ in range(L.K)]
    for i in range(N):
        for j in range(N):
            x = L.grid[i][j]
            if x:
                images[x - 1][j] = i + 1
    return [Permutation(tuple(im)) for im in images]


class DistinctnessError(ValueError):
    """Values sigma_1(i), ..., sigma_K(i) collide at some point i."""

    def __init__(self, point: int):
        super().__init__(f"permutation values are not pairwise distinct at i={point}")
        self.point = point


def from_permutations(perms: Sequence[Permutation]) -> SparseLatinSquare:
    """Square with L[i, j] = x exactly when sigma_x(i) = j, and * elsewhere.

    Note the direction: reading the result back with ``to_permutations``
    gives the *inverses* sigma_x^{-1}.
    """
    perms = list(perms)
    if not perms:
        raise ValueError("need at least one permutation")
    N = perms[0].degree
    if any(p.degree != N for p in perms):
        raise ValueError("permutations have different degrees")
    grid = [[STAR] * N for _ in range(N)]
    for i in range(1, N + 1):
        values = [p(i) for p in perms]
        if len(set(values)) != len(values):
            raise DistinctnessError(i)
        for x, j in enumerate(values, start=1):
            grid[i - 1][j - 1] = x
    return SparseLatinSquare(tuple(tuple(r) for r in grid), len(perms))


def hopf_image_group(L: SparseLatinSquare, cap: int = DEFAULT_CAP) -> PermutationGroup:
    return generate_group(to_permutations(L), cap)


def admissible_squares(N: int, K: int, G: PermutationGroup) -> list[SparseLatinSquare]:
    """Squares whose permutation group G_L lies inside G.

    G_L is generated by the sigma_x, so containment reduces to membership of
    each sigma_x in G.
    """
    if G.degree != N:
        raise ValueError(f"group degree {G.degree} != N={N}")
    return [L for L, perms in _squares_with_permutations(N, K)
            if all(s in G.elements for s in perms)]


@lru_cache(maxsize=32)
def _squares_with_permutations(N: int, K: int) -> tuple:
    return tuple((L, tuple(to_permutations(L))) for L in enumerate_squares(N, K))


def act(tau: Permutation, L: SparseLatinSquare) -> SparseLatinSquare:
    """Row action (L^tau)[i, j] = L[tau^{-1}(i), j]."""
    if tau.degree != L.N:
        raise ValueError("degree mismatch")
    inv = tau.inverse()
    grid = tuple(L.grid[inv(i) - 1] for i in range(1, L.N + 1))
    return SparseLatinSquare(grid, L.K)

