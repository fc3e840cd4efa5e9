"""Haar unitaries, projection frames and numeric magic unitaries.

A magic unitary here is an ``N x N`` grid of ``K x K`` complex matrices,
stored as one array of shape ``(N, N, K, K)``.  The orbit pattern ``epsilon``
is stored as the *support* (1 where the entry is nonzero), the opposite of a
``delta_{u_ij, 0}`` convention; it is used that way everywhere in the package.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

__all__ = [
    "CONSTRUCTION_TOL",
    "VALIDATION_TOL",
    "STATISTICAL_TOL",
    "haar_unitary",
    "haar_unitaries",
    "is_unitary",
    "ProjectionFrame",
    "frame_from_unitary",
    "NumericMagicUnitary",
    "ValidationReport",
    "validate_magic",
    "assemble_block_magic",
    "OrbitDecomposition",
    "orbit_decomposition",
    "quasi_transitivity",
    "rank_pattern",
    "matrix_to_json",
    "matrix_from_json",
]

CONSTRUCTION_TOL = 1e-12
VALIDATION_TOL = 1e-10
STATISTICAL_TOL = 1e-6


def haar_unitaries(K: int, n: int, rng: np.random.Generator) -> np.ndarray:
    """Stack of ``n`` independent Haar-distributed ``K x K`` unitaries.

    QR of a complex Ginibre matrix, with the columns of Q rephased so that R
    has a positive diagonal; without that correction the law is not Haar.
    """
    if K < 1:
        raise ValueError("K must be >= 1")
    z = (rng.standard_normal((n, K, K)) + 1j * rng.standard_normal((n, K, K))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diagonal(r, axis1=-2, axis2=-1)
    phases = d / np.abs(d)
    return q * phases[:, None, :]


def haar_unitary(K: int, rng: np.random.Generator) -> np.ndarray:
    return haar_unitaries(K, 1, rng)[0]


def is_unitary(U: np.ndarray, tol: float = VALIDATION_TOL) -> bool:
    U = np.asarray(U)
    if U.ndim != 2 or U.shape[0] != U.shape[1]:
        return False
    return np.linalg.norm(U.conj().T @ U - np.eye(U.shape[0]), 2) < tol


def _outer_projections(U: np.ndarray) -> np.ndarray:
    # projs[j] = U[:, j] U[:, j]^*
    return np.einsum("aj,bj->jab", U, U.conj())


@dataclass(frozen=True)
class ProjectionFrame:
    """K mutually orthogonal rank-one projections summing to the identity."""

    projections: np.ndarray  # shape (K, K, K)
    unitary: Optional[np.ndarray] = field(default=None, repr=False, compare=False)

    @property
    def dimension(self) -> int:
        return self.projections.shape[0]

    def __getitem__(self, j: int) -> np.ndarray:
        """One-based access: ``frame[j]`` is P_j."""
        return self.projections[j - 1]

    def defects(self) -> dict[str, float]:
        P = self.projections
        K = self.dimension
        eye = np.eye(K)
        idem = max(np.linalg.norm(p @ p - p, 2) for p in P)
        herm = max(np.linalg.norm(p.conj().T - p, 2) for p in P)
        rank = max(abs(np.trace(p).real - 1.0) for p in P)
        orth = 0.0
        for i in range(K):
            for j in range(K):
                if i != j:
                    orth = max(orth, np.linalg.norm(P[i] @ P[j], 2))
        total = np.linalg.norm(P.sum(axis=0) - eye, 2)
        return {"idempotent": idem, "hermitian": herm, "rank_one": rank,
                "orthogonal": orth, "partition_of_unity": total}

    def is_valid(self, tol: float = VALIDATION_TOL) -> bool:
        return max(self.defects().values()) < tol

    def to_json(self) -> dict:
        return {"dimension": self.dimension,
                "projections": [matrix_to_json(p) for p in self.projections]}

    @classmethod
    def from_json(cls, data: dict) -> "ProjectionFrame":
        return cls(np.array([matrix_from_json(p) for p in data["projections"]]))


def frame_from_unitary(U: np.ndarray, tol: float = VALIDATION_TOL) -> ProjectionFrame:
    """Projections onto the columns of a unitary matrix."""
    U = np.asarray(U, dtype=complex)
    if not is_unitary(U, tol):
        raise ValueError("input is not unitary within tolerance")
    return ProjectionFrame(_outer_projections(U), U)


@dataclass(frozen=True)
class NumericMagicUnitary:
    entries: np.ndarray  # shape (N, N, K, K)

    def __post_init__(self):
        e = np.asarray(self.entries, dtype=complex)
        if e.ndim != 4 or e.shape[0] != e.shape[1] or e.shape[2] != e.shape[3]:
            raise ValueError(f"expected shape (N, N, K, K), got {e.shape}")
        object.__setattr__(self, "entries", e)

    @property
    def size(self) -> int:
        return self.entries.shape[0]

    @property
    def fiber(self) -> int:
        return self.entries.shape[2]

    def __getitem__(self, ij: tuple[int, int]) -> np.ndarray:
        i, j = ij
        return self.entries[i - 1, j - 1]

    def support(self, threshold: float = 1e-8) -> np.ndarray:
        norms = np.linalg.norm(self.entries, ord=2, axis=(2, 3))
        return (norms > threshold).astype(int)


@dataclass
class ValidationReport:
    passed: bool
    max_defect: float
    defects: list[dict]

    def to_json(self) -> dict:
        return {"passed": self.passed, "max_defect": self.max_defect, "defects": self.defects}


def validate_magic(M: NumericMagicUnitary, tol: float = VALIDATION_TOL) -> ValidationReport:
    """Check that every entry is a projection and every row and column sums to 1.

    All defects above ``tol`` are listed; ``max_defect`` covers every check.
    """
    E = M.entries
    N, K = M.size, M.fiber
    eye = np.eye(K)
    defects = []
    worst = 0.0

    def record(kind, index, value):
        nonlocal worst
        worst = max(worst, value)
        if value >= tol:
            defects.append({"kind": kind, "index": index, "defect": value})

    for i in range(N):
        for j in range(N):
            p = E[i, j]
            d = max(np.linalg.norm(p @ p - p, 2), np.linalg.norm(p.conj().T - p, 2))
            record("projection", [i + 1, j + 1], float(d))
    for i in range(N):
        record("row", i + 1, float(np.linalg.norm(E[i].sum(axis=0) - eye, 2)))
    for j in range(N):
        record("column", j + 1, float(np.linalg.norm(E[:, j].sum(axis=0) - eye, 2)))
    return ValidationReport(not defects, worst, defects)


def assemble_block_magic(blocks: Sequence[NumericMagicUnitary]) -> NumericMagicUnitary:
    """Block-diagonal magic ``diag(u^1, ..., u^M)``; off-block entries are zero."""
    if not blocks:
        raise ValueError("need at least one block")
    K = blocks[0].fiber
    if any(b.fiber != K for b in blocks):
        raise ValueError("blocks have different fiber dimensions")
    N = sum(b.size for b in blocks)
    out = np.zeros((N, N, K, K), dtype=complex)
    offset = 0
    for b in blocks:
        n = b.size
        out[offset:offset + n, offset:offset + n] = b.entries
        offset += n
    return NumericMagicUnitary(out)


@dataclass(frozen=True)
class OrbitDecomposition:
    blocks: tuple[tuple[int, ...], ...]
    epsilon: np.ndarray = field(compare=False)
    diagnostics: tuple[str, ...] = ()

    @property
    def size(self) -> int:
        return self.epsilon.shape[0]


def _support_from_samples(samples: Sequence[NumericMagicUnitary], threshold: float) -> np.ndarray:
    if not samples:
        raise ValueError("empty sample set")
    norms = np.max([np.linalg.norm(s.entries, ord=2, axis=(2, 3)) for s in samples], axis=0)
    return (norms > threshold).astype(int)


def orbit_decomposition(source, threshold: float = 1e-8) -> OrbitDecomposition:
    """Blocks of the relation i ~ j iff entry (i, j) is nonzero.

    ``source`` is either an explicit 0/1 support matrix, or a collection of
    sampled NumericMagicUnitary points; an entry counts as nonzero when its
    operator norm exceeds ``threshold`` at some sample.  For a genuine quantum
    permutation group the raw relation is already an equivalence; when it is
    not, the transitive closure is used and the discrepancy is reported in
    ``diagnostics``.
    """
    if isinstance(source, NumericMagicUnitary):
        source = [source]
    if isinstance(source, np.ndarray) and source.ndim == 2:
        support = (np.asarray(source) != 0).astype(int)
    elif isinstance(source, (list, tuple)) and source and isinstance(source[0], NumericMagicUnitary):
        support = _support_from_samples(source, threshold)
    elif isinstance(source, (list, tuple)) and not source:
        raise ValueError("empty sample set")
    else:
        support = (np.asarray(source) != 0).astype(int)
    N = support.shape[0]
    if support.shape != (N, N):
        raise ValueError("support matrix must be square")

    parent = list(range(N))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for i, j in zip(*np.nonzero(support)):
        ri, rj = find(int(i)), find(int(j))
        if ri != rj:
            parent[max(ri, rj)] = min(ri, rj)
    groups: dict[int, list[int]] = {}
    for x in range(N):
        groups.setdefault(find(x), []).append(x + 1)
    blocks = tuple(sorted(tuple(g) for g in groups.values()))

    eps = np.zeros((N, N), dtype=int)
    for b in blocks:
        idx = np.array(b) - 1
        eps[np.ix_(idx, idx)] = 1

    notes = []
    if not np.all(np.diag(support)):
        notes.append("support relation is not reflexive")
    if not np.array_equal(support, support.T):
        notes.append("support relation is not symmetric")
    if not np.array_equal(support, eps):
        notes.append("support relation is not transitive; used its closure")
    return OrbitDecomposition(blocks, eps, tuple(notes))


def quasi_transitivity(d: OrbitDecomposition) -> Optional[int]:
    """Common orbit size K, or None when the orbits have different sizes."""
    sizes = {len(b) for b in d.blocks}
    return sizes.pop() if len(sizes) == 1 else None


def rank_pattern(M: NumericMagicUnitary, tol: float = VALIDATION_TOL,
                 quasi_flat: bool = True) -> np.ndarray:
    """Matrix of numerical ranks of the entries of a magic unitary.

    Ranks count eigenvalues above 1/2 of each (Hermitian) entry.  Raises if an
    entry is not a projection within ``tol``, if a declared quasi-flat model
    has an entry of rank >= 2, or if the rank matrix is not bistochastic with
    sums equal to the fiber dimension.
    """
    E = M.entries
    N, K = M.size, M.fiber
    ranks = np.zeros((N, N), dtype=int)
    for i in range(N):
        for j in range(N):
            p = E[i, j]
            if np.linalg.norm(p @ p - p, 2) > tol or np.linalg.norm(p.conj().T - p, 2) > tol:
                raise ValueError(f"entry ({i + 1}, {j + 1}) is not a projection")
            ranks[i, j] = int(np.sum(np.linalg.eigvalsh((p + p.conj().T) / 2) > 0.5))
    if quasi_flat and ranks.max(initial=0) > 1:
        i, j = np.argwhere(ranks > 1)[0]
        raise ValueError(f"entry ({i + 1}, {j + 1}) has rank {ranks[i, j]} in a quasi-flat model")
    if not (np.all(ranks.sum(axis=0) == K) and np.all(ranks.sum(axis=1) == K)):
        raise ValueError("rank matrix is not bistochastic with sums equal to the fiber dimension")
    return ranks


def matrix_to_json(A: np.ndarray) -> list:
    A = np.asarray(A, dtype=complex)
    return [[[float(z.real), float(z.imag)] for z in row] for row in A]


def matrix_from_json(data: Iterable) -> np.ndarray:
    arr = np.asarray(data, dtype=float)
    if arr.ndim != 3 or arr.shape[-1] != 2:
        raise ValueError("expected a matrix of [re, im] pairs")
    return arr[..., 0] + 1j * arr[..., 1]
