"""Finite permutation groups, measures on them, and their convolution.

Permutations are one-based image tuples, and composition is right to left:
``(p * q)(x) == p(q(x))``.  Groups are materialized as explicit element sets,
which is all we need at desk scale (a few thousand elements at most).
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

__all__ = [
    "Permutation",
    "PermutationGroup",
    "GroupMeasure",
    "GroupTooLarge",
    "NotSubgroupError",
    "NotNormalError",
    "NotTransitiveError",
    "compose",
    "generate_group",
    "orbit_partition",
    "all_subgroups",
    "is_normal",
    "convolve",
    "cesaro_average",
    "total_variation",
    "haar_moment_classical",
    "check_normal_orbits",
    "NormalOrbitVerdict",
]

DEFAULT_CAP = 10**6


class GroupTooLarge(RuntimeError):
    """Closure exceeded its element cap."""


class NotSubgroupError(ValueError):
    pass


class NotNormalError(ValueError):
    pass


class NotTransitiveError(ValueError):
    pass


@dataclass(frozen=True, order=True)
class Permutation:
    images: tuple[int, ...]

    def __post_init__(self):
        images = tuple(int(x) for x in self.images)
        if sorted(images) != list(range(1, len(images) + 1)):
            raise ValueError(f"not a permutation of 1..{len(images)}: {list(images)}")
        object.__setattr__(self, "images", images)

    @classmethod
    def identity(cls, degree: int) -> "Permutation":
        return cls(tuple(range(1, degree + 1)))

    @classmethod
    def from_cycles(cls, degree: int, *cycles: Sequence[int]) -> "Permutation":
        """Build from disjoint cycles, e.g. ``from_cycles(4, (1, 2), (3, 4))``."""
        images = list(range(1, degree + 1))
        for cyc in cycles:
            for a, b in zip(cyc, tuple(cyc[1:]) + (cyc[0],)):
                images[a - 1] = b
        return cls(tuple(images))

    @property
    def degree(self) -> int:
        return len(self.images)

    def __call__(self, x: int) -> int:
        return self.images[x - 1]

    def __mul__(self, other: "Permutation") -> "Permutation":
        return compose(self, other)

    def inverse(self) -> "Permutation":
        inv = [0] * self.degree
        for x, y in enumerate(self.images, start=1):
            inv[y - 1] = x
        return Permutation(tuple(inv))

    def is_identity(self) -> bool:
        return all(y == x for x, y in enumerate(self.images, start=1))

    def __repr__(self):
        return f"Permutation({list(self.images)})"

    def to_json(self) -> list[int]:
        return list(self.images)


def compose(p: Permutation, q: Permutation) -> Permutation:
    """Return ``p o q``, the permutation ``x -> p(q(x))``."""
    if p.degree != q.degree:
        raise ValueError(f"degree mismatch: {p.degree} != {q.degree}")
    pi = p.images
    return Permutation(tuple(pi[y - 1] for y in q.images))


@dataclass(frozen=True)
class PermutationGroup:
    degree: int
    generators: tuple[Permutation, ...]
    elements: frozenset[Permutation] = field(repr=False)
    cap: int = DEFAULT_CAP

    @property
    def order(self) -> int:
        return len(self.elements)

    def __contains__(self, p: Permutation) -> bool:
        return p in self.elements

    def __iter__(self):
        return iter(sorted(self.elements))

    def __len__(self):
        return len(self.elements)

    def identity(self) -> Permutation:
        return Permutation.identity(self.degree)

    def issubgroup(self, other: "PermutationGroup") -> bool:
        return self.degree == other.degree and self.elements <= other.elements

    def is_transitive(self) -> bool:
        return len(orbit_partition(self)) == 1

    def is_abelian(self) -> bool:
        gens = self.generators
        return all(compose(a, b) == compose(b, a) for a in gens for b in gens)

    @classmethod
    def symmetric(cls, degree: int) -> "PermutationGroup":
        gens = [Permutation.from_cycles(degree, tuple(range(1, degree + 1)))]
        if degree > 1:
            gens.append(Permutation.from_cycles(degree, (1, 2)))
        return generate_group(gens)

    @classmethod
    def trivial(cls, degree: int) -> "PermutationGroup":
        return generate_group([Permutation.identity(degree)])


def generate_group(generators: Iterable[Permutation], cap: int = DEFAULT_CAP) -> PermutationGroup:
    """Breadth-first closure of ``generators`` under composition.

    Raises GroupTooLarge as soon as more than ``cap`` elements are found.
    """
    gens = tuple(generators)
    if not gens:
        raise ValueError("need at least one generator")
    degree = gens[0].degree
    if any(g.degree != degree for g in gens):
        raise ValueError("generators have different degrees")

    identity = Permutation.identity(degree)
    seen = {identity}
    queue = deque([identity])
    while queue:
        x = queue.popleft()
        for g in gens:
            y = compose(x, g)
            if y not in seen:
                seen.add(y)
                if len(seen) > cap:
                    raise GroupTooLarge(f"group exceeds cap of {cap} elements")
                queue.append(y)
    # finite group: closure under products already gives inverses
    return PermutationGroup(degree, gens, frozenset(seen), cap)


def orbit_partition(G: PermutationGroup) -> list[tuple[int, ...]]:
    """Orbits of the natural action of G on 1..N, sorted by least element."""
    unseen = set(range(1, G.degree + 1))
    blocks = []
    while unseen:
        start = min(unseen)
        orbit = {start}
        stack = [start]
        while stack:
            x = stack.pop()
            for g in G.generators:
                y = g(x)
                if y not in orbit:
                    orbit.add(y)
                    stack.append(y)
        unseen -= orbit
        blocks.append(tuple(sorted(orbit)))
    return blocks


def is_normal(H: PermutationGroup, G: PermutationGroup) -> bool:
    """Conjugation test on generators; assumes H is a subgroup of G."""
    for g in G.generators:
        ginv = g.inverse()
        for h in H.generators:
            if compose(compose(g, h), ginv) not in H.elements:
                return False
    return True


def all_subgroups(G: PermutationGroup) -> list[PermutationGroup]:
    """Every subgroup of a (small) group, by closing joins with cyclic subgroups."""
    identity = G.identity()
    found = {frozenset([identity]): generate_group([identity])}
    frontier = list(found.values())
    while frontier:
        nxt = []
        for H in frontier:
            for g in sorted(G.elements):
                if g in H.elements:
                    continue
                J = generate_group(H.generators + (g,))
                if J.elements not in found:
                    found[J.elements] = J
                    nxt.append(J)
        frontier = nxt
    return sorted(found.values(), key=lambda H: (H.order, sorted(H.elements)))


@dataclass(frozen=True)
class NormalOrbitVerdict:
    equal_sizes: bool
    orbit_size: int | None
    orbits: list[tuple[int, ...]]

    def __bool__(self):
        return self.equal_sizes


def check_normal_orbits(G: PermutationGroup, H: PermutationGroup) -> NormalOrbitVerdict:
    """Orbits of a normal subgroup of a transitive group all have the same size.

    The preconditions are checked and each failure raises its own exception.
    """
    if not H.issubgroup(G):
        raise NotSubgroupError("H is not a subgroup of G")
    if not G.is_transitive():
        raise NotTransitiveError("G is not transitive")
    if not is_normal(H, G):
        raise NotNormalError("H is not normal in G")
    orbits = orbit_partition(H)
    sizes = {len(o) for o in orbits}
    equal = len(sizes) == 1
    return NormalOrbitVerdict(equal, sizes.pop() if equal else None, orbits)


@dataclass(frozen=True)
class GroupMeasure:
    """Probability measure on a finite set of permutations of common degree."""

    degree: int
    weights: Mapping[Permutation, float]

    def __post_init__(self):
        weights = {p: float(w) for p, w in self.weights.items() if w != 0}
        for p, w in weights.items():
            if p.degree != self.degree:
                raise ValueError("support permutations must share the degree")
            if w < 0:
                raise ValueError("negative weight")
        total = sum(weights.values())
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"weights sum to {total!r}, not 1")
        object.__setattr__(self, "weights", weights)

    @classmethod
    def uniform(cls, elements: Iterable[Permutation]) -> "GroupMeasure":
        elems = list(set(elements))
        if not elems:
            raise ValueError("empty support")
        return cls(elems[0].degree, {p: 1.0 / len(elems) for p in elems})

    @classmethod
    def point_mass(cls, p: Permutation) -> "GroupMeasure":
        return cls(p.degree, {p: 1.0})

    def __getitem__(self, p: Permutation) -> float:
        return self.weights.get(p, 0.0)

    @property
    def support(self) -> frozenset[Permutation]:
        return frozenset(self.weights)

    def to_json(self) -> list[dict]:
        return [{"perm": p.to_json(), "weight": w} for p, w in sorted(self.weights.items())]

    @classmethod
    def from_json(cls, records: list[dict]) -> "GroupMeasure":
        perms = [Permutation(tuple(r["perm"])) for r in records]
        if not perms:
            raise ValueError("empty measure")
        return cls(perms[0].degree, {p: r["weight"] for p, r in zip(perms, records)})


def _convolve_raw(a: Mapping[Permutation, float], b: Mapping[Permutation, float]) -> dict:
    out: dict[Permutation, float] = {}
    for h, x in a.items():
        for k, y in b.items():
            g = compose(h, k)
            out[g] = out.get(g, 0.0) + x * y
    return out


def convolve(mu: GroupMeasure, nu: GroupMeasure) -> GroupMeasure:
    """(mu * nu)(g) = sum over h k = g of mu(h) nu(k)."""
    if mu.degree != nu.degree:
        raise ValueError(f"degree mismatch: {mu.degree} != {nu.degree}")
    return GroupMeasure(mu.degree, _convolve_raw(mu.weights, nu.weights))


def _renormalized(w: dict) -> dict:
    # long power iterations drift off unit mass by ~r ulps
    total = sum(w.values())
    return {p: x / total for p, x in w.items()}


def cesaro_averages(mu: GroupMeasure, k: int):
    """Yield ``(r, average of mu^{*1..r})`` for r = 1..k."""
    if k < 1:
        raise ValueError("k must be >= 1")
    power = dict(mu.weights)
    acc: dict[Permutation, float] = {}
    for r in range(1, k + 1):
        if r > 1:
            power = _renormalized(_convolve_raw(power, mu.weights))
        for p, x in power.items():
            acc[p] = acc.get(p, 0.0) + x
        yield r, {p: x / r for p, x in acc.items()}


def cesaro_average(mu: GroupMeasure, k: int) -> GroupMeasure:
    """(1/k) * sum of the convolution powers mu^{*r}, r = 1..k."""
    for _, avg in cesaro_averages(mu, k):
        pass
    return GroupMeasure(mu.degree, _renormalized(avg))


def total_variation(mu: GroupMeasure | Mapping, nu: GroupMeasure | Mapping) -> float:
    a = mu.weights if isinstance(mu, GroupMeasure) else mu
    b = nu.weights if isinstance(nu, GroupMeasure) else nu
    keys = set(a) | set(b)
    return 0.5 * sum(abs(a.get(p, 0.0) - b.get(p, 0.0)) for p in keys)


def haar_moment_classical(G: PermutationGroup, word: Sequence[tuple[int, int]]) -> Fraction:
    """Haar integral of u_{i1 j1} ... u_{it jt} over a finite group.

    The coordinate u_ij is the indicator of {g : g(j) = i}, so the integral is
    the fraction of group elements sending every j_t to i_t.
    """
    pairs = [(int(i), int(j)) for i, j in word]
    if not pairs:
        raise ValueError("coordinate word must be nonempty")
    for i, j in pairs:
        if not (1 <= i <= G.degree and 1 <= j <= G.degree):
            raise ValueError(f"index pair {(i, j)} outside degree {G.degree}")
    hits = sum(1 for g in G.elements if all(g(j) == i for i, j in pairs))
    return Fraction(hits, G.order)
