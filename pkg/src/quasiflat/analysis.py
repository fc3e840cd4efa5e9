"""Verdicts on models: trace-state estimates, word survival and
inner-faithfulness scans, Cesaro convergence to the Hopf image, and
stationarity checks.

For a group-like element gamma the convolution powers of the trace state are
pointwise powers, so the Cesaro averages of phi(pi(gamma))^r tend to 1 when
the trace is identically 1 and to 0 otherwise.  A word is therefore separated
by the model as soon as one sample point has a trace different from 1.  The
test is one-sided: "not-separated" is evidence of kernel membership, never a
proof.
"""

from __future__ import annotations

import itertools
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .latin import STAR, SparseLatinSquare, admissible_squares, hopf_image_group, to_permutations
from .magic import STATISTICAL_TOL, haar_unitaries
from .models import (
    FreeTimesCentral,
    InducedVirtuallyAbelian,
    ModelFamily,
    ModelPoint,
    ReducedWord,
    canonical_word,
    eval_generator,
    induced_rep,
    word_trace,
)
from .perm import (
    GroupMeasure,
    Permutation,
    PermutationGroup,
    cesaro_averages,
    haar_moment_classical,
    total_variation,
)

__all__ = [
    "DEFAULT_SEED",
    "MAX_WORDS",
    "StateEstimate",
    "SurvivalVerdict",
    "FaithfulnessReport",
    "CesaroReport",
    "StationarityReport",
    "ThomaReport",
    "ObstructionReport",
    "EmptyModelSpace",
    "TooManyWords",
    "mc_trace_state",
    "word_survival_test",
    "enumerate_words",
    "inner_faithfulness_scan",
    "classical_cesaro_hopf_image",
    "coordinate_words",
    "stationarity_check_classical",
    "thoma_stationarity_check",
    "commutation_obstruction_check",
]

DEFAULT_SEED = 20160101
MAX_WORDS = 10**5
SURVIVAL_SAMPLES = 100


class EmptyModelSpace(ValueError):
    """No admissible sparse Latin square: the classical model space is empty."""


class TooManyWords(RuntimeError):
    pass


def _rng(seed) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


# trace state -----------------------------------------------------------------

@dataclass(frozen=True)
class StateEstimate:
    mean: complex
    stderr: float
    samples: int
    seed: Optional[int]

    def to_json(self) -> dict:
        return {"mean": [self.mean.real, self.mean.imag], "stderr": self.stderr,
                "samples": self.samples, "seed": self.seed}


def _complex_stats(values: np.ndarray) -> tuple[complex, float]:
    n = len(values)
    mean = complex(values.mean())
    if n < 2:
        return mean, 0.0
    var = values.real.var(ddof=1) + values.imag.var(ddof=1)
    return mean, float(np.sqrt(var / n))


def _trace_batch(f: ModelFamily, word: ReducedWord, n: int, seed) -> np.ndarray:
    rng = _rng(seed)
    return np.array([word_trace(f, f.sample(rng), word) for _ in range(n)])


def mc_trace_state(f: ModelFamily, word: ReducedWord, n: int, seed: int = DEFAULT_SEED,
                   workers: int = 1) -> StateEstimate:
    """Mean and standard error of the normalized word trace over ``n``
    independent model points.

    Sequential mode (``workers=1``) is the reproducibility reference.  With
    more workers every worker draws from its own stream spawned from ``seed``;
    the estimate is statistically equivalent but not bitwise identical.
    """
    if n < 1:
        raise ValueError("need at least one sample")
    if workers <= 1:
        values = _trace_batch(f, word, n, seed)
    else:
        streams = np.random.SeedSequence(seed).spawn(workers)
        counts = [n // workers + (1 if w < n % workers else 0) for w in range(workers)]
        jobs = [(c, s) for c, s in zip(counts, streams) if c]
        with ProcessPoolExecutor(max_workers=len(jobs)) as pool:
            parts = pool.map(_trace_batch, *zip(*[(f, word, c, np.random.default_rng(s))
                                                  for c, s in jobs]))
            values = np.concatenate(list(parts))
    mean, stderr = _complex_stats(values)
    return StateEstimate(mean, stderr, n, seed if isinstance(seed, (int, np.integer)) else None)


# word survival ---------------------------------------------------------------

@dataclass(frozen=True)
class SurvivalVerdict:
    word: ReducedWord
    verdict: str  # "survives" or "not-separated"
    max_deviation: float
    witness: Optional[int]  # index of the first sample point separating the word
    samples: int

    @property
    def survives(self) -> bool:
        return self.verdict == "survives"

    def to_json(self) -> dict:
        return {"word": self.word.to_json(), "verdict": self.verdict,
                "max_deviation": self.max_deviation, "witness": self.witness,
                "samples": self.samples}


def word_survival_test(f: ModelFamily, word: ReducedWord, n: int = SURVIVAL_SAMPLES,
                       tol: float = STATISTICAL_TOL, seed: int = DEFAULT_SEED,
                       points: Optional[Sequence[ModelPoint]] = None) -> SurvivalVerdict:
    """"survives" iff some of ``n`` sampled points has |tr pi(word) - 1| > tol.

    Pre-drawn ``points`` may be passed to share samples across many words.
    """
    if word.is_identity():
        raise ValueError("the identity word cannot be tested for survival")
    if points is None:
        rng = _rng(seed)
        points = [f.sample(rng) for _ in range(n)]
    worst, witness = 0.0, None
    for idx, p in enumerate(points):
        dev = abs(word_trace(f, p, word) - 1.0)
        if dev > worst:
            worst = dev
        if dev > tol and witness is None:
            witness = idx
    verdict = "survives" if witness is not None else "not-separated"
    return SurvivalVerdict(word, verdict, float(worst), witness, len(points))


def _raw_word_count(M: int, K: int, max_len: int) -> int:
    return sum(M * (M - 1) ** (n - 1) * (K - 1) ** n for n in range(1, max_len + 1))


def enumerate_words(f: ModelFamily, max_len: int, cap: int = MAX_WORDS) -> list[ReducedWord]:
    """Distinct nontrivial canonical words reachable from raw words of at most
    ``max_len`` syllables.

    Raw words (generator, exponent) with exponents in 1..K-1 and adjacent
    generators distinct are listed by length, then lexicographically, and
    passed through the family's normal form; first occurrences are kept.
    """
    if max_len < 1:
        raise ValueError("max_len must be >= 1")
    M, K = f.num_generators, f.K
    total = _raw_word_count(M, K, max_len)
    if total > cap:
        raise TooManyWords(f"{total} raw words exceed the cap of {cap}")
    letters = [(i, k) for i in range(1, M + 1) for k in range(1, K)]
    seen, out = set(), []
    for n in range(1, max_len + 1):
        for raw in itertools.product(letters, repeat=n):
            if any(a[0] == b[0] for a, b in zip(raw, raw[1:])):
                continue
            w = canonical_word(f, raw)
            if w.is_identity() or w in seen:
                continue
            seen.add(w)
            out.append(w)
    return out


@dataclass
class FaithfulnessReport:
    family: dict
    max_len: int
    samples: int
    tol: float
    identity_trace: complex
    verdicts: list[SurvivalVerdict] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return abs(self.identity_trace - 1) < 1e-10 and all(v.survives for v in self.verdicts)

    @property
    def failures(self) -> list[SurvivalVerdict]:
        return [v for v in self.verdicts if not v.survives]

    def to_json(self) -> dict:
        return {"pass": self.passed, "family": self.family, "max_len": self.max_len,
                "samples": self.samples, "tol": self.tol,
                "identity_trace": [self.identity_trace.real, self.identity_trace.imag],
                "words": len(self.verdicts), "not_separated": len(self.failures),
                "verdicts": [v.to_json() for v in self.verdicts]}


def inner_faithfulness_scan(f: ModelFamily, max_len: int, n: int = SURVIVAL_SAMPLES,
                            tol: float = STATISTICAL_TOL, seed: int = DEFAULT_SEED,
                            cap: int = MAX_WORDS) -> FaithfulnessReport:
    """Survival test of every canonical word up to ``max_len`` on one shared
    set of ``n`` sampled points."""
    words = enumerate_words(f, max_len, cap)
    rng = _rng(seed)
    points = [f.sample(rng) for _ in range(n)]
    ident = complex(np.mean([word_trace(f, p, ReducedWord()) for p in points]))
    report = FaithfulnessReport(f.to_json(), max_len, n, tol, ident)
    for w in words:
        report.verdicts.append(word_survival_test(f, w, tol=tol, points=points))
    return report


# classical Cesaro limit ------------------------------------------------------

@dataclass
class CesaroReport:
    passed: bool
    k_hit: Optional[int]
    final_k: int
    final_distance: float
    group_order: int
    tol: float
    trajectory: list[tuple[int, float]]

    def to_json(self) -> dict:
        return {"pass": self.passed, "k_hit": self.k_hit, "final_k": self.final_k,
                "final_distance": self.final_distance, "group_order": self.group_order,
                "tol": self.tol, "trajectory": [list(t) for t in self.trajectory]}


def _checkpoint(r: int) -> bool:
    # 1, 2, 5, 10, 20, 50, ...
    while r % 10 == 0:
        r //= 10
    return r in (1, 2, 5)


def classical_cesaro_hopf_image(L: SparseLatinSquare, k_max: int = 10**4,
                                tol: float = STATISTICAL_TOL) -> CesaroReport:
    """Cesaro averages of the uniform measure on the permutations of ``L``
    against the uniform measure on the group they generate.

    Passes iff the total-variation distance drops below ``tol`` for some
    k <= k_max.
    """
    perms = to_permutations(L)
    weights: dict[Permutation, float] = {}
    for p in perms:
        weights[p] = weights.get(p, 0.0) + 1.0 / len(perms)
    mu = GroupMeasure(L.N, weights)
    G = hopf_image_group(L)
    target = GroupMeasure.uniform(G.elements)
    trajectory = []
    hit, dist, r = None, float("inf"), 0
    for r, avg in cesaro_averages(mu, k_max):
        dist = total_variation(avg, target)
        if _checkpoint(r):
            trajectory.append((r, dist))
        if dist < tol:
            hit = r
            break
    if not trajectory or trajectory[-1][0] != r:
        trajectory.append((r, dist))
    return CesaroReport(hit is not None, hit, r, dist, G.order, tol, trajectory)


# classical stationarity ------------------------------------------------------

def coordinate_words(N: int, max_len: int) -> list[tuple[tuple[int, int], ...]]:
    """All coordinate words of length 1..max_len over {1..N}^2."""
    pairs = [(i, j) for i in range(1, N + 1) for j in range(1, N + 1)]
    return [w for n in range(1, max_len + 1) for w in itertools.product(pairs, repeat=n)]


@dataclass
class StationarityReport:
    mode: str
    entries: list[dict]
    passed: bool
    squares: int

    def to_json(self) -> dict:
        return {"pass": self.passed, "mode": self.mode, "squares": self.squares,
                "words": len(self.entries),
                "max_defect": max((e["defect"] for e in self.entries), default=0.0),
                "entries": self.entries}


def _exact_model_value(squares, K: int, word) -> Fraction:
    hits = 0
    for L in squares:
        symbols = {L[i, j] for i, j in word}
        if len(symbols) == 1 and STAR not in symbols:
            hits += 1
    return Fraction(hits, K * len(squares))


def _symbol_table(squares, word) -> np.ndarray:
    return np.array([[L[i, j] for i, j in word] for L in squares])


def _symbol_codes(table: np.ndarray, K: int) -> np.ndarray:
    """Row-wise base-K code of symbol tuples, or K^t for rows with a * cell
    (the last column of the product table, which holds zeros)."""
    t = table.shape[1]
    codes = ((table - 1) * K ** np.arange(t - 1, -1, -1)).sum(axis=1)
    return np.where((table == STAR).any(axis=1), K**t, codes)


def _cyclic_gram_products(gram: np.ndarray, t: int) -> np.ndarray:
    """For every symbol tuple (a_1..a_t), in base-K order, the per-sample
    value of tr(P_{a_1} ... P_{a_t}) * K = <a_1,a_2> ... <a_t,a_1>."""
    K = gram.shape[1]
    tuples = np.array(list(itertools.product(range(K), repeat=t)))
    nxt = np.roll(tuples, -1, axis=1)
    return np.prod(gram[:, tuples, nxt], axis=-1)


def stationarity_check_classical(G: PermutationGroup, K: int, words, mode: str = "exact",
                                 samples: int = 10**5, seed: int = DEFAULT_SEED,
                                 square_sampling: str = "exhaustive",
                                 floor: float = 1e-10) -> StationarityReport:
    """Compare Haar moments of G with the trace state of its universal
    classical quasi-flat model.

    exact:        frame fixed at the standard basis, exact rational average
                  over the admissible squares; pass iff every defect is 0.
    monte-carlo:  Haar-random frames.  With ``square_sampling="exhaustive"``
                  each frame is averaged over all admissible squares (the
                  finite factor is integrated exactly); with ``"uniform"`` one
                  square is drawn per frame.  Pass iff |defect| <= 3 stderr +
                  ``floor``, the floor absorbing rounding in the Gram products.
    """
    squares = admissible_squares(G.degree, K, G)
    if not squares:
        raise EmptyModelSpace(f"no admissible {G.degree}x{G.degree} squares with K={K}")
    words = [tuple((int(i), int(j)) for i, j in w) for w in words]
    entries = []
    if mode == "exact":
        for w in words:
            haar = haar_moment_classical(G, w)
            model = _exact_model_value(squares, K, w)
            defect = abs(haar - model)
            entries.append({"word": [list(p) for p in w], "haar": str(haar),
                            "model": str(model), "defect": float(defect), "exact_zero": defect == 0})
        passed = all(e["exact_zero"] for e in entries)
        return StationarityReport("exact", entries, passed, len(squares))
    if mode not in ("monte-carlo", "mc"):
        raise ValueError(f"unknown mode {mode!r}")
    if square_sampling not in ("exhaustive", "uniform"):
        raise ValueError(f"unknown square sampling {square_sampling!r}")
    rng = _rng(seed)
    U = haar_unitaries(K, samples, rng)
    gram = np.einsum("nji,njk->nik", U.conj(), U)  # columns' inner products
    choice = rng.integers(len(squares), size=samples) if square_sampling == "uniform" else None
    passed = True
    products: dict[int, np.ndarray] = {}
    for w in words:
        t = len(w)
        if t not in products:
            prods = _cyclic_gram_products(gram, t)
            products[t] = np.concatenate([prods, np.zeros((samples, 1))], axis=1) / K
        table = products[t]
        codes = _symbol_codes(_symbol_table(squares, w), K)
        if choice is None:
            weights = np.bincount(codes, minlength=K**t + 1)[np.r_[:K**t, -1]]
            values = table @ (weights / len(squares))
        else:
            values = table[np.arange(samples), codes[choice]]
        mean, stderr = _complex_stats(values)
        haar = haar_moment_classical(G, w)
        defect = abs(mean - float(haar))
        ok = defect <= 3 * stderr + floor
        passed &= bool(ok)
        entries.append({"word": [list(p) for p in w], "haar": str(haar),
                        "model": [mean.real, mean.imag], "stderr": stderr,
                        "defect": float(defect), "ok": bool(ok)})
    return StationarityReport("monte-carlo", entries, passed, len(squares))


# induced-representation model ------------------------------------------------

@dataclass
class ThomaReport:
    entries: list[dict]
    passed: bool
    tol: float

    def to_json(self) -> dict:
        return {"pass": self.passed, "tol": self.tol,
                "max_defect": max((e["defect"] for e in self.entries), default=0.0),
                "entries": self.entries}


def thoma_stationarity_check(f: InducedVirtuallyAbelian, elements: Optional[Sequence[Permutation]] = None,
                             tol: float = 1e-12) -> ThomaReport:
    """Average over the dual of the subgroup of the normalized induced
    character, against the Haar state delta_{gamma, e} of the group dual."""
    if not f.subgroup.is_abelian():
        raise ValueError("subgroup is not abelian")
    elements = sorted(f.group.elements) if elements is None else list(elements)
    entries = []
    n_chars = len(f.characters)
    for g in elements:
        total = sum(np.trace(induced_rep(f, c, g)) for c in range(n_chars))
        value = complex(total / (f.index * n_chars))
        target = 1.0 if g.is_identity() else 0.0
        defect = abs(value - target)
        entries.append({"element": g.to_json(), "value": [value.real, value.imag],
                        "target": target, "defect": float(defect)})
    passed = all(e["defect"] < tol for e in entries)
    return ThomaReport(entries, passed, tol)


# commuting-generator obstruction --------------------------------------------

@dataclass
class ObstructionReport:
    K: int
    samples: int
    max_commutator_norm: float
    commutator_verdicts: list[SurvivalVerdict]
    generator_verdicts: list[SurvivalVerdict]
    tol: float
    norm_tol: float = 1e-10

    @property
    def passed(self) -> bool:
        return (self.max_commutator_norm < self.norm_tol
                and all(not v.survives for v in self.commutator_verdicts)
                and all(v.survives for v in self.generator_verdicts))

    def to_json(self) -> dict:
        return {"pass": self.passed, "K": self.K, "samples": self.samples,
                "max_commutator_norm": self.max_commutator_norm, "tol": self.tol,
                "norm_tol": self.norm_tol,
                "commutators": [v.to_json() for v in self.commutator_verdicts],
                "generators": [v.to_json() for v in self.generator_verdicts]}


def commutation_obstruction_check(K: int, n: int = SURVIVAL_SAMPLES, seed: int = DEFAULT_SEED,
                                  tol: float = STATISTICAL_TOL,
                                  norm_tol: float = 1e-10) -> ObstructionReport:
    """Quasi-flat models of (Z_K * Z_K) x Z_K force the two free generators to
    commute.  Measures the commutator at sampled points and runs the survival
    test on the commutator words and on the single generators."""
    if K < 2:
        raise ValueError("need K >= 2")
    f = FreeTimesCentral(K)
    rng = _rng(seed)
    points = [f.sample(rng) for _ in range(n)]
    worst = 0.0
    for p in points:
        a, b = eval_generator(f, p, 1), eval_generator(f, p, 2)
        worst = max(worst, float(np.linalg.norm(a @ b - b @ a, 2)))
    commutators = [canonical_word(f, [(i, 1), (j, 1), (i, -1), (j, -1)])
                   for i, j in ((1, 2), (1, 3), (2, 3))]
    singles = [canonical_word(f, [(i, 1)]) for i in (1, 2, 3)]
    cv = [word_survival_test(f, w, tol=tol, points=points) for w in commutators]
    gv = [word_survival_test(f, w, tol=tol, points=points) for w in singles]
    return ObstructionReport(K, n, worst, cv, gv, tol, norm_tol)
