"""The acceptance criteria as plain functions, shared by the test suite and
the ``selftest`` command.

Each criterion returns a CriterionResult.  ``tol`` overrides the criterion's
numerical tolerance (exact criteria ignore it); seeds are pinned so repeated
runs give identical results.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional

import numpy as np

from .analysis import (
    DEFAULT_SEED,
    classical_cesaro_hopf_image,
    commutation_obstruction_check,
    coordinate_words,
    inner_faithfulness_scan,
    stationarity_check_classical,
    thoma_stationarity_check,
)
from .fixtures import load_group, load_square
from .latin import DistinctnessError, admissible_squares, from_permutations, to_permutations
from .magic import orbit_decomposition, quasi_transitivity, rank_pattern, validate_magic
from .models import (
    Amalgamated,
    CommutingPowers,
    FreeProduct,
    InducedVirtuallyAbelian,
    canonical_word,
    direct_trace,
    eval_generator,
    magic_matrix,
    sample_point,
    word_trace,
)
from .perm import (
    PermutationGroup,
    all_subgroups,
    check_normal_orbits,
    haar_moment_classical,
    is_normal,
)

__all__ = ["CriterionResult", "CRITERIA", "run_criterion", "run_all"]


@dataclass
class CriterionResult:
    number: int
    title: str
    passed: bool
    details: dict = field(default_factory=dict)

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] criterion {self.number}: {self.title}"

    def to_json(self) -> dict:
        return {"criterion": self.number, "title": self.title, "pass": self.passed,
                "details": self.details}


def _pick(tol: Optional[float], default: float) -> float:
    return default if tol is None else tol


def _distinct_everywhere(tup) -> bool:
    N = tup[0].degree
    return all(len({p(i) for p in tup}) == len(tup) for i in range(1, N + 1))


def criterion_1(tol=None, seed=DEFAULT_SEED) -> CriterionResult:
    round_trips, rejected, bad = 0, 0, []
    for N in range(1, 5):
        SN = sorted(PermutationGroup.symmetric(N).elements)
        for K in range(1, min(3, N) + 1):
            for tup in itertools.product(SN, repeat=K):
                if _distinct_everywhere(tup):
                    back = to_permutations(from_permutations(tup))
                    if back != [p.inverse() for p in tup]:
                        bad.append(("round-trip", N, K, [p.to_json() for p in tup]))
                    round_trips += 1
                else:
                    try:
                        from_permutations(tup)
                        bad.append(("accepted non-distinct", N, K, [p.to_json() for p in tup]))
                    except DistinctnessError:
                        rejected += 1
    pairs = 0
    for N in (3, 4):
        for G in all_subgroups(PermutationGroup.symmetric(N)):
            elems = sorted(G.elements)
            for K in range(1, 4):
                has_square = bool(admissible_squares(N, K, G))
                brute = any(_distinct_everywhere(t) for t in itertools.product(elems, repeat=K))
                pairs += 1
                if has_square != brute:
                    bad.append(("existence", N, K, [g.to_json() for g in G.generators]))
    return CriterionResult(1, "sparse Latin square dictionary and existence criterion", not bad,
                           {"round_trips": round_trips, "rejected_tuples": rejected,
                            "subgroup_pairs": pairs, "mismatches": bad[:10]})


def criterion_2(tol=None, seed=DEFAULT_SEED, samples: int = 10**5) -> CriterionResult:
    cases = [("S2", 2), ("S3", 3), ("diagS2", 2)]
    details, ok = {}, True
    for name, K in cases:
        G = load_group(name)
        words = coordinate_words(G.degree, 3)
        exact = stationarity_check_classical(G, K, words, mode="exact")
        mc = stationarity_check_classical(G, K, words, mode="monte-carlo", samples=samples,
                                          seed=seed, floor=_pick(tol, 1e-10))
        nonzero = sum(1 for e in exact.entries if not e["exact_zero"])
        worst = max(mc.entries, key=lambda e: e["defect"] - 3 * e["stderr"])
        details[name] = {"K": K, "words": len(words), "squares": exact.squares,
                         "exact_nonzero_defects": nonzero, "mc_pass": mc.passed,
                         "mc_worst": {k: worst[k] for k in ("word", "defect", "stderr")}}
        ok &= exact.passed and mc.passed
    return CriterionResult(2, "exact and Monte Carlo stationarity of classical models", ok, details)


def criterion_3(tol=None, seed=DEFAULT_SEED) -> CriterionResult:
    L = load_square("3x3_k2")
    rep = classical_cesaro_hopf_image(L, 10**4, _pick(tol, 1e-6))
    return CriterionResult(3, "Cesaro averages reach the Hopf image S_3 by k <= 10^4",
                           rep.passed, {"k_hit": rep.k_hit, "final_k": rep.final_k,
                                        "final_distance": rep.final_distance, "tol": rep.tol})


def _closed_form_agreement(f, pairs: int, max_len: int, rng) -> float:
    worst = 0.0
    for _ in range(pairs):
        p = sample_point(f, rng)
        n = int(rng.integers(1, max_len + 1))
        raw = [(int(rng.integers(1, f.num_generators + 1)), int(rng.integers(1, f.K)))
               for _ in range(n)]
        w = canonical_word(f, raw)
        worst = max(worst, abs(word_trace(f, p, w) - direct_trace(f, p, w)))
    return worst


def criterion_4(tol=None, seed=DEFAULT_SEED) -> CriterionResult:
    f = FreeProduct(3, 2)
    scan = inner_faithfulness_scan(f, 6, 100, _pick(tol, 1e-6), seed)
    agree = _closed_form_agreement(f, 200, 6, np.random.default_rng(seed))
    ok = scan.passed and agree < _pick(tol, 1e-10)
    return CriterionResult(4, "inner faithfulness of Z_3 * Z_3 and closed-form traces", ok,
                           {"words": len(scan.verdicts), "not_separated": len(scan.failures),
                            "max_trace_mismatch": agree})


def _power_residuals(f, points: int, seed: int, commutator: bool) -> float:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(points):
        p = sample_point(f, rng)
        hs = [np.linalg.matrix_power(eval_generator(f, p, i), f.R) for i in range(1, f.M + 1)]
        for a, b in itertools.combinations(hs, 2):
            d = a @ b - b @ a if commutator else a - b
            worst = max(worst, float(np.linalg.norm(d, 2)))
    return worst


def _scan_details(scan) -> dict:
    return {"words": len(scan.verdicts), "not_separated": len(scan.failures),
            "first_not_separated": [v.word.to_json() for v in scan.failures[:5]]}


def criterion_5(tol=None, seed=DEFAULT_SEED) -> CriterionResult:
    f = Amalgamated(4, 2, 2, 2)
    residual = _power_residuals(f, 100, seed, commutator=False)
    scan = inner_faithfulness_scan(f, 4, 100, 1e-6, seed)
    ok = residual < _pick(tol, 1e-12) and scan.passed
    return CriterionResult(5, "amalgamated family: shared powers and inner faithfulness", ok,
                           {"relation_residual": residual, **_scan_details(scan)})


def criterion_6(tol=None, seed=DEFAULT_SEED) -> CriterionResult:
    f = CommutingPowers(4, 2, 2, 2)
    residual = _power_residuals(f, 100, seed, commutator=True)
    scan = inner_faithfulness_scan(f, 4, 100, 1e-6, seed)
    ok = residual < _pick(tol, 1e-12) and scan.passed
    return CriterionResult(6, "commuting-powers family: commuting powers and inner faithfulness", ok,
                           {"commutator_residual": residual, **_scan_details(scan)})


def criterion_7(tol=None, seed=DEFAULT_SEED) -> CriterionResult:
    details, ok = {}, True
    for K in (2, 3):
        rep = commutation_obstruction_check(K, 100, seed, norm_tol=_pick(tol, 1e-10))
        details[f"K={K}"] = {"max_commutator_norm": rep.max_commutator_norm,
                             "commutators": [v.verdict for v in rep.commutator_verdicts],
                             "generators": [v.verdict for v in rep.generator_verdicts]}
        ok &= rep.passed
    return CriterionResult(7, "no inner faithful quasi-flat model of (Z_K * Z_K) x Z_K", ok, details)


def criterion_8(tol=None, seed=DEFAULT_SEED) -> CriterionResult:
    details, ok = {}, True
    for g, h in (("S3", "A3"), ("D4", "C4")):
        f = InducedVirtuallyAbelian(load_group(g), load_group(h))
        rep = thoma_stationarity_check(f, tol=_pick(tol, 1e-12))
        details[f"{g}/{h}"] = {"elements": len(rep.entries),
                               "max_defect": max(e["defect"] for e in rep.entries)}
        ok &= rep.passed
    return CriterionResult(8, "induced-representation model is stationary", ok, details)


def criterion_9(tol=None, seed=DEFAULT_SEED) -> CriterionResult:
    f = FreeProduct(2, 2)
    rng = np.random.default_rng(seed)
    samples = [magic_matrix(f, sample_point(f, rng)) for _ in range(10)]
    d = orbit_decomposition(samples, threshold=1e-8)
    expected = np.kron(np.eye(2, dtype=int), np.ones((2, 2), dtype=int))
    vtol = _pick(tol, 1e-10)
    ranks_ok = all(np.array_equal(rank_pattern(M, vtol), d.epsilon) for M in samples)
    magic_ok = all(validate_magic(M, vtol).passed for M in samples)
    normal_pairs, normal_bad = 0, []
    subgroups = [G for N in (1, 2, 3, 4) for G in all_subgroups(PermutationGroup.symmetric(N))]
    for G in subgroups:
        if not G.is_transitive():
            continue
        for H in subgroups:
            if H.degree == G.degree and H.issubgroup(G) and is_normal(H, G):
                normal_pairs += 1
                if not check_normal_orbits(G, H):
                    normal_bad.append([g.to_json() for g in H.generators])
    ok = (d.blocks == ((1, 2), (3, 4)) and np.array_equal(d.epsilon, expected)
          and quasi_transitivity(d) == 2 and ranks_ok and magic_ok and not normal_bad)
    return CriterionResult(9, "rank pattern, orbits and normal-subgroup orbits", ok,
                           {"blocks": [list(b) for b in d.blocks],
                            "quasi_transitivity": quasi_transitivity(d),
                            "rank_pattern_matches": ranks_ok, "magic_valid": magic_ok,
                            "normal_pairs": normal_pairs, "normal_failures": normal_bad})


def _enumeration_oracle(G: PermutationGroup, word) -> Fraction:
    # permutation matrices P[g(j), j] = 1, multiplied entrywise over the word
    N = G.degree
    total = 0
    for g in G.elements:
        P = np.zeros((N, N), dtype=np.int64)
        P[np.array(g.images) - 1, np.arange(N)] = 1
        total += int(np.prod([P[i - 1, j - 1] for i, j in word]))
    return Fraction(total, G.order)


def criterion_10(tol=None, seed=DEFAULT_SEED) -> CriterionResult:
    rng = np.random.default_rng(seed)
    checked, bad = 0, []
    for name in ("S2", "S3", "A3", "S4", "D4", "C4", "V4", "diagS2"):
        G = load_group(name)
        N = G.degree
        for _ in range(100):
            t = int(rng.integers(1, 5))
            word = [(int(rng.integers(1, N + 1)), int(rng.integers(1, N + 1))) for _ in range(t)]
            if haar_moment_classical(G, word) != _enumeration_oracle(G, word):
                bad.append((name, word))
            checked += 1
    return CriterionResult(10, "classical Haar moments match full-group enumeration", not bad,
                           {"checked": checked, "mismatches": bad[:10]})


CRITERIA: dict[int, Callable[..., CriterionResult]] = {
    1: criterion_1, 2: criterion_2, 3: criterion_3, 4: criterion_4, 5: criterion_5,
    6: criterion_6, 7: criterion_7, 8: criterion_8, 9: criterion_9, 10: criterion_10,
}


def run_criterion(number: int, tol: Optional[float] = None, seed: int = DEFAULT_SEED) -> CriterionResult:
    return CRITERIA[number](tol=tol, seed=seed)


def run_all(tol: Optional[float] = None, seed: int = DEFAULT_SEED) -> list[CriterionResult]:
    return [run_criterion(n, tol, seed) for n in sorted(CRITERIA)]
