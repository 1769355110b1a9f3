"""Critique similarity: precision / recall / F1 over matched arguments.

Matching is exact on (content_key, target, polarity). Two reference modes:

* ``core``: if the reference flags a fatal error, only that error counts and
  ``n_ref`` is 1; otherwise every unique reference argument counts.
* ``all``: every unique reference argument counts.

Generated critiques that repeat an argument score zero across the board.
"""

from __future__ import annotations

from dataclasses import dataclass

from .data import ArgumentSet

MODES = ("core", "all")


@dataclass(frozen=True)
class SimilarityScores:
    f1: float
    precision: float
    recall: float
    tp: int = 0
    n_ref: int = 0
    n_gen: int = 0
    repeated: bool = False

    @classmethod
    def from_counts(cls, tp: int, n_ref: int, n_gen: int) -> "SimilarityScores":
        precision = tp / n_gen if n_gen > 0 else 0.0
        recall = tp / n_ref if n_ref > 0 else 0.0
        denom = precision + recall
        f1 = 2 * precision * recall / denom if denom > 0 else 0.0
        return cls(f1, precision, recall, tp, n_ref, n_gen, False)

    @classmethod
    def uniform(cls, value: float) -> "SimilarityScores":
        return cls(value, value, value)

    def rounded(self) -> dict:
        """Wire representation: scores at 4 decimal places."""
        return {
            "f1": round(self.f1, 4),
            "precision": round(self.precision, 4),
            "recall": round(self.recall, 4),
            "tp": self.tp,
            "n_ref": self.n_ref,
            "n_gen": self.n_gen,
            "repeated": self.repeated,
        }


ZERO_REPEATED = SimilarityScores(0.0, 0.0, 0.0, 0, 0, 0, True)


def _check_mode(mode):
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")


def repeated_argument_check(gen: ArgumentSet) -> bool:
    return any(c >= 2 for c in gen.key_counts().values())


def _reference_keys(ref: ArgumentSet, mode: str):
    if mode == "core":
        fatal = ref.fatal_keys()
        if fatal:
            return fatal, True
    return ref.unique_keys(), False


def count_reference_arguments(ref: ArgumentSet, mode: str = "core") -> int:
    _check_mode(mode)
    keys, fatal_only = _reference_keys(ref, mode)
    return 1 if fatal_only else len(keys)


def count_true_positives(ref: ArgumentSet, gen: ArgumentSet, mode: str = "core") -> int:
    """Greedy one-to-one matching of unique reference tuples to unique generated tuples.

    Each reference argument takes the first unused generated argument that
    matches it. In fatal mode at most one match counts.
    """
    _check_mode(mode)
    keys, fatal_only = _reference_keys(ref, mode)
    available = gen.unique_keys()
    used = [False] * len(available)
    tp = 0
    for r in keys:
        for j, g in enumerate(available):
            if not used[j] and g == r:
                used[j] = True
                tp += 1
                break
    return min(tp, 1) if fatal_only else tp


def compute_similarity(ref: ArgumentSet, gen: ArgumentSet, mode: str = "core") -> SimilarityScores:
    _check_mode(mode)
    if repeated_argument_check(gen):
        return ZERO_REPEATED
    return SimilarityScores.from_counts(
        tp=count_true_positives(ref, gen, mode),
        n_ref=count_reference_arguments(ref, mode),
        n_gen=len(gen.unique_keys()),
    )


def meta_judge_score(sample, gen_text: str, judge) -> SimilarityScores:
    """Ask an external judge to grade a critique directly.

    ``judge`` is anything with ``call(template_id, bindings)`` returning a
    response whose ``parsed`` attribute holds ``SimilarityScores``. The judge
    is told to give all three metrics one value; the f1 value is replicated.
    Transport and parse errors propagate.
    """
    response = judge.call("meta_judge", {
        "conv_his": sample.query,
        "response_A": sample.response_a,
        "response_B": sample.response_b,
        "critiques": gen_text,
    })
    scores = response.parsed
    if not isinstance(scores, SimilarityScores):
        raise TypeError("meta judge response did not parse into scores")
    return SimilarityScores.uniform(scores.f1)
