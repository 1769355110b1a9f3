import itertools

import pytest
from hypothesis import given, settings, strategies as st

from critique_rl.data import Argument, ArgumentSet
from critique_rl.similarity import (
    SimilarityScores, compute_similarity, count_reference_arguments, count_true_positives,
    repeated_argument_check,
)


def arg(k, t="A", p="positive", fatal=False):
    return Argument(k, t, p, fatal)


def S(*args):
    return ArgumentSet(tuple(args))


def brute_force_max_matching(ref_keys, gen_keys):
    """Largest one-to-one matching by trying every injection of reference into generated slots."""
    best = 0
    slots = list(range(len(gen_keys))) + [None] * len(ref_keys)
    for assignment in itertools.permutations(slots, len(ref_keys)):
        used = [j for j in assignment if j is not None]
        if len(used) != len(set(used)):
            continue
        tp = sum(1 for r, j in zip(ref_keys, assignment) if j is not None and gen_keys[j] == r)
        best = max(best, tp)
    return best


def test_fatal_reference_counts_as_one():
    ref = S(arg("k0", "A", "negative", True), arg("k1"), arg("k2", "B"))
    assert count_reference_arguments(ref, "core") == 1
    assert count_reference_arguments(ref, "all") == 3
    hit = compute_similarity(ref, S(arg("k0", "A", "negative")), "core")
    assert (hit.tp, hit.n_ref, hit.n_gen, hit.f1) == (1, 1, 1, 1.0)
    miss = compute_similarity(ref, S(arg("k1"), arg("k2", "B")), "core")
    assert miss.f1 == 0.0 and miss.tp == 0


def test_stance_must_match():
    ref = S(arg("k0", "A", "positive"))
    assert compute_similarity(ref, S(arg("k0", "B", "positive"))).tp == 0
    assert compute_similarity(ref, S(arg("k0", "A", "negative"))).tp == 0


def test_repeated_argument_zeroes_everything():
    ref = S(arg("k0"))
    out = compute_similarity(ref, S(arg("k0"), arg("k0")))
    assert out.repeated and (out.f1, out.precision, out.recall) == (0.0, 0.0, 0.0)
    assert repeated_argument_check(S(arg("k0"), arg("k0", "B"))) is False


def test_worked_example():
    # 3 reference args, 4 generated, 2 shared: P = 0.5, R = 2/3, F1 = 4/7
    ref = S(arg("k0"), arg("k1", "B"), arg("k2"))
    gen = S(arg("k0"), arg("k1", "B"), arg("k3"), arg("k4", "B"))
    out = compute_similarity(ref, gen, "all")
    assert out.precision == 0.5
    assert out.recall == pytest.approx(2 / 3, abs=0)
    assert out.f1 == pytest.approx(4 / 7, rel=1e-15)


def test_empty_sides():
    assert compute_similarity(S(), S()).f1 == 0.0
    assert compute_similarity(S(arg("k0")), S()).f1 == 0.0
    assert compute_similarity(S(), S(arg("k0"))).precision == 0.0


def test_rounded_wire_form():
    s = SimilarityScores.from_counts(1, 3, 1)
    assert s.rounded()["recall"] == 0.3333 and s.rounded()["f1"] == 0.5


def test_mode_validation():
    with pytest.raises(ValueError):
        compute_similarity(S(), S(), "some")


_args = st.builds(arg, st.sampled_from(["k0", "k1", "k2"]), st.sampled_from("AB"),
                  st.sampled_from(["positive", "negative"]), st.booleans())


@settings(max_examples=300, deadline=None)
@given(ref=st.lists(_args, max_size=5), gen=st.lists(_args, max_size=5), mode=st.sampled_from(["core", "all"]))
def test_greedy_equals_brute_force_and_formulas(ref, gen, mode):
    ref, gen = S(*ref), S(*gen)
    out = compute_similarity(ref, gen, mode)
    if repeated_argument_check(gen):
        assert out.f1 == out.precision == out.recall == 0.0
        return
    fatal = ref.fatal_keys() if mode == "core" else []
    ref_keys = fatal if fatal else ref.unique_keys()
    expected_tp = brute_force_max_matching(ref_keys, gen.unique_keys())
    if fatal:
        expected_tp = min(expected_tp, 1)
    assert count_true_positives(ref, gen, mode) == expected_tp
    n_ref = 1 if fatal else len(ref_keys)
    n_gen = len(gen.unique_keys())
    p = expected_tp / n_gen if n_gen else 0.0
    r = expected_tp / n_ref if n_ref else 0.0
    f1 = 2 * p * r / (p + r) if p + r else 0.0
    assert (out.precision, out.recall, out.f1) == (p, r, f1)
    assert 0.0 <= out.f1 <= 1.0
