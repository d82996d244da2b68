import numpy as np
import pytest

from adkit.cider import cider_d

from oracles import oracle_cider_d
from synth import random_sentence

DISTINCT_CORPUS = [
    "a man pours red wine into a glass",
    "two children run across the wet garden",
    "the detective studies a faded photograph",
    "waves crash against the rocky northern shore",
    "she closes the heavy wooden door quietly",
]


def test_identical_pair_scores_ten():
    candidates = list(DISTINCT_CORPUS)
    references = [[c] for c in DISTINCT_CORPUS]
    result = cider_d(candidates, references)
    for score in result.item_scores:
        assert score == pytest.approx(10.0, abs=1e-6)
    assert result.corpus_score == pytest.approx(10.0, abs=1e-6)


def test_disjoint_tokens_score_zero():
    candidates = ["xylophone quartz bumblebee vivid"] + DISTINCT_CORPUS[1:]
    references = [[c] for c in DISTINCT_CORPUS]
    result = cider_d(candidates, references)
    assert result.item_scores[0] == 0.0


def test_matches_independent_oracle_on_small_fixture():
    candidates = [
        "a man pours wine into the glass",
        "children run across a garden",
        "the detective studies the photograph carefully",
        "waves crash on the shore",
        "she closes the door",
    ]
    references = [[r] for r in DISTINCT_CORPUS]
    result = cider_d(candidates, references)
    expected = oracle_cider_d(candidates, references)
    np.testing.assert_allclose(result.item_scores, expected, atol=1e-6)


def test_matches_oracle_on_random_corpus():
    rng = np.random.default_rng(0)
    candidates = [random_sentence(rng, int(rng.integers(4, 10))) for _ in range(12)]
    references = [
        [random_sentence(rng, int(rng.integers(4, 10))) for _ in range(int(rng.integers(1, 3)))]
        for _ in range(12)
    ]
    # plant partial overlaps so scores are non-trivial
    for i in range(0, 12, 3):
        words = references[i][0].split()
        words[: len(words) // 2] = candidates[i].split()[: len(words) // 2]
        references[i][0] = " ".join(words)
    result = cider_d(candidates, references)
    expected = oracle_cider_d(candidates, references)
    np.testing.assert_allclose(result.item_scores, expected, atol=1e-6)
    assert result.corpus_score == pytest.approx(float(np.mean(expected)), abs=1e-6)


def test_corpus_reorder_invariance():
    candidates = ["a man pours wine into a glass tonight"] + DISTINCT_CORPUS[1:]
    references = [[r] for r in DISTINCT_CORPUS]
    base = cider_d(candidates, references)
    order = [3, 0, 4, 1, 2]
    shuffled = cider_d([candidates[i] for i in order], [references[i] for i in order])
    for new_pos, old_pos in enumerate(order):
        assert shuffled.item_scores[new_pos] == pytest.approx(
            base.item_scores[old_pos], abs=1e-12
        )
    assert shuffled.corpus_score == pytest.approx(base.corpus_score, abs=1e-12)


def test_length_penalty_reduces_score():
    long_tail = "and then something entirely different happens on the horizon"
    candidates = [DISTINCT_CORPUS[0], DISTINCT_CORPUS[0] + " " + long_tail]
    references = [[DISTINCT_CORPUS[0]], [DISTINCT_CORPUS[0]]]
    result = cider_d(candidates + DISTINCT_CORPUS[1:], references + [[r] for r in DISTINCT_CORPUS[1:]])
    assert result.item_scores[1] < result.item_scores[0]


def test_input_validation():
    with pytest.raises(ValueError):
        cider_d([], [])
    with pytest.raises(ValueError):
        cider_d(["a"], [["a"], ["b"]])
    with pytest.raises(ValueError):
        cider_d(["a"], [[]])
