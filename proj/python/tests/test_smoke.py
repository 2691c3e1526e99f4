import itertools
import math

import numpy as np
import pytest

import argmine

POSTS = [
    {"post_id": "p1", "author_id": "alice", "body": "I think that most people would not see it that way."},
    {"post_id": "p2", "author_id": "bob", "parent_id": "p1",
     "body": "Nobody is forced to convert. So the rule only applies if you join."},
]


def test_tokenize_keeps_bytes():
    text = "Hello,  world! see https://x.org"
    toks = argmine.tokenize(text)
    assert "".join(t for t, _, _ in toks) == text
    assert all(text[s:e] == t for t, s, e in toks)


def test_serialize_and_mask():
    st = argmine.serialize(POSTS)
    assert st["tokens"][0] == "[USER-0]"
    assert st["global_attention"][0]
    masked = argmine.mask(POSTS)
    assert [masked["targets"][k] for k in sorted(masked["targets"])] == ["I", " think", " So", " if"]
    restored = list(masked["input_tokens"])
    for pos, tok in masked["targets"].items():
        restored[pos] = tok
    assert restored == masked["tokens"]


def test_find_markers():
    found = argmine.find_markers(["I", " think", " so", "."])
    assert found[0]["start"] == 0 and found[0]["end"] == 2


def test_crf_matches_enumeration():
    rng = np.random.default_rng(0)
    n, length = 3, 4
    e = rng.normal(size=(length, n))
    trans = rng.normal(size=(n, n))
    start, end = rng.normal(size=n), rng.normal(size=n)

    def score(path):
        s = start[path[0]] + end[path[-1]] + sum(e[i, y] for i, y in enumerate(path))
        return s + sum(trans[a, b] for a, b in zip(path, path[1:]))

    paths = list(itertools.product(range(n), repeat=length))
    scores = [score(p) for p in paths]
    assert argmine.log_partition(e, trans, start, end) == pytest.approx(
        math.log(sum(math.exp(s) for s in scores)), abs=1e-9)
    assert tuple(argmine.viterbi(e, trans, start, end)) == paths[int(np.argmax(scores))]


def test_span_scores_and_grouping():
    r = argmine.span_scores([0, 1, 2, 0, 3], [0, 2, 2, 0, 0])
    assert r["classes"]["claim"] == (1, 0, 0)
    assert r["classes"]["premise"] == (0, 0, 1)
    assert argmine.group_relation("rebuttal") == "direct attack"
    assert argmine.group_relation("parts-of-same", "drinventor") == "semantically same"
    with pytest.raises(argmine.ArgmineError):
        argmine.group_relation("sarcasm")


def test_build_prompt():
    st = argmine.serialize(POSTS)
    n = len(st["tokens"])
    p = argmine.build_prompt(POSTS, (n - 3, n - 1), (1, 3), mask_count=2)
    assert [p["tokens"][i] for i in p["mask_positions"]] == ["[MASK]", "[MASK]"]
    assert p["tokens"][n:n + 4] == ["[USER-0]", " said"] + st["tokens"][1:3]


def test_run_cli_usage_error():
    code, _, err = argmine.run_cli(["train-aci"])
    assert code == 2
    code, out, _ = argmine.run_cli(["--help"])
    assert code == 0 and "prepare-data" in out
