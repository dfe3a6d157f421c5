import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from seqpat.core import (
    EventAlphabet,
    LabeledDataset,
    Pattern,
    compute_stats,
    contains,
    flatten_sequences,
    load_alphabet,
    load_dataset,
    save_dataset,
    split_by_label,
)

sequences = st.lists(st.integers(1, 5), min_size=1, max_size=10).map(tuple)
patterns = st.lists(st.integers(1, 5), min_size=0, max_size=4).map(tuple)


def contains_oracle(pat, seq, max_gap=None):
    # exhaustive embedding search
    def rec(k, start):
        if k == len(pat):
            return True
        for t in range(start, len(seq)):
            if seq[t] != pat[k]:
                continue
            if max_gap is not None and k > 0 and t - prev[k - 1] > max_gap + 1:
                continue
            prev[k] = t
            if rec(k + 1, t + 1):
                return True
        return False

    if not pat:
        return True
    prev = [0] * len(pat)
    for t0 in range(len(seq)):
        if seq[t0] == pat[0]:
            prev[0] = t0
            if rec(1, t0 + 1):
                return True
    return False


class TestContains:
    def test_basic(self):
        assert contains((1, 3), (1, 2, 3))
        assert not contains((3, 1), (1, 2, 3))
        assert contains((), (1, 2))
        assert contains((2,), (2,))
        assert not contains((2, 2), (2,))

    def test_accepts_pattern_objects(self):
        assert contains(Pattern((1, 2)), (1, 5, 2))

    def test_max_gap_zero_means_contiguous(self):
        assert contains((1, 2), (1, 2, 3), max_gap=0)
        assert not contains((1, 3), (1, 2, 3), max_gap=0)
        assert contains((1, 3), (1, 2, 3), max_gap=1)

    def test_max_gap_needs_full_embedding(self):
        # the greedy leftmost match fails here; a later start succeeds
        assert contains((1, 2), (1, 9, 9, 1, 2), max_gap=0)

    @given(patterns, sequences, st.one_of(st.none(), st.integers(0, 3)))
    @settings(max_examples=300, deadline=None)
    def test_matches_exhaustive_oracle(self, pat, seq, gap):
        assert contains(pat, seq, max_gap=gap) == contains_oracle(pat, seq, gap)


class TestDataset:
    def test_rejects_empty_sequence(self):
        with pytest.raises(ValueError):
            LabeledDataset(((),))

    def test_rejects_bad_labels(self):
        with pytest.raises(ValueError):
            LabeledDataset(((1,),), (0,))
        with pytest.raises(ValueError):
            LabeledDataset(((1,), (2,)), (1,))

    def test_counts(self):
        ds = LabeledDataset(((1,), (2,), (3,)), (1, -1, 1))
        assert ds.n_pos == 2 and ds.n_neg == 1
        assert LabeledDataset(((1,),)).n_pos is None

    def test_split_by_label(self):
        ds = LabeledDataset(((1,), (2,), (3,)), (1, -1, 1))
        pos, neg = split_by_label(ds)
        assert pos.sequences == ((1,), (3,))
        assert neg.sequences == ((2,),)

    def test_roundtrip_labeled(self, tmp_path):
        ds = LabeledDataset(((1, 2), (3,)), (1, -1))
        p = tmp_path / "d.tsv"
        save_dataset(ds, p)
        back = load_dataset(p)
        assert back == ds

    def test_roundtrip_unlabeled(self, tmp_path):
        ds = LabeledDataset(((1, 2), (3,)))
        p = tmp_path / "d.tsv"
        save_dataset(ds, p)
        assert load_dataset(p) == ds

    def test_load_rejects_mixed_labels(self, tmp_path):
        p = tmp_path / "d.tsv"
        p.write_text("1 2 3\n4 5\n-1 6\n")
        with pytest.raises(ValueError, match="mixed"):
            load_dataset(p)

    def test_load_rejects_garbage(self, tmp_path):
        p = tmp_path / "d.tsv"
        p.write_text("1 2 x\n")
        with pytest.raises(ValueError, match="malformed"):
            load_dataset(p)

    def test_unknown_format(self, tmp_path):
        with pytest.raises(ValueError, match="format"):
            load_dataset(tmp_path / "d.tsv", format="csv")


class TestAlphabet:
    def test_duplicate_ids_rejected(self):
        with pytest.raises(ValueError):
            EventAlphabet(((1, "a", "team"), (1, "b", "team")))

    def test_name_lookup(self):
        a = EventAlphabet(((1, "a", "team"), (2, "b", "opposition")))
        assert a.name_of(2) == "b"
        with pytest.raises(KeyError):
            a.name_of(9)

    def test_sha_insensitive_to_entry_order(self):
        a = EventAlphabet(((1, "a", "team"), (2, "b", "team")))
        b = EventAlphabet(((2, "b", "team"), (1, "a", "team")))
        assert a.sha256() == b.sha256()

    def test_load(self, tmp_path):
        p = tmp_path / "a.csv"
        p.write_text("id,name,side\n1,phase,team\n2,ruck,opposition\n")
        a = load_alphabet(p)
        assert a.name_of(1) == "phase"
        assert a.ids == frozenset({1, 2})

    def test_validate_dataset(self):
        a = EventAlphabet(((1, "a", "team"),))
        with pytest.raises(ValueError, match="missing"):
            LabeledDataset(((1, 2),)).validate_alphabet(a)


class TestStats:
    def test_known_values(self):
        ds = LabeledDataset(((1,) * 2, (1,) * 4, (1,) * 6), (1, -1, 1))
        st_ = compute_stats(ds)
        assert st_.mean == 4.0
        assert st_.min == 2 and st_.max == 6
        assert st_.median == 4.0
        assert st_.n == 3 and st_.n_pos == 2

    def test_single_sequence_skewness_zero(self):
        st_ = compute_stats(LabeledDataset(((1, 2, 3),)))
        assert st_.skewness == 0.0
        assert st_.std == 0.0

    def test_skewness_matches_scipy(self):
        scipy_stats = pytest.importorskip("scipy.stats")
        rng = np.random.default_rng(0)
        lengths = rng.integers(1, 30, size=50)
        ds = LabeledDataset(tuple((1,) * int(k) for k in lengths))
        expected = scipy_stats.skew(lengths.astype(float), bias=False)
        assert math.isclose(compute_stats(ds).skewness, float(expected), rel_tol=1e-12)

    def test_empty_dataset_errors(self):
        with pytest.raises(ValueError):
            compute_stats(LabeledDataset(()))


def test_flatten_sequences_layout():
    tokens, indptr = flatten_sequences(((1, 2), (3,), (4, 5, 6)))
    assert indptr.tolist() == [0, 2, 3, 6]
    assert tokens.tolist() == [1, 2, 3, 4, 5, 6]
