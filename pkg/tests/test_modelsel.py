import numpy as np
import pytest

from seqpat.core import LabeledDataset
from seqpat.modelsel import CvConfig, CvTable, confusion, evaluate, make_folds, write_cv_table
from seqpat.solver import ModelSolution


def model_with(weights, bias):
    return ModelSolution(
        weights=weights,
        bias=bias,
        lam=1.0,
        duality_gap=0.0,
        primal_objective=0.0,
        iterations=0,
    )


class TestMakeFolds:
    def test_partition_and_stratification(self):
        rng = np.random.default_rng(0)
        y = np.array([1] * 23 + [-1] * 41)
        y = y[rng.permutation(y.size)]
        cfg = CvConfig(folds=5, repeats=1, seed=7)
        folds = make_folds(y, cfg, repeat=0)
        assert len(folds) == 5
        all_val = np.concatenate([v for _, v in folds])
        assert sorted(all_val.tolist()) == list(range(y.size))  # exact partition
        for train, val in folds:
            assert np.intersect1d(train, val).size == 0
            assert train.size + val.size == y.size
            # round-robin dealing keeps per-fold class counts within one
            npos = int((y[val] == 1).sum())
            nneg = int((y[val] == -1).sum())
            assert npos in (23 // 5, 23 // 5 + 1)
            assert nneg in (41 // 5, 41 // 5 + 1)

    def test_deterministic_in_seed_and_repeat(self):
        y = np.array([1, -1] * 20)
        cfg = CvConfig(folds=4, repeats=3, seed=11)
        a = make_folds(y, cfg, repeat=1)
        b = make_folds(y, cfg, repeat=1)
        for (ta, va), (tb, vb) in zip(a, b):
            assert np.array_equal(ta, tb) and np.array_equal(va, vb)
        c = make_folds(y, cfg, repeat=2)
        assert any(not np.array_equal(va, vc) for (_, va), (_, vc) in zip(a, c))
        d = make_folds(y, CvConfig(folds=4, repeats=3, seed=12), repeat=1)
        assert any(not np.array_equal(va, vd) for (_, va), (_, vd) in zip(a, d))

    def test_small_class_errors(self):
        with pytest.raises(ValueError, match="fewer than"):
            make_folds(np.array([1, -1, -1, -1, -1]), CvConfig(folds=2), 0)
        # a 2-member minority class supports 2 folds exactly
        folds = make_folds(np.array([1, 1, -1, -1, -1, -1]), CvConfig(folds=2), 0)
        assert all((np.asarray([1, 1, -1, -1, -1, -1])[v] == 1).sum() == 1 for _, v in folds)
        with pytest.raises(ValueError, match="both classes"):
            make_folds(np.array([1, 1, 1]), CvConfig(folds=2), 0)

    def test_config_validation(self):
        with pytest.raises(ValueError):
            CvConfig(folds=1)
        with pytest.raises(ValueError):
            CvConfig(repeats=0)
        with pytest.raises(ValueError):
            CvConfig(metric="f1")


class TestEvaluate:
    def test_accuracy_and_sign_convention(self):
        ds = LabeledDataset(((1,), (2,), (3,)), (1, -1, 1))
        # bias 0 and no patterns: f = 0 everywhere, predicted +1 by convention
        m = model_with({}, 0.0)
        assert evaluate(m, ds) == pytest.approx(2 / 3)
        assert confusion(m, ds) == (2, 1, 0, 0)

    def test_confusion_sums_to_n(self):
        ds = LabeledDataset(((1, 2), (2, 3), (3, 1), (1,)), (1, 1, -1, -1))
        m = model_with({(1,): 1.0}, -0.5)
        tp, fp, tn, fn = confusion(m, ds)
        assert tp + fp + tn + fn == len(ds)
        assert evaluate(m, ds) == pytest.approx((tp + tn) / len(ds))

    def test_unlabeled_rejected(self):
        ds = LabeledDataset(((1,),))
        with pytest.raises(ValueError):
            evaluate(model_with({}, 0.0), ds)
        with pytest.raises(ValueError):
            confusion(model_with({}, 0.0), ds)


class TestWriteCvTable:
    def test_golden_roundtrip(self, tmp_path):
        table = CvTable(
            lams=(2.0, 1.0),
            mean_acc=(0.75, 0.8125),
            std_acc=(0.05, 0.025),
            mean_nnz=(1.5, 3.0),
            confusion=((1.0, 0.0, 2.0, 1.0), (1.5, 0.5, 1.5, 0.5)),
        )
        path = tmp_path / "cv.csv"
        write_cv_table(table, path)
        text = path.read_text()
        assert text == (
            "lambda,mean_acc,std_acc,mean_nnz\n"
            "2.0,0.75,0.05,1.5\n"
            "1.0,0.8125,0.025,3.0\n"
        )
        # repr round-trips floats exactly
        row = text.splitlines()[1].split(",")
        assert float(row[0]) == 2.0 and float(row[3]) == 1.5
