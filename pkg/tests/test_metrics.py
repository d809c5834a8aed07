import numpy as np
import pytest
from numpy.testing import assert_allclose

from msfc.exceptions import UndefinedMetricError
from msfc.metrics import EvaluationFrame, ds, ds_hits, mase, smape, smape_terms

import oracles


def frame(actual, predicted, prev=None, estimation=(1.0, 2.0, 3.0)):
    actual = np.asarray(actual, float)
    prev = actual if prev is None else prev
    return EvaluationFrame(actual, predicted, prev, estimation)


def random_frame(rng, m=30):
    actual = rng.uniform(20, 140, m)
    return EvaluationFrame(
        actual,
        actual + rng.normal(0, 5, m),
        actual + rng.normal(0, 3, m),
        rng.uniform(20, 140, 50),
    )


def test_smape_hand_examples():
    assert smape(frame([100.0], [100.0])) == 0.0
    assert_allclose(smape(frame([100.0], [110.0])), 10 / 210 * 100, rtol=1e-15)
    assert_allclose(smape(frame([50.0, 100.0], [60.0, 90.0])), (10 / 110 + 10 / 190) / 2 * 100, rtol=1e-15)
    assert round(smape(frame([50.0, 100.0], [60.0, 90.0])), 3) == 7.177


def test_smape_conventional_flag():
    f = frame([100.0], [110.0])
    assert_allclose(smape(f, conventional=True), 2 * smape(f))
    with pytest.raises(UndefinedMetricError):
        smape_terms([1.0], [-1.0])


def test_mase_hand_examples():
    assert mase(frame([5.0], [5.0])) == 0.0
    assert mase(frame([5.0], [4.0], estimation=[1.0, 2.0, 3.0])) == 1.0
    with pytest.raises(UndefinedMetricError):
        mase(frame([5.0], [4.0], estimation=[2.0, 2.0]))


def test_mase_scale_free():
    f = random_frame(np.random.default_rng(1))
    g = EvaluationFrame(f.actual * 10, f.predicted * 10, f.prev_actual * 10, f.estimation * 10)
    assert_allclose(mase(g), mase(f), rtol=1e-13)


def test_ds_examples():
    a = np.array([1.0, 2.0, 3.0, 4.0])
    assert ds(frame(a, a, prev=a - 1)) == 1.0
    assert ds(frame(a, a - 2, prev=a - 1)) == 0.0
    # zero realised change counts as a hit
    assert ds_hits([10.0], [9.0], [10.0])[0] == 1.0


def test_metrics_match_oracles():
    rng = np.random.default_rng(7)
    for _ in range(100):
        f = random_frame(rng, m=int(rng.integers(1, 60)))
        assert abs(smape(f) - oracles.smape(f.actual, f.predicted)) <= 1e-12
        assert abs(mase(f) - oracles.mase(f.actual, f.predicted, f.estimation)) <= 1e-12
        assert abs(ds(f) - oracles.ds(f.actual, f.predicted, f.prev_actual)) <= 1e-12


def test_metrics_permutation_equivariant():
    rng = np.random.default_rng(3)
    f = random_frame(rng)
    p = rng.permutation(len(f))
    g = EvaluationFrame(f.actual[p], f.predicted[p], f.prev_actual[p], f.estimation)
    assert_allclose([smape(g), mase(g), ds(g)], [smape(f), mase(f), ds(f)], rtol=1e-13)
    assert smape(f) >= 0 and mase(f) >= 0 and 0 <= ds(f) <= 1


def test_frame_validation():
    with pytest.raises(ValueError):
        EvaluationFrame([1.0, 2.0], [1.0], [1.0, 2.0], [1.0, 2.0])
    with pytest.raises(ValueError):
        EvaluationFrame([np.inf], [1.0], [1.0], [1.0, 2.0])
