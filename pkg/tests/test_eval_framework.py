import math

import numpy as np
import pytest

from qppm.dataclasses.results import Measure, TauResult
from qppm.eval_framework import (
    ALL_DEGENERATE,
    average_taus,
    cross_measure_correlation,
    discriminativeness,
    evaluate_all,
    evaluate_predictor,
    f1_combination,
    mrmq_global,
    mrsq_mean,
    mrsq_per_query,
    mrsq_taus,
    srmq_mean,
    srmq_per_ranker,
    srmq_taus,
    unit_summary,
)
from qppm.exceptions import UndefinedCorrelation, ValidationError
from qppm.rank_correlation import TauVariant
from tests.fixtures import designed_matrices, effectiveness, prediction


def test_srmq_per_ranker() -> None:
    mu = effectiveness([[0.2, 0.1], [0.5, 0.3], [0.3, 0.2]])
    assert srmq_per_ranker(mu, prediction(mu.values, "ident"), "r0").value == 1.0
    assert srmq_per_ranker(mu, prediction(-mu.values, "neg"), "r0").value == -1.0
    assert srmq_per_ranker(mu, prediction([[1, 0], [9, 0], [4, 0]], "p"), "r0").value == 1.0
    assert srmq_per_ranker(mu, prediction([[1, 0], [9, 0], [4, 0]], "p"), "r1").reason == "y degenerate"
    with pytest.raises(UndefinedCorrelation) as e:
        single = effectiveness([[0.2, 0.1]])
        srmq_per_ranker(single, prediction([[1, 2]], "p"), "r0")
    assert e.value.reason == "singleton"


def test_mrsq_per_query() -> None:
    mu = effectiveness([[0.2, 0.5, 0.3], [0.0, 0.0, 0.0]])
    assert mrsq_per_query(mu, prediction(mu.values, "ident"), "q0").value == 1.0
    assert mrsq_per_query(mu, prediction([[0.9, 0.1, 0.4], [1, 2, 3]], "p"), "q0").value == -1.0
    assert mrsq_per_query(mu, prediction([[0.9, 0.1, 0.4], [1, 2, 3]], "p"), "q1").reason == "x degenerate"
    with pytest.raises(UndefinedCorrelation):
        mrsq_per_query(effectiveness([[0.2], [0.4]]), prediction([[1], [2]], "p"), "q0")


def test_average_taus() -> None:
    mean, exclusions = average_taus({"r0": TauResult(0.2), "r1": TauResult(0.4)}, Measure.SRMQ)
    assert mean.value == pytest.approx(0.3)
    assert exclusions == []

    mean, exclusions = average_taus({"r0": TauResult(0.5), "r1": TauResult.undefined("x degenerate")}, Measure.SRMQ)
    assert mean.value == 0.5
    assert [(e.measure, e.unit, e.reason) for e in exclusions] == [(Measure.SRMQ, "r1", "x degenerate")]

    mean, exclusions = average_taus({"q0": TauResult.undefined("x degenerate")}, Measure.MRSQ)
    assert mean.reason == ALL_DEGENERATE
    assert len(exclusions) == 1


def test_means() -> None:
    mu = effectiveness([[0.1, 0.4, 0.7], [0.3, 0.2, 0.6], [0.5, 0.8, 0.9]])
    phi = prediction(mu.values, "ident")
    assert srmq_mean(mu, phi) == 1.0
    assert mrsq_mean(mu, phi) == 1.0
    assert mrmq_global(mu, phi) == 1.0
    assert set(srmq_taus(mu, phi)) == {"r0", "r1", "r2"}
    assert set(mrsq_taus(mu, phi)) == {"q0", "q1", "q2"}

    # q0 and q1 agree, q2 is reversed
    mixed = prediction([[1, 2, 3], [2, 1, 3], [3, 2, 1]], "mixed")
    assert mrsq_mean(mu, mixed) == pytest.approx((1.0 + 1.0 - 1.0) / 3.0)


def test_all_degenerate_means_raise() -> None:
    mu = effectiveness([[0.0, 0.0], [0.0, 0.0]])
    phi = prediction([[1, 2], [3, 4]], "p")
    for mean in (srmq_mean, mrsq_mean):
        with pytest.raises(UndefinedCorrelation) as e:
            mean(mu, phi)
        assert e.value.reason == ALL_DEGENERATE
    with pytest.raises(UndefinedCorrelation) as e:
        mrmq_global(mu, phi)
    assert e.value.reason == "x degenerate"


def test_mrmq_global() -> None:
    mu = effectiveness([[0.1, 0.4], [0.3, 0.2]])
    assert mrmq_global(mu, prediction([[1, 4], [2, 3]], "p")) == pytest.approx(0.666667, abs=1e-6)
    assert mrmq_global(effectiveness([[0.1, 0.4]]), prediction([[1, 2]], "p")) == 1.0


def test_axis_mismatch() -> None:
    mu = effectiveness([[0.1, 0.4], [0.3, 0.2]])
    with pytest.raises(ValidationError):
        mrmq_global(mu, prediction([[1, 4], [2, 3]], "p", queries=("a", "b")))


def test_f1_combination() -> None:
    assert f1_combination(0.4, 0.2) == pytest.approx(0.266667, abs=1e-6)
    for x in (0.0, 0.3, 1.0):
        assert f1_combination(x, x) == pytest.approx(x)
    assert f1_combination(0.4, 0.0) == 0.0
    assert f1_combination(-0.5, 0.6) == 0.0


def test_cross_measure_correlation() -> None:
    a = {"m1": 0.1, "m2": 0.3, "m3": 0.2}
    assert cross_measure_correlation(a, a).value == 1.0
    assert cross_measure_correlation(a, {"m1": 0.3, "m2": 0.1, "m3": 0.2}).value == -1.0
    assert cross_measure_correlation(a, {"m1": 0.5, "m2": 0.9, "m3": 0.7}).value == 1.0
    assert cross_measure_correlation(a, {"m1": 0.5, "m2": 0.9, "m3": math.nan}).value == 1.0
    with pytest.raises(ValidationError):
        cross_measure_correlation(a, {"m1": 0.5, "m2": 0.9})
    with pytest.raises(UndefinedCorrelation):
        cross_measure_correlation({"m1": 0.1}, {"m1": 0.2})


def test_discriminativeness() -> None:
    assert discriminativeness({"a": 0.1, "b": 0.2, "c": 0.3}) == pytest.approx(0.1, abs=1e-12)
    assert discriminativeness({"a": 0.4, "b": 0.4}) == 0.0
    assert discriminativeness({"a": 0.0, "b": 0.2}) == pytest.approx(0.141421, abs=1e-6)
    with pytest.raises(ValidationError):
        discriminativeness({"a": 0.1})


def test_unit_summary() -> None:
    stats = unit_summary({str(i): TauResult(v) for i, v in enumerate([0.0, 0.25, 0.5, 0.75, 1.0])})
    assert stats is not None
    assert (stats.count, stats.minimum, stats.median, stats.maximum) == (5, 0.0, 0.5, 1.0)
    assert (stats.lower_quartile, stats.upper_quartile) == (0.25, 0.75)
    assert unit_summary({"q": TauResult.undefined("x degenerate")}) is None


def test_evaluate_predictor_excludes_degenerate_units() -> None:
    mu = effectiveness([[0.1, 0.4, 0.7], [0.0, 0.0, 0.0], [0.5, 0.8, 0.9]])
    result = evaluate_predictor(mu, prediction(mu.values + 1.0, "ident"))
    assert result.mrsq_per_query["q1"].reason == "x degenerate"
    assert result.mrsq_mean.value == 1.0
    assert [(e.measure, e.unit) for e in result.excluded_units] == [(Measure.MRSQ, "q1")]
    assert result.srmq_mean.defined
    assert result.measure(Measure.F1).defined


def test_evaluate_predictor_undefined_measures() -> None:
    mu = effectiveness([[0.0, 0.0], [0.0, 0.0]])
    result = evaluate_predictor(mu, prediction([[1, 2], [3, 4]], "p"))
    assert result.srmq_mean.reason == ALL_DEGENERATE
    assert result.mrsq_mean.reason == ALL_DEGENERATE
    assert result.mrmq_global.reason == "x degenerate"
    assert result.f1.reason == ALL_DEGENERATE
    assert len(result.excluded_units) == 4


def test_evaluate_all_identity() -> None:
    mu = effectiveness([[0.1, 0.4, 0.7], [0.3, 0.2, 0.6], [0.5, 0.8, 0.9]])
    summary = evaluate_all(mu, [prediction(mu.values, "ident")])
    (result,) = summary.results
    for measure in Measure:
        assert result.measure(measure).value == 1.0
    assert summary.discriminativeness[Measure.SRMQ].reason == "singleton"
    assert summary.cross_measure[(Measure.SRMQ, Measure.MRSQ)].reason == "singleton"
    assert summary.best_per_measure[Measure.MRMQ] == ("ident",)
    assert ("ident", Measure.SRMQ) in summary.unit_summaries


def test_evaluate_all_opposite_predictors() -> None:
    mu = effectiveness([[0.1, 0.4, 0.7], [0.3, 0.2, 0.6], [0.5, 0.8, 0.9]])
    summary = evaluate_all(mu, [prediction(mu.values, "ident"), prediction(-mu.values, "neg")])
    assert summary.result("neg").srmq_mean.value == -1.0
    assert summary.cross_measure[(Measure.SRMQ, Measure.MRSQ)].value == 1.0
    assert summary.discriminativeness[Measure.SRMQ].value == pytest.approx(math.sqrt(2.0))
    assert summary.best_per_measure[Measure.SRMQ] == ("ident",)
    assert summary.best_measure_per_predictor["ident"] is Measure.SRMQ


def test_evaluate_all_errors() -> None:
    mu = effectiveness([[0.1, 0.4], [0.3, 0.2]])
    with pytest.raises(ValidationError):
        evaluate_all(mu, [])
    with pytest.raises(ValidationError):
        evaluate_all(mu, [prediction([[1, 2], [3, 4]], "p"), prediction([[4, 3], [2, 1]], "p")])


def test_dissociation_of_srmq_and_mrsq() -> None:
    mu, phis = designed_matrices()
    summary = evaluate_all(mu, phis)
    a, b = summary.result("A"), summary.result("B")
    assert a.srmq_mean.value > b.srmq_mean.value
    assert b.mrsq_mean.value > a.mrsq_mean.value
    assert (a.srmq_mean.value, a.mrsq_mean.value) == (1.0, -1.0)
    assert (b.srmq_mean.value, b.mrsq_mean.value) == (-1.0, 1.0)
    assert a.mrmq_global.value == pytest.approx(204 / 276, abs=1e-12)
    assert b.mrmq_global.value == pytest.approx(-24 / 276, abs=1e-12)
    assert summary.result("ident").f1.value == 1.0


@pytest.mark.timeout(20)
def test_monotone_transform_invariance() -> None:
    rng = np.random.default_rng(17)
    for _ in range(50):
        n, m = int(rng.integers(2, 12)), int(rng.integers(2, 6))
        mu = effectiveness(rng.integers(0, 5, size=(n, m)) / 4.0)
        raw = rng.normal(size=(n, m))
        base = evaluate_predictor(mu, prediction(raw, "p"))
        for transformed in (np.exp(raw), raw**3 + raw, 2.0 * raw + 5.0):
            other = evaluate_predictor(mu, prediction(transformed, "p"))
            for measure in (Measure.SRMQ, Measure.MRSQ, Measure.MRMQ):
                x, y = base.measure(measure), other.measure(measure)
                assert x.reason == y.reason
                assert (math.isnan(x.value) and math.isnan(y.value)) or x.value == y.value


def test_workers_do_not_change_results() -> None:
    mu, phis = designed_matrices()
    sequential = evaluate_all(mu, phis)
    parallel = evaluate_all(mu, phis, TauVariant.B, workers=3)
    assert [r.predictor_id for r in parallel.results] == ["ident", "A", "B"]
    for x, y in zip(sequential.results, parallel.results):
        assert x.srmq_mean == y.srmq_mean and x.mrmq_global == y.mrmq_global


def test_means_ignore_axis_order() -> None:
    rng = np.random.default_rng(23)
    for _ in range(30):
        n, m = int(rng.integers(3, 10)), int(rng.integers(3, 6))
        values = rng.integers(0, 6, size=(n, m)) / 5.0
        raw = rng.normal(size=(n, m))
        base = evaluate_predictor(effectiveness(values), prediction(raw, "p"))
        rows, columns = rng.permutation(n), rng.permutation(m)
        shuffled = evaluate_predictor(effectiveness(values[rows][:, columns]), prediction(raw[rows][:, columns], "p"))
        for measure in (Measure.SRMQ, Measure.MRSQ, Measure.MRMQ):
            x, y = base.measure(measure), shuffled.measure(measure)
            assert x.reason == y.reason
            if x.defined:
                assert y.value == pytest.approx(x.value, abs=1e-12)
        assert len(shuffled.excluded_units) == len(base.excluded_units)
