import pytest

from qppm.exceptions import ValidationError
from qppm.routing import route_queries
from tests.fixtures import effectiveness, prediction


def test_route_queries() -> None:
    mu = effectiveness([[0.2, 0.6], [0.9, 0.1], [0.4, 0.5]])
    phi = prediction([[1.0, 2.0], [3.0, 0.0], [5.0, 4.0]], "nqc")
    result = route_queries(mu, phi)
    assert result.choices == {"q0": "r1", "q1": "r0", "q2": "r0"}
    assert result.routed_mean == pytest.approx((0.6 + 0.9 + 0.4) / 3)
    assert result.best_fixed_ranker == "r0"
    assert result.best_fixed_mean == pytest.approx(0.5)
    assert result.oracle_mean == pytest.approx((0.6 + 0.9 + 0.5) / 3)
    assert (result.predictor_id, result.metric) == ("nqc", "ap@50")


def test_route_queries_ties_and_oracle() -> None:
    mu = effectiveness([[0.3, 0.7], [0.8, 0.2]])
    assert route_queries(mu, prediction([[1.0, 1.0], [1.0, 1.0]], "flat")).choices == {"q0": "r0", "q1": "r0"}
    perfect = route_queries(mu, prediction([[0.3, 0.7], [0.8, 0.2]], "ident"))
    assert perfect.routed_mean == perfect.oracle_mean


def test_route_queries_axes() -> None:
    mu = effectiveness([[0.3, 0.7]])
    with pytest.raises(ValidationError):
        route_queries(mu, prediction([[1.0, 2.0]], "x", queries=("other",)))
