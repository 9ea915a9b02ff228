from itertools import count

import pytest

from qppm.utils.stage_timer import StageTimer


def test_stages_accumulate() -> None:
    clock = count(start=0.0, step=1.0)
    timer = StageTimer("test", time_function=lambda: next(clock))
    with timer.stage("parse"):
        pass
    with timer.stage("predict"):
        next(clock)
    with timer.stage("parse"):
        pass

    assert timer.durations == {"parse": 2.0, "predict": 2.0}
    assert timer.total() == 4.0
    statistics = timer.get_statistics()
    assert list(statistics["stages"]) == ["parse", "predict"]
    assert statistics["name"] == "test"
    assert timer.get_statistics("predict")["duration"] == 2.0
    assert timer.get_statistics("render")["duration"] == 0.0


def test_failed_stage_is_timed() -> None:
    clock = count(start=0.0, step=0.5)
    timer = StageTimer(time_function=lambda: next(clock))
    with pytest.raises(RuntimeError):
        with timer.stage("evaluate"):
            raise RuntimeError("boom")
    assert timer.durations["evaluate"] == 0.5
