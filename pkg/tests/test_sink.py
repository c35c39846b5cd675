import io

import numpy as np
import pytest

from emsj.sink import CollisionStats, EmissionSink, dedupe_decision, dedupe_probability


def test_oblivious_level_zero_always_accepts(rng):
    assert dedupe_probability(0.3, 5.0, level=0) == 1.0
    assert all(dedupe_decision(0.3, 5.0, rng, level=0) for _ in range(100))


def test_probability_values():
    assert dedupe_probability(0.5, 4.0) == pytest.approx(0.5)
    assert dedupe_probability(0.5, 4.0, level=3) == pytest.approx(1 / 8)
    assert dedupe_probability(0.1, 2.0, level=2) == 1.0  # capped


@pytest.mark.parametrize("p", [0.0, -0.1, 1.5, float("nan")])
def test_invalid_probability(p):
    with pytest.raises(ValueError):
        dedupe_probability(p, 2.0)


def test_aware_acceptance_frequency(rng):
    # p * L' = 4 gives acceptance 1/4
    trials = 100_000
    hits = sum(dedupe_decision(0.5, 8.0, rng) for _ in range(trials))
    sigma = np.sqrt(0.25 * 0.75 / trials)
    assert abs(hits / trials - 0.25) <= 3 * sigma


def test_raw_sink_multiplicity_and_replication():
    sink = EmissionSink()
    sink.emit([1, 1, 2], [3, 3, 4])
    sink.emit(1, 3)
    assert sink.multiplicity() == {(1, 3): 3, (2, 4): 1}
    assert sink.replication == pytest.approx(2.0)
    assert sink.pairs() == {(1, 3), (2, 4)}


def test_count_only_sink():
    sink = EmissionSink("count-only")
    sink.emit([1, 2], [3, 4])
    assert sink.total == 2
    with pytest.raises(RuntimeError):
        sink.pairs()


def test_stream_lines():
    buf = io.StringIO()
    EmissionSink(stream=buf).emit([1, 2], [3, 4])
    assert buf.getvalue() == "1\t3\n2\t4\n"


def test_dedupe_without_probability_falls_back(caplog):
    sink = EmissionSink("dedupe", rng=0)
    sink.emit([1, 2], [3, 4])
    assert sink.total == 2
    assert "falls back" in caplog.text


def test_bad_mode():
    with pytest.raises(ValueError):
        EmissionSink("bogus")


def test_collision_stats_record_and_merge():
    a = CollisionStats(classify=True, k_cap=3)
    a.calls[0] += 1
    a.record_classes(0, np.array([0.0, 1.0, 2.5, 5.0]), 1.0, 2.5, min_side=20)
    assert a.classes[0] == {"near": 2, "cnear": 1, "far": 1}
    assert a.far_by_k[(0, 3)] == 1  # floor(log2 20) = 4, capped at 3
    b = CollisionStats()
    b.calls[0] += 2
    b.tracked[((0, 0), 1)] += 4
    a.merge(b)
    assert a.calls[0] == 3 and a.level_multiplicity((0, 0), 1) == 4
    text = a.to_text()
    assert text.startswith("level\tcalls") and "0\t3\t2\t1\t1" in text
