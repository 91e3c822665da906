from prometheus_client import REGISTRY, CollectorRegistry, Counter

from chainstab.jsr import lower_bound_at, upper_bound_at
from chainstab.lift import build_lift
from chainstab.metrics import WORDS_VISITED, write_metrics


def visited(kind):
    return REGISTRY.get_sample_value("chainstab_words_visited_total", {"kind": kind}) or 0


def test_words_visited(alternating):
    periodic, lifted = visited("periodic"), visited("lifted")
    lower_bound_at(alternating, 4)
    upper_bound_at(alternating, build_lift(alternating), 4)
    assert visited("periodic") > periodic
    assert visited("lifted") > lifted


def test_write_metrics(tmp_path):
    registry = CollectorRegistry()
    c = Counter("chainstab_test_runs", "test counter", registry=registry)
    c.inc(3)
    path = tmp_path / "metrics.prom"
    write_metrics(str(path), registry)
    assert "chainstab_test_runs_total 3.0" in path.read_text()


def test_default_registry(tmp_path):
    WORDS_VISITED.labels(kind="periodic").inc(0)
    path = tmp_path / "metrics.prom"
    write_metrics(str(path))
    text = path.read_text()
    assert 'chainstab_words_visited_total{kind="periodic"}' in text
    assert "chainstab_trajectories_total" in text
