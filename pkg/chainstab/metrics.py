"""Prometheus metrics recorded during analyses

chainstab runs as a batch job, so metrics are written to a file in the
Prometheus text format (for a node-exporter textfile collector) rather
than served over HTTP.
"""

from prometheus_client import REGISTRY, Counter, Histogram, write_to_textfile

ANALYSIS_BUCKETS = [0.01, 0.1, 0.5, 1, 5, 10, 30, 60, 300, float("inf")]
ANALYSIS_TIME = Histogram(
    "chainstab_analysis_time_seconds",
    "Histogram of analysis run times",
    ["command", "status"],
    buckets=ANALYSIS_BUCKETS,
)
WORDS_VISITED = Counter(
    "chainstab_words_visited",
    "Words and search-tree nodes visited while bounding spectral radii",
    ["kind"],
)
TRAJECTORIES = Counter(
    "chainstab_trajectories",
    "Markov chain trajectories simulated",
)


def write_metrics(path, registry=REGISTRY):
    """Write all metrics in `registry` to `path` in the Prometheus text format"""
    write_to_textfile(path, registry)
