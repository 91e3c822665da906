# An example config for chainstab. Copy it to chainstab_config.py in the
# directory you run chainstab from, or pass it with --config.

import logging

c.ChainStab.log_level = logging.DEBUG

# search longer words, but give up on any length after 50M nodes
c.RadiusEstimator.max_length = 16
c.RadiusEstimator.target_gap = 1e-4
c.RadiusEstimator.node_cap = "50M"
c.RadiusEstimator.threads = 4

c.LyapunovSimulator.trajectories = 1000
c.LyapunovSimulator.steps = 100_000
c.LyapunovSimulator.seed = 2024
c.LyapunovSimulator.threads = 4

# append one JSON event per run
c.EventLog.handlers_maker = lambda el: [logging.FileHandler("chainstab-events.jsonl")]
