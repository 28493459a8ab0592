"""oglab: offline cooperative multi-agent RL baselines, datasets and evaluation protocol."""

__version__ = "0.1.0"
