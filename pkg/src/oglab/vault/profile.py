from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .format import Vault

HISTOGRAM_BINS = 20


@dataclass
class DatasetProfile:
    episode_count: int
    transition_count: int
    mean_return: float
    std_return: float  # population convention
    min_return: float
    max_return: float
    bin_edges: list[float]
    bin_counts: list[int]

    def to_dict(self) -> dict:
        return asdict(self)


def profile(vault: Vault) -> DatasetProfile:
    """Exact summary statistics of the stored episode returns.

    The histogram has 20 equal-width bins over [min, max]; when every return is
    identical numpy widens the range to [v - 0.5, v + 0.5].
    """
    returns = vault.returns()
    counts, edges = np.histogram(returns, bins=HISTOGRAM_BINS, range=(returns.min(), returns.max()))
    return DatasetProfile(
        episode_count=len(returns),
        transition_count=int(sum(len(ep) for ep in vault.episodes)),
        mean_return=float(returns.mean()),
        std_return=float(returns.std()),
        min_return=float(returns.min()),
        max_return=float(returns.max()),
        bin_edges=[float(e) for e in edges],
        bin_counts=[int(c) for c in counts],
    )
