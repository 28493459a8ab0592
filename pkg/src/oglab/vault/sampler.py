from __future__ import annotations

from dataclasses import dataclass, fields, replace

import numpy as np

from ..errors import ConfigurationError
from .format import Vault


@dataclass
class SequenceBatch:
    """B whole-episode sequences padded to length L (batch-major)."""

    observations: np.ndarray  # (B, L, N, obs_dim)
    state: np.ndarray  # (B, L, state_dim)
    actions: np.ndarray  # (B, L, N) int32 | (B, L, N, act_dim) float32
    rewards: np.ndarray  # (B, L)
    terminals: np.ndarray  # (B, L) bool
    mask: np.ndarray  # (B, L) bool, False on padding
    resets: np.ndarray  # (B, L) bool, hidden state reset before the step
    legal: np.ndarray | None = None  # (B, L, N, A) bool
    episode_index: np.ndarray | None = None  # (B,)

    @property
    def batch_size(self) -> int:
        return self.mask.shape[0]

    @property
    def seq_len(self) -> int:
        return self.mask.shape[1]

    @property
    def num_agents(self) -> int:
        return self.observations.shape[2]

    def with_padding(self, value: float) -> SequenceBatch:
        """Copy with every padded entry overwritten by ``value`` (for masking tests)."""
        pad = ~self.mask
        out = {}
        for f in fields(self):
            arr = getattr(self, f.name)
            if f.name in ("mask", "resets", "episode_index") or arr is None:
                out[f.name] = arr
                continue
            arr = arr.copy()
            fill = value if arr.dtype.kind == "f" else (arr.dtype.type(int(value)) if arr.dtype.kind == "i" else bool(value))
            arr[pad] = fill
            out[f.name] = arr
        return replace(self, **out)


def sample_sequences(vault: Vault, batch_size: int, seq_len: int | None, rng: np.random.Generator) -> SequenceBatch:
    """Draw ``batch_size`` episodes uniformly with replacement; every sequence starts at
    step 0 and is zero-padded (mask False) up to ``seq_len`` (default: the episode limit)."""
    if not vault.episodes:
        raise ConfigurationError("cannot sample from an empty vault")
    data = vault.padded()
    L = vault.header.episode_limit if seq_len is None else int(seq_len)
    if L < 1 or L > data["mask"].shape[1]:
        raise ConfigurationError(f"sequence length {L} outside [1, {data['mask'].shape[1]}]")
    idx = rng.integers(0, len(vault.episodes), size=batch_size)
    resets = np.zeros((batch_size, L), bool)
    resets[:, 0] = True
    return SequenceBatch(
        observations=data["observations"][idx, :L],
        state=data["state"][idx, :L],
        actions=data["actions"][idx, :L],
        rewards=data["rewards"][idx, :L],
        terminals=data["terminals"][idx, :L],
        mask=data["mask"][idx, :L],
        resets=resets,
        legal=data["legal"][idx, :L] if "legal" in data else None,
        episode_index=idx,
    )
