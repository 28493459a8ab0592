"""Offline dataset format, generation, profiling and sequence sampling."""

from .format import Episode, Vault, VaultHeader, read_vault, vault_from_bytes, vault_to_bytes, write_vault
from .generate import QUALITIES, TIERS, generate_dataset, record_episode
from .profile import DatasetProfile, profile
from .sampler import SequenceBatch, sample_sequences

__all__ = [
    "DatasetProfile", "Episode", "QUALITIES", "SequenceBatch", "TIERS", "Vault", "VaultHeader",
    "generate_dataset", "profile", "read_vault", "record_episode", "sample_sequences",
    "vault_from_bytes", "vault_to_bytes", "write_vault",
]
