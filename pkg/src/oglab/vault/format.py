"""The OGV1 episode-vault file.

Layout (all integers little-endian)::

    b"OGV1" | version u8 | header length u32 | header (UTF-8 JSON, sorted keys)
    then per episode:
        T u32
        observations  f32[T, N, obs_dim]
        state         f32[T, state_dim]
        actions       i32[T, N]            (discrete)
                      f32[T, N, act_dim]   (continuous)
        team_reward   f32[T]
        terminal      u8[T]
        legal         u8[T, N, num_actions] (discrete only)
"""

from __future__ import annotations

import io
import json
import struct
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from ..envs.base import ActionSpec
from ..errors import VaultError

MAGIC = b"OGV1"
FORMAT_VERSION = 1


@dataclass
class VaultHeader:
    env_id: str
    scenario: str
    quality: str
    num_agents: int
    obs_dim: int
    state_dim: int
    action_spec: ActionSpec
    episode_limit: int
    episode_count: int
    transition_count: int
    behaviour_policy: str
    creation_seed: int
    format_version: int = FORMAT_VERSION
    std_convention: str = "population"

    def to_json(self) -> bytes:
        d = asdict(self)
        d["action_spec"] = self.action_spec.to_dict()
        return json.dumps(d, sort_keys=True, separators=(",", ":")).encode("utf-8")

    @classmethod
    def from_json(cls, blob: bytes) -> VaultHeader:
        try:
            d = json.loads(blob.decode("utf-8"))
            d["action_spec"] = ActionSpec.from_dict(d["action_spec"])
            return cls(**d)
        except (UnicodeDecodeError, json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise VaultError("invalid_header", f"cannot parse header: {exc}") from None


@dataclass
class Episode:
    observations: np.ndarray  # (T, N, obs_dim) float32
    state: np.ndarray  # (T, state_dim) float32
    actions: np.ndarray  # (T, N) int32 | (T, N, act_dim) float32
    rewards: np.ndarray  # (T,) float32 team reward
    terminals: np.ndarray  # (T,) bool
    legal: np.ndarray | None = None  # (T, N, num_actions) bool

    def __len__(self) -> int:
        return int(self.rewards.shape[0])

    @property
    def episode_return(self) -> float:
        return float(np.sum(self.rewards, dtype=np.float64))

    def validate(self) -> None:
        T = len(self)
        if T < 1:
            raise VaultError("invariant_violation", "episode of length 0")
        for name in ("observations", "state", "actions", "terminals"):
            if getattr(self, name).shape[0] != T:
                raise VaultError("invariant_violation", f"{name} length differs from reward length {T}")
        if self.legal is not None and self.legal.shape[0] != T:
            raise VaultError("invariant_violation", "legal mask length differs from reward length")
        if not np.all(np.isfinite(self.rewards)):
            raise VaultError("invariant_violation", "non-finite reward")
        if np.any(self.terminals[:-1]):
            raise VaultError("invariant_violation", "terminal flag before the final step")


@dataclass
class Vault:
    header: VaultHeader
    episodes: list[Episode]
    _padded: dict | None = field(default=None, repr=False, compare=False)

    @property
    def discrete(self) -> bool:
        return self.header.action_spec.discrete

    def returns(self) -> np.ndarray:
        return np.array([ep.episode_return for ep in self.episodes])

    def padded(self) -> dict[str, np.ndarray]:
        """All episodes stacked into zero-padded (E, episode_limit, ...) arrays (cached)."""
        if self._padded is None:
            h = self.header
            E = len(self.episodes)
            L = max(h.episode_limit, max(len(ep) for ep in self.episodes))
            N = h.num_agents
            out = {
                "observations": np.zeros((E, L, N, h.obs_dim), np.float32),
                "state": np.zeros((E, L, h.state_dim), np.float32),
                "rewards": np.zeros((E, L), np.float32),
                "terminals": np.zeros((E, L), bool),
                "mask": np.zeros((E, L), bool),
                "lengths": np.array([len(ep) for ep in self.episodes], np.int64),
            }
            if self.discrete:
                out["actions"] = np.zeros((E, L, N), np.int32)
                out["legal"] = np.zeros((E, L, N, h.action_spec.size), bool)
            else:
                out["actions"] = np.zeros((E, L, N, h.action_spec.size), np.float32)
            for e, ep in enumerate(self.episodes):
                T = len(ep)
                out["observations"][e, :T] = ep.observations
                out["state"][e, :T] = ep.state
                out["actions"][e, :T] = ep.actions
                out["rewards"][e, :T] = ep.rewards
                out["terminals"][e, :T] = ep.terminals
                out["mask"][e, :T] = True
                if self.discrete:
                    out["legal"][e, :T] = ep.legal
            self._padded = out
        return self._padded


def _check_consistent(header: VaultHeader, episodes: list[Episode]) -> None:
    if not episodes:
        raise VaultError("count_mismatch", "a vault needs at least one episode")
    if header.episode_count != len(episodes):
        raise VaultError("count_mismatch", f"header declares {header.episode_count} episodes, got {len(episodes)}")
    transitions = sum(len(ep) for ep in episodes)
    if header.transition_count != transitions:
        raise VaultError("count_mismatch", f"header declares {header.transition_count} transitions, got {transitions}")
    N, spec = header.num_agents, header.action_spec
    for i, ep in enumerate(episodes):
        ep.validate()
        T = len(ep)
        shapes = {
            "observations": (ep.observations.shape, (T, N, header.obs_dim)),
            "state": (ep.state.shape, (T, header.state_dim)),
            "actions": (ep.actions.shape, (T, N) if spec.discrete else (T, N, spec.size)),
        }
        if spec.discrete:
            shapes["legal"] = (None if ep.legal is None else ep.legal.shape, (T, N, spec.size))
        for name, (got, want) in shapes.items():
            if got != want:
                raise VaultError("invariant_violation", f"episode {i}: {name} shape {got}, expected {want}")


def vault_to_bytes(header: VaultHeader, episodes: list[Episode]) -> bytes:
    _check_consistent(header, episodes)
    buf = io.BytesIO()
    head = header.to_json()
    buf.write(MAGIC)
    buf.write(struct.pack("<BI", header.format_version, len(head)))
    buf.write(head)
    discrete = header.action_spec.discrete
    for ep in episodes:
        buf.write(struct.pack("<I", len(ep)))
        buf.write(np.ascontiguousarray(ep.observations, "<f4").tobytes())
        buf.write(np.ascontiguousarray(ep.state, "<f4").tobytes())
        buf.write(np.ascontiguousarray(ep.actions, "<i4" if discrete else "<f4").tobytes())
        buf.write(np.ascontiguousarray(ep.rewards, "<f4").tobytes())
        buf.write(np.ascontiguousarray(ep.terminals, "u1").tobytes())
        if discrete:
            buf.write(np.ascontiguousarray(ep.legal, "u1").tobytes())
    return buf.getvalue()


def write_vault(path: str | Path, header: VaultHeader, episodes: list[Episode]) -> Path:
    path = Path(path)
    blob = vault_to_bytes(header, episodes)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(blob)
    return path


class _Reader:
    def __init__(self, blob: bytes):
        self.blob, self.offset = blob, 0

    def take(self, n: int, what: str) -> bytes:
        if self.offset + n > len(self.blob):
            raise VaultError("truncated_body", f"file ends inside {what}")
        out = self.blob[self.offset:self.offset + n]
        self.offset += n
        return out

    def array(self, dtype: str, shape: tuple[int, ...], what: str) -> np.ndarray:
        n = int(np.prod(shape))
        raw = self.take(n * np.dtype(dtype).itemsize, what)
        return np.frombuffer(raw, dtype=dtype).reshape(shape)


def vault_from_bytes(blob: bytes) -> Vault:
    if blob[:4] != MAGIC:
        raise VaultError("bad_magic", "missing OGV1 magic")
    r = _Reader(blob)
    r.take(4, "magic")
    version, head_len = struct.unpack("<BI", r.take(5, "preamble"))
    if version != FORMAT_VERSION:
        raise VaultError("unsupported_version", f"vault version {version} (reader supports {FORMAT_VERSION})")
    header = VaultHeader.from_json(r.take(head_len, "header"))
    N, spec = header.num_agents, header.action_spec
    episodes = []
    for i in range(header.episode_count):
        (T,) = struct.unpack("<I", r.take(4, f"episode {i} length"))
        what = f"episode {i}"
        obs = r.array("<f4", (T, N, header.obs_dim), what).astype(np.float32)
        state = r.array("<f4", (T, header.state_dim), what).astype(np.float32)
        if spec.discrete:
            actions = r.array("<i4", (T, N), what).astype(np.int32)
        else:
            actions = r.array("<f4", (T, N, spec.size), what).astype(np.float32)
        rewards = r.array("<f4", (T,), what).astype(np.float32)
        terminals = r.array("u1", (T,), what).astype(bool)
        legal = r.array("u1", (T, N, spec.size), what).astype(bool) if spec.discrete else None
        episodes.append(Episode(obs, state, actions, rewards, terminals, legal))
    if r.offset != len(blob):
        raise VaultError("count_mismatch", f"{len(blob) - r.offset} bytes beyond the declared {header.episode_count} episodes")
    _check_consistent(header, episodes)
    return Vault(header, episodes)


def read_vault(path: str | Path) -> Vault:
    return vault_from_bytes(Path(path).read_bytes())
