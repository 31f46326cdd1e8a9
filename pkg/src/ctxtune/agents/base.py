from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..errors import InvalidArgument, ParseError
from ..nn import AdamState, Mlp, arrays_to_blob, blob_to_arrays

_CKPT_MAGIC = b"CTXK"


@dataclass(frozen=True)
class Checkpoint:
    """Immutable agent snapshot: parameter blob, optimizer blob, hyperparameters."""

    algo: str
    params: bytes
    optimizer: bytes
    hyperparams: dict

    def to_bytes(self) -> bytes:
        header = json.dumps(
            {
                "algo": self.algo,
                "hyperparams": self.hyperparams,
                "params_len": len(self.params),
                "optimizer_len": len(self.optimizer),
            },
            sort_keys=True,
            separators=(",", ":"),
        ).encode()
        return _CKPT_MAGIC + struct.pack("<I", len(header)) + header + self.params + self.optimizer

    @classmethod
    def from_bytes(cls, data: bytes) -> "Checkpoint":
        if data[:4] != _CKPT_MAGIC:
            raise ParseError("not an agent checkpoint")
        (hlen,) = struct.unpack("<I", data[4:8])
        header = json.loads(data[8:8 + hlen])
        start = 8 + hlen
        mid = start + header["params_len"]
        end = mid + header["optimizer_len"]
        if end != len(data):
            raise ParseError("checkpoint length mismatch")
        return cls(header["algo"], data[start:mid], data[mid:end], header["hyperparams"])


def soft_update(online: Sequence[np.ndarray], target: Sequence[np.ndarray], tau: float) -> Sequence[np.ndarray]:
    """Polyak averaging ``target <- tau * online + (1 - tau) * target`` in place."""
    if not 0.0 <= tau <= 1.0:
        raise InvalidArgument(f"tau must lie in [0, 1], got {tau}")
    for src, dst in zip(online, target):
        dst *= 1.0 - tau
        dst += tau * src
    return target


class Agent:
    """Common surface used by the scheduler and harness.

    Subclasses own their networks and optimizer states and implement
    ``learn`` (interact with an :class:`EpisodeRunner` for a number of env
    steps) and ``predict`` (deterministic action).
    """

    algo: str
    hyper_cls: type

    def __init__(self, hp):
        self._hp = hp

    @property
    def hyperparams(self):
        return self._hp

    def set_hyperparams(self, hp) -> None:
        """Swap hyperparameters; optimizer moments are left untouched."""
        if isinstance(hp, dict):
            hp = self.hyper_cls.from_dict(hp)
        if not isinstance(hp, self.hyper_cls):
            raise InvalidArgument(f"expected {self.hyper_cls.__name__}, got {type(hp).__name__}")
        # re-validate in case the instance was built around the dataclass checks
        self._hp = self.hyper_cls(**hp.to_dict())

    def _networks(self) -> list[Mlp]:
        raise NotImplementedError

    def _optimizers(self) -> list[AdamState]:
        raise NotImplementedError

    def checkpoint(self) -> Checkpoint:
        params = [p for net in self._networks() for p in net.params]
        opt = [a for st in self._optimizers() for a in st.arrays()]
        return Checkpoint(self.algo, arrays_to_blob(params), arrays_to_blob(opt), self._hp.to_dict())

    def load_checkpoint(self, ckpt: Checkpoint, hyperparams: bool = True) -> None:
        if ckpt.algo != self.algo:
            raise InvalidArgument(f"checkpoint is for {ckpt.algo}, agent is {self.algo}")
        params = blob_to_arrays(ckpt.params)
        i = 0
        for net in self._networks():
            n = len(net.params)
            net.set_params(params[i:i + n])
            i += n
        if i != len(params):
            raise InvalidArgument("checkpoint parameter count mismatch")
        opt = blob_to_arrays(ckpt.optimizer)
        i = 0
        for st in self._optimizers():
            n = 2 * len(st.m) + 1
            st.load_arrays(opt[i:i + n])
            i += n
        if hyperparams:
            self.set_hyperparams(self.hyper_cls.from_dict(ckpt.hyperparams))
        self._after_load()

    def _after_load(self) -> None:
        pass

    def learn(self, runner, n_steps: int) -> dict:
        raise NotImplementedError

    def predict(self, obs):
        raise NotImplementedError
