"""Receiver-side Bernoulli packet loss with replayable seeded streams."""

from __future__ import annotations

import numpy as np

from ..errors import InvalidInputError


class LossModel:
    """Drops each frame independently with probability ``per``.

    One uniform draw is consumed per frame whatever ``per`` is, so the
    accept/drop sequence for a seed is stable across loss rates.
    """

    def __init__(self, per: float = 0.0, rng_seed: int = 0):
        if not 0.0 <= per <= 1.0:
            raise InvalidInputError(f"per must be in [0, 1]: {per}")
        if not 0 <= rng_seed < 2**64:
            raise InvalidInputError(f"rng_seed must be a 64-bit unsigned integer: {rng_seed}")
        self.per = float(per)
        self.rng_seed = rng_seed
        self._rng = np.random.default_rng(rng_seed)
        self.delivered = 0
        self.dropped = 0

    @classmethod
    def for_receiver(cls, per: float, master_seed: int, receiver_id: int) -> LossModel:
        """Independent stream per receiver derived from a master seed."""
        ss = np.random.SeedSequence([master_seed, receiver_id])
        return cls(per, int(ss.generate_state(1, np.uint64)[0]))

    def deliver(self) -> bool:
        ok = bool(self._rng.random() >= self.per)
        if ok:
            self.delivered += 1
        else:
            self.dropped += 1
        return ok


def loss_gate(model: LossModel, frame=None) -> bool:
    return model.deliver()
