# -*- coding: UTF-8 -*-

from __future__ import annotations

from heapq import heappush, heappop
from itertools import count
from typing import Callable, NamedTuple, Tuple, List

from logpie import get_logger, Logger
from numpy import ndarray
from numpy.random import Generator, PCG64, SeedSequence

from .exceptions import SchedulingError
from .utils import stable_hash

# simulated seconds:
SimTime = float

# uniforms pre-drawn per refill:
_BLOCK: int = 4096


class Event(NamedTuple):
    fire_at: SimTime
    sequence: int
    action: Callable
    args: Tuple


class RandomStream(object):
    """
    Seeded uniform stream on PCG64.

    The same `(seed, key)` yields the same sequence on every platform.
    Draws are buffered in blocks; this never changes the sequence.
    """

    __slots__ = ("seed", "key", "_generator", "_buffer", "_index")

    def __init__(self, seed: int, key: Tuple[int, ...] = ()):
        if isinstance(seed, bool) or (not isinstance(seed, int)) or not (0 <= seed < 2 ** 64):
            raise ValueError(f"'seed' must be a 64-bit non-negative integer not '{seed}'!")

        self.seed = seed
        self.key = tuple(key)
        self._generator = Generator(
            PCG64(SeedSequence(entropy=seed, spawn_key=self.key))
        )
        self._buffer: List[float] = []
        self._index: int = 0

    def spawn(self, name: str) -> RandomStream:
        """Independent substream addressed by `name`."""
        return RandomStream(self.seed, self.key + (stable_hash(name),))

    def next_uniform(self) -> float:
        """Next real in [0, 1)."""
        if self._index == len(self._buffer):
            self._buffer = self._generator.random(_BLOCK).tolist()
            self._index = 0
        value = self._buffer[self._index]
        self._index += 1
        return value

    def uniform(self, low: float, high: float) -> float:
        return low + (high - low) * self.next_uniform()

    def uniforms(self, size: int) -> ndarray:
        """
        Vector of `size` reals in [0, 1), drawn straight from the generator
        (the scalar buffer is left untouched).
        """
        return self._generator.random(size)


def next_uniform(stream: RandomStream) -> float:
    return stream.next_uniform()


class EventEngine(object):
    """
    Simulated clock plus ordered event queue.

    Events are ordered by `(fire_at, sequence)` where `sequence` is the
    insertion counter, so equal-time events dispatch in scheduling order.
    """

    def __init__(self, **kwargs):
        self._log: Logger = kwargs.pop(
            "logger",
            get_logger("redsim", state="off")
        )
        self._queue: List[Event] = []
        self._sequence = count()
        self._now: SimTime = 0.0

    @property
    def now(self) -> SimTime:
        return self._now

    @property
    def pending(self) -> int:
        return len(self._queue)

    def schedule(self, fire_at: SimTime, action: Callable, *args) -> Event:
        """
        Store `action(*args)` for dispatch at `fire_at`.

        :raise SchedulingError: If `fire_at` lies before `now`.
        """
        if fire_at < self._now:
            raise SchedulingError(
                f"Cannot schedule '{getattr(action, '__name__', action)}' at "
                f"t={fire_at!r}, the clock already reads t={self._now!r}!"
            )
        event = Event(fire_at, next(self._sequence), action, args)
        heappush(self._queue, event)
        return event

    def schedule_after(self, delay: SimTime, action: Callable, *args) -> Event:
        return self.schedule(self._now + delay, action, *args)

    def run_until(self, t_end: SimTime) -> int:
        """
        Dispatch every event with `fire_at <= t_end` in `(fire_at, sequence)`
        order, then advance the clock to `t_end`.

        :return: The number of dispatched events.
        """
        if t_end < self._now:
            raise SchedulingError(
                f"Cannot run backwards to t={t_end!r} from t={self._now!r}!"
            )

        self._log.debug(f"Running events from t={self._now:.6f} to t={t_end:.6f}...")

        queue = self._queue
        dispatched = 0
        while queue and queue[0][0] <= t_end:
            fire_at, _, action, args = heappop(queue)
            self._now = fire_at
            action(*args)
            dispatched += 1

        self._now = t_end
        self._log.debug(f"Dispatched {dispatched} events; {len(queue)} still pending.")
        return dispatched
