"""One-shot user pools and the per-user privacy audit log."""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import IO, Iterator

import numpy as np

from .errors import ConfigurationError, OneShotViolation, PoolExhaustedError


@dataclass(frozen=True)
class AuditEntry:
    """A contiguous run of users ``[start, stop)`` that went through one mechanism."""

    start: int
    stop: int
    mechanism: str
    epsilon: float
    delta: float

    def __len__(self):
        return self.stop - self.start


class AuditLog:
    """Run-length record of which randomizer touched which user.

    Entries are stored as index ranges so that pools with millions of users stay
    cheap; :meth:`iter_records` expands them to one record per user.
    """

    def __init__(self):
        self._entries: list[AuditEntry] = []

    def record(self, start: int, stop: int, mechanism: str, epsilon: float, delta: float = 0.0):
        if stop > start:
            self._entries.append(AuditEntry(start, stop, mechanism, float(epsilon), float(delta)))

    @property
    def entries(self) -> list[AuditEntry]:
        return list(self._entries)

    def __len__(self):
        return sum(len(e) for e in self._entries)

    def iter_records(self) -> Iterator[dict]:
        for e in self._entries:
            for i in range(e.start, e.stop):
                yield {
                    "user_index": i,
                    "mechanism_name": e.mechanism,
                    "epsilon": e.epsilon,
                    "delta": e.delta,
                }

    def write_jsonl(self, fp: IO[str]) -> int:
        """Write one JSON object per user to ``fp``; returns the record count."""
        count = 0
        for rec in self.iter_records():
            fp.write(json.dumps(rec) + "\n")
            count += 1
        return count

    def user_counts(self, size: int) -> np.ndarray:
        """How many reports each user index in ``[0, size)`` produced."""
        counts = np.zeros(size, dtype=np.int64)
        for e in self._entries:
            counts[e.start:e.stop] += 1
        return counts

    def max_spend(self) -> tuple[float, float]:
        """Largest (epsilon, delta) charged to any single user."""
        if not self._entries:
            return 0.0, 0.0
        return max(e.epsilon for e in self._entries), max(e.delta for e in self._entries)

    def consumed_by(self, mechanism: str) -> int:
        return sum(len(e) for e in self._entries if e.mechanism == mechanism)


class UserPool:
    """Ordered users, each of which may be queried through exactly one randomizer.

    ``take`` hands out the next ``k`` unconsumed users in index order and
    charges them to the audit log. ``reserve`` carves a contiguous sub-pool that
    shares the consumption flags and the log; users a sub-pool never takes stay
    unconsumed (they are discarded, never reused by the parent).
    """

    def __init__(self, values, *, _shared=None, _start: int = 0, _stop: int | None = None):
        if _shared is None:
            arr = np.asarray(values, dtype=float)
            if arr.ndim != 1:
                raise ConfigurationError("a user pool holds one real value per user")
            _shared = (arr, np.zeros(arr.shape[0], dtype=bool), AuditLog())
        self._values, self._consumed, self._audit = _shared
        self._start = _start
        self._stop = len(self._values) if _stop is None else _stop
        self._cursor = _start

    def __len__(self):
        return self._stop - self._start

    @property
    def remaining(self) -> int:
        return self._stop - self._cursor

    @property
    def cursor(self) -> int:
        """Global index of the next user ``take`` would hand out."""
        return self._cursor

    @property
    def audit(self) -> AuditLog:
        return self._audit

    @property
    def consumed(self) -> np.ndarray:
        return self._consumed[self._start:self._stop].copy()

    def take(self, k: int, mechanism: str, epsilon: float, delta: float = 0.0) -> np.ndarray:
        k = int(k)
        if k < 0:
            raise ValueError("k must be non-negative")
        if k > self.remaining:
            raise PoolExhaustedError(
                f"requested {k} users but only {self.remaining} remain"
            )
        lo, hi = self._cursor, self._cursor + k
        if self._consumed[lo:hi].any():
            first = lo + int(np.argmax(self._consumed[lo:hi]))
            raise OneShotViolation(f"user {first} has already been queried")
        self._consumed[lo:hi] = True
        self._audit.record(lo, hi, mechanism, epsilon, delta)
        self._cursor = hi
        return self._values[lo:hi].copy()

    def reserve(self, k: int) -> UserPool:
        """Detach the next ``k`` users as a sub-pool; the parent skips past them."""
        k = int(k)
        if k > self.remaining:
            raise PoolExhaustedError(f"cannot reserve {k} users, only {self.remaining} remain")
        sub = UserPool(None, _shared=(self._values, self._consumed, self._audit),
                       _start=self._cursor, _stop=self._cursor + k)
        self._cursor += k
        return sub

    def consume_indices(self, indices, mechanism: str, epsilon: float, delta: float = 0.0) -> np.ndarray:
        """Query arbitrary users by global index; any repeat raises ``OneShotViolation``."""
        idx = np.asarray(indices, dtype=np.int64)
        if idx.size and (idx.min() < self._start or idx.max() >= self._stop):
            raise PoolExhaustedError("index outside this pool")
        if len(np.unique(idx)) != idx.size or self._consumed[idx].any():
            raise OneShotViolation("a user would be queried more than once")
        self._consumed[idx] = True
        for i in idx:
            self._audit.record(int(i), int(i) + 1, mechanism, epsilon, delta)
        return self._values[idx].copy()
