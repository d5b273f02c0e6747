"""Per-user token bucket rate limiting.

Defaults: capacity 30, refill 10 tokens per minute, both config
overridable. The clock is injectable so tests can drive a simulated
timeline against the admission oracle.
"""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass
from typing import Callable, Dict, Tuple

DEFAULT_CAPACITY = 30.0
DEFAULT_REFILL_PER_MINUTE = 10.0


@dataclass
class _Bucket:
    tokens: float
    last_refill: float


class TokenBucketLimiter:
    def __init__(self, capacity: float = DEFAULT_CAPACITY,
                 refill_per_minute: float = DEFAULT_REFILL_PER_MINUTE,
                 clock: Callable[[], float] = time.monotonic):
        if capacity < 1 or refill_per_minute <= 0:
            raise ValueError("capacity must be >= 1 and refill positive")
        self.capacity = float(capacity)
        self.rate_per_second = refill_per_minute / 60.0
        self.clock = clock
        self._buckets: Dict[str, _Bucket] = {}
        self._lock = threading.Lock()

    def allow(self, user_id: str) -> Tuple[bool, float]:
        """Admit or reject one request; returns (admitted, retry_after_s)."""
        now = self.clock()
        with self._lock:
            bucket = self._buckets.get(user_id)
            if bucket is None:
                bucket = _Bucket(tokens=self.capacity, last_refill=now)
                self._buckets[user_id] = bucket
            elapsed = max(0.0, now - bucket.last_refill)
            bucket.tokens = min(self.capacity,
                                bucket.tokens + elapsed * self.rate_per_second)
            bucket.last_refill = now
            if bucket.tokens >= 1.0:
                bucket.tokens -= 1.0
                return True, 0.0
            wait = (1.0 - bucket.tokens) / self.rate_per_second
            return False, wait
