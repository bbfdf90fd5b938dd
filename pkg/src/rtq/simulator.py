"""Discrete-event simulation of the two-class priority retrial queue.

An independent check on everything analytic: the event loop knows nothing
about transforms, only the dynamics.  High-priority arrivals queue behind
the server, low-priority arrivals join a retrial orbit and re-attempt at
rate mu each; an attempt succeeds only if it finds the server idle.  All
clocks are exponential except the service draws, so the three pending
events (arrival, service completion, effective retrial) can be redrawn
memorylessly whenever the state changes.

Statistics are time averages over the post-warmup horizon, split into
batches for crude confidence intervals, with sparse joint histograms of
(queue, orbit) held per server state.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field

import numpy as np

from .errors import InsufficientData, OverflowGuard
from .model import ModelParams, validate

__all__ = ["SimConfig", "SimResult", "simulate", "IDLE", "BUSY1", "BUSY2"]

IDLE, BUSY1, BUSY2 = 0, 1, 2
_STATE_NAMES = {"idle": IDLE, "busy1": BUSY1, "busy2": BUSY2}


@dataclass(frozen=True)
class SimConfig:
    max_events: int = 1_000_000
    max_time: float = math.inf
    seed: int = 0
    warmup_fraction: float = 0.2
    batches: int = 20
    queue_cap: int = 10_000_000


@dataclass
class SimResult:
    config: SimConfig
    events: int
    collected_time: float
    time_in_state: np.ndarray          # (3,) time observed in each server state
    batch_time: np.ndarray             # (batches, 3)
    hist: list                         # per state: dict (queue, orbit) -> time
    arrivals_seen: np.ndarray          # (3,) server state found by arrivals
    arrivals: int

    def state_fractions(self) -> np.ndarray:
        return self.time_in_state / self.collected_time

    def state_fraction_stderr(self) -> np.ndarray:
        frac = self.batch_time / self.batch_time.sum(axis=1, keepdims=True)
        return frac.std(axis=0, ddof=1) / math.sqrt(frac.shape[0])

    def pasta_fractions(self) -> np.ndarray:
        return self.arrivals_seen / self.arrivals

    def _state_index(self, state) -> int:
        if isinstance(state, str):
            try:
                return _STATE_NAMES[state]
            except KeyError:
                raise ValueError(f"unknown state {state!r}") from None
        return int(state)

    def conditional_pmf(self, state, coord: str) -> np.ndarray:
        """Time-average pmf of 'queue' or 'orbit' given the server state.

        Raises InsufficientData when the conditioning state holds less than
        1% of the observed time.
        """
        s = self._state_index(state)
        occupancy = self.time_in_state[s] / self.collected_time
        if occupancy < 0.01:
            raise InsufficientData(
                f"state {state!r} observed {occupancy:.2%} of the time"
            )
        pos = 0 if coord == "queue" else 1
        if coord not in ("queue", "orbit"):
            raise ValueError("coord must be 'queue' or 'orbit'")
        top = max(k[pos] for k in self.hist[s])
        out = np.zeros(top + 1)
        for key, w in self.hist[s].items():
            out[key[pos]] += w
        return out / self.time_in_state[s]

    def joint_pmf(self, state) -> dict:
        s = self._state_index(state)
        tot = self.time_in_state[s]
        return {k: w / tot for k, w in self.hist[s].items()}


def simulate(params: ModelParams, config: SimConfig) -> SimResult:
    """Run the event loop; deterministic for a fixed (params, config)."""
    validate(params)
    rng = random.Random(config.seed)
    lam, q, mu = params.lam, params.q, params.mu
    d1, d2 = params.dist1, params.dist2
    inf = math.inf

    t = 0.0
    server = IDLE
    nq = 0          # high-priority customers waiting (not in service)
    no = 0          # orbit size
    t_arrival = rng.expovariate(lam)
    t_done = inf
    t_retry = inf

    warmup = int(config.warmup_fraction * config.max_events)
    span = max(1, config.max_events - warmup)
    nbatch = config.batches
    time_in_state = np.zeros(3)
    batch_time = np.zeros((nbatch, 3))
    hist = [dict(), dict(), dict()]
    arrivals_seen = np.zeros(3, dtype=np.int64)
    arrivals = 0
    collecting = False
    t_collect_start = 0.0

    events = 0
    while events < config.max_events and t < config.max_time:
        t_next = t_arrival
        kind = 0
        if t_done < t_next:
            t_next, kind = t_done, 1
        if t_retry < t_next:
            t_next, kind = t_retry, 2
        if collecting:
            dt = t_next - t
            time_in_state[server] += dt
            b = min(nbatch - 1, (events - warmup) * nbatch // span)
            batch_time[b, server] += dt
            key = (nq, no)
            bucket = hist[server]
            bucket[key] = bucket.get(key, 0.0) + dt
        t = t_next

        if kind == 0:  # arrival
            arrivals += 1
            if collecting:
                arrivals_seen[server] += 1
            if rng.random() < q:
                if server == IDLE:
                    server = BUSY1
                    t_done = t + d1.sample_one(rng)
                    t_retry = inf
                else:
                    nq += 1
            else:
                if server == IDLE:
                    server = BUSY2
                    t_done = t + d2.sample_one(rng)
                    t_retry = inf
                else:
                    no += 1
            t_arrival = t + rng.expovariate(lam)
        elif kind == 1:  # service completion
            if nq > 0:
                nq -= 1
                server = BUSY1
                t_done = t + d1.sample_one(rng)
            else:
                server = IDLE
                t_done = inf
                t_retry = t + rng.expovariate(no * mu) if no > 0 else inf
        else:  # successful retrial (only scheduled while idle)
            no -= 1
            server = BUSY2
            t_done = t + d2.sample_one(rng)
            t_retry = inf

        if nq + no > config.queue_cap:
            raise OverflowGuard(
                f"backlog exceeded {config.queue_cap} customers at t={t:.6g}"
            )
        events += 1
        if not collecting and events >= warmup:
            collecting = True
            t_collect_start = t
            arrivals = 0
            arrivals_seen[:] = 0

    return SimResult(
        config=config,
        events=events,
        collected_time=t - t_collect_start,
        time_in_state=time_in_state,
        batch_time=batch_time,
        hist=hist,
        arrivals_seen=arrivals_seen,
        arrivals=max(arrivals, 1),
    )
