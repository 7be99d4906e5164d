"""Shared Poisson randomness for every process the package runs.

A Timeline materializes, for one lattice box and one seed, every elementary
event on a time window: infection arrows per directed neighbour pair,
recovery marks per site, and flip candidates per edge.  All coupled processes
(plain runs, thinned runs, truncated runs, bounding runs, the time-reversed
run) consume the same Timeline, which is what makes their pathwise
comparisons exact rather than distributional.

Generation is eager and deterministic: equal (seed, box, rates, horizon)
reproduce a bit-identical event table.  Every event carries an independent
uniform mark; marks drive thinning (a view at a smaller rate keeps an event
iff its mark falls below the rate ratio) and the accept/reject step of the
edge-flip dynamics.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .lattice import GraphView, SizingError

KIND_ARROW = 0
KIND_RECOVERY = 1
KIND_FLIP = 2

_KIND_NAMES = {KIND_ARROW: "arrow", KIND_RECOVERY: "recovery", KIND_FLIP: "flip"}

DEFAULT_EVENT_BUDGET = 20_000_000

_M64 = (1 << 64) - 1


def mix64(x: int) -> int:
    """SplitMix64 finalizer; the package-wide integer hash."""
    x = (x + 0x9E3779B97F4A7C15) & _M64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _M64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _M64
    return x ^ (x >> 31)


def derive_seed(root: int, index: int) -> int:
    """Replica seed: root seed XOR replica index, hashed through mix64."""
    return mix64((root ^ index) & _M64)


def uniform_from(seed: int, *keys: int) -> float:
    """Deterministic uniform in [0,1) from a seed and integer keys."""
    x = mix64(seed & _M64)
    for k in keys:
        x = mix64(x ^ mix64(k & _M64))
    return (x >> 11) * (2.0 ** -53)


@dataclass(eq=False)
class Timeline:
    """One realized event table.  Treat as immutable after construction."""

    graph: GraphView
    t_max: float
    seed: int
    lam_max: float          # generation rate per directed pair
    r_max: float            # generation rate per site
    flip_rate: float        # candidate rate per edge
    times: np.ndarray       # float64, strictly increasing
    kinds: np.ndarray       # int8
    idx: np.ndarray         # int32: directed pair / site / edge
    marks: np.ndarray       # float64 in [0,1)

    @property
    def n_events(self) -> int:
        return len(self.times)

    @cached_property
    def _lists(self):
        # plain-list views for the event loops; built once per timeline
        return (self.times.tolist(), self.kinds.tolist(),
                self.idx.tolist(), self.marks.tolist())


@dataclass(frozen=True)
class TimelineView:
    """Read-only thinned and/or time-reversed view of a Timeline."""

    base: Timeline
    lam: float                  # active arrow rate, <= base.lam_max
    r: float                    # active recovery rate, <= base.r_max
    anchor: float | None = None     # reversal anchor t*, None if never reversed
    is_reversed: bool = False

    @property
    def graph(self) -> GraphView:
        return self.base.graph

    @property
    def t_max(self) -> float:
        if self.anchor is not None:
            return self.anchor
        return self.base.t_max

    @property
    def lam_frac(self) -> float:
        if self.base.lam_max <= 0.0:
            return 1.0
        return self.lam / self.base.lam_max

    @property
    def r_frac(self) -> float:
        if self.base.r_max <= 0.0:
            return 1.0
        return self.r / self.base.r_max


def build_timeline(g: GraphView, lam_max: float, r: float, flip_rate: float,
                   t_max: float, seed: int, *,
                   max_events: int = DEFAULT_EVENT_BUDGET) -> Timeline:
    """Generate the full event table for one window.

    Draw order is fixed (arrows, then recoveries, then flip candidates; for
    each kind: per-stream Poisson counts, then times, then marks), so equal
    inputs give bit-identical tables.  Events are globally sorted by time
    with ties broken by target index and then kind, and any residual ties are
    separated by one float ulp, so downstream code may assume strictly
    increasing timestamps.
    """
    if lam_max < 0 or r < 0 or flip_rate < 0:
        raise ValueError("rates must be nonnegative")
    if t_max <= 0:
        raise ValueError("t_max must be positive")
    expected = (lam_max * 2 * g.n_edges + r * g.n_sites + flip_rate * g.n_edges) * t_max
    if expected > max_events:
        raise SizingError(
            f"expected event count (lam_max*2|E| + r*|V| + Q*|E|)*T = {expected:.3g} "
            f"exceeds the event budget {max_events}")

    rng = np.random.default_rng(seed & _M64)
    blocks = []
    for kind, n_streams, rate in ((KIND_ARROW, 2 * g.n_edges, lam_max),
                                  (KIND_RECOVERY, g.n_sites, r),
                                  (KIND_FLIP, g.n_edges, flip_rate)):
        counts = rng.poisson(rate * t_max, n_streams) if rate > 0 else np.zeros(n_streams, dtype=np.int64)
        total = int(counts.sum())
        times = rng.random(total) * t_max
        marks = rng.random(total)
        ids = np.repeat(np.arange(n_streams, dtype=np.int32), counts)
        kinds = np.full(total, kind, dtype=np.int8)
        blocks.append((times, kinds, ids, marks))

    times = np.concatenate([b[0] for b in blocks])
    kinds = np.concatenate([b[1] for b in blocks])
    ids = np.concatenate([b[2] for b in blocks])
    marks = np.concatenate([b[3] for b in blocks])

    order = np.lexsort((kinds, ids, times))
    times = times[order]
    kinds = kinds[order]
    ids = ids[order]
    marks = marks[order]

    if len(times) and (times[0] <= 0.0 or np.any(np.diff(times) <= 0.0)):
        prev = 0.0
        for i in range(len(times)):
            if times[i] <= prev:
                times[i] = np.nextafter(prev, np.inf)
            prev = times[i]

    return Timeline(graph=g, t_max=float(t_max), seed=int(seed),
                    lam_max=float(lam_max), r_max=float(r), flip_rate=float(flip_rate),
                    times=times, kinds=kinds, idx=ids, marks=marks)


def thin_view(tl, lam_prime: float, r_prime: float | None = None) -> TimelineView:
    """View in which an arrow is active iff its mark < lam_prime/lam_max.

    Views at nested rates have nested active sets, which realizes the
    monotone couplings in the infection and recovery rates.  Up-thinning is
    rejected: the view rate may not exceed the generation rate.
    """
    base, lam_cap, r_cap, anchor, rev = _unpack(tl)
    if lam_prime < 0 or lam_prime > lam_cap + 1e-12:
        raise ValueError(f"cannot thin to lam={lam_prime}: generation rate is {lam_cap}")
    if r_prime is None:
        r_prime = r_cap
    if r_prime < 0 or r_prime > r_cap + 1e-12:
        raise ValueError(f"cannot thin to r={r_prime}: generation rate is {r_cap}")
    return TimelineView(base=base, lam=float(min(lam_prime, lam_cap)),
                        r=float(min(r_prime, r_cap)), anchor=anchor, is_reversed=rev)


def reverse_view(tl, t_star: float) -> TimelineView:
    """Time-reversed view at anchor t*: an event at u <= t* appears at t* - u
    with arrow directions flipped.  Reversing twice at the same anchor replays
    the original order on [0, t*]."""
    base, lam, r, anchor, rev = _unpack(tl)
    if t_star <= 0 or t_star > base.t_max + 1e-12:
        raise ValueError(f"reversal anchor {t_star} outside (0, {base.t_max}]")
    if anchor is not None and abs(anchor - t_star) > 1e-12:
        raise ValueError("re-reversal must use the same anchor")
    return TimelineView(base=base, lam=lam, r=r, anchor=float(t_star), is_reversed=not rev)


def _unpack(tl):
    if isinstance(tl, Timeline):
        return tl, tl.lam_max, tl.r_max, None, False
    if isinstance(tl, TimelineView):
        return tl.base, tl.lam, tl.r, tl.anchor, tl.is_reversed
    raise TypeError(f"expected Timeline or TimelineView, got {type(tl).__name__}")


def event_feed(tl):
    """Normalize a Timeline or view into (times, kinds, idx, marks, lam_frac,
    r_frac, horizon) plain-list form for the event loops.

    For reversed views the arrays are materialized with times mapped to
    t* - u, order reversed, and arrow pair ids flipped to the opposite
    orientation; recovery and flip events keep their type and target.
    """
    base, lam, r, anchor, rev = _unpack(tl)
    lam_frac = 1.0 if base.lam_max <= 0 else lam / base.lam_max
    r_frac = 1.0 if base.r_max <= 0 else r / base.r_max
    times_l, kinds_l, idx_l, marks_l = base._lists
    if not rev:
        if anchor is None:
            return times_l, kinds_l, idx_l, marks_l, lam_frac, r_frac, base.t_max
        hi = int(np.searchsorted(base.times, anchor, side="right"))
        return (times_l[:hi], kinds_l[:hi], idx_l[:hi], marks_l[:hi],
                lam_frac, r_frac, anchor)
    t_star = anchor
    hi = int(np.searchsorted(base.times, t_star, side="right"))
    rtimes, rkinds, ridx, rmarks = [], [], [], []
    for i in range(hi - 1, -1, -1):
        rtimes.append(t_star - times_l[i])
        k = kinds_l[i]
        rkinds.append(k)
        j = idx_l[i]
        ridx.append(j ^ 1 if k == KIND_ARROW else j)
        rmarks.append(marks_l[i])
    return rtimes, rkinds, ridx, rmarks, lam_frac, r_frac, t_star


def to_ndjson(tl: Timeline) -> str:
    """One event per line; byte-stable across platforms for a given seed."""
    g = tl.graph
    out = []
    for t, k, j, u in zip(tl.times.tolist(), tl.kinds.tolist(),
                          tl.idx.tolist(), tl.marks.tolist()):
        rec = {"t": t, "kind": _KIND_NAMES[k], "mark": u}
        if k == KIND_ARROW:
            rec["src"] = g.dir_src[j]
            rec["dst"] = g.dir_dst[j]
        elif k == KIND_RECOVERY:
            rec["site"] = j
        else:
            rec["edge"] = j
        out.append(json.dumps(rec, sort_keys=True, separators=(",", ":")))
    return "\n".join(out) + ("\n" if out else "")
