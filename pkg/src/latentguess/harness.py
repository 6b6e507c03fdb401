"""Experiment scaffolding: leak files, train/test splits, biased-template
test sets, the static baseline attack, guess-stream deduplication, and
throughput measurement.

Leak files are UTF-8, one password per line, optionally "count<TAB>password".
Lines that are empty, over-length, or (with a pre-fixed alphabet) contain
foreign characters are skipped and counted.
"""

from __future__ import annotations

import hashlib
import math
import time
from dataclasses import dataclass, field
from typing import Iterable, Iterator

import numpy as np

from . import charspace as cs
from . import cwae
from . import dpg as _dpg
from .latent import Prior, sample
from .trace import AttackTrace

__all__ = [
    "LeakDataset", "load_leak", "split", "derive_template",
    "BiasedTestSet", "TESTSET_CLASSES", "scale_class_bounds", "build_biased_testsets",
    "static_attack", "BloomFilter", "dedup_stream", "throughput_bench",
    "levenshtein", "AttackTrace",
]


@dataclass
class LeakDataset:
    counts: dict[str, int]  # password -> occurrence count, insertion-ordered
    source: str
    alphabet: cs.Alphabet
    max_len: int
    skipped: int = 0

    @property
    def n_unique(self) -> int:
        return len(self.counts)

    @property
    def n_total(self) -> int:
        return sum(self.counts.values())

    @property
    def passwords(self) -> list[str]:
        return list(self.counts)

    def expanded(self) -> list[str]:
        """Passwords repeated by count (training views the raw multiset)."""
        out = []
        for p, c in self.counts.items():
            out.extend([p] * c)
        return out

    def length_stats(self) -> dict[str, float]:
        lens = np.array([len(p) for p in self.counts], dtype=np.float64)
        return {"min": float(lens.min()), "max": float(lens.max()),
                "mean": float(lens.mean())}


def _iter_lines(lines: Iterable[str]) -> Iterator[tuple[str, int]]:
    for line in lines:
        line = line.rstrip("\r\n")
        if not line:
            yield "", 0
            continue
        if "\t" in line:
            head, tail = line.split("\t", 1)
            try:
                yield tail, int(head)
                continue
            except ValueError:
                pass
        yield line, 1


def load_leak(path, max_len: int, alphabet: cs.Alphabet | None = None,
              source: str | None = None) -> LeakDataset:
    """Read a leak file; derive the alphabet from it unless one is fixed."""
    rows: list[tuple[str, int]] = []
    skipped = 0
    with open(path, "r", encoding="utf-8", errors="strict") as f:
        for pw, count in _iter_lines(f):
            if not pw or count < 1 or len(pw) > max_len:
                skipped += 1
                continue
            rows.append((pw, count))
    if alphabet is None:
        if not rows:
            raise ValueError("empty corpus")
        alphabet = cs.build_alphabet(pw for pw, _ in rows)
    counts: dict[str, int] = {}
    for pw, count in rows:
        if not alphabet.is_valid_password(pw, max_len):
            skipped += 1
            continue
        counts[pw] = counts.get(pw, 0) + count
    if not counts:
        raise ValueError("empty corpus")
    return LeakDataset(counts=counts, source=source or str(path),
                       alphabet=alphabet, max_len=max_len, skipped=skipped)


def split(d: LeakDataset, ratio: float, seed: int) -> tuple[LeakDataset, LeakDataset]:
    """Unique-password split: train gets round(ratio * n) passwords, test the
    rest; no password appears on both sides."""
    if not 0.0 < ratio < 1.0:
        raise ValueError("ratio must be in (0, 1)")
    pws = d.passwords
    if len(pws) < 2:
        raise ValueError("need at least 2 unique passwords to split")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(len(pws))
    n_train = int(round(ratio * len(pws)))
    n_train = min(max(n_train, 1), len(pws) - 1)
    train_idx = set(perm[:n_train].tolist())
    train_counts = {pws[i]: d.counts[pws[i]] for i in sorted(train_idx)}
    test_counts = {pws[i]: d.counts[pws[i]] for i in range(len(pws)) if i not in train_idx}
    mk = lambda c, tag: LeakDataset(counts=c, source=f"{d.source}[{tag}]",
                                    alphabet=d.alphabet, max_len=d.max_len)
    return mk(train_counts, "train"), mk(test_counts, "test")


def derive_template(x: str, p: float, a: cs.Alphabet, rng: np.random.Generator) -> str:
    """Independently wildcard each character of x with probability p."""
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must be in [0, 1]")
    mask = rng.random(len(x)) < p
    return "".join(a.wildcard_symbol if m else c for c, m in zip(x, mask))


@dataclass(frozen=True)
class BiasedTestSet:
    template: str
    members: tuple[str, ...]
    class_label: str


# Full-scale class bounds on the match-set cardinality, keyed rarest-last.
TESTSET_CLASSES: dict[str, tuple[int, int]] = {
    "common": (1000, 15000),
    "uncommon": (50, 150),
    "rare": (10, 15),
    "super-rare": (1, 5),
}
_REFERENCE_CORPUS_SIZE = 60_000_000


def scale_class_bounds(n_unique: int,
                       reference: int = _REFERENCE_CORPUS_SIZE) -> dict[str, tuple[int, int]]:
    """Shrink the class bounds by corpus size (each bound floored at 1).

    Small corpora collapse neighbouring classes onto the same interval;
    classification below resolves overlaps rarest-first.
    """
    ratio = n_unique / reference
    out = {}
    for name, (lo, hi) in TESTSET_CLASSES.items():
        s_lo = max(1, int(round(lo * ratio)))
        s_hi = max(s_lo, int(round(hi * ratio)))
        out[name] = (s_lo, s_hi)
    return out


def classify_cardinality(n: int, bounds: dict[str, tuple[int, int]]) -> str | None:
    for name in reversed(list(bounds)):  # rarest-first
        lo, hi = bounds[name]
        if lo <= n <= hi:
            return name
    return None


def build_biased_testsets(
    d: LeakDataset,
    p: float,
    per_class: int,
    rng: np.random.Generator,
    min_observable: int = 4,
    min_wildcards: int = 5,
    bounds: dict[str, tuple[int, int]] | None = None,
    draw_cap: int | None = None,
) -> dict[str, list[BiasedTestSet]]:
    """Rejection-sample templates from the corpus until every class holds
    `per_class` sets (or the draw cap runs out).

    A template is derived from a sampled ground-truth password, must keep
    at least `min_observable` characters and at least `min_wildcards`
    wildcards, and its member set is collected by an exhaustive scan over
    the unique passwords. Classes that stay empty are a diagnostic, not an
    error.
    """
    a = d.alphabet
    if bounds is None:
        bounds = scale_class_bounds(d.n_unique)
    pws = d.passwords
    eligible = [x for x in pws if len(x) >= min_observable + min_wildcards]
    out: dict[str, list[BiasedTestSet]] = {name: [] for name in bounds}
    if not eligible:
        return out
    seen_templates: set[str] = set()
    cap = draw_cap if draw_cap is not None else 200 * per_class * len(bounds)
    wild = a.wildcard_symbol
    for _ in range(cap):
        if all(len(v) >= per_class for v in out.values()):
            break
        x = eligible[int(rng.integers(0, len(eligible)))]
        t = derive_template(x, p, a, rng)
        n_wild = t.count(wild)
        if n_wild < min_wildcards or len(t) - n_wild < min_observable:
            continue
        if t in seen_templates:
            continue
        seen_templates.add(t)
        members = tuple(pw for pw in pws if cs.matches(pw, t, a))
        label = classify_cardinality(len(members), bounds)
        if label is None or len(out[label]) >= per_class:
            continue
        out[label].append(BiasedTestSet(template=t, members=members, class_label=label))
    return out


def static_attack(m: cwae.ModelParams, target, budget: int, rng: np.random.Generator,
                  dedup: bool = False, trace_stride: int = 1000,
                  seed: int | None = None) -> AttackTrace:
    """Prior-only sampling attack; returns the match curve."""
    trace, _ = _dpg.static_attack(m, target, budget, rng, dedup=dedup,
                                  trace_stride=trace_stride, seed=seed)
    return trace


class BloomFilter:
    """Plain Bloom filter sized from expected insertions and fp rate.

    Double hashing over a 128-bit blake2b digest; no false negatives.
    """

    def __init__(self, capacity: int, fp_rate: float = 0.01):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        if not 0.0 < fp_rate < 1.0:
            raise ValueError("fp_rate must be in (0, 1)")
        self.capacity = capacity
        self.fp_rate = fp_rate
        self.n_bits = max(8, int(math.ceil(-capacity * math.log(fp_rate) / (math.log(2) ** 2))))
        self.n_hashes = max(1, int(round(self.n_bits / capacity * math.log(2))))
        self._bits = bytearray((self.n_bits + 7) // 8)
        self.inserted = 0

    def _indices(self, item: str) -> list[int]:
        digest = hashlib.blake2b(item.encode("utf-8"), digest_size=16).digest()
        h1 = int.from_bytes(digest[:8], "little")
        h2 = int.from_bytes(digest[8:], "little") | 1
        return [(h1 + i * h2) % self.n_bits for i in range(self.n_hashes)]

    def __contains__(self, item: str) -> bool:
        return all(self._bits[i >> 3] & (1 << (i & 7)) for i in self._indices(item))

    def add(self, item: str) -> None:
        for i in self._indices(item):
            self._bits[i >> 3] |= 1 << (i & 7)
        self.inserted += 1

    def add_if_new(self, item: str) -> bool:
        """Insert unless (probably) present; True when the item was admitted."""
        idx = self._indices(item)
        if all(self._bits[i >> 3] & (1 << (i & 7)) for i in idx):
            return False
        for i in idx:
            self._bits[i >> 3] |= 1 << (i & 7)
        self.inserted += 1
        return True

    def fill_ratio(self) -> float:
        ones = sum(bin(b).count("1") for b in self._bits)
        return ones / self.n_bits


def dedup_stream(guesses: Iterable[str], f: BloomFilter,
                 on_saturation=None) -> Iterator[str]:
    """Filter repeated guesses out of a stream.

    Emits each distinct guess at most once; a unique guess can be falsely
    dropped with probability bounded by the filter's fp rate. Fires
    `on_saturation(fill)` once if more than half the bits fill up.
    """
    warned = False
    check_every = max(1, f.capacity // 4)
    seen_n = 0
    for g in guesses:
        seen_n += 1
        if f.add_if_new(g):
            yield g
        if not warned and seen_n % check_every == 0:
            fill = f.fill_ratio()
            if fill > 0.5:
                warned = True
                if on_saturation is not None:
                    on_saturation(fill)


@dataclass
class BenchReport:
    n_guesses: int
    seconds: float
    guesses_per_second: float
    filtered: bool
    emitted: int
    machine: str


def throughput_bench(m: cwae.ModelParams, n: int, sink_path, filtered: bool = False,
                     rng: np.random.Generator | None = None,
                     batch: int = 4096) -> BenchReport:
    """Wall-clock guess generation rate, writing guesses to a sink file."""
    import platform

    if n < 1:
        raise ValueError("n must be >= 1")
    if rng is None:
        rng = np.random.default_rng(0)
    prior = Prior(m.config.latent_dim)
    bloom = BloomFilter(capacity=n, fp_rate=0.01) if filtered else None
    emitted = 0
    t0 = time.perf_counter()
    with open(sink_path, "w", encoding="utf-8", newline="\n") as sink:
        done = 0
        while done < n:
            b = min(batch, n - done)
            z = sample(prior, rng, size=b).astype(np.float32)
            guesses = cwae.generate_batch(m, z)
            done += b
            if bloom is None:
                sink.write("\n".join(guesses) + "\n")
                emitted += b
            else:
                fresh = [g for g in guesses if bloom.add_if_new(g)]
                if fresh:
                    sink.write("\n".join(fresh) + "\n")
                emitted += len(fresh)
    seconds = time.perf_counter() - t0
    return BenchReport(
        n_guesses=n,
        seconds=seconds,
        guesses_per_second=n / seconds if seconds > 0 else float("inf"),
        filtered=filtered,
        emitted=emitted,
        machine=f"{platform.machine()} {platform.processor()}".strip(),
    )


def levenshtein(s: str, t: str) -> int:
    """Edit distance (insert/delete/substitute, unit costs)."""
    if s == t:
        return 0
    if not s or not t:
        return len(s) + len(t)
    prev = list(range(len(t) + 1))
    for i, cs_ in enumerate(s, 1):
        cur = [i]
        for j, ct in enumerate(t, 1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (cs_ != ct)))
        prev = cur
    return prev[-1]
