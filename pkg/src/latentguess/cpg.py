"""Conditional password guessing: invert a template, sample around it,
keep the guesses that satisfy the template.

The sampling loop runs until `n` unique coherent guesses have been
collected or the attempt budget is exhausted; zero coherent samples
within budget is a valid (empty) result, not an error.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import charspace as cs
from . import cwae
from .latent import Pivot, sample

# Sampling is chunked so the decoder runs on large batches.
_CHUNK = 2048


@dataclass(frozen=True)
class CpgRequest:
    template: str  # internal form (alphabet wildcard symbol)
    n: int
    sigma: float = 0.8
    max_attempts: int | None = None  # None: 100 * n
    dedup: bool = True

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if self.sigma <= 0:
            raise ValueError("sigma must be > 0")
        if self.max_attempts is not None and self.max_attempts < self.n:
            raise ValueError("max_attempts must be >= n")

    @property
    def attempts_cap(self) -> int:
        return 100 * self.n if self.max_attempts is None else self.max_attempts


@dataclass
class CpgResult:
    guesses: list[str]  # unique, insertion-ordered, all matching the template
    attempts_used: int
    coherence_rate: float


def cpg_attack(m: cwae.ModelParams, req: CpgRequest, rng: np.random.Generator) -> CpgResult:
    """Localized conditional generation around the inverted template."""
    a = m.alphabet
    t = req.template
    if not a.is_valid_template(t, m.config.max_len):
        raise ValueError("template over-length or outside the alphabet")
    center = cwae.encode_latent(m, t)
    pivot = Pivot(center, req.sigma)

    seen: dict[str, None] = {}
    out: list[str] = []
    raw = 0
    coherent = 0
    while len(out) < req.n and raw < req.attempts_cap:
        chunk = min(_CHUNK, req.attempts_cap - raw)
        z = sample(pivot, rng, size=chunk).astype(np.float32)
        for x in cwae.generate_batch(m, z):
            raw += 1
            if not cs.matches(x, t, a):
                continue
            coherent += 1
            if req.dedup:
                if x in seen:
                    continue
                seen[x] = None
            out.append(x)
            if len(out) >= req.n:
                break
    rate = coherent / raw if raw else 0.0
    return CpgResult(guesses=out, attempts_used=raw, coherence_rate=rate)
