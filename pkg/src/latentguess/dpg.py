"""Dynamic password guessing: attack a target set from the prior, and once
a hot-start quota of matches has accumulated, resample from a growing
Gaussian mixture centered on the latent points of the matched passwords.

Every unique match contributes exactly one mixture component (matched
passwords leave the remaining set, so a re-guess never re-adds its latent
point). With the hot-start quota unreachable the run degenerates to a
static prior-sampling attack, drawing the exact same sample stream for
the same seed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import cwae
from .latent import LatentDistribution, Mixture, Prior, append_component, make_latent_distribution, sample
from .trace import AttackTrace

_CHUNK = 2048


@dataclass(frozen=True)
class DpgConfig:
    """alpha: hot-start quota — fraction of the target in (0, 1] (float) or
    an absolute match count (int); None disables adaptation entirely."""

    alpha: float | int | None = 0.10
    sigma: float = 0.35
    budget: int = 100_000
    dedup: bool = False
    trace_stride: int = 1000
    raw_cap_factor: int = 20  # dedup mode: stop after raw draws exceed factor * budget

    def __post_init__(self):
        if self.sigma <= 0:
            raise ValueError("sigma must be > 0")
        if self.budget < 1:
            raise ValueError("budget must be >= 1")
        if self.trace_stride < 1:
            raise ValueError("trace_stride must be >= 1")
        if isinstance(self.alpha, float) and not 0.0 < self.alpha <= 1.0:
            raise ValueError("fractional alpha must be in (0, 1]")
        if isinstance(self.alpha, int) and not isinstance(self.alpha, bool) and self.alpha < 1:
            raise ValueError("absolute alpha must be >= 1")

    def resolve_alpha(self, target_size: int) -> int | None:
        if self.alpha is None:
            return None
        if isinstance(self.alpha, int) and not isinstance(self.alpha, bool):
            return self.alpha
        return max(1, int(round(self.alpha * target_size)))


@dataclass
class DpgState:
    latents: np.ndarray  # [n_matched, k], in match order
    matched: list[str]
    remaining: set[str]
    distribution: LatentDistribution
    guesses_counted: int
    raw_draws: int
    hot_start_at: int | None  # guess index of the mixture switch, None if never
    dropped_overlength: int
    alpha_resolved: int | None


def dpg_attack(
    m: cwae.ModelParams,
    target: set[str] | list[str],
    cfg: DpgConfig,
    rng: np.random.Generator,
    seed: int | None = None,
) -> tuple[AttackTrace, DpgState]:
    """Run the feedback-adaptive attack against a plaintext target set."""
    max_len = m.config.max_len
    uniq = dict.fromkeys(target)  # dedupe, preserve order
    remaining = {x for x in uniq if len(x) <= max_len}
    dropped = len(uniq) - len(remaining)
    if not remaining:
        raise ValueError("target is empty (or entirely over-length)")
    alpha = cfg.resolve_alpha(len(remaining))

    k = m.config.latent_dim
    dist: LatentDistribution = Prior(k)
    zs: list[np.ndarray] = []
    matched: list[str] = []
    hot_start_at: int | None = None

    mode = "static" if alpha is None else "dpg"
    trace = AttackTrace(mode=mode, budget=cfg.budget, seed=seed)
    seen: set[str] | None = set() if cfg.dedup else None
    counted = 0
    raw = 0
    raw_cap = cfg.budget * cfg.raw_cap_factor if cfg.dedup else None

    while counted < cfg.budget:
        chunk = min(_CHUNK, cfg.budget - counted) if not cfg.dedup else _CHUNK
        z_batch = sample(dist, rng, size=chunk).astype(np.float32)
        guesses = cwae.generate_batch(m, z_batch)
        for z, x in zip(z_batch, guesses):
            raw += 1
            if cfg.dedup:
                if x in seen:
                    if raw_cap is not None and raw >= raw_cap:
                        break
                    continue
                seen.add(x)
            counted += 1
            hit = x in remaining
            if hit:
                remaining.discard(x)
                matched.append(x)
                zs.append(np.asarray(z, dtype=np.float64))
                if alpha is not None and len(matched) >= alpha:
                    if hot_start_at is None:
                        dist = make_latent_distribution(np.stack(zs), cfg.sigma)
                        hot_start_at = counted
                    else:
                        dist = append_component(dist, zs[-1])
            if hit or counted % cfg.trace_stride == 0 or counted == cfg.budget:
                trace.record(counted, len(matched))
            if counted >= cfg.budget:
                break
        else:
            if raw_cap is not None and raw >= raw_cap:
                break
            continue
        break

    if not trace.points or trace.points[-1][0] != counted:
        trace.record(counted, len(matched))
    state = DpgState(
        latents=np.stack(zs) if zs else np.zeros((0, k)),
        matched=matched,
        remaining=remaining,
        distribution=dist,
        guesses_counted=counted,
        raw_draws=raw,
        hot_start_at=hot_start_at,
        dropped_overlength=dropped,
        alpha_resolved=alpha,
    )
    return trace, state


def static_attack(
    m: cwae.ModelParams,
    target: set[str] | list[str],
    budget: int,
    rng: np.random.Generator,
    dedup: bool = False,
    trace_stride: int = 1000,
    seed: int | None = None,
) -> tuple[AttackTrace, DpgState]:
    """Prior-only sampling attack (the non-adaptive baseline)."""
    cfg = DpgConfig(alpha=None, sigma=1.0, budget=budget, dedup=dedup,
                    trace_stride=trace_stride)
    return dpg_attack(m, target, cfg, rng, seed=seed)


def sweep_dpg(
    m: cwae.ModelParams,
    target: set[str] | list[str],
    alphas: list[float | int],
    sigmas: list[float],
    budget: int,
    seeds: list[int],
    dedup: bool = False,
    trace_stride: int = 1000,
) -> list[dict]:
    """Full-factorial alpha x sigma sweep; one row per cell with per-seed
    final match counts and their mean/standard deviation."""
    if not alphas or not sigmas or not seeds:
        raise ValueError("grids and seeds must be non-empty")
    rows = []
    for alpha in alphas:
        for sigma in sigmas:
            finals = []
            for seed in seeds:
                cfg = DpgConfig(alpha=alpha, sigma=sigma, budget=budget,
                                dedup=dedup, trace_stride=trace_stride)
                trace, state = dpg_attack(m, target, cfg, np.random.default_rng(seed), seed=seed)
                finals.append(len(state.matched))
            arr = np.asarray(finals, dtype=np.float64)
            rows.append({
                "alpha": alpha,
                "sigma": sigma,
                "budget": budget,
                "seeds": list(seeds),
                "final_matches": finals,
                "mean": float(arr.mean()),
                "std": float(arr.std(ddof=1)) if len(finals) > 1 else 0.0,
            })
    return rows
