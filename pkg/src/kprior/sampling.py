"""Monte-Carlo kernel-prior sampling.

Each round draws candidate kernels from a latent proposal, scores every
candidate by the reciprocal of its low-resolution reconstruction error (plus
a small floor), and averages the candidates under mean-normalized weights
into a prior kernel. A random-walk proposal around the best latent so far,
with an annealed step, turns successive rounds into a Markov chain that
concentrates as the reconstruction improves.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace

import numpy as np

from . import kernels
from .degradation import DegradeConfig, residual

MOTION_NUM_STEPS = 32
MOTION_WIGGLE_RANGE = (0.1, 1.5)


def motion_length_range(side: int) -> tuple[float, float]:
    return (0.25 * side, 0.75 * side)


@dataclass(frozen=True)
class SamplerConfig:
    num_samples: int = 5
    family: str = "gaussian"  # "gaussian" or "motion"
    delta_floor: float = 1e-6
    proposal: str = "random_walk"  # "independent" or "random_walk"
    walk_scale: float | None = None  # None: family default, see default_walk_scale
    anneal: float = 0.99
    scale: int = 2
    side: int = 11

    def __post_init__(self):
        if self.num_samples < 0:
            raise ValueError(f"num_samples must be >= 0, got {self.num_samples}")
        if self.delta_floor <= 0:
            raise ValueError(f"delta_floor must be positive, got {self.delta_floor}")
        if self.family not in ("gaussian", "motion"):
            raise ValueError(f"unknown kernel family {self.family!r}")
        if self.proposal not in ("independent", "random_walk"):
            raise ValueError(f"unknown proposal {self.proposal!r}")
        if not 0.0 < self.anneal <= 1.0:
            raise ValueError(f"anneal must lie in (0, 1], got {self.anneal}")


@dataclass(frozen=True)
class SamplerState:
    last_best_latent: object = None
    iteration: int = 0
    walk_scale: float = 0.0


def default_walk_scale(cfg: SamplerConfig) -> float:
    """Half the dominant latent-range width: wide enough to explore early."""
    if cfg.family == "gaussian":
        lo, hi = kernels.sigma_range(cfg.scale)
        return 0.5 * (hi - lo)
    lo, hi = motion_length_range(cfg.side)
    return 0.5 * (hi - lo)


def initial_state(cfg: SamplerConfig) -> SamplerState:
    walk = cfg.walk_scale if cfg.walk_scale is not None else default_walk_scale(cfg)
    return SamplerState(None, 0, walk)


def _synthesize(latent, cfg: SamplerConfig) -> np.ndarray:
    if cfg.family == "gaussian":
        return kernels.gaussian_kernel(latent, cfg.side)
    return kernels.motion_kernel(latent, cfg.side)


def draw_independent_latent(cfg: SamplerConfig, rng: np.random.Generator):
    if cfg.family == "gaussian":
        lo, hi = kernels.sigma_range(cfg.scale)
        return kernels.GaussianLatent(
            sigma1=rng.uniform(lo, hi),
            sigma2=rng.uniform(lo, hi),
            theta=rng.uniform(0.0, math.pi),
        )
    llo, lhi = motion_length_range(cfg.side)
    wlo, whi = MOTION_WIGGLE_RANGE
    return kernels.MotionLatent(
        seed=int(rng.integers(2**31)),
        length_scale=rng.uniform(llo, lhi),
        wiggle=rng.uniform(wlo, whi),
        num_steps=MOTION_NUM_STEPS,
    )


def _walk(latent, step: float, cfg: SamplerConfig, rng: np.random.Generator):
    if cfg.family == "gaussian":
        lo, hi = kernels.sigma_range(cfg.scale)
        # the angle wraps instead of clamping: it is periodic in pi
        return kernels.GaussianLatent(
            sigma1=float(np.clip(latent.sigma1 + step * rng.standard_normal(), lo, hi)),
            sigma2=float(np.clip(latent.sigma2 + step * rng.standard_normal(), lo, hi)),
            theta=float((latent.theta + step * rng.standard_normal()) % math.pi),
        )
    llo, lhi = motion_length_range(cfg.side)
    wlo, whi = MOTION_WIGGLE_RANGE
    # the trajectory seed has no local structure, so the walk keeps it and
    # perturbs only the continuous coordinates
    return kernels.MotionLatent(
        seed=latent.seed,
        length_scale=float(np.clip(latent.length_scale + step * rng.standard_normal(), llo, lhi)),
        wiggle=float(np.clip(latent.wiggle + step * rng.standard_normal(), wlo, whi)),
        num_steps=latent.num_steps,
    )


def sample_candidates(state: SamplerState, cfg: SamplerConfig, rng: np.random.Generator):
    """Draw ``cfg.num_samples`` latents and synthesize their kernels."""
    if cfg.num_samples < 1:
        raise ValueError("sampling requires num_samples >= 1")
    use_walk = cfg.proposal == "random_walk" and state.last_best_latent is not None
    out = []
    for _ in range(cfg.num_samples):
        if use_walk:
            latent = _walk(state.last_best_latent, state.walk_scale, cfg, rng)
        else:
            latent = draw_independent_latent(cfg, rng)
        out.append((latent, _synthesize(latent, cfg)))
    return out


def candidate_losses(cands, x, y, cfg: SamplerConfig) -> np.ndarray:
    """Floored reconstruction loss of each candidate kernel against (x, y)."""
    dcfg = DegradeConfig(scale=cfg.scale)
    losses = np.empty(len(cands))
    for i, (_, k) in enumerate(cands):
        loss, _ = residual(x, k, y, dcfg)
        losses[i] = loss + cfg.delta_floor
    return losses


def _weights_from_losses(losses: np.ndarray) -> np.ndarray:
    raw = np.where(np.isfinite(losses), 1.0 / losses, 0.0)
    bad = ~np.isfinite(losses)
    if bad.any():
        warnings.warn(f"discarded {int(bad.sum())} candidate(s) with non-finite loss")
    if not raw.any():
        raise ValueError("all candidates produced non-finite losses")
    kept = raw > 0
    weights = np.zeros(len(losses))
    weights[kept] = raw[kept] / raw[kept].mean()
    return weights


def candidate_weights(cands, x, y, cfg: SamplerConfig) -> np.ndarray:
    """Reciprocal-loss weights, rescaled to mean one over the finite entries.

    Candidates with a non-finite loss get weight zero (with a warning); if
    every candidate is discarded this raises.
    """
    return _weights_from_losses(candidate_losses(cands, x, y, cfg))


def kernel_prior(cands, weights, cfg: SamplerConfig, state: SamplerState):
    """Weighted candidate average, renormalized to the simplex; advances the chain."""
    if len(cands) == 0:
        raise ValueError("no candidates")
    weights = np.asarray(weights, dtype=np.float64)
    if weights.shape != (len(cands),):
        raise ValueError(f"{len(cands)} candidates but weights shape {weights.shape}")
    stacked = np.stack([k for _, k in cands])
    prior = kernels.normalize_kernel((weights[:, None, None] * stacked).mean(axis=0))
    best = int(np.argmax(weights))
    new_state = replace(
        state,
        last_best_latent=cands[best][0],
        iteration=state.iteration + 1,
        walk_scale=state.walk_scale * cfg.anneal,
    )
    return prior, new_state


def sample_prior(x, y, state: SamplerState, cfg: SamplerConfig, rng: np.random.Generator):
    """One full sampling round: candidates, weights, prior kernel, diagnostics."""
    cands = sample_candidates(state, cfg, rng)
    losses = candidate_losses(cands, x, y, cfg)
    weights = _weights_from_losses(losses)
    prior, new_state = kernel_prior(cands, weights, cfg, state)
    best = int(np.argmax(weights))
    info = {
        "losses": losses.tolist(),
        "weights": weights.tolist(),
        "best_index": best,
        "best_latent": _latent_dict(cands[best][0]),
        "walk_scale": state.walk_scale,
    }
    return prior, new_state, info


def _latent_dict(latent) -> dict:
    if isinstance(latent, kernels.GaussianLatent):
        return {"sigma1": latent.sigma1, "sigma2": latent.sigma2, "theta": latent.theta}
    return {
        "seed": latent.seed,
        "length_scale": latent.length_scale,
        "wiggle": latent.wiggle,
        "num_steps": latent.num_steps,
    }
