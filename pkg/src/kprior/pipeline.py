"""The alternating estimation loop and the synthetic-experiment tooling.

Each round: sample a prior kernel from the candidate chain, push the
generator net toward it and toward data consistency, emit the current kernel,
then let the restorer refine the image under that kernel. The loop owns all
randomness through a single seeded generator, so a run is a pure function of
its configuration.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import kernelnet, kernels, metrics, sampling
from .degradation import DegradeConfig, degrade, residual
from .estimator import EstimatorConfig, estimate_kernel, langevin_update
from .kernelnet import KernelNetParams
from .restorer import RestorerConfig, init_image, restore_step
from .sampling import SamplerConfig, SamplerState

DEFAULT_NET_HIDDEN = (1000, 1000)
DEFAULT_NET_INPUT = 200


@dataclass(frozen=True)
class RunConfig:
    scale: int = 2
    iterations: int = 300
    side: int | None = None  # default: 4 * scale + 3
    seed: int = 0
    trace: bool = False
    net_dims: tuple[int, ...] | None = None
    sampler: SamplerConfig | None = None
    estimator: EstimatorConfig | None = None
    restorer: RestorerConfig | None = None


@dataclass
class PipelineState:
    t: int
    x: np.ndarray
    params: KernelNetParams
    prior_kernel: np.ndarray | None
    kernel: np.ndarray
    sampler_state: SamplerState
    loss_history: list = field(default_factory=list)


def resolve_config(cfg: RunConfig) -> RunConfig:
    """Fill defaults and force sub-config geometry to the run-level values."""
    if cfg.iterations < 1:
        raise ValueError(f"iterations must be >= 1, got {cfg.iterations}")
    side = cfg.side if cfg.side is not None else kernels.standard_side(cfg.scale)
    if side % 2 == 0:
        raise ValueError(f"kernel side must be odd, got {side}")

    sampler = cfg.sampler if cfg.sampler is not None else SamplerConfig()
    sampler = replace(sampler, scale=cfg.scale, side=side)
    if sampler.walk_scale is None:
        sampler = replace(sampler, walk_scale=sampling.default_walk_scale(sampler))

    est = cfg.estimator if cfg.estimator is not None else EstimatorConfig()
    est = replace(est, scale=cfg.scale)

    rest = cfg.restorer if cfg.restorer is not None else RestorerConfig()
    rest = replace(rest, scale=cfg.scale)

    net_dims = cfg.net_dims
    if net_dims is None:
        net_dims = (DEFAULT_NET_INPUT, *DEFAULT_NET_HIDDEN, side * side)
    elif net_dims[-1] != side * side:
        raise ValueError(f"net output dim {net_dims[-1]} != side^2 = {side * side}")

    return replace(
        cfg, side=side, net_dims=tuple(net_dims), sampler=sampler, estimator=est, restorer=rest
    )


def run(y, cfg: RunConfig, ground_truth=None, restore_fn=None, trace_path=None):
    """Run the full alternating loop on a low-resolution observation.

    ``ground_truth`` is an optional ``(hr_image, true_kernel)`` pair used only
    for metrics (either entry may be None). ``restore_fn(x, y, kernel) -> x``
    replaces the built-in restorer when given. Returns
    ``(x_final, kernel_final, MetricReport, trace_rows)``.
    """
    started = time.perf_counter()
    cfg = resolve_config(cfg)
    rng = np.random.default_rng(cfg.seed)
    net_seed = int(rng.integers(2**31))

    y = np.asarray(y, dtype=np.float64)
    est_cfg = cfg.estimator
    state = PipelineState(
        t=0,
        x=init_image(y, cfg.scale, cfg.restorer),
        params=kernelnet.init_params(net_seed, cfg.net_dims),
        prior_kernel=None,
        kernel=None,
        sampler_state=sampling.initial_state(cfg.sampler),
    )
    state.kernel = estimate_kernel(state.params)
    opt_state = None
    use_sampler = cfg.sampler.num_samples >= 1
    trace_rows = []

    for t in range(1, cfg.iterations + 1):
        prev = (state.x, state.params, opt_state, state.kernel)
        rks_info = {}
        try:
            if use_sampler:
                state.prior_kernel, state.sampler_state, rks_info = sampling.sample_prior(
                    state.x, y, state.sampler_state, cfg.sampler, rng
                )
            params, opt_state, pke_info = langevin_update(
                state.params, state.x, y, state.prior_kernel, est_cfg, opt_state
            )
            k = estimate_kernel(params)
            if restore_fn is not None:
                x = restore_fn(state.x, y, k)
            else:
                x = restore_step(state.x, y, k, cfg.restorer)
            loss, _ = residual(x, k, y, DegradeConfig(scale=cfg.scale))
            if not math.isfinite(loss):
                raise FloatingPointError("non-finite data loss")
        except FloatingPointError:
            # roll back to the last finite iterate and halve both update steps
            state.x, state.params, opt_state, state.kernel = prev
            est_cfg = replace(
                est_cfg, step_data=0.5 * est_cfg.step_data, step_prior=0.5 * est_cfg.step_prior
            )
            loss = state.loss_history[-1] if state.loss_history else float("inf")
            state.t = t
            state.loss_history.append(loss)
            continue

        state.t, state.x, state.params, state.kernel = t, x, params, k
        state.loss_history.append(loss)
        if cfg.trace:
            row = {"t": t, "data_loss": loss, **{f"pke_{k_}": v for k_, v in pke_info.items()}}
            if rks_info:
                row["rks"] = rks_info
            if ground_truth is not None and ground_truth[0] is not None:
                row["image_psnr"] = metrics.psnr(x, ground_truth[0])
            trace_rows.append(row)

    report = _report(state, y, ground_truth, time.perf_counter() - started)
    if trace_path is not None and cfg.trace:
        with open(trace_path, "w") as f:
            for row in trace_rows:
                f.write(json.dumps(row) + "\n")
    return state.x, state.kernel, report, trace_rows


def _report(state: PipelineState, y, ground_truth, elapsed: float) -> metrics.MetricReport:
    image_psnr = float("nan")
    image_ssim = float("nan")
    k_psnr = None
    if ground_truth is not None:
        hr, k_true = ground_truth
        if hr is not None:
            image_psnr = metrics.psnr(state.x, hr)
            image_ssim = metrics.ssim(state.x, hr)
        if k_true is not None:
            k_psnr = metrics.kernel_psnr(state.kernel, k_true)
    return metrics.MetricReport(image_psnr, image_ssim, k_psnr, elapsed)


def synth_instance(hr, family: str, scale: int, noise_sigma: float, seed: int):
    """Draw a random kernel of ``family`` and degrade ``hr`` into an observation.

    Returns ``(y, k_true, latent)``; reproducible bit-exactly for a fixed seed.
    """
    hr = np.asarray(hr, dtype=np.float64)
    side = kernels.standard_side(scale)
    rng = np.random.default_rng(seed)
    scfg = SamplerConfig(family=family, scale=scale, side=side)
    latent = sampling.draw_independent_latent(scfg, rng)
    k_true = kernels.gaussian_kernel(latent, side) if family == "gaussian" else kernels.motion_kernel(latent, side)
    y = degrade(hr, k_true, DegradeConfig(scale=scale, noise_sigma=noise_sigma), rng)
    return y, k_true, latent


def _lr_patch_matrix(plane: np.ndarray, side: int, scale: int) -> np.ndarray:
    """Rows are flipped HR windows so that prediction = matrix @ kernel.ravel()."""
    pad = side // 2
    padded = np.pad(plane, pad, mode="reflect")
    windows = np.lib.stride_tricks.sliding_window_view(padded, (side, side))
    windows = windows[::scale, ::scale]
    flipped = windows[:, :, ::-1, ::-1]
    return flipped.reshape(-1, side * side)


def grid_search_oracle(y, x_ref, scale: int, grid_resolution: int = 13, side: int | None = None):
    """Exhaustive Gaussian-latent search minimizing the reconstruction loss.

    Evaluates every (sigma1, sigma2, theta) grid point against ``x_ref`` and
    returns ``(kernel, loss)`` for the argmin. Independent of the estimation
    loop; used to calibrate attainable kernel quality on synthetic instances.
    """
    y = np.asarray(y, dtype=np.float64)
    x_ref = np.asarray(x_ref, dtype=np.float64)
    if side is None:
        side = kernels.standard_side(scale)
    lo, hi = kernels.sigma_range(scale)
    sigmas = np.linspace(lo, hi, grid_resolution)
    thetas = np.linspace(0.0, math.pi, grid_resolution, endpoint=False)

    latents = [
        kernels.GaussianLatent(s1, s2, th) for s1 in sigmas for s2 in sigmas for th in thetas
    ]
    bank = np.stack([kernels.gaussian_kernel(lat, side).ravel() for lat in latents])

    x_planes = [x_ref] if x_ref.ndim == 2 else [x_ref[:, :, c] for c in range(x_ref.shape[2])]
    y_planes = [y] if y.ndim == 2 else [y[:, :, c] for c in range(y.shape[2])]
    losses = np.zeros(len(latents))
    for xp, yp in zip(x_planes, y_planes):
        patches = _lr_patch_matrix(xp, side, scale)
        preds = patches @ bank.T
        losses += ((preds - yp.ravel()[:, None]) ** 2).sum(axis=0)

    best = int(np.argmin(losses))
    return kernels.gaussian_kernel(latents[best], side), float(losses[best])
