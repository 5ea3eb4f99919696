"""Kernel-network updates driven by data consistency and the sampled prior.

Each inner step combines two log-probability ascent directions: the gradient
of the negative reconstruction error of the observation, weighted by
``step_data``, and the gradient of the negative distance between the emitted
kernel and the current prior kernel, weighted by ``step_prior``. The prior
term is resampled every pipeline round, so it plays the role of the random
disturbance in a Langevin scheme while staying correlated with the kernel
parameters. ``plain`` applies the raw scaled sum; ``adam`` feeds the combined
gradient through a first/second-moment adaptive step, which is the default
because raw steps on a softmax-parameterized net are scale-sensitive.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernelnet
from .degradation import DegradeConfig, grad_wrt_kernel, residual
from .kernelnet import KernelNetGradient, KernelNetParams

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


@dataclass(frozen=True)
class EstimatorConfig:
    step_data: float = 0.005   # 0.5 * delta^2 with delta = 0.1
    step_prior: float = 0.1    # delta
    inner_steps: int = 1
    optimizer: str = "adam"    # "adam" or "plain"
    adam_lr: float = 5e-3
    scale: int = 2

    def __post_init__(self):
        if self.inner_steps < 1:
            raise ValueError(f"inner_steps must be >= 1, got {self.inner_steps}")
        if self.optimizer not in ("adam", "plain"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")


@dataclass(frozen=True)
class AdamState:
    m: KernelNetGradient
    v: KernelNetGradient
    step: int


def prior_loss(params: KernelNetParams, prior: np.ndarray):
    """Squared distance between the emitted kernel and the prior, plus its
    gradient with respect to the kernel taps."""
    k = kernelnet.forward(params)
    prior = np.asarray(prior, dtype=np.float64)
    if prior.shape != k.shape:
        raise ValueError(f"prior shape {prior.shape} != kernel shape {k.shape}")
    diff = k - prior
    return float((diff * diff).sum()), 2.0 * diff


def estimate_kernel(params: KernelNetParams) -> np.ndarray:
    """The kernel currently emitted by the generator net."""
    return kernelnet.forward(params)


def _zeros_like_grad(params: KernelNetParams) -> KernelNetGradient:
    return KernelNetGradient(
        tuple(np.zeros_like(w) for w in params.weights),
        tuple(np.zeros_like(b) for b in params.biases),
    )


def _combine(a: KernelNetGradient, sa: float, b: KernelNetGradient, sb: float):
    return KernelNetGradient(
        tuple(sa * ga + sb * gb for ga, gb in zip(a.weights, b.weights)),
        tuple(sa * ga + sb * gb for ga, gb in zip(a.biases, b.biases)),
    )


def _grad_norm(g: KernelNetGradient) -> float:
    total = sum(float((w * w).sum()) for w in g.weights)
    total += sum(float((b * b).sum()) for b in g.biases)
    return float(np.sqrt(total))


def _check_finite(g: KernelNetGradient) -> None:
    for arr in (*g.weights, *g.biases):
        if not np.all(np.isfinite(arr)):
            raise FloatingPointError("non-finite kernel-net gradient")


def _apply_plain(params, direction):
    weights = tuple(w - d for w, d in zip(params.weights, direction.weights))
    biases = tuple(b - d for b, d in zip(params.biases, direction.biases))
    return KernelNetParams(params.layer_dims, weights, biases, params.input_noise, params.seed)


def _apply_adam(params, grad, state: AdamState, lr: float):
    step = state.step + 1
    new_m_w, new_v_w, new_w = [], [], []
    for w, g, m, v in zip(params.weights, grad.weights, state.m.weights, state.v.weights):
        m = ADAM_BETA1 * m + (1 - ADAM_BETA1) * g
        v = ADAM_BETA2 * v + (1 - ADAM_BETA2) * g * g
        mhat = m / (1 - ADAM_BETA1**step)
        vhat = v / (1 - ADAM_BETA2**step)
        new_m_w.append(m)
        new_v_w.append(v)
        new_w.append(w - lr * mhat / (np.sqrt(vhat) + ADAM_EPS))
    new_m_b, new_v_b, new_b = [], [], []
    for b, g, m, v in zip(params.biases, grad.biases, state.m.biases, state.v.biases):
        m = ADAM_BETA1 * m + (1 - ADAM_BETA1) * g
        v = ADAM_BETA2 * v + (1 - ADAM_BETA2) * g * g
        mhat = m / (1 - ADAM_BETA1**step)
        vhat = v / (1 - ADAM_BETA2**step)
        new_m_b.append(m)
        new_v_b.append(v)
        new_b.append(b - lr * mhat / (np.sqrt(vhat) + ADAM_EPS))
    new_params = KernelNetParams(
        params.layer_dims, tuple(new_w), tuple(new_b), params.input_noise, params.seed
    )
    new_state = AdamState(
        KernelNetGradient(tuple(new_m_w), tuple(new_m_b)),
        KernelNetGradient(tuple(new_v_w), tuple(new_v_b)),
        step,
    )
    return new_params, new_state


def langevin_update(
    params: KernelNetParams,
    x,
    y,
    prior: np.ndarray | None,
    cfg: EstimatorConfig,
    opt_state: AdamState | None = None,
):
    """Run ``cfg.inner_steps`` combined data/prior updates of the net parameters.

    ``prior=None`` disables the prior term (pure data-consistency descent).
    Returns the new parameters, the carried optimizer state, and per-call
    scalar diagnostics. Raises FloatingPointError on a non-finite gradient
    so the caller can roll back.
    """
    dcfg = DegradeConfig(scale=cfg.scale)
    if opt_state is None:
        opt_state = AdamState(_zeros_like_grad(params), _zeros_like_grad(params), 0)

    info = {}
    for _ in range(cfg.inner_steps):
        k = kernelnet.forward(params)
        data_loss, r = residual(x, k, y, dcfg)
        upstream_data = grad_wrt_kernel(x, k, y, dcfg, r=r)
        if not np.all(np.isfinite(upstream_data)):
            raise FloatingPointError("non-finite data-consistency gradient")
        g_data = kernelnet.backward(params, upstream_data)
        if prior is not None:
            p_loss, upstream = prior_loss(params, prior)
            g_prior = kernelnet.backward(params, upstream)
        else:
            p_loss, g_prior = 0.0, _zeros_like_grad(params)

        combined = _combine(g_data, cfg.step_data, g_prior, cfg.step_prior)
        _check_finite(combined)
        if cfg.optimizer == "plain":
            params = _apply_plain(params, combined)
        else:
            params, opt_state = _apply_adam(params, combined, opt_state, cfg.adam_lr)

        info = {
            "data_loss": data_loss,
            "prior_loss": p_loss,
            "grad_data_norm": _grad_norm(g_data),
            "grad_prior_norm": _grad_norm(g_prior),
        }
    return params, opt_state, info
