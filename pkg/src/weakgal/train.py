"""Alternating minimax training of trial and test networks.

Each outer step runs ``inner_steps`` ascent updates on the test network's
weights followed by one descent update on the trial network's, both on the
same sampled batch; batches are redrawn every ``resample_every`` outer steps
from deterministic child seeds.  After every update the weights are clipped
entrywise to the architecture's box, and after each trial-network update its
estimated H^1 norm (on a fixed quadrature set) is softly projected back to
``h1_ball_radius`` by rescaling the final affine layer.

Everything is driven by ``config.seed`` through numpy SeedSequence spawning:
two runs with the same problem and config produce bitwise-identical weights
and history (wall-clock ``seconds`` excepted).
"""

from __future__ import annotations

import math
import time
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import loss as loss_mod
from . import network as net
from .loss import Evaluator, NonFiniteLossError
from .network import NetworkArch, NetworkParams
from .pde import EllipticProblem, check_coercivity, sample_batch, sample_interior

__all__ = [
    "TrainConfig",
    "HistoryRow",
    "TrainResult",
    "TrainingAborted",
    "minimax_train",
    "ProbeResult",
    "approx_error_probe",
]


class TrainingAborted(ArithmeticError):
    """Non-finite objective or gradient during training."""

    def __init__(self, step: int, component: str, sample_index: int):
        super().__init__(
            f"training aborted at outer step {step}: non-finite {component}"
            f" (sample {sample_index})"
        )
        self.step = step
        self.component = component
        self.sample_index = sample_index


@dataclass(frozen=True)
class TrainConfig:
    n_interior: int = 256
    m_boundary: int = 256
    outer_steps: int = 1000
    inner_steps: int = 2
    optimizer: str = "adam"  # or "sgd"
    lr_u: float = 1e-3
    lr_v: float = 1e-3
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    resample_every: int = 1  # 0 = never resample after the first batch
    clip_b_theta: float | None = None  # None: use each architecture's own bound
    grad_clip_norm: float = 10.0  # 0 disables
    h1_ball_radius: float = 2.0  # inf disables the soft projection
    h1_quad_points: int = 4096
    normalize_v: bool = False
    boundary_alpha_half: bool = False
    v_restart_every: int = 0  # 0 = never reinitialize the test network
    eval_every: int = 100
    seed: int = 0

    def __post_init__(self):
        if self.n_interior < 1 or self.m_boundary < 1:
            raise ValueError("batch sizes must be >= 1")
        if self.outer_steps < 0 or self.inner_steps < 1:
            raise ValueError("outer_steps must be >= 0 and inner_steps >= 1")
        if self.optimizer not in ("adam", "sgd"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if self.lr_u < 0 or self.lr_v < 0:
            raise ValueError("learning rates must be >= 0")
        if self.resample_every < 0 or self.v_restart_every < 0:
            raise ValueError("period fields must be >= 0")
        if self.eval_every < 1:
            raise ValueError("eval_every must be >= 1")
        if self.h1_quad_points < 2:
            raise ValueError("h1_quad_points must be >= 2")
        if not (self.h1_ball_radius > 0):
            raise ValueError("h1_ball_radius must be positive (use inf to disable)")


@dataclass(frozen=True)
class HistoryRow:
    step: int
    loss_total: float
    loss_interior: float
    loss_boundary: float
    h1_u: float
    h1_v: float
    h1_error: float  # nan when no reference is available
    grad_u_norm: float
    grad_v_norm: float
    seconds: float  # wall time since training started; not deterministic


@dataclass
class TrainResult:
    u: NetworkParams
    v: NetworkParams
    history: list[HistoryRow]
    coercivity_holds: bool


class _Optimizer:
    """Adam or plain SGD on a flat parameter vector; ``direction`` flips sign."""

    def __init__(self, config: TrainConfig, size: int, lr: float):
        self.kind = config.optimizer
        self.lr = lr
        self.b1 = config.adam_beta1
        self.b2 = config.adam_beta2
        self.eps = config.adam_eps
        self.m = np.zeros(size)
        self.v = np.zeros(size)
        self.t = 0

    def step(self, flat: np.ndarray, grad: np.ndarray, direction: float) -> np.ndarray:
        if self.kind == "sgd":
            return flat + direction * self.lr * grad
        self.t += 1
        self.m = self.b1 * self.m + (1.0 - self.b1) * grad
        self.v = self.b2 * self.v + (1.0 - self.b2) * grad * grad
        m_hat = self.m / (1.0 - self.b1**self.t)
        v_hat = self.v / (1.0 - self.b2**self.t)
        return flat + direction * self.lr * m_hat / (np.sqrt(v_hat) + self.eps)

    def reset(self):
        self.m[:] = 0.0
        self.v[:] = 0.0
        self.t = 0


def _clip_grad(grad: np.ndarray, max_norm: float) -> tuple[np.ndarray, float]:
    norm = float(np.linalg.norm(grad))
    if max_norm > 0 and norm > max_norm:
        return grad * (max_norm / norm), norm
    return grad, norm


def _h1_on_quad(params: NetworkParams, quad: np.ndarray, volume: float) -> float:
    vals, grads = net.forward_dual_batch(params, quad)
    sq = volume * float(np.mean(vals**2 + np.einsum("ni,ni->n", grads, grads)))
    return math.sqrt(max(sq, 0.0))


def _soft_project(params: NetworkParams, quad: np.ndarray, volume: float, radius: float) -> tuple[NetworkParams, float]:
    """Rescale the final affine layer so the estimated H^1 norm is <= radius."""
    h1 = _h1_on_quad(params, quad, volume)
    if not math.isfinite(radius) or h1 <= radius or h1 == 0.0:
        return params, h1
    factor = radius / h1
    layers = list(params.layers)
    A, b = layers[-1]
    layers[-1] = (A * factor, b * factor)
    return NetworkParams(params.arch, layers), radius


def minimax_train(
    problem: EllipticProblem,
    u_arch: NetworkArch,
    v_arch: NetworkArch,
    config: TrainConfig,
    u_ref=None,
    on_eval: Callable[[int, NetworkParams, NetworkParams, HistoryRow], None] | None = None,
) -> TrainResult:
    """Train trial network u against adversarial test network v.

    ``u_ref`` (NetworkParams, ExprAst, evaluator, or None) is only used for
    error telemetry.  ``on_eval`` fires at every recorded history row.
    Deterministic: all randomness derives from config.seed.
    """
    report = check_coercivity(problem)
    if not report.holds:
        warnings.warn(
            f"sampled coercivity condition fails (condition={report.condition:.3g}); "
            "training may not converge",
            stacklevel=2,
        )

    ss = np.random.SeedSequence(config.seed)
    ss_u, ss_v, ss_quad, ss_batches, ss_restarts = ss.spawn(5)
    u = net.init(u_arch, ss_u)
    v = net.init(v_arch, ss_v)
    clip_u = config.clip_b_theta if config.clip_b_theta is not None else u_arch.b_theta
    clip_v = config.clip_b_theta if config.clip_b_theta is not None else v_arch.b_theta
    u = net.clip_weights(u, clip_u)
    v = net.clip_weights(v, clip_v)

    quad = sample_interior(problem.domain, config.h1_quad_points, ss_quad)
    volume = problem.domain.volume
    ref_eval: Evaluator | None = None
    if u_ref is not None:
        ref_eval = loss_mod.as_evaluator(u_ref, problem.dim)

    opt_u = _Optimizer(config, u_arch.n_params(), config.lr_u)
    opt_v = _Optimizer(config, v_arch.n_params(), config.lr_v)

    history: list[HistoryRow] = []
    batch = None
    t0 = time.perf_counter()
    grad_u_norm = grad_v_norm = math.nan
    last_loss = None

    for step in range(config.outer_steps):
        if batch is None or (config.resample_every > 0 and step % config.resample_every == 0):
            batch = sample_batch(
                problem.domain, config.n_interior, config.m_boundary, ss_batches.spawn(1)[0]
            )
        if config.v_restart_every > 0 and step > 0 and step % config.v_restart_every == 0:
            v = net.clip_weights(net.init(v_arch, ss_restarts.spawn(1)[0]), clip_v)
            opt_v.reset()

        try:
            scale = 1.0
            if config.normalize_v:
                # normalization factor treated as a constant within the step
                scale = 1.0 / max(1.0, _h1_on_quad(v, quad, volume))
            for _ in range(config.inner_steps):
                _, gv, _ = loss_mod.loss_gradients(
                    u, v, problem, batch, config.boundary_alpha_half, need_u=False, need_v=True
                )
                gv, grad_v_norm = _clip_grad(scale * gv, config.grad_clip_norm)
                v = net.flat_to_params(v_arch, opt_v.step(net.params_to_flat(v), gv, +1.0))
                v = net.clip_weights(v, clip_v)

            gu, _, value = loss_mod.loss_gradients(
                u, v, problem, batch, config.boundary_alpha_half, need_u=True, need_v=False
            )
            last_loss = value
            gu, grad_u_norm = _clip_grad(scale * gu, config.grad_clip_norm)
            u = net.flat_to_params(u_arch, opt_u.step(net.params_to_flat(u), gu, -1.0))
            u = net.clip_weights(u, clip_u)
            u, h1_u = _soft_project(u, quad, volume, config.h1_ball_radius)
        except NonFiniteLossError as err:
            raise TrainingAborted(step, err.component, err.sample_index) from err

        is_last = step == config.outer_steps - 1
        if (step + 1) % config.eval_every == 0 or is_last:
            h1_v = _h1_on_quad(v, quad, volume)
            err_h1 = math.nan
            if ref_eval is not None:
                err_h1 = loss_mod.h1_error(
                    u, ref_eval, problem.domain,
                    n_quad=config.h1_quad_points, seed=ss_quad,
                ).h1
            row = HistoryRow(
                step=step + 1,
                loss_total=last_loss.total,
                loss_interior=last_loss.interior,
                loss_boundary=last_loss.boundary,
                h1_u=h1_u,
                h1_v=h1_v,
                h1_error=err_h1,
                grad_u_norm=grad_u_norm,
                grad_v_norm=grad_v_norm,
                seconds=time.perf_counter() - t0,
            )
            history.append(row)
            if on_eval is not None:
                on_eval(step + 1, u, v, row)

    return TrainResult(u=u, v=v, history=history, coercivity_holds=report.holds)


# ---------------------------------------------------------------------------
# direct H^1 fitting (approximation-error probe)


@dataclass(frozen=True)
class ProbeResult:
    """Best H^1 distance achieved when fitting a target function directly."""

    h1_distance: float
    params: NetworkParams
    history: list[tuple[int, float]]  # (step, held-out H^1 distance)


def approx_error_probe(
    u_target,
    arch: NetworkArch,
    config: TrainConfig,
) -> ProbeResult:
    """Minimize the Monte Carlo H^1 distance to ``u_target`` over the class.

    Supervised proxy for the approximation error: reuses TrainConfig's
    optimizer/learning-rate (lr_u), batch (n_interior), resampling, and seed
    fields.  The reported distance is evaluated on a held-out quadrature set;
    the returned params are the best-scoring iterate, weights kept inside the
    architecture's box throughout.
    """
    target = loss_mod.as_evaluator(u_target, arch.dim)
    ss = np.random.SeedSequence(config.seed)
    ss_init, ss_quad, ss_batches = ss.spawn(3)
    from .pde import unit_hypercube

    domain = unit_hypercube(arch.dim)
    volume = domain.volume
    params = net.clip_weights(net.init(arch, ss_init), arch.b_theta)
    opt = _Optimizer(config, arch.n_params(), config.lr_u)
    quad = sample_interior(domain, config.h1_quad_points, ss_quad)
    t_quad_vals, t_quad_grads = target(quad)

    def held_out_distance(p: NetworkParams) -> float:
        vals, grads = net.forward_dual_batch(p, quad)
        sq = volume * float(
            np.mean((vals - t_quad_vals) ** 2 + np.sum((grads - t_quad_grads) ** 2, axis=1))
        )
        return math.sqrt(max(sq, 0.0))

    best = held_out_distance(params)
    best_params = params.copy()
    history = [(0, best)]
    X = None
    for step in range(config.outer_steps):
        if X is None or (config.resample_every > 0 and step % config.resample_every == 0):
            X = sample_interior(domain, config.n_interior, ss_batches.spawn(1)[0])
            t_vals, t_grads = target(X)
        vals, grads = net.forward_dual_batch(params, X)
        w = volume / X.shape[0]
        seed_val = 2.0 * w * (vals - t_vals)
        seed_grad = 2.0 * w * (grads - t_grads)
        g = net.backprop_params_batch(params, X, seed_val, seed_grad)
        if not np.all(np.isfinite(g)):
            raise TrainingAborted(step, "fit gradient", -1)
        g, _ = _clip_grad(g, config.grad_clip_norm)
        params = net.flat_to_params(arch, opt.step(net.params_to_flat(params), g, -1.0))
        params = net.clip_weights(params, arch.b_theta)
        if (step + 1) % config.eval_every == 0 or step == config.outer_steps - 1:
            dist = held_out_distance(params)
            history.append((step + 1, dist))
            if dist < best:
                best = dist
                best_params = params.copy()
    return ProbeResult(h1_distance=best, params=best_params, history=history)
