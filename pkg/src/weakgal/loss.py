"""Sampled weak-form objective and Monte Carlo H^1 error estimation.

The bilinear objective for trial network u and test network v is

    interior = |Omega|/N sum_k [ sum_ij a_ij d_i u d_j v + sum_i b_i d_i u v
                                 + c u v - f v ](X_k)
    boundary = |dOmega| / (beta M) sum_k [ alpha u v - g v ](Y_k)

with the boundary weight ``alpha`` optionally halved (``boundary_alpha_half``)
to match the alternative convention for the penalty term.  The objective is
linear in the test network's output, which the gradient computation exploits:
both parameter gradients come from one dual evaluation per network plus
per-sample seed vectors fed to the networks' parameter backprop.

Sums use numpy's pairwise float64 accumulation, so values are reproducible
bit-for-bit for a fixed batch.  Any non-finite intermediate raises
``NonFiniteLossError`` with the offending component and sample index.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

from . import expr as expr_mod
from . import network as net
from .network import NetworkParams
from .pde import Domain, EllipticProblem, EmpiricalBatch, sample_batch, sample_interior

__all__ = [
    "LossValue",
    "H1Estimate",
    "NonFiniteLossError",
    "Evaluator",
    "network_evaluator",
    "expr_evaluator",
    "zero_evaluator",
    "as_evaluator",
    "empirical_loss",
    "loss_gradients",
    "continuous_loss_estimate",
    "h1_error",
    "estimate_h1_norm",
]

# an evaluator maps points (n, d) -> (values (n,), gradients (n, d))
Evaluator = Callable[[np.ndarray], tuple[np.ndarray, np.ndarray]]


class NonFiniteLossError(ArithmeticError):
    """A NaN/Inf appeared while assembling the objective."""

    def __init__(self, component: str, sample_index: int):
        super().__init__(f"non-finite value in {component} term at sample {sample_index}")
        self.component = component
        self.sample_index = sample_index


@dataclass(frozen=True)
class LossValue:
    total: float
    interior: float
    boundary: float
    n_interior: int
    m_boundary: int


@dataclass(frozen=True)
class H1Estimate:
    """Monte Carlo H^1 distance: h1^2 = l2_part^2 + seminorm_part^2.

    ``se_*`` are standard errors of the squared-norm estimates (sample std of
    the per-point contributions over sqrt(n)).
    """

    l2_part: float
    seminorm_part: float
    h1: float
    n_samples: int
    se_l2_sq: float
    se_seminorm_sq: float


def network_evaluator(params: NetworkParams) -> Evaluator:
    def ev(points: np.ndarray):
        return net.forward_dual_batch(params, points)

    return ev


def expr_evaluator(ast: expr_mod.ExprAst) -> Evaluator:
    grads = [expr_mod.diff(ast, i + 1) for i in range(ast.dim)]

    def ev(points: np.ndarray):
        vals = expr_mod.evaluate_many(ast, points)
        g = np.empty((points.shape[0], ast.dim))
        for i in range(ast.dim):
            g[:, i] = expr_mod.evaluate_many(grads[i], points)
        return vals, g

    return ev


def zero_evaluator(dim: int) -> Evaluator:
    def ev(points: np.ndarray):
        n = points.shape[0]
        return np.zeros(n), np.zeros((n, dim))

    return ev


def as_evaluator(obj: Union[NetworkParams, expr_mod.ExprAst, Evaluator, None], dim: int) -> Evaluator:
    if obj is None:
        return zero_evaluator(dim)
    if isinstance(obj, NetworkParams):
        return network_evaluator(obj)
    if isinstance(obj, expr_mod.ExprAst):
        return expr_evaluator(obj)
    return obj


def _check_finite(arr: np.ndarray, component: str) -> None:
    finite = np.isfinite(arr)
    if not finite.all():
        flat = finite.reshape(finite.shape[0], -1).all(axis=1)
        raise NonFiniteLossError(component, int(np.argmin(flat)))


def _effective_alpha(problem: EllipticProblem, boundary_alpha_half: bool) -> float:
    return 0.5 * problem.alpha if boundary_alpha_half else problem.alpha


def _interior_pieces(problem: EllipticProblem, X: np.ndarray):
    A = problem.a_values(X)
    B = problem.b_values(X)
    c = problem.c_values(X)
    f = problem.f_values(X)
    for name, arr in (("a", A), ("b", B), ("c", c), ("f", f)):
        _check_finite(arr, f"interior coefficient {name}")
    return A, B, c, f


def empirical_loss(
    u,
    v,
    problem: EllipticProblem,
    batch: EmpiricalBatch,
    boundary_alpha_half: bool = False,
) -> LossValue:
    """Evaluate the sampled weak-form objective on one batch.

    ``u`` and ``v`` may be NetworkParams, ExprAst, or evaluator callables.
    """
    X, Y, normals = batch.interior, batch.boundary, batch.normals
    n, m = X.shape[0], Y.shape[0]
    if n == 0 or m == 0:
        raise ValueError("batch must contain interior and boundary points")
    alpha_eff = _effective_alpha(problem, boundary_alpha_half)
    ev_u = as_evaluator(u, problem.dim)
    ev_v = as_evaluator(v, problem.dim)

    u_vals, u_grads = ev_u(X)
    v_vals, v_grads = ev_v(X)
    _check_finite(u_vals, "interior u")
    _check_finite(v_vals, "interior v")
    A, B, c, f = _interior_pieces(problem, X)

    integrand = (
        np.einsum("nij,ni,nj->n", A, u_grads, v_grads, optimize=True)
        + np.einsum("ni,ni->n", B, u_grads) * v_vals
        + c * u_vals * v_vals
        - f * v_vals
    )
    _check_finite(integrand, "interior integrand")
    interior = problem.domain.volume / n * float(np.sum(integrand))

    uy, _ = ev_u(Y)
    vy, _ = ev_v(Y)
    g = problem.g_values(Y, normals)
    _check_finite(g, "boundary g")
    b_integrand = alpha_eff * uy * vy - g * vy
    _check_finite(b_integrand, "boundary integrand")
    boundary = problem.domain.surface / (problem.beta * m) * float(np.sum(b_integrand))

    total = interior + boundary
    if not math.isfinite(total):
        raise NonFiniteLossError("total", -1)
    return LossValue(total=total, interior=interior, boundary=boundary, n_interior=n, m_boundary=m)


def _gradients(
    u: NetworkParams,
    v: NetworkParams,
    problem: EllipticProblem,
    batch: EmpiricalBatch,
    boundary_alpha_half: bool,
    need_u: bool,
    need_v: bool,
):
    X, Y, normals = batch.interior, batch.boundary, batch.normals
    n, m = X.shape[0], Y.shape[0]
    if n == 0 or m == 0:
        raise ValueError("batch must contain interior and boundary points")
    alpha_eff = _effective_alpha(problem, boundary_alpha_half)
    w_int = problem.domain.volume / n
    w_bdy = problem.domain.surface / (problem.beta * m)

    u_vals, u_grads = net.forward_dual_batch(u, X)
    v_vals, v_grads = net.forward_dual_batch(v, X)
    _check_finite(u_vals, "interior u")
    _check_finite(u_grads, "interior grad u")
    _check_finite(v_vals, "interior v")
    _check_finite(v_grads, "interior grad v")
    A, B, c, f = _interior_pieces(problem, X)

    integrand = (
        np.einsum("nij,ni,nj->n", A, u_grads, v_grads, optimize=True)
        + np.einsum("ni,ni->n", B, u_grads) * v_vals
        + c * u_vals * v_vals
        - f * v_vals
    )
    _check_finite(integrand, "interior integrand")
    interior = w_int * float(np.sum(integrand))

    uy, _ = net.forward_dual_batch(u, Y)
    vy, _ = net.forward_dual_batch(v, Y)
    _check_finite(uy, "boundary u")
    _check_finite(vy, "boundary v")
    g = problem.g_values(Y, normals)
    _check_finite(g, "boundary g")
    b_integrand = alpha_eff * uy * vy - g * vy
    _check_finite(b_integrand, "boundary integrand")
    boundary = w_bdy * float(np.sum(b_integrand))

    value = LossValue(
        total=interior + boundary, interior=interior, boundary=boundary,
        n_interior=n, m_boundary=m,
    )
    if not math.isfinite(value.total):
        raise NonFiniteLossError("total", -1)

    grad_u = grad_v = None
    if need_u:
        # d(integrand)/d(grad u) = A grad_v + B v ; d/d(u) = c v
        seed_grad = w_int * (np.einsum("nij,nj->ni", A, v_grads, optimize=True) + B * v_vals[:, None])
        seed_val = w_int * (c * v_vals)
        grad_u = net.backprop_params_batch(u, X, seed_val, seed_grad)
        grad_u += net.backprop_params_batch(u, Y, w_bdy * alpha_eff * vy, None)
        _check_finite(grad_u[None, :], "grad_u")
    if need_v:
        # d/d(grad v) = A^T grad_u ; d/d(v) = B . grad_u + c u - f
        seed_grad = w_int * np.einsum("nij,ni->nj", A, u_grads, optimize=True)
        seed_val = w_int * (np.einsum("ni,ni->n", B, u_grads) + c * u_vals - f)
        grad_v = net.backprop_params_batch(v, X, seed_val, seed_grad)
        grad_v += net.backprop_params_batch(v, Y, w_bdy * (alpha_eff * uy - g), None)
        _check_finite(grad_v[None, :], "grad_v")
    return grad_u, grad_v, value


def loss_gradients(
    u: NetworkParams,
    v: NetworkParams,
    problem: EllipticProblem,
    batch: EmpiricalBatch,
    boundary_alpha_half: bool = False,
    need_u: bool = True,
    need_v: bool = True,
) -> tuple[np.ndarray | None, np.ndarray | None, LossValue]:
    """Exact gradients of the sampled objective in both networks' weights.

    Returns (grad_u, grad_v, loss) with flat gradients in params_to_flat
    layout.  The objective is an explicit finite sum, so these are the exact
    derivatives of ``empirical_loss`` on the same batch.  ``need_u``/``need_v``
    skip one side's backprop (the corresponding entry is None); alternating
    optimizers use this to avoid paying for gradients they discard.
    """
    return _gradients(u, v, problem, batch, boundary_alpha_half, need_u, need_v)


def continuous_loss_estimate(
    u,
    v,
    problem: EllipticProblem,
    n_big: int,
    seed,
    boundary_alpha_half: bool = False,
) -> LossValue:
    """Objective on a fresh batch of n_big interior and n_big boundary points.

    With the same seed and n_big equal to a batch's size this reproduces
    ``empirical_loss`` on ``sample_batch(domain, n, n, seed)`` exactly; with
    large n_big it stands in for the continuous objective.
    """
    batch = sample_batch(problem.domain, n_big, n_big, seed)
    return empirical_loss(u, v, problem, batch, boundary_alpha_half)


def h1_error(
    u,
    u_ref,
    domain: Domain,
    n_quad: int = 4096,
    seed=0,
) -> H1Estimate:
    """Monte Carlo H^1 distance between two evaluators over the domain.

    Accepts NetworkParams, ExprAst, or any evaluator callable for either
    argument (None means the zero function).
    """
    if n_quad < 2:
        raise ValueError("n_quad must be >= 2")
    ev_u = as_evaluator(u, domain.dim)
    ev_ref = as_evaluator(u_ref, domain.dim)
    X = sample_interior(domain, n_quad, seed)
    u_vals, u_grads = ev_u(X)
    r_vals, r_grads = ev_ref(X)
    du = u_vals - r_vals
    dg = u_grads - r_grads
    vol = domain.volume
    l2_samples = vol * du**2
    semi_samples = vol * np.einsum("ni,ni->n", dg, dg)
    l2_sq = float(np.mean(l2_samples))
    semi_sq = float(np.mean(semi_samples))
    se_l2 = float(np.std(l2_samples, ddof=1) / math.sqrt(n_quad))
    se_semi = float(np.std(semi_samples, ddof=1) / math.sqrt(n_quad))
    return H1Estimate(
        l2_part=math.sqrt(max(l2_sq, 0.0)),
        seminorm_part=math.sqrt(max(semi_sq, 0.0)),
        h1=math.sqrt(max(l2_sq + semi_sq, 0.0)),
        n_samples=n_quad,
        se_l2_sq=se_l2,
        se_seminorm_sq=se_semi,
    )


def estimate_h1_norm(u, domain: Domain, n_quad: int = 4096, seed=0) -> float:
    """Monte Carlo H^1 norm of a single evaluator (distance to zero)."""
    return h1_error(u, None, domain, n_quad, seed).h1
