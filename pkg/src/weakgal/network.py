"""Dense feed-forward networks and their capacity metadata.

A network here is x -> A_D(rho(A_{D-1}(... rho(A_1 x + b_1) ...) + b_{D-1})) + b_D:
``depth`` counts affine layers, the last one has no activation, and every
weight is clipped to [-B_theta, B_theta].  Two evaluations matter for weak-form
training and both are implemented directly:

* ``forward_dual`` - value and spatial gradient together (forward mode in x);
* ``backprop_params`` - gradient with respect to the weights of
  w * f(x) + s . grad_x f(x), i.e. reverse mode through the dual evaluation.

The module also computes the class-capacity quantities attached to an
architecture (value/gradient Lipschitz constants in the weights, gradient sup
bound) and the recipe mapping a target accuracy to an architecture.  Those
products of widths and powers of B_theta overflow float64 quickly, so they are
accumulated in log space; callers get both the (possibly +inf) value and its
natural log.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass
from typing import Callable

import numpy as np

__all__ = [
    "ActivationKind",
    "TANH",
    "LOGISTIC",
    "activation_by_name",
    "NetworkArch",
    "NetworkParams",
    "DualEval",
    "NetworkBounds",
    "RecipeResult",
    "RecipeError",
    "init",
    "zeros_like_arch",
    "forward_dual",
    "forward_dual_batch",
    "backprop_params",
    "backprop_params_batch",
    "clip_weights",
    "count_nonzero",
    "network_bounds",
    "arch_recipe",
    "save_checkpoint",
    "load_checkpoint",
    "params_to_flat",
    "flat_to_params",
]

_LN_FLOAT_MAX = math.log(np.finfo(np.float64).max)


def exp_or_inf(ln_value: float) -> float:
    """exp(ln_value), returning +inf instead of overflowing."""
    if ln_value > _LN_FLOAT_MAX:
        return math.inf
    return math.exp(ln_value)


@dataclass(frozen=True)
class ActivationKind:
    """Activation plus the constants the capacity lemmas consume.

    ``b_rho``..``l_rho_prime`` are the conventional values used by the bound
    formulas (tanh and logistic both satisfy the <= 1 normalization, so all
    four are stored as 1.0).  The ``exact_*`` fields record the true suprema
    for reference.  ``smooth`` gates the Lipschitz lab: bounds assuming a
    bounded activation make no sense for relu-type activations.
    """

    name: str
    apply: Callable[[np.ndarray], np.ndarray]
    d1: Callable[[np.ndarray], np.ndarray]
    d2: Callable[[np.ndarray], np.ndarray]
    b_rho: float
    l_rho: float
    b_rho_prime: float
    l_rho_prime: float
    exact_b_rho: float
    exact_l_rho: float
    exact_b_rho_prime: float
    exact_l_rho_prime: float
    smooth: bool = True

    def __repr__(self):
        return f"ActivationKind({self.name!r})"


def _tanh_d1(z):
    t = np.tanh(z)
    return 1.0 - t * t


def _tanh_d2(z):
    t = np.tanh(z)
    return -2.0 * t * (1.0 - t * t)


def _logistic(z):
    # stable sigmoid
    out = np.empty_like(z, dtype=np.float64)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _logistic_d1(z):
    s = _logistic(z)
    return s * (1.0 - s)


def _logistic_d2(z):
    s = _logistic(z)
    return s * (1.0 - s) * (1.0 - 2.0 * s)


TANH = ActivationKind(
    name="tanh",
    apply=np.tanh,
    d1=_tanh_d1,
    d2=_tanh_d2,
    b_rho=1.0,
    l_rho=1.0,
    b_rho_prime=1.0,
    l_rho_prime=1.0,
    exact_b_rho=1.0,
    exact_l_rho=1.0,
    exact_b_rho_prime=1.0,
    exact_l_rho_prime=4.0 / (3.0 * math.sqrt(3.0)),
)

LOGISTIC = ActivationKind(
    name="logistic",
    apply=_logistic,
    d1=_logistic_d1,
    d2=_logistic_d2,
    b_rho=1.0,
    l_rho=1.0,
    b_rho_prime=1.0,
    l_rho_prime=1.0,
    exact_b_rho=1.0,
    exact_l_rho=0.25,
    exact_b_rho_prime=0.25,
    exact_l_rho_prime=1.0 / (6.0 * math.sqrt(3.0)),
)


def _relu_k(k: int) -> ActivationKind:
    def apply(z):
        return np.maximum(z, 0.0) ** k

    def d1(z):
        if k == 1:
            return (z > 0).astype(np.float64)
        return k * np.maximum(z, 0.0) ** (k - 1)

    def d2(z):
        if k <= 2:
            out = np.zeros_like(np.asarray(z, dtype=np.float64))
            if k == 2:
                out[np.asarray(z) > 0] = 2.0
            return out
        return k * (k - 1) * np.maximum(z, 0.0) ** (k - 2)

    return ActivationKind(
        name=f"relu{k}",
        apply=apply,
        d1=d1,
        d2=d2,
        b_rho=math.inf,
        l_rho=math.inf if k > 1 else 1.0,
        b_rho_prime=math.inf if k > 1 else 1.0,
        l_rho_prime=math.inf,
        exact_b_rho=math.inf,
        exact_l_rho=math.inf if k > 1 else 1.0,
        exact_b_rho_prime=math.inf if k > 1 else 1.0,
        exact_l_rho_prime=math.inf,
        smooth=False,
    )


def activation_by_name(name: str) -> ActivationKind:
    if name == "tanh":
        return TANH
    if name == "logistic":
        return LOGISTIC
    if name.startswith("relu"):
        suffix = name[4:] or "1"
        if suffix.isdigit() and int(suffix) >= 1:
            return _relu_k(int(suffix))
    raise ValueError(f"unknown activation {name!r}")


@dataclass(frozen=True)
class NetworkArch:
    """Architecture: widths (n_0 .. n_D), activation, weight bound B_theta >= 1."""

    widths: tuple[int, ...]
    activation: ActivationKind
    b_theta: float

    def __post_init__(self):
        object.__setattr__(self, "widths", tuple(int(w) for w in self.widths))
        if len(self.widths) < 2:
            raise ValueError("need at least input and output widths")
        if any(w < 1 for w in self.widths):
            raise ValueError(f"widths must be positive, got {self.widths}")
        if self.widths[-1] != 1:
            raise ValueError("output width must be 1 (scalar networks)")
        if not (self.b_theta >= 1.0):
            raise ValueError(f"b_theta must be >= 1, got {self.b_theta}")

    @property
    def depth(self) -> int:
        """Number of affine layers D."""
        return len(self.widths) - 1

    @property
    def dim(self) -> int:
        return self.widths[0]

    @property
    def max_width(self) -> int:
        return max(self.widths[1:])

    @property
    def hidden_widths(self) -> tuple[int, ...]:
        return self.widths[1:-1]

    def n_params(self) -> int:
        return sum(
            self.widths[k + 1] * self.widths[k] + self.widths[k + 1]
            for k in range(self.depth)
        )


@dataclass
class NetworkParams:
    """Weights for a NetworkArch: layers[k] = (A, b) with A (n_{k+1}, n_k)."""

    arch: NetworkArch
    layers: list[tuple[np.ndarray, np.ndarray]]

    def __post_init__(self):
        if len(self.layers) != self.arch.depth:
            raise ValueError("layer count does not match architecture depth")
        for k, (A, b) in enumerate(self.layers):
            want = (self.arch.widths[k + 1], self.arch.widths[k])
            if A.shape != want or b.shape != (want[0],):
                raise ValueError(f"layer {k} has shape {A.shape}/{b.shape}, want {want}")

    def copy(self) -> "NetworkParams":
        return NetworkParams(self.arch, [(A.copy(), b.copy()) for A, b in self.layers])


@dataclass(frozen=True)
class DualEval:
    value: float
    grad: np.ndarray  # shape (dim,)


def params_to_flat(params: NetworkParams) -> np.ndarray:
    parts = []
    for A, b in params.layers:
        parts.append(A.reshape(-1))
        parts.append(b)
    return np.concatenate(parts)


def flat_to_params(arch: NetworkArch, flat: np.ndarray) -> NetworkParams:
    flat = np.asarray(flat, dtype=np.float64)
    if flat.shape != (arch.n_params(),):
        raise ValueError(f"flat vector has {flat.shape}, arch needs ({arch.n_params()},)")
    layers = []
    pos = 0
    for k in range(arch.depth):
        n_out, n_in = arch.widths[k + 1], arch.widths[k]
        A = flat[pos : pos + n_out * n_in].reshape(n_out, n_in).copy()
        pos += n_out * n_in
        b = flat[pos : pos + n_out].copy()
        pos += n_out
        layers.append((A, b))
    return NetworkParams(arch, layers)


def init(arch: NetworkArch, seed, scheme: str = "glorot", uniform_half_width: float = 0.1) -> NetworkParams:
    """Deterministic initialization; weights always end inside [-B_theta, B_theta].

    ``scheme`` is "glorot" (uniform with half-width sqrt(6/(n_in+n_out)), zero
    biases) or "uniform" (entrywise uniform(-s, s) with s = uniform_half_width,
    biases included).
    """
    rng = np.random.default_rng(seed)
    layers = []
    for k in range(arch.depth):
        n_out, n_in = arch.widths[k + 1], arch.widths[k]
        if scheme == "glorot":
            s = math.sqrt(6.0 / (n_in + n_out))
            A = rng.uniform(-s, s, size=(n_out, n_in))
            b = np.zeros(n_out)
        elif scheme == "uniform":
            s = uniform_half_width
            A = rng.uniform(-s, s, size=(n_out, n_in))
            b = rng.uniform(-s, s, size=n_out)
        else:
            raise ValueError(f"unknown init scheme {scheme!r}")
        bound = arch.b_theta
        layers.append((np.clip(A, -bound, bound), np.clip(b, -bound, bound)))
    return NetworkParams(arch, layers)


def zeros_like_arch(arch: NetworkArch) -> NetworkParams:
    layers = [
        (np.zeros((arch.widths[k + 1], arch.widths[k])), np.zeros(arch.widths[k + 1]))
        for k in range(arch.depth)
    ]
    return NetworkParams(arch, layers)


# ---------------------------------------------------------------------------
# evaluation


def forward_dual_batch(params: NetworkParams, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Values and spatial gradients at a batch of points.

    points (n, dim) -> (values (n,), grads (n, dim)).  Forward mode: each
    hidden state carries its Jacobian with respect to x alongside the value.
    """
    act = params.arch.activation
    X = np.asarray(points, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != params.arch.dim:
        raise ValueError(f"points must be (n, {params.arch.dim}), got {X.shape}")
    n, d = X.shape
    f = X
    J = np.broadcast_to(np.eye(d), (n, d, d))
    depth = params.arch.depth
    for k in range(depth - 1):
        A, b = params.layers[k]
        z = f @ A.T + b
        Jz = np.einsum("qi,nip->nqp", A, J, optimize=True)
        f = act.apply(z)
        J = act.d1(z)[:, :, None] * Jz
    A, b = params.layers[depth - 1]
    values = (f @ A.T + b)[:, 0]
    grads = np.einsum("qi,nip->nqp", A, J, optimize=True)[:, 0, :]
    return values, grads


def forward_dual(params: NetworkParams, x) -> DualEval:
    """Value and gradient at a single point."""
    X = np.asarray(x, dtype=np.float64).reshape(1, -1)
    values, grads = forward_dual_batch(params, X)
    return DualEval(float(values[0]), grads[0])


def backprop_params_batch(
    params: NetworkParams,
    points: np.ndarray,
    seed_values: np.ndarray,
    seed_grads: np.ndarray | None,
) -> np.ndarray:
    """Gradient in the weights of sum_k [w_k f(x_k) + s_k . grad f(x_k)].

    Reverse mode through the forward-dual evaluation; needs the activation's
    second derivative because the spatial gradient path runs through rho'.
    Returns a flat vector in params_to_flat layout.  Linear in (w, s).
    """
    act = params.arch.activation
    X = np.asarray(points, dtype=np.float64)
    n, d = X.shape
    w = np.asarray(seed_values, dtype=np.float64)
    if w.shape != (n,):
        raise ValueError(f"seed_values must be ({n},), got {w.shape}")
    if seed_grads is None:
        s = np.zeros((n, d))
    else:
        s = np.asarray(seed_grads, dtype=np.float64)
        if s.shape != (n, d):
            raise ValueError(f"seed_grads must be ({n}, {d}), got {s.shape}")

    depth = params.arch.depth
    # forward pass, storing what the backward sweep needs
    f_list = [X]  # f_{k-1} inputs per layer
    J_list = [np.broadcast_to(np.eye(d), (n, d, d))]
    z_list, P_list = [], []
    f, J = f_list[0], J_list[0]
    for k in range(depth - 1):
        A, b = params.layers[k]
        z = f @ A.T + b
        P = np.einsum("qi,nip->nqp", A, J, optimize=True)
        f = act.apply(z)
        J = act.d1(z)[:, :, None] * P
        z_list.append(z)
        P_list.append(P)
        f_list.append(f)
        J_list.append(J)

    grads: list[tuple[np.ndarray, np.ndarray]] = [None] * depth  # type: ignore[list-item]
    A_top, _ = params.layers[depth - 1]
    f_prev, J_prev = f_list[depth - 1], J_list[depth - 1]
    dA = (w @ f_prev + np.einsum("np,nip->i", s, J_prev, optimize=True))[None, :]
    db = np.array([w.sum()])
    grads[depth - 1] = (dA, db)
    # adjoints of the previous layer's value and Jacobian
    u = w[:, None] * A_top[0][None, :]
    V = A_top[0][None, :, None] * s[:, None, :]

    for k in range(depth - 2, -1, -1):
        A, _ = params.layers[k]
        z, P = z_list[k], P_list[k]
        s1, s2 = act.d1(z), act.d2(z)
        zeta = u * s1 + s2 * np.einsum("nqp,nqp->nq", V, P, optimize=True)
        W = V * s1[:, :, None]
        dA = zeta.T @ f_list[k] + np.einsum("nqp,nip->qi", W, J_list[k], optimize=True)
        db = zeta.sum(axis=0)
        grads[k] = (dA, db)
        if k > 0:
            u = zeta @ A
            V = np.einsum("qi,nqp->nip", A, W, optimize=True)

    parts = []
    for dA, db in grads:
        parts.append(dA.reshape(-1))
        parts.append(db)
    return np.concatenate(parts)


def backprop_params(params: NetworkParams, x, seed_value: float, seed_grad) -> np.ndarray:
    """Single-point convenience wrapper around backprop_params_batch."""
    X = np.asarray(x, dtype=np.float64).reshape(1, -1)
    w = np.array([float(seed_value)])
    s = None if seed_grad is None else np.asarray(seed_grad, dtype=np.float64).reshape(1, -1)
    return backprop_params_batch(params, X, w, s)


def clip_weights(params: NetworkParams, bound: float | None = None) -> NetworkParams:
    """Entrywise clip to [-bound, bound]; idempotent. Default bound is arch B_theta."""
    if bound is None:
        bound = params.arch.b_theta
    layers = [(np.clip(A, -bound, bound), np.clip(b, -bound, bound)) for A, b in params.layers]
    return NetworkParams(params.arch, layers)


def count_nonzero(params: NetworkParams) -> int:
    return int(sum(np.count_nonzero(A) + np.count_nonzero(b) for A, b in params.layers))


# ---------------------------------------------------------------------------
# capacity quantities


@dataclass(frozen=True)
class NetworkBounds:
    """Weight-Lipschitz and gradient-sup constants for a network class.

    l_value bounds |f(x; theta) - f(x; theta~)| / ||theta - theta~||_2,
    b_grad bounds sup |partial_p f|, and l_grad does for the spatial gradient
    what l_value does for the value.  Values may be +inf; logs are exact.
    """

    l_value: float
    b_grad: float
    l_grad: float
    ln_l_value: float
    ln_b_grad: float
    ln_l_grad: float


def network_bounds(arch: NetworkArch, n_nonzero: int) -> NetworkBounds:
    if n_nonzero < 1:
        raise ValueError("n_nonzero must be >= 1")
    depth = arch.depth
    ln_btheta = math.log(arch.b_theta)
    ln_prod_hidden = sum(math.log(wd) for wd in arch.hidden_widths)
    ln_n = math.log(n_nonzero)
    ln_bp = math.log(arch.activation.b_rho_prime) if arch.activation.b_rho_prime > 0 else -math.inf

    ln_l_value = 0.5 * ln_n + (depth - 1) * ln_btheta + ln_prod_hidden
    ln_b_grad = ln_prod_hidden + depth * ln_btheta + (depth - 1) * ln_bp
    ln_l_grad = 0.5 * ln_n + math.log(depth + 1) + 2 * depth * ln_btheta + 2 * ln_prod_hidden
    return NetworkBounds(
        l_value=exp_or_inf(ln_l_value),
        b_grad=exp_or_inf(ln_b_grad),
        l_grad=exp_or_inf(ln_l_grad),
        ln_l_value=ln_l_value,
        ln_b_grad=ln_b_grad,
        ln_l_grad=ln_l_grad,
    )


class RecipeError(ValueError):
    """Raised when the accuracy target implies an unbuildable architecture."""


@dataclass(frozen=True)
class RecipeResult:
    arch: NetworkArch
    weight_budget: int
    requested_b_theta: float  # may exceed the cap; see b_theta_capped
    b_theta_capped: bool


# ceil() of float formulas gets an anti-roundoff nudge so limiting cases
# (e.g. a budget expression tending to exactly 1) do not round up spuriously
_CEIL_NUDGE = 1e-9


def _nudged_ceil(x: float) -> int:
    return int(math.ceil(x - _CEIL_NUDGE))


def arch_recipe(
    epsilon: float,
    d: int,
    mu: float,
    beta: float,
    c_user: float = 1.0,
    activation: ActivationKind = TANH,
    max_b_theta: float = 1e12,
    max_weights: int = 10_000_000,
) -> RecipeResult:
    """Architecture sized for target accuracy ``epsilon``.

    Depth grows like log2(d+1); the total weight budget scales like
    (beta^2 eps)^(-d/(1-mu)) and is spread over equal-width hidden layers; the
    weight bound scales like (beta^2 eps)^(-(9d+8)/(2-2mu)) and is capped at
    ``max_b_theta`` (the cap is flagged in the result).
    """
    if not (0.0 < epsilon < 1.0):
        raise RecipeError(f"epsilon must be in (0, 1), got {epsilon}")
    if not (0.0 < mu < 1.0):
        raise RecipeError(f"mu must be in (0, 1), got {mu}")
    if d < 1:
        raise RecipeError(f"dimension must be >= 1, got {d}")
    if beta <= 0:
        raise RecipeError(f"beta must be > 0, got {beta}")
    if c_user < 1:
        raise RecipeError(f"c_user must be >= 1, got {c_user}")

    depth = max(1, _nudged_ceil(c_user * math.log2(d + 1)))
    base = beta * beta * epsilon
    ln_base = 2.0 * math.log(beta) + math.log(epsilon)  # log(beta^2 * eps)

    ln_budget = math.log(c_user) - (d / (1.0 - mu)) * ln_base
    if ln_budget > math.log(max_weights):
        raise RecipeError(
            f"weight budget exp({ln_budget:.2f}) exceeds limit {max_weights}; increase epsilon"
        )
    # safe to leave log-space: the guard above keeps this within double range
    budget = max(1, _nudged_ceil(c_user * math.pow(base, -d / (1.0 - mu))))

    try:
        requested = c_user * math.pow(base, -(9.0 * d + 8.0) / (2.0 - 2.0 * mu))
    except OverflowError:
        requested = math.inf
    capped = requested > max_b_theta
    b_theta = max(1.0, min(requested, max_b_theta))

    if depth == 1:
        widths = (d, 1)
    else:
        # largest equal hidden width whose dense weight count fits the budget
        def weight_count(w: int) -> int:
            return (d * w + w) + (depth - 2) * (w * w + w) + (w + 1)

        w = 1
        while weight_count(w + 1) <= budget:
            w += 1
        widths = (d,) + (w,) * (depth - 1) + (1,)

    arch = NetworkArch(widths=widths, activation=activation, b_theta=b_theta)
    return RecipeResult(arch=arch, weight_budget=budget, requested_b_theta=requested, b_theta_capped=capped)


# ---------------------------------------------------------------------------
# checkpoints


def save_checkpoint(params: NetworkParams, path: str) -> None:
    """Write a JSON checkpoint atomically (temp file + rename)."""
    doc = {
        "arch": {
            "depth": params.arch.depth,
            "widths": list(params.arch.widths),
            "activation": params.arch.activation.name,
            "b_theta": params.arch.b_theta,
        },
        "layers": [
            {"A": [float(v) for v in A.reshape(-1)], "b": [float(v) for v in b]}
            for A, b in params.layers
        ],
    }
    tmp = f"{path}.partial"
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)
    os.replace(tmp, path)


def load_checkpoint(path: str) -> NetworkParams:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    arch_doc = doc["arch"]
    widths = tuple(int(w) for w in arch_doc["widths"])
    if int(arch_doc["depth"]) != len(widths) - 1:
        raise ValueError("checkpoint depth disagrees with widths")
    arch = NetworkArch(
        widths=widths,
        activation=activation_by_name(arch_doc["activation"]),
        b_theta=float(arch_doc["b_theta"]),
    )
    layers = []
    for k, layer in enumerate(doc["layers"]):
        n_out, n_in = widths[k + 1], widths[k]
        A = np.asarray(layer["A"], dtype=np.float64).reshape(n_out, n_in)
        b = np.asarray(layer["b"], dtype=np.float64)
        layers.append((A, b))
    return NetworkParams(arch, layers)
