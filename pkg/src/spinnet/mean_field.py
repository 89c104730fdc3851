"""Variational mean-field machinery for small spin networks.

Entropy potentials, the mean-field energy upper bound on the exact free
energy, fixed-point relaxation of the self-consistency equations, soft-max
over discrete alternatives, and alternating row/column normalization to a
doubly stochastic assignment matrix.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .spin_core import brute_force_partition, validate_beta, validate_couplings, validate_field

KINDS = ("bipolar", "unipolar")

# Iterates are clamped this far inside the open range before entropy terms
# are evaluated; tanh saturates to exactly 1.0 in float64 near |u| ~ 19.
INTERIOR_EPS = 1e-12


def clamp_interior(v: np.ndarray, kind: str, eps: float = INTERIOR_EPS) -> np.ndarray:
    """Pull values strictly inside the valid open range for ``kind``."""
    if kind == "bipolar":
        return np.clip(v, -1.0 + eps, 1.0 - eps)
    if kind == "unipolar":
        return np.clip(v, eps, 1.0 - eps)
    raise ValueError(f"unknown activation kind {kind!r}")


def _check_interior(v: np.ndarray, kind: str) -> None:
    if kind == "bipolar":
        bad = np.any(v <= -1.0) or np.any(v >= 1.0)
    elif kind == "unipolar":
        bad = np.any(v <= 0.0) or np.any(v >= 1.0)
    else:
        raise ValueError(f"unknown activation kind {kind!r}")
    if bad or not np.all(np.isfinite(v)):
        raise ValueError(f"{kind} activation values must lie strictly inside the open range")


@dataclass(frozen=True)
class Activation:
    """Relaxed unit values: bipolar v in (-1, 1) or unipolar v in (0, 1)."""

    v: np.ndarray
    kind: str = "bipolar"

    def __post_init__(self):
        object.__setattr__(self, "v", np.asarray(self.v, dtype=np.float64))
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {self.kind!r}")
        _check_interior(self.v, self.kind)

    def __len__(self) -> int:
        return len(self.v)


@dataclass(frozen=True)
class ActivationFunction:
    """A monotone activation g with its inverse, derivative, and potential.

    ``phi`` is the antiderivative of ``g_inverse``; it supplies the entropy
    term of the network energy. ``jacobian`` is set only for vector-valued
    activations (soft-max), where the elementwise derivative does not apply.
    """

    name: str
    g: Callable[[np.ndarray], np.ndarray]
    g_prime: Optional[Callable[[np.ndarray], np.ndarray]] = None
    g_inverse: Optional[Callable[[np.ndarray], np.ndarray]] = None
    phi: Optional[Callable[[np.ndarray], np.ndarray]] = None
    jacobian: Optional[Callable[[np.ndarray], np.ndarray]] = None


@dataclass(frozen=True)
class FixedPointConfig:
    tol: float = 1e-8
    max_sweeps: int = 10000
    damping: float = 0.0
    update_order: str = "sequential"

    def __post_init__(self):
        if not (self.tol > 0.0):
            raise ValueError("tol must be positive")
        if self.max_sweeps < 1:
            raise ValueError("max_sweeps must be at least 1")
        if not (0.0 <= self.damping < 1.0):
            raise ValueError("damping must lie in [0, 1)")
        if self.update_order not in ("synchronous", "sequential"):
            raise ValueError("update_order must be 'synchronous' or 'sequential'")


@dataclass(frozen=True)
class FixedPointResult:
    activation: Activation
    sweeps: int
    residual: float
    converged: bool


@dataclass(frozen=True)
class SoftassignResult:
    v: np.ndarray
    sweeps: int
    residual: float
    converged: bool


@dataclass(frozen=True)
class BoundCheck:
    f_exact: float
    e_mft: float
    gap: float


def phi_potential(kind: str, beta, v):
    """Entropy potential of a single relaxed unit.

    bipolar:  (1/beta) [ ((1+v)/2) log((1+v)/2) + ((1-v)/2) log((1-v)/2) ]
    unipolar: (1/beta) [ v log v + (1-v) log(1-v) ]

    Both are the negative entropy of the unit's firing distribution divided
    by beta; the derivative is the inverse activation function over beta.
    """
    beta = validate_beta(beta)
    v = np.asarray(v, dtype=np.float64)
    _check_interior(v, kind)
    if kind == "bipolar":
        p, q = (1.0 + v) / 2.0, (1.0 - v) / 2.0
        out = (p * np.log(p) + q * np.log(q)) / beta
    else:
        out = (v * np.log(v) + (1.0 - v) * np.log(1.0 - v)) / beta
    return out if out.ndim else float(out)


def tanh_activation(beta: float = 1.0) -> ActivationFunction:
    """g(u) = tanh(beta u), the bipolar mean-field activation."""
    beta = validate_beta(beta)
    name = "tanh" if beta == 1.0 else f"tanh:{beta!r}"
    return ActivationFunction(
        name=name,
        g=lambda u: np.tanh(beta * u),
        g_prime=lambda u: beta / np.cosh(beta * u) ** 2,
        g_inverse=lambda v: np.arctanh(v) / beta,
        phi=lambda v: phi_potential("bipolar", beta, clamp_interior(v, "bipolar")),
    )


def logistic_activation(beta: float = 1.0) -> ActivationFunction:
    """g(u) = 1 / (1 + e^{-beta u}), the unipolar mean-field activation."""
    beta = validate_beta(beta)
    name = "logistic" if beta == 1.0 else f"logistic:{beta!r}"

    def g(u):
        return 1.0 / (1.0 + np.exp(-beta * np.asarray(u, dtype=np.float64)))

    return ActivationFunction(
        name=name,
        g=g,
        g_prime=lambda u: beta * g(u) * (1.0 - g(u)),
        g_inverse=lambda v: (np.log(v) - np.log1p(-np.asarray(v))) / beta,
        phi=lambda v: phi_potential("unipolar", beta, clamp_interior(v, "unipolar")),
    )


def identity_activation() -> ActivationFunction:
    """g(u) = u, used for auxiliary linear units."""
    return ActivationFunction(
        name="identity",
        g=lambda u: np.asarray(u, dtype=np.float64),
        g_prime=lambda u: np.ones_like(np.asarray(u, dtype=np.float64)),
        g_inverse=lambda v: np.asarray(v, dtype=np.float64),
        phi=lambda v: np.asarray(v, dtype=np.float64) ** 2 / 2.0,
    )


def softmax_activation(u, beta) -> np.ndarray:
    """v_a = e^{beta u_a} / sum_b e^{beta u_b}, stabilized by a max shift."""
    beta = validate_beta(beta)
    u = np.asarray(u, dtype=np.float64)
    if not np.all(np.isfinite(u)):
        raise ValueError("soft-max inputs must be finite")
    w = np.exp(beta * (u - u.max()))
    return w / w.sum()


def softmax_function(beta: float = 1.0) -> ActivationFunction:
    """Vector-valued soft-max activation with its Jacobian."""
    beta = validate_beta(beta)
    name = "softmax" if beta == 1.0 else f"softmax:{beta!r}"

    def jac(u):
        v = softmax_activation(u, beta)
        return beta * (np.diag(v) - np.outer(v, v))

    return ActivationFunction(
        name=name,
        g=lambda u: softmax_activation(u, beta),
        jacobian=jac,
    )


def mixed_activation(parts) -> ActivationFunction:
    """Elementwise activation applying different functions to index blocks.

    ``parts`` is a sequence of (ActivationFunction, count) pairs; the units
    of each block use that block's function. Only elementwise members
    (g, g_prime, g_inverse, phi) are supported.
    """
    parts = [(fn, int(cnt)) for fn, cnt in parts]
    if any(cnt < 1 for _, cnt in parts):
        raise ValueError("every block must contain at least one unit")
    if any(fn.jacobian is not None for fn, _ in parts):
        raise ValueError("mixed activations support elementwise members only")
    name = "mix(" + ",".join(f"{fn.name}x{cnt}" for fn, cnt in parts) + ")"
    total = sum(cnt for _, cnt in parts)

    def apply_blocks(member, x):
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (total,):
            raise ValueError(f"expected length-{total} input, got shape {x.shape}")
        out = np.empty(total)
        lo = 0
        for fn, cnt in parts:
            out[lo:lo + cnt] = getattr(fn, member)(x[lo:lo + cnt])
            lo += cnt
        return out

    return ActivationFunction(
        name=name,
        g=lambda u: apply_blocks("g", u),
        g_prime=lambda u: apply_blocks("g_prime", u),
        g_inverse=lambda v: apply_blocks("g_inverse", v),
        phi=lambda v: apply_blocks("phi", v),
    )


def activation_by_name(name: str) -> ActivationFunction:
    """Reconstruct an activation function from its serialized name."""
    if name.startswith("mix(") and name.endswith(")"):
        parts = []
        for piece in name[4:-1].split(","):
            spec, _, cnt = piece.rpartition("x")
            parts.append((activation_by_name(spec), int(cnt)))
        return mixed_activation(parts)
    base, _, rest = name.partition(":")
    beta = float(rest) if rest else 1.0
    if base == "tanh":
        return tanh_activation(beta)
    if base == "logistic":
        return logistic_activation(beta)
    if base == "identity":
        return identity_activation()
    if base == "softmax":
        return softmax_function(beta)
    raise ValueError(f"unknown activation name {name!r}")


def _kind_activation(kind: str, beta: float) -> ActivationFunction:
    return tanh_activation(beta) if kind == "bipolar" else logistic_activation(beta)


def mft_energy(t, h, beta, activation: Activation) -> float:
    """Mean-field energy -1/2 sum T_ij v_i v_j - sum h_i v_i + sum phi(v_i).

    For any interior v this upper-bounds the exact free energy of the spin
    system with the same couplings and field.
    """
    t = validate_couplings(t)
    n = t.shape[0]
    h = validate_field(h, n)
    beta = validate_beta(beta)
    v = activation.v
    if v.shape != (n,):
        raise ValueError(f"activation must have length {n}, got {v.shape}")
    phi = phi_potential(activation.kind, beta, v)
    return float(-0.5 * v @ t @ v - h @ v + np.sum(phi))


def fixed_point_iterate(t, h, beta, v0: Activation,
                        cfg: FixedPointConfig = FixedPointConfig()) -> FixedPointResult:
    """Relax v_i <- g(beta (T v + h)_i) to a self-consistent point.

    Sequential sweeps update one unit at a time in index order and perform
    exact coordinate descent on the mean-field energy; synchronous sweeps
    update all units at once and may oscillate on strong couplings.
    Exhausting max_sweeps returns the last iterate flagged non-converged.
    """
    t = validate_couplings(t)
    n = t.shape[0]
    h = validate_field(h, n)
    beta = validate_beta(beta)
    kind = v0.kind
    act = _kind_activation(kind, beta)

    v = v0.v.copy()
    d = cfg.damping
    residual = np.inf
    sweeps = 0
    for sweeps in range(1, cfg.max_sweeps + 1):
        if cfg.update_order == "synchronous":
            update = clamp_interior(act.g(t @ v + h), kind)
            v = (1.0 - d) * update + d * v
        else:
            for i in range(n):
                ui = t[i] @ v + h[i]
                v[i] = (1.0 - d) * clamp_interior(act.g(ui), kind) + d * v[i]
        residual = float(np.max(np.abs(v - act.g(t @ v + h))))
        if residual <= cfg.tol:
            return FixedPointResult(Activation(v, kind), sweeps, residual, True)
    return FixedPointResult(Activation(v, kind), sweeps, residual, False)


def softassign(m, cfg: FixedPointConfig = FixedPointConfig()) -> SoftassignResult:
    """Alternate row and column normalization toward a doubly stochastic matrix.

    Args:
        m: square matrix with strictly positive entries.
        cfg: tolerance and sweep budget; update_order and damping are unused.

    Returns:
        SoftassignResult whose ``v`` has row and column sums within ``tol``
        of 1 when converged; otherwise the last iterate, flagged.
    """
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)) or np.any(m <= 0.0):
        raise ValueError("all entries must be strictly positive")

    v = m.copy()
    residual = np.inf
    sweeps = 0
    for sweeps in range(1, cfg.max_sweeps + 1):
        v /= v.sum(axis=1, keepdims=True)
        v /= v.sum(axis=0, keepdims=True)
        residual = float(max(np.max(np.abs(v.sum(axis=1) - 1.0)),
                             np.max(np.abs(v.sum(axis=0) - 1.0))))
        if residual <= cfg.tol:
            return SoftassignResult(v, sweeps, residual, True)
    return SoftassignResult(v, sweeps, residual, False)


def verify_bound(t, h, beta, activation: Activation) -> BoundCheck:
    """Compare the mean-field energy with the exact free energy.

    The gap e_mft - f_exact is nonnegative (up to roundoff) for every
    interior bipolar activation, not just minimizers.
    """
    if activation.kind != "bipolar":
        raise ValueError("the exact enumeration reference uses +/-1 spins; "
                         "verify_bound requires a bipolar activation")
    e = mft_energy(t, h, beta, activation)
    f = brute_force_partition(t, h, beta).f
    return BoundCheck(f_exact=f, e_mft=e, gap=e - f)
