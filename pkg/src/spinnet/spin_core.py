"""Exact statistical mechanics of small binary-spin systems.

Energies, Boltzmann probabilities, partition functions, and moments are
computed by full enumeration of all 2^n configurations. Everything here is
desk-scale ground truth: the rest of the package treats these results as
the oracle its approximations are measured against.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Full enumeration of 2^n states; anything larger belongs to an
# approximate method, not this oracle.
ENUMERATION_LIMIT = 24

_CHUNK = 1 << 16


def validate_couplings(t) -> np.ndarray:
    """Validate a coupling matrix: square, symmetric, zero diagonal, finite."""
    t = np.asarray(t, dtype=np.float64)
    if t.ndim != 2 or t.shape[0] != t.shape[1]:
        raise ValueError(f"coupling matrix must be square, got shape {t.shape}")
    if not np.all(np.isfinite(t)):
        raise ValueError("coupling matrix contains non-finite entries")
    if not np.array_equal(t, t.T):
        raise ValueError("coupling matrix must be symmetric")
    if np.any(np.diagonal(t) != 0.0):
        raise ValueError("coupling matrix must have zero diagonal")
    return t


def validate_field(h, n: int) -> np.ndarray:
    """Validate an external field vector of length n."""
    h = np.asarray(h, dtype=np.float64)
    if h.shape != (n,):
        raise ValueError(f"field vector must have shape ({n},), got {h.shape}")
    if not np.all(np.isfinite(h)):
        raise ValueError("field vector contains non-finite entries")
    return h


def validate_spins(s, n: int) -> np.ndarray:
    """Validate a spin configuration: length n, entries exactly -1 or +1."""
    s = np.asarray(s, dtype=np.float64)
    if s.shape != (n,):
        raise ValueError(f"spin configuration must have shape ({n},), got {s.shape}")
    if not np.all(np.abs(s) == 1.0):
        raise ValueError("spin entries must be exactly -1 or +1")
    return s


def validate_beta(beta) -> float:
    """Validate an inverse temperature: positive and finite."""
    beta = float(beta)
    if not np.isfinite(beta) or beta <= 0.0:
        raise ValueError(f"inverse temperature must be positive and finite, got {beta}")
    return beta


def random_instance(n: int, rng: np.random.Generator,
                    t_scale: float = 1.0, h_scale: float = 0.5):
    """Draw a random symmetric zero-diagonal coupling matrix and field.

    Upper-triangle couplings are uniform in [-t_scale, t_scale] and mirrored;
    field entries are uniform in [-h_scale, h_scale].
    """
    t = np.zeros((n, n))
    iu = np.triu_indices(n, k=1)
    t[iu] = rng.uniform(-t_scale, t_scale, size=len(iu[0]))
    t = t + t.T
    h = rng.uniform(-h_scale, h_scale, size=n)
    return t, h


@dataclass(frozen=True)
class PartitionResult:
    """Exact thermodynamics of a small spin system from enumeration.

    ``z`` may overflow to inf for extreme beta; ``log_z`` is always finite
    and is the primary quantity.
    """

    log_z: float
    z: float
    f: float
    entropy: float
    mean_spins: np.ndarray
    pair_moments: np.ndarray


def ising_energy(t, h, s) -> float:
    """Energy -1/2 sum_{i!=j} T_ij s_i s_j - sum_i h_i s_i.

    The 1/2 compensates double counting of ordered pairs; the zero diagonal
    of ``t`` keeps self-coupling out of the quadratic term.
    """
    t = validate_couplings(t)
    n = t.shape[0]
    h = validate_field(h, n)
    s = validate_spins(s, n)
    return float(-0.5 * s @ t @ s - h @ s)


def _spin_block(start: int, stop: int, n: int) -> np.ndarray:
    """Spin rows for state indices [start, stop): bit k of the index is spin k."""
    idx = np.arange(start, stop, dtype=np.int64)
    bits = (idx[:, None] >> np.arange(n)) & 1
    return bits.astype(np.float64) * 2.0 - 1.0


def _check_enumerable(n: int) -> None:
    if n > ENUMERATION_LIMIT:
        raise ValueError(
            f"enumeration over 2^{n} states refused; hard limit is n <= {ENUMERATION_LIMIT}")


def brute_force_partition(t, h, beta) -> PartitionResult:
    """Exact Z, F, S and moments by summation over all 2^n configurations.

    States are visited in plain binary-counter order and paired with their
    global spin flips: the flip leaves the interaction energy bit-identical
    and negates the field term, so log-sum-exp accumulation stays stable and
    the zero-field magnetization cancels exactly.

    Args:
        t: symmetric zero-diagonal coupling matrix.
        h: external field vector.
        beta: inverse temperature (k_B = 1).

    Returns:
        PartitionResult with log Z, Z, F = -log(Z)/beta, the entropy
        S = -<log p> of the Boltzmann distribution, and the first and
        second spin moments.
    """
    t = validate_couplings(t)
    n = t.shape[0]
    h = validate_field(h, n)
    beta = validate_beta(beta)
    _check_enumerable(n)

    half = 1 << (n - 1)

    # Pass 1: energies of each state/flip pair, then the stabilized log Z.
    e_int = np.empty(half)
    fld = np.empty(half)
    for start in range(0, half, _CHUNK):
        stop = min(start + _CHUNK, half)
        s = _spin_block(start, stop, n)
        e_int[start:stop] = -0.5 * ((s @ t) * s).sum(axis=1)
        fld[start:stop] = s @ h
    e_plus = e_int - fld   # the enumerated states
    e_minus = e_int + fld  # their global flips

    shift = min(e_plus.min(), e_minus.min())
    w_plus = np.exp(-beta * (e_plus - shift))
    w_minus = np.exp(-beta * (e_minus - shift))
    log_z = -beta * shift + np.log(w_plus.sum() + w_minus.sum())

    p_plus = np.exp(-beta * e_plus - log_z)
    p_minus = np.exp(-beta * e_minus - log_z)

    # Pass 2: moments. Pairing state and flip keeps <s_i> exactly zero at h=0.
    mean_spins = np.zeros(n)
    pair_moments = np.zeros((n, n))
    for start in range(0, half, _CHUNK):
        stop = min(start + _CHUNK, half)
        s = _spin_block(start, stop, n)
        mean_spins += s.T @ (p_plus[start:stop] - p_minus[start:stop])
        pair_moments += s.T @ ((p_plus[start:stop] + p_minus[start:stop])[:, None] * s)
    np.fill_diagonal(pair_moments, 1.0)  # s_i^2 = 1 holds exactly

    mean_energy = float(p_plus @ e_plus + p_minus @ e_minus)
    f = -log_z / beta
    # S = -<log p> with log p = -beta*H - log Z substituted in.
    entropy = beta * mean_energy + log_z

    return PartitionResult(
        log_z=float(log_z),
        z=float(np.exp(log_z)),
        f=float(f),
        entropy=float(entropy),
        mean_spins=mean_spins,
        pair_moments=pair_moments,
    )


def boltzmann_prob(t, h, beta, s) -> float:
    """Probability e^{-beta H[s]} / Z of one configuration."""
    t = validate_couplings(t)
    n = t.shape[0]
    h = validate_field(h, n)
    beta = validate_beta(beta)
    s = validate_spins(s, n)
    _check_enumerable(n)
    result = brute_force_partition(t, h, beta)
    return float(np.exp(-beta * ising_energy(t, h, s) - result.log_z))
