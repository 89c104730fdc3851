"""Coupled activation/weight dynamics: Hebbian learning and recall.

Connections relax toward the coincidence of the units they join, so a
small population of repeatedly presented patterns is stored as its
correlation matrix. Recall runs asynchronous sign updates that descend the
pattern-alignment energy, retrieving a stored pattern from a corrupted
probe.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .spin_core import validate_couplings, validate_field, validate_spins

MODES = ("learning", "recall")


@dataclass(frozen=True)
class HebbConfig:
    """Mode weights and time constant of the weight dynamics.

    Learning mode requires a_weight > b_weight (input tracking dominates);
    recall mode requires b_weight > a_weight and freezes the weights.
    """

    a_weight: float
    b_weight: float
    c_scale: float
    tau_t: float
    mode: str = "learning"

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.a_weight < 0.0 or self.b_weight < 0.0:
            raise ValueError("mode weights must be nonnegative")
        # c = 0 is allowed for the weight dynamics (T relaxes to zero); the
        # quadratic weight potential is undefined there and rejected in
        # combined_energy instead.
        if self.c_scale < 0.0:
            raise ValueError("c_scale must be nonnegative")
        if self.tau_t <= 0.0:
            raise ValueError("tau_t must be positive")
        if self.mode == "learning" and not (self.a_weight > self.b_weight):
            raise ValueError("learning mode requires a_weight > b_weight")
        if self.mode == "recall" and not (self.b_weight > self.a_weight):
            raise ValueError("recall mode requires b_weight > a_weight")


@dataclass(frozen=True)
class PatternSet:
    """Stored patterns as a (P, n) array of +/-1 rows with presentation weights."""

    patterns: np.ndarray
    weights: Optional[np.ndarray] = None

    def __post_init__(self):
        p = np.asarray(self.patterns, dtype=np.float64)
        if p.ndim != 2 or p.shape[0] == 0:
            raise ValueError("patterns must be a nonempty (P, n) array")
        if not np.all(np.abs(p) == 1.0):
            raise ValueError("pattern entries must be exactly -1 or +1")
        object.__setattr__(self, "patterns", p)
        if self.weights is not None:
            w = np.asarray(self.weights, dtype=np.float64)
            if w.shape != (p.shape[0],) or np.any(w < 0.0):
                raise ValueError("weights must be a nonnegative vector, one per pattern")
            if abs(w.sum() - 1.0) > 1e-10:
                raise ValueError("weights must sum to 1")
            object.__setattr__(self, "weights", w)

    @property
    def count(self) -> int:
        return self.patterns.shape[0]

    @property
    def n(self) -> int:
        return self.patterns.shape[1]


@dataclass(frozen=True)
class MemoryMatrix:
    """Learned connection matrix: symmetric with a forced zero diagonal."""

    t: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "t", validate_couplings(self.t))

    @property
    def n(self) -> int:
        return self.t.shape[0]


@dataclass(frozen=True)
class RecallResult:
    spins: np.ndarray
    converged: bool
    energy_trace: np.ndarray


def binarize_field(h) -> np.ndarray:
    """Map an input field to spins by sign, with sign(0) -> +1."""
    h = np.asarray(h, dtype=np.float64)
    return np.where(h >= 0.0, 1.0, -1.0)


def combined_energy(s, mem: MemoryMatrix, h, cfg: HebbConfig) -> float:
    """Joint energy of spins and weights.

    -A sum_i h_i s_i - B sum_{i<j} T_ij s_i s_j + B sum_{i<j} T_ij^2 / (2c)

    Sums run over unordered pairs, so no 1/2 on the coupling term.
    """
    if cfg.c_scale == 0.0:
        raise ValueError("the quadratic weight potential needs c_scale > 0")
    n = mem.n
    s = validate_spins(s, n)
    h = validate_field(h, n)
    t = mem.t
    pair_term = 0.5 * s @ t @ s                 # sum over i<j of T_ij s_i s_j
    penalty = 0.5 * np.sum(t * t) / (2.0 * cfg.c_scale)
    return float(-cfg.a_weight * (h @ s) - cfg.b_weight * pair_term
                 + cfg.b_weight * penalty)


def hebb_step(mem: MemoryMatrix, s, cfg: HebbConfig, dt: float) -> MemoryMatrix:
    """One relaxation step T <- (1 - dt/tau_T) T + (dt/tau_T) c s s^T, off-diagonal.

    Only valid in learning mode; recall mode freezes the weights.
    """
    if cfg.mode != "learning":
        raise ValueError("hebb_step requires learning mode; the recall-mode learning rate is zero")
    if dt < 0.0 or dt / cfg.tau_t > 1.0:
        raise ValueError("need 0 <= dt/tau_t <= 1")
    s = validate_spins(s, mem.n)
    r = dt / cfg.tau_t
    t = (1.0 - r) * mem.t + r * cfg.c_scale * np.outer(s, s)
    np.fill_diagonal(t, 0.0)
    return MemoryMatrix(t)


def learn(patterns: PatternSet, cfg: HebbConfig, dt: float, sweeps: int) -> MemoryMatrix:
    """Present patterns round-robin until T approximates the population average.

    Each sweep presents every pattern once; a pattern's effective rate is
    scaled by its presentation weight so the fixed point is the weighted
    correlation c * sum_p w_p s^p (s^p)^T off the diagonal. Deviation from
    that average shrinks as dt/tau_t shrinks.
    """
    if cfg.mode != "learning":
        raise ValueError("learn requires learning mode")
    if sweeps < 1:
        raise ValueError("sweeps must be at least 1")
    n = patterns.n
    mem = MemoryMatrix(np.zeros((n, n)))
    if patterns.weights is None:
        rates = [dt] * patterns.count
    else:
        rates = [dt * float(w) * patterns.count for w in patterns.weights]
    if any(r / cfg.tau_t > 1.0 for r in rates):
        raise ValueError("weighted dt/tau_t exceeds 1; lower dt")
    for _ in range(sweeps):
        for p in range(patterns.count):
            mem = hebb_step(mem, patterns.patterns[p], cfg, rates[p])
    return mem


def recall(mem: MemoryMatrix, probe, h_weight: float = 0.0,
           max_sweeps: int = 100) -> RecallResult:
    """Asynchronous sign updates from a probe until a full sweep is stable.

    Units update in index order as s_i <- sign((T s)_i + h_weight * probe_i)
    with sign(0) -> +1. Every accepted flip lowers (or keeps) the energy
    -sum_{i<j} T_ij s_i s_j - h_weight sum_i probe_i s_i, so the recorded
    per-sweep energy trace is non-increasing. The weights are never touched.
    """
    if h_weight < 0.0:
        raise ValueError("h_weight must be nonnegative")
    n = mem.n
    probe = validate_spins(probe, n)
    t = mem.t
    s = probe.copy()

    def energy(state):
        return float(-0.5 * state @ t @ state - h_weight * (probe @ state))

    trace = [energy(s)]
    converged = False
    for _ in range(max_sweeps):
        changed = False
        for i in range(n):
            field = t[i] @ s + h_weight * probe[i]
            new = 1.0 if field >= 0.0 else -1.0
            if new != s[i]:
                s[i] = new
                changed = True
        trace.append(energy(s))
        if not changed:
            converged = True
            break
    return RecallResult(spins=s, converged=converged, energy_trace=np.asarray(trace))


def load_patterns(path) -> PatternSet:
    """Read patterns from text: one per line, characters '+'/'-' or '1'/'0'."""
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            row = []
            for ch in line:
                if ch in "+1":
                    row.append(1.0)
                elif ch in "-0":
                    row.append(-1.0)
                else:
                    raise ValueError(f"unexpected pattern character {ch!r}")
            rows.append(row)
    return PatternSet(np.asarray(rows))


def save_patterns(patterns: PatternSet, path) -> None:
    with open(path, "w") as fh:
        for row in patterns.patterns:
            fh.write("".join("+" if x > 0 else "-" for x in row) + "\n")
