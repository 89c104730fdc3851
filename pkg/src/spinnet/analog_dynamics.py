"""Continuous-time descent dynamics of analog networks and their uses.

Forward-Euler integration of the dissipative relaxation
``tau du/dt + u = T v + h`` with ``v = g(u)``, energy recording along the
trajectory, and a deterministic-annealing assignment solver for small
traveling-salesman instances with an exhaustive-search oracle alongside.
"""

from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .mean_field import ActivationFunction, FixedPointConfig, softassign
from .spin_core import validate_couplings, validate_field


@dataclass(frozen=True)
class NeuronState:
    """Internal state u and output v = g(u) of the analog units."""

    u: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "u", np.asarray(self.u, dtype=np.float64))
        object.__setattr__(self, "v", np.asarray(self.v, dtype=np.float64))
        if self.u.shape != self.v.shape:
            raise ValueError("u and v must have the same shape")


def initial_state(u0, g: ActivationFunction) -> NeuronState:
    u0 = np.asarray(u0, dtype=np.float64)
    return NeuronState(u=u0, v=g.g(u0))


def state_from_output(v0, g: ActivationFunction) -> NeuronState:
    """Build a consistent state from the output side, u0 = g^{-1}(v0)."""
    if g.g_inverse is None:
        raise ValueError(f"activation {g.name!r} has no inverse")
    v0 = np.asarray(v0, dtype=np.float64)
    return NeuronState(u=g.g_inverse(v0), v=v0)


@dataclass(frozen=True)
class IntegratorConfig:
    dt: float
    tau: np.ndarray
    steps: int
    record_every: int = 1

    def __post_init__(self):
        object.__setattr__(self, "tau", np.atleast_1d(np.asarray(self.tau, dtype=np.float64)))
        if not (self.dt > 0.0):
            raise ValueError("dt must be positive")
        if np.any(self.tau <= 0.0):
            raise ValueError("all time constants must be positive")
        if np.any(self.dt / self.tau > 1.0):
            raise ValueError("dt/tau must not exceed 1 (explicit stability guard)")
        if self.steps < 1:
            raise ValueError("steps must be at least 1")
        if self.record_every < 1:
            raise ValueError("record_every must be at least 1")


@dataclass
class Trajectory:
    times: np.ndarray
    states: list
    energies: np.ndarray

    @property
    def final(self) -> NeuronState:
        return self.states[-1]


def network_energy(t, h, g: ActivationFunction, v) -> float:
    """Lyapunov energy -1/2 sum T_ij v_i v_j - sum h_i v_i + sum phi(v_i)."""
    if g.phi is None:
        raise ValueError(f"activation {g.name!r} carries no potential phi")
    t = validate_couplings(t)
    h = validate_field(h, t.shape[0])
    v = np.asarray(v, dtype=np.float64)
    return float(-0.5 * v @ t @ v - h @ v + np.sum(g.phi(v)))


def _alpha(cfg: IntegratorConfig, n: int) -> np.ndarray:
    tau = cfg.tau if cfg.tau.shape == (n,) else np.full(n, cfg.tau[0])
    if tau.shape != (n,):
        raise ValueError(f"tau must be scalar or length {n}")
    return cfg.dt / tau


def euler_step(state: NeuronState, t, h, g: ActivationFunction,
               cfg: IntegratorConfig) -> NeuronState:
    """One forward-Euler update u' = (1 - dt/tau) u + (dt/tau)(T v + h).

    With dt = tau the self-coupling coefficient vanishes and the step is a
    single feed-forward layer application.
    """
    t = validate_couplings(t)
    n = t.shape[0]
    h = validate_field(h, n)
    a = _alpha(cfg, n)
    u = (1.0 - a) * state.u + a * (t @ state.v + h)
    return NeuronState(u=u, v=g.g(u))


def integrate(state0: NeuronState, t, h, g: ActivationFunction,
              cfg: IntegratorConfig) -> Trajectory:
    """Run cfg.steps Euler updates, recording states and energies.

    Records step 0, every record_every-th step, and the final step. Aborts
    with the offending step index if the state leaves the finite range.
    """
    t = validate_couplings(t)
    n = t.shape[0]
    h = validate_field(h, n)

    def recorded_energy(state, k):
        with np.errstate(over="ignore", invalid="ignore"):
            energy = network_energy(t, h, g, state.v)
        if not np.isfinite(energy):
            raise FloatingPointError(f"non-finite energy at step {k}")
        return energy

    times = [0.0]
    states = [state0]
    energies = [recorded_energy(state0, 0)]
    state = state0
    for k in range(1, cfg.steps + 1):
        state = euler_step(state, t, h, g, cfg)
        if not (np.all(np.isfinite(state.u)) and np.all(np.isfinite(state.v))):
            raise FloatingPointError(f"non-finite state at step {k}")
        if k % cfg.record_every == 0 or k == cfg.steps:
            times.append(k * cfg.dt)
            states.append(state)
            energies.append(recorded_energy(state, k))
    return Trajectory(times=np.asarray(times), states=states,
                      energies=np.asarray(energies))


def trajectory_to_csv(traj: Trajectory, path) -> None:
    """Write a trajectory as CSV: time, energy, v_0..v_{n-1}."""
    n = len(traj.states[0].v)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["time", "energy"] + [f"v_{i}" for i in range(n)])
        for time, state, energy in zip(traj.times, traj.states, traj.energies):
            writer.writerow([repr(float(time)), repr(float(energy))]
                            + [repr(float(x)) for x in state.v])


@dataclass(frozen=True)
class TspInstance:
    """City coordinates with the derived Euclidean distance matrix."""

    coords: np.ndarray
    distance: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "coords", np.asarray(self.coords, dtype=np.float64))
        object.__setattr__(self, "distance", np.asarray(self.distance, dtype=np.float64))
        d = self.distance
        if d.shape != (len(self.coords), len(self.coords)):
            raise ValueError("distance matrix shape does not match coordinates")
        if not np.array_equal(d, d.T) or np.any(np.diagonal(d) != 0.0) or np.any(d < 0.0):
            raise ValueError("distance matrix must be symmetric, nonnegative, zero diagonal")

    def __len__(self) -> int:
        return len(self.coords)

    @classmethod
    def from_coords(cls, coords) -> "TspInstance":
        coords = np.asarray(coords, dtype=np.float64)
        if coords.ndim != 2 or coords.shape[1] != 2:
            raise ValueError("coords must be an (n, 2) array of city positions")
        diff = coords[:, None, :] - coords[None, :, :]
        return cls(coords=coords, distance=np.sqrt((diff ** 2).sum(axis=-1)))


def load_tsp_csv(path) -> TspInstance:
    """Read city coordinates from CSV rows of 'x,y'."""
    coords = []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row:
                continue
            coords.append((float(row[0]), float(row[1])))
    return TspInstance.from_coords(np.asarray(coords))


def tour_length(distance, permutation) -> float:
    """Length of the closed tour visiting cities in the given order."""
    perm = np.asarray(permutation, dtype=int)
    return float(distance[perm, np.roll(perm, -1)].sum())


def brute_force_tour(inst: TspInstance):
    """Exhaustive oracle: the optimal tour by enumerating (n-1)! orders."""
    n = len(inst)
    if n < 3:
        raise ValueError("a tour needs at least 3 cities")
    best_perm, best_len = None, np.inf
    for rest in itertools.permutations(range(1, n)):
        perm = (0,) + rest
        length = tour_length(inst.distance, perm)
        if length < best_len:
            best_perm, best_len = perm, length
    return np.asarray(best_perm), best_len


def geometric_schedule(beta0: float = 1.0, rate: float = 1.05,
                       stages: int = 200) -> np.ndarray:
    """Default annealing schedule beta_k = beta0 * rate^k."""
    if beta0 <= 0.0 or rate <= 1.0 or stages < 1:
        raise ValueError("need beta0 > 0, rate > 1, stages >= 1")
    return beta0 * rate ** np.arange(stages)


@dataclass(frozen=True)
class TspResult:
    permutation: np.ndarray
    tour_length: float
    assignment: np.ndarray
    fallback_used: bool
    stage_history: Optional[list] = field(default=None, compare=False)


def _extract_permutation(v: np.ndarray):
    """Row-wise argmax; on conflicts, greedy assignment by descending weight."""
    n = v.shape[0]
    pos = np.argmax(v, axis=1)  # ties resolve to the lowest index
    if len(set(pos.tolist())) == n:
        perm = np.empty(n, dtype=int)
        perm[pos] = np.arange(n)
        return perm, False
    perm = np.full(n, -1, dtype=int)
    used_city, used_pos = set(), set()
    for flat in np.argsort(-v, axis=None):
        i, a = divmod(int(flat), n)
        if i in used_city or a in used_pos:
            continue
        perm[a] = i
        used_city.add(i)
        used_pos.add(a)
        if len(used_city) == n:
            break
    return perm, True


def solve_tsp(inst: TspInstance, anneal,
              cfg: FixedPointConfig = FixedPointConfig(damping=0.3, max_sweeps=2000),
              seed: int = 0, self_coupling: float = 1.0,
              inner_sweeps: int = 10, record_stages: bool = False) -> TspResult:
    """Deterministic-annealing assignment solver for small tours.

    Cities are softly assigned to tour positions by a doubly stochastic
    matrix. Each annealing stage exponentiates the negative gradient of the
    relaxed tour length (plus a self-coupling term that rewards vertex
    solutions), renormalizes with alternating row/column sweeps, and damps
    the update; increasing beta hardens the assignment toward a permutation.
    Annealing stops once the assignment is effectively hard or the
    normalization stops converging within budget (the schedule has passed
    its useful range); the last fully normalized assignment is kept.

    Args:
        inst: city instance, 3 <= n <= 12 so the exact oracle stays feasible.
        anneal: strictly increasing positive beta schedule.
        cfg: Sinkhorn tolerance/budget; cfg.damping mixes old and new
             assignments between stages (anti-phase oscillation guard).
        seed: seed of the tiny symmetry-breaking perturbation.
        self_coupling: weight of the vertex-rewarding diagonal term.
        inner_sweeps: relaxation updates per stage.
        record_stages: keep (beta, entropy, tour length) per stage.

    Returns:
        TspResult; ``fallback_used`` flags greedy conflict resolution.
    """
    n = len(inst)
    if not (3 <= n <= 12):
        raise ValueError("solve_tsp handles 3 to 12 cities")
    anneal = np.asarray(anneal, dtype=np.float64)
    if np.any(anneal <= 0.0) or np.any(np.diff(anneal) <= 0.0):
        raise ValueError("annealing schedule must be positive and strictly increasing")

    d = inst.distance
    rng = np.random.default_rng(seed)
    v = np.full((n, n), 1.0 / n) * (1.0 + 1e-3 * rng.uniform(-1.0, 1.0, (n, n)))
    v = softassign(v, cfg).v

    history = [] if record_stages else None
    stalled = False
    for beta in anneal:
        for _ in range(inner_sweeps):
            grad = d @ (np.roll(v, -1, axis=1) + np.roll(v, 1, axis=1))
            u = -grad + self_coupling * v
            w = beta * u
            m = np.maximum(np.exp(w - w.max(axis=1, keepdims=True)), 1e-300)
            result = softassign(m, cfg)
            if not result.converged:
                stalled = True
                break
            new_v = (1.0 - cfg.damping) * result.v + cfg.damping * v
            delta = float(np.max(np.abs(new_v - v)))
            v = new_v
            if delta < 1e-4:
                break
        if record_stages:
            perm, _ = _extract_permutation(v)
            with np.errstate(invalid="ignore"):
                entropy = float(-np.sum(np.where(v > 0.0, v * np.log(v), 0.0)))
            history.append((float(beta), entropy, tour_length(d, perm)))
        if stalled or float(np.min(v.max(axis=1))) > 0.995:
            break

    perm, fallback = _extract_permutation(v)
    return TspResult(permutation=perm, tour_length=tour_length(d, perm),
                     assignment=v, fallback_used=fallback, stage_history=history)
