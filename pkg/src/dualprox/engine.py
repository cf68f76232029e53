"""Dual proximal gradient iterations, delay scheduling, traces, bound checks.

The engine is a deterministic round-based state machine over the stacked
dual vector ``lam = [theta_1..theta_N, mu_1..mu_N]``.  Each round every
agent reads a (possibly delayed) snapshot of ``lam``, exports its local
maximizer to its neighbours, assembles its gradient block, takes a gradient
step in ``theta`` and a proximal step in ``mu`` through the Moreau shortcut.
Neighbour contributions are always summed in ascending sender id so traces
are bitwise reproducible.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .convex import INF, conjugate_argmax, conjugate_value
from .errors import (
    HistoryUnderflowError,
    InsufficientTraceError,
    MalformedTraceError,
    MissingNeighborError,
    NonFiniteInitialError,
    StaleMixError,
    StepSizeViolationError,
)
from .model import ProblemInstance, apply_C, instance_hash, lipschitz_constant

PRNG_NAME = "numpy-PCG64"


# ---------------------------------------------------------------------------
# small value types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DualState:
    """Stacked dual vector ``[theta; mu]`` at iteration ``k``."""

    lam: np.ndarray
    k: int

    def theta(self, instance: ProblemInstance, i: int) -> np.ndarray:
        return self.lam[instance.theta_slice(i)]

    def mu(self, instance: ProblemInstance, i: int) -> np.ndarray:
        return self.lam[instance.mu_slice(i)]


@dataclass(frozen=True)
class StepSizes:
    """Uniform or per-agent positive step sizes."""

    mode: str  # "uniform" | "per_agent"
    values: np.ndarray

    def __post_init__(self):
        vals = np.atleast_1d(np.asarray(self.values, dtype=float))
        if np.any(vals <= 0):
            raise ValueError("step sizes must be strictly positive")
        object.__setattr__(self, "values", vals)

    @staticmethod
    def uniform(c: float, n_agents: int) -> "StepSizes":
        return StepSizes("uniform", np.full(n_agents, float(c)))

    @staticmethod
    def per_agent(values) -> "StepSizes":
        return StepSizes("per_agent", np.asarray(values, dtype=float))

    def satisfies_async_rule(self, h: float, D: int) -> bool:
        """Delay-aware admissibility: ``1/c_i >= h (D+1)^2`` for every agent."""
        return bool(np.all(1.0 / self.values >= h * (D + 1) ** 2 * (1 - 1e-12)))


def step_size_sync(h: float) -> float:
    """Synchronous step size ``c = 1/h``."""
    if h <= 0:
        raise ValueError("h must be positive")
    return 1.0 / h


def step_size_async(h: float, D: int, margins=None, n_agents: int = 1) -> StepSizes:
    """Per-agent sizes ``c_i = margin_i / (h (D+1)^2)`` with margins in (0, 1]."""
    if h <= 0:
        raise ValueError("h must be positive")
    if D < 0:
        raise ValueError("D must be nonnegative")
    if margins is None:
        margins = np.ones(n_agents)
    margins = np.atleast_1d(np.asarray(margins, dtype=float))
    if np.any(margins <= 0) or np.any(margins > 1):
        raise ValueError("margins must lie in (0, 1]")
    return StepSizes.per_agent(margins / (h * (D + 1) ** 2))


@dataclass
class DelaySchedule:
    """The read-instant map ``k -> tau(k)`` with staleness bound ``D``.

    Delays are uniform across agents at each instant.  ``worst_case`` uses
    ``tau(k) = max(0, k - D)``; ``seeded_random`` draws each delay from
    ``{0..D}`` with a named PRNG so schedules are reproducible; ``zero``
    means no delay.
    """

    bound: int
    kind: str = "worst_case"  # "worst_case" | "seeded_random" | "zero"
    seed: int | None = None
    _cache: list = field(default_factory=list, repr=False)

    def __post_init__(self):
        if self.bound < 0:
            raise ValueError("delay bound must be nonnegative")
        if self.kind not in ("worst_case", "seeded_random", "zero"):
            raise ValueError(f"unknown schedule kind {self.kind!r}")
        if self.kind == "seeded_random" and self.seed is None:
            raise ValueError("seeded_random schedule needs a seed")
        if self.kind == "zero" and self.bound != 0:
            raise ValueError("zero schedule requires bound 0")
        self._rng = np.random.Generator(np.random.PCG64(self.seed or 0))

    @staticmethod
    def worst_case(D: int) -> "DelaySchedule":
        return DelaySchedule(D, "worst_case")

    @staticmethod
    def zero() -> "DelaySchedule":
        return DelaySchedule(0, "zero")

    @staticmethod
    def seeded(D: int, seed: int) -> "DelaySchedule":
        return DelaySchedule(D, "seeded_random", seed)

    def tau(self, k: int) -> int:
        if self.kind == "zero":
            return k
        if self.kind == "worst_case":
            return max(0, k - self.bound)
        while len(self._cache) <= k:
            j = len(self._cache)
            delay = int(self._rng.integers(0, self.bound + 1))
            self._cache.append(max(0, j - delay))
        return self._cache[k]


@dataclass(frozen=True)
class GradientMessage:
    """One neighbour's exported local maximizer, tagged with its snapshot.

    The receiver forms the gradient block ``-A_l^(i) x_hat_l`` locally, so a
    single M-vector per edge is enough.
    """

    sender: int
    receiver: int
    x_hat: np.ndarray
    snapshot_k: int


# ---------------------------------------------------------------------------
# per-agent computations
# ---------------------------------------------------------------------------


def local_maximizer(instance: ProblemInstance, i: int, lam: np.ndarray) -> np.ndarray:
    """``x_hat_i``: the conjugate argmax of the smooth part at ``C_i lam``."""
    return conjugate_argmax(instance.agents[i].f, apply_C(instance, i, lam))


def grad_P_block(instance: ProblemInstance, i: int, messages, own_x_hat,
                 snapshot_k: int):
    """Assemble ``(grad_theta_i, grad_mu_i)`` of the dual smooth part.

    ``grad_theta_i = b^(i) - sum_l A_l^(i) x_hat_l`` over ``l`` in the
    closed neighbourhood, summed in ascending sender id;
    ``grad_mu_i = -x_hat_i``.
    """
    blocks = instance.agents[i].constraint.blocks
    by_sender = {}
    for msg in messages:
        if msg.snapshot_k != snapshot_k:
            raise StaleMixError(
                f"message from {msg.sender} at snapshot {msg.snapshot_k}, expected {snapshot_k}")
        by_sender[msg.sender] = msg.x_hat
    by_sender[i] = np.atleast_1d(np.asarray(own_x_hat, dtype=float))

    grad_theta = instance.agents[i].constraint.rhs.copy()
    for l in sorted(set(instance.topology.neighbors(i)) | {i}):
        block = blocks.get(l)
        if block is None or not np.any(block != 0):
            continue
        if l not in by_sender:
            raise MissingNeighborError(f"agent {i} lacks a message from neighbour {l}")
        grad_theta = grad_theta - block @ by_sender[l]
    grad_mu = -by_sender[i]
    return grad_theta, grad_mu


def _round_messages(instance: ProblemInstance, x_hats, snapshot_k: int):
    """All neighbour messages for one round, keyed by receiver."""
    inbox = {i: [] for i in range(instance.n_agents)}
    count = 0
    for i in range(instance.n_agents):
        for l in instance.topology.neighbors(i):
            block = instance.agents[i].constraint.blocks.get(l)
            if block is not None and np.any(block != 0):
                inbox[i].append(GradientMessage(l, i, x_hats[l], snapshot_k))
                count += 1
    return inbox, count


def _apply_round(instance: ProblemInstance, lam: np.ndarray, x_hats,
                 snapshot_k: int, steps: StepSizes):
    """One full round of updates from snapshot maximizers ``x_hats``."""
    inbox, n_msgs = _round_messages(instance, x_hats, snapshot_k)
    lam_next = lam.copy()
    for i in range(instance.n_agents):
        c = float(steps.values[i])
        g_theta, g_mu = grad_P_block(instance, i, inbox[i], x_hats[i], snapshot_k)
        lam_next[instance.theta_slice(i)] = lam[instance.theta_slice(i)] - c * g_theta
        rho = lam[instance.mu_slice(i)] - c * g_mu
        eff_g = instance.agents[i].effective_g
        lam_next[instance.mu_slice(i)] = rho - c * eff_g.prox(rho / c, 1.0 / c)
    return lam_next, n_msgs


def _snapshot_maximizers(instance: ProblemInstance, lam: np.ndarray):
    return [local_maximizer(instance, i, lam) for i in range(instance.n_agents)]


def dpg_step(instance: ProblemInstance, state: DualState, c: float) -> DualState:
    """One synchronous step with uniform step size ``c`` (fresh snapshot)."""
    x_hats = _snapshot_maximizers(instance, state.lam)
    steps = StepSizes.uniform(c, instance.n_agents)
    lam_next, _ = _apply_round(instance, state.lam, x_hats, state.k, steps)
    return DualState(lam_next, state.k + 1)


def asyn_dpg_step(instance: ProblemInstance, history, schedule: DelaySchedule,
                  steps: StepSizes, h: float | None = None,
                  allow_step_violation: bool = False) -> DualState:
    """One asynchronous step reading the snapshot ``lam(tau(k))``.

    ``history`` maps recent iteration indices to states and must retain at
    least the last ``D + 1`` of them.  The proximal anchor is always the
    agent's own latest value; only the gradient is delayed.
    """
    if h is not None and not allow_step_violation:
        if not steps.satisfies_async_rule(h, schedule.bound):
            raise StepSizeViolationError(
                "step sizes violate 1/c_i >= h (D+1)^2; pass allow_step_violation to override")
    if isinstance(history, (list, tuple)):
        history = {s.k: s for s in history}
    k = max(history)
    tk = schedule.tau(k)
    if tk not in history:
        raise HistoryUnderflowError(f"snapshot {tk} not retained (have {sorted(history)})")
    x_hats = _snapshot_maximizers(instance, history[tk].lam)
    lam_next, _ = _apply_round(instance, history[k].lam, x_hats, tk, steps)
    return DualState(lam_next, k + 1)


# ---------------------------------------------------------------------------
# dual objective and primal recovery
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DualObjective:
    psi: float
    p_part: float
    q_part: float


def dual_objective(instance: ProblemInstance, lam: np.ndarray) -> DualObjective:
    """Evaluate ``Psi = P + Q`` as an extended real (``inf`` saturates)."""
    p_part = 0.0
    q_part = 0.0
    for i, agent in enumerate(instance.agents):
        u = apply_C(instance, i, lam)
        p_part += conjugate_value(agent.f, u)
        p_part += float(agent.constraint.rhs @ lam[instance.theta_slice(i)])
        q_part += agent.effective_g.conjugate(lam[instance.mu_slice(i)])
    return DualObjective(p_part + q_part, p_part, q_part)


@dataclass(frozen=True)
class PrimalRecovery:
    x_hat: list
    z_hat: list
    mismatch: float


def recover_primal(instance: ProblemInstance, lam: np.ndarray) -> PrimalRecovery:
    """Recover ``(x_hat, z_hat)`` from a (near-)optimal dual point.

    ``x_hat_i`` maximizes the smooth Lagrangian part; ``z_hat_i`` maximizes
    ``mu_i' z - (g_i + indicator(omega_i))(z)`` with ties broken toward
    ``x_hat_i``.  The mismatch ``||x_hat - z_hat||`` is a convergence
    diagnostic, reported rather than raised.
    """
    x_hat = []
    z_hat = []
    sq = 0.0
    for i, agent in enumerate(instance.agents):
        xi = local_maximizer(instance, i, lam)
        zi = agent.effective_g.conjugate_argmax(lam[instance.mu_slice(i)], ref=xi)
        x_hat.append(xi)
        z_hat.append(zi)
        sq += float(np.sum((xi - zi) ** 2))
    return PrimalRecovery(x_hat, z_hat, math.sqrt(sq))


# ---------------------------------------------------------------------------
# traces
# ---------------------------------------------------------------------------


@dataclass
class IterationTrace:
    """Per-round record of the dual trajectory and its diagnostics.

    ``lam[k]`` is the state entering round ``k`` (so ``len(lam) == K + 1``
    after ``K`` rounds).  Transition arrays (``tau``, ``step_norm_inf``,
    ``per_agent_step_norms``, ``message_counts``) have length ``K`` and
    entry ``k`` describes the move from ``lam[k]`` to ``lam[k+1]``.
    """

    n_agents: int
    B: int
    M: int
    psi_star: float
    meta: dict = field(default_factory=dict)
    lam: list = field(default_factory=list)
    psi: list = field(default_factory=list)
    epsilon: list = field(default_factory=list)
    tau: list = field(default_factory=list)
    step_norm_inf: list = field(default_factory=list)
    per_agent_step_norms: list = field(default_factory=list)
    message_counts: list = field(default_factory=list)

    @property
    def n_records(self) -> int:
        return len(self.lam)

    @property
    def n_transitions(self) -> int:
        return len(self.step_norm_inf)

    def lam_agent(self, i: int, k: int) -> np.ndarray:
        """Agent ``i``'s dual block ``(theta_i, mu_i)`` at record ``k``."""
        v = self.lam[k]
        th = v[i * self.B:(i + 1) * self.B]
        off = self.n_agents * self.B
        mu = v[off + i * self.M:off + (i + 1) * self.M]
        return np.concatenate([th, mu])

    # -- serialization --

    def column_names(self):
        cols = ["k", "psi", "epsilon", "step_norm_inf"]
        for i in range(self.n_agents):
            cols += [f"theta_{i}_{b}" for b in range(self.B)]
        for i in range(self.n_agents):
            cols += [f"mu_{i}_{m}" for m in range(self.M)]
        return cols

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(self.column_names())
            for k in range(self.n_records):
                step = self.step_norm_inf[k - 1] if k > 0 else 0.0
                row = [k, repr(self.psi[k]), repr(self.epsilon[k]), repr(step)]
                row += [repr(float(x)) for x in self.lam[k]]
                writer.writerow(row)

    def metadata(self) -> dict:
        meta = dict(self.meta)
        meta.update({
            "n_agents": self.n_agents,
            "B": self.B,
            "M": self.M,
            "psi_star": self.psi_star,
            "tau": self.tau,
            "message_counts": self.message_counts,
            "prng": PRNG_NAME,
        })
        return meta

    def save(self, csv_path, meta_path) -> None:
        self.to_csv(csv_path)
        with open(meta_path, "w") as fh:
            json.dump(self.metadata(), fh, indent=2)

    @staticmethod
    def from_csv(csv_path, meta_path=None) -> "IterationTrace":
        meta = {}
        if meta_path is not None:
            with open(meta_path) as fh:
                meta = json.load(fh)
        try:
            with open(csv_path, newline="") as fh:
                reader = csv.reader(fh)
                header = next(reader)
                rows = [row for row in reader if row]
        except (OSError, StopIteration) as exc:
            raise MalformedTraceError(f"cannot read trace {csv_path}: {exc}")
        if header[:4] != ["k", "psi", "epsilon", "step_norm_inf"]:
            raise MalformedTraceError("unexpected trace header")
        n_theta = sum(1 for c in header if c.startswith("theta_"))
        n_mu = sum(1 for c in header if c.startswith("mu_"))
        n_agents = meta.get("n_agents")
        if n_agents is None:
            n_agents = len({c.split("_")[1] for c in header if c.startswith("theta_")})
        B = n_theta // n_agents
        M = n_mu // n_agents
        trace = IterationTrace(n_agents, B, M, meta.get("psi_star", float("nan")), meta)
        expected = 4 + n_theta + n_mu
        for row in rows:
            if len(row) != expected:
                raise MalformedTraceError(f"row of length {len(row)}, expected {expected}")
            try:
                trace.psi.append(float(row[1]))
                trace.epsilon.append(float(row[2]))
                trace.lam.append(np.array([float(x) for x in row[4:]]))
            except ValueError as exc:
                raise MalformedTraceError(f"unparseable value in trace: {exc}")
        for k in range(1, trace.n_records):
            diff = trace.lam[k] - trace.lam[k - 1]
            trace.step_norm_inf.append(float(np.max(np.abs(diff))) if diff.size else 0.0)
            trace.per_agent_step_norms.append(np.array([
                float(np.linalg.norm(trace.lam_agent(i, k) - trace.lam_agent(i, k - 1)))
                for i in range(n_agents)]))
        trace.tau = list(meta.get("tau", []))
        trace.message_counts = list(meta.get("message_counts", []))
        return trace


# ---------------------------------------------------------------------------
# the solver loop
# ---------------------------------------------------------------------------


def run(instance: ProblemInstance, mode: str = "sync",
        schedule: DelaySchedule | None = None, steps: StepSizes | None = None,
        k_max: int = 100_000, tol: float = 1e-8, lam0: np.ndarray | None = None,
        psi_star: float | None = None, allow_step_violation: bool = False) -> IterationTrace:
    """Execute the solver in ``sync`` or ``async`` mode and record a full trace.

    Runs until the step norm ``||lam(k+1) - lam(k)||_inf`` drops to ``tol``
    or ``k_max`` rounds elapse.  ``epsilon`` records ``Psi(lam(k)) - psi_star``;
    when no reference is supplied the best observed value is used.  The run
    is deterministic given (instance, mode, schedule, steps, lam0).
    """
    if mode not in ("sync", "async"):
        raise ValueError(f"unknown mode {mode!r}")
    h, per_agent_h = lipschitz_constant(instance)
    if mode == "sync":
        if schedule is not None and schedule.kind not in ("zero", "worst_case"):
            raise ValueError("sync mode does not take a delay schedule")
        schedule = DelaySchedule.zero()
        if steps is None:
            steps = StepSizes.uniform(step_size_sync(h), instance.n_agents)
    else:
        if schedule is None:
            raise ValueError("async mode requires a delay schedule")
        if steps is None:
            steps = step_size_async(h, schedule.bound, n_agents=instance.n_agents)
        if not allow_step_violation and not steps.satisfies_async_rule(h, schedule.bound):
            raise StepSizeViolationError(
                "step sizes violate 1/c_i >= h (D+1)^2; pass allow_step_violation to override")

    lam = np.zeros(instance.dual_dim) if lam0 is None else np.asarray(lam0, dtype=float).copy()

    def eval_state(vec):
        x_hats = []
        p_part = 0.0
        q_part = 0.0
        for i, agent in enumerate(instance.agents):
            u = apply_C(instance, i, vec)
            xi = conjugate_argmax(agent.f, u)
            x_hats.append(xi)
            p_part += float(u @ xi - agent.f.value(xi))
            p_part += float(agent.constraint.rhs @ vec[instance.theta_slice(i)])
            q_part += agent.effective_g.conjugate(vec[instance.mu_slice(i)])
        return x_hats, p_part + q_part

    x_hats0, psi0 = eval_state(lam)
    if not np.isfinite(psi0):
        raise NonFiniteInitialError(f"Psi(lam(0)) = {psi0}")

    trace = IterationTrace(instance.n_agents, instance.B, instance.M,
                           psi_star if psi_star is not None else float("nan"))
    trace.meta = {
        "instance_hash": instance_hash(instance),
        "mode": mode,
        "D": schedule.bound,
        "schedule": schedule.kind,
        "seed": schedule.seed,
        "step_mode": steps.mode,
        "step_sizes": steps.values.tolist(),
        "tol": tol,
        "k_max": k_max,
        "h": h,
        "stopping": "step_norm_inf",
    }
    trace.lam.append(lam.copy())
    trace.psi.append(psi0)

    keep = schedule.bound + 1
    history = {0: lam}
    xhat_cache = {0: x_hats0}

    for k in range(k_max):
        tk = schedule.tau(k)
        if tk not in history:
            raise HistoryUnderflowError(f"snapshot {tk} evicted before use at round {k}")
        lam_next, n_msgs = _apply_round(instance, history[k], xhat_cache[tk], tk, steps)

        x_hats_next, psi_next = eval_state(lam_next)
        diff = lam_next - history[k]
        trace.lam.append(lam_next.copy())
        trace.psi.append(psi_next)
        trace.tau.append(tk)
        trace.step_norm_inf.append(float(np.max(np.abs(diff))))
        trace.per_agent_step_norms.append(np.array([
            math.sqrt(float(np.sum(diff[instance.theta_slice(i)] ** 2))
                      + float(np.sum(diff[instance.mu_slice(i)] ** 2)))
            for i in range(instance.n_agents)]))
        trace.message_counts.append(n_msgs)

        history[k + 1] = lam_next
        xhat_cache[k + 1] = x_hats_next
        stale = k + 1 - keep
        history.pop(stale, None)
        xhat_cache.pop(stale, None)

        if trace.step_norm_inf[-1] <= tol:
            break

    if psi_star is None:
        trace.psi_star = float(np.nanmin(trace.psi))
    trace.epsilon = [p - trace.psi_star for p in trace.psi]
    return trace


# ---------------------------------------------------------------------------
# rate-bound verification
# ---------------------------------------------------------------------------


@dataclass
class RateBoundReport:
    """Measured-versus-bound slacks for the convergence guarantees.

    Slack is ``bound - measured``; nonnegative slack (up to round-off) means
    the guarantee held.  The trajectory constant for the delayed bound is
    formed from the trace's own early step norms, as its definition requires.
    """

    trajectory_constant: float | None
    no_delay_rate: list  # (K, bound, measured, slack)
    delayed_rate: list  # (K, bound, measured, slack)
    delay_count: list  # (K, lhs, rhs, slack)
    weighted_delay_count: list  # (K, lhs, rhs, slack)

    FIELDS = ("no_delay_rate", "delayed_rate", "delay_count", "weighted_delay_count")

    def min_slacks(self) -> dict:
        out = {}
        for name in self.FIELDS:
            rows = getattr(self, name)
            out[name] = min((r[3] for r in rows), default=None)
        return out

    def to_json(self) -> dict:
        doc = {
            "trajectory_constant": self.trajectory_constant,
            "min_slacks": self.min_slacks(),
        }
        for name in self.FIELDS:
            doc[name] = [list(r) for r in getattr(self, name)]
        return doc


def delayed_bound_constant(trace: IterationTrace, lam_star: np.ndarray,
                           steps: StepSizes, h: float, D: int) -> float:
    """Trajectory constant of the delayed-rate bound.

    ``sum_{k<=floor(D/2)} sum_i (h(2k+D)(D+1)^2/4 - k/c_i) ||dlam_i(k)||^2
    + sum_i ||lam_i(0) - lam_i*||^2 / (2 c_i)``.
    """
    half = D // 2
    if trace.n_transitions < half + 1:
        raise InsufficientTraceError(
            f"need {half + 1} transitions for the trajectory constant, have {trace.n_transitions}")
    total = 0.0
    for k in range(half + 1):
        norms = trace.per_agent_step_norms[k]
        for i in range(trace.n_agents):
            coeff = h * (2 * k + D) * (D + 1) ** 2 / 4.0 - k / steps.values[i]
            total += coeff * norms[i] ** 2
    star = np.asarray(lam_star, dtype=float)
    v0 = trace.lam[0]
    for i in range(trace.n_agents):
        th = slice(i * trace.B, (i + 1) * trace.B)
        off = trace.n_agents * trace.B
        mu = slice(off + i * trace.M, off + (i + 1) * trace.M)
        d2 = float(np.sum((v0[th] - star[th]) ** 2) + np.sum((v0[mu] - star[mu]) ** 2))
        total += d2 / (2.0 * steps.values[i])
    return float(total)


def verify_rate_bounds(trace: IterationTrace, lam_star: np.ndarray,
                       psi_star: float, h: float, steps: StepSizes,
                       D: int, taus=None) -> RateBoundReport:
    """Check the rate guarantees and the delay-counting inequalities.

    The no-delay rate is evaluated at every ``K >= 1``; the delayed rate at
    every ``K >= ceil(D/2)`` with the trajectory constant from the early
    steps; the two delay-counting inequalities (plain and iteration
    weighted) are accumulated from the recorded step norms using the trace's
    own read instants.
    """
    if trace.n_transitions < 1:
        raise InsufficientTraceError("trace has no transitions")
    taus = list(trace.tau) if taus is None else list(taus)
    if len(taus) < trace.n_transitions:
        raise InsufficientTraceError("read instants missing from trace")
    lam_star = np.asarray(lam_star, dtype=float)

    dist0_sq = float(np.sum((trace.lam[0] - lam_star) ** 2))
    d2 = [float(np.sum((trace.lam[k + 1] - trace.lam[k]) ** 2))
          for k in range(trace.n_transitions)]

    no_delay = []
    for K in range(1, trace.n_records):
        bound = h * dist0_sq / (2.0 * K)
        measured = trace.psi[K] - psi_star
        no_delay.append((K, bound, measured, bound - measured))

    delayed = []
    traj_const = None
    half_up = math.ceil(D / 2)
    if trace.n_transitions >= D // 2 + 1:
        traj_const = delayed_bound_constant(trace, lam_star, steps, h, D)
        for K in range(max(half_up, 1), trace.n_records - 1):
            bound = traj_const / (K + 1)
            measured = trace.psi[K + 1] - psi_star
            delayed.append((K, bound, measured, bound - measured))

    count_rows = []
    weighted_rows = []
    lhs_c = rhs_c = lhs_w = rhs_w = 0.0
    for k in range(trace.n_transitions):
        inner = sum(d2[j] for j in range(taus[k], k + 1))
        lhs_c += inner
        rhs_c += (D + 1) * d2[k]
        lhs_w += k * inner
        rhs_w += (2 * k + D) * (D + 1) / 2.0 * d2[k]
        count_rows.append((k, lhs_c, rhs_c, rhs_c - lhs_c))
        weighted_rows.append((k, lhs_w, rhs_w, rhs_w - lhs_w))

    return RateBoundReport(traj_const, no_delay, delayed, count_rows, weighted_rows)
