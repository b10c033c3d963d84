"""Compressed primal-dual zeroth-order update and its parameter schedules.

One round per agent: compress the innovation against a reference vector,
exchange the compressed payload with neighbors, estimate the local gradient
from two function values, then update the reference, the neighborhood
accumulator, the primal iterate, and the dual variable. The dual update sums
Laplacian-weighted quantities, so the dual variables always sum to zero
across the network and the network average of the primal iterates follows
plain stochastic descent on the average objective.

A reference implementation of the uncompressed update lives alongside the
compressed one as an independent code path; with the identity compressor and
unit mixing weight the two must coincide bit for bit on shared streams.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .compressors import CompressorSpec, compress
from .estimators import sample_unit_sphere, two_point
from .graph import Graph, MixingMatrices, mixing_matrices
from .problems import ProblemFamily
from .rng import agent_streams

MODE_NONCONVEX = "nonconvex"
MODE_PL_UNKNOWN = "pl_unknown"
MODE_PL_KNOWN = "pl_known"
MODES = (MODE_NONCONVEX, MODE_PL_UNKNOWN, MODE_PL_KNOWN)

# Abort threshold for the divergence guard.
DIVERGENCE_NORM = 1e12


@dataclass
class AgentState:
    """Per-agent view: primal x, dual v, reference y, accumulator z."""

    x: np.ndarray
    v: np.ndarray
    y: np.ndarray
    z: np.ndarray


class AgentStates:
    """Network state as four (n, p) arrays; v, y, z start at zero."""

    def __init__(self, x0: np.ndarray) -> None:
        x0 = np.atleast_2d(np.asarray(x0, dtype=float))
        self.X = x0.copy()
        self.V = np.zeros_like(self.X)
        self.Y = np.zeros_like(self.X)
        self.Z = np.zeros_like(self.X)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    def agent(self, i: int) -> AgentState:
        return AgentState(x=self.X[i], v=self.V[i], y=self.Y[i], z=self.Z[i])


@dataclass(frozen=True)
class NeighborView:
    """What one agent may read in a round: its neighbors' payload slots.

    ``indices`` lists the agent itself plus its neighbors in ascending
    order; ``weights`` holds the matching Laplacian row entries. The update
    never touches state outside these indices, which enforces communication
    locality structurally.
    """

    agent: int
    indices: np.ndarray
    weights: np.ndarray


def neighbor_views(L: np.ndarray) -> list[NeighborView]:
    views = []
    n = L.shape[0]
    for i in range(n):
        idx = np.flatnonzero(L[i] != 0.0)
        if i not in idx:
            idx = np.sort(np.append(idx, i))
        views.append(NeighborView(agent=i, indices=idx, weights=L[i, idx].copy()))
    return views


def neighbor_sum(views: list[NeighborView], rows: np.ndarray) -> np.ndarray:
    """Per-agent Laplacian-weighted sums over neighbor rows only.

    Both run loops use this one helper, so their summation order over a
    neighborhood is identical down to rounding.
    """
    out = np.empty_like(rows)
    for view in views:
        out[view.agent] = view.weights @ rows[view.indices]
    return out


class Schedule:
    """Stepsize family with couplings beta = eps1 * gamma, alpha * gamma = eps2.

    Three modes: a constant stepsize scaled for a fixed horizon, a constant
    horizon-power stepsize for unknown growth constants, and a harmonic
    decay for a known quadratic-growth constant nu.
    """

    def __init__(
        self,
        mode: str,
        n: int,
        p: int,
        T: int,
        omega: float,
        r: float,
        eps1: float,
        eps2: float,
        eps3: float | None = None,
        eps4: float | None = None,
        theta: float | None = None,
        m: int = 1,
        kappa_mu: float = 0.1,
        nu: float | None = None,
    ) -> None:
        self.mode = mode
        self.n = n
        self.p = p
        self.T = T
        self.omega = omega
        self.r = r
        self.eps1 = eps1
        self.eps2 = eps2
        self.eps3 = eps3
        self.eps4 = eps4
        self.theta = theta
        self.m = m
        self.kappa_mu = kappa_mu
        self.nu = nu
        self.vartheta = None
        if mode == MODE_PL_KNOWN:
            assert nu is not None and eps4 is not None
            self.vartheta = nu * eps2 / (2.0 * eps4)

    def alpha(self, k: int) -> float:
        if self.mode == MODE_NONCONVEX:
            assert self.eps3 is not None
            return self.eps3 * math.sqrt(self.n) / math.sqrt(self.p * self.T)
        if self.mode == MODE_PL_UNKNOWN:
            assert self.theta is not None
            return (self.T + 1.0) ** (-self.theta)
        return self.eps2 / self.gamma(k)

    def gamma(self, k: int) -> float:
        if self.mode == MODE_PL_KNOWN:
            assert self.eps4 is not None
            return self.eps4 * (k + self.m)
        return self.eps2 / self.alpha(k)

    def beta(self, k: int) -> float:
        return self.eps1 * self.gamma(k)

    def mu(self, i: int, k: int) -> float:
        return self.kappa_mu * math.sqrt(self.p * self.alpha(k)) / math.sqrt(self.n + self.p)


def make_schedule(
    mode: str,
    n: int,
    p: int,
    T: int,
    params: dict | None = None,
    r: float = 1.0,
    t_floor: float | None = None,
) -> Schedule:
    """Validate parameters and build a schedule.

    ``params`` accepts eps1, eps2, eps3, eps4, theta, m, kappa_mu, nu,
    omega, rho2. When eps1 is absent it defaults to twice the threshold
    max(13/(2 rho2), rho2), which needs rho2 in params. omega defaults to
    1/r, the largest admissible mixing weight. ``t_floor``, when supplied
    from the constants calculator, triggers a warning for undersized
    horizons instead of a refusal.
    """
    params = dict(params or {})
    if mode not in MODES:
        raise ValueError(f"unknown schedule mode {mode!r}; expected one of {MODES}")
    if T < 1:
        raise ValueError(f"horizon T must be at least 1, got {T}")
    if n < 1 or p < 1:
        raise ValueError(f"need n >= 1 and p >= 1, got n={n}, p={p}")

    allowed = {"eps1", "eps2", "eps3", "eps4", "theta", "m", "kappa_mu", "nu", "omega", "rho2"}
    unknown = set(params) - allowed
    if unknown:
        raise ValueError(f"unknown schedule parameters: {sorted(unknown)}")

    eps1 = params.get("eps1")
    if eps1 is None:
        rho2 = params.get("rho2")
        if rho2 is None:
            raise ValueError("schedule parameter eps1 missing and no rho2 given to derive a default")
        eps1 = 2.0 * max(13.0 / (2.0 * rho2), rho2)
    eps2 = params.get("eps2", 1e-3)
    eps3 = params.get("eps3", 0.5)
    eps4 = params.get("eps4")
    theta = params.get("theta", 0.75)
    m = int(params.get("m", 1))
    kappa_mu = params.get("kappa_mu", 0.1)
    nu = params.get("nu")
    omega = params.get("omega")
    if omega is None:
        omega = 1.0 / r

    for name, val in (("eps1", eps1), ("eps2", eps2)):
        if val <= 0.0:
            raise ValueError(f"schedule parameter {name} must be positive, got {val}")
    if omega <= 0.0 or omega > (1.0 / r) * (1.0 + 1e-12):
        raise ValueError(f"schedule parameter omega={omega} outside (0, 1/r] with r={r}")
    if mode == MODE_NONCONVEX and (eps3 is None or eps3 <= 0.0):
        raise ValueError(f"schedule parameter eps3 must be positive, got {eps3}")
    if mode == MODE_PL_UNKNOWN and not 0.5 < theta < 1.0:
        raise ValueError(f"schedule parameter theta must lie in (0.5, 1), got {theta}")
    if mode == MODE_PL_KNOWN:
        if nu is None or nu <= 0.0:
            raise ValueError("schedule parameter nu (growth constant) required and positive in pl_known mode")
        if eps4 is None or eps4 <= 0.0:
            raise ValueError("schedule parameter eps4 required and positive in pl_known mode")
        if eps4 >= nu * eps2 / 4.0:
            raise ValueError(
                f"schedule parameter eps4={eps4} must stay below nu*eps2/4={nu * eps2 / 4.0}"
            )
        if m < 1:
            raise ValueError(f"schedule parameter m must be at least 1, got {m}")
    if kappa_mu <= 0.0:
        raise ValueError(f"schedule parameter kappa_mu must be positive, got {kappa_mu}")

    if t_floor is not None and T < t_floor:
        warnings.warn(
            f"horizon T={T} is below the admissible floor {t_floor:.3g}; "
            "finite-horizon guarantees may not apply",
            stacklevel=2,
        )
    return Schedule(
        mode=mode, n=n, p=p, T=T, omega=float(omega), r=r,
        eps1=float(eps1), eps2=float(eps2),
        eps3=None if eps3 is None else float(eps3),
        eps4=None if eps4 is None else float(eps4),
        theta=None if theta is None else float(theta),
        m=m, kappa_mu=float(kappa_mu),
        nu=None if nu is None else float(nu),
    )


class InvariantViolation(AssertionError):
    """A structural identity of the update failed beyond tolerance."""


@dataclass
class RunTrace:
    """Per-iteration records plus a final summary record.

    Record j < T describes the state entering iteration j and the bits and
    oracle calls accumulated through the end of that iteration; the last
    record describes the final state with the run totals. A horizon of zero
    yields the single initial record.
    """

    k: np.ndarray
    grad_norm_sq: np.ndarray
    consensus_err: np.ndarray
    opt_gap: np.ndarray
    bits_cum: np.ndarray
    fn_evals_cum: np.ndarray
    e1: np.ndarray | None = None
    e2: np.ndarray | None = None
    e3: np.ndarray | None = None
    e4: np.ndarray | None = None
    e5: np.ndarray | None = None
    diverged: bool = False
    divergence_info: str | None = None
    invariant_maxima: dict = field(default_factory=dict)
    x_final: np.ndarray | None = None

    @property
    def has_lyapunov(self) -> bool:
        return self.e1 is not None

    def lyapunov_partial(self) -> np.ndarray:
        """e1 + e2 + e3 + e5, the optimality-gap-free combination."""
        if not self.has_lyapunov:
            raise ValueError("run was not traced with record_lyapunov")
        return self.e1 + self.e2 + self.e3 + self.e5


class _TraceBuilder:
    def __init__(self, record_lyapunov: bool) -> None:
        self.rows: list[tuple] = []
        self.lyap: list[tuple] | None = [] if record_lyapunov else None

    def add(self, k, gns, cons, gap, bits, evals, eterms=None) -> None:
        self.rows.append((k, gns, cons, gap, bits, evals))
        if self.lyap is not None:
            self.lyap.append(eterms)

    def build(self, **kw) -> RunTrace:
        cols = list(zip(*self.rows)) if self.rows else [[]] * 6
        trace = RunTrace(
            k=np.array(cols[0], dtype=np.int64),
            grad_norm_sq=np.array(cols[1], dtype=float),
            consensus_err=np.array(cols[2], dtype=float),
            opt_gap=np.array(cols[3], dtype=float),
            bits_cum=np.array(cols[4], dtype=np.int64),
            fn_evals_cum=np.array(cols[5], dtype=np.int64),
            **kw,
        )
        if self.lyap is not None:
            terms = list(zip(*self.lyap))
            trace.e1, trace.e2, trace.e3, trace.e4, trace.e5 = (
                np.array(t, dtype=float) for t in terms
            )
        return trace


def _metrics(fam: ProblemFamily, X: np.ndarray) -> tuple[float, float, float]:
    xbar = X.mean(axis=0)
    g = fam.grad(xbar)
    gns = float(g @ g)
    cons = float(np.sum((X - xbar) ** 2)) / X.shape[0]
    gap = float(fam.f(xbar) - fam.f_star) if fam.f_star is not None else float("nan")
    return gns, cons, gap


def _lyapunov_terms(fam, mix, states, gamma_k, eps1):
    from .analysis import lyapunov

    snap = lyapunov(states, mix, fam, gamma_k, eps1)
    return (snap.e1, snap.e2, snap.e3, float("nan") if snap.e4 is None else snap.e4, snap.e5)


def _divergence_info(X: np.ndarray, k: int) -> str | None:
    if not np.all(np.isfinite(X)):
        bad = int(np.argmax(~np.all(np.isfinite(X), axis=1)))
        return f"non-finite iterate at iteration {k}, agent {bad}"
    norms = np.linalg.norm(X, axis=1)
    worst = int(np.argmax(norms))
    if norms[worst] > DIVERGENCE_NORM:
        return f"iterate norm {norms[worst]:.3e} exceeds {DIVERGENCE_NORM:.0e} at iteration {k}, agent {worst}"
    return None


def init_states(n: int, p: int, x0: np.ndarray | None = None) -> AgentStates:
    """Fresh network state; x0 broadcasts a single p-vector to all agents."""
    if x0 is None:
        x0 = np.zeros((n, p))
    x0 = np.asarray(x0, dtype=float)
    if x0.ndim == 1:
        x0 = np.tile(x0, (n, 1))
    if x0.shape != (n, p):
        raise ValueError(f"x0 must have shape ({n}, {p}), got {x0.shape}")
    return AgentStates(x0)


def step(
    states: AgentStates,
    views: list[NeighborView],
    comp: CompressorSpec,
    fam: ProblemFamily,
    sched: Schedule,
    k: int,
    xi_streams: list,
    zeta_streams: list,
    dither_streams: list,
) -> tuple[np.ndarray, int]:
    """One synchronous round; returns (per-agent estimates, bits sent).

    Order per round: compress the innovation, exchange, estimate gradients
    with fresh noise and direction draws, then update reference,
    accumulator, primal (using the entering accumulator value), and dual.
    The primal and dual aggregate is evaluated as the Laplacian-weighted sum
    of reconstructed neighbor iterates (reference plus payload), which
    equals the entering accumulator plus the payload aggregate.
    """
    n, p = states.n, states.p
    alpha = sched.alpha(k)
    beta = sched.beta(k)
    gamma = sched.gamma(k)
    om = sched.omega

    Q = np.empty((n, p))
    xhat = np.empty((n, p))
    for i in range(n):
        Q[i] = compress(comp, states.X[i] - states.Y[i], dither_streams[i])
        xhat[i] = states.Y[i] + Q[i]

    G = np.empty((n, p))
    mu_k = sched.mu(0, k)
    for i in range(n):
        agent = fam.agents[i]
        xi = agent.sample_xi(xi_streams[i])
        zeta = sample_unit_sphere(p, zeta_streams[i])
        G[i] = two_point(agent, states.X[i], mu_k, zeta, xi)

    S = neighbor_sum(views, xhat)
    LQ = neighbor_sum(views, Q)

    states.Y += om * Q
    states.Z += om * LQ
    states.X = states.X - (alpha * beta) * S - alpha * (gamma * states.V + G)
    states.V = states.V + (alpha * gamma) * S
    return G, n * comp.bits_per_vector


def _check_invariants(states: AgentStates, L: np.ndarray, maxima: dict, k: int) -> None:
    vsum = np.abs(states.V.sum(axis=0)).max()
    vscale = max(1.0, float(np.max(np.linalg.norm(states.V, axis=1))))
    rel = vsum / vscale
    maxima["dual_sum"] = max(maxima.get("dual_sum", 0.0), rel)
    if rel > 1e-9:
        raise InvariantViolation(f"dual variables sum to {vsum:.3e} (scale {vscale:.3e}) at iteration {k}")

    ly = L @ states.Y
    dev = np.abs(states.Z - ly).max()
    zscale = max(1.0, float(np.abs(states.Z).max()), float(np.abs(ly).max()))
    rel = dev / zscale
    maxima["accumulator"] = max(maxima.get("accumulator", 0.0), rel)
    if rel > 1e-9:
        raise InvariantViolation(
            f"accumulator deviates from the reference aggregate by {dev:.3e} at iteration {k}"
        )


def run(
    fam: ProblemFamily,
    g: Graph,
    comp: CompressorSpec,
    sched: Schedule,
    T: int | None = None,
    seed: int = 0,
    record_lyapunov: bool = False,
    x0: np.ndarray | None = None,
    check_invariants: bool = False,
    lambda_extra: float | None = None,
    per_edge_bits: bool = False,
) -> RunTrace:
    """Execute T rounds of the compressed update and trace the run."""
    if T is None:
        T = sched.T
    mix, _ = mixing_matrices(g, lambda_extra)
    n, p = fam.n, fam.p
    if g.n != n:
        raise ValueError(f"graph has {g.n} agents but the family has {n}")
    views = neighbor_views(mix.L)
    xi_streams = agent_streams(seed, n, "xi")
    zeta_streams = agent_streams(seed, n, "zeta")
    dither_streams = agent_streams(seed, n, "dither")
    states = init_states(n, p, x0)
    transmissions = sum(len(v.indices) - 1 for v in views) if per_edge_bits else n

    builder = _TraceBuilder(record_lyapunov)
    bits = 0
    evals = 0
    maxima: dict = {}
    diverged = False
    info = None
    for k in range(T):
        gns, cons, gap = _metrics(fam, states.X)
        eterms = _lyapunov_terms(fam, mix, states, sched.gamma(k), sched.eps1) if record_lyapunov else None
        xbar_pre = states.X.mean(axis=0)
        G, _ = step(states, views, comp, fam, sched, k, xi_streams, zeta_streams, dither_streams)
        bits += transmissions * comp.bits_per_vector
        evals += 2 * n
        builder.add(k, gns, cons, gap, bits, evals, eterms)

        if check_invariants:
            _check_invariants(states, mix.L, maxima, k)
            gbar = G.mean(axis=0)
            xbar_post = states.X.mean(axis=0)
            resid = np.abs(xbar_post - (xbar_pre - sched.alpha(k) * gbar)).max()
            scale = max(1.0, float(np.abs(xbar_pre).max()), float(np.abs(xbar_post).max()))
            rel = resid / scale
            maxima["mean_dynamics"] = max(maxima.get("mean_dynamics", 0.0), rel)
            if rel > 1e-12:
                raise InvariantViolation(
                    f"network-average dynamics residual {resid:.3e} at iteration {k}"
                )

        info = _divergence_info(states.X, k)
        if info is not None:
            diverged = True
            break

    if not diverged:
        gns, cons, gap = _metrics(fam, states.X)
        eterms = _lyapunov_terms(fam, mix, states, sched.gamma(T), sched.eps1) if record_lyapunov else None
        builder.add(T, gns, cons, gap, bits, evals, eterms)
    return builder.build(
        diverged=diverged,
        divergence_info=info,
        invariant_maxima=maxima,
        x_final=states.X.copy(),
    )


def run_uncompressed(
    fam: ProblemFamily,
    g: Graph,
    sched: Schedule,
    T: int | None = None,
    seed: int = 0,
    record_lyapunov: bool = False,
    x0: np.ndarray | None = None,
    lambda_extra: float | None = None,
    per_edge_bits: bool = False,
    b1: int = 64,
) -> RunTrace:
    """Reference loop without compression: direct neighbor aggregation.

    Written independently of :func:`step` on purpose; used as the
    equivalence target for the identity compressor at unit mixing weight.
    Each round sends one full-precision vector per agent (p * b1 bits).
    """
    if T is None:
        T = sched.T
    mix, _ = mixing_matrices(g, lambda_extra)
    n, p = fam.n, fam.p
    views = neighbor_views(mix.L)
    xi_streams = agent_streams(seed, n, "xi")
    zeta_streams = agent_streams(seed, n, "zeta")
    states = init_states(n, p, x0)
    transmissions = sum(len(v.indices) - 1 for v in views) if per_edge_bits else n

    builder = _TraceBuilder(record_lyapunov)
    bits = 0
    evals = 0
    diverged = False
    info = None
    for k in range(T):
        gns, cons, gap = _metrics(fam, states.X)
        eterms = _lyapunov_terms(fam, mix, states, sched.gamma(k), sched.eps1) if record_lyapunov else None
        alpha = sched.alpha(k)
        beta = sched.beta(k)
        gamma = sched.gamma(k)
        U = neighbor_sum(views, states.X)
        G = np.empty((n, p))
        for i in range(n):
            agent = fam.agents[i]
            xi = agent.sample_xi(xi_streams[i])
            zeta = sample_unit_sphere(p, zeta_streams[i])
            G[i] = two_point(agent, states.X[i], sched.mu(i, k), zeta, xi)
        states.X = states.X - (alpha * beta) * U - alpha * (gamma * states.V + G)
        states.V = states.V + (alpha * gamma) * U
        bits += transmissions * p * b1
        evals += 2 * n
        builder.add(k, gns, cons, gap, bits, evals, eterms)
        info = _divergence_info(states.X, k)
        if info is not None:
            diverged = True
            break

    if not diverged:
        gns, cons, gap = _metrics(fam, states.X)
        eterms = _lyapunov_terms(fam, mix, states, sched.gamma(T), sched.eps1) if record_lyapunov else None
        builder.add(T, gns, cons, gap, bits, evals, eterms)
    return builder.build(diverged=diverged, divergence_info=info, x_final=states.X.copy())
