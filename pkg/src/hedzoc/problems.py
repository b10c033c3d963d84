"""Synthetic heterogeneous objective families with closed-form references.

Each agent owns a smooth local objective f_i bounded below, a noisy oracle
F_i(x, xi) with E[grad F_i] = grad f_i, and known constants (smoothness,
noise moments, local minimum). A family bundles n agents whose minimizers
are spread by a heterogeneity knob rho_h: centers are mixed as
c_i = rho_h * u_i + (1 - rho_h) * mean(u), so rho_h near zero collapses all
agents onto a common center and rho_h = 1 keeps them fully distinct.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Any

import numpy as np

KIND_QUADRATIC = "quadratic"
KIND_NONCONVEX = "nonconvex"
KIND_MULNOISE = "mulnoise"
FAMILY_KINDS = (KIND_QUADRATIC, KIND_NONCONVEX, KIND_MULNOISE)

# Multi-start minimization of the ripple objective is exhaustive only at
# desk scale; above this dimension the reference is flagged approximate.
_EXHAUSTIVE_DIM = 8


@dataclass(frozen=True)
class QuadraticAgent:
    """f_i(x) = 0.5 (x-c)^T A (x-c) + d with additive linear gradient noise.

    The noise sample is a p-vector xi ~ N(0, (sigma^2/p) I) entering as
    xi^T x, so grad F - grad f = xi has mean zero and second moment sigma^2
    while every F(., xi) keeps the noiseless smoothness constant.
    """

    A: np.ndarray
    c: np.ndarray
    d: float
    noise_sigma: float
    ell: float

    eta1: float = 0.0

    def __post_init__(self) -> None:
        if self.d < 0.0:
            raise ValueError(f"offset must be nonnegative, got d={self.d}")
        if self.noise_sigma < 0.0:
            raise ValueError(f"noise scale must be nonnegative, got {self.noise_sigma}")

    @property
    def p(self) -> int:
        return self.c.shape[0]

    @property
    def f_star(self) -> float:
        return self.d

    @property
    def sigma1(self) -> float:
        return self.noise_sigma

    def f(self, x: np.ndarray) -> float:
        dx = x - self.c
        return 0.5 * float(dx @ (self.A @ dx)) + self.d

    def true_gradient(self, x: np.ndarray) -> np.ndarray:
        return self.A @ (x - self.c)

    def sample_xi(self, rng: np.random.Generator) -> np.ndarray:
        if self.noise_sigma == 0.0:
            return np.zeros(self.p)
        return rng.normal(0.0, self.noise_sigma / np.sqrt(self.p), size=self.p)

    def value(self, x: np.ndarray, xi: np.ndarray) -> float:
        return self.f(x) + float(xi @ x)

    def grad_value(self, x: np.ndarray, xi: np.ndarray) -> np.ndarray:
        return self.true_gradient(x) + xi


@dataclass(frozen=True)
class NonconvexAgent(QuadraticAgent):
    """Quadratic base plus a sine ripple rho_nc * sum_j sin^2(x_j - c_j).

    The ripple vanishes at the center, so the local minimum stays d, and its
    Hessian is bounded by 2 rho_nc in absolute value, so the smoothness
    constant is rho(A) + 2 rho_nc.
    """

    rho_nc: float = 0.0

    def f(self, x: np.ndarray) -> float:
        dx = x - self.c
        s = np.sin(dx)
        return 0.5 * float(dx @ (self.A @ dx)) + self.d + self.rho_nc * float(s @ s)

    def true_gradient(self, x: np.ndarray) -> np.ndarray:
        dx = x - self.c
        return self.A @ dx + self.rho_nc * np.sin(2.0 * dx)


@dataclass(frozen=True)
class MultiplicativeNoiseAgent(QuadraticAgent):
    """Quadratic with multiplicative noise: F(x, u) = (1 + eta u) f(x).

    u ~ Uniform(-1, 1), so E[grad F - grad f]^2 = (eta^2/3) ‖grad f‖², which
    satisfies the state-dependent variance bound with eta1 = eta and zero
    additive floor. Exercises the eta1 > 0 branch of the analysis constants.
    """

    def sample_xi(self, rng: np.random.Generator) -> float:
        return float(rng.uniform(-1.0, 1.0))

    def value(self, x: np.ndarray, xi: float) -> float:
        return (1.0 + self.eta1 * xi) * self.f(x)

    def grad_value(self, x: np.ndarray, xi: float) -> np.ndarray:
        return (1.0 + self.eta1 * xi) * self.true_gradient(x)

    @property
    def sigma1(self) -> float:
        return 0.0


@dataclass
class ProblemFamily:
    """n agents plus global references where computable.

    ``f_star``/``x_star`` describe the minimum of the average objective;
    ``nu`` is its quadratic-growth constant when the family is strongly
    convex (None otherwise). ``reference_exact`` records whether the
    references come from a closed form or a multi-start search.
    """

    kind: str
    agents: list[Any]
    p: int
    rho_h: float
    noise_sigma: float
    rho_nc: float
    seed: int
    x_star: np.ndarray | None = None
    f_star: float | None = None
    nu: float | None = None
    reference_exact: bool = False
    spectrum_range: tuple[float, float] = (1.0, 1.0)
    _f_i_stars: list[float] = field(default_factory=list)

    @property
    def n(self) -> int:
        return len(self.agents)

    @property
    def ell(self) -> float:
        return max(a.ell for a in self.agents)

    @property
    def eta1(self) -> float:
        return max(a.eta1 for a in self.agents)

    @property
    def sigma1(self) -> float:
        return max(a.sigma1 for a in self.agents)

    @property
    def f_i_stars(self) -> list[float]:
        return [a.f_star for a in self.agents]

    def f(self, x: np.ndarray) -> float:
        return sum(a.f(x) for a in self.agents) / self.n

    def grad(self, x: np.ndarray) -> np.ndarray:
        g = np.zeros(self.p)
        for a in self.agents:
            g += a.true_gradient(x)
        return g / self.n

    def grad_stack(self, x: np.ndarray) -> np.ndarray:
        """Per-agent gradients at a common point, one row per agent."""
        return np.stack([a.true_gradient(x) for a in self.agents])


def _random_psd(p: int, lo: float, hi: float, rng: np.random.Generator) -> tuple[np.ndarray, float]:
    """Symmetric matrix with eigenvalues uniform in [lo, hi]; returns (A, max eig)."""
    eigs = rng.uniform(lo, hi, size=p)
    if p == 1:
        return np.array([[eigs[0]]]), float(eigs[0])
    q, r = np.linalg.qr(rng.standard_normal((p, p)))
    q = q * np.sign(np.diag(r))
    a = (q * eigs) @ q.T
    return (a + a.T) / 2.0, float(np.max(eigs))


def make_family(
    kind: str,
    n: int,
    p: int,
    rho_h: float,
    spectrum_range: tuple[float, float] = (0.5, 2.0),
    noise_sigma: float = 0.0,
    rho_nc: float = 0.0,
    seed: int = 0,
    eta: float = 0.0,
    compute_reference: bool = True,
) -> ProblemFamily:
    """Draw a family of n agents at dimension p, deterministic in seed."""
    if kind not in FAMILY_KINDS:
        raise ValueError(f"unknown family kind {kind!r}; expected one of {FAMILY_KINDS}")
    if n < 2:
        raise ValueError(f"need at least two agents, got n={n}")
    if p < 1:
        raise ValueError(f"dimension must be positive, got p={p}")
    lo, hi = spectrum_range
    if not (0.0 < lo <= hi):
        raise ValueError(f"spectrum_range must satisfy 0 < lo <= hi, got {spectrum_range}")
    if not 0.0 <= rho_h <= 1.0:
        raise ValueError(f"heterogeneity level must lie in [0, 1], got {rho_h}")
    if kind == KIND_NONCONVEX and rho_nc < 0.0:
        raise ValueError(f"ripple amplitude must be nonnegative, got {rho_nc}")
    if kind == KIND_MULNOISE and not 0.0 <= eta <= 1.0:
        raise ValueError(f"multiplicative noise level must lie in [0, 1], got {eta}")

    rng = np.random.default_rng(np.random.SeedSequence(seed))
    mats, ells, centers_raw, offsets = [], [], [], []
    for _ in range(n):
        a, top = _random_psd(p, lo, hi, rng)
        mats.append(a)
        ells.append(top)
        centers_raw.append(rng.standard_normal(p))
        offsets.append(float(rng.uniform(0.0, 1.0)))
    u_bar = np.mean(centers_raw, axis=0)
    centers = [rho_h * u + (1.0 - rho_h) * u_bar for u in centers_raw]

    agents: list[Any] = []
    for a, top, c, d in zip(mats, ells, centers, offsets):
        if kind == KIND_QUADRATIC:
            agents.append(QuadraticAgent(A=a, c=c, d=d, noise_sigma=noise_sigma, ell=top))
        elif kind == KIND_NONCONVEX:
            agents.append(
                NonconvexAgent(
                    A=a, c=c, d=d, noise_sigma=noise_sigma, ell=top + 2.0 * rho_nc, rho_nc=rho_nc
                )
            )
        else:
            agents.append(
                MultiplicativeNoiseAgent(
                    A=a, c=c, d=d, noise_sigma=0.0, ell=(1.0 + eta) * top, eta1=eta
                )
            )
    fam = ProblemFamily(
        kind=kind,
        agents=agents,
        p=p,
        rho_h=rho_h,
        noise_sigma=noise_sigma if kind != KIND_MULNOISE else 0.0,
        rho_nc=rho_nc if kind == KIND_NONCONVEX else 0.0,
        seed=seed,
        spectrum_range=(float(lo), float(hi)),
    )
    if compute_reference:
        set_global_reference(fam)
    return fam


def _quadratic_reference(fam: ProblemFamily) -> tuple[np.ndarray, float]:
    a_bar = np.mean([a.A for a in fam.agents], axis=0)
    rhs = np.mean([a.A @ a.c for a in fam.agents], axis=0)
    x_star = np.linalg.solve(a_bar, rhs)
    return x_star, float(np.min(np.linalg.eigvalsh(a_bar)))


def _descend(fam: ProblemFamily, x0: np.ndarray, max_iter: int = 800) -> tuple[np.ndarray, float]:
    """Gradient descent with Armijo backtracking, for the reference search."""
    x = x0.astype(float, copy=True)
    fx = fam.f(x)
    step0 = 1.0 / fam.ell
    for _ in range(max_iter):
        g = fam.grad(x)
        gg = float(g @ g)
        if gg < 1e-24:
            break
        t = step0
        for _ in range(60):
            cand = x - t * g
            fc = fam.f(cand)
            if fc <= fx - 0.5 * t * gg:
                break
            t /= 2.0
        else:
            break
        x, fx = cand, fc
    return x, fx


def set_global_reference(fam: ProblemFamily, starts: int = 64) -> None:
    """Attach (x*, f*, nu) to the family in place.

    Strongly convex kinds use the closed form of the average quadratic and
    its smallest Hessian eigenvalue as the quadratic-growth constant. The
    ripple kind searches with multi-start descent seeded at the per-agent
    centers plus random draws; exhaustive only at small dimension, so the
    result is flagged approximate above that.
    """
    if fam.kind in (KIND_QUADRATIC, KIND_MULNOISE):
        x_star, nu = _quadratic_reference(fam)
        fam.x_star = x_star
        fam.f_star = fam.f(x_star)
        fam.nu = nu
        fam.reference_exact = True
        return
    x_quad, _ = _quadratic_reference(fam)
    rng = np.random.default_rng(np.random.SeedSequence(entropy=fam.seed, spawn_key=(17,)))
    inits = [x_quad] + [a.c for a in fam.agents]
    u_bar = np.mean([a.c for a in fam.agents], axis=0)
    while len(inits) < starts:
        inits.append(u_bar + rng.standard_normal(fam.p))
    best_x, best_f = None, np.inf
    for x0 in inits[:starts]:
        x, fx = _descend(fam, x0)
        if fx < best_f:
            best_x, best_f = x, fx
    fam.x_star = best_x
    fam.f_star = best_f
    fam.nu = None
    fam.reference_exact = False
    if fam.p > _EXHAUSTIVE_DIM:
        warnings.warn(
            f"reference minimum at p={fam.p} comes from {starts} descent starts and is approximate",
            stacklevel=2,
        )


@dataclass(frozen=True)
class CheckResult:
    name: str
    agent: int
    passed: bool
    detail: str
    witness: Any | None = None


@dataclass(frozen=True)
class AssumptionReport:
    passed: bool
    checks: list[CheckResult]

    def failures(self) -> list[CheckResult]:
        return [c for c in self.checks if not c.passed]


def assumption_check(
    fam: ProblemFamily, samples: int = 100, rng: np.random.Generator | None = None
) -> AssumptionReport:
    """Verify smoothness, the reverse growth inequality, and noise moments.

    For each agent: ‖grad F(x, xi) - grad F(y, xi)‖ ≤ ell ‖x - y‖ on random
    pairs; 0.5 ‖grad f‖² ≤ ell (f - f_i*) on random points; the empirical
    second moment of grad F - grad f stays below
    eta1² ‖grad f‖² + sigma1² + 4 SE. Violations carry a witness point.
    """
    rng = rng or np.random.default_rng(0)
    checks: list[CheckResult] = []
    for idx, agent in enumerate(fam.agents):
        ell = agent.ell
        worst, witness = -np.inf, None
        for _ in range(samples):
            x = rng.normal(0.0, 3.0, size=fam.p)
            y = rng.normal(0.0, 3.0, size=fam.p)
            xi = agent.sample_xi(rng)
            lhs = float(np.linalg.norm(agent.grad_value(x, xi) - agent.grad_value(y, xi)))
            rhs = ell * float(np.linalg.norm(x - y))
            margin = lhs - rhs
            if margin > worst:
                worst, witness = margin, (x, y)
        ok = worst <= 1e-9 * max(1.0, ell)
        checks.append(
            CheckResult(
                "smoothness", idx, ok,
                f"max violation {worst:.3e} against ell={ell:.6g}",
                None if ok else witness,
            )
        )

        worst, witness = -np.inf, None
        for _ in range(samples):
            x = rng.normal(0.0, 3.0, size=fam.p)
            g = agent.true_gradient(x)
            lhs = 0.5 * float(g @ g)
            rhs = ell * (agent.f(x) - agent.f_star)
            margin = lhs - rhs * (1.0 + 1e-9) - 1e-12
            if margin > worst:
                worst, witness = margin, x
        ok = worst <= 0.0
        checks.append(
            CheckResult(
                "gradient_growth", idx, ok,
                f"max violation {worst:.3e} with local minimum {agent.f_star:.6g}",
                None if ok else witness,
            )
        )

        x = rng.normal(0.0, 3.0, size=fam.p)
        g = agent.true_gradient(x)
        draws = max(samples, 50)
        dev = np.empty(draws)
        for t in range(draws):
            xi = agent.sample_xi(rng)
            diff = agent.grad_value(x, xi) - g
            dev[t] = float(diff @ diff)
        mean = float(np.mean(dev))
        se = float(np.std(dev, ddof=1) / np.sqrt(draws)) if draws > 1 else 0.0
        bound = agent.eta1**2 * float(g @ g) + agent.sigma1**2
        ok = mean <= bound + 4.0 * se + 1e-12
        checks.append(
            CheckResult(
                "noise_variance", idx, ok,
                f"empirical {mean:.6g} vs bound {bound:.6g} + 4*SE {4 * se:.3g}",
                None if ok else x,
            )
        )
    return AssumptionReport(passed=all(c.passed for c in checks), checks=checks)


def heterogeneity_dispersion(fam: ProblemFamily) -> float:
    """max_i ‖grad f_i(x*) - grad f(x*)‖, the gradient spread at the optimum."""
    if fam.x_star is None:
        raise ValueError("family has no reference point; call set_global_reference first")
    stack = fam.grad_stack(fam.x_star)
    mean = stack.mean(axis=0)
    return float(np.max(np.linalg.norm(stack - mean, axis=1)))


def _fmt(x: float) -> str:
    return repr(float(x))


def family_to_text(fam: ProblemFamily) -> str:
    """Serialize to the documented plain-text schema (matrices row-major)."""
    lines = [
        "family 1",
        f"kind {fam.kind}",
        f"n {fam.n}",
        f"p {fam.p}",
        f"rho_h {_fmt(fam.rho_h)}",
        f"noise_sigma {_fmt(fam.noise_sigma)}",
        f"rho_nc {_fmt(fam.rho_nc)}",
        f"seed {fam.seed}",
        f"spectrum_range {_fmt(fam.spectrum_range[0])} {_fmt(fam.spectrum_range[1])}",
    ]
    if fam.f_star is not None:
        assert fam.x_star is not None
        lines.append(f"f_star {_fmt(fam.f_star)}")
        lines.append("x_star " + " ".join(_fmt(v) for v in fam.x_star))
        lines.append(f"nu {_fmt(fam.nu) if fam.nu is not None else 'none'}")
        lines.append(f"reference_exact {int(fam.reference_exact)}")
    for i, a in enumerate(fam.agents):
        lines.append(f"agent {i}")
        lines.append("A " + " ".join(_fmt(v) for v in a.A.ravel()))
        lines.append("c " + " ".join(_fmt(v) for v in a.c))
        lines.append(f"d {_fmt(a.d)}")
        lines.append(f"ell {_fmt(a.ell)}")
        lines.append(f"eta1 {_fmt(a.eta1)}")
        lines.append(f"agent_noise_sigma {_fmt(a.noise_sigma)}")
        if isinstance(a, NonconvexAgent):
            lines.append(f"agent_rho_nc {_fmt(a.rho_nc)}")
    return "\n".join(lines) + "\n"


def family_from_text(text: str) -> ProblemFamily:
    """Parse the schema written by :func:`family_to_text`."""
    tokens: dict[str, list[str]] = {}
    agent_blocks: list[dict[str, list[str]]] = []
    current: dict[str, list[str]] | None = None
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, *vals = line.split()
        if key == "agent":
            current = {}
            agent_blocks.append(current)
            continue
        (current if current is not None else tokens)[key] = vals
    if tokens.get("family") != ["1"]:
        raise ValueError("not a family file (missing 'family 1' header)")
    kind = tokens["kind"][0]
    n, p = int(tokens["n"][0]), int(tokens["p"][0])
    if len(agent_blocks) != n:
        raise ValueError(f"expected {n} agent blocks, found {len(agent_blocks)}")
    agents: list[Any] = []
    for blk in agent_blocks:
        a = np.array([float(v) for v in blk["A"]]).reshape(p, p)
        c = np.array([float(v) for v in blk["c"]])
        d = float(blk["d"][0])
        ell = float(blk["ell"][0])
        eta1 = float(blk["eta1"][0])
        sigma = float(blk["agent_noise_sigma"][0])
        if kind == KIND_QUADRATIC:
            agents.append(QuadraticAgent(A=a, c=c, d=d, noise_sigma=sigma, ell=ell))
        elif kind == KIND_NONCONVEX:
            agents.append(
                NonconvexAgent(
                    A=a, c=c, d=d, noise_sigma=sigma, ell=ell,
                    rho_nc=float(blk["agent_rho_nc"][0]),
                )
            )
        elif kind == KIND_MULNOISE:
            agents.append(MultiplicativeNoiseAgent(A=a, c=c, d=d, noise_sigma=0.0, ell=ell, eta1=eta1))
        else:
            raise ValueError(f"unknown family kind {kind!r} in file")
    fam = ProblemFamily(
        kind=kind,
        agents=agents,
        p=p,
        rho_h=float(tokens["rho_h"][0]),
        noise_sigma=float(tokens["noise_sigma"][0]),
        rho_nc=float(tokens["rho_nc"][0]),
        seed=int(tokens["seed"][0]),
        spectrum_range=(
            float(tokens["spectrum_range"][0]),
            float(tokens["spectrum_range"][1]),
        ),
    )
    if "f_star" in tokens:
        fam.f_star = float(tokens["f_star"][0])
        fam.x_star = np.array([float(v) for v in tokens["x_star"]])
        fam.nu = None if tokens["nu"][0] == "none" else float(tokens["nu"][0])
        fam.reference_exact = bool(int(tokens["reference_exact"][0]))
    return fam
