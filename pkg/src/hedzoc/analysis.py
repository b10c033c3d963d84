"""Convergence constants, admissible parameter ranges, and Lyapunov terms.

Two families of symbols appear throughout:

- user coupling constants ``eps1``..``eps4`` chosen by the experimenter
  (dual-to-consensus ratio, stepsize product, fixed-horizon scale, decay
  scale), and
- derived constants computed here: thresholds ``kappa1``, ``kappa2``, ...,
  intermediate quantities ``veps0``..``veps15`` with tilde variants
  ``veps9_t``/``veps12_t``, the ``a``-family ``a1``..``a12`` (tilde variants
  suffixed ``_t``), and the compressor-coupling pair ``c1``, ``c2``.

Quantities that require optional inputs (a decay scale ``eps4``, a growth
constant ``nu``, per-agent minima for the heterogeneity variance) evaluate
to None when those inputs are absent rather than silently using stand-ins.
"""
from __future__ import annotations

from dataclasses import dataclass, fields
from typing import Any

import numpy as np

from .graph import MixingMatrices
from .problems import ProblemFamily


@dataclass(frozen=True)
class ConstantsInput:
    """Everything the constants depend on.

    Required: graph spectrum bounds (rho, rho2), smoothness ell, dimensions
    (p, n), compressor constants (delta, r) with mixing weight omega, and
    the couplings eps1, eps2. Optional: noise moments, the decay scale
    eps4, the decay exponent theta, the growth constant nu, global and
    per-agent minima, and initial Lyapunov levels for the residual-error
    bound.
    """

    rho: float
    rho2: float
    ell: float
    p: int
    n: int
    delta: float
    r: float
    omega: float
    eps1: float
    eps2: float
    eta1: float = 0.0
    eta2: float = 0.0
    sigma1: float = 0.0
    kappa_mu: float = 0.1
    eps4: float | None = None
    theta: float | None = None
    nu: float | None = None
    f_star: float | None = None
    f_i_stars: tuple[float, ...] | None = None
    kappa_hat_m: float = 1.0
    e4_init: float = 0.0
    l1_init: float = 0.0

    def __post_init__(self) -> None:
        for name in ("rho", "rho2", "ell", "r", "omega", "eps1", "eps2", "kappa_mu"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"constants input {name} must be positive, got {getattr(self, name)}")
        if not 0.0 < self.delta <= 1.0:
            raise ValueError(f"contraction constant delta must lie in (0, 1], got {self.delta}")
        if self.rho2 > self.rho * (1.0 + 1e-12):
            raise ValueError(f"rho2={self.rho2} cannot exceed rho={self.rho}")
        if self.p < 1 or self.n < 1:
            raise ValueError(f"need p >= 1 and n >= 1, got p={self.p}, n={self.n}")
        for name in ("eta1", "eta2", "sigma1"):
            if getattr(self, name) < 0.0:
                raise ValueError(f"constants input {name} must be nonnegative")


@dataclass(frozen=True)
class ConstantsOutput:
    """The full derived roster.

    None marks a value that could not be formed: either an optional input
    was absent, or a positivity precondition failed (a1, a2, or a3 going
    nonpositive means the chosen eps2 is inadmissible; the raw a-family is
    still reported so the caller can see which margin collapsed).
    """

    c1: float
    c2: float
    delta0: float
    sigma2_check: float | None
    kappa1: float
    kappa2: float
    kappa3_lo: float
    kappa3_hi: float
    kappa0: float | None
    kappa0_t: float | None
    kappa_t_t: float | None
    kappa_t: float | None
    kappa_m: float | None
    veps0: float
    veps1: float
    veps2: float
    veps3: float
    veps4: float
    veps5: float
    veps6: float
    veps7: float
    veps8: float
    veps9: float
    veps9_t: float
    veps10: float
    veps11: float | None
    veps12: float
    veps12_t: float
    veps13: float
    veps14: float
    veps15: float | None
    b6: float
    a1: float
    a2: float
    a3: float
    a4: float | None
    a5: float
    a5_prime: float
    a6: float
    a7: float | None
    a8: float | None
    a9: float
    a10: float | None
    a11: float | None
    a12: float | None
    a4_t: float | None
    a5_t: float
    a5_t_prime: float
    a8_t: float
    a10_t: float | None
    a12_t: float | None
    d1: float
    d1_t: float
    l_bar: float | None

    def as_dict(self) -> dict[str, float | None]:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def _cubic_root(a9: float, rhs: float) -> float:
    """Unique positive root of a9 t² + t³ = rhs, bisected to 1e-12."""
    lo, hi = 0.0, 1.0
    while a9 * hi * hi + hi**3 < rhs:
        hi *= 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if a9 * mid * mid + mid**3 < rhs:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-12:
            break
    return 0.5 * (lo + hi)


def admissible_eps3(a9: float) -> tuple[float, float]:
    """Lower and upper admissible values of the fixed-horizon scale eps3.

    Both ends solve a9 t² + t³ = rhs (rhs = 1/4 and 3/4); the left side is
    strictly increasing in t > 0, so each root is unique.
    """
    if a9 <= 0.0:
        raise ValueError(f"a9 must be positive, got {a9}")
    return _cubic_root(a9, 0.25), _cubic_root(a9, 0.75)


def constants(inp: ConstantsInput) -> ConstantsOutput:
    """Evaluate the roster in dependency order."""
    rho, rho2, ell = inp.rho, inp.rho2, inp.ell
    p, n = float(inp.p), float(inp.n)
    e1_, e2_ = inp.eps1, inp.eps2
    eta1sq = 1.0 + inp.eta1**2
    kmu2 = inp.kappa_mu**2

    c1 = inp.delta * inp.omega * inp.r / 2.0
    c2 = c1 + 2.0 * c1 * c1
    cinv = 1.0 + 1.0 / c1
    delta0 = 2.0 * inp.r**2 * (1.0 - inp.delta) + 2.0 * (1.0 - inp.r) ** 2

    sigma2_check = None
    if inp.f_star is not None and inp.f_i_stars is not None:
        if len(inp.f_i_stars) != inp.n:
            raise ValueError(f"expected {inp.n} per-agent minima, got {len(inp.f_i_stars)}")
        spread = inp.f_star - sum(inp.f_i_stars) / n
        # Nonnegative in exact arithmetic because the average objective at
        # any point dominates the average of the per-agent minima.
        sigma2_check = max(0.0, 2.0 * ell * spread)

    kappa1 = max(13.0 / (2.0 * rho2), rho2)

    veps1 = (1.0 + e1_) / rho2
    veps3 = (2.0 * rho2 * e1_ - 13.0) / 4.0
    veps4 = (3.0 + 4.0 * cinv) * rho**2 * e1_**2 - rho2 * e1_ + rho + 2.0 * e1_**2 + 2.0 * e1_ + 4.0
    veps5 = (
        3.0 * e1_**2 * e2_**2 * rho**2
        + (e1_ * e2_**2 + e2_**2) * rho
        - 0.5 * e1_ * e2_ * rho2
        + e1_**2 * e2_**2
        + 2.0 * e1_ * e2_**2
        + e2_**2
        + e1_ * e2_
        + 0.5
    )
    veps6 = max((1.0 + e1_ * rho2) / 2.0, (1.0 + e1_) / 2.0 + 1.0 / (2.0 * e1_ * rho2**2))
    veps7 = (e1_ * rho2 - 1.0) / (2.0 * e1_ * rho2)
    veps8 = (1.0 + e1_) / rho2 + 1.0 / rho2**2
    veps10 = rho * e1_ * e2_ + 3.0 * rho * e2_**2 + e1_ + e2_ + 1.0
    veps12 = (
        10.0
        + 16.0 * cinv
        + ell
        + ((4.0 * (e1_ + 1.0) ** 2 + 2.0 * e1_ * e2_ + 2.0 * e2_) / rho2 + 1.0 / rho2**2) * ell**2 / e2_
        + (3.0 + 2.0 / rho2**2 + 2.0 * veps8 + 2.0 * veps1) * ell**2
    )
    veps13 = 0.5 * rho * delta0 * e1_ + 2.0 * delta0 + rho * delta0
    veps14 = (
        (3.0 * rho**2 + 4.0 * cinv * rho**2 + 2.0) * delta0 * e1_**2
        + (2.0 - rho2) * delta0 * e1_
        + (3.0 + rho * ell**2) * delta0
    )
    veps2 = (
        0.5 * rho * e1_ * e2_
        + (2.0 + rho) * e2_
        + (3.0 * rho**2 + 4.0 * cinv * rho**2 + 2.0) * e1_**2 * e2_**2
        + (2.0 - rho2) * e1_ * e2_**2
        + (3.0 + rho * ell**2) * e2_**2
    )
    veps9 = (
        4.0 * (1.0 / rho2**2 + 4.0 * (e1_ + 1.0) ** 2 / rho2) * ell**4 * e2_
        + (1.0 + 2.0 * ell**2) * e2_ / (2.0 * p * eta1sq)
        + (5.0 / (p * eta1sq) + 16.0) * ell**2 * e2_**2
        + 4.0 * (2.0 / rho2**2 + 2.0 * (e1_ + 1.0) / rho2 + 2.0 * veps8 + 2.0 * veps1 + 3.0)
        * ell**4
        * e2_**2
    )
    veps9_t = (
        4.0 * (1.0 / rho2**2 + 2.0 * (e1_ + 1.0) ** 2 / rho2) * ell**4 * e2_
        + 4.0 * (2.0 / rho2**2 + (e1_ + 1.0) / rho2 + 2.0) * ell**4 * e2_**2
    )
    veps12_t = (
        6.0
        + 16.0 * cinv
        + ell
        + ell**2 / (rho2**2 * e2_)
        + (2.0 / rho2**2 + (2.0 * (e1_ + 1.0) ** 2 + 2.0 * e1_ * e2_ + e2_) / (rho2 * e2_) + 2.0)
        * ell**2
    )

    b6 = (
        e1_**2 * e2_**2
        + 2.0 * e1_ * e2_**2
        + e2_**2
        + e1_ * e2_
        + (e1_ * e2_**2 + e2_**2 + 0.5 * e1_ * e2_ + e2_) * rho
        + 3.0 * e1_**2 * e2_**2 * rho**2
    )

    a1 = 0.5 * (veps3 * e2_ - veps4 * e2_**2)
    a2 = e2_ / 16.0 - (5.0 / 4.0 + 2.0 * cinv) * rho * e2_**2
    a3 = 0.5 * (c2 - veps13 * e2_ - veps14 * e2_**2)
    a6 = 2.0 / (rho2 * e2_)
    veps0 = max(
        1.0 + 2.5 * ell**2,
        np.sqrt(8.0 + 16.0 * cinv + 4.0 * p * eta1sq * (1.0 + inp.eta2**2) * (6.0 + 16.0 * cinv + ell) + 2.0 * a6) * ell,
        8.0 / rho2,
        4.0 * p * eta1sq * e2_ * ell,
    )
    a5 = ell**2 * (((29.0 + 16.0 / c1) * e2_ + 3.5) / p + 0.25)
    a5_prime = a5 + ell**2 * 2.0 * a6 * e2_ / (veps0 * p)
    a9 = 8.0 * eta1sq * ell**2
    a5_t = ell**2 * (((24.0 + 16.0 / c1) * e2_ + 2.5) / p + 0.25)
    a5_t_prime = a5_t + ell**2 * 2.0 * a6 * e2_ / (veps0 * p)
    a8_t = 8.0 * eta1sq * ell * veps12_t
    # Ratios with a1 in the denominator only mean anything when the
    # stepsize product is admissible; a1 <= 0 voids them.
    a10_t = 2.0 * ell**2 * a8_t / a1 if a1 > 0.0 else None

    a7 = a11 = a4_t = a12_t = None
    if sigma2_check is not None:
        a7 = 2.0 * (inp.sigma1**2 + 2.0 * eta1sq * sigma2_check) * ell
        a11 = a7 + ell**2 * kmu2
        a4_t = 2.0 * (inp.sigma1**2 + 2.0 * eta1sq * sigma2_check) * veps12_t
        if a1 > 0.0:
            a12_t = 2.0 * ell**2 * (a4_t + a5_t * kmu2) / a1

    veps11 = a4 = a8 = a10 = a12 = None
    if inp.eps4 is not None:
        veps11 = (3.0 * inp.eps4 / (2.0 * e2_**2)) * (veps8 + veps1)
        a8 = 2.0 * ell * (veps11 / p + 4.0 * eta1sq * veps12)
        a10 = 2.0 * ell**2 * a8 / a1 if a1 > 0.0 else None
        if sigma2_check is not None:
            a4 = 2.0 * veps12 * inp.sigma1**2 + veps11 * sigma2_check / p + 4.0 * eta1sq * veps12 * sigma2_check
            if a1 > 0.0:
                a12 = 2.0 * ell**2 * (a4 + a5 * kmu2) / a1

    kappa3_lo, kappa3_hi = admissible_eps3(a9)

    # Threshold on the stepsize product: each entry guards one positivity
    # or contraction requirement. A degenerate quadratic coefficient means
    # the corresponding constraint is vacuous.
    if veps14 > 0.0:
        quad_root = (np.sqrt(veps13**2 + 4.0 * veps14 * c2) - veps13) / (2.0 * veps14)
    elif veps13 > 0.0:
        quad_root = c2 / veps13
    else:
        quad_root = np.inf
    kappa2 = min(
        veps3 / veps4,
        (1.0 / rho) / (20.0 + 32.0 * cinv),
        quad_root,
        8.0,
    )

    kappa0 = None
    if a1 > 0.0 and a2 > 0.0 and (delta0 == 0.0 or a3 > 0.0):
        kappa0 = max(
            veps0,
            2.0 * veps5 / a1,
            veps10 / (2.0 * a2),
            delta0 * b6 / a3 if delta0 > 0.0 else 0.0,
            p * e2_ * veps12,
        )

    kappa0_t = None
    if a1 > 0.0:
        kappa0_t = max(veps0, (p * eta1sq * veps9_t / a1) ** (1.0 / 3.0), p * e2_ * veps12_t)

    kappa_t_t = None
    if a12_t is not None and a10_t is not None:
        kappa_t_t = max(1.0 / a1**2, a10_t**2, a12_t**2)

    kappa_t = None
    if inp.theta is not None and a12_t is not None:
        th = inp.theta
        kappa_t = max(
            (kappa0_t / e2_) ** (1.0 / th),
            (1.0 / a1) ** (1.0 / th),
            (4.0 * a9 * p / n) ** (1.0 / (2.0 * th - 1.0)),
            (4.0 * a10_t * p) ** (1.0 / (3.0 * th - 1.0)),
            (a12_t * p) ** (1.0 / (3.0 * th - 1.0)),
        )

    kappa_m = None
    if (
        inp.eps4 is not None and inp.nu is not None
        and a10 is not None and a12 is not None and kappa0 is not None
    ):
        e4_ = inp.eps4
        kappa_m = max(
            kappa0 / e4_,
            e2_ / (a1 * e4_),
            4.0 * a9 * e2_**2 * p / (e4_**2 * n) + 1.0,
            np.sqrt(2.0 * a10 * e2_**3 * p / e4_**3) + 1.0,
            np.sqrt(a12 * e2_**3 * p / (2.0 * e4_**3)) + 1.0,
            e2_ / (2.0 * inp.nu * e4_) + inp.kappa_hat_m,
        )

    l_bar = veps15 = None
    if a11 is not None:
        l_bar = 2.0 * inp.e4_init / n + 4.0 * ell**2 * inp.l1_init / n + a11 / (2.0 * a9) + 2.0
        if inp.eps4 is not None and inp.nu is not None and a7 is not None:
            denom = inp.eps4**2 * (inp.nu * e2_ / (2.0 * inp.eps4) - 1.0)
            if denom > 0.0:
                veps15 = 4.0 * e2_**2 * (a9 * l_bar + a7 + ell**2 * kmu2) / denom

    d1 = min(a1, a2, a3) / veps6
    d1_t = min(a1, 2.0 * a2, 2.0 * a3) / veps6

    return ConstantsOutput(
        c1=c1, c2=c2, delta0=delta0, sigma2_check=sigma2_check,
        kappa1=kappa1, kappa2=float(kappa2),
        kappa3_lo=kappa3_lo, kappa3_hi=kappa3_hi,
        kappa0=None if kappa0 is None else float(kappa0),
        kappa0_t=None if kappa0_t is None else float(kappa0_t),
        kappa_t_t=kappa_t_t, kappa_t=kappa_t, kappa_m=kappa_m,
        veps0=float(veps0), veps1=veps1, veps2=veps2, veps3=veps3, veps4=veps4,
        veps5=veps5, veps6=veps6, veps7=veps7, veps8=veps8, veps9=veps9,
        veps9_t=veps9_t, veps10=veps10, veps11=veps11, veps12=veps12,
        veps12_t=veps12_t, veps13=veps13, veps14=veps14, veps15=veps15,
        b6=b6,
        a1=a1, a2=a2, a3=a3, a4=a4, a5=a5, a5_prime=a5_prime, a6=a6, a7=a7,
        a8=a8, a9=a9, a10=a10, a11=a11, a12=a12,
        a4_t=a4_t, a5_t=a5_t, a5_t_prime=a5_t_prime, a8_t=a8_t, a10_t=a10_t,
        a12_t=a12_t,
        d1=d1, d1_t=d1_t, l_bar=l_bar,
    )


def horizon_floor(out: ConstantsOutput, mode: str, n: int, p: int) -> float | None:
    """Smallest horizon the finite-horizon guarantees cover, when known.

    Fixed-step mode: max(kappa0_t², n³ kappa_t_t / p). Decaying-exponent
    mode: kappa_t. Known-growth mode has a floor on the offset m instead
    (kappa_m), so None is returned. None also signals missing inputs.
    """
    if mode == "nonconvex":
        if out.kappa_t_t is None or out.kappa0_t is None:
            return None
        return max(out.kappa0_t**2, n**3 * out.kappa_t_t / p)
    if mode == "pl_unknown":
        return out.kappa_t
    return None


@dataclass(frozen=True)
class LyapunovSnapshot:
    """The five energy terms at one iterate, plus their combinations.

    ``e4`` is None when the family lacks a global minimum value; ``l1``
    then degrades to None as well while ``l2`` (which never includes the
    optimality gap) stays available. ``hat_l2`` is the unweighted sum of
    the three squared seminorms used to lower-bound ``l2``.
    """

    e1: float
    e2: float
    e3: float
    e4: float | None
    e5: float
    l2: float
    hat_l2: float

    @property
    def l1(self) -> float | None:
        if self.e4 is None:
            return None
        return self.l2 + self.e4


def lyapunov(states: Any, mix: MixingMatrices, fam: ProblemFamily, gamma_k: float, eps1: float) -> LyapunovSnapshot:
    """Evaluate the energy terms for the current network state.

    ``states`` must expose (n, p) arrays X, V, Y. The dual correction uses
    the per-agent gradients at the network average, and the weighted norms
    are built from the mixing matrices of the run's graph.
    """
    X, V, Y = states.X, states.V, states.Y
    n = X.shape[0]
    beta_k = eps1 * gamma_k
    xbar = X.mean(axis=0)
    g0 = fam.grad_stack(xbar)
    W = V + g0 / gamma_k

    EX = mix.E @ X
    FW = mix.F @ W
    e1 = 0.5 * float(np.sum(X * EX))
    e2 = 0.5 * ((beta_k + gamma_k) / gamma_k) * float(np.sum(W * FW))
    e3 = float(np.sum(EX * FW))
    e4 = None if fam.f_star is None else n * (fam.f(xbar) - fam.f_star)
    e5 = float(np.sum((X - Y) ** 2))
    l2 = e1 + e2 + e3 + e5
    hat_l2 = float(np.sum(X * EX)) + float(np.sum(W * FW)) + e5
    return LyapunovSnapshot(e1=e1, e2=e2, e3=e3, e4=e4, e5=e5, l2=l2, hat_l2=hat_l2)


def family_constants_input(
    fam: ProblemFamily,
    rho: float,
    rho2: float,
    comp_delta: float,
    comp_r: float,
    omega: float,
    eps1: float,
    eps2: float,
    **optional: Any,
) -> ConstantsInput:
    """Assemble a ConstantsInput from a family plus graph and compressor data."""
    return ConstantsInput(
        rho=rho, rho2=rho2, ell=fam.ell, p=fam.p, n=fam.n,
        delta=comp_delta, r=comp_r, omega=omega, eps1=eps1, eps2=eps2,
        eta1=fam.eta1, sigma1=fam.sigma1,
        nu=optional.pop("nu", fam.nu),
        f_star=optional.pop("f_star", fam.f_star),
        f_i_stars=optional.pop("f_i_stars", tuple(fam.f_i_stars)),
        **optional,
    )
