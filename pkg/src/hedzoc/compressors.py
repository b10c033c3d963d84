"""Bounded-relative-error compressors and their bit accounting.

Every compressor C here satisfies E‖C(x)/r - x‖² ≤ (1-δ)‖x‖² for constants
r > 0 and δ ∈ (0, 1] recorded on its spec, together with the derived bound
δ₀ = 2r²(1-δ) + 2(1-r)² and the per-vector payload size in bits.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

IDENTITY = "identity"
QUANTIZER = "quantizer"
TOPK = "topk"
RANDK = "randk"
NORMSIGN = "normsign"

_KINDS_WITH_K = (QUANTIZER, TOPK, RANDK)
_ALL_KINDS = (IDENTITY, QUANTIZER, TOPK, RANDK, NORMSIGN)

# Bits of one full-precision scalar (64-bit float).
B1_DEFAULT = 64


@dataclass(frozen=True)
class CompressorKind:
    """A compressor family plus its integer parameter where one applies.

    ``k`` is the bit width for the quantizer and the number of kept
    coordinates for the top-k and rand-k sparsifiers; it must be None for
    the identity and norm-sign kinds.
    """

    name: str
    k: int | None = None

    def __post_init__(self) -> None:
        if self.name not in _ALL_KINDS:
            raise ValueError(f"unknown compressor kind {self.name!r}; expected one of {_ALL_KINDS}")
        if self.name in _KINDS_WITH_K:
            if self.k is None or self.k < 1:
                raise ValueError(f"compressor {self.name!r} needs an integer parameter k >= 1, got {self.k}")
        elif self.k is not None:
            raise ValueError(f"compressor {self.name!r} takes no parameter, got k={self.k}")


@dataclass(frozen=True)
class CompressorSpec:
    """A kind bound to a dimension, with its contraction and bit constants."""

    kind: CompressorKind
    p: int
    r: float
    delta: float
    delta0: float
    bits_per_vector: int
    b1: int = B1_DEFAULT


def params_for(kind: CompressorKind, p: int, b1: int = B1_DEFAULT) -> CompressorSpec:
    """Constants (r, δ, δ₀, b_v) for one kind at dimension p.

    Examples
    --------
    >>> params_for(CompressorKind("quantizer", 4), 784).bits_per_vector
    3984
    """
    if p < 1:
        raise ValueError(f"dimension must be positive, got p={p}")
    name, k = kind.name, kind.k
    if name in (TOPK, RANDK) and k is not None and k > p:
        raise ValueError(f"{name} parameter k={k} exceeds the dimension p={p}")
    if name == IDENTITY:
        r, delta, bits = 1.0, 1.0, p * b1
    elif name == QUANTIZER:
        assert k is not None
        r = 1.0 + p / 4.0**k
        delta = 1.0 / r
        bits = (k + 1) * p + b1
    elif name in (TOPK, RANDK):
        assert k is not None
        r, delta, bits = 1.0, k / p, k * b1
    else:
        r, delta, bits = p / 2.0, 1.0 / p**2, p + b1
    delta0 = 2.0 * r * r * (1.0 - delta) + 2.0 * (1.0 - r) ** 2
    return CompressorSpec(kind=kind, p=p, r=r, delta=delta, delta0=delta0, bits_per_vector=int(bits), b1=b1)


def compress(spec: CompressorSpec, x: np.ndarray, rng: np.random.Generator | None = None) -> np.ndarray:
    """Apply the compressor to one vector.

    The quantizer and the rand-k sparsifier consume randomness from ``rng``;
    the other kinds ignore it. A zero input maps to zero for every kind.
    """
    x = np.asarray(x, dtype=float)
    if x.shape != (spec.p,):
        raise ValueError(f"expected a vector of shape ({spec.p},), got {x.shape}")
    name, k = spec.kind.name, spec.kind.k
    if name == IDENTITY:
        return x.copy()
    if name == QUANTIZER:
        norm = np.max(np.abs(x))
        if norm == 0.0:
            return np.zeros_like(x)
        if rng is None:
            raise ValueError("the quantizer needs an rng for its dither")
        scale = 2.0 ** (spec.kind.k - 1)  # type: ignore[operator]
        dither = rng.random(spec.p)
        return (norm / scale) * np.sign(x) * np.floor(scale * np.abs(x) / norm + dither)
    if name == TOPK:
        # Stable sort on negated magnitudes keeps the lower index on ties.
        order = np.argsort(-np.abs(x), kind="stable")
        out = np.zeros_like(x)
        keep = order[:k]
        out[keep] = x[keep]
        return out
    if name == RANDK:
        if rng is None:
            raise ValueError("rand-k needs an rng to pick coordinates")
        keep = rng.choice(spec.p, size=k, replace=False)
        out = np.zeros_like(x)
        out[keep] = x[keep]
        return out
    norm = np.max(np.abs(x))
    if norm == 0.0:
        return np.zeros_like(x)
    return (norm / 2.0) * np.sign(x)


def contraction_estimate(
    spec: CompressorSpec, trials: int, rng: np.random.Generator
) -> tuple[float, float]:
    """Monte-Carlo mean and standard error of ‖C(x)/r - x‖²/‖x‖².

    Inputs are standard normal vectors; the mean is compared against the
    contract bound (1-δ) by the acceptance suite.
    """
    if trials < 1:
        raise ValueError(f"need at least one trial, got {trials}")
    ratios = np.empty(trials)
    for t in range(trials):
        x = rng.standard_normal(spec.p)
        err = compress(spec, x, rng) / spec.r - x
        ratios[t] = float(err @ err) / float(x @ x)
    mean = float(np.mean(ratios))
    se = float(np.std(ratios, ddof=1) / np.sqrt(trials)) if trials > 1 else 0.0
    return mean, se


def parse_compressor(text: str) -> CompressorKind:
    """Parse a config string: identity | quant:k | topk:k | randk:k | normsign."""
    text = text.strip().lower()
    if text == "identity":
        return CompressorKind(IDENTITY)
    if text == "normsign":
        return CompressorKind(NORMSIGN)
    head, sep, tail = text.partition(":")
    names = {"quant": QUANTIZER, "topk": TOPK, "randk": RANDK}
    if sep and head in names:
        try:
            k = int(tail)
        except ValueError:
            raise ValueError(f"compressor parameter in {text!r} must be an integer") from None
        return CompressorKind(names[head], k)
    raise ValueError(
        f"unknown compressor string {text!r}; expected identity, quant:k, topk:k, randk:k or normsign"
    )


def format_compressor(kind: CompressorKind) -> str:
    """Inverse of :func:`parse_compressor`."""
    if kind.name == IDENTITY:
        return "identity"
    if kind.name == NORMSIGN:
        return "normsign"
    short = {QUANTIZER: "quant", TOPK: "topk", RANDK: "randk"}[kind.name]
    return f"{short}:{kind.k}"
