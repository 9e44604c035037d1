"""Attention maps, the attention-inconsistency metric, and per-region ranges.

Within one activation region the classifier gradient is constant, so the
actual attention map after a perturbation is constant there too.  The
expected map is constant for keep-expectation atoms (brightness, patch) and
affine in the translation parameter otherwise; the inconsistency metric is
therefore constant or convex per region, and its exact range comes from one
sample or from vertex evaluation plus convex minimization.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import uniform_filter
from scipy.optimize import minimize_scalar

from . import polytope as pt
from .errors import InfeasibleError, InputError, NumericError
from .network import (
    ActivationPattern,
    Network,
    activation_pattern,
    affine_restriction,
)
from .perturb import (
    ImageMeta,
    PerturbationSpec,
    Translation,
    apply_direct,
    translation_index_maps,
)

FILTER_IDENTITY = "identity"
FILTER_ABSOLUTE = "absolute"
FILTER_MEAN3 = "mean3"
DIST_L1 = "l1"
DIST_L2 = "l2"

# Experiment defaults: identity filter, L2 distance, threshold 3.0 with a
# near-boundary width of 0.2.
DEFAULT_DELTA = 3.0
DEFAULT_W_DELTA = 0.2


class BoundaryWarning(UserWarning):
    """The query point sits exactly on an activation-region boundary."""


@dataclass(frozen=True)
class AttentionConfig:
    """Filter/distance choices and the robustness thresholds."""

    filter: str = FILTER_IDENTITY
    dist: str = DIST_L2
    delta: float = DEFAULT_DELTA
    w_delta: float = DEFAULT_W_DELTA

    def __post_init__(self):
        if self.filter not in (FILTER_IDENTITY, FILTER_ABSOLUTE, FILTER_MEAN3):
            raise InputError(f"unknown filter {self.filter!r}")
        if self.dist not in (DIST_L1, DIST_L2):
            raise InputError(f"unknown distance {self.dist!r}")
        if self.delta < 0 or self.w_delta < 0:
            raise InputError("delta and w_delta must be nonnegative")


@dataclass(frozen=True)
class AttentionMap:
    """Per-pixel contribution magnitudes toward one class confidence."""

    values: np.ndarray
    class_index: int


@dataclass(frozen=True)
class ValueRange:
    lo: float
    up: float

    def __post_init__(self):
        if self.lo > self.up + 1e-12:
            raise InputError(f"invalid range [{self.lo}, {self.up}]")
        object.__setattr__(self, "up", max(self.lo, self.up))


def apply_filter(values: np.ndarray, kind: str, meta: ImageMeta | None = None):
    """Run a gradient vector through the configured map filter."""
    if kind == FILTER_IDENTITY:
        return np.asarray(values, dtype=float).copy()
    if kind == FILTER_ABSOLUTE:
        return np.abs(values)
    if kind == FILTER_MEAN3:
        if meta is None:
            raise InputError("the 3x3 mean filter needs the image shape")
        grid = np.asarray(values, dtype=float).reshape(meta.height, meta.width)
        return uniform_filter(grid, size=3, mode="constant", cval=0.0).ravel()
    raise InputError(f"unknown filter {kind!r}")


def _distance(diff: np.ndarray, kind: str) -> float:
    if kind == DIST_L1:
        return float(np.sum(np.abs(diff)))
    return float(np.linalg.norm(diff))


def _pattern_with_boundary_check(f: Network, x: np.ndarray) -> ActivationPattern:
    v = np.asarray(x, dtype=float).ravel()
    bits = []
    on_boundary = False
    for layer in f.layers:
        v = layer.weights @ v + layer.bias
        if layer.has_relu:
            if np.any(v == 0.0):
                on_boundary = True
            bits.append(tuple(int(z > 0.0) for z in v))
            v = np.maximum(v, 0.0)
    if on_boundary:
        warnings.warn(
            "input sits exactly on an activation-region boundary; "
            "zero pre-activations count as inactive",
            BoundaryWarning,
        )
    return ActivationPattern(bits=tuple(bits), network_uid=f.uid)


def saliency_map(
    f: Network,
    x: np.ndarray,
    j: int,
    filter: str = FILTER_IDENTITY,
    meta: ImageMeta | None = None,
) -> AttentionMap:
    """Filtered gradient of class confidence j with respect to the input at x.

    The gradient is the constant row of the affine restriction on x's
    activation region; inputs exactly on a region boundary raise a
    BoundaryWarning and use the inactive-at-zero convention.
    """
    if not 0 <= j < f.output_dim:
        raise InputError(f"class index {j} out of range 0..{f.output_dim - 1}")
    p = _pattern_with_boundary_check(f, x)
    grad = affine_restriction(f, p).A_prime[j]
    return AttentionMap(values=apply_filter(grad, filter, meta), class_index=j)


def _all_maps(f: Network, x: np.ndarray, cfg: AttentionConfig, meta: ImageMeta):
    """Filtered gradient maps for every class at x, as one (K, N) array."""
    p = _pattern_with_boundary_check(f, x)
    A = affine_restriction(f, p).A_prime
    return np.stack([apply_filter(A[j], cfg.filter, meta) for j in range(A.shape[0])])


def attention_inconsistency(
    f: Network,
    spec: PerturbationSpec,
    x0: np.ndarray,
    theta: np.ndarray,
    cfg: AttentionConfig,
) -> float:
    """Summed distance between actual and expected attention maps at theta.

    Actual maps come from the classifier gradient at the directly perturbed
    image; expected maps are the unperturbed maps pushed through the
    perturbation's map transform.
    """
    meta = spec.image_meta
    x0 = np.asarray(x0, dtype=float).ravel()
    actual = _all_maps(f, apply_direct(spec, theta, x0), cfg, meta)
    base = _all_maps(f, x0, cfg, meta)
    total = 0.0
    for j in range(f.output_dim):
        expected = _expected_transform(spec, base[j], theta)
        total += _distance(actual[j] - expected, cfg.dist)
    return total


def _expected_transform(spec, m, theta):
    # Same semantics as perturb.expected_map_transform, skipping the theta
    # box check so range computations can probe affine coefficients.
    v = np.asarray(m, dtype=float).ravel().copy()
    for atom, th in zip(spec.atoms, theta):
        if isinstance(atom, Translation):
            s, t, valid = translation_index_maps(spec.image_meta, atom.tx)
            y = np.zeros_like(v)
            y[valid] = v[s[valid]] + th * (v[t[valid]] - v[s[valid]])
            v = y
    return v


def _region_vertices(region: pt.HPolytope) -> list[np.ndarray]:
    if region.dim == 1:
        lo, x_lo = pt.minimize_linear(region, np.array([1.0]))
        hi, _ = pt.minimize_linear(region, np.array([-1.0]))
        return [x_lo, np.array([-hi])]
    if region.dim == 2:
        return pt.vertices_2d(region)
    raise InputError(
        "value ranges with a translation atom need a 1-D or 2-D parameter space"
    )


def ai_range_in_region(
    f: Network,
    g_net: Network,
    spec: PerturbationSpec,
    x0: np.ndarray,
    region: pt.HPolytope,
    cfg: AttentionConfig,
) -> ValueRange:
    """Exact [lo, up] of attention inconsistency over one activation region.

    Keep-expectation specs make the metric constant, so a single interior
    sample suffices.  With a translation atom the metric is convex in the
    translation parameter: the maximum sits at a region vertex and the
    minimum comes from an exact epigraph LP (L1) or bounded scalar convex
    minimization (L2).
    """
    witness = pt.feasible_interior_point(region)
    if witness is None:
        raise InputError("region has no strict interior")
    if not spec.has_translation:
        v = attention_inconsistency(f, spec, x0, witness, cfg)
        return ValueRange(lo=v, up=v)

    meta = spec.image_meta
    x0 = np.asarray(x0, dtype=float).ravel()
    actual = _all_maps(f, apply_direct(spec, witness, x0), cfg, meta)
    base = _all_maps(f, x0, cfg, meta)
    kt = next(
        i for i, a in enumerate(spec.atoms) if isinstance(a, Translation)
    )
    atom = spec.atoms[kt]
    s, t, valid = translation_index_maps(meta, atom.tx)
    # Residual per class: r_j(theta) = c_j + theta_kt * g_j.
    cs, gs = [], []
    for j in range(f.output_dim):
        e0 = np.zeros(meta.n_pixels)
        e0[valid] = base[j][s[valid]]
        d = np.zeros(meta.n_pixels)
        d[valid] = base[j][t[valid]] - base[j][s[valid]]
        cs.append(actual[j] - e0)
        gs.append(-d)

    def ai_at(th_kt: float) -> float:
        return sum(_distance(c + th_kt * g, cfg.dist) for c, g in zip(cs, gs))

    verts = _region_vertices(region)
    up = max(ai_at(float(v[kt])) for v in verts)
    lo_kt, _ = pt.minimize_linear(region, _unit(region.dim, kt))
    hi_kt_neg, _ = pt.minimize_linear(region, -_unit(region.dim, kt))
    a, b = lo_kt, -hi_kt_neg
    if cfg.dist == DIST_L1:
        lo = _l1_min_exact(cs, gs, a, b)
    else:
        lo = _convex_min_scalar(ai_at, a, b)
    lo = min(lo, up)
    return ValueRange(lo=lo, up=up)


def _unit(dim: int, k: int) -> np.ndarray:
    e = np.zeros(dim)
    e[k] = 1.0
    return e


def _l1_min_exact(cs, gs, a: float, b: float) -> float:
    """Exact minimum of sum_j |c_j + th g_j|_1 over th in [a, b].

    The objective is piecewise linear with kinks only where a component
    crosses zero, so evaluating the interval ends and the interior kinks is
    exact.
    """
    points = [a, b]
    for c, g in zip(cs, gs):
        nz = np.abs(g) > 1e-15
        kinks = -c[nz] / g[nz]
        points.extend(float(k) for k in kinks if a < k < b)
    f = lambda th: sum(
        float(np.sum(np.abs(c + th * g))) for c, g in zip(cs, gs)
    )
    return min(f(p) for p in points)


def _convex_min_scalar(fn, a: float, b: float) -> float:
    if b - a <= 1e-14:
        return fn(a)
    res = minimize_scalar(
        fn, bounds=(a, b), method="bounded", options={"xatol": 1e-10}
    )
    if not res.success:
        raise NumericError(f"convex minimization failed: {res.message}")
    return min(float(res.fun), fn(a), fn(b))


def margin_range_in_region(
    composite: Network,
    region: pt.HPolytope,
    j0: int,
    j: int,
    pattern: ActivationPattern | None = None,
) -> ValueRange:
    """Exact range of the confidence margin (output j0 minus output j).

    The margin is affine on the region, so two LPs give the exact bounds.
    """
    if j == j0:
        raise InputError("margin requires two distinct class indices")
    for idx in (j0, j):
        if not 0 <= idx < composite.output_dim:
            raise InputError(f"class index {idx} out of range")
    if pattern is None:
        witness = pt.feasible_interior_point(region)
        if witness is None:
            raise InfeasibleError("region has no strict interior")
        pattern = activation_pattern(composite, witness)
    restr = affine_restriction(composite, pattern)
    c = restr.A_prime[j0] - restr.A_prime[j]
    d = float(restr.b_prime[j0] - restr.b_prime[j])
    lo, _ = pt.minimize_linear(region, c)
    neg_up, _ = pt.minimize_linear(region, -c)
    return ValueRange(lo=lo + d, up=-neg_up + d)
