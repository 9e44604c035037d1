"""Region verdicts and the independent dense-grid oracle.

A region earns one classification verdict (CR / MR / CB) and one attention
verdict (AR / IR / AB) from the exact ranges of the confidence margins and
the attention inconsistency.  The grid oracle re-derives labels and
inconsistency values by direct evaluation on a dense parameter grid, without
touching the region or LP machinery, and `reconcile` cross-checks the two.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from . import polytope as pt
from .attention import (
    AttentionConfig,
    ValueRange,
    ai_range_in_region,
    attention_inconsistency,
    margin_range_in_region,
)
from .errors import InputError
from .network import (
    ActivationPattern,
    Network,
    activation_pattern,
    affine_restriction,
    compose,
    forward,
)
from .perturb import PerturbationSpec, apply_direct

CR, MR, CB = "CR", "MR", "CB"
AR, IR, AB = "AR", "IR", "AB"


@dataclass(frozen=True)
class RegionVerdict:
    """Verdicts and exact value ranges for one activation region."""

    region: pt.HPolytope
    cls_verdict: str
    attn_verdict: str
    ai_range: ValueRange
    margin_min: float
    witness: np.ndarray
    # Range of max_j(f_j - f_j0) over the region; drives boundary detection.
    cls_range: tuple[float, float]
    pattern_key: tuple = ()


def _maxmin_margin(composite, region, pattern, j0) -> float:
    """Exact max over the region of min_j (f_j0 - f_j), via an epigraph LP."""
    restr = affine_restriction(composite, pattern)
    dim = region.dim
    rows_A = [np.append(a, 0.0) for a in region.A]
    rows_b = list(region.b)
    labels = list(region.row_labels)
    for j in range(composite.output_dim):
        if j == j0:
            continue
        c = restr.A_prime[j0] - restr.A_prime[j]
        d = float(restr.b_prime[j0] - restr.b_prime[j])
        # t <= c.theta + d
        rows_A.append(np.append(-c, 1.0))
        rows_b.append(d)
        labels.append(("margin", j))
    ext = pt.HPolytope(
        A=np.array(rows_A), b=np.array(rows_b), row_labels=tuple(labels)
    )
    obj = np.zeros(dim + 1)
    obj[-1] = -1.0
    val, _ = pt.minimize_linear(ext, obj)
    return -val


def verify_region(
    f: Network,
    g_net: Network,
    spec: PerturbationSpec,
    x0: np.ndarray,
    region: pt.HPolytope,
    cfg: AttentionConfig,
    *,
    composite: Network | None = None,
    pattern: ActivationPattern | None = None,
) -> RegionVerdict:
    """Assign exact CR/MR/CB and AR/IR/AB verdicts to one feasible region.

    CR requires every margin strictly positive throughout, MR requires some
    other class to win strictly everywhere; AR requires the inconsistency to
    stay at or below delta, IR strictly above.  Everything else is a boundary
    region.
    """
    if f.output_dim < 2:
        raise InputError("classification verdicts need at least two classes")
    witness = pt.feasible_interior_point(region)
    if witness is None:
        raise InputError("region is infeasible or degenerate")
    if composite is None:
        composite = compose(f, g_net)
    if pattern is None:
        pattern = activation_pattern(composite, witness)
    x0 = np.asarray(x0, dtype=float).ravel()
    j0 = int(np.argmax(forward(f, x0)))

    margin_min = math.inf
    for j in range(f.output_dim):
        if j == j0:
            continue
        rng = margin_range_in_region(composite, region, j0, j, pattern=pattern)
        margin_min = min(margin_min, rng.lo)
    maxmin = _maxmin_margin(composite, region, pattern, j0)
    if margin_min > 0.0:
        cls_verdict = CR
    elif maxmin < 0.0:
        cls_verdict = MR
    else:
        cls_verdict = CB
    cls_range = (-maxmin, -margin_min)

    ai_range = ai_range_in_region(f, g_net, spec, x0, region, cfg)
    if ai_range.up <= cfg.delta:
        attn_verdict = AR
    elif ai_range.lo > cfg.delta:
        attn_verdict = IR
    else:
        attn_verdict = AB

    return RegionVerdict(
        region=region,
        cls_verdict=cls_verdict,
        attn_verdict=attn_verdict,
        ai_range=ai_range,
        margin_min=margin_min,
        witness=witness,
        cls_range=cls_range,
        pattern_key=pattern.key(),
    )


@dataclass(frozen=True)
class GridOracleResult:
    """Labels and inconsistency values on an inclusive dense parameter grid."""

    resolution: int
    theta_box: np.ndarray
    labels: np.ndarray
    ai_values: np.ndarray
    original_label: int

    def grid_points(self):
        axes = [
            np.linspace(lo, hi, self.resolution)
            for lo, hi in np.asarray(self.theta_box, dtype=float)
        ]
        for idx in itertools.product(*(range(self.resolution),) * len(axes)):
            yield idx, np.array([axes[d][i] for d, i in enumerate(idx)])


def grid_oracle(
    f: Network,
    spec: PerturbationSpec,
    x0: np.ndarray,
    resolution: int,
    cfg: AttentionConfig,
) -> GridOracleResult:
    """Direct evaluation over the full parameter grid, both box ends included.

    Labels come from argmax of the classifier on the directly perturbed image
    (ties break to the smallest class index); inconsistency values from the
    metric itself.  No region enumeration or LP is involved.
    """
    if resolution < 2:
        raise InputError("grid resolution must be at least 2")
    x0 = np.asarray(x0, dtype=float).ravel()
    dim = spec.dim
    shape = (resolution,) * dim
    labels = np.zeros(shape, dtype=int)
    ai_values = np.zeros(shape, dtype=float)
    axes = [np.linspace(lo, hi, resolution) for lo, hi in spec.theta_box]
    for idx in itertools.product(*(range(resolution),) * dim):
        theta = np.array([axes[d][i] for d, i in enumerate(idx)])
        x = apply_direct(spec, theta, x0)
        labels[idx] = int(np.argmax(forward(f, x)))
        ai_values[idx] = attention_inconsistency(f, spec, x0, theta, cfg)
    return GridOracleResult(
        resolution=resolution,
        theta_box=np.asarray(spec.theta_box, dtype=float).copy(),
        labels=labels,
        ai_values=ai_values,
        original_label=int(np.argmax(forward(f, x0))),
    )


@dataclass
class ReconcileReport:
    """Outcome of checking every grid sample against the region verdicts."""

    n_samples: int = 0
    n_checked: int = 0
    n_boundary_excluded: int = 0
    n_uncovered: int = 0
    mismatches: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.mismatches

    def summary(self) -> str:
        return (
            f"samples={self.n_samples} checked={self.n_checked} "
            f"boundary_excluded={self.n_boundary_excluded} "
            f"uncovered={self.n_uncovered} mismatches={len(self.mismatches)}"
        )


def reconcile(
    verdicts,
    oracle: GridOracleResult,
    *,
    ai_tol: float = 1e-6,
    eps: float = pt.EPS,
) -> ReconcileReport:
    """Check every strictly interior oracle sample against its region verdict.

    CR regions must keep the original label at every sample, MR regions must
    never show it, and the sampled inconsistency must fall inside the region's
    range within ai_tol.  Samples within eps of any region face are excluded.
    """
    verdicts = list(verdicts)
    report = ReconcileReport()
    j0 = oracle.original_label
    for idx, theta in oracle.grid_points():
        report.n_samples += 1
        hosts = [v for v in verdicts if v.region.contains(theta, margin=eps)]
        if not hosts:
            near = any(v.region.contains(theta, margin=0.0) for v in verdicts)
            if near:
                report.n_boundary_excluded += 1
            else:
                report.n_uncovered += 1
            continue
        report.n_checked += 1
        label = int(oracle.labels[idx])
        ai = float(oracle.ai_values[idx])
        for v in hosts:
            if v.cls_verdict == CR and label != j0:
                report.mismatches.append(
                    (theta.tolist(), "label", f"CR region saw label {label}")
                )
            elif v.cls_verdict == MR and label == j0:
                report.mismatches.append(
                    (theta.tolist(), "label", "MR region kept the original label")
                )
            if not (v.ai_range.lo - ai_tol <= ai <= v.ai_range.up + ai_tol):
                report.mismatches.append(
                    (
                        theta.tolist(),
                        "ai",
                        f"ai={ai:.9g} outside "
                        f"[{v.ai_range.lo:.9g}, {v.ai_range.up:.9g}]",
                    )
                )
    return report
