"""Activation-region traversal: full breadth-first search and Geometric
Boundary Search.

Both walk the face-adjacency graph of the activation regions the composed
classifier-plus-perturbation network induces on the parameter box, starting
from the unperturbed point.  BFS visits every reachable feasible region.
GBS rushes outward along a search ray, switches to boundary-following once a
region near the robustness boundary is found, prunes regions that are safely
inside or beyond the boundary, and escapes enclaves by reverting to the line
search whenever boundary-following rediscovers the ray farther out.
"""

from __future__ import annotations

import heapq
import time
from dataclasses import dataclass, field

import numpy as np

from . import polytope as pt
from .attention import AttentionConfig
from .errors import ConfigError
from .network import (
    ActivationPattern,
    Network,
    activation_pattern,
    compose,
    flip,
    region_halfspaces,
)
from .perturb import PerturbationSpec, encode
from .verify import AB, AR, CB, CR, IR, MR, RegionVerdict, verify_region

MODE_BFS = "bfs"
MODE_GBS_CR = "gbs-cr"
MODE_GBS_AR = "gbs-ar"
MODE_GBS_CRAR = "gbs-crar"
GBS_MODES = (MODE_GBS_CR, MODE_GBS_AR, MODE_GBS_CRAR)


@dataclass(frozen=True)
class QueueEntry:
    pattern: ActivationPattern
    is_following: bool
    line_distance: float


@dataclass
class Budget:
    """Wall-clock and region-count caps; exhaustion is a result, not an error."""

    timeout_s: float = 7200.0
    max_regions: int | None = None


@dataclass
class TraversalResult:
    h_cr: list = field(default_factory=list)
    h_mr: list = field(default_factory=list)
    h_cb: list = field(default_factory=list)
    h_ar: list = field(default_factory=list)
    h_ir: list = field(default_factory=list)
    h_ab: list = field(default_factory=list)
    verdicts: list = field(default_factory=list)
    adjacency: dict = field(default_factory=dict)
    seed_key: tuple = ()
    stats: dict = field(default_factory=dict)

    def record(self, verdict: RegionVerdict) -> None:
        self.verdicts.append(verdict)
        {CR: self.h_cr, MR: self.h_mr, CB: self.h_cb}[verdict.cls_verdict].append(
            verdict
        )
        {AR: self.h_ar, IR: self.h_ir, AB: self.h_ab}[verdict.attn_verdict].append(
            verdict
        )


class _Walker:
    """State shared by both traversals over one problem instance."""

    def __init__(self, f, spec, x0, cfg, budget, eps):
        self.f = f
        self.spec = spec
        self.x0 = np.asarray(x0, dtype=float).ravel()
        self.cfg = cfg
        self.budget = budget or Budget()
        self.eps = eps
        self.g_net = encode(spec, x0)
        self.composite = compose(f, self.g_net)
        self.box = pt.box_polytope(spec.theta_box)
        self.result = TraversalResult()
        self.faces_checked = 0
        self.lp_calls_start = pt.lp_call_count()
        self.t_start = time.monotonic()
        self.seed = self._seed_pattern()
        self.result.seed_key = self.seed.key()

    def _seed_pattern(self) -> ActivationPattern:
        """Pattern of the unperturbed point, nudged off degenerate boundaries.

        The origin can sit exactly on a region boundary (a pixel at 0 or 1
        zeroes a clip pre-activation), making the literal origin pattern a
        zero-volume region.  In that case sample the pattern a tiny step
        toward the box center; the resulting region still touches the origin.
        """
        box = np.asarray(self.spec.theta_box, dtype=float)
        center = box.mean(axis=1)
        for t in (0.0, 1e-7, 1e-6, 1e-5, 1e-4, 1e-3):
            p = activation_pattern(self.composite, t * center)
            region = region_halfspaces(self.composite, p).stack(self.box)
            if pt.feasible_interior_point(region, eps=self.eps) is not None:
                return p
        raise InputError(
            "could not find a full-dimensional region at the unperturbed point"
        )

    def exhausted(self) -> bool:
        if (
            self.budget.max_regions is not None
            and len(self.result.verdicts) >= self.budget.max_regions
        ):
            return True
        return time.monotonic() - self.t_start > self.budget.timeout_s

    def region_of(self, p: ActivationPattern) -> pt.HPolytope:
        return region_halfspaces(self.composite, p).stack(self.box)

    def facets_and_neighbors(self, p: ActivationPattern, region: pt.HPolytope):
        """Facet labels of the region plus the neighbor pattern per facet.

        Stability over the whole box is checked first to skip LP calls; the
        face LP then decides whether flipping the neuron reaches a
        full-dimensional neighbor.
        """
        fs = set()
        neighbors = []
        for idx, label in enumerate(region.row_labels):
            if label[0] == pt.BOX:
                continue
            if pt.is_stable((region.A[idx], region.b[idx]), self.spec.theta_box):
                continue
            self.faces_checked += 1
            if pt.interior_point_on_face(region, label, eps=self.eps) is None:
                continue
            fs.add(label)
            l, n = label
            neighbors.append((label, flip(p, l, n)))
        return fs, neighbors

    def verify(self, p, region, fs) -> RegionVerdict:
        simplified = pt.simplify(region, fs)
        verdict = verify_region(
            self.f,
            self.g_net,
            self.spec,
            self.x0,
            simplified,
            self.cfg,
            composite=self.composite,
            pattern=p,
        )
        self.result.record(verdict)
        return verdict

    def finish(self, exhausted: bool) -> TraversalResult:
        self.result.stats = {
            "regions_verified": len(self.result.verdicts),
            "faces_checked": self.faces_checked,
            "lp_calls": pt.lp_call_count() - self.lp_calls_start,
            "elapsed": time.monotonic() - self.t_start,
            "budget_exhausted": exhausted,
        }
        return self.result

    def add_edge(self, a: tuple, b: tuple) -> None:
        self.result.adjacency.setdefault(a, set()).add(b)
        self.result.adjacency.setdefault(b, set()).add(a)


def bfs(
    f: Network,
    spec: PerturbationSpec,
    x0: np.ndarray,
    cfg: AttentionConfig,
    budget: Budget | None = None,
    eps: float = pt.EPS,
) -> TraversalResult:
    """Visit and verify every feasible activation region reachable from the
    unperturbed point by face adjacency."""
    w = _Walker(f, spec, x0, cfg, budget, eps)
    queue = [w.seed]
    observed = {w.seed.key()}
    exhausted = False
    while queue:
        if w.exhausted():
            exhausted = True
            break
        p = queue.pop(0)
        region = w.region_of(p)
        fs, neighbors = w.facets_and_neighbors(p, region)
        for _, p2 in neighbors:
            k2 = p2.key()
            w.add_edge(p.key(), k2)
            if k2 in observed:
                continue
            observed.add(k2)
            queue.append(p2)
        w.verify(p, region, fs)
    return w.finish(exhausted)


def _near(lo: float, up: float, delta: float, width: float) -> bool:
    return (
        lo <= delta <= up
        or abs(lo - delta) <= width
        or abs(up - delta) <= width
    )


class _BoundaryRule:
    """Mode-specific classification of a region against the target boundary."""

    def __init__(self, mode: str, cfg: AttentionConfig):
        self.mode = mode
        self.cfg = cfg

    def assess(self, verdict: RegionVerdict):
        """Returns (near_boundary, robust_side, beyond_side)."""
        cls_lo, cls_up = verdict.cls_range
        ai_lo, ai_up = verdict.ai_range.lo, verdict.ai_range.up
        # CR boundary uses the margin-deficit range with delta = width = 0.
        near_cls = _near(cls_lo, cls_up, 0.0, 0.0)
        robust_cls = cls_up <= 0.0
        beyond_cls = cls_lo > 0.0
        near_ar = _near(ai_lo, ai_up, self.cfg.delta, self.cfg.w_delta)
        robust_ar = ai_up <= self.cfg.delta
        beyond_ar = ai_lo > self.cfg.delta
        if self.mode == MODE_GBS_CR:
            return near_cls, robust_cls, beyond_cls
        if self.mode == MODE_GBS_AR:
            return near_ar, robust_ar, beyond_ar
        return (
            near_cls or near_ar,
            robust_cls and robust_ar,
            beyond_cls or beyond_ar,
        )


def gbs(
    f: Network,
    spec: PerturbationSpec,
    x0: np.ndarray,
    cfg: AttentionConfig,
    mode: str,
    budget: Budget | None = None,
    ray: np.ndarray | None = None,
    eps: float = pt.EPS,
) -> TraversalResult:
    """Traverse only the regions needed to recover the outermost boundary.

    Entries are popped by decreasing distance of their ray crossing (ties
    break on the lexicographically smallest pattern).  Once a region near the
    boundary is seen, every pending entry switches to boundary-following;
    following prunes the successors of regions strictly inside the robust
    side, and regions strictly beyond it always prune unless they touch the
    boundary band.  Pruned patterns are forgotten again so another parent on
    the boundary can still reach them.
    """
    if mode not in GBS_MODES:
        raise ConfigError(f"unknown GBS mode {mode!r}")
    if mode in (MODE_GBS_AR, MODE_GBS_CRAR) and cfg.w_delta <= 0.0:
        raise ConfigError("attention-boundary search needs w_delta > 0")
    w = _Walker(f, spec, x0, cfg, budget, eps)
    if ray is None:
        ray = np.asarray(spec.theta_box, dtype=float)[:, 1]
    else:
        ray = np.asarray(ray, dtype=float).ravel()
    if ray.shape != (spec.dim,) or not np.any(ray):
        raise ConfigError("search ray must be a nonzero direction in theta space")
    origin = np.zeros(spec.dim)
    rule = _BoundaryRule(mode, cfg)

    entries: dict[tuple, QueueEntry] = {
        w.seed.key(): QueueEntry(w.seed, False, 0.0)
    }
    heap = [(-0.0, w.seed.key())]
    observed = {w.seed.key()}
    exhausted = False
    while heap:
        if w.exhausted():
            exhausted = True
            break
        _, key = heapq.heappop(heap)
        q = entries.pop(key)
        p = q.pattern
        region = w.region_of(p)
        following = q.is_following

        fs = set()
        local: list[tuple[tuple, QueueEntry]] = []
        for idx, label in enumerate(region.row_labels):
            if label[0] == pt.BOX:
                continue
            if pt.is_stable((region.A[idx], region.b[idx]), w.spec.theta_box):
                continue
            w.faces_checked += 1
            if pt.interior_point_on_face(region, label, eps=eps) is None:
                continue
            fs.add(label)
            l, n = label
            p2 = flip(p, l, n)
            k2 = p2.key()
            w.add_edge(p.key(), k2)
            theta_line = pt.interior_point_on_line(
                region, label, (origin, ray), eps=eps
            )
            if (
                following
                and theta_line is not None
                and float(np.linalg.norm(theta_line)) > q.line_distance
            ):
                # Re-found the search line while following: successors revert
                # to line search.
                following = False
            if k2 in observed:
                continue
            observed.add(k2)
            if not following and theta_line is not None:
                local.append(
                    (k2, QueueEntry(p2, False, float(np.linalg.norm(theta_line))))
                )
            else:
                local.append((k2, QueueEntry(p2, following, q.line_distance)))

        verdict = w.verify(p, region, fs)
        near, robust_side, beyond_side = rule.assess(verdict)
        prune = (robust_side and following and not near) or (
            beyond_side and not near
        )
        if prune:
            # Make pruned patterns reachable again from other parents.
            for k2, _ in local:
                observed.discard(k2)
            local = []
        if not following and near:
            local = [
                (k2, QueueEntry(e.pattern, True, e.line_distance))
                for k2, e in local
            ]
            for k2, e in entries.items():
                entries[k2] = QueueEntry(e.pattern, True, e.line_distance)
        for k2, e in local:
            entries[k2] = e
            heapq.heappush(heap, (-e.line_distance, k2))
    return w.finish(exhausted)


def run_traversal(
    f: Network,
    spec: PerturbationSpec,
    x0: np.ndarray,
    cfg: AttentionConfig,
    mode: str,
    budget: Budget | None = None,
    ray: np.ndarray | None = None,
) -> TraversalResult:
    """Dispatch to BFS or the requested GBS variant."""
    if mode == MODE_BFS:
        return bfs(f, spec, x0, cfg, budget)
    return gbs(f, spec, x0, cfg, mode, budget, ray)
