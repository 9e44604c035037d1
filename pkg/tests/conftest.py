"""Shared fixtures: the worked 3-pixel micro-instance and random instances.

The micro-instance is the 1-D brightness problem with x0 = (1, 0.5, 0.1),
g(theta) = ReLU(x0 - theta) and f(x) = ReLU(x1+x2, x1+x3); its activation
pattern at theta=0.6 is [1,0,0|1,1] and the matching region is
0.5 <= theta <= 1.
"""

import numpy as np
import pytest

import attnverify as av


@pytest.fixture
def micro_f():
    return av.Network(
        layers=(
            av.AffineLayer(
                weights=np.array([[1.0, 1.0, 0.0], [1.0, 0.0, 1.0]]),
                bias=np.zeros(2),
                has_relu=True,
            ),
        )
    )


@pytest.fixture
def micro_g():
    return av.Network(
        layers=(
            av.AffineLayer(
                weights=-np.ones((3, 1)),
                bias=np.array([1.0, 0.5, 0.1]),
                has_relu=True,
            ),
        )
    )


@pytest.fixture
def micro_x0():
    return np.array([1.0, 0.5, 0.1])


@pytest.fixture
def micro_spec():
    return av.PerturbationSpec(
        atoms=(av.Brightness(),),
        theta_box=np.array([[0.0, 1.0]]),
        image_meta=av.ImageMeta(width=3, height=1),
    )


@pytest.fixture
def micro_box():
    return av.box_polytope(np.array([[0.0, 1.0]]))


def random_network(rng, sizes, final_relu=False):
    """Random dense ReLU net with the given layer size chain."""
    layers = []
    for k, (n_in, n_out) in enumerate(zip(sizes, sizes[1:])):
        w = rng.normal(size=(n_out, n_in)) / np.sqrt(n_in)
        b = rng.normal(size=n_out) * 0.2
        relu = final_relu if k == len(sizes) - 2 else True
        layers.append(av.AffineLayer(weights=w, bias=b, has_relu=relu))
    return av.Network(layers=tuple(layers))


def distinct_image(rng, n_pixels, gap=0.012):
    """Strictly distinct pixel values on a coarse exact grid plus one shared
    jitter offset.

    Distinct, well-separated values keep the clip-neuron boundaries in
    parameter space pairwise distinct (coincident boundaries would flip
    several neurons at once, which single-bit traversal cannot cross), and
    pairwise differences stay exact grid multiples so boundary lines are
    either exactly parallel or cross at a healthy angle.
    """
    levels = rng.permutation(65)[:n_pixels] * gap + 0.12
    return levels + rng.uniform(0.0, 1.0) * 1.3e-3


def make_instance(seed: int):
    """One random 2-D verification problem (classifier, spec, image, config).

    Cycles through the brightness/patch, translation/patch and
    translation/brightness combinations; network sizes span 2-4 layers and
    roughly 10-40 ReLU neurons on 6x6 to 8x8 images.
    """
    rng = np.random.default_rng(1000 + seed)
    side = 6 + (seed % 3)
    meta = av.ImageMeta(width=side, height=side)
    x0 = distinct_image(rng, meta.n_pixels)

    combo = ("BP", "TP", "TB")[seed % 3]
    # for translation combos keep the patch off the zero-padded first row
    px_min = 1 if combo.startswith("T") else 0
    pw = int(rng.integers(1, side - 1 - px_min))
    ph = int(rng.integers(1, side - 1))
    patch = av.Patch(
        px=int(rng.integers(px_min, side - 1 - pw)),
        py=int(rng.integers(0, side - 1 - ph)),
        pw=pw,
        ph=ph,
    )
    if combo == "BP":
        atoms = (av.Brightness(), patch)
        box = np.array([[0.0, 0.30], [0.0, 0.35]])
    elif combo == "TP":
        atoms = (av.Translation(tx=1), patch)
        box = np.array([[0.0, 1.0], [0.0, 0.35]])
    else:
        atoms = (av.Translation(tx=1), av.Brightness())
        box = np.array([[0.0, 1.0], [0.0, 0.30]])
    spec = av.PerturbationSpec(atoms=atoms, theta_box=box, image_meta=meta)

    depth = 2 + seed % 3
    hidden = [int(rng.integers(5, 14)) for _ in range(depth - 1)]
    n_classes = 2 + seed % 2
    f = random_network(rng, [meta.n_pixels] + hidden + [n_classes])
    # Give the unperturbed label a modest head start so the instance starts
    # robust and a decision boundary tends to fall inside the box.
    logits = av.forward(f, x0)
    j0 = int(np.argmax(logits))
    bias = f.layers[-1].bias.copy()
    bias[j0] += 0.15 - (logits[j0] - np.partition(logits, -2)[-2])
    f = av.Network(
        layers=f.layers[:-1]
        + (
            av.AffineLayer(
                weights=f.layers[-1].weights,
                bias=bias,
                has_relu=f.layers[-1].has_relu,
            ),
        )
    )
    cfg = av.AttentionConfig(delta=3.0, w_delta=0.2)
    return f, spec, x0, cfg


def pattern_census(f, spec, x0, resolution):
    """Distinct activation patterns of f∘g over an inclusive parameter grid."""
    comp = av.compose(f, av.encode(spec, x0))
    axes = [np.linspace(lo, hi, resolution) for lo, hi in spec.theta_box]
    seen = set()
    for t1 in axes[0]:
        for t2 in axes[1]:
            seen.add(av.activation_pattern(comp, np.array([t1, t2])).key())
    return seen


def _components(nodes, adjacency):
    comps = []
    left = set(nodes)
    while left:
        start = left.pop()
        comp = {start}
        stack = [start]
        while stack:
            k = stack.pop()
            for n in adjacency.get(k, ()):
                if n in left:
                    left.discard(n)
                    comp.add(n)
                    stack.append(n)
        comps.append(comp)
    return comps


def _flood(start, allowed, adjacency):
    if start not in allowed:
        return set()
    seen = {start}
    stack = [start]
    while stack:
        k = stack.pop()
        for n in adjacency.get(k, ()):
            if n in allowed and n not in seen:
                seen.add(n)
                stack.append(n)
    return seen


def _region_far_norm(verdict):
    verts = av.vertices_2d(verdict.region)
    return max(float(np.linalg.norm(v)) for v in verts) if verts else 0.0


def outermost_cb_component(bfs_result):
    """Flood-fill oracle for the outermost classification-boundary band.

    From the complete BFS result: flood from the seed across CR regions,
    collect the CB regions touching that reachable set (or the seed itself if
    it is CB), and of the connected CB components hit, return the one
    extending farthest from the origin.
    """
    byk = {v.pattern_key: v for v in bfs_result.verdicts}
    adj = {
        k: {n for n in bfs_result.adjacency.get(k, ()) if n in byk}
        for k in byk
    }
    cr = {k for k, v in byk.items() if v.cls_verdict == av.CR}
    cb = {k for k, v in byk.items() if v.cls_verdict == av.CB}
    seed = bfs_result.seed_key
    reach = _flood(seed, cr | {seed}, adj)
    frontier = {k for k in cb if any(n in reach for n in adj[k])}
    if seed in cb:
        frontier.add(seed)
    if not frontier:
        return set()
    comps = [c for c in _components(cb, adj) if c & frontier]
    return max(
        comps,
        key=lambda c: (max(_region_far_norm(byk[k]) for k in c), sorted(c)[0]),
    )


def beyond_band_interior(bfs_result):
    """Regions on the far side of the CB band with no CB neighbor.

    These are the interior regions beyond the boundary that a boundary
    search has no reason to visit.
    """
    byk = {v.pattern_key: v for v in bfs_result.verdicts}
    adj = {
        k: {n for n in bfs_result.adjacency.get(k, ()) if n in byk}
        for k in byk
    }
    cb = {k for k, v in byk.items() if v.cls_verdict == av.CB}
    non_cb = set(byk) - cb
    inside = _flood(bfs_result.seed_key, non_cb, adj)
    return {
        k
        for k in non_cb - inside
        if not any(n in cb for n in adj[k])
    }
