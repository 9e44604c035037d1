import numpy as np
import pytest

import attnverify as av
from attnverify.errors import InputError

from conftest import make_instance, random_network


def micro_parts(micro_f, micro_g, micro_spec, micro_x0, micro_box, theta=0.6):
    comp = av.compose(micro_f, micro_g)
    p = av.activation_pattern(comp, [theta])
    region = av.region_halfspaces(comp, p).stack(micro_box)
    return comp, p, region


def test_verify_region_micro_boundary(
    micro_f, micro_g, micro_spec, micro_x0, micro_box
):
    comp, p, region = micro_parts(micro_f, micro_g, micro_spec, micro_x0, micro_box)
    cfg = av.AttentionConfig()
    v = av.verify_region(
        micro_f, micro_g, micro_spec, micro_x0, region, cfg,
        composite=comp, pattern=p,
    )
    # both outputs equal 1 - theta on [0.5, 1]: margin is identically zero,
    # which is a classification boundary, and ai is 0 <= delta
    assert v.cls_verdict == av.CB
    assert v.attn_verdict == av.AR
    assert v.margin_min == pytest.approx(0.0, abs=1e-9)
    assert v.ai_range.lo == v.ai_range.up == 0.0
    assert 0.5 < v.witness[0] < 1.0


def test_verify_region_ar_with_default_delta(
    micro_f, micro_g, micro_spec, micro_x0, micro_box
):
    comp, p, region = micro_parts(
        micro_f, micro_g, micro_spec, micro_x0, micro_box, theta=0.05
    )
    cfg = av.AttentionConfig(delta=3.0)
    v = av.verify_region(
        micro_f, micro_g, micro_spec, micro_x0, region, cfg,
        composite=comp, pattern=p,
    )
    assert v.attn_verdict == av.AR
    assert v.cls_verdict == av.CR  # margin is 0.4 on [0, 0.1]


def _ir_instance():
    """Brightness flips an f neuron, so the far region has constant ai > 0."""
    meta = av.ImageMeta(width=2, height=1)
    f = av.Network(
        layers=(
            av.AffineLayer(
                weights=np.array([[3.0, 0.0], [0.0, 1.0]]),
                bias=np.array([-0.6, 0.0]),
                has_relu=True,
            ),
            av.AffineLayer(weights=np.eye(2), bias=np.array([0.0, 0.05])),
        )
    )
    spec = av.PerturbationSpec((av.Brightness(),), np.array([[0.0, 0.5]]), meta)
    x0 = np.array([0.5, 0.9])
    return f, spec, x0


def test_verify_region_ir_when_lo_exceeds_delta():
    f, spec, x0 = _ir_instance()
    g_net = av.encode(spec, x0)
    comp = av.compose(f, g_net)
    box = av.box_polytope(spec.theta_box)
    # theta > 0.3 kills the first neuron: gradient row 0 changes by 3
    p = av.activation_pattern(comp, [0.45])
    region = av.region_halfspaces(comp, p).stack(box)
    cfg = av.AttentionConfig(delta=1.0)
    v = av.verify_region(f, g_net, spec, x0, region, cfg, composite=comp, pattern=p)
    assert v.ai_range.lo > 1.0
    assert v.attn_verdict == av.IR


def test_verdict_trichotomy_and_determinism():
    f, spec, x0, cfg = make_instance(0)
    res1 = av.bfs(f, spec, x0, cfg)
    res2 = av.bfs(f, spec, x0, cfg)
    for v in res1.verdicts:
        assert v.cls_verdict in (av.CR, av.MR, av.CB)
        assert v.attn_verdict in (av.AR, av.IR, av.AB)
    assert [v.pattern_key for v in res1.verdicts] == [
        v.pattern_key for v in res2.verdicts
    ]
    assert [v.cls_verdict for v in res1.verdicts] == [
        v.cls_verdict for v in res2.verdicts
    ]
    assert [(v.ai_range.lo, v.ai_range.up) for v in res1.verdicts] == [
        (v.ai_range.lo, v.ai_range.up) for v in res2.verdicts
    ]


def test_verify_region_rejects_infeasible(micro_f, micro_g, micro_spec, micro_x0):
    from attnverify import polytope as pt

    empty = pt.HPolytope(
        A=np.array([[1.0], [-1.0]]), b=np.array([0.0, -1.0]), row_labels=("a", "b")
    )
    with pytest.raises(InputError):
        av.verify_region(
            micro_f, micro_g, micro_spec, micro_x0, empty, av.AttentionConfig()
        )


def test_verify_region_needs_two_classes(micro_g, micro_spec, micro_x0, micro_box):
    one_class = av.Network(
        layers=(av.AffineLayer(weights=np.ones((1, 3)), bias=np.zeros(1)),)
    )
    with pytest.raises(InputError):
        av.verify_region(
            one_class, micro_g, micro_spec, micro_x0, micro_box,
            av.AttentionConfig(),
        )


def test_grid_oracle_resolution_two_hits_corners():
    rng = np.random.default_rng(1)
    meta = av.ImageMeta(width=3, height=3)
    f = random_network(rng, [9, 4, 2])
    spec = av.PerturbationSpec(
        (av.Brightness(), av.Patch(px=0, py=0, pw=1, ph=1)),
        np.array([[0.0, 1.0], [0.0, 1.0]]),
        meta,
    )
    x0 = rng.uniform(0.1, 0.9, 9)
    cfg = av.AttentionConfig()
    orc = av.grid_oracle(f, spec, x0, 2, cfg)
    assert orc.labels.shape == (2, 2)
    corners = [
        (0, 0, [0.0, 0.0]),
        (1, 0, [1.0, 0.0]),
        (0, 1, [0.0, 1.0]),
        (1, 1, [1.0, 1.0]),
    ]
    for i, j, theta in corners:
        x = av.apply_direct(spec, theta, x0)
        assert orc.labels[i, j] == int(np.argmax(av.forward(f, x)))


def test_grid_oracle_origin_cell(micro_f, micro_spec, micro_x0):
    cfg = av.AttentionConfig()
    orc = av.grid_oracle(micro_f, micro_spec, micro_x0, 11, cfg)
    assert orc.labels[0] == orc.original_label == 0
    assert orc.ai_values[0] == 0.0


def test_grid_oracle_micro_constant(micro_f, micro_spec, micro_x0):
    cfg = av.AttentionConfig()
    orc = av.grid_oracle(micro_f, micro_spec, micro_x0, 101, cfg)
    assert np.all(orc.labels == 0)  # ties break to the smallest class index
    assert np.all(orc.ai_values[:-1] == 0.0)  # theta=1 sits on a boundary


def test_grid_oracle_resolution_validated(micro_f, micro_spec, micro_x0):
    with pytest.raises(InputError):
        av.grid_oracle(micro_f, micro_spec, micro_x0, 1, av.AttentionConfig())


def test_reconcile_clean_on_exact_method():
    f, spec, x0, cfg = make_instance(1)
    res = av.bfs(f, spec, x0, cfg)
    orc = av.grid_oracle(f, spec, x0, 41, cfg)
    rep = av.reconcile(res.verdicts, orc)
    assert rep.ok, rep.mismatches[:5]
    assert rep.n_uncovered == 0
    assert rep.n_checked > 0


def test_reconcile_empty_verdicts_all_uncovered(micro_f, micro_spec, micro_x0):
    cfg = av.AttentionConfig()
    orc = av.grid_oracle(micro_f, micro_spec, micro_x0, 11, cfg)
    rep = av.reconcile([], orc)
    assert rep.n_uncovered == rep.n_samples == 11
    assert rep.ok  # nothing to contradict, but nothing covered either


def test_reconcile_flags_wrong_range(micro_f, micro_g, micro_spec, micro_x0, micro_box):
    comp, p, region = micro_parts(micro_f, micro_g, micro_spec, micro_x0, micro_box)
    cfg = av.AttentionConfig()
    v = av.verify_region(
        micro_f, micro_g, micro_spec, micro_x0, region, cfg,
        composite=comp, pattern=p,
    )
    lie = av.RegionVerdict(
        region=v.region,
        cls_verdict=av.MR,  # wrong: the original label persists
        attn_verdict=v.attn_verdict,
        ai_range=av.ValueRange(5.0, 6.0),  # wrong: true ai is 0
        margin_min=v.margin_min,
        witness=v.witness,
        cls_range=v.cls_range,
        pattern_key=v.pattern_key,
    )
    orc = av.grid_oracle(micro_f, micro_spec, micro_x0, 51, cfg)
    rep = av.reconcile([lie], orc)
    kinds = {kind for _, kind, _ in rep.mismatches}
    assert kinds == {"label", "ai"}
