"""Command-line entry points.

Subcommands:
  verify     run a traversal and write the results document (optionally SVG)
  oracle     dense-grid direct evaluation of the same problem
  reconcile  cross-check a results document against an oracle document
  report     render CSV + matplotlib figures from a results document

Exit codes: 0 on completion, 2 when the budget ran out (partial results are
still written), 1 on any error.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass, field

import numpy as np

from .attention import (
    DIST_L1,
    DIST_L2,
    FILTER_ABSOLUTE,
    FILTER_IDENTITY,
    FILTER_MEAN3,
    AttentionConfig,
)
from .errors import ConfigError
from .modelio import (
    ResultsDocument,
    format_perturbation,
    load_image,
    load_model,
    oracle_from_json,
    oracle_to_json,
    parse_perturbation,
    results_from_traversal,
)
from .network import forward
from .perturb import Brightness, Patch, PerturbationSpec
from .render import render_svg
from .report import write_report
from .traverse import (
    GBS_MODES,
    MODE_BFS,
    Budget,
    run_traversal,
)
from .verify import grid_oracle, reconcile

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_BUDGET = 2

_FILTERS = {"I": FILTER_IDENTITY, "A": FILTER_ABSOLUTE, "M": FILTER_MEAN3}
_DISTS = {"L1": DIST_L1, "L2": DIST_L2}


@dataclass
class ProblemConfig:
    """One verification problem, fully determined by CLI flags."""

    model_path: str
    image_source: str
    perturb_text: str
    cfg: AttentionConfig
    mode: str = MODE_BFS
    budget: Budget = field(default_factory=Budget)
    ray: np.ndarray | None = None
    out_path: str | None = None
    svg_path: str | None = None

    def load(self):
        f = load_model(self.model_path)
        x0, meta = load_image(self.image_source)
        if f.input_dim != meta.n_pixels:
            raise ConfigError(
                f"model expects {f.input_dim} inputs but image has "
                f"{meta.n_pixels} pixels"
            )
        spec = parse_perturbation(self.perturb_text, meta)
        if self.mode in GBS_MODES and self.mode != "gbs-cr" and self.cfg.w_delta <= 0:
            raise ConfigError("attention-boundary modes need --wdelta > 0")
        if self.ray is not None and self.ray.shape != (spec.dim,):
            raise ConfigError(
                f"--ray needs {spec.dim} components for this perturbation"
            )
        return f, x0, meta, spec


def _param_names(spec: PerturbationSpec) -> list[str]:
    names = []
    for atom in spec.atoms:
        if isinstance(atom, Brightness):
            names.append("brightness")
        elif isinstance(atom, Patch):
            names.append("patch")
        else:
            names.append("translate")
    return names


def run(config: ProblemConfig) -> tuple[ResultsDocument, int]:
    """Execute one problem: encode, traverse, verify, serialize.

    Returns the results document and the process exit code (0 complete,
    2 budget exhausted).
    """
    f, x0, meta, spec = config.load()
    result = run_traversal(
        f, spec, x0, config.cfg, config.mode, config.budget, config.ray
    )
    problem = {
        "model": config.model_path,
        "image": config.image_source,
        "perturb": format_perturbation(spec),
        "mode": config.mode,
        "filter": config.cfg.filter,
        "dist": config.cfg.dist,
        "delta": config.cfg.delta,
        "w_delta": config.cfg.w_delta,
        "theta_box": spec.theta_box.tolist(),
        "parameter_names": _param_names(spec),
        "image_size": [meta.width, meta.height],
    }
    original_label = int(np.argmax(forward(f, x0)))
    doc = results_from_traversal(result, problem, original_label)
    code = EXIT_BUDGET if result.stats["budget_exhausted"] else EXIT_OK
    return doc, code


def _add_problem_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--model", required=True, help="model document path")
    p.add_argument(
        "--image", required=True, help="text grid path or idx:<path>:<index>"
    )
    p.add_argument(
        "--perturb", required=True, help="perturbation grammar, atoms joined by +"
    )
    p.add_argument("--filter", default="I", choices=sorted(_FILTERS))
    p.add_argument("--dist", default="L2", choices=sorted(_DISTS))
    p.add_argument("--delta", type=float, default=3.0)
    p.add_argument("--wdelta", type=float, default=0.2)


def _attention_config(args) -> AttentionConfig:
    return AttentionConfig(
        filter=_FILTERS[args.filter],
        dist=_DISTS[args.dist],
        delta=args.delta,
        w_delta=args.wdelta,
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="attnverify",
        description=(
            "Exact region-wise verification of classification and attention "
            "robustness under semantic perturbations"
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    pv = sub.add_parser("verify", help="run a traversal and verify regions")
    _add_problem_flags(pv)
    pv.add_argument(
        "--mode", default=MODE_BFS, choices=(MODE_BFS,) + GBS_MODES
    )
    pv.add_argument("--timeout", type=float, default=7200.0, help="seconds")
    pv.add_argument("--max-regions", type=int, default=None)
    pv.add_argument("--out", required=True, help="results JSON path")
    pv.add_argument("--svg", default=None, help="optional SVG map path")
    pv.add_argument("--ray", default=None, help="search ray, comma-separated")

    po = sub.add_parser("oracle", help="dense-grid direct evaluation")
    _add_problem_flags(po)
    po.add_argument("--resolution", type=int, required=True)
    po.add_argument("--out", required=True, help="oracle JSON path")

    pr = sub.add_parser("reconcile", help="cross-check results against an oracle")
    pr.add_argument("--results", required=True)
    pr.add_argument("--oracle", required=True)
    pr.add_argument("--ai-tol", type=float, default=1e-6)

    pp = sub.add_parser("report", help="CSV and figures from a results document")
    pp.add_argument("--results", required=True)
    pp.add_argument("--oracle", default=None)
    pp.add_argument("--outdir", required=True)
    return parser


def _cmd_verify(args) -> int:
    ray = None
    if args.ray is not None:
        try:
            ray = np.array([float(v) for v in args.ray.split(",")])
        except ValueError as exc:
            raise ConfigError(f"bad --ray value {args.ray!r}") from exc
    config = ProblemConfig(
        model_path=args.model,
        image_source=args.image,
        perturb_text=args.perturb,
        cfg=_attention_config(args),
        mode=args.mode,
        budget=Budget(timeout_s=args.timeout, max_regions=args.max_regions),
        ray=ray,
        out_path=args.out,
        svg_path=args.svg,
    )
    doc, code = run(config)
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(doc.to_json())
    if args.svg:
        render_svg(doc, args.svg)
    stats = doc.stats
    print(
        f"verified {stats['regions_verified']} regions "
        f"(faces checked {stats['faces_checked']}, LPs {stats['lp_calls']}, "
        f"{stats['elapsed']:.2f}s)"
        + (" [budget exhausted]" if stats["budget_exhausted"] else "")
    )
    return code


def _cmd_oracle(args) -> int:
    config = ProblemConfig(
        model_path=args.model,
        image_source=args.image,
        perturb_text=args.perturb,
        cfg=_attention_config(args),
    )
    f, x0, meta, spec = config.load()
    oracle = grid_oracle(f, spec, x0, args.resolution, config.cfg)
    problem = {
        "model": args.model,
        "image": args.image,
        "perturb": format_perturbation(spec),
        "filter": config.cfg.filter,
        "dist": config.cfg.dist,
        "delta": config.cfg.delta,
    }
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(oracle_to_json(oracle, problem))
    print(f"evaluated {oracle.labels.size} grid points")
    return EXIT_OK


def _cmd_reconcile(args) -> int:
    with open(args.results, "r", encoding="utf-8") as fh:
        doc = ResultsDocument.from_json(fh.read())
    with open(args.oracle, "r", encoding="utf-8") as fh:
        oracle = oracle_from_json(fh.read())
    report = reconcile(doc.region_verdicts(), oracle, ai_tol=args.ai_tol)
    print(report.summary())
    for theta, kind, detail in report.mismatches[:20]:
        print(f"  mismatch[{kind}] at theta={theta}: {detail}")
    return EXIT_OK if report.ok else EXIT_ERROR


def _cmd_report(args) -> int:
    with open(args.results, "r", encoding="utf-8") as fh:
        doc = ResultsDocument.from_json(fh.read())
    oracle = None
    if args.oracle:
        with open(args.oracle, "r", encoding="utf-8") as fh:
            oracle = oracle_from_json(fh.read())
    for path in write_report(doc, args.outdir, oracle):
        print(f"wrote {path}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "verify": _cmd_verify,
        "oracle": _cmd_oracle,
        "reconcile": _cmd_reconcile,
        "report": _cmd_report,
    }
    try:
        return handlers[args.command](args)
    except Exception as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
