"""Command-line entry point: ``adavrag {index,query,classify,eval}``.

Structured output goes to stdout as JSON; diagnostics go to stderr.

Exit codes: 0 success; 1 bad input (bundle, index, manifest); 2 backend
failure or usage error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from typing import Sequence

from .config import EngineConfig, load_config
from .engine import Pipeline, build_index
from .errors import (
    AdaVRAGError,
    CorruptIndex,
    ExtractionFailed,
    EmptyCaption,
    GatewayError,
    MalformedBundle,
    ManifestError,
    PathNotFound,
    PreconditionError,
    VersionMismatch,
)
from .evaluation import judge_all, load_answers, load_manifest, score_mcq, win_rate
from .gateway import Gateway, MockBackend
from .index.persist import load_index, save_index
from .ingestion import build_media_bundle
from .router import IntentRouter

log = logging.getLogger("adavrag")

EXIT_OK, EXIT_INPUT, EXIT_BACKEND = 0, 1, 2


def _emit(obj) -> None:
    sys.stdout.write(json.dumps(obj, sort_keys=True) + "\n")


def _diag(msg: str) -> None:
    sys.stderr.write(msg + "\n")


def _resolve_config(args) -> EngineConfig:
    cfg = load_config(args.config)
    if args.mock:
        cfg = cfg.with_mock_backends()
    overrides = {
        "sim_threshold": getattr(args, "threshold", None),
        "top_k_visual": getattr(args, "top_k_visual", None),
        "top_k_text": getattr(args, "top_k_text", None),
        "graph_hops": getattr(args, "graph_hops", None),
    }
    cfg = cfg.with_retrieval(**overrides)
    _diag(f"config-digest: {cfg.digest()}")
    return cfg


def _gateway_for_index(cfg: EngineConfig, index) -> Gateway:
    gw = Gateway.from_config(cfg)
    # mock embedders must match the dimensions the index was built with
    per_frame = index.vision_dim // max(index.frames_per_clip, 1)
    swaps = {}
    if isinstance(gw.backend("text_embedder"), MockBackend):
        swaps["text_embedder"] = MockBackend("text_embedder", dim=index.text_dim)
    if isinstance(gw.backend("frame_embedder"), MockBackend):
        swaps["frame_embedder"] = MockBackend("frame_embedder", dim=per_frame)
    return gw.replace(**swaps) if swaps else gw


def cmd_index(args) -> int:
    cfg = _resolve_config(args)
    index_root = args.index_root or cfg.index_root
    try:
        bundle = build_media_bundle(
            args.bundle_path,
            extractor_command=cfg.extractor_command,
            duration_s=args.duration,
            clip_len_s=cfg.clip_len_s,
        )
    except (MalformedBundle, PathNotFound) as exc:
        _diag(f"error: {exc}")
        return EXIT_INPUT
    gateway = Gateway.from_config(cfg)
    try:
        index = build_index(bundle, gateway, cfg, jobs=args.jobs)
    except (GatewayError, ExtractionFailed, EmptyCaption) as exc:
        _diag(f"backend error: {exc}")
        return EXIT_BACKEND
    save_index(index, index_root)
    counts = index.counts()
    summary = " ".join(f"{k}={v}" for k, v in counts.items())
    _diag(f"indexed {bundle.video_id} into {index_root}: {summary}")
    _emit({"video_id": bundle.video_id, "index_root": str(index_root), "counts": counts,
           "config_digest": cfg.digest()})
    return EXIT_OK


def cmd_query(args) -> int:
    cfg = _resolve_config(args)
    index_root = args.index_root or cfg.index_root
    try:
        index = load_index(index_root)
    except (CorruptIndex, VersionMismatch, OSError) as exc:
        _diag(f"error: cannot load index at {index_root}: {exc}")
        return EXIT_INPUT
    pipeline = Pipeline(index, _gateway_for_index(cfg, index), cfg, jobs=args.jobs)
    try:
        record = pipeline.query(args.query, level=args.level)
    except PreconditionError as exc:
        _diag(f"error: {exc}")
        return EXIT_BACKEND
    except GatewayError as exc:
        _diag(f"generator error: {exc}")
        return EXIT_BACKEND
    _emit(record)
    return EXIT_OK


def cmd_classify(args) -> int:
    cfg = _resolve_config(args)
    if not args.query.strip():
        _diag("usage error: query must be non-empty")
        return EXIT_BACKEND
    router = IntentRouter(Gateway.from_config(cfg), prompt_dir=cfg.prompt_dir)
    res = router.classify(args.query)
    _emit({"query": args.query, "level": str(res.level), "source": res.source})
    return EXIT_OK


def cmd_eval(args) -> int:
    cfg = _resolve_config(args)
    try:
        items = load_manifest(args.manifest)
        answers_a = load_answers(args.answers_a)
        answers_b = load_answers(args.answers_b) if args.answers_b else {}
    except ManifestError as exc:
        _diag(f"error: {exc}")
        return EXIT_INPUT
    except OSError as exc:
        _diag(f"error: {exc}")
        return EXIT_INPUT

    out: dict = {"n_items": len(items)}
    open_items = [it for it in items if it.kind == "open"]
    mcq_items = [it for it in items if it.kind == "mcq"]
    try:
        if open_items:
            if not answers_b:
                _diag("error: open-ended items need a second answer file")
                return EXIT_INPUT
            verdicts = judge_all(open_items, answers_a, answers_b, Gateway.from_config(cfg), jobs=args.jobs)
            report = win_rate(verdicts, labels=(args.label_a, args.label_b))
            out["win_rate"] = report.to_dict()
            _diag(report.table())
        if mcq_items:
            mcq = {}
            for label, answers in ((args.label_a, answers_a), (args.label_b, answers_b)):
                if answers:
                    preds = [(it.item_id, answers[it.item_id]) for it in mcq_items if it.item_id in answers]
                    mcq[label] = score_mcq(preds, items) if preds else None
            out["mcq_accuracy"] = mcq
    except GatewayError as exc:
        _diag(f"judge error: {exc}")
        return EXIT_BACKEND
    except AdaVRAGError as exc:
        _diag(f"error: {exc}")
        return EXIT_INPUT
    _emit(out)
    return EXIT_OK


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def _global_flags(p: argparse.ArgumentParser, suppress: bool) -> None:
    dflt = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    p.add_argument("--config", default=dflt(None), help="engine config JSON file")
    p.add_argument("--jobs", type=_positive_int, default=dflt(1), help="worker threads")
    p.add_argument("--mock", action="store_true", default=dflt(False),
                   help="bind every role to the offline mock backends")
    p.add_argument("-v", "--verbose", action="store_true", default=dflt(False))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="adavrag", description=__doc__.splitlines()[0])
    _global_flags(parser, suppress=False)
    # global flags are accepted after the subcommand too; SUPPRESS keeps values given before it
    common = argparse.ArgumentParser(add_help=False)
    _global_flags(common, suppress=True)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("index", parents=[common], help="build and persist an index from a bundle")
    p.add_argument("bundle_path")
    p.add_argument("index_root", nargs="?")
    p.add_argument("--duration", type=float, help="duration in seconds for raw media input")
    p.set_defaults(func=cmd_index)

    p = sub.add_parser("query", parents=[common], help="answer a query against an index")
    p.add_argument("index_root")
    p.add_argument("query")
    p.add_argument("--level", choices=("1", "2", "3"), help="skip classification and force a level")
    p.add_argument("--threshold", type=float)
    p.add_argument("--top-k-visual", type=_positive_int)
    p.add_argument("--top-k-text", type=_positive_int)
    p.add_argument("--graph-hops", type=int)
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("classify", parents=[common], help="print a query's difficulty level")
    p.add_argument("query")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("eval", parents=[common], help="win rates or MCQ accuracy over a manifest")
    p.add_argument("manifest")
    p.add_argument("answers_a")
    p.add_argument("answers_b", nargs="?")
    p.add_argument("--label-a", default="A")
    p.add_argument("--label-b", default="B")
    p.set_defaults(func=cmd_eval)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except PreconditionError as exc:
        _diag(f"usage error: {exc}")
        return EXIT_BACKEND


if __name__ == "__main__":
    raise SystemExit(main())
