"""Command-line entry point.

One subcommand per pipeline stage plus `synth` for generating test
cohorts and `run` for the whole chain. Settings come from flags, an
optional INI file (--config), then defaults, in that order.

Exit codes: 0 success, 2 configuration problems, 3 data problems,
4 internal errors.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from typing import List, Optional

from . import pipeline, synth
from .config import PipelineConfig, build_config
from .errors import ConfigError, PipelineError
from .features import FEATURE_MODES, FEATURE_SOURCES
from .learn import CLASSIFIERS
from .vectorize import WEIGHTINGS

_CONFIG_KEYS = [f.name for f in dataclasses.fields(PipelineConfig)]


def _config_parent() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("settings (flag > --config file > default)")
    g.add_argument("--config", metavar="FILE", help="INI file with a [pipeline] section")
    g.add_argument("--seed", type=int)
    g.add_argument("--min-doc-freq", type=int, dest="min_doc_freq")
    g.add_argument("--weighting", choices=WEIGHTINGS)
    g.add_argument("--k-diag", type=int, dest="k_diag")
    g.add_argument("--k-proc", type=int, dest="k_proc")
    g.add_argument("--alpha", type=float)
    g.add_argument("--beta", type=float)
    g.add_argument("--iterations", type=int)
    g.add_argument("--burn-in", type=int, dest="burn_in")
    g.add_argument("--foldin-sweeps", type=int, dest="foldin_sweeps")
    g.add_argument("--top-n", type=int, dest="top_n")
    g.add_argument("--cv-window", type=int, dest="cv_window")
    g.add_argument("--scan-measure", choices=("cv", "umass"), dest="scan_measure")
    g.add_argument("--train-fraction", type=float, dest="train_fraction")
    g.add_argument("--stratified", action=argparse.BooleanOptionalAction, default=None)
    g.add_argument("--smote-k", type=int, dest="smote_k")
    g.add_argument("--smote-before-split", dest="smote_before_split",
                   action=argparse.BooleanOptionalAction, default=None)
    g.add_argument("--feature-mode", choices=FEATURE_MODES, dest="feature_mode")
    g.add_argument("--feature-source", choices=FEATURE_SOURCES, dest="feature_source")
    g.add_argument("--classifier", choices=CLASSIFIERS)
    return p


def _config_from(args: argparse.Namespace) -> PipelineConfig:
    overrides = {k: getattr(args, k, None) for k in _CONFIG_KEYS}
    return build_config(getattr(args, "config", None), overrides)


def _parse_k_values(raw: str) -> List[int]:
    out: List[int] = []
    for part in raw.split(","):
        part = part.strip()
        if not part:
            continue
        if "-" in part[1:]:
            lo, hi = part.split("-", 1)
            try:
                lo_i, hi_i = int(lo), int(hi)
            except ValueError:
                raise ConfigError(f"bad k range {part!r}") from None
            if hi_i < lo_i:
                raise ConfigError(f"bad k range {part!r}")
            out.extend(range(lo_i, hi_i + 1))
        else:
            try:
                out.append(int(part))
            except ValueError:
                raise ConfigError(f"bad k value {part!r}") from None
    if not out:
        raise ConfigError(f"no k values in {raw!r}")
    return out


def cmd_ingest(args) -> int:
    counts = pipeline.stage_ingest(args.encounters, args.notes, args.ccsr, args.out)
    print(
        f"ingest: {counts['encounters']} encounters "
        f"({counts['dropped_no_codes']} dropped for empty codes, "
        f"{counts['unknown_codes']} unknown codes), "
        f"{counts['notes_kept']} notes kept "
        f"({counts['orphan_notes']} orphaned, {counts['no_section']} without a usable section)"
    )
    return 0


def cmd_preprocess(args) -> int:
    counts = pipeline.stage_preprocess(
        args.out, gazetteer_path=args.gazetteer,
        negex_path=args.negex, stopwords_path=args.stopwords,
    )
    print(
        f"preprocess: {counts['diag_docs']} diagnostic and {counts['proc_docs']} procedure "
        f"documents ({counts['dropped_empty_diag']}/{counts['dropped_empty_proc']} empty, dropped)"
    )
    return 0


def cmd_fit_topics(args) -> int:
    cfg = _config_from(args)
    written = pipeline.stage_fit_topics(args.out, cfg)
    print("fit-topics: wrote " + ", ".join(sorted(written.values())))
    return 0


def cmd_coherence(args) -> int:
    cfg = _config_from(args)
    res = pipeline.stage_coherence(args.out, cfg, args.source, _parse_k_values(args.k_values))
    for k, umass, cv in res["rows"]:
        marker = "  <- selected" if k == res["selected_k"] else ""
        print(f"k={k}  doc-cooc={umass:.4f}  window-npmi={cv:.4f}{marker}")
    print(f"coherence: selected k={res['selected_k']} by {res['measure']} for {args.source}")
    return 0


def cmd_label(args) -> int:
    cfg = _config_from(args)
    counts = pipeline.stage_label(args.out, cfg)
    parts = ", ".join(f"{s}:{n}" for s, n in sorted(counts.items()))
    print(f"label: dominant topics recorded per document ({parts}, {cfg.weighting} models)")
    return 0


def cmd_features(args) -> int:
    cfg = _config_from(args)
    counts = pipeline.stage_features(args.out, cfg)
    print(
        f"features: {counts['rows']} rows "
        f"({counts['dropped_missing']} encounters lacked a required source)"
    )
    return 0


def cmd_train(args) -> int:
    cfg = _config_from(args)
    counts = pipeline.stage_train(args.out, cfg)
    print(f"train: fitted {counts['models']} models")
    return 0


def cmd_evaluate(args) -> int:
    cfg = _config_from(args)
    payload = pipeline.stage_evaluate(args.out, cfg)
    best = payload["best"]
    print(
        f"evaluate: best accuracy {best['accuracy']:.3f} "
        f"({best['classifier']}, {best['weighting']}, {best['source']}); "
        f"wrote {pipeline.REPORT_JSON} and figures"
    )
    return 0


def cmd_trajectory(args) -> int:
    cfg = _config_from(args)
    n = pipeline.stage_trajectory(args.out, cfg, patient=args.patient)
    who = args.patient if args.patient else "all patients"
    print(f"trajectory: {n} rows for {who}")
    return 0


def cmd_synth(args) -> int:
    manifest = synth.generate_cohort(
        args.out, n_encounters=args.n, k_diag=args.k_diag, k_proc=args.k_proc,
        seed=args.seed, flip_prob=args.flip_prob, negation_rate=args.negation_rate,
    )
    print(
        f"synth: wrote {manifest.n_encounters} encounters to {args.out} "
        f"(k_diag={args.k_diag}, k_proc={args.k_proc}, seed={args.seed})"
    )
    return 0


def cmd_run(args) -> int:
    cfg = _config_from(args)
    payload = pipeline.stage_run(
        args.encounters, args.notes, args.ccsr, args.out, cfg,
        gazetteer_path=args.gazetteer,
    )
    best = payload["best"]
    print(
        f"run: complete; best accuracy {best['accuracy']:.3f} "
        f"({best['classifier']}, {best['weighting']}, {best['source']})"
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="phenomine",
        description="Mine note topics and predict stay-length classes.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    parent = _config_parent()

    p = sub.add_parser("ingest", help="validate raw inputs into the artifact dir")
    p.add_argument("--encounters", required=True)
    p.add_argument("--notes", required=True)
    p.add_argument("--ccsr", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("preprocess", help="negation, entity filter, merge into documents")
    p.add_argument("--out", required=True)
    p.add_argument("--gazetteer", help="sectioned term file; bundled list by default")
    p.add_argument("--negex", help="sectioned trigger file; bundled list by default")
    p.add_argument("--stopwords", help="one word per line; bundled list by default")
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("fit-topics", parents=[parent],
                       help="fit topic models for both sources and weightings")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fit_topics)

    p = sub.add_parser("coherence", parents=[parent],
                       help="scan candidate topic counts for one source")
    p.add_argument("--out", required=True)
    p.add_argument("--source", required=True, choices=pipeline.SOURCES)
    p.add_argument("--k-values", required=True, dest="k_values",
                   help="comma list and/or ranges, e.g. 2,3,4 or 2-8")
    p.set_defaults(func=cmd_coherence)

    p = sub.add_parser("label", parents=[parent],
                       help="record each document's dominant topic and contribution")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_label)

    p = sub.add_parser("features", parents=[parent],
                       help="export the feature table for the configured combo")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_features)

    p = sub.add_parser("train", parents=[parent],
                       help="train all classifiers on all combos")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", parents=[parent],
                       help="score held-out rows; write report.json and figures")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("trajectory", parents=[parent],
                       help="chronological dominant topics per patient")
    p.add_argument("--out", required=True)
    p.add_argument("--patient", help="one patient id; default all patients")
    p.set_defaults(func=cmd_trajectory)

    p = sub.add_parser("synth", help="generate a synthetic input bundle")
    p.add_argument("--out", required=True)
    p.add_argument("--n", type=int, default=200)
    p.add_argument("--k-diag", type=int, default=6, dest="k_diag")
    p.add_argument("--k-proc", type=int, default=6, dest="k_proc")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--flip-prob", type=float, default=0.1, dest="flip_prob")
    p.add_argument("--negation-rate", type=float, default=0.2, dest="negation_rate")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("run", parents=[parent], help="whole pipeline in one call")
    p.add_argument("--encounters", required=True)
    p.add_argument("--notes", required=True)
    p.add_argument("--ccsr", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--gazetteer", help="sectioned term file; bundled list by default")
    p.set_defaults(func=cmd_run)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except PipelineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
