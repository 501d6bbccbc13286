"""Command line interface.

Subcommands: synth, classify, entropy, build-map, localize, and eval
(classify | coverage | localize). JSON config schemas are documented in the
project README.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from .core import DescriptorStore
from .dataset_io import SyntheticSpec, generate_synthetic, load_traversal, write_traversal
from .errors import ConfigError, VismapError
from .harness import (
    STRATEGIES,
    STRATEGY_CONTEXT,
    STRATEGY_DISTANCE,
    STRATEGY_DMC,
    STRATEGY_MEMORABILITY,
    ExperimentContext,
    FoldSpec,
    run_classification_eval,
    run_coverage_experiment,
    run_localization_experiment,
    write_classification_csv,
    write_coverage_csv,
    write_localization_csv,
    write_sidecar,
)
from .localization import (
    LocalizationConfig,
    MapView,
    evaluate_localization,
    report_from_json_dict,
    report_to_json_dict,
)
from .retrieval import SceneClassifier, galleries_from_ranges
from .sampling import (
    SamplerConfig,
    map_from_json_dict,
    map_to_json_dict,
    sample_contextual,
    sample_distance,
    sample_dmc,
    sample_memorability,
)
from .scoring import GrayImage, local_entropy_score


def _load_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read JSON config {path}: {exc}") from exc


def _write_json(path, data) -> None:
    Path(path).write_text(json.dumps(data, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _sampler_config(data: dict, **overrides) -> SamplerConfig:
    known = dict(data or {})
    known.update(overrides)
    if "excluded_indices" in known:
        known["excluded_indices"] = frozenset(known["excluded_indices"])
    try:
        return SamplerConfig(**known)
    except TypeError as exc:
        raise ConfigError(f"malformed sampler config: {exc}") from exc


def _localization_config(data: dict) -> LocalizationConfig:
    data = dict(data or {})
    if "window_frames" not in data and "window_m" not in data:
        data["window_frames"] = 100
    return LocalizationConfig(**data)


def cmd_synth(args) -> int:
    spec = SyntheticSpec.from_json_dict(_load_json(args.spec))
    traversal = generate_synthetic(spec)
    write_traversal(traversal, args.out)
    print(f"wrote {len(traversal)} frames (dim {traversal.dim}) to {args.out}")
    return 0


def cmd_classify(args) -> int:
    traversal = load_traversal(args.map)
    galleries = galleries_from_ranges(traversal.name, _load_json(args.galleries))
    classifier = SceneClassifier(galleries, DescriptorStore.from_traversals(traversal))
    results = classifier.classify_traversal(traversal)
    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["index", "id", "label", "predicted", "confidence"])
        for fr, cls in zip(traversal.frames, results):
            writer.writerow([fr.index, fr.id, fr.label, cls.class_name, f"{cls.confidence_score:.6f}"])
    print(f"classified {len(results)} frames into {args.out}")
    return 0


def cmd_entropy(args) -> int:
    try:
        from PIL import Image
    except ImportError as exc:
        raise ConfigError("the entropy command needs pillow (pip install vismap[images])") from exc
    image_dir = Path(args.images)
    paths = sorted(p for p in image_dir.iterdir() if p.is_file())
    if not paths:
        raise ConfigError(f"no files found in {image_dir}")
    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["filename", "entropy"])
        for p in paths:
            with Image.open(p) as img:
                gray = GrayImage(np.asarray(img.convert("L"), dtype=np.uint8))
            writer.writerow([p.name, f"{local_entropy_score(gray, args.patch):.6f}"])
    print(f"scored {len(paths)} images into {args.out}")
    return 0


def cmd_build_map(args) -> int:
    traversal = load_traversal(args.traversal)
    config_data = _load_json(args.config)
    sampler = _sampler_config(config_data.get("sampler"))
    excluded = sampler.excluded_indices
    classifier = None
    if args.strategy in (STRATEGY_CONTEXT, STRATEGY_DMC):
        ranges = config_data.get("galleries")
        if not ranges:
            raise ConfigError(f"strategy {args.strategy!r} needs a 'galleries' config entry")
        galleries = galleries_from_ranges(traversal.name, ranges)
        classifier = SceneClassifier(galleries, DescriptorStore.from_traversals(traversal))
    if args.strategy == STRATEGY_DISTANCE:
        vmap = sample_distance(traversal, sampler.dist_interval_m, excluded)
    elif args.strategy == STRATEGY_MEMORABILITY:
        vmap = sample_memorability(traversal, sampler.threshold_mem, excluded)
    elif args.strategy == STRATEGY_CONTEXT:
        vmap = sample_contextual(traversal, classifier, sampler.threshold_S, excluded)
    else:
        vmap = sample_dmc(traversal, classifier, sampler)
    _write_json(args.out, map_to_json_dict(vmap))
    print(f"{args.strategy} map: {len(vmap)} of {len(traversal)} frames -> {args.out}")
    return 0


def cmd_localize(args) -> int:
    vmap = map_from_json_dict(_load_json(args.map))
    map_traversal = load_traversal(args.map_traversal)
    queries = load_traversal(args.queries)
    config_data = _load_json(args.config) if args.config else {}
    loc_cfg = _localization_config(config_data.get("localization", config_data))
    excluded = frozenset(config_data.get("excluded_query_indices", ()))
    view = MapView(vmap, map_traversal)
    report = evaluate_localization(queries, view, loc_cfg, excluded_query_indices=excluded)
    baseline = None
    if args.baseline:
        baseline = report_from_json_dict(_load_json(args.baseline))
    _write_json(args.out, report_to_json_dict(report, baseline))
    scene = "n/a" if report.accuracy_scene is None else f"{report.accuracy_scene:.2f}%"
    undef = "n/a" if report.accuracy_undefined is None else f"{report.accuracy_undefined:.2f}%"
    print(f"scene accuracy {scene}, undefined accuracy {undef} -> {args.out}")
    return 0


def _eval_inputs(config: dict):
    if "bundle" in config:
        return load_traversal(config["bundle"])
    if "synthetic" in config:
        return generate_synthetic(SyntheticSpec.from_json_dict(config["synthetic"]))
    raise ConfigError("eval config needs either 'bundle' or 'synthetic'")


def _eval_queries(config: dict, spec_data):
    queries = config.get("queries", {})
    if "bundles" in queries:
        return [load_traversal(p) for p in queries["bundles"]]
    if "seeds" in queries:
        if spec_data is None:
            raise ConfigError("'queries.seeds' requires a 'synthetic' map spec")
        out = []
        for i, seed in enumerate(queries["seeds"]):
            spec = SyntheticSpec.from_json_dict(
                {**spec_data, "seed": int(seed), "name": f"{spec_data.get('name', 'synthetic')}-q{i}"}
            )
            out.append(generate_synthetic(spec))
        return out
    raise ConfigError("eval localize config needs 'queries.bundles' or 'queries.seeds'")


def _assert_failures(failures) -> int:
    for message in failures:
        print(f"ASSERT FAIL: {message}", file=sys.stderr)
    if failures:
        return 1
    print("all assertions passed")
    return 0


def cmd_eval(args) -> int:
    config = _load_json(args.config)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    seed = int(config.get("seed", 0))
    traversal = _eval_inputs(config)

    if args.protocol == "classify":
        folds = FoldSpec.from_traversal(traversal, int(config.get("fold_count", 4)))
        report = run_classification_eval(traversal, folds)
        write_classification_csv(report, out_dir / "classification.csv")
        write_sidecar(out_dir / "classification.json", config, seed)
        print(f"scene average {report.scene_average:.2f}% -> {out_dir}")
        if args.check:
            failures = []
            if report.scene_average < 95.0:
                failures.append(
                    f"scene average {report.scene_average:.2f}% below 95%"
                )
            return _assert_failures(failures)
        return 0

    sampler_data = dict(config.get("sampler") or {})
    # threshold_S may be {"scene_quantile": q}: calibrate it from the data
    # once the reference galleries and classifications exist.
    threshold_quantile = None
    if isinstance(sampler_data.get("threshold_S"), dict):
        threshold_quantile = float(sampler_data.pop("threshold_S")["scene_quantile"])
    sampler = _sampler_config(
        sampler_data, budget_fraction=config.get("budget_fraction", 0.5)
    )
    reference = config.get("reference", {})
    ctx = ExperimentContext.build(
        traversal,
        sampler,
        seed,
        scene_ref_fraction=reference.get("scene_fraction", 0.25),
        undefined_ref_fraction=reference.get("undefined_fraction", 0.10),
    )
    if threshold_quantile is not None:
        ctx = ctx.with_threshold_from_scene_quantile(threshold_quantile)
    strategies = config.get("strategies", list(STRATEGIES))
    fractions = config.get("fractions", [0.0, 0.2, 0.6, 1.0])

    if args.protocol == "coverage":
        report = run_coverage_experiment(ctx, strategies, fractions)
        write_coverage_csv(report, out_dir / "coverage.csv")
        write_sidecar(out_dir / "coverage.json", config, seed)
        print(
            f"coverage over {report.scene_available} available scene frames -> {out_dir}"
        )
        if args.check:
            failures = []
            base = report.cell(STRATEGY_DISTANCE, 0.6).scene_inclusion_pct
            context = report.cell(STRATEGY_CONTEXT, 0.6).scene_inclusion_pct
            dmc = report.cell(STRATEGY_DMC, 0.6).scene_inclusion_pct
            if context - base < 20.0:
                failures.append(
                    f"context@0.6 beats distance by {context - base:.2f} points, need >= 20"
                )
            if abs(dmc - context) > 5.0:
                failures.append(
                    f"dmc@0.6 differs from context@0.6 by {abs(dmc - context):.2f} points, need <= 5"
                )
            return _assert_failures(failures)
        return 0

    # localize
    loc_cfg = _localization_config(config.get("localization"))
    queries = _eval_queries(config, config.get("synthetic"))
    grid = run_localization_experiment(ctx, queries, strategies, fractions, loc_cfg)
    write_localization_csv(grid, out_dir / "localization.csv")
    write_sidecar(out_dir / "localization.json", config, seed)
    print(
        f"baseline scene {grid.baseline_scene:.2f}%, undefined "
        f"{grid.baseline_undefined:.2f}% -> {out_dir}"
    )
    if args.check:
        failures = []
        dmc = grid.cell(STRATEGY_DMC, 0.6)
        context = grid.cell(STRATEGY_CONTEXT, 0.6)
        if dmc.scene_delta_points is None or dmc.scene_delta_points < 0:
            failures.append(f"dmc@0.6 scene delta {dmc.scene_delta_points} below 0 points")
        if (
            dmc.undefined_delta_points is None
            or context.undefined_delta_points is None
            or dmc.undefined_delta_points < context.undefined_delta_points
        ):
            failures.append(
                f"dmc@0.6 undefined delta {dmc.undefined_delta_points} below "
                f"context's {context.undefined_delta_points}"
            )
        return _assert_failures(failures)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vismap", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic traversal bundle")
    p.add_argument("--spec", required=True, help="synthetic spec JSON")
    p.add_argument("--out", required=True, help="output bundle directory")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("classify", help="classify every frame of a bundle")
    p.add_argument("--map", required=True, help="traversal bundle directory")
    p.add_argument("--galleries", required=True, help="JSON of class name -> index ranges")
    p.add_argument("--out", required=True, help="output CSV")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("entropy", help="local pixel entropy per image")
    p.add_argument("--images", required=True, help="directory of images")
    p.add_argument("--patch", type=int, default=16, help="tile side length in pixels")
    p.add_argument("--out", required=True, help="output CSV")
    p.set_defaults(func=cmd_entropy)

    p = sub.add_parser("build-map", help="sample a visual map from a bundle")
    p.add_argument("--strategy", required=True, choices=STRATEGIES)
    p.add_argument("--config", required=True, help="sampler config JSON")
    p.add_argument("--traversal", required=True, help="traversal bundle directory")
    p.add_argument("--out", required=True, help="output map JSON")
    p.set_defaults(func=cmd_build_map)

    p = sub.add_parser("localize", help="localize a query bundle against a map")
    p.add_argument("--map", required=True, help="map JSON from build-map")
    p.add_argument("--map-traversal", required=True, help="bundle the map indexes into")
    p.add_argument("--queries", required=True, help="query traversal bundle")
    p.add_argument("--config", help="localization config JSON")
    p.add_argument("--baseline", help="baseline report JSON for deltas")
    p.add_argument("--out", required=True, help="output report JSON")
    p.set_defaults(func=cmd_localize)

    p = sub.add_parser("eval", help="run an experiment protocol end to end")
    p.add_argument("protocol", choices=["classify", "coverage", "localize"])
    p.add_argument("--config", required=True, help="experiment config JSON")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument(
        "--assert",
        dest="check",
        action="store_true",
        help="exit nonzero when a directional threshold is violated",
    )
    p.set_defaults(func=cmd_eval)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except VismapError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
