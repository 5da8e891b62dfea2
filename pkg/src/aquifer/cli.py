import json
import logging
import tempfile
import time
from contextlib import contextmanager
from dataclasses import asdict
from pathlib import Path

import click
import numpy as np

from . import __version__
from .config import apply_overrides, coerce, config_to_dict, load_config, to_jsonable
from .errors import ConfigurationError, FormatError, ShapeError
from .estimation import (
    ConsumptionRates,
    PixelGeometry,
    benchmark_comparison,
    expected_areas,
    harden,
    water_consumption,
)
from .evaluation import (
    confusion_counts,
    evaluate_probabilities,
    grid_search,
    kfold_cv,
    roc_curve,
    split_halves,
)
from .features import RGB_BANDS_8, FrameConfig, HogConfig, assemble_features, feature_spec, select_bands
from .learners import LEARNER_CONFIGS, PRESETS, load_model, predict_proba, save_model, train_model, with_seed
from .raster_io import (
    ALL_BUILDING_CLASSES,
    NON_RESIDENTIAL,
    RESIDENTIAL,
    STAGE2_PALETTE,
    BuildingClass,
    ProbabilityMask,
    binary_mask,
    load_annotations,
    load_image,
    load_mask,
    load_probability_mask,
    save_annotations,
    save_image,
    save_mask,
    save_probability_mask,
)
from .rasterize import rasterize_annotations, rasterize_stage2
from .scenegen import SceneConfig, generate_scene
from .visuals import (
    render_confusion_mask,
    render_probability_mask,
    render_rgb,
    render_stage2_mask,
    save_rendering,
)

CLASS_FILTERS = {
    "building": ALL_BUILDING_CLASSES,
    **{c.value: frozenset({c}) for c in BuildingClass},
}
STAGES = ("building", "restype")
HALVES = ("none", "columns", "rows")

existing_file = click.Path(exists=True, dir_okay=False)
output_file = click.Path(dir_okay=False, writable=True)


@click.group()
@click.version_option(__version__, prog_name="aquifer")
@click.option('--threads', type=click.IntRange(min=1), default=1, envvar="AQUIFER_THREADS",
              help='Worker threads for forest training.', show_default=True)
@click.option('--memory-budget-mb', type=click.IntRange(min=1), default=1024,
              help='Feature matrices above this size are spilled to disk.', show_default=True)
@click.option('--record-timing/--no-record-timing', default=True,
              help='Store the wall-clock duration in the run manifest.', show_default=True)
@click.option('-v', '--verbose', count=True, help='Log progress (-vv for debug output).')
@click.pass_context
def cli(ctx, threads: int, memory_budget_mb: int, record_timing: bool, verbose: int):
    """
    Aquifer: building detection, residential classification and water
    consumption estimation from multiband imagery.
    """
    level = logging.WARNING if verbose == 0 else logging.INFO if verbose == 1 else logging.DEBUG
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    ctx.ensure_object(dict)
    ctx.obj.update(
        threads=threads,
        memory_budget_mb=memory_budget_mb,
        record_timing=record_timing,
        started=time.perf_counter(),
    )


@contextmanager
def _command_errors():
    try:
        yield
    except click.ClickException:
        raise
    except Exception as e:
        click.secho(f"An unexpected error occurred: {e}", fg="red", err=True)
        raise click.ClickException(f"An unexpected error occurred: {e}")


def _write_manifest(ctx, output: str, inputs: list, outputs: list, config: dict | None = None,
                    seeds: dict | None = None) -> None:
    manifest = {
        "tool": "aquifer",
        "version": __version__,
        "subcommand": ctx.command.name,
        "params": to_jsonable(dict(ctx.params)),
        "globals": {"threads": ctx.obj["threads"], "memory_budget_mb": ctx.obj["memory_budget_mb"]},
        "config": to_jsonable(config or {}),
        "seeds": seeds or {},
        "inputs": [str(p) for p in inputs],
        "outputs": [str(p) for p in outputs],
    }
    if ctx.obj["record_timing"]:
        manifest["timing"] = {"duration_s": round(time.perf_counter() - ctx.obj["started"], 6)}
    Path(f"{output}.manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    click.secho(f"Success! Wrote {', '.join(str(p) for p in outputs)}.", fg="green")


def _write_json(path: str, document: dict) -> None:
    Path(path).write_text(json.dumps(to_jsonable(document), indent=2, sort_keys=True) + "\n")


# --- Shared feature / learner resolution ---

def _parse_bands(text: str | None) -> tuple[int, ...] | None:
    if text is None:
        return None
    try:
        return tuple(int(part) for part in text.split(",") if part.strip())
    except ValueError:
        raise click.UsageError(f"--bands must be comma-separated band indices, got {text!r}.")


def _hog_choice(hog: bool, no_hog: bool) -> bool | None:
    if hog and no_hog:
        raise click.UsageError("--hog and --no-hog are mutually exclusive.")
    return True if hog else False if no_hog else None


def _resolve_features(stage: str, k: int | None, hog: bool | None, baseline: bool,
                      bands: str | None) -> tuple[FrameConfig, HogConfig | None, tuple[int, ...] | None]:
    if stage == "restype" and hog:
        raise click.UsageError("--hog cannot be combined with --stage restype; stage-2 features exclude HOG.")
    if baseline:
        if k is not None or hog or bands is not None:
            raise click.UsageError("--baseline fixes k, HOG and bands; do not pass --k, --hog or --bands with it.")
        return FrameConfig(k=0), None, RGB_BANDS_8
    use_hog = (stage == "building") if hog is None else hog
    return FrameConfig(k=4 if k is None else k), HogConfig() if use_hog else None, _parse_bands(bands)


def _resolve_learner(model: str, preset: bool, config_path: str | None, overrides, seed: int | None):
    if preset and (config_path or overrides):
        raise click.UsageError("--preset loads the tuned hyperparameters verbatim; it cannot be combined with --config or --set.")
    cls = LEARNER_CONFIGS[model]
    cfg = PRESETS[model] if preset else load_config(cls, config_path) if config_path else cls()
    cfg = apply_overrides(cfg, overrides)
    return with_seed(cfg, seed) if seed is not None else cfg


def _stage_labels(mask_path: str, stage: str, height: int, width: int) -> tuple[np.ndarray, np.ndarray | None]:
    """Per-pixel labels and, for the residential stage, the building rows."""
    mask = load_mask(mask_path, STAGE2_PALETTE if stage == "restype" else None)
    if (mask.height, mask.width) != (height, width):
        raise ShapeError(f"Mask is {mask.width}x{mask.height} but the image is {width}x{height}.")
    flat = mask.values.reshape(-1)
    if stage == "building":
        return (flat > 0).astype(np.int64), None
    return (flat == RESIDENTIAL).astype(np.int64), np.flatnonzero(flat > 0)


@contextmanager
def _features(ctx, image, frame_cfg: FrameConfig, hog_cfg: HogConfig | None, band_indices):
    if band_indices is not None:
        image = select_bands(image, band_indices)
    spec = feature_spec(image.bands, frame_cfg, hog_cfg, band_indices)
    with tempfile.TemporaryDirectory(prefix="aquifer-") as spill_dir:
        features = assemble_features(
            image, frame_cfg, hog_cfg,
            memory_budget_bytes=ctx.obj["memory_budget_mb"] * 1024 * 1024,
            spill_dir=spill_dir,
        )
        yield features, spec


def learner_options(f):
    options = [
        click.option('--model', 'model_name', type=click.Choice(list(LEARNER_CONFIGS)), default='rf',
                     help='Classifier to train.', show_default=True),
        click.option('--stage', type=click.Choice(STAGES), default='building',
                     help='building: building vs background; restype: residential vs non-residential.', show_default=True),
        click.option('--k', type=click.IntRange(min=0), default=None, help='Frame half-width (default 4).'),
        click.option('--hog', is_flag=True, help='Append HOG features (default for the building stage).'),
        click.option('--no-hog', is_flag=True, help='Leave HOG features out.'),
        click.option('--bands', default=None, help='Comma-separated band indices to use, in order.'),
        click.option('--baseline', is_flag=True, help='RGB bands only, no frame expansion, no HOG.'),
        click.option('--preset', is_flag=True, help='Use the tuned hyperparameters verbatim.'),
        click.option('--config', 'config_path', type=existing_file, default=None, help='JSON learner config.'),
        click.option('--set', 'overrides', multiple=True, metavar='KEY=VALUE', help='Override a learner setting.'),
        click.option('--seed', type=int, default=None, help='Learner seed (overrides the config).'),
    ]
    for option in reversed(options):
        f = option(f)
    return f


# --- Commands ---

@cli.command()
@click.argument('image_path', type=existing_file)
@click.argument('annotations_path', type=existing_file)
@click.option('--output', '-o', type=output_file, required=True, help='Output mask (PGM).')
@click.option('--class-filter', type=click.Choice([*CLASS_FILTERS, "stage2"]), default='building',
              help="Classes to mark; 'stage2' writes the residential/non-residential palette.", show_default=True)
@click.pass_context
def rasterize(ctx, image_path: str, annotations_path: str, output: str, class_filter: str):
    """Rasterizes ANNOTATIONS_PATH onto the grid of IMAGE_PATH."""
    with _command_errors():
        image = load_image(image_path)
        annotations = load_annotations(annotations_path)
        click.echo(f"Rasterizing {len(annotations)} polygons onto {image.width}x{image.height} ({class_filter})")
        if class_filter == "stage2":
            mask = rasterize_stage2(annotations, image.width, image.height)
        else:
            mask = rasterize_annotations(annotations, image.width, image.height, CLASS_FILTERS[class_filter])
        save_mask(mask, output)
        _write_manifest(ctx, output, [image_path, annotations_path], [output])


@cli.command()
@click.argument('image_path', type=existing_file)
@click.argument('mask_path', type=existing_file)
@click.option('--output', '-o', type=output_file, required=True, help='Output model file.')
@learner_options
@click.option('--half', type=click.Choice(HALVES), default='none',
              help='Train on the first half of the image only.', show_default=True)
@click.pass_context
def train(ctx, image_path, mask_path, output, model_name, stage, k, hog, no_hog, bands, baseline, preset, config_path,
          overrides, seed, half):
    """Trains a classifier on IMAGE_PATH labelled by MASK_PATH."""
    frame_cfg, hog_cfg, band_indices = _resolve_features(stage, k, _hog_choice(hog, no_hog), baseline, bands)
    cfg = _resolve_learner(model_name, preset, config_path, overrides, seed)
    with _command_errors():
        image = load_image(image_path)
        labels, rows = _stage_labels(mask_path, stage, image.height, image.width)
        if half != "none":
            first, _ = split_halves(image.height, image.width, half)
            rows = first if rows is None else np.intersect1d(rows, first)
        click.echo(f"Training {model_name} ({stage} stage) on {image_path}")
        with _features(ctx, image, frame_cfg, hog_cfg, band_indices) as (features, spec):
            click.echo(f"Feature matrix: {features.rows} x {features.cols}")
            model = train_model(features, labels, cfg, rows=rows, threads=ctx.obj["threads"],
                                feature_spec={**spec, "stage": stage})
        save_model(model, output)
        _write_manifest(ctx, output, [image_path, mask_path], [output],
                        config={"learner": config_to_dict(cfg), "features": spec}, seeds={"learner": cfg.seed})


def _check_feature_request(model, k: int | None, hog: bool | None) -> tuple[FrameConfig, HogConfig | None, list | None]:
    spec = model.feature_spec
    if spec is None:
        frame_cfg = FrameConfig(k=4 if k is None else k)
        return frame_cfg, HogConfig() if hog else None, None
    frame_cfg = FrameConfig(**spec["frame"])
    hog_cfg = HogConfig(**spec["hog"]) if spec["hog"] is not None else None
    requested_frame = frame_cfg if k is None else FrameConfig(k=k)
    requested_hog = hog_cfg if hog is None else (hog_cfg or HogConfig()) if hog else None
    provided = requested_frame.columns(spec["bands"]) + (requested_hog.descriptor_length if requested_hog else 0)
    if provided != model.feature_dim:
        raise ConfigurationError(
            f"Model expects {model.feature_dim} features per pixel (k={frame_cfg.k}) but the requested "
            f"configuration (k={requested_frame.k}) provides {provided}."
        )
    return frame_cfg, hog_cfg, spec["band_indices"]


@cli.command()
@click.argument('model_path', type=existing_file)
@click.argument('image_path', type=existing_file)
@click.option('--output', '-o', type=output_file, required=True, help='Output probability mask (MBR).')
@click.option('--k', type=click.IntRange(min=0), default=None, help='Frame half-width; must match the model.')
@click.option('--hog', is_flag=True, help='HOG features; must match the model.')
@click.option('--no-hog', is_flag=True, help='No HOG features; must match the model.')
@click.option('--mask-output', type=output_file, default=None, help='Also write a thresholded binary mask (PGM).')
@click.option('--threshold', type=click.FloatRange(0.0, 1.0), default=None,
              help="Threshold for --mask-output (default: the model's).")
@click.pass_context
def predict(ctx, model_path, image_path, output, k, hog, no_hog, mask_output, threshold):
    """Writes per-pixel probabilities of MODEL_PATH on IMAGE_PATH."""
    with _command_errors():
        model = load_model(model_path)
        frame_cfg, hog_cfg, band_indices = _check_feature_request(model, k, _hog_choice(hog, no_hog))
        image = load_image(image_path)
        click.echo(f"Predicting {image.width}x{image.height} with a {model.kind} model")
        with _features(ctx, image, frame_cfg, hog_cfg, band_indices) as (features, spec):
            probs = predict_proba(model, features)
        prob_mask = ProbabilityMask(probs=probs.reshape(image.height, image.width).astype(np.float32),
                                    pixel_size_m=image.pixel_size_m)
        save_probability_mask(prob_mask, output)
        outputs = [output]
        if mask_output is not None:
            cut = model.default_threshold if threshold is None else threshold
            save_mask(binary_mask(prob_mask.probs >= cut), mask_output)
            outputs.append(mask_output)
        _write_manifest(ctx, output, [model_path, image_path], outputs, config={"features": spec})


def _derived(output: str, suffix: str) -> str:
    return str(Path(output).with_suffix(suffix))


def _rgb_bands(bands: int) -> tuple[int, ...]:
    if bands > max(RGB_BANDS_8):
        return RGB_BANDS_8
    # Too few bands for the 8-band layout: take the first three, repeating the last.
    return tuple(min(i, bands - 1) for i in range(3))


@cli.command()
@click.argument('probs_path', type=existing_file)
@click.argument('truth_path', type=existing_file)
@click.option('--output', '-o', type=output_file, required=True, help='Metrics report (JSON).')
@click.option('--threshold', type=click.FloatRange(0.0, 1.0), default=None,
              help='Fixed threshold; without it the Jaccard-optimal threshold is searched.')
@click.option('--stage', type=click.Choice(STAGES), default='building', show_default=True)
@click.option('--half', type=click.Choice(HALVES), default='none',
              help='Score the second half of the image only.', show_default=True)
@click.option('--image', 'image_path', type=existing_file, default=None,
              help='Source image; adds an RGB composite rendering.')
@click.pass_context
def evaluate(ctx, probs_path, truth_path, output, threshold, stage, half, image_path):
    """Scores PROBS_PATH against TRUTH_PATH; writes metrics, ROC CSV and PPM renderings."""
    with _command_errors():
        prob_mask = load_probability_mask(probs_path)
        truth = load_mask(truth_path, STAGE2_PALETTE if stage == "restype" else None)
        if truth.values.shape != prob_mask.probs.shape:
            raise ShapeError(f"Probability mask shape {prob_mask.probs.shape} does not match truth shape {truth.values.shape}.")
        probs = prob_mask.probs.reshape(-1).astype(np.float64)
        values = truth.values.reshape(-1)
        if stage == "building":
            labels, rows = values > 0, np.arange(values.shape[0])
        else:
            labels, rows = values == RESIDENTIAL, np.flatnonzero(values > 0)
        if half != "none":
            _, second = split_halves(truth.height, truth.width, half)
            rows = np.intersect1d(rows, second)
        p, y = probs[rows], labels[rows]

        mode = "sweep" if threshold is None else "fixed"
        report = evaluate_probabilities(p, y, threshold)
        threshold = report.threshold
        confusion = confusion_counts(p >= threshold, y)
        roc_path = _derived(output, ".roc.csv")
        roc_curve(p, y).write_csv(roc_path)

        shape = truth.values.shape
        if stage == "building":
            renders = {
                _derived(output, ".confusion.ppm"): render_confusion_mask(prob_mask.probs >= threshold, truth),
                _derived(output, ".probability.ppm"): render_probability_mask(prob_mask),
            }
        else:
            predicted = np.where(values > 0, np.where(probs >= threshold, RESIDENTIAL, NON_RESIDENTIAL), 0)
            renders = {
                _derived(output, ".prediction.ppm"): render_stage2_mask(predicted.reshape(shape), "prediction"),
                _derived(output, ".truth.ppm"): render_stage2_mask(truth, "truth"),
            }
        inputs = [probs_path, truth_path]
        if image_path is not None:
            image = load_image(image_path)
            if (image.height, image.width) != shape:
                raise ShapeError(f"Image is {image.width}x{image.height} but the masks are {shape[1]}x{shape[0]}.")
            renders[_derived(output, ".rgb.ppm")] = render_rgb(image, _rgb_bands(image.bands))
            inputs.append(image_path)
        for path, rendering in renders.items():
            save_rendering(rendering, path)

        _write_json(output, {
            "stage": stage,
            "threshold_mode": mode,
            "threshold": float(threshold),
            "pixels": int(rows.shape[0]),
            "confusion": asdict(confusion),
            "metrics": report.to_dict(),
        })
        click.echo(f"P_J {report.pixel_jaccard:.4f}, AUC {report.auc:.4f} at threshold {threshold:.4f}")
        _write_manifest(ctx, output, inputs, [output, roc_path, *renders])


@cli.command()
@click.argument('image_path', type=existing_file)
@click.argument('mask_path', type=existing_file)
@click.option('--output', '-o', type=output_file, required=True, help='Cross-validation report (JSON).')
@learner_options
@click.option('--folds', type=click.IntRange(min=2), default=5, show_default=True)
@click.option('--fold-seed', type=int, default=0, help='Seed of the stratified fold assignment.', show_default=True)
@click.pass_context
def cv(ctx, image_path, mask_path, output, model_name, stage, k, hog, no_hog, bands, baseline, preset, config_path,
       overrides, seed, folds, fold_seed):
    """Stratified k-fold cross-validation of a learner."""
    frame_cfg, hog_cfg, band_indices = _resolve_features(stage, k, _hog_choice(hog, no_hog), baseline, bands)
    cfg = _resolve_learner(model_name, preset, config_path, overrides, seed)
    with _command_errors():
        image = load_image(image_path)
        labels, rows = _stage_labels(mask_path, stage, image.height, image.width)
        click.echo(f"{folds}-fold cross-validation of {model_name} ({stage} stage)")
        with _features(ctx, image, frame_cfg, hog_cfg, band_indices) as (features, spec):
            report = kfold_cv(features.data, labels, cfg, folds=folds, seed=fold_seed, rows=rows,
                              threads=ctx.obj["threads"])
        _write_json(output, {
            "model": model_name,
            "stage": stage,
            "config": config_to_dict(cfg),
            "features": spec,
            **report.to_dict(),
        })
        click.echo(f"Mean held-out P_J {report.mean_test.pixel_jaccard:.4f}, AUC {report.mean_test.auc:.4f}")
        _write_manifest(ctx, output, [image_path, mask_path], [output],
                        config={"learner": config_to_dict(cfg), "features": spec},
                        seeds={"learner": cfg.seed, "folds": fold_seed})


def _parse_grid(cfg, entries) -> dict[str, list]:
    grid = {}
    for entry in entries:
        name, sep, text = entry.partition("=")
        name = name.strip()
        if not sep or not text:
            raise click.UsageError(f"--grid entries look like key=v1;v2, got {entry!r}.")
        if not hasattr(cfg, name):
            raise ConfigurationError(f"Unknown {type(cfg).__name__} key '{name}'.")
        grid[name] = [coerce(part, getattr(cfg, name), name) for part in text.split(";")]
    return grid


@cli.command()
@click.argument('image_path', type=existing_file)
@click.argument('mask_path', type=existing_file)
@click.option('--output', '-o', type=output_file, required=True, help='Ranked grid-search results (JSON).')
@learner_options
@click.option('--grid', 'grid_entries', multiple=True, required=True, metavar='KEY=V1;V2',
              help='Values to try for one learner setting.')
@click.option('--folds', type=click.IntRange(min=2), default=5, show_default=True)
@click.option('--fold-seed', type=int, default=0, show_default=True)
@click.pass_context
def tune(ctx, image_path, mask_path, output, model_name, stage, k, hog, no_hog, bands, baseline, preset, config_path,
         overrides, seed, grid_entries, folds, fold_seed):
    """Grid search over learner settings, ranked by held-out Pixel Jaccard."""
    frame_cfg, hog_cfg, band_indices = _resolve_features(stage, k, _hog_choice(hog, no_hog), baseline, bands)
    cfg = _resolve_learner(model_name, preset, config_path, overrides, seed)
    grid = _parse_grid(cfg, grid_entries)
    with _command_errors():
        image = load_image(image_path)
        labels, rows = _stage_labels(mask_path, stage, image.height, image.width)
        with _features(ctx, image, frame_cfg, hog_cfg, band_indices) as (features, spec):
            results = grid_search(features.data, labels, cfg, grid, folds=folds, seed=fold_seed, rows=rows,
                                  threads=ctx.obj["threads"])
        _write_json(output, {"model": model_name, "stage": stage, "base_config": config_to_dict(cfg),
                             "grid": grid, "results": results})
        click.echo(f"Best: {results[0]['params']} (P_J {results[0]['mean_test']['pixel_jaccard']:.4f})")
        _write_manifest(ctx, output, [image_path, mask_path], [output],
                        config={"learner": config_to_dict(cfg), "grid": grid, "features": spec},
                        seeds={"learner": cfg.seed, "folds": fold_seed})


@cli.command()
@click.argument('building_path', type=existing_file)
@click.argument('residential_path', type=existing_file)
@click.option('--output', '-o', type=output_file, required=True, help='Consumption report (JSON).')
@click.option('--w-r', type=float, default=40.0, help='Residential gallons per person per day.', show_default=True)
@click.option('--w-nr', type=float, default=21.0, help='Non-residential gallons per person per day.', show_default=True)
@click.option('--occupancy', type=float, default=750.0, help='Square feet per person.', show_default=True)
@click.option('--pixel-area', type=float, default=None, help='Pixel area in m2 (default: from the mask pixel size).')
@click.option('--hard', is_flag=True, help='Threshold both masks instead of using expected values.')
@click.option('--building-threshold', type=click.FloatRange(0.0, 1.0), default=0.5, show_default=True)
@click.option('--residential-threshold', type=click.FloatRange(0.0, 1.0), default=0.5, show_default=True)
@click.pass_context
def estimate(ctx, building_path, residential_path, output, w_r, w_nr, occupancy, pixel_area, hard,
             building_threshold, residential_threshold):
    """Expected building areas and daily water consumption from the two probability masks."""
    with _command_errors():
        p_building = load_probability_mask(building_path)
        p_residential = load_probability_mask(residential_path)
        geom = PixelGeometry(pixel_area) if pixel_area is not None else PixelGeometry.from_pixel_size(p_building.pixel_size_m)
        rates = ConsumptionRates(w_r, w_nr, occupancy)
        if hard:
            b, r = harden(p_building, building_threshold), harden(p_residential, residential_threshold)
        else:
            b, r = p_building, p_residential
        area_r, area_nr = expected_areas(b, r, geom)
        image_area = p_building.height * p_building.width * geom.pixel_area_m2
        report = water_consumption(area_r, area_nr, rates, geom, image_area_m2=image_area)
        comparison = benchmark_comparison(report)
        _write_json(output, {
            "mode": "hard" if hard else "soft",
            "report": report.to_dict(),
            "benchmarks": comparison.to_dict(),
        })
        click.echo(
            f"Daily water consumption: {report.water_gal_per_day / 1e6:.3f}M gal "
            f"(residential {report.residential_share_gal / 1e6:.3f}M, "
            f"non-residential {report.nonresidential_share_gal / 1e6:.3f}M)"
        )
        _write_manifest(ctx, output, [building_path, residential_path], [output],
                        config={"rates": asdict(rates), "geometry": asdict(geom)})


@cli.command()
@click.option('--output', '-o', type=output_file, required=True, help='Output image (MBR).')
@click.option('--annotations', 'annotations_path', type=output_file, required=True, help='Output annotations (JSON).')
@click.option('--config', 'config_path', type=existing_file, default=None, help='JSON scene config.')
@click.option('--set', 'overrides', multiple=True, metavar='KEY=VALUE', help='Override a scene setting.')
@click.option('--seed', type=int, default=None, help='Scene seed (overrides the config).')
@click.pass_context
def synth(ctx, output, annotations_path, config_path, overrides, seed):
    """Generates a synthetic scene with known building footprints."""
    with _command_errors():
        cfg = load_config(SceneConfig, config_path) if config_path else SceneConfig()
        if seed is not None:
            overrides = [*overrides, f"seed={seed}"]
        cfg = apply_overrides(cfg, overrides)
        click.echo(f"Generating {cfg.width}x{cfg.height} scene (seed {cfg.seed})")
        image, annotations = generate_scene(cfg)
        save_image(image, output)
        save_annotations(annotations, annotations_path)
        inputs = [config_path] if config_path else []
        _write_manifest(ctx, output, inputs, [output, annotations_path],
                        config={"scene": config_to_dict(cfg)}, seeds={"scene": cfg.seed})


@cli.command()
@click.argument('manifest_path', type=existing_file)
@click.pass_context
def replay(ctx, manifest_path):
    """Re-runs the command recorded in MANIFEST_PATH."""
    try:
        manifest = json.loads(Path(manifest_path).read_text(encoding="utf-8"))
        name, params = manifest["subcommand"], manifest["params"]
    except (json.JSONDecodeError, KeyError, TypeError) as e:
        raise FormatError(f"'{manifest_path}' is not a run manifest ({e}).")
    command = cli.commands.get(name)
    if command is None or name == "replay":
        raise FormatError(f"'{manifest_path}' records an unknown subcommand {name!r}.")
    known = {p.name for p in command.params}
    if not isinstance(params, dict) or set(params) - known:
        raise FormatError(f"'{manifest_path}' has parameters that '{name}' does not accept.")
    ctx.obj.update(manifest.get("globals", {}))
    click.echo(f"Replaying '{name}' from {manifest_path}")
    ctx.invoke(command, **params)


if __name__ == '__main__':
    cli()
