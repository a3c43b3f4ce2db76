#!/usr/bin/env python3
"""Morphoprot CLI - fetch, signature, compare, batch and render commands.

Exit codes: 0 success (compare: similar), 1 dissimilar, 2 error.
"""
import itertools
import logging
import os
import re
import sys
from enum import Enum
from pathlib import Path
from typing import Annotated, Any, Optional

import typer
from rich.console import Console

from . import reports
from .cache import SignatureCache
from .config import OutputFormat, RunConfig, build_run_config, load_env
from .constants import PDB_ID_PATTERN
from .errors import MorphoprotError
from .fractal import box_counts
from .grid import project_faces
from .ingest import StructureModel, fetch_structure, normalize, parse_pdb, select_points, validate_id
from .pipelines import (
    Verdict,
    compare,
    geodesic_profile,
    rank_pairs,
    signature_from_stack,
    stacked_skeleton,
)

logger = logging.getLogger(__name__)

app = typer.Typer(
    name="morphoprot",
    help="Compare protein tertiary structures with morphological skeletons and geodesic dilation",
    add_completion=False,
)

EXIT_SIMILAR = 0
EXIT_DISSIMILAR = 1
EXIT_ERROR = 2


class RenderTarget(str, Enum):
    SLICES = "slices"
    SKELETON = "skeleton"
    FACES = "faces"


# Shared options
Thickness = Annotated[Optional[float], typer.Option("--thickness", help="Slice thickness in normalized z")]
Resolution = Annotated[Optional[int], typer.Option("--resolution", help="Slice raster side in pixels")]
SkeletonSE = Annotated[Optional[str], typer.Option("--se", help="Skeleton structuring element: square, disk or cross")]
GrowthShape = Annotated[Optional[str], typer.Option("--growth-shape", help="Slice growth element: disk, square or cross")]
BoxMax = Annotated[Optional[int], typer.Option("--box-max", help="Largest box size for box counting")]
FitWindow = Annotated[Optional[str], typer.Option("--fit-window", help="'auto' to fit the best scaling window")]
Selector = Annotated[Optional[str], typer.Option("--selector", help="Method 1 atoms: all_atoms or backbone_ca")]
FaceSelector = Annotated[Optional[str], typer.Option("--face-selector", help="Method 2 atoms: all_atoms or backbone_ca")]
FaceResolution = Annotated[Optional[int], typer.Option("--face-resolution", help="Face raster side in pixels")]
RhoThreshold = Annotated[Optional[float], typer.Option("--rho-threshold", help="Largest rho still similar (default 0.008)")]
DeltaThreshold = Annotated[Optional[int], typer.Option("--delta-threshold", help="Largest delta_p still similar (default 12)")]
Format = Annotated[Optional[OutputFormat], typer.Option("--format", help="Output format")]
Threads = Annotated[Optional[int], typer.Option("--threads", help="Worker threads for slices and faces")]
CacheDir = Annotated[Optional[Path], typer.Option("--cache-dir", help="Structure and signature cache")]
IncludeHetero = Annotated[Optional[bool], typer.Option("--include-hetero/--no-hetero", help="Keep HETATM records")]


@app.callback()
def main(
    ctx: typer.Context,
    config: Optional[Path] = typer.Option(
        None,
        "--config", "-c",
        help="key=value configuration file",
        envvar="MORPHOPROT_CONFIG",
    ),
    log_level: Optional[str] = typer.Option(
        None,
        "--log-level",
        help="Logging level (default WARNING)",
    ),
):
    """
    Morphoprot - fractal and geodesic comparison of protein structures.

    Examples:

        morphoprot fetch 2lep 3v2j
        morphoprot fd 2lep
        morphoprot compare 3v2j 3v2m --format csv
        morphoprot batch ids.txt --threads 4
        morphoprot render 2lep faces out/
    """
    load_env()
    ctx.obj = {"config": config, "log_level": log_level}


def _fail(message: str) -> None:
    typer.echo(f"Error: {message}", err=True)
    raise typer.Exit(EXIT_ERROR)


def _run_config(ctx: typer.Context, **flags: Any) -> RunConfig:
    obj = ctx.obj or {}
    if isinstance(flags.get("format"), OutputFormat):
        flags["format"] = flags["format"].value
    if flags.get("cache_dir") is not None:
        flags["cache_dir"] = str(flags["cache_dir"])
    flags["log_level"] = obj.get("log_level")
    try:
        config = build_run_config(obj.get("config"), flags)
    except MorphoprotError as e:
        _fail(str(e))
    logging.basicConfig(
        level=getattr(logging, config.log_level.upper(), logging.WARNING),
        stream=sys.stderr,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    return config


def _method1_flags(thickness, resolution, se, growth_shape, box_max, fit_window, selector) -> dict:
    return {
        "slice_thickness": thickness,
        "resolution": resolution,
        "skeleton_shape": se,
        "growth_shape": growth_shape,
        "box_max": box_max,
        "fit_window": fit_window,
        "selector": selector,
    }


def _load_model(source: str, config: RunConfig) -> tuple[str, StructureModel]:
    """Read a structure from a file path or fetch it by PDB id."""
    path = Path(source)
    if path.is_file():
        model = parse_pdb(path.read_bytes(), include_hetero=config.include_hetero)
        return path.stem, model
    if re.fullmatch(PDB_ID_PATTERN, source):
        pdb_id = validate_id(source)
        text = fetch_structure(pdb_id, config.cache_path, config.fetch_url, timeout=config.fetch_timeout)
        return pdb_id, parse_pdb(text, include_hetero=config.include_hetero, pdb_id=pdb_id)
    raise FileNotFoundError(f"no such file and not a PDB id: {source}")


def _echo_table(table) -> None:
    Console().print(table)


def _write_grid(path: Path, grid) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(grid.to_pgm())


@app.command()
def fetch(
    ctx: typer.Context,
    ids: list[str] = typer.Argument(..., help="PDB ids to download into the cache"),
    cache_dir: CacheDir = None,
):
    """Download structures into the local cache."""
    config = _run_config(ctx, cache_dir=cache_dir)
    failures = 0
    for pdb_id in ids:
        try:
            key = validate_id(pdb_id)
            target = config.cache_path / f"{key}.pdb"
            warm = target.exists() and target.stat().st_size > 0
            fetch_structure(key, config.cache_path, config.fetch_url, timeout=config.fetch_timeout)
            typer.echo(f"{'cached' if warm else 'fetched'} {key} {target}")
        except MorphoprotError as e:
            failures += 1
            typer.echo(f"Error: {pdb_id}: {e}", err=True)
    if failures:
        raise typer.Exit(EXIT_ERROR)


@app.command()
def fd(
    ctx: typer.Context,
    source: str = typer.Argument(..., help="PDB file or id"),
    thickness: Thickness = None,
    resolution: Resolution = None,
    se: SkeletonSE = None,
    growth_shape: GrowthShape = None,
    box_max: BoxMax = None,
    fit_window: FitWindow = None,
    selector: Selector = None,
    include_hetero: IncludeHetero = None,
    output_format: Format = None,
    threads: Threads = None,
    cache_dir: CacheDir = None,
    dump_dir: Optional[Path] = typer.Option(None, "--dump-dir", help="Write per-slice and stacked PGMs here"),
):
    """Print the stacked-skeleton fractal signature D_p of one structure."""
    config = _run_config(
        ctx,
        **_method1_flags(thickness, resolution, se, growth_shape, box_max, fit_window, selector),
        include_hetero=include_hetero,
        format=output_format,
        threads=threads,
        cache_dir=cache_dir,
    )
    try:
        label, model = _load_model(source, config)
        params = config.method1()
        stack = stacked_skeleton(model, params, config.threads)
        signature = signature_from_stack(label, stack, params)
    except (MorphoprotError, OSError) as e:
        _fail(str(e))

    if dump_dir is not None:
        for i, record in enumerate(stack.slices):
            _write_grid(dump_dir / f"slice_{i:03d}.pgm", record.raster)
            _write_grid(dump_dir / f"skeleton_{i:03d}.pgm", record.skeleton)
        _write_grid(dump_dir / "stacked.pgm", stack.grid)
        series = box_counts(stack.grid, params.box_sizes)
        (dump_dir / "box_counts.csv").write_text(series.to_csv(), encoding="utf-8")

    if config.output_format == OutputFormat.CSV:
        typer.echo(reports.signature_to_csv(signature), nl=False)
    elif config.output_format == OutputFormat.TABLE:
        _echo_table(reports.signature_table(signature))
    else:
        typer.echo(reports.signature_to_json(signature, slices=[record.to_dict() for record in stack.slices]))


@app.command()
def geodesic(
    ctx: typer.Context,
    source: str = typer.Argument(..., help="Source PDB file or id"),
    target: str = typer.Argument(..., help="Target PDB file or id"),
    face_selector: FaceSelector = None,
    face_resolution: FaceResolution = None,
    include_hetero: IncludeHetero = None,
    output_format: Format = None,
    threads: Threads = None,
    cache_dir: CacheDir = None,
):
    """Print the six-face geodesic profile and delta_p of two structures."""
    config = _run_config(
        ctx,
        face_selector=face_selector,
        face_resolution=face_resolution,
        include_hetero=include_hetero,
        format=output_format,
        threads=threads,
        cache_dir=cache_dir,
    )
    try:
        label_s, model_s = _load_model(source, config)
        label_t, model_t = _load_model(target, config)
        params = config.method2()
        profile = geodesic_profile(model_s, model_t, params, config.threads)
    except (MorphoprotError, OSError) as e:
        _fail(str(e))

    ids = (label_s, label_t)
    if config.output_format == OutputFormat.CSV:
        typer.echo(reports.profile_to_csv(ids, profile), nl=False)
    elif config.output_format == OutputFormat.TABLE:
        _echo_table(reports.profile_table(ids, profile))
    else:
        typer.echo(reports.profile_to_json(ids, profile, params.to_dict()))


@app.command("compare")
def compare_cmd(
    ctx: typer.Context,
    source: str = typer.Argument(..., help="First PDB file or id"),
    target: str = typer.Argument(..., help="Second PDB file or id"),
    thickness: Thickness = None,
    resolution: Resolution = None,
    se: SkeletonSE = None,
    growth_shape: GrowthShape = None,
    box_max: BoxMax = None,
    fit_window: FitWindow = None,
    selector: Selector = None,
    face_selector: FaceSelector = None,
    face_resolution: FaceResolution = None,
    rho_threshold: RhoThreshold = None,
    delta_threshold: DeltaThreshold = None,
    include_hetero: IncludeHetero = None,
    output_format: Format = None,
    threads: Threads = None,
    cache_dir: CacheDir = None,
):
    """Compare two structures; exit 0 if similar, 1 if dissimilar."""
    config = _run_config(
        ctx,
        **_method1_flags(thickness, resolution, se, growth_shape, box_max, fit_window, selector),
        face_selector=face_selector,
        face_resolution=face_resolution,
        rho_threshold=rho_threshold,
        delta_threshold=delta_threshold,
        include_hetero=include_hetero,
        format=output_format,
        threads=threads,
        cache_dir=cache_dir,
    )
    try:
        label_a, model_a = _load_model(source, config)
        label_b, model_b = _load_model(target, config)
        report = compare(
            model_a,
            model_b,
            config.method1(),
            config.method2(),
            config.thresholds(),
            threads=config.threads,
            labels=(label_a, label_b),
        )
    except (MorphoprotError, OSError) as e:
        _fail(str(e))

    if config.output_format == OutputFormat.CSV:
        typer.echo(reports.reports_to_csv([report]), nl=False)
    elif config.output_format == OutputFormat.TABLE:
        _echo_table(reports.render_table([report]))
    else:
        typer.echo(reports.report_to_json(report))
    raise typer.Exit(EXIT_SIMILAR if report.verdict is Verdict.SIMILAR else EXIT_DISSIMILAR)


def _read_manifest(path: Path) -> list[str]:
    entries = []
    for line in path.read_text(encoding="utf-8").splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            entries.append(line)
    return entries


@app.command()
def batch(
    ctx: typer.Context,
    manifest: Path = typer.Argument(..., help="File with one PDB id or path per line"),
    thickness: Thickness = None,
    resolution: Resolution = None,
    se: SkeletonSE = None,
    growth_shape: GrowthShape = None,
    box_max: BoxMax = None,
    fit_window: FitWindow = None,
    selector: Selector = None,
    face_selector: FaceSelector = None,
    face_resolution: FaceResolution = None,
    rho_threshold: RhoThreshold = None,
    delta_threshold: DeltaThreshold = None,
    include_hetero: IncludeHetero = None,
    output_format: Format = None,
    threads: Threads = None,
    cache_dir: CacheDir = None,
    sort: bool = typer.Option(False, "--sort", help="Order rows most similar first"),
):
    """Compare every pair of structures in a manifest (CSV by default)."""
    config = _run_config(
        ctx,
        **_method1_flags(thickness, resolution, se, growth_shape, box_max, fit_window, selector),
        face_selector=face_selector,
        face_resolution=face_resolution,
        rho_threshold=rho_threshold,
        delta_threshold=delta_threshold,
        include_hetero=include_hetero,
        format=output_format,
        threads=threads,
        cache_dir=cache_dir,
    )
    try:
        entries = _read_manifest(manifest)
        if not entries:
            _fail(f"manifest {manifest} lists no structures")
        models = [_load_model(entry, config) for entry in entries]
        logger.info(f"Batch of {len(models)} structures, {len(models) * (len(models) - 1) // 2} pairs")
        m1, m2, thresholds = config.method1(), config.method2(), config.thresholds()
        cache = SignatureCache(config.cache_path / "signatures")
        results = [
            compare(a, b, m1, m2, thresholds, threads=config.threads, cache=cache, labels=(la, lb))
            for (la, a), (lb, b) in itertools.combinations(models, 2)
        ]
    except (MorphoprotError, OSError) as e:
        _fail(str(e))

    if sort:
        results = rank_pairs(results)
    stats = cache.stats()
    fmt = OutputFormat(config.format) if config.format else OutputFormat.CSV
    typer.echo(f"signatures computed={stats['computations']} cache_hits={stats['hits']}", err=True)

    if fmt == OutputFormat.JSON:
        typer.echo(reports.reports_to_json(results))
    elif fmt == OutputFormat.TABLE:
        _echo_table(reports.render_table(results))
    else:
        typer.echo(reports.reports_to_csv(results), nl=False)


@app.command()
def render(
    ctx: typer.Context,
    source: str = typer.Argument(..., help="PDB file or id"),
    what: RenderTarget = typer.Argument(..., help="slices, skeleton or faces"),
    out_dir: Path = typer.Argument(..., help="Directory for the PGM files"),
    thickness: Thickness = None,
    resolution: Resolution = None,
    se: SkeletonSE = None,
    growth_shape: GrowthShape = None,
    selector: Selector = None,
    face_selector: FaceSelector = None,
    face_resolution: FaceResolution = None,
    include_hetero: IncludeHetero = None,
    threads: Threads = None,
    cache_dir: CacheDir = None,
):
    """Write slice rasters, the stacked skeleton or the six faces as PGM files."""
    config = _run_config(
        ctx,
        slice_thickness=thickness,
        resolution=resolution,
        skeleton_shape=se,
        growth_shape=growth_shape,
        selector=selector,
        face_selector=face_selector,
        face_resolution=face_resolution,
        include_hetero=include_hetero,
        threads=threads,
        cache_dir=cache_dir,
    )
    written = []
    try:
        _, model = _load_model(source, config)
        if what == RenderTarget.FACES:
            params = config.method2()
            cloud = normalize(select_points(model, params.selector))
            faces = project_faces(cloud, params.resolution, params.stroke_radius, params.trace)
            for name, grid in faces.items():
                written.append((out_dir / f"face_{name}.pgm", grid))
        else:
            stack = stacked_skeleton(model, config.method1(), config.threads)
            if what == RenderTarget.SLICES:
                for i, record in enumerate(stack.slices):
                    written.append((out_dir / f"slice_{i:03d}.pgm", record.raster))
            else:
                written.append((out_dir / "stacked.pgm", stack.grid))
        for path, grid in written:
            _write_grid(path, grid)
    except (MorphoprotError, OSError) as e:
        _fail(str(e))

    for path, _ in written:
        typer.echo(os.fspath(path))


if __name__ == "__main__":
    app()
