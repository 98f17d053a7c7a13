"""Command-line driver: calibrate, build-cube, classify, serve, make-fixture.

Exit codes: 0 success, 2 validation error (manifest, arguments, bad pick),
1 runtime error.
"""

from __future__ import annotations

import sys
from pathlib import Path

import click

from . import __version__, pipeline
from .errors import UserInputError
from .manifest import load_manifest


def _fail(exc: BaseException, code: int):
    click.echo(f"error: {exc}", err=True)
    sys.exit(code)


def _load(manifest_path):
    try:
        return load_manifest(manifest_path)
    except UserInputError as exc:
        _fail(exc, 2)


manifest_option = click.option(
    "--manifest",
    "manifest_path",
    required=True,
    type=click.Path(path_type=Path),
    help="Project manifest (TOML).",
)
out_option = click.option(
    "--out",
    type=click.Path(path_type=Path),
    default=None,
    help="Output root (default: the manifest's output_dir).",
)
workers_option = click.option(
    "--workers", type=int, default=1, show_default=True, help="Worker thread count."
)


@click.group()
@click.version_option(__version__)
def cli():
    """Multispectral texture calibration and spectral-angle mapping."""


@cli.command()
@manifest_option
@out_option
def calibrate(manifest_path, out):
    """Calibrate the acquired VIS and UVF textures."""
    manifest = _load(manifest_path)
    try:
        result = pipeline.run_calibrate(manifest, out=out)
    except UserInputError as exc:
        _fail(exc, 2)
    except Exception as exc:
        _fail(exc, 1)
    click.echo(f"r_norm: {[float(v) for v in result.norm.r_norm]}")
    click.echo(f"s_target: {[float(v) for v in result.stray.s_target]}")
    click.echo(
        f"uvf clamped values: {result.clamp_report.clamped_values} "
        f"(max undershoot {result.clamp_report.max_undershoot})"
    )
    click.echo(f"wrote {result.run_dir}")


@cli.command("build-cube")
@manifest_option
@out_option
def build_cube(manifest_path, out):
    """Rasterize uv occupancy and assemble the spectral cube."""
    manifest = _load(manifest_path)
    try:
        result = pipeline.run_build_cube(manifest, out=out)
    except UserInputError as exc:
        _fail(exc, 2)
    except Exception as exc:
        _fail(exc, 1)
    click.echo(
        f"cube: {result.cube.width}x{result.cube.height}, B={result.cube.n_bands}, "
        f"valid texels: {int(result.facemap.occupancy.sum())}"
    )
    click.echo(f"wrote {result.run_dir}")


@cli.command()
@manifest_option
@out_option
@click.option("--theta-max", type=float, default=None, help="Angular threshold [rad] (default: manifest value or 0.15).")
@click.option("--radius", type=int, default=0, show_default=True, help="Reference neighborhood radius in texels.")
@click.option("--uv", nargs=2, type=float, default=None, help="Reference as a uv coordinate.")
@click.option("--texel", nargs=2, type=int, default=None, help="Reference as a texel (col row).")
@click.option(
    "--connected-only",
    is_flag=True,
    default=False,
    help="Keep only the connected region around the picked texel.",
)
@click.option(
    "--min-face-fraction",
    type=float,
    default=pipeline.DEFAULT_MIN_FACE_FRACTION,
    show_default=True,
    help="Masked-texel ratio for a face to appear in faces.txt.",
)
@workers_option
def classify(manifest_path, out, theta_max, radius, uv, texel, connected_only, min_face_fraction, workers):
    """Map the region spectrally similar to a picked reference."""
    manifest = _load(manifest_path)
    if uv == ():
        uv = None
    if texel == ():
        texel = None
    try:
        result = pipeline.run_classify(
            manifest,
            uv=uv,
            texel=texel,
            theta_max=theta_max,
            radius=radius,
            workers=workers,
            min_face_fraction=min_face_fraction,
            connected_only=connected_only,
            out=out,
        )
    except UserInputError as exc:
        _fail(exc, 2)
    except Exception as exc:
        _fail(exc, 1)
    stats = result.stats
    click.echo(
        f"selected {stats['texels_selected']} texels "
        f"(min angle {stats['min_angle']}, median {stats['median_angle']}), "
        f"{stats['faces_selected']} faces"
    )
    click.echo(f"wrote {result.run_dir}")


@cli.command()
@manifest_option
@out_option
@click.option("--port", type=int, default=8077, show_default=True)
@click.option(
    "--ui",
    "ui_dir",
    type=click.Path(path_type=Path),
    default=None,
    help="Directory with the built viewer bundle, served under /ui.",
)
@workers_option
def serve(manifest_path, out, port, ui_dir, workers):
    """Serve mesh, textures, and classification over HTTP."""
    manifest = _load(manifest_path)
    from . import service

    try:
        service.serve(manifest, port=port, workers=workers, ui_dir=ui_dir, out=out)
    except UserInputError as exc:
        _fail(exc, 2)
    except Exception as exc:
        _fail(exc, 1)


@cli.command("make-fixture")
@click.option(
    "--out",
    "directory",
    required=True,
    type=click.Path(path_type=Path),
    help="Destination directory for the fixture project.",
)
@click.option("--atlas", type=int, default=1024, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
def make_fixture(directory, atlas, seed):
    """Generate the synthetic two-material fixture with ground truth."""
    from .fixture import make_fixture as make

    try:
        info = make(directory, atlas=atlas, seed=seed)
    except Exception as exc:
        _fail(exc, 1)
    click.echo(
        f"fixture: {info.n_faces} faces, {info.atlas}x{info.atlas} atlas, "
        f"materials split at column {info.split_col}"
    )
    click.echo(f"manifest: {info.manifest_path}")


def main():
    cli(prog_name="samtex")


if __name__ == "__main__":
    main()
