"""HTTP interface for the viewer: mesh and texture delivery, ray picking,
and classification.

The service holds one immutable cube; every classification request is pure
with respect to server state (the only mutable bit is which overlay counts
as "latest" for preview purposes). Requests run in the server's thread
pool, so concurrent clicks are fine.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from fastapi import FastAPI, Response
from fastapi.responses import FileResponse, JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, Field, model_validator

from . import __version__, geometry, pipeline, sam
from .cube import SpectralCube
from .errors import UserInputError
from .geometry import FaceIdMap, Mesh
from .imaging import Texture, load_texture
from .manifest import ProjectManifest


# ---------------------------------------------------------------------------
# Mask run-length encoding: row-major scan, alternating run lengths starting
# with a False run (which may be 0). Runs sum to exactly width * height.


def encode_mask_rle(mask: np.ndarray) -> list[int]:
    flat = np.asarray(mask, dtype=bool).ravel()
    if flat.size == 0:
        return []
    changes = np.nonzero(np.diff(flat))[0] + 1
    bounds = np.concatenate([[0], changes, [flat.size]])
    runs = np.diff(bounds).tolist()
    if flat[0]:
        runs.insert(0, 0)
    return [int(r) for r in runs]


def decode_mask_rle(counts, width: int, height: int) -> np.ndarray:
    total = sum(counts)
    if total != width * height:
        raise ValueError(f"RLE sums to {total}, expected {width * height}")
    if any(c < 0 for c in counts):
        raise ValueError("RLE runs must be non-negative")
    flat = np.zeros(width * height, dtype=bool)
    pos = 0
    value = False
    for run in counts:
        if value:
            flat[pos : pos + run] = True
        pos += run
        value = not value
    return flat.reshape(height, width)


# ---------------------------------------------------------------------------
# Request/response bodies


class RayRef(BaseModel):
    origin: tuple[float, float, float]
    direction: tuple[float, float, float]


class ClassifyRequest(BaseModel):
    uv: tuple[float, float] | None = None
    texel: tuple[int, int] | None = None
    ray: RayRef | None = None
    theta_max: float = Field(default=sam.DEFAULT_THETA_MAX, ge=0.0)
    radius: int = Field(default=0, ge=0)
    connected_only: bool = False

    @model_validator(mode="after")
    def _exactly_one_reference(self):
        given = [x is not None for x in (self.uv, self.texel, self.ray)]
        if sum(given) != 1:
            raise ValueError("exactly one of uv, texel, ray must be given")
        return self


class MaskRLE(BaseModel):
    width: int
    height: int
    counts: list[int]


class ClassifyStats(BaseModel):
    count: int
    min_angle: float | None
    median_angle: float | None
    faces_selected: int


class ClassifyResponse(BaseModel):
    mask: MaskRLE
    stats: ClassifyStats
    texel: tuple[int, int]
    uv: tuple[float, float]
    reference_spectrum: list[float]
    theta_max: float
    radius: int


# ---------------------------------------------------------------------------
# Served state


@dataclass
class ServiceAssets:
    manifest: ProjectManifest
    mesh: Mesh
    cube: SpectralCube
    facemap: FaceIdMap
    vis_calib: Texture
    uvf_calib: Texture
    workers: int = 1
    _previews: dict = field(default_factory=dict)
    _overlay_lock: threading.Lock = field(default_factory=threading.Lock)
    _last_mask: np.ndarray | None = None


def build_assets(manifest: ProjectManifest, workers: int = 1, out=None) -> ServiceAssets:
    """Load everything the service needs; requires calibrate + build-cube runs."""
    out_root = manifest.output_dir if out is None else Path(out)
    calib_dir = pipeline.latest_dir(out_root, pipeline.STAGE_CALIBRATE)
    if calib_dir is None:
        raise pipeline.MissingStageError(
            f"no calibrated textures under {out_root}; run `calibrate` first"
        )
    cube, facemap = pipeline.load_latest_cube(manifest, out)
    return ServiceAssets(
        manifest=manifest,
        mesh=geometry.load_mesh(manifest.mesh_path),
        cube=cube,
        facemap=facemap,
        vis_calib=load_texture(calib_dir / pipeline.VIS_CALIB_NAME, "VIS"),
        uvf_calib=load_texture(calib_dir / pipeline.UVF_CALIB_NAME, "UVF"),
        workers=workers,
    )


def tone_map_preview(tex: Texture, valid: np.ndarray) -> tuple[np.ndarray, list, list]:
    """Min-max tone mapping per channel over valid texels, to 8-bit.

    Returns (uint8 image, per-channel minima, per-channel maxima); the
    mapping parameters go into response headers so the thin client never
    re-derives values.
    """
    data = tex.data
    los, his = [], []
    out = np.zeros(data.shape, dtype=np.uint8)
    for c in range(tex.channels):
        plane = data[:, :, c]
        values = plane[valid]
        lo = float(values.min()) if values.size else 0.0
        hi = float(values.max()) if values.size else 0.0
        los.append(lo)
        his.append(hi)
        if hi > lo:
            scaled = np.clip((plane - lo) / (hi - lo), 0.0, 1.0)
            out[:, :, c] = np.where(valid, np.round(scaled * 255.0), 0).astype(np.uint8)
    return out, los, his


def create_app(assets: ServiceAssets | None = None, ui_dir=None) -> FastAPI:
    """Build the FastAPI app; `assets=None` serves 503 until assets are set."""
    app = FastAPI(title="samtex service", version=__version__)
    app.state.assets = assets

    def _assets() -> ServiceAssets | None:
        return app.state.assets

    @app.get("/health")
    def health():
        if _assets() is None:
            return JSONResponse(status_code=503, content={"status": "loading"})
        return {"status": "ok", "version": __version__}

    @app.get("/mesh")
    def mesh():
        a = _assets()
        if a is None:
            return JSONResponse(status_code=503, content={"status": "loading"})
        return FileResponse(a.manifest.mesh_path, media_type="text/plain")

    @app.get("/texture/{name}")
    def texture(name: str):
        a = _assets()
        if a is None:
            return JSONResponse(status_code=503, content={"status": "loading"})
        if name == "overlay":
            with a._overlay_lock:
                mask = a._last_mask
            if mask is None:
                return JSONResponse(
                    status_code=404, content={"detail": "no classification yet"}
                )
            png = _encode_png(sam.make_overlay(mask))
            return Response(content=png, media_type="image/png")
        if name not in ("vis_calib", "uvf_calib"):
            return JSONResponse(status_code=404, content={"detail": f"unknown texture {name}"})
        if name not in a._previews:
            tex = a.vis_calib if name == "vis_calib" else a.uvf_calib
            img, los, his = tone_map_preview(tex, a.cube.valid)
            a._previews[name] = (_encode_png(img), los, his)
        png, los, his = a._previews[name]
        headers = {
            "X-Tonemap-Min": ",".join(repr(v) for v in los),
            "X-Tonemap-Max": ",".join(repr(v) for v in his),
        }
        return Response(content=png, media_type="image/png", headers=headers)

    @app.post("/classify", response_model=ClassifyResponse)
    def classify(req: ClassifyRequest):
        a = _assets()
        if a is None:
            return JSONResponse(status_code=503, content={"status": "loading"})
        m = a.manifest
        try:
            if req.ray is not None:
                hit = geometry.pick(
                    a.mesh,
                    req.ray.origin,
                    req.ray.direction,
                    atlas_size=(m.atlas_width, m.atlas_height),
                    flip_v=m.flip_v,
                )
                if hit is None:
                    return JSONResponse(
                        status_code=409, content={"reason": "no surface hit"}
                    )
                texel, uv = hit.texel, (float(hit.uv[0]), float(hit.uv[1]))
            else:
                texel, uv = pipeline.resolve_reference_texel(
                    m, uv=req.uv, texel=req.texel
                )
            reference, _angles, mask, faces, stats = pipeline.classify_at_texel(
                a.cube,
                a.facemap,
                texel,
                req.theta_max,
                radius=req.radius,
                workers=a.workers,
                connected_only=req.connected_only,
            )
        except UserInputError as exc:
            return JSONResponse(status_code=409, content={"reason": str(exc)})
        with a._overlay_lock:
            a._last_mask = mask
        return ClassifyResponse(
            mask=MaskRLE(
                width=a.cube.width,
                height=a.cube.height,
                counts=encode_mask_rle(mask),
            ),
            stats=ClassifyStats(
                count=stats["texels_selected"],
                min_angle=stats["min_angle"],
                median_angle=stats["median_angle"],
                faces_selected=stats["faces_selected"],
            ),
            texel=texel,
            uv=uv,
            reference_spectrum=[float(x) for x in reference],
            theta_max=req.theta_max,
            radius=req.radius,
        )

    if ui_dir is not None and Path(ui_dir).is_dir():
        app.mount("/ui", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app


def _encode_png(image: np.ndarray) -> bytes:
    import cv2

    arr = image
    if arr.ndim == 3 and arr.shape[2] == 3:
        arr = arr[:, :, ::-1]
    elif arr.ndim == 3 and arr.shape[2] == 4:
        arr = arr[:, :, [2, 1, 0, 3]]
    ok, buf = cv2.imencode(".png", arr)
    if not ok:
        raise RuntimeError("PNG encoding failed")
    return buf.tobytes()


def serve(manifest: ProjectManifest, port: int, workers: int = 1, ui_dir=None, out=None):
    """Blocking entry point used by the CLI `serve` command."""
    import uvicorn

    assets = build_assets(manifest, workers=workers, out=out)
    app = create_app(assets, ui_dir=ui_dir)
    uvicorn.run(app, host="127.0.0.1", port=port, log_level="info")
