"""samtex: calibrated multispectral texture cubes and spectral-angle
material mapping on uv-parameterized 3D models."""

__version__ = "0.1.0"

from .calibration import (
    ClampReport,
    NormVector,
    ReflectanceCalibrator,
    StrayLight,
    calibrate_uvf,
    calibrate_vis,
    compute_norm,
    stray_from_stats,
)
from .cube import (
    BandDescriptor,
    SpectralCube,
    assemble,
    load_cube,
    neighborhood_mean,
    save_cube,
    spectrum_at,
)
from .geometry import (
    FaceIdMap,
    Mesh,
    MeshLoadError,
    NO_FACE,
    PickResult,
    load_mesh,
    mask_to_faces,
    pick,
    rasterize_occupancy,
    save_mesh,
    texel_center_uv,
    uv_of,
    uv_to_texel,
)
from .imaging import (
    BandMeta,
    ChannelStats,
    PatchRect,
    Texture,
    TextureError,
    load_texture,
    patch_stats,
    read_pfm,
    save_texture,
    write_pfm,
)
from .manifest import ProjectManifest, load_manifest
from .sam import (
    DEFAULT_THETA_MAX,
    ReferenceSpectrum,
    SpectralAngleMapper,
    UNCLASSIFIED,
    classify_multi,
    make_overlay,
    sam_map,
    spectral_angle,
    threshold_region,
)

__all__ = [name for name in dir() if not name.startswith("_")]
