"""Continuous level-of-detail Gaussian splatting."""

from ._core import (
    DEFAULT_TAU,
    Camera,
    CameraSet,
    ClodgsError,
    ConfigError,
    IoError,
    RenderError,
    Scene,
    TrainError,
    adaptive_weight,
    attenuate_opacity,
    camera_set,
    default_train_config,
    load_camera_set,
    load_ply,
    look_at,
    make_grid,
    orbit_camera,
    perturb_scene,
    psnr,
    quality_curve,
    reg_loss,
    render,
    save_ply,
    ssim,
    summarize,
    synthetic_scene,
    target_ratio,
    train,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
