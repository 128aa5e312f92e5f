"""Dual-camera compressive spectral imaging: simulate, reconstruct, evaluate.

A coded-aperture snapshot spectral imager compresses a hyperspectral cube
into one dispersed grayscale frame while a beam-split color camera captures
the same scene directly. This package simulates both measurements, inverts
them with classical solvers (TwIST, GAP-TV) and a self-supervised network
trained only on measurement consistency, and scores reconstructions with
PSNR / SSIM / spectral-angle metrics.
"""

from .core import (
    BAYER_PATTERNS,
    CodedAperture,
    CompressedFrame,
    HsiCube,
    Illuminant,
    RawColorFrame,
    SpectralResponse,
    WavelengthGrid,
    crop_patch,
)
from .cube_io import load_cube, load_frame, load_mask, save_cube, save_frame, save_mask
from .forward import (
    CassiOperator,
    ColorOperator,
    SparseSensingMatrix,
    build_sensing_matrix,
    cassi_adjoint,
    cassi_forward,
    color_adjoint,
    color_forward,
    phi_phit_diagonal,
)
from .metrics import MetricReport, evaluate, psnr, sam, ssim
from .scenes import MaskSpec, SceneSpec, generate_mask, generate_scene
from .selfsup import (
    DualLoss,
    ReconNet,
    TrainConfig,
    TrainReport,
    dual_loss,
    load_checkpoint,
    net_forward,
    reconstruct_selfsup,
    save_checkpoint,
    train_selfsup,
)
from .solvers import (
    SolveReport,
    SolverParams,
    reconstruct_gaptv,
    reconstruct_twist,
    tv_denoise,
)
from .experiment import (
    ExperimentConfig,
    ExperimentReport,
    default_config,
    load_config,
    run_experiment,
    save_config,
)

__version__ = "0.1.0"

__all__ = [
    "BAYER_PATTERNS",
    "CassiOperator",
    "CodedAperture",
    "ColorOperator",
    "CompressedFrame",
    "DualLoss",
    "ExperimentConfig",
    "ExperimentReport",
    "HsiCube",
    "Illuminant",
    "MaskSpec",
    "MetricReport",
    "RawColorFrame",
    "ReconNet",
    "SceneSpec",
    "SolveReport",
    "SolverParams",
    "SparseSensingMatrix",
    "SpectralResponse",
    "TrainConfig",
    "TrainReport",
    "WavelengthGrid",
    "build_sensing_matrix",
    "cassi_adjoint",
    "cassi_forward",
    "color_adjoint",
    "color_forward",
    "crop_patch",
    "default_config",
    "dual_loss",
    "evaluate",
    "generate_mask",
    "generate_scene",
    "load_checkpoint",
    "load_config",
    "load_cube",
    "load_frame",
    "load_mask",
    "net_forward",
    "phi_phit_diagonal",
    "psnr",
    "reconstruct_gaptv",
    "reconstruct_selfsup",
    "reconstruct_twist",
    "run_experiment",
    "sam",
    "save_checkpoint",
    "save_config",
    "save_cube",
    "save_frame",
    "save_mask",
    "ssim",
    "train_selfsup",
    "tv_denoise",
]
