"""Sparse tensor PCA toolkit for unsupervised feature selection.

Two solver families over dense complex tensors -- a direction-set solver
(variants 1sd / 2sd / md) and a per-slice transform-domain solver (dir1 /
dir2) -- plus synthetic benchmark generators, an evaluation protocol, and a
batch experiment CLI.
"""

__version__ = "0.1.0"

from . import dp, mp, synthdata
from ._kernels import BACKEND as KERNEL_BACKEND
from .dp import DpConfig, DpModel, ScoreMap
from .dtf import read_dataset, read_dtf, write_dataset, write_dtf
from .evaluation import GridSpec, grid_run
from .mp import MpConfig, MpModel
from .synthdata import ArraySignalSpec, LabeledTensorDataset, OrbitSpec, bcv, gen_array_signal, gen_orbit
from .tensor import (
    DIR1,
    DIR2,
    IDENTITY,
    DenseTensor,
    DirectionSet,
    OrderSet,
    TransformMatrix,
    centralize,
    dir_inner,
    dir_outer,
    fold,
    mode3_product,
    rotate,
    star_m,
    unfold,
)

__all__ = [
    "__version__",
    "KERNEL_BACKEND",
    "DenseTensor",
    "DirectionSet",
    "OrderSet",
    "TransformMatrix",
    "IDENTITY",
    "DIR1",
    "DIR2",
    "unfold",
    "fold",
    "dir_inner",
    "dir_outer",
    "mode3_product",
    "star_m",
    "rotate",
    "centralize",
    "DpConfig",
    "DpModel",
    "MpConfig",
    "MpModel",
    "ScoreMap",
    "OrbitSpec",
    "ArraySignalSpec",
    "LabeledTensorDataset",
    "gen_orbit",
    "gen_array_signal",
    "bcv",
    "GridSpec",
    "grid_run",
    "write_dtf",
    "read_dtf",
    "write_dataset",
    "read_dataset",
    "dp",
    "mp",
    "synthdata",
]
