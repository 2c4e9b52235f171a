from .estimates import EstimateService, EstimateValue
from .exact_kernel import GreenValue, KernelCeilingError, KernelService, KernelTable, WalkSpec
from .ratio_report import RatioRecord, RatioReport, RatioService
from .root_system import RankParams, RootSystem
from .saddle import GreenSaddle, SaddleService, SaddleSolution
from .scalars import QSqrt, ScalarQ
from .spectral import SpectralPoint, SpectralService
from .weight_laurent import IdentityError, IdentityReport, IdentityService, LaurentPoly

__all__ = [
    "EstimateService",
    "EstimateValue",
    "GreenSaddle",
    "GreenValue",
    "IdentityError",
    "IdentityReport",
    "IdentityService",
    "KernelCeilingError",
    "KernelService",
    "KernelTable",
    "LaurentPoly",
    "QSqrt",
    "RankParams",
    "RatioRecord",
    "RatioReport",
    "RatioService",
    "RootSystem",
    "SaddleService",
    "SaddleSolution",
    "ScalarQ",
    "SpectralPoint",
    "SpectralService",
    "WalkSpec",
]
