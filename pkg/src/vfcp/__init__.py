"""Error-bounded lossy compression for 2D time-varying vector fields with
exact preservation of all critical-point trajectories."""

from .codec import (Archive, CompressStats, Config, DecodeStats, compress,
                    decompress, decompress_with_stats, quantize_eb,
                    reconstruct_fixed, tau_from_eps)
from .ebounds import (EbAssignment, derive_all, derive_triangle_eb,
                      derive_vertex_eb, face_eb_sound)
from .field import (FieldSeries, FieldError, FixedField, QualityReport,
                    SYNTHETIC_KINDS, from_fixed, gen_synthetic, load_meta,
                    load_raw, psnr, save_raw, to_fixed)
from .mop import MopConfig, entropy_h0, select_modes
from .predicates import (CriticalFaceSet, build_critical_face_set,
                         crossing_point, face_has_cp, face_has_cp_values,
                         orient2_sos, origin_barycentric)
from .predictors import (CflFactors, PredictorContext, bilinear, lorenzo3d,
                         sl_departure, sl_predict)
from .tracking import (ResidualStats, TopologyError, TrajectoryGraph,
                       VerifyReport, extract_trajectories, residual_stats,
                       verify, write_trajectory_csv)

__version__ = "1.0.0"

__all__ = [
    "Archive", "CflFactors", "CompressStats", "Config", "CriticalFaceSet",
    "DecodeStats", "EbAssignment", "FieldError", "FieldSeries", "FixedField",
    "MopConfig", "PredictorContext", "QualityReport", "ResidualStats",
    "SYNTHETIC_KINDS", "TopologyError", "TrajectoryGraph", "VerifyReport",
    "bilinear", "build_critical_face_set", "compress", "crossing_point",
    "decompress", "decompress_with_stats", "derive_all", "derive_triangle_eb",
    "derive_vertex_eb", "entropy_h0", "extract_trajectories", "face_eb_sound",
    "face_has_cp",
    "face_has_cp_values", "from_fixed", "gen_synthetic", "load_meta",
    "load_raw", "lorenzo3d", "orient2_sos", "origin_barycentric", "psnr",
    "quantize_eb", "reconstruct_fixed", "residual_stats", "save_raw",
    "select_modes", "sl_departure", "sl_predict", "tau_from_eps", "to_fixed",
    "verify", "write_trajectory_csv",
]
