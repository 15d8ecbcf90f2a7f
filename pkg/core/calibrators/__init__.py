from core.calibrators.base import (
    CalibrationModel, CalibrationRecord, CalibrationSet, Calibrator, build_calibrator, load_calibrator,
    registered_kinds,
)
from core.calibrators.platt import PlattModel, apply_platt, fit_platt
from core.calibrators.isotonic import SmoothedIsotonicModel, fit_smoothed_isotonic, pava
from core.calibrators.confcalib import ConfCalibModel, apply_confcalib, fit_confcalib, wilson_interval
from core.calibrators.mlplatt import (
    MlplattModel, apply_mlplatt, fit_mlplatt, input_derivative, monotonicity_penalty, training_loss,
)

__all__ = [
    "CalibrationModel", "CalibrationRecord", "CalibrationSet", "Calibrator", "build_calibrator",
    "load_calibrator", "registered_kinds",
    "PlattModel", "apply_platt", "fit_platt",
    "SmoothedIsotonicModel", "fit_smoothed_isotonic", "pava",
    "ConfCalibModel", "apply_confcalib", "fit_confcalib", "wilson_interval",
    "MlplattModel", "apply_mlplatt", "fit_mlplatt", "input_derivative", "monotonicity_penalty", "training_loss",
]
