"""Python surface of the VAE-regression conformal detection core."""

from vaereg._core import (
    CalibrationSet,
    IoError,
    Model,
    NumericError,
    ValidationError,
    controller,
    cusum_update,
    fgsm,
    gaussian_kl,
    load_model,
    log_martingale,
    make_model,
    nonconformity,
    render_scene,
    reparameterize,
    save_model,
    step_vehicle,
    threshold_detect,
    train_model,
)

__all__ = [
    "CalibrationSet",
    "IoError",
    "Model",
    "NumericError",
    "ValidationError",
    "controller",
    "cusum_update",
    "fgsm",
    "gaussian_kl",
    "load_model",
    "log_martingale",
    "make_model",
    "nonconformity",
    "render_scene",
    "reparameterize",
    "save_model",
    "step_vehicle",
    "threshold_detect",
    "train_model",
]
