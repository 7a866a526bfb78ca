"""Encoder + regressor composition over dataset frames."""

import numpy as np

from .encoders import encode_fiducial
from .errors import ValidationError
from .regressor import predict


def latents_for_frames(bundle, frames):
    """Latent matrix (n, width) for a list of frames under one encoder."""
    if not frames:
        raise ValidationError("no frames to encode")
    if bundle.kind == "fiducial":
        return np.stack([encode_fiducial(f.detections) for f in frames])
    images = np.stack([f.image_float for f in frames])
    return bundle.encode_image_batch(images)


class Pipeline:
    """One deployable model: encoder bundle feeding the trained regressor."""

    def __init__(self, bundle, regressor_model):
        if regressor_model.input_width != bundle.width:
            raise ValidationError(
                f"regressor width {regressor_model.input_width} does not match "
                f"encoder width {bundle.width}")
        self.bundle = bundle
        self.regressor = regressor_model

    def predict_frames(self, frames):
        return predict(self.regressor, latents_for_frames(self.bundle, frames))
