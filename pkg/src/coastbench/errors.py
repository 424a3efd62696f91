"""Exception types shared across the toolkit."""


class CoastBenchError(Exception):
    """Base class for toolkit-specific failures."""


class BundleFormatError(CoastBenchError):
    """A raster/mask bundle on disk violates the format contract."""


class NoFeasibleWindowError(CoastBenchError):
    """Rejection sampling exhausted its attempt budget without a valid crop."""


class EmptyRegionError(CoastBenchError):
    """A metric was requested over a region containing no evaluable pixels."""


class PredictorError(CoastBenchError):
    """An external or wrapped predictor failed on a specific image."""

    def __init__(self, image_id: str, message: str):
        super().__init__(f"predictor failed on image {image_id!r}: {message}")
        self.image_id = image_id
