class ExporterError(Exception):
    """Base class for everything this package raises on purpose."""


class MissingDatasetError(ExporterError):
    pass


class ModelLoadFailureError(ExporterError):
    pass


class CheckpointMismatchError(ExporterError):
    pass
