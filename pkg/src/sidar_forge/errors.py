"""Exception hierarchy shared by all sidar_forge modules."""


class SidarError(Exception):
    """Base class for every error raised by sidar_forge."""


# geometry
class DegenerateProjection(SidarError, ValueError):
    pass


class InvalidDimension(SidarError, ValueError):
    pass


class PlaneThroughCenter(SidarError, ValueError):
    pass


class SingularCalibration(SidarError, ValueError):
    pass


class DegenerateConfiguration(SidarError, ValueError):
    pass


class SingularHomography(SidarError, ValueError):
    pass


# sampling / rendering
class InvalidConfig(SidarError, ValueError):
    pass


class TextureMissing(SidarError, FileNotFoundError):
    pass


class BudgetInvalid(SidarError, ValueError):
    pass


# dataset io
class EmptyCorpus(SidarError):
    pass


class UnreadableImage(SidarError):
    pass


class IoFailure(SidarError, OSError):
    pass


class IncompleteArtifacts(SidarError, ValueError):
    pass


class CorruptManifest(SidarError, ValueError):
    pass


class MissingArtifact(SidarError, FileNotFoundError):
    def __init__(self, path, message=None):
        self.path = str(path)
        super().__init__(message or f"missing artifact: {self.path}")
