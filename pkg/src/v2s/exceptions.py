class V2SError(Exception):
    """Base class for errors raised by this package."""


class AudioFormatError(V2SError, ValueError):
    pass


class AnalysisError(V2SError, ValueError):
    pass


class SynthesisError(V2SError, ValueError):
    pass


class ContainerError(V2SError, ValueError):
    """Bad magic, unsupported version or malformed binary container."""


class ChecksumError(ContainerError):
    pass


class VersionMismatchError(ContainerError):
    pass


class DonorError(V2SError, ValueError):
    pass
