"""Exception hierarchy shared by every framepipe module."""


class FramepipeError(Exception):
    """Base class for all framework errors."""


class PatternError(FramepipeError, ValueError):
    pass


class OverlappingDims(PatternError):
    pass


class MissingDims(PatternError):
    pass


class DimOutOfRange(PatternError):
    pass


class UnknownPattern(FramepipeError, KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else ""


class OrdinalOutOfRange(FramepipeError, IndexError):
    pass


class NdimsMismatch(FramepipeError, ValueError):
    pass


class ShapeMismatch(FramepipeError, ValueError):
    pass


# storage


class InvalidChunkShape(FramepipeError, ValueError):
    pass


class IoFailure(FramepipeError, OSError):
    pass


class ContainerFormatError(IoFailure):
    pass


class BadMagic(ContainerFormatError):
    pass


class UnsupportedVersion(ContainerFormatError):
    pass


# chunk optimizer


class TooLarge(FramepipeError, ValueError):
    pass


# engine and plugins


class UnknownDataset(FramepipeError, KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else ""


class NoAccelerators(FramepipeError, RuntimeError):
    pass


class PluginFailure(FramepipeError, RuntimeError):
    def __init__(self, index, cause):
        super().__init__(f"plugin {index} failed: {cause!r}")
        self.index = index
        self.cause = cause


class ValidationFailed(FramepipeError):
    def __init__(self, report):
        super().__init__("\n".join(str(e) for e in report))
        self.report = report


class InvalidSpec(FramepipeError, ValueError):
    pass


class AnglesMismatch(FramepipeError, ValueError):
    pass


# configurator and profiler


class UnknownPlugin(FramepipeError, KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else ""


class BadIndex(FramepipeError, IndexError):
    pass


class UnknownParam(FramepipeError, KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else ""


class MalformedLog(FramepipeError, ValueError):
    def __init__(self, line_no, reason):
        super().__init__(f"line {line_no}: {reason}")
        self.line_no = line_no
