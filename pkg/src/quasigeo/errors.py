"""Exception hierarchy and the CLI exit-code table."""


class QuasiGeoError(Exception):
    """Base class for every error raised by the package."""

    exit_code = 1


# mesh-core
class ParseError(QuasiGeoError):
    exit_code = 10

    def __init__(self, message, line=None, path=None):
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where += f"{path}"
        if line is not None:
            where += f":{line}"
        super().__init__(f"{where}: {message}" if where else message)


class IndexOutOfRange(QuasiGeoError):
    exit_code = 11


class UnreferencedVertex(QuasiGeoError):
    exit_code = 12


class NonFiniteField(QuasiGeoError):
    exit_code = 13


class NonManifoldMesh(QuasiGeoError):
    exit_code = 14


# geodesic
class Disconnected(QuasiGeoError):
    exit_code = 20


class InvalidEndpoints(QuasiGeoError):
    exit_code = 21


class EndpointNode(QuasiGeoError):
    exit_code = 22


class ZeroTotalAngle(QuasiGeoError):
    exit_code = 23


class NegativeEntry(QuasiGeoError):
    exit_code = 24


class FingerprintMismatch(QuasiGeoError):
    exit_code = 25


class CorruptCache(QuasiGeoError):
    exit_code = 26


# spectrum
class NonSymmetric(QuasiGeoError):
    exit_code = 30


class ConvergenceFailure(QuasiGeoError):
    exit_code = 31


class K0OutOfRange(QuasiGeoError):
    exit_code = 32


# analysis / eval
class ShapeMismatch(QuasiGeoError):
    exit_code = 40


#: exit codes for failures that are not package errors
EXIT_USAGE = 2
EXIT_FILE_NOT_FOUND = 3
EXIT_IO = 4

EXIT_CODES = {
    "ok": 0,
    "usage": EXIT_USAGE,
    "FileNotFoundError": EXIT_FILE_NOT_FOUND,
    "OSError": EXIT_IO,
    **{
        cls.__name__: cls.exit_code
        for cls in (
            ParseError, IndexOutOfRange, UnreferencedVertex, NonFiniteField,
            NonManifoldMesh, Disconnected, InvalidEndpoints, EndpointNode,
            ZeroTotalAngle, NegativeEntry, FingerprintMismatch, CorruptCache,
            NonSymmetric, ConvergenceFailure, K0OutOfRange, ShapeMismatch,
        )
    },
}
