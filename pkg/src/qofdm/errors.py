"""Exception hierarchy shared by all qofdm modules."""


class QofdmError(Exception):
    """Base class for every error raised by this package."""


class ConfigurationError(QofdmError, ValueError):
    """Invalid parameter or configuration value.

    ``key`` and ``line`` are filled in when the error originates from a
    configuration file so the CLI can point at the offending entry.
    """

    def __init__(self, message, key=None, line=None):
        self.key = key
        self.line = line
        where = []
        if key is not None:
            where.append(f"key '{key}'")
        if line is not None:
            where.append(f"line {line}")
        if where:
            message = f"{' at '.join(where)}: {message}"
        super().__init__(message)


class DomainError(QofdmError, ValueError):
    """Input outside the mathematical domain of an operation (NaN, empty, zero power)."""


class FramingError(QofdmError, ValueError):
    """Payload or bit sequence cannot be framed (odd bit count, empty payload)."""


class SyncError(QofdmError):
    """Preamble correlation peak fell below the detection threshold."""

    def __init__(self, peak, threshold):
        self.peak = peak
        self.threshold = threshold
        super().__init__(f"correlation peak {peak:.3f} below threshold {threshold:.3f}")


class EqualizerSingularityError(QofdmError):
    """Channel estimate vanished on an occupied carrier."""


class DegeneratePointError(QofdmError):
    """Every frame of a BER point was lost, so no BER can be formed."""

    def __init__(self, message, diagnostics=None):
        self.diagnostics = diagnostics or {}
        super().__init__(message)
