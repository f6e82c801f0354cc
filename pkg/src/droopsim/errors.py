"""Exception types shared across the simulator."""


class SimulationError(Exception):
    """Base class for every error this package raises on purpose."""


class NonFiniteError(SimulationError):
    """A state variable became NaN or infinite.

    Usually the symptom of unstable loop gains or a time step that is
    too coarse for the filter hardware being simulated.
    """

    def __init__(self, message, t=None, snapshot=None):
        super().__init__(message)
        self.t = t
        self.snapshot = dict(snapshot) if snapshot else {}


class DcCollapseError(SimulationError):
    """A DC-link voltage fell below half of its nominal value."""

    def __init__(self, message, t=None, snapshot=None):
        super().__init__(message)
        self.t = t
        self.snapshot = dict(snapshot) if snapshot else {}


class NotWarmedUpError(SimulationError):
    """A delay-line or filter was queried before one full fundamental
    period of samples had been pushed through it."""


class WindowMismatchError(SimulationError):
    """Waveform windows disagree in length, sample time, or do not span
    an integer number of fundamental periods."""


class ZeroTotalPowerError(SimulationError):
    """Sharing error is undefined when the total power is not positive."""


class NoReportsError(SimulationError):
    """The coordinator was asked for an average before any unit reported."""


class ScenarioParseError(SimulationError):
    """A scenario file could not be tokenised."""

    def __init__(self, line_no, reason):
        super().__init__(f"line {line_no}: {reason}")
        self.line_no = line_no
        self.reason = reason


class ScenarioValidationError(SimulationError):
    """A scenario parsed fine but describes an impossible setup."""

    def __init__(self, key, reason):
        super().__init__(f"{key}: {reason}")
        self.key = key
        self.reason = reason


class IoError(SimulationError):
    """An artifact writer was asked to emit something it does not have."""
