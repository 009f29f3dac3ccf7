"""Exception types raised across the simulator."""


class SimulatorError(Exception):
    pass


# device
class WrongAmplitude(SimulatorError, ValueError):
    pass


class PulseTooShort(SimulatorError, ValueError):
    pass


class NeverFormed(SimulatorError, RuntimeError):
    pass


class DegenerateTable(SimulatorError, ValueError):
    pass


# crossbar
class OutOfRange(SimulatorError, IndexError):
    pass


class AlreadySelected(SimulatorError, RuntimeError):
    pass


class NotSelected(SimulatorError, RuntimeError):
    pass


class InsufficientCells(SimulatorError, RuntimeError):
    pass


# controller
class InvalidTarget(SimulatorError, ValueError):
    pass


class DeltaRangeError(SimulatorError, ValueError):
    pass


class MissingLedgerEntry(SimulatorError, KeyError):
    pass


# automaton
class InvalidState(SimulatorError, ValueError):
    pass


# analysis
class EmptyWorkload(SimulatorError, ValueError):
    pass


class ConfigError(SimulatorError, ValueError):
    pass
