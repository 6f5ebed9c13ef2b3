"""Exception hierarchy shared by the crypto layers, protocols and the CLI."""


class PivotError(Exception):
    exit_code = 3


class ConfigError(PivotError):
    exit_code = 2


class ProtocolError(PivotError):
    exit_code = 3


class VerificationError(PivotError):
    exit_code = 4


# homomorphic layer
class EncodingError(ConfigError):
    pass


class ScaleError(ProtocolError):
    pass


class ThresholdError(ProtocolError):
    pass


class CombinationError(ProtocolError):
    pass


# secret sharing layer
class ReconstructionError(ProtocolError):
    pass


class TripleReuseError(ProtocolError):
    pass


class DealerExhaustedError(ProtocolError):
    pass


class MaskedOverflowError(ProtocolError):
    pass


class TransportTimeout(ProtocolError):
    pass
