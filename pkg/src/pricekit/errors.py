"""Exception types shared across the engine."""


class PricekitError(Exception):
    """Base class for all engine errors."""


# --- market data ---

class MalformedRow(PricekitError):
    def __init__(self, line_no: int, reason: str = ""):
        self.line_no = line_no
        super().__init__(f"malformed row at line {line_no}: {reason}")


class DuplicateQuote(PricekitError):
    def __init__(self, key):
        self.key = key
        super().__init__(f"duplicate quote key {key}")


class EmptyChain(PricekitError):
    pass


class KindMismatch(PricekitError):
    pass


# --- characteristic functions / transforms ---

class NonFiniteResult(PricekitError):
    pass


class IntegrationDiverged(PricekitError):
    pass


class NonFiniteGrid(PricekitError):
    pass


class StrikeOutOfGrid(PricekitError):
    pass


# --- calibration ---

class EmptyQuoteSet(PricekitError):
    pass


class NoFiniteObjective(PricekitError):
    pass


# --- curves ---

class InsufficientPoints(PricekitError):
    pass


class NonMonotoneTenors(PricekitError):
    pass
