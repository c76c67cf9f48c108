"""Exception hierarchy shared by every module."""


class MarketError(Exception):
    """Base class for all errors raised by hzmarket."""


class InvalidMarket(MarketError):
    pass


class NegativeValue(InvalidMarket):
    pass


class CapacityMismatch(InvalidMarket):
    pass


class EmptyMarket(InvalidMarket):
    pass


class DimensionMismatch(MarketError):
    pass


class IndeterminateSign(MarketError):
    """An interval straddles zero, so its sign cannot be certified."""


class NoSolutionFound(MarketError):
    """The seeded solver did not converge; this says nothing about existence."""


class InfeasibleDemand(MarketError):
    pass


class DegeneratePrices(MarketError):
    pass


class PreconditionViolated(MarketError):
    pass


class UtilityMismatch(MarketError):
    pass


class InfeasibleBundleSystem(MarketError):
    pass


class DecompositionFailed(MarketError):
    pass


class NotAnEquilibrium(MarketError):
    pass


class TooManyItems(MarketError):
    pass


class TooManyAgents(MarketError):
    pass


class IncompleteSearch(MarketError):
    def __init__(self, message, tried=0):
        super().__init__(message)
        self.tried = tried


class NonUniqueTopItem(MarketError):
    pass


class UnpricedItem(MarketError):
    pass


class ProposalExceedsAnchor(MarketError):
    pass


class StructureInconsistent(MarketError):
    pass


class NonUnitCapacities(MarketError):
    pass
