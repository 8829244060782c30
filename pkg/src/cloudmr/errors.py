"""Exception hierarchy shared by every cloudmr subsystem."""


class CloudMRError(Exception):
    """Base class for all library errors."""


# block store
class StoreError(CloudMRError):
    pass


class DuplicateFile(StoreError):
    pass


class UnknownFile(StoreError):
    pass


class NoNodes(StoreError):
    pass


class BlockUnavailable(StoreError):
    pass


class UnknownNode(StoreError):
    pass


class DuplicateNode(StoreError):
    pass


# classifier
class InvalidConfig(CloudMRError):
    pass


class EmptyBatch(CloudMRError):
    pass


# engine
class DecodeError(CloudMRError):
    pass


class UnknownFunction(CloudMRError):
    pass


# timing model
class NegativeInput(CloudMRError, ValueError):
    pass


class NonPositiveWindow(CloudMRError, ValueError):
    pass


class InvalidProbability(CloudMRError, ValueError):
    pass


# query layer
class CoercionError(CloudMRError):
    def __init__(self, message: str, row: int | None = None, offset: int | None = None):
        super().__init__(message)
        self.row = row
        self.offset = offset
