from typing import Any, Dict, Optional


class TableGraftError(Exception):
    """
    Tablegraft Error
    """
    code: int = 1000
    detail: str = "Internal Error"
    exit_code: int = 1

    def __init__(self, detail: Optional[str] = None, code: Optional[int] = None) -> None:
        self.code = code or self.code
        self.detail = detail or self.detail
        super().__init__(self.detail)

    def __str__(self) -> str:
        return f"{self.__class__.__name__}: {self.code} - {self.detail}"


class MissingArtifactError(TableGraftError):
    code = 2000
    detail = "Missing Upstream Artifact"
    exit_code = 2

    def __init__(self, stage: str, path: Any) -> None:
        self.stage = stage
        self.path = path
        super().__init__(f"{path} not found, run `tablegraft {stage}` first")


class ConfigError(TableGraftError):
    code = 3000
    detail = "Invalid Configuration"
    exit_code = 3

    def __init__(self, detail: Optional[str] = None, errors: Optional[Any] = None) -> None:
        self.errors = errors
        super().__init__(detail)


class DatasetError(TableGraftError):
    code = 4000
    detail = "Invalid Dataset"
    exit_code = 4


class DescriptorError(DatasetError):
    code = 4001
    detail = "Invalid Schema Descriptor"


class MissingFileError(DatasetError):
    code = 4002
    detail = "Missing Table File"


class DuplicatePrimaryKeyError(DatasetError):
    code = 4003
    detail = "Duplicate Primary Key"

    def __init__(self, table: str, key: str) -> None:
        self.table = table
        self.key = key
        super().__init__(f"table {table!r} repeats primary key {key!r}")


class ColumnMismatchError(DatasetError):
    code = 4004
    detail = "Descriptor/CSV Column Mismatch"


class UnknownColumnKindError(DatasetError):
    code = 4005
    detail = "Unknown Column Kind"


class ColumnNotFoundError(DatasetError):
    code = 4006
    detail = "Column Not Found"


class ColumnTypeError(DatasetError):
    code = 4007
    detail = "Cell Does Not Match Column Kind"


class EmptyBaseTableError(DatasetError):
    code = 4008
    detail = "Base Table Has No Tuples"


class ModelError(TableGraftError):
    code = 5000
    detail = "Model Error"
    exit_code = 5


class DimensionMismatchError(ModelError):
    code = 5001
    detail = "Dimension Mismatch"


class InsufficientAttributesError(ModelError):
    code = 5002
    detail = "Fewer Than Two Non-Key Attributes"


class NodeSetMismatchError(ModelError):
    code = 5003
    detail = "Attention Records Disagree On Node Set"


class UnknownAttributeError(ModelError):
    code = 5004
    detail = "Unknown Attribute"


class NotABaseNodeError(ModelError):
    code = 5005
    detail = "Node Is Not A Base-Table Node"


class TrainingDivergedError(ModelError):
    code = 5006
    detail = "Training Diverged"

    def __init__(self, stage: str, epoch: int, loss: float, context: Optional[Dict] = None) -> None:
        self.stage = stage
        self.epoch = epoch
        self.loss = loss
        self.context = context or {}
        super().__init__(
            f"{stage} produced a non-finite loss ({loss}) at epoch {epoch}; {self.context}"
        )


class TableGraftWarning(UserWarning): ...


class DataQualityWarning(TableGraftWarning): ...


class ClampWarning(TableGraftWarning): ...


class DegenerateInputWarning(TableGraftWarning): ...


class UnreachableTableWarning(TableGraftWarning): ...
