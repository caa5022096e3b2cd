from typing import Any, Dict, List, Optional

from pydantic import BaseModel


class ErrorDetail(BaseModel):
    """Model for detailed error information."""
    loc: List[str] = []
    msg: str
    type: str


class PufeError(Exception):
    """Base exception for library-specific exceptions.

    This class serves as the base for all exceptions raised by pufe.
    It carries a detail message, the process exit code the CLI should
    return, and optional structured context for logging.
    """
    def __init__(
        self,
        detail: str = "An unexpected error occurred",
        exit_code: int = 1,
        context: Optional[Dict[str, Any]] = None,
    ):
        self.detail = detail
        self.exit_code = exit_code
        self.context = context or {}
        super().__init__(detail)

    def to_error_detail(self) -> ErrorDetail:
        """Convert to a serializable error detail."""
        return ErrorDetail(
            loc=[str(k) for k in self.context],
            msg=self.detail,
            type=self.__class__.__name__,
        )


class ContractViolationError(PufeError):
    """Exception raised when an operation's precondition is not met."""
    def __init__(
        self,
        detail: str = "Contract violation",
        context: Optional[Dict[str, Any]] = None,
    ):
        super().__init__(detail=detail, exit_code=2, context=context)


class ConfigurationError(PufeError):
    """Exception raised when there is a configuration error."""
    def __init__(
        self,
        detail: str = "Invalid configuration",
        context: Optional[Dict[str, Any]] = None,
    ):
        super().__init__(detail=detail, exit_code=3, context=context)


class DatasetParseError(PufeError):
    """Exception raised when a dataset file cannot be parsed."""
    def __init__(
        self,
        detail: str = "Dataset parse error",
        line_number: Optional[int] = None,
        path: Optional[str] = None,
    ):
        self.line_number = line_number
        self.path = path
        if line_number is not None:
            detail = f"{detail} (line {line_number})"
        if path is not None:
            detail = f"{path}: {detail}"
        super().__init__(detail=detail, exit_code=4, context={"line": line_number, "path": path})


class TrialFailureError(PufeError):
    """Exception raised when an experiment trial fails mid-run.

    The report assembled from the trials that completed is attached so the
    caller can still write it out.
    """
    def __init__(
        self,
        detail: str = "Trial failed",
        trial: Optional[int] = None,
        partial_report: Any = None,
    ):
        self.trial = trial
        self.partial_report = partial_report
        super().__init__(detail=detail, exit_code=5, context={"trial": trial})
