import functools
import traceback
from typing import Any, Callable, TypeVar

from pufe.core.exceptions import PufeError
from pufe.core.logging import get_logger

logger = get_logger(__name__)

F = TypeVar("F", bound=Callable[..., Any])


def format_diagnostic(exc: BaseException) -> str:
    """Render an exception as the one-line diagnostic printed by the CLI."""
    if isinstance(exc, PufeError):
        detail = exc.detail
        kind = exc.__class__.__name__
    else:
        detail = str(exc) or exc.__class__.__name__
        kind = "UnexpectedError"
    return f"error: {kind}: {' '.join(detail.split())}"


def with_error_handling(func: F) -> F:
    """Decorator to add error handling to any function.

    Library errors are logged and re-raised unchanged; anything else is
    logged with its traceback and wrapped in a PufeError.

    Args:
        func: The function to wrap with error handling

    Returns:
        Wrapped function with error handling
    """
    @functools.wraps(func)
    def wrapper(*args: Any, **kwargs: Any) -> Any:
        try:
            return func(*args, **kwargs)
        except PufeError as exc:
            logger.error("pufe error", function=func.__name__, **exc.to_error_detail().model_dump())
            raise
        except Exception as exc:
            logger.error(
                "unhandled exception",
                function=func.__name__,
                error=str(exc),
                traceback=traceback.format_exc(),
            )
            raise PufeError(detail=f"{exc.__class__.__name__}: {exc}") from exc

    return wrapper  # type: ignore[return-value]
