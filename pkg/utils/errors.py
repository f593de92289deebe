"""
Exception hierarchy and result containers shared by every module.

Each error maps to a CLI exit code and serializes to a structured
JSON object so reports never carry raw tracebacks.
"""

from typing import Any, Dict, List, Optional

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_ANALYSIS = 3


class CloneLabError(Exception):
    """Base class for all simulator and analysis errors"""

    exit_code = EXIT_USAGE

    def __init__(self, message: str, **context: Any):
        super().__init__(message)
        self.message = message
        self.context = context

    def to_dict(self) -> Dict[str, Any]:
        payload = {"error": type(self).__name__, "message": self.message}
        payload.update({k: v for k, v in self.context.items() if v is not None})
        return payload


class DomainError(CloneLabError, ValueError):
    """An argument lies outside the operation's domain"""


class ConfigError(CloneLabError):
    """Invalid configuration or command-line usage"""


class DataError(CloneLabError):
    """Malformed input data; carries the offending path and line"""

    exit_code = EXIT_DATA

    def __init__(self, message: str, path: Optional[str] = None, line: Optional[int] = None):
        location = f"{path or '<input>'}:{line}" if line is not None else (path or "")
        full = f"{location}: {message}" if location else message
        super().__init__(full, path=path, line=line)
        self.path = path
        self.line = line


class AnalysisError(CloneLabError):
    """A statistical procedure could not produce an estimate"""

    exit_code = EXIT_ANALYSIS


class RankDeficientError(AnalysisError):
    """Design matrix of a fit does not have full column rank"""


class NoCrossoverError(AnalysisError):
    """Two fitted curves have no valid Eve-to-Bob crossing in the domain"""


class AnalysisResult:
    """Errors and warnings collected while analysing several states"""

    def __init__(self):
        self.is_valid = True
        self.errors: List[Dict[str, Any]] = []
        self.warnings: List[str] = []

    def add_error(self, state: str, error: CloneLabError):
        self.is_valid = False
        entry = error.to_dict()
        entry["state"] = state
        self.errors.append(entry)

    def add_warning(self, message: str):
        self.warnings.append(message)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "is_valid": self.is_valid,
            "errors": self.errors,
            "warnings": self.warnings,
        }
