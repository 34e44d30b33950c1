"""Exception types shared across the package."""

from __future__ import annotations


class MovexError(Exception):
    """Base class for every error raised by movex."""


class InvalidInputError(MovexError, ValueError):
    pass


class ParseError(MovexError, ValueError):
    """Malformed input file. ``lineno`` is 1-based, or None for whole-file problems."""

    def __init__(self, message: str, lineno: int | None = None, source: str | None = None):
        self.lineno = lineno
        self.source = source
        where = ""
        if source:
            where += f"{source}:"
        if lineno is not None:
            where += f"line {lineno}:"
        super().__init__(f"{where} {message}" if where else message)


class BufferOverflowError(MovexError):
    pass


class ConfigError(MovexError, ValueError):
    pass


class PipelineError(MovexError):
    """Failure inside the pipeline loop, tagged with the frame and module it came from."""

    def __init__(self, frame_index: int, module: str, cause: BaseException | str):
        self.frame_index = frame_index
        self.module = module
        self.cause = cause
        super().__init__(f"[{module}] frame {frame_index}: {cause}")
