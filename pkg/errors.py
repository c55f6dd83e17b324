"""
Exception hierarchy shared by every operad-forge module.

Library code raises these; only operad_forge.main() turns them into exit codes.
"""

from typing import Optional


class OperadForgeError(Exception):
    """Base class for all operad-forge errors"""


class ArityMismatchError(OperadForgeError, ValueError):
    """Grafting or composing with the wrong number of parts, or an input index out of range"""


class MalformedTreeError(OperadForgeError, ValueError):
    """A labeling that is not a bijection, or a decoration of the wrong arity"""


class ParseError(OperadForgeError, ValueError):
    def __init__(self, message: str, line: int = 0, column: int = 0):
        self.line = line
        self.column = column
        super().__init__(f"{message} (line {line}, column {column})" if line else message)


class BudgetExceededError(OperadForgeError):
    def __init__(self, message: str, element: Optional[str] = None):
        self.element = element
        super().__init__(f"{message}: {element}" if element else message)


class UnstableSkeletonError(OperadForgeError, ValueError):
    """fr_map called on a skeleton with no stable marked curve (the arity-1 genus-0 corner)"""
