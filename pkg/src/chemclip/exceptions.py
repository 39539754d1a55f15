"""Exception hierarchy shared by every chemclip module."""


class ChemClipError(Exception):
    """Base class for data/format errors (CLI exit code 2)."""


class SmilesError(ChemClipError, ValueError):
    """Invalid SMILES input. ``offset`` is the byte offset of the problem."""

    def __init__(self, message: str, offset: int, text: str = ""):
        self.offset = offset
        self.text = text
        super().__init__(f"{message} at offset {offset}" + (f" in {text!r}" if text else ""))


class UnbalancedParenthesis(SmilesError):
    pass


class UnclosedRingBond(SmilesError):
    pass


class UnknownElement(SmilesError):
    pass


class DanglingBondSymbol(SmilesError):
    pass


class UnknownMetal(ChemClipError, ValueError):
    pass


class MissingColumn(ChemClipError):
    pass


class MalformedRow(ChemClipError):
    def __init__(self, message: str, line: int):
        self.line = line
        super().__init__(f"line {line}: {message}")


class MissingInput(ChemClipError):
    pass


class DimensionMismatch(ChemClipError, ValueError):
    pass


class EmptyCellLine(ChemClipError):
    pass


class EmptyGroup(ChemClipError, ValueError):
    pass


class Undefined(ChemClipError, ValueError):
    """A metric or weight that is mathematically undefined for the input."""


class FormatError(ChemClipError):
    pass


class UnsupportedVersion(FormatError):
    pass


class PerplexityTooLarge(ChemClipError, ValueError):
    pass


class ConfigError(ChemClipError, ValueError):
    pass
