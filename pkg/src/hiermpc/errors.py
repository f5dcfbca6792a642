"""Exception types shared across the package."""


class InvalidInputError(ValueError):
    """Raised when a numeric input is non-finite or out of its domain."""


class LayoutError(ValueError):
    """Raised when an action vector does not match its layout."""


class StructuralError(ValueError):
    """Raised for malformed plans, empty populations or shape mismatches."""


class SiteResolutionError(KeyError):
    """Raised when a cost term references a site missing from the frame."""

    def __init__(self, site: str):
        super().__init__(site)
        self.site = site

    def __str__(self) -> str:
        return f"site {self.site!r} is not present in the site frame"


class ConfigError(ValueError):
    """Raised for malformed config files; carries file/line when known."""

    def __init__(self, message: str, path=None, line=None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}:{line}: " if line is not None else f"{path}: "
        super().__init__(where + message)
