"""Exception hierarchy shared by all modules.

File-system style errors also derive from the matching built-in ``OSError``
subclass, so callers can catch either the specific class or the familiar
builtin (``FileExistsError``, ``NotADirectoryError``, ...).
"""

import errno


class CollideError(Exception):
    """Base class for every error raised by this package."""


class InvalidName(CollideError, ValueError):
    """A name is empty, contains a separator, or is not valid Unicode."""


# --- vfs -------------------------------------------------------------------


class VfsError(CollideError, OSError):
    errno_value = 0

    def __init__(self, path: str, detail: str = ""):
        msg = f"{path}: {detail}" if detail else path
        OSError.__init__(self, self.errno_value, msg)
        self.path = path


class Exists(VfsError, FileExistsError):
    errno_value = errno.EEXIST


class CollidesDifferingName(Exists):
    """Exclusive-name create found a fold-equal entry spelled differently."""


class NotFound(VfsError, FileNotFoundError):
    errno_value = errno.ENOENT


class ParentMissing(NotFound):
    pass


class NotADirectory(VfsError, NotADirectoryError):
    errno_value = errno.ENOTDIR


class IsADirectory(VfsError, IsADirectoryError):
    errno_value = errno.EISDIR


class NotEmpty(VfsError):
    errno_value = errno.ENOTEMPTY


class LoopLimitExceeded(VfsError):
    errno_value = errno.ELOOP


# --- casegen ---------------------------------------------------------------


class DestNotEmpty(CollideError):
    pass


class HostIsCaseInsensitive(CollideError):
    pass


# --- refutils / harness ----------------------------------------------------


class PromptRequired(CollideError):
    """The modeled utility asked the user and no scripted answer was left."""


class AmbiguousEvidence(CollideError):
    """Observed effects matched no classification rule."""


class MountNotCaseInsensitive(CollideError):
    pass


class UtilityMissing(CollideError):
    pass


# --- scanner / tracer ------------------------------------------------------


class MalformedEntry(CollideError, ValueError):
    pass


class TruncatedArchive(CollideError):
    pass


class UnsupportedHeader(CollideError):
    pass


class ParseError(CollideError, ValueError):
    def __init__(self, lineno: int, detail: str):
        super().__init__(f"line {lineno}: {detail}")
        self.lineno = lineno
