"""Case-folding profiles and name-collision predicates.

A profile decides which raw names a file system treats as the same name. The
Unicode tables come from a pinned copy of ``CaseFolding.txt`` shipped in
``collide/data``; simple folding uses the C and S statuses, full folding uses
C and F. Status T (Turkic dotted/dotless i) is deliberately ignored so the
profiles stay locale-free.
"""

from __future__ import annotations

import functools
import unicodedata
from dataclasses import dataclass, field
from importlib import resources
from types import MappingProxyType
from typing import Iterable, Mapping

from .errors import InvalidName

UNICODE_VERSION = "13.0.0"
PROFILE_IDS = ("sensitive", "ascii", "simple-fold", "full-fold")
DEFAULT_PROFILE = "ascii"

CanonicalKey = bytes


@dataclass(frozen=True)
class FoldProfile:
    id: str
    fold_table: Mapping[int, str] = field(repr=False, compare=False)
    normalize: bool = False
    unicode_version: str = UNICODE_VERSION

    def with_normalize(self, normalize: bool = True) -> "FoldProfile":
        return FoldProfile(self.id, self.fold_table, normalize, self.unicode_version)


def _data_path():
    return resources.files("collide") / "data" / f"CaseFolding-{UNICODE_VERSION}.txt"


def parse_casefolding(lines: Iterable[str]) -> list[tuple[int, str, str]]:
    """Parse UCD ``CaseFolding.txt`` lines into (code point, status, mapping)."""
    rows = []
    for line in lines:
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        code, status, mapping = (f.strip() for f in line.split(";")[:3])
        rows.append((int(code, 16), status, "".join(chr(int(c, 16)) for c in mapping.split())))
    return rows


@functools.lru_cache(maxsize=None)
def _unicode_rows() -> tuple[tuple[int, str, str], ...]:
    with _data_path().open(encoding="ascii") as fh:
        return tuple(parse_casefolding(fh))


def _close_table(table: dict[int, str]) -> dict[int, str]:
    # Make every replacement a fixed point so a single translate() pass is idempotent.
    def settle(s: str) -> str:
        for _ in range(8):
            nxt = s.translate(table)
            if nxt == s:
                return s
            s = nxt
        raise RuntimeError("fold table does not converge")

    return {cp: settle(rep) for cp, rep in table.items()}


def _build_table(statuses: str) -> dict[int, str]:
    table = {cp: rep for cp, status, rep in _unicode_rows() if status in statuses}
    return _close_table(table)


@functools.lru_cache(maxsize=None)
def _builtin() -> tuple[FoldProfile, ...]:
    ascii_table = {cp: chr(cp + 32) for cp in range(ord("A"), ord("Z") + 1)}
    return (
        FoldProfile("sensitive", MappingProxyType({})),
        FoldProfile("ascii", MappingProxyType(ascii_table)),
        FoldProfile("simple-fold", MappingProxyType(_build_table("CS"))),
        FoldProfile("full-fold", MappingProxyType(_build_table("CF"))),
    )


def load_builtin_profiles() -> list[FoldProfile]:
    """Return the four built-in profiles (sensitive, ascii, simple-fold, full-fold)."""
    return list(_builtin())


def get_profile(profile: "str | FoldProfile", normalize: bool | None = None) -> FoldProfile:
    """Look up a built-in profile by id; a profile object passes through."""
    if isinstance(profile, FoldProfile):
        prof = profile
    else:
        for prof in _builtin():
            if prof.id == profile:
                break
        else:
            raise KeyError(f"unknown profile {profile!r}; choose from {', '.join(PROFILE_IDS)}")
    if normalize is not None and normalize != prof.normalize:
        prof = prof.with_normalize(normalize)
    return prof


def _as_text(name: "str | bytes") -> str:
    if isinstance(name, bytes):
        try:
            name = name.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise InvalidName(f"not valid UTF-8: {name!r}") from exc
    if not isinstance(name, str):
        raise InvalidName(f"expected str or bytes, got {type(name).__name__}")
    if not name:
        raise InvalidName("empty name")
    if "/" in name or "\0" in name:
        raise InvalidName(f"name contains a separator or NUL: {name!r}")
    try:
        name.encode("utf-8")
    except UnicodeEncodeError as exc:
        raise InvalidName(f"ill-formed Unicode (lone surrogate) in {name!r}") from exc
    return name


def fold_text(name: "str | bytes", profile: "str | FoldProfile") -> str:
    """Fold ``name`` under ``profile`` and return the folded string."""
    prof = get_profile(profile)
    text = _as_text(name)
    if not prof.fold_table:
        return unicodedata.normalize("NFC", text) if prof.normalize else text
    if not prof.normalize:
        return text.translate(prof.fold_table)
    # Composition can expose new foldable characters and folding can expose new
    # composable sequences, so iterate to a fixed point.
    cur = text
    for _ in range(8):
        nxt = unicodedata.normalize("NFC", cur).translate(prof.fold_table)
        if nxt == cur:
            return cur
        cur = nxt
    return cur


def fold_name(name: "str | bytes", profile: "str | FoldProfile") -> CanonicalKey:
    """Return the canonical key (UTF-8 bytes of the folded name)."""
    return fold_text(name, profile).encode("utf-8")


def names_collide(a: "str | bytes", b: "str | bytes", profile: "str | FoldProfile") -> bool:
    """True when ``a`` and ``b`` differ bytewise but fold to the same key."""
    ka, kb = fold_name(a, profile), fold_name(b, profile)
    return ka == kb and _as_text(a) != _as_text(b)


def fold_components(components: Iterable[str], profile: "str | FoldProfile") -> tuple[str, ...]:
    prof = get_profile(profile)
    return tuple(fold_text(c, prof) for c in components)


def classify_pair(a: str, b: str, profile: "str | FoldProfile") -> str:
    """Describe two names as ``match`` (identical), ``collide`` or ``distinct``."""
    if _as_text(a) == _as_text(b):
        return "match"
    return "collide" if fold_name(a, profile) == fold_name(b, profile) else "distinct"
