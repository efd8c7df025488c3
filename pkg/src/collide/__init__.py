"""Tooling for file-name collisions between case-sensitive and case-insensitive file systems."""

from .foldcore import UNICODE_VERSION, fold_name, get_profile, load_builtin_profiles, names_collide

__all__ = ["UNICODE_VERSION", "fold_name", "get_profile", "load_builtin_profiles", "names_collide"]
__version__ = "0.1.0"
