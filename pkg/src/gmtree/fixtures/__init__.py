"""Bundled example models (exact rational covariances and a small tree)."""

from importlib import resources

__all__ = ["path", "names"]

names = ("allquarter3.json", "star4.json", "figure_tree.json")


def path(name: str):
    """Filesystem path of a bundled model file."""
    if name not in names:
        raise KeyError(f"no bundled model {name!r}; available: {', '.join(names)}")
    return resources.files(__package__) / name
