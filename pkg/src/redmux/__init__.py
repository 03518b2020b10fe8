"""Kinematic control with dynamic subtask multiplexing.

When a redundant robot has fewer spare degrees of freedom than it has
secondary objectives, a fixed redundancy allocation starves every objective
beyond the first few.  This package merges all elementary subtasks into the
available null space through a weighting matrix whose rows are reallocated
on the fly by a winner-take-all rule driven by each subtask's activity, so
the spare degrees of freedom time-share between whichever objectives
currently need them.
"""

from importlib import resources

__all__ = ["scenario_path"]
__version__ = "0.1.0"


def scenario_path(name: str):
    """Filesystem path of a bundled scenario JSON (e.g. 'drink_serving')."""
    if not name.endswith(".json"):
        name = name + ".json"
    path = resources.files(__package__) / "scenarios" / name
    if not path.is_file():
        raise FileNotFoundError(f"no bundled scenario named {name!r}")
    return path
