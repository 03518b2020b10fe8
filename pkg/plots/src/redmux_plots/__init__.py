"""Offline figures from redmux CSV logs.

Reads only the documented log columns; holds no reference to the simulator.
"""

from .figures import plot_margins, plot_path, plot_weights
from .logfile import LogFormatError, LogTable, read_log

__all__ = [
    "LogFormatError",
    "LogTable",
    "read_log",
    "plot_margins",
    "plot_path",
    "plot_weights",
]
