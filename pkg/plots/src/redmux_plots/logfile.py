"""Reader for the simulator's CSV log contract.

The column layout is fixed: ``t``, joint positions ``q_*``, primary errors
``err_*``, subtask velocities ``xs_*``, statuses ``fbar_*``, the allocation
matrix ``A_ij`` row-major, named metrics ``aux_<metric>_i<j>`` plus per-target
reference/actual traces ``aux_ref<k>_<axis>`` / ``aux_act<k>_<axis>``, and
joint velocities ``qd_*``.  Everything here is derived from the header alone;
the shape of the allocation follows from the status and allocation counts.
"""

import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

_METRIC = re.compile(r"^aux_([a-z]+)_i(\d+)$")
_TRACE = re.compile(r"^aux_(ref|act)(\d+)_(x|y|yaw)$")


class LogFormatError(Exception):
    """The CSV does not follow the simulator's column contract."""


@dataclass(frozen=True)
class LogTable:
    columns: tuple
    data: np.ndarray  # (records, columns)

    @property
    def records(self) -> int:
        return self.data.shape[0]

    def col(self, name: str) -> np.ndarray:
        if name not in self.columns:
            raise LogFormatError(f"missing column {name!r}")
        return self.data[:, self.columns.index(name)]

    def group(self, prefix: str):
        """Column names and values for every column starting with prefix."""
        idx = [i for i, c in enumerate(self.columns) if c.startswith(prefix)]
        if not idx:
            raise LogFormatError(f"missing columns {prefix}*")
        return [self.columns[i] for i in idx], self.data[:, idx]

    def allocation(self) -> np.ndarray:
        """Weights as (records, r, l), shapes derived from the header."""
        fnames, _ = self.group("fbar_")
        anames, A = self.group("A_")
        l = len(fnames)
        if len(anames) % l:
            raise LogFormatError(
                f"{len(anames)} A_* columns do not tile {l} subtask columns"
            )
        r = len(anames) // l
        return A.reshape(self.records, r, l)

    def metrics(self) -> dict:
        """Named per-subtask metrics: metric name -> [(column j, column name)]."""
        out: dict[str, list] = {}
        for c in self.columns:
            m = _METRIC.match(c)
            if m:
                out.setdefault(m.group(1), []).append((int(m.group(2)), c))
        return out

    def traces(self) -> dict:
        """Per-target reference/actual pose columns: k -> role -> axis -> name."""
        out: dict[int, dict] = {}
        for c in self.columns:
            m = _TRACE.match(c)
            if m:
                role, k, axis = m.group(1), int(m.group(2)), m.group(3)
                out.setdefault(k, {}).setdefault(role, {})[axis] = c
        return out

    def window(self, t0: float, t1: float) -> "LogTable":
        t = self.col("t")
        keep = (t >= t0) & (t <= t1)
        if not keep.any():
            raise ValueError(f"window [{t0}, {t1}] selects no records")
        return LogTable(columns=self.columns, data=self.data[keep])


def read_log(path) -> LogTable:
    path = Path(path)
    with open(path) as fh:
        header = fh.readline().strip()
        if not header or "," not in header or header.split(",")[0] != "t":
            raise LogFormatError(f"{path}: first line is not the log header")
        columns = tuple(header.split(","))
        try:
            data = np.loadtxt(fh, delimiter=",", ndmin=2)
        except ValueError as exc:
            raise LogFormatError(f"{path}: {exc}") from None
    if data.size == 0:
        raise LogFormatError(f"{path}: no records")
    if data.shape[1] != len(columns):
        raise LogFormatError(
            f"{path}: {data.shape[1]} fields per record, header names {len(columns)}"
        )
    return LogTable(columns=columns, data=data)
