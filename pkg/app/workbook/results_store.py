"""HDF5 results workbook; the only module that imports h5py.

Uses an open-per-operation pattern (no persistent file handle) so a run can
be inspected by other processes while it is still being written.
"""
from __future__ import annotations

import json
from pathlib import Path
from typing import Any, NamedTuple

import h5py
import numpy as np


# ---------------------------------------------------------------------------
# Group skeleton written on first file creation
# ---------------------------------------------------------------------------
_SKELETON: dict[str, Any] = {
    "metadata": {
        "run_name": "",
        "format": "sotlab-results/1",
    },
    "inputs": {},
    "outputs": {
        "tables": {},
        "paths": {},
    },
}


def _write_skeleton(h5: h5py.File, run_name: str) -> None:
    """Recursively create the group skeleton in a freshly opened file."""
    def _recurse(parent, d):
        for key, val in d.items():
            if isinstance(val, dict):
                grp = parent.require_group(key)
                _recurse(grp, val)
            elif isinstance(val, str):
                if key not in parent:
                    data = run_name if key == "run_name" else val
                    parent.create_dataset(key, data=data, dtype=h5py.string_dtype(), track_times=False)

    _recurse(h5, _SKELETON)


# ---------------------------------------------------------------------------
# Public API
# ---------------------------------------------------------------------------

class ResultStore:
    """Thin wrapper around h5py for experiment results."""

    def __init__(self, h5_path: str | Path):
        self._path = Path(h5_path)

    # ------------------------------------------------------------------
    # Lifecycle
    # ------------------------------------------------------------------

    def open(self, run_name: str = "") -> None:
        """Create the file and write the group skeleton if it does not exist."""
        if self._path.exists():
            return
        with h5py.File(self._path, "w", track_order=True) as h5:
            _write_skeleton(h5, run_name)

    # ------------------------------------------------------------------
    # Writes
    # ------------------------------------------------------------------

    def write_config(self, config: dict) -> None:
        """Store the run configuration as canonical JSON under ``inputs/config``."""
        text = json.dumps(config, sort_keys=True)
        with h5py.File(self._path, "a") as h5:
            if "inputs/config" in h5:
                del h5["inputs/config"]
            h5["inputs"].create_dataset("config", data=text, dtype=h5py.string_dtype(), track_times=False)

    def write_table(self, name: str, columns: dict[str, Any]) -> None:
        """Write (or overwrite) one dataset per column under ``outputs/tables/<name>``."""
        with h5py.File(self._path, "a") as h5:
            group_path = f"outputs/tables/{name}"
            if group_path in h5:
                del h5[group_path]
            grp = h5.create_group(group_path, track_order=True)
            for col, values in columns.items():
                grp.create_dataset(col, data=np.asarray(values, dtype=np.float64), track_times=False)

    def write_path_costs(self, name: str, costs, jump_counts=None) -> None:
        """Per-path Monte Carlo costs (and jump counts) under ``outputs/paths/<name>``."""
        with h5py.File(self._path, "a") as h5:
            group_path = f"outputs/paths/{name}"
            if group_path in h5:
                del h5[group_path]
            grp = h5.require_group(group_path)
            grp.create_dataset("cost", data=np.asarray(costs, dtype=np.float64), track_times=False)
            if jump_counts is not None:
                grp.create_dataset("jump_count", data=np.asarray(jump_counts, dtype=np.int64),
                                   track_times=False)

    def write_json(self, name: str, payload: dict) -> None:
        """Store a JSON result document under ``outputs/<name>``."""
        with h5py.File(self._path, "a") as h5:
            path = f"outputs/{name}"
            if path in h5:
                del h5[path]
            h5["outputs"].create_dataset(name, data=json.dumps(payload, sort_keys=True),
                                         dtype=h5py.string_dtype(), track_times=False)

    # ------------------------------------------------------------------
    # Reads
    # ------------------------------------------------------------------

    def read_dataset(self, hdf5_path: str) -> tuple[np.ndarray, list[str]]:
        """
        Read a table group (e.g. 'outputs/tables/gap_curve') and return
        ``(array[N, C], col_names)`` with the columns in write order.

        If *hdf5_path* points to a single dataset, returns a single column.
        """
        with h5py.File(self._path, "r") as h5:
            if hdf5_path not in h5:
                return np.empty((0, 0)), []
            node = h5[hdf5_path]
            if isinstance(node, h5py.Dataset):
                arr = _read_dataset_values(node)
                return arr.reshape(-1, 1), [hdf5_path.split("/")[-1]]
            datasets: dict[str, np.ndarray] = {}
            for name, item in node.items():
                if isinstance(item, h5py.Dataset):
                    datasets[name] = _read_dataset_values(item)

        if not datasets:
            return np.empty((0, 0)), []
        col_names = list(datasets.keys())
        length = min(len(v) for v in datasets.values())
        mat = np.column_stack([datasets[c][:length] for c in col_names])
        return mat, col_names

    def read_json(self, hdf5_path: str):
        with h5py.File(self._path, "r") as h5:
            raw = h5[hdf5_path][()]
        return json.loads(raw.decode("utf-8") if isinstance(raw, bytes) else raw)

    def entries(self) -> list[WorkbookEntry]:
        """Every result in the workbook: tables, per-path arrays and JSON documents.

        Metadata and the bare skeleton groups are skipped.
        """
        found: list[WorkbookEntry] = []

        def visit(name: str, obj) -> None:
            if name.startswith("metadata"):
                return
            if isinstance(obj, h5py.Group):
                if name.startswith("outputs/tables/"):
                    lengths = [len(ds) for ds in obj.values() if isinstance(ds, h5py.Dataset)]
                    found.append(WorkbookEntry(name, "table", (min(lengths, default=0), len(lengths))))
            elif obj.dtype.kind in "OSU":
                found.append(WorkbookEntry(name, "json", ()))
            elif not name.startswith("outputs/tables/"):
                found.append(WorkbookEntry(name, "array", obj.shape))

        with h5py.File(self._path, "r") as h5:
            h5.visititems(visit)
        return sorted(found)

    def render(self, hdf5_path: str) -> str:
        """Text form of one entry: CSV for tables and arrays, indented JSON for documents."""
        kinds = {entry.path: entry.kind for entry in self.entries()}
        if hdf5_path not in kinds:
            raise KeyError(hdf5_path)
        if kinds[hdf5_path] == "json":
            return json.dumps(self.read_json(hdf5_path), indent=2, sort_keys=True) + "\n"
        mat, cols = self.read_dataset(hdf5_path)
        lines = [",".join(cols)]
        lines += [",".join(repr(v.item()) for v in row) for row in mat]
        return "\n".join(lines) + "\n"

    @property
    def path(self) -> Path:
        return self._path

    @classmethod
    def beside(cls, output_path: str | Path) -> ResultStore:
        """Workbook sharing the stem of a run's primary output file."""
        return cls(Path(output_path).with_suffix(".h5"))


class WorkbookEntry(NamedTuple):
    path: str
    kind: str  # "table", "array" or "json"
    shape: tuple[int, ...]

    def describe(self) -> str:
        if self.kind == "table":
            return f"{self.path}  table {self.shape[0]} rows x {self.shape[1]} columns"
        if self.kind == "array":
            return f"{self.path}  array {'x'.join(map(str, self.shape))}"
        return f"{self.path}  json"


# ---------------------------------------------------------------------------
# Helpers
# ---------------------------------------------------------------------------

def _read_dataset_values(ds: h5py.Dataset) -> np.ndarray:
    """Read a dataset, decoding bytes→str for string datasets."""
    data = ds[()]
    if isinstance(data, bytes):
        return np.array([data.decode("utf-8")])
    return np.atleast_1d(data)
