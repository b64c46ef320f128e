"""Standalone round-trip test for ResultStore.

Run with:
    python test_results_store.py
"""
import os
import sys
import tempfile
import traceback

import h5py
import numpy as np

# Ensure project root is on the path
sys.path.insert(0, os.path.dirname(__file__))

from app.workbook.results_store import ResultStore, WorkbookEntry

PASSED = []
FAILED = []


def check(name: str, condition: bool, detail: str = "") -> None:
    if condition:
        PASSED.append(name)
        print(f"  PASS  {name}")
    else:
        FAILED.append(name)
        print(f"  FAIL  {name}" + (f" - {detail}" if detail else ""))


def run_tests() -> None:
    with tempfile.TemporaryDirectory() as tmpdir:
        h5_path = os.path.join(tmpdir, "gap.h5")
        store = ResultStore(h5_path)

        # ----------------------------------------------------------------
        # 1. open() creates file and skeleton
        # ----------------------------------------------------------------
        print("\n[1] open() creates file and skeleton")
        store.open(run_name="gap-curve")
        check("file exists after open()", os.path.exists(h5_path))

        with h5py.File(h5_path, "r") as h5:
            check("metadata group exists", "metadata" in h5)
            check("inputs group exists", "inputs" in h5)
            check("outputs/tables exists", "outputs/tables" in h5)
            check("outputs/paths exists", "outputs/paths" in h5)
            raw = h5["metadata/run_name"][()]
            name = raw.decode() if isinstance(raw, bytes) else raw
            check("run_name written", name == "gap-curve", repr(name))

        # ----------------------------------------------------------------
        # 2. write_table round-trip keeps column order
        # ----------------------------------------------------------------
        print("\n[2] write_table() round-trip")
        t = np.array([0.5, 0.75, 0.875])
        gap = np.array([0.1, 0.04, 0.015])
        store.write_table("gap_curve", {"t": t, "T_minus_t": 1.0 - t, "gap": gap})
        mat, cols = store.read_dataset("outputs/tables/gap_curve")
        check("shape is (3, 3)", mat.shape == (3, 3), str(mat.shape))
        check("columns in write order", cols == ["t", "T_minus_t", "gap"], str(cols))
        check("gap column matches", np.allclose(mat[:, cols.index("gap")].astype(float), gap))

        # ----------------------------------------------------------------
        # 3. Overwrite a table
        # ----------------------------------------------------------------
        print("\n[3] Overwrite with new data")
        store.write_table("gap_curve", {"t": [0.5], "gap": [0.2]})
        mat2, cols2 = store.read_dataset("outputs/tables/gap_curve")
        check("overwrite: shape (1, 2)", mat2.shape == (1, 2), str(mat2.shape))
        check("overwrite: value correct", float(mat2[0, cols2.index("gap")]) == 0.2)

        # ----------------------------------------------------------------
        # 4. Per-path costs and a single-dataset read
        # ----------------------------------------------------------------
        print("\n[4] write_path_costs()")
        costs = np.array([0.125, 0.5, 0.0625])
        store.write_path_costs("simulate", costs, jump_counts=[0, 2, 1])
        mat3, cols3 = store.read_dataset("outputs/paths/simulate/cost")
        check("single dataset is one column", mat3.shape == (3, 1), str(mat3.shape))
        check("costs match", np.array_equal(mat3[:, 0], costs))
        with h5py.File(h5_path, "r") as h5:
            check("jump counts stored as integers", h5["outputs/paths/simulate/jump_count"].dtype.kind == "i")

        # ----------------------------------------------------------------
        # 5. Config and JSON documents
        # ----------------------------------------------------------------
        print("\n[5] write_config() / write_json()")
        config = {"experiment": "simulate", "seed": 7, "parameters": {"n_paths": 10}}
        store.write_config(config)
        store.write_config(config)
        check("config round-trips", store.read_json("inputs/config") == config)
        store.write_json("simulate", {"mean_cost": 0.125, "n_paths": 10})
        check("json document round-trips", store.read_json("outputs/simulate")["mean_cost"] == 0.125)

        # ----------------------------------------------------------------
        # 6. Missing paths and the entry listing
        # ----------------------------------------------------------------
        print("\n[6] read_dataset on non-existent path / entries() / render()")
        mat4, cols4 = store.read_dataset("outputs/tables/NOSUCHTABLE")
        check("empty array returned", mat4.size == 0)
        check("empty cols returned", cols4 == [])
        entries = store.entries()
        check("entries sorted by path", [e.path for e in entries] == sorted(e.path for e in entries))
        check("metadata is not listed", not any(e.path.startswith("metadata") for e in entries))
        check("table listed with its size",
              WorkbookEntry("outputs/tables/gap_curve", "table", (1, 2)) in entries, str(entries))
        check("table columns are not listed separately",
              not any(e.path.startswith("outputs/tables/gap_curve/") for e in entries))
        check("costs listed as an array", WorkbookEntry("outputs/paths/simulate/cost", "array", (3,)) in entries)
        check("documents listed as json", WorkbookEntry("outputs/simulate", "json", ()) in entries)
        check("table renders as csv", store.render("outputs/tables/gap_curve") == "t,gap\n0.5,0.2\n")
        try:
            store.render("outputs/tables/NOSUCHTABLE")
            check("unknown entry raises KeyError", False)
        except KeyError:
            check("unknown entry raises KeyError", True)

        # ----------------------------------------------------------------
        # 7. open() is idempotent, a workbook beside an output keeps its stem
        # ----------------------------------------------------------------
        print("\n[7] open() idempotent / ResultStore.beside()")
        try:
            store.open(run_name="other")
            check("second open() does not raise", True)
        except Exception as exc:
            check("second open() does not raise", False, str(exc))
        derived = ResultStore.beside(os.path.join(tmpdir, "run.csv"))
        check("derived path has .h5 suffix", derived.path.name == "run.h5", str(derived.path))
        check("derived store does not exist yet", not derived.path.exists())

    # Summary
    print(f"\n{'='*50}")
    print(f"Results: {len(PASSED)} passed, {len(FAILED)} failed")


def test_results_store():
    run_tests()
    assert not FAILED, FAILED


if __name__ == "__main__":
    try:
        run_tests()
    except Exception:
        traceback.print_exc()
        sys.exit(1)
    if FAILED:
        print("Failed tests:", FAILED)
        sys.exit(1)
    print("All tests passed.")
