#!/usr/bin/env python3
"""Solve exported MPS files with HiGHS and compare against native optima.

Usage: crosscheck_highs.py DIR

DIR holds model files `NAME.mps` and `native.json`, a map from NAME to the
native objective (null when the native solver reported infeasible). The
acceptance suite writes such a directory; `mgflex export-mps` plus a
hand-written native.json works too.

Exit status 0 when every model agrees within 1e-6 * max(1, |objective|),
1 on any mismatch, 2 when highspy is not installed.
"""

import json
import pathlib
import sys

TOL = 1e-6


def solve(path):
    import highspy

    h = highspy.Highs()
    h.setOptionValue("output_flag", False)
    h.setOptionValue("mip_rel_gap", 1e-10)
    h.setOptionValue("mip_abs_gap", 1e-10)
    h.readModel(str(path))
    h.run()
    status = h.getModelStatus()
    if status == highspy.HighsModelStatus.kInfeasible:
        return None
    if status != highspy.HighsModelStatus.kOptimal:
        raise RuntimeError(f"{path.name}: HiGHS status {h.modelStatusToString(status)}")
    return h.getInfo().objective_function_value


def main(argv):
    if len(argv) != 2:
        print(__doc__, file=sys.stderr)
        return 2
    try:
        import highspy  # noqa: F401
    except ImportError:
        print("highspy is not installed (pip install highspy)", file=sys.stderr)
        return 2
    root = pathlib.Path(argv[1])
    native = json.loads((root / "native.json").read_text())
    failures = 0
    for name, ours in sorted(native.items()):
        theirs = solve(root / f"{name}.mps")
        if ours is None or theirs is None:
            ok = ours is None and theirs is None
        else:
            ok = abs(ours - theirs) <= TOL * max(1.0, abs(ours))
        failures += not ok
        print(f"{name}: native={ours} highs={theirs} {'ok' if ok else 'MISMATCH'}")
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main(sys.argv))
