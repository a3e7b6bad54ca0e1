#!/usr/bin/env python3
"""Solve an LP file with HiGHS and write a HiGHS-style solution file.

usage: highs_solve.py LP_PATH SOL_PATH TIME_LIMIT [START_PATH]

START_PATH, if given, holds `name value` lines used as a MIP start.
"""
import sys

import highspy


def main(argv):
    if len(argv) < 4:
        print(__doc__, file=sys.stderr)
        return 2
    lp, sol, limit = argv[1], argv[2], float(argv[3])
    h = highspy.Highs()
    h.setOptionValue("output_flag", False)
    h.setOptionValue("time_limit", limit)
    h.setOptionValue("mip_rel_gap", 0.0)
    h.setOptionValue("threads", 1)
    if h.readModel(lp) != highspy.HighsStatus.kOk:
        print(f"cannot read {lp}", file=sys.stderr)
        return 1
    if len(argv) > 4:
        n = h.getNumCol()
        values = [0.0] * n
        with open(argv[4]) as fh:
            for line in fh:
                parts = line.split()
                if len(parts) != 2:
                    continue
                status, idx = h.getColByName(parts[0])
                if status == highspy.HighsStatus.kOk:
                    values[idx] = float(parts[1])
        start = highspy.HighsSolution()
        start.col_value = values
        start.value_valid = True
        h.setSolution(start)
    h.run()
    h.writeSolution(sol, 0)
    return 0


if __name__ == "__main__":
    sys.exit(main(sys.argv))
