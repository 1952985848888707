#!/usr/bin/env python3
"""Convert a static-output-feedback benchmark (MATLAB .mat with state
matrices A, B, C) into the descriptor layout this package consumes.

The COMPleib collection (http://www.complib.de/) ships each plant as a
MATLAB function; evaluate it once in MATLAB/Octave and save the
matrices, e.g.

    [A,B1,B,C1,C] = COMPleib('NN18'); save('-v7','NN18.mat','A','B','C');

then run

    python3 scripts/convert_sof_benchmark.py NN18.mat data/ --eps 0.2

which writes data/NN18_{A,B,C}.mtx and data/NN18.json.  The descriptor
can be fed to `psamin minimize --problem data/NN18.json` or picked up by
the conditional benchmark regression tests.
"""

import argparse
import json
from pathlib import Path

import numpy as np
import scipy.io
import scipy.sparse as sp


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("mat", help=".mat file with variables A, B, C")
    ap.add_argument("outdir", help="output directory")
    ap.add_argument("--eps", type=float, default=0.2)
    ap.add_argument("--k-lower", type=float, default=-1.0,
                    help="lower bound for every gain entry")
    ap.add_argument("--k-upper", type=float, default=1.0)
    ap.add_argument("--name", default=None)
    args = ap.parse_args()

    data = scipy.io.loadmat(args.mat)
    missing = [k for k in ("A", "B", "C") if k not in data]
    if missing:
        raise SystemExit(f"{args.mat} lacks variables: {missing}")

    name = args.name or Path(args.mat).stem
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)

    files = {}
    for key in ("A", "B", "C"):
        M = np.atleast_2d(np.asarray(data[key], dtype=float))
        fname = f"{name}_{key}.mtx"
        scipy.io.mmwrite(outdir / fname, sp.csr_matrix(M))
        files[key] = fname

    p, q = np.atleast_2d(data["C"]).shape[0], np.atleast_2d(data["B"]).shape[1]
    desc = {
        "type": "sof",
        "name": name,
        "A": files["A"],
        "B": files["B"],
        "C": files["C"],
        "k_lower": args.k_lower,
        "k_upper": args.k_upper,
        "eps": args.eps,
    }
    out = outdir / f"{name}.json"
    with open(out, "w") as fh:
        json.dump(desc, fh, indent=2)
    print(f"wrote {out} (gain is {q}x{p} -> d={p * q} parameters)")


if __name__ == "__main__":
    main()
