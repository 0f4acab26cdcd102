"""Builds the extension module, imports it and solves the bundled examples.

Usage: python3 python/smoke_test.py [--no-build]
"""

import json
import shutil
import subprocess
import sys
import tempfile
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent


def build() -> Path:
    subprocess.run(
        ["cargo", "build", "--release", "-p", "dcmip-python", "--features", "extension-module"],
        cwd=ROOT,
        check=True,
    )
    return ROOT / "target" / "release" / "libdcmip_py.so"


def main() -> int:
    lib = ROOT / "target" / "release" / "libdcmip_py.so"
    if "--no-build" not in sys.argv:
        lib = build()
    tmp = Path(tempfile.mkdtemp())
    shutil.copy(lib, tmp / "dcmip_py.so")
    sys.path.insert(0, str(tmp))
    import dcmip_py

    assert "example1_dc1" in dcmip_py.corpus_names()

    p = dcmip_py.Problem.bundled("example1_dc1")
    for x0 in [-1.0, 0.0, 1.0, 0.3]:
        r = dcmip_py.solve(p, mode="scmip", x0=[x0])
        assert r["status"] == "converged", r
        assert r["x"] == [-1.0] and r["f"] == -1.0, r
        assert r["iterations"] <= 2, r

    q = dcmip_py.Problem.bundled("example1_dc2")
    r = dcmip_py.solve(q, mode="smoothing", x0=[0.4])
    assert r["status"] == "converged", r
    assert r["x"][0] in (-1.0, 0.0), r
    records = [json.loads(line) for line in r["trace"].splitlines()]
    assert records[-1]["record"] == "terminal"

    doc = json.loads(q.to_json())
    again = dcmip_py.Problem.from_json(json.dumps(doc))
    assert again.objective([0.5]) == q.objective([0.5]) == 0.5
    assert again.validate()["tau_h"] == 2.0

    try:
        dcmip_py.Problem.from_json('{"dimension": 1}')
    except ValueError:
        pass
    else:
        raise AssertionError("malformed document accepted")

    report = dcmip_py.verify("subsolver", seed=7, count=10)
    assert report["passed"] == 10, report

    print("python smoke test passed")
    return 0


if __name__ == "__main__":
    sys.exit(main())
