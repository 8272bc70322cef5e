#!/usr/bin/env python3
"""Smoke test for the carleman_py extension module.

Builds nothing itself: it locates the cdylib produced by
`cargo build -p carleman-py [--release]`, exposes it as an importable
module, and exercises the bound surface end to end.
"""

import json
import pathlib
import shutil
import sys
import tempfile

ROOT = pathlib.Path(__file__).resolve().parent.parent


def locate_extension() -> pathlib.Path:
    candidates = [
        ROOT / "target" / "release" / "libcarleman_py.so",
        ROOT / "target" / "debug" / "libcarleman_py.so",
        ROOT / "target" / "release" / "libcarleman_py.dylib",
        ROOT / "target" / "debug" / "libcarleman_py.dylib",
    ]
    for c in candidates:
        if c.exists():
            return c
    sys.exit("build the extension first: cargo build -p carleman-py --release")


def import_module():
    lib = locate_extension()
    staging = pathlib.Path(tempfile.mkdtemp(prefix="carleman-py-"))
    shutil.copy(lib, staging / "carleman_py.so")
    sys.path.insert(0, str(staging))
    import carleman_py

    return carleman_py


def approx(a, b, tol):
    return abs(a - b) <= tol


def main() -> None:
    m = import_module()

    # pointwise weight data
    psi, phi, k0 = m.weight_info(0.5, "half_line", 3.0)
    assert approx(psi, 2.0, 1e-14) and approx(phi, 4.0, 1e-14) and k0 == 1.0
    assert approx(m.mu0_of(0.6, 1.0), 0.75, 1e-12)
    assert approx(m.kappa0_of(1.0, 2.0, 0.5, "half_line"), 19.0, 1e-12)

    # membership of the enclosure
    side, margin = m.membership(1.0, 2.0, 0.5, "half_line", 0.0 + 0.0j)
    assert side == "interior" and approx(margin, 2.0, 1e-12)
    side, _ = m.membership(1.0, 5.0, 0.5, "half_line", 3.0 + 4.1j)
    assert side == "exterior"

    # assembled laboratory on the scalar fixture
    scenario = json.loads(m.fixture("scalar"))
    scenario["quadrature"]["nodes"] = 1024
    lab = m.Lab(json.dumps(scenario))
    assert lab.dimension() == 1

    constants = json.loads(lab.constants())
    assert constants["mu"] == 1.0 and constants["r_prime"] == 0.5

    # resolvent golden value 1/(2 + 0.6i)
    r = lab.resolvent(0j)[0][0]
    assert approx(r, (2.0 - 0.6j) / 4.36, 1e-12)

    # winding of the truncated-and-closed contour
    assert approx(lab.winding(0.5 + 0.0j), 1.0, 1e-8)
    assert abs(lab.winding(-1.0 + 6.0j)) < 1e-8

    # eigenvalue of the scalar fixture sits strictly inside
    (lam, lam_margin), = lab.eigenvalues()
    assert approx(lam, 2.0 + 0.6j, 1e-12) and lam_margin > 0

    # full check battery through the bindings
    report = json.loads(lab.verify())
    assert report["all_pass"], [c["name"] for c in report["checks"] if not c["pass"]]
    re1, im1 = report["scalar_delta1_origin"]
    assert approx(re1, 0.363207, 1e-6) and approx(im1, -0.353774, 1e-6)

    # run_scenario round trip on the unperturbed fixture
    scenario = json.loads(m.fixture("n3_unperturbed"))
    scenario["quadrature"]["nodes"] = 1024
    report = json.loads(m.run_scenario(json.dumps(scenario)))
    assert report["all_pass"]
    assert len(report["checks"]) == 24

    print("carleman_py smoke test: OK")


if __name__ == "__main__":
    main()
