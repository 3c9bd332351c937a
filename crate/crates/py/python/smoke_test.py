"""Smoke test for the rezone extension module.

Run after building the extension:

    cargo build --release -p rezone-py --features extension-module
    python3 crates/py/python/smoke_test.py

The script imports an installed `rezone` if present, otherwise it loads the
freshly built shared library from target/release.
"""

import importlib.machinery
import importlib.util
import math
import pathlib
import sys
import tempfile


def load_module():
    try:
        import rezone

        return rezone
    except ImportError:
        pass
    root = pathlib.Path(__file__).resolve().parents[3]
    for name in ("librezone_py.so", "librezone_py.dylib", "rezone_py.dll"):
        lib = root / "target" / "release" / name
        if lib.exists():
            loader = importlib.machinery.ExtensionFileLoader("rezone", str(lib))
            mod_spec = importlib.util.spec_from_file_location("rezone", lib, loader=loader)
            module = importlib.util.module_from_spec(mod_spec)
            loader.exec_module(module)
            return module
    sys.exit("rezone extension not found; build it with --features extension-module")


def main():
    rz = load_module()

    tiny = rz.Instance.tiny1()
    assert tiny.num_units == 4 and tiny.num_schools == 2, tiny

    dist = rz.Config(["distance"])
    best = rz.enumerate_optimal(tiny, dist)
    assert best.proven_optimal
    assert abs(best.objective - 2.0) < 1e-9, best
    assert best.zoning == tiny.status_quo()

    balance = rz.Config(["balance"], dissimilarity_bound=True)
    exact = rz.enumerate_optimal(tiny, balance)
    found = rz.solve(tiny, balance, seed=1, max_iterations=5000)
    assert abs(exact.objective - 0.3) < 1e-9, exact
    assert abs(found.objective - exact.objective) < 1e-9, found
    assert rz.check_feasible(tiny, found.zoning, balance) == []

    metrics = rz.evaluate(tiny, found.zoning)
    assert 0.0 <= metrics["level1.district_dissimilarity"] <= 1.0

    district = rz.Instance.synth(rows=5, cols=6, levels=[1, 2], schools_per_level=[3, 2], seed=4)
    cfg = rz.Config(["distance", "compact", "feeder"])
    run = rz.solve(district, cfg, seed=2, max_iterations=20000)
    assert run.objective <= run.sq_objective + 1e-9
    assert all(b[1] <= a[1] for a, b in zip(run.trace, run.trace[1:]))
    assert rz.check_feasible(district, run.zoning, cfg) == []
    assert not math.isnan(rz.evaluate(district, run.zoning)["level2.avg_driving_miles"])

    with tempfile.TemporaryDirectory() as tmp:
        district.write(tmp)
        again = rz.Instance.load(tmp)
        assert again.status_quo() == district.status_quo()

    try:
        rz.Config(["speed"])
    except ValueError:
        pass
    else:
        raise AssertionError("unknown objective accepted")

    print("python smoke test: ok")


if __name__ == "__main__":
    main()
