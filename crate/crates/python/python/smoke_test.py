"""Smoke test for the lsrb extension module.

Build first:
    cargo build --release -p lsrb-python --features extension-module
then run this script; it picks up target/release/liblsrb.so if `lsrb` is not
already importable.
"""

import importlib.machinery
import importlib.util
import math
import pathlib
import sys
import tempfile


def load():
    try:
        import lsrb  # noqa: F401

        return sys.modules["lsrb"]
    except ImportError:
        pass
    root = pathlib.Path(__file__).resolve().parents[3]
    for profile in ("release", "debug"):
        for name in ("liblsrb.so", "liblsrb.dylib", "lsrb.dll"):
            path = root / "target" / profile / name
            if path.exists():
                loader = importlib.machinery.ExtensionFileLoader("lsrb", str(path))
                spec = importlib.util.spec_from_loader("lsrb", loader)
                mod = importlib.util.module_from_spec(spec)
                loader.exec_module(mod)
                sys.modules["lsrb"] = mod
                return mod
    sys.exit("lsrb extension not found; build it with cargo first")


def main():
    lsrb = load()
    print("lsrb", lsrb.__version__)

    assert abs(lsrb.effectivity_ceiling(0.5) - 3.0) < 1e-15
    t = lsrb.tridiag_demo(10)
    assert abs(t["error"] - 1 / math.sqrt(10)) < 1e-12
    assert t["ratio"] > t["lower_bound"]
    assert abs(lsrb.alpha_h_1d(64) - lsrb.alpha_1d()) < 1e-4

    p = lsrb.Problem("thermal1", n=8)
    print(p, "X dofs", p.x_dim, "Z dofs", p.z_dim)
    m = lsrb.Model.train(p, train_count=12)
    print(m)
    assert m.certified

    out = m.online([2.0])
    assert out["bound"] == out["err_norm"] + out["aux_res"] / math.sqrt(out["alpha_lb"])

    u = p.solve([2.0])
    un = m.reconstruct([2.0])
    assert len(u) == len(un) == p.x_dim

    with tempfile.TemporaryDirectory() as d:
        path = pathlib.Path(d) / "model.json"
        m.save(path)
        again = lsrb.Model.load(path)
        assert again.online([2.0])["bound"] == out["bound"]
        try:
            again.reconstruct([2.0])
        except ValueError:
            pass
        else:
            raise AssertionError("reconstruct without basis should fail")

    try:
        m.online([50.0])
    except ValueError as e:
        print("out of box rejected:", e)
    else:
        raise AssertionError("out-of-box parameter accepted")
    print("ok")


if __name__ == "__main__":
    main()
