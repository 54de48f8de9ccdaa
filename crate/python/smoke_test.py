"""Smoke test for the netate_py extension module.

Build first (from the repository root):

    cargo build --release -p netate-python
    cp target/release/libnetate_py.so python/netate_py.so

then run `python3 python/smoke_test.py`.
"""

import math
import os
import random
import sys

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import netate_py as nt  # noqa: E402


def main() -> None:
    g = nt.sample_graph(400, seed=3)
    assert g.n == 400 and len(g) == 400
    assert g.edge_count == len(g.edges()) > 0
    assert sum(g.degrees()) == 2 * g.edge_count
    b_hat = g.estimate_b()
    b_pop = nt.graphon_b()
    print(f"sampled {g!r}; b_hat={b_hat:.3f}, graphon b={b_pop:.3f}")
    assert abs(nt.graphon_b("constant:0.5") - 1.0) < 1e-8

    vals, vecs = nt.Network(3, [(0, 1), (1, 2), (0, 2)]).leading_eigenpairs(2)
    assert abs(vals[0] - 2.0) < 1e-8 and abs(abs(vals[1]) - 1.0) < 1e-8
    assert len(vecs) == 2 and len(vecs[0]) == 3

    rng = random.Random(7)
    n, pi = 600, 0.5
    z = [[rng.gauss(0.0, 1.0)] for _ in range(n)]
    w = [rng.random() < pi for _ in range(n)]
    y = [2.0 * wi + zi[0] + rng.gauss(0.0, 0.5) for wi, zi in zip(w, z)]
    dim = nt.analyze(y, w, pi, method="dim")
    lin = nt.analyze(y, w, pi, z=z, method="linear")
    for rep in (dim, lin):
        assert rep["ci_low"] < rep["tau_hat"] < rep["ci_high"]
    assert abs(lin["tau_hat"] - 2.0) < 0.2
    assert lin["variance_hat"] < dim["variance_hat"]
    print(f"dim {dim['tau_hat']:.3f} (V {dim['variance_hat']:.3f}), "
          f"linear {lin['tau_hat']:.3f} (V {lin['variance_hat']:.3f})")

    net = nt.sample_graph(n, seed=11)
    lin_net = nt.analyze(y, w, pi, z=z, network=net, method="linear", rank=3)
    assert lin_net["components"]["network"] >= 0.0
    print(f"linear with network term {lin_net['components']['network']:.4f}")

    summary = nt.simulate("sec31-validation", reps=20, seed=5, n=200, methods=["linear"], workers=1)
    again = nt.simulate("sec31-validation", reps=20, seed=5, n=200, methods=["linear"], workers=2)
    assert summary == again
    lin_sum = summary["methods"][0]
    assert lin_sum["successes"] == 20
    print(f"simulate: mean {lin_sum['mean']:.4f}, truth {summary['truth']:.4f}, coverage {lin_sum['coverage']}")

    value, se = nt.oracle("sec41-main", "vnp", mc_reps=50_000, interference=False)
    assert math.isfinite(value) and abs(value - 1.357) < 5 * se + 0.02
    print(f"oracle vnp (no interference) {value:.4f} +- {se:.4f}")

    try:
        nt.analyze([1.0, 2.0], [True, False], 1.5)
    except ValueError as e:
        print(f"rejected bad pi: {e}")
    else:
        raise AssertionError("pi outside (0, 1) must be rejected")

    print("smoke test passed")


if __name__ == "__main__":
    main()
