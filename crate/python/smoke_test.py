"""Smoke test for the kprop_py extension module.

Build the module and run this script with it on the import path:

    cargo build --release -p kprop-python
    cp target/release/libkprop_py.so python/kprop_py.so
    python3 python/smoke_test.py
"""

import math
import os
import sys
import tempfile

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import kprop_py as kp


def close(a, b, tol):
    return abs(a - b) <= tol


def main():
    # kernel and closed forms
    k = kp.gaussian_kernel([0.0, 0.0], [4.0, 0.0], 16.0)
    assert close(k, math.exp(-0.03125), 1e-15), k
    pair = kp.KpcaModel([[0.0, 0.0], [8.0, 0.0]], 1)
    assert close(pair.reconstruction_error([4.0, 0.0]), 0.0027820, 1e-6)
    single = kp.KpcaModel([[1.0, 2.0]], 1)
    z = [3.0, -1.0]
    assert close(single.reconstruction_error(z), 2 - 2 * kp.gaussian_kernel(z, [1.0, 2.0]), 1e-12)

    # propagation on a line
    line = [[0.0], [10.0], [1.0], [2.0], [9.0], [8.5], [5.0]]
    sets, claims = kp.propagate_labels(line, [[0], [1]], [2, 3, 4, 5, 6], 2)
    assert sets == [[0, 2, 3], [1, 4, 5]], sets
    assert [(c[0], c[1]) for c in claims] == [(0, 2), (1, 4), (0, 3), (1, 5)]

    # classifiers agree on an easy case
    supports = [[[0.0, 0.0], [1.0, 0.0]], [[10.0, 10.0], [11.0, 10.0]]]
    models = [kp.KpcaModel(s, 1) for s in supports]
    assert kp.classify_kprop(models, [0.5, 0.2])[0] == 0
    assert kp.classify_prototype(supports, [10.2, 9.0])[0] == 1
    assert kp.classify_subspace(supports, [0.5, 0.2])[0] == 0
    assert kp.classify_linear(supports, [[0.5, 0.2], [10.5, 10.0]]) == [0, 1]

    # geometry
    p = kp.estimate_pnn([[0.0], [1.0], [5.0], [10.0]], [0, 0, 1, 1], 2, trials=1)
    assert p["mean"] == 0.75, p

    # synthetic data, evaluation and sweep
    feats, labels, pnn = kp.generate_synthetic(dispersion=20.0, seed=0)
    assert len(feats) == 1000 and len(feats[0]) == 32 and 0.0 <= pnn <= 1.0
    stats = kp.distance_stats(feats, labels)
    assert stats["inter_mean"] > stats["intra_mean"]
    kprop = kp.evaluate(feats, labels, "kprop", tasks=50, seed=1)
    linear = kp.evaluate(feats, labels, "linear", tasks=50, seed=1)
    assert (kprop["components"], kprop["extra_labels"], kprop["sigma"]) == (1, 4, 16.0)
    curve = kp.sweep(feats, labels, [0, 4], tasks=50, seed=1)
    assert [m for m, _, _ in curve] == [0, 4]

    # file round trip
    with tempfile.TemporaryDirectory() as d:
        kp.save_features(os.path.join(d, "f.npy"), feats[:10])
        kp.save_labels(os.path.join(d, "l.npy"), labels[:10])
        assert kp.load_features(os.path.join(d, "f.npy")) == feats[:10]
        assert kp.load_labels(os.path.join(d, "l.npy")) == labels[:10]

    try:
        kp.KpcaModel([[0.0]], 1, sigma=-1.0)
    except ValueError:
        pass
    else:
        raise AssertionError("negative sigma accepted")

    print(f"p_NN {pnn:.3f}; kprop {kprop['mean']:.3f} vs linear {linear['mean']:.3f}; "
          f"sweep M=0 {curve[0][1]:.3f}, M=4 {curve[1][1]:.3f}")
    print("smoke test passed")


if __name__ == "__main__":
    main()
