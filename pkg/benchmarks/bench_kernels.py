"""Time the compiled tree kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Each kernel gets the same inputs on both backends and the outputs are
checked for agreement before any timing is reported.
"""
import argparse
import timeit

import numpy as np

from clfaudit._kernels import backends
from clfaudit.data import from_arrays
from clfaudit.models import fit_random_forest


def _inputs(seed=0):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(1500, 6))
    y = (X[:, 0] + X[:, 1] * X[:, 2] + 0.3 * rng.normal(size=1500) > 0).astype(np.int64)
    forest = fit_random_forest(from_arrays(X, y, [f"x{k}" for k in range(6)]), n_trees=50, seed=seed)
    grid = np.ascontiguousarray(rng.normal(size=(20000, 6)))
    return X, y, forest.packed, grid


def cases(X, y, pk, grid):
    Xc = np.ascontiguousarray(X)
    idx = np.arange(X.shape[0], dtype=np.int64)
    feats = np.arange(X.shape[1], dtype=np.int64)
    masks = np.arange(2 ** X.shape[1], dtype=np.int64)
    rows = Xc[:40]
    return {
        "best_split (1500 rows, 6 features)":
            lambda k: k.best_split(Xc, y, idx, feats, 1),
        "forest_predict (50 trees, 20000 rows)":
            lambda k: k.forest_predict(pk["feature"], pk["threshold"], pk["left"], pk["right"],
                                       pk["value"], pk["roots"], grid),
        "tree_expectations (50 trees, 40 rows x 64 masks)":
            lambda k: k.tree_expectations(pk["feature"], pk["threshold"], pk["left"], pk["right"],
                                          pk["value"], pk["cover"], pk["roots"], pk["ends"], rows, masks),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)

    impls = backends()
    if "cython" not in impls:
        print("compiled backend not built; only the fallback is available")
    names = list(impls)
    print(f"{'kernel':<50}" + "".join(f"{n:>12}" for n in names) + ("     speedup" if len(names) > 1 else ""))
    for label, call in cases(*_inputs()).items():
        outs = [call(impls[n]) for n in names]
        for o in outs[1:]:
            a, b = (np.asarray(outs[0], dtype=float), np.asarray(o, dtype=float)) \
                if not isinstance(o, tuple) else (np.asarray(outs[0][:2], dtype=float), np.asarray(o[:2], dtype=float))
            if not np.allclose(a, b, rtol=0, atol=1e-12):
                raise SystemExit(f"{label}: backends disagree")
        best = [min(timeit.repeat(lambda m=impls[n]: call(m), number=1, repeat=args.repeat)) for n in names]
        line = f"{label:<50}" + "".join(f"{t * 1e3:>10.2f}ms" for t in best)
        if len(best) > 1:
            line += f"{best[0] / best[1]:>11.1f}x"
        print(line)


if __name__ == "__main__":
    main()
