"""Quick end-to-end check of the flatgad Python bindings.

    pip install --no-build-isolation -e crates/python
    python python/smoke_test.py
"""

import os
import sys
import tempfile

import numpy as np

import flatgad


def check(cond, what):
    if not cond:
        sys.exit(f"FAIL: {what}")
    print(f"ok   {what}")


def main():
    # a 6-cycle with one isolated node
    g = flatgad.Graph(7, [(i, (i + 1) % 6) for i in range(6)] + [(0, 1)])
    check(g.node_count == 7 and g.edge_count == 6, "graph dedups edges")
    check(list(g.degree()) == [2] * 6 + [0], "degrees")
    x = np.ones(7)
    check(np.allclose(g.adjacency_matvec(x), g.degree()), "A 1 = degree")
    lx = g.laplacian_matvec(x)
    check(abs(lx[6] - 1.0) < 1e-15, "isolated node row of L is the identity")

    emb = flatgad.laplacian_embeddings(g, 3)
    check(emb["zero_pairs"] == 1, "one zero pair for the edged component")
    check(emb["vectors"].shape == (7, 3), "embedding shape")
    check(np.allclose(emb["eigenvalues"], [0.5, 0.5, 1.0]), "cycle spectrum")

    pr = flatgad.pagerank(g)
    check(abs(pr.sum() - 1.0) < 1e-12 and (pr > 0).all(), "pagerank is a distribution")

    feats = np.arange(14, dtype=float).reshape(7, 2)
    bank = flatgad.wavelet_bank(g, feats, 2)
    check(np.allclose(sum(bank), 1.5 * feats), "order-2 bank sums to 3/2 I")

    check(flatgad.auroc([0.9, 0.1, 0.8, 0.3], [1, 0, 1, 0]) == 1.0, "auroc")
    check(abs(flatgad.auprc([0.9, 0.1, 0.8, 0.3], [0, 0, 1, 1]) - 7 / 12) < 1e-12, "auprc")

    ds = flatgad.synthetic_dataset(n=400, contextual=10, structural=10, seed=1)
    dg, dx, dy = ds["graph"], ds["features"], ds["labels"]
    check(int(dy.sum()) == 20, "synthetic anomalies")
    table, names = flatgad.flatten(dg, dx, k=8, order=2)
    check(table.shape == (400, 8 + 8 + 2 + 3 * 8) and len(names) == table.shape[1], "flattened table width")

    labeled, y, test = flatgad.generate_split(dy, n_labeled=60, n_anomalies=10, seed=3)
    check(len(labeled) == 60 and y.sum() == 10 and len(test) == 340, "split sizes")
    scores = flatgad.knn_scores(table[labeled], y, table[test])
    check(scores.shape == (340,) and ((0 <= scores) & (scores <= 1)).all(), "knn scores")

    with tempfile.TemporaryDirectory() as tmp:
        cmd = f"awk -v out={{out}} 'FNR > 1 {{ print \"0.25\" > out }}' {{test_x}}"
        ext = flatgad.external_scores(table[labeled], y, table[test[:5]], cmd, workdir=tmp)
        check(np.allclose(ext, 0.25), "external backend round trip")
        check(os.listdir(tmp) == [], "external backend leaves no files")

    r = flatgad.evaluate(dg, dx, dy, k=8, order=2, seeds=3, n_labeled=60, n_anomalies=10)
    check(r["completed"] == 3 and 0.0 <= r["auroc_mean"] <= 1.0, "evaluate")

    try:
        flatgad.Graph(2, [(0, 5)])
    except ValueError as e:
        check("out of range" in str(e), "bad edge raises ValueError")
    else:
        sys.exit("FAIL: bad edge accepted")

    print("all good")


if __name__ == "__main__":
    main()
