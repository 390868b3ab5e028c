//! Drives the extension module through an embedded interpreter.

use std::ffi::CString;

use pyo3::prelude::*;
use pyo3::types::PyDict;
use pyo3::wrap_pymodule;

use flatgad_py::flatgad_module;

fn run(code: &str) {
    Python::attach(|py| {
        if py.import("numpy").is_err() {
            eprintln!("numpy not importable; skipping");
            return;
        }
        let m = wrap_pymodule!(flatgad_module)(py);
        let globals = PyDict::new(py);
        globals.set_item("flatgad", m).unwrap();
        globals.set_item("np", py.import("numpy").unwrap()).unwrap();
        let code = CString::new(code).unwrap();
        if let Err(e) = py.run(&code, Some(&globals), None) {
            e.print(py);
            panic!("python code failed");
        }
    });
}

#[test]
fn graph_and_operators() {
    run(r#"
g = flatgad.Graph(4, [(0, 1), (1, 2), (1, 0), (2, 2)])
assert (g.node_count, g.edge_count) == (4, 2)
assert g.edges() == [(0, 1), (1, 2)]
assert list(g.neighbors(1)) == [0, 2]
assert list(g.adjacency_matvec(np.ones(4))) == [1, 2, 1, 0]
count, comp = g.connected_components()
assert count == 2 and comp[0] == comp[2] != comp[3]
y = g.laplacian_matvec(np.array([1.0, 0.0, 0.0, 5.0]))
assert abs(y[0] - 1.0) < 1e-15 and abs(y[1] + 2 ** -0.5) < 1e-15 and y[3] == 5.0
"#);
}

#[test]
fn pipeline_functions() {
    run(r#"
g = flatgad.Graph(6, [(i, (i + 1) % 6) for i in range(6)])
e = flatgad.laplacian_embeddings(g, 2)
assert e["zero_pairs"] == 1 and e["padded"] == 0
assert np.allclose(e["eigenvalues"], [0.5, 0.5])
deg, pr = flatgad.structural_characteristics(g)
assert np.allclose(deg, 2) and np.allclose(pr, 1 / 6)
x = np.random.default_rng(0).normal(size=(6, 3))
w = flatgad.apply_wavelet(g, x, 0, 1)
bank = flatgad.wavelet_bank(g, x, 1)
assert np.allclose(bank[0], w) and np.allclose(bank[0] + bank[1], x)
t, names = flatgad.flatten(g, x, k=2, order=1, mask="raw,nbr")
assert t.shape == (6, 9) and len(names) == 9
assert np.allclose(t[:, :3], x)
"#);
}

#[test]
fn errors_map_to_python_exceptions() {
    run(r#"
def raises(exc, f, *a, **kw):
    try:
        f(*a, **kw)
    except exc:
        return
    raise AssertionError(f"{f.__name__} did not raise {exc.__name__}")

g = flatgad.Graph(3, [(0, 1)])
raises(ValueError, flatgad.Graph, 2, [(0, 2)])
raises(ValueError, flatgad.wavelet_bank, g, np.zeros((3, 1)), 0)
raises(ValueError, g.laplacian_matvec, np.zeros(2))
raises(ValueError, flatgad.auroc, [0.1, 0.2], [1, 1])
raises(OSError, flatgad.Graph.from_edge_list, "/nonexistent/edges.txt", 3)
raises(RuntimeError, flatgad.external_scores, np.zeros((2, 1)), np.array([0, 1], dtype=np.uint8),
       np.zeros((1, 1)), "false")
raises(TimeoutError, flatgad.external_scores, np.zeros((2, 1)), np.array([0, 1], dtype=np.uint8),
       np.zeros((1, 1)), "sleep 5", timeout=0.2)
raises(ValueError, flatgad.evaluate, g, np.zeros((3, 1)), np.zeros(3, dtype=np.uint8), order="seven")
"#);
}

#[test]
fn experiment_entry_points() {
    run(r#"
ds = flatgad.synthetic_dataset(n=300, contextual=10, structural=10, seed=2)
g, x, y = ds["graph"], ds["features"], ds["labels"]
assert g.node_count == 300 and x.shape == (300, 8) and y.sum() == 20
ids, ly, test = flatgad.generate_split(y, n_labeled=40, n_anomalies=8, seed=5)
assert ly.sum() == 8 and len(set(ids) | set(test)) == 300
s = flatgad.knn_scores(x[ids], ly, x[test], k_neighbors=3)
assert set(np.round(s * 3).astype(int)) <= {0, 1, 2, 3}
r = flatgad.evaluate(g, x, y, k=4, order="auto", seeds=2, n_labeled=40, n_anomalies=8)
assert r["completed"] == 2 and all(c in (1, 2, 3) for c in r["order"])
assert r["report"].startswith("config.k = 4\n")
ladder = flatgad.evaluate(g, x, y, k=4, order=1, seeds=2, n_labeled=40, n_anomalies=8, ablate=True)
assert [r["mask"] for r in ladder] == ["raw", "raw,nbr", "raw,char,nbr", "raw,lap,char,nbr"]
"#);
}
