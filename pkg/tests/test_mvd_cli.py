import csv
import io
import math

import numpy as np
import pytest

from modalmatrix import cli
from modalmatrix.datagen import generate, preset_prototypes, setting_config
from modalmatrix.errors import DimensionError
from modalmatrix.mvd import MvdFormatError, format_mvd, load_mvd, read_labels, read_mvd, save_mvd, write_labels
from modalmatrix.tensor_core import Dataset


def run(*argv):
    out = io.StringIO()
    code = cli.main([str(a) for a in argv], out=out)
    return code, out.getvalue()


def _read_report(path):
    return dict(line.split("=", 1) for line in path.read_text().splitlines())


# ------------------------------------------------------------------ MVD format

def test_mvd_roundtrip_is_exact(rng, tmp_path):
    X = rng.normal(size=(13, 3, 4)) * 10.0 ** rng.integers(-300, 300, size=(13, 3, 4))
    labels = rng.integers(0, 5, size=13)
    path = tmp_path / "x.mvd"
    save_mvd(path, X, labels, meta={"seed": 9})
    data, lab, meta = load_mvd(path)
    assert np.array_equal(data.values, X)
    assert np.array_equal(lab, labels)
    assert meta == {"seed": "9"}
    assert path.read_text().splitlines()[0] == "mvd 1 13 3 4"


def test_mvd_layout_is_row_major():
    text = format_mvd(np.arange(6.0).reshape(1, 2, 3))
    assert text == "mvd 1 1 2 3\n0 1 2 3 4 5\n"
    data, labels, _ = read_mvd(text)
    assert labels is None
    assert data[0].tolist() == [[0, 1, 2], [3, 4, 5]]


@pytest.mark.parametrize("text", [
    "",
    "mvx 1 1 1 1\n0\n",
    "mvd 2 1 1 1\n0\n",
    "mvd 1 2 1 1\n0\n",
    "mvd 1 1 1 2\n0\n",
    "mvd 1 1 1 1\nfoo\n",
    "mvd 1 1 1 1\nnan\n",
    "mvd 1 2 1 1\n0\n1\n# labels: 0\n",
    "mvd 1 1 1 1\n0\n# labels: x\n",
    "mvd 1 0 1 1\n",
])
def test_mvd_rejects_malformed(text):
    with pytest.raises(MvdFormatError):
        read_mvd(text)


def test_mvd_label_length_checked():
    with pytest.raises(DimensionError):
        format_mvd(np.zeros((2, 1, 1)), labels=[0])


def test_labels_files(tmp_path):
    write_labels(tmp_path / "a.labels", [3, 1, 2])
    assert (tmp_path / "a.labels").read_text() == "3\n1\n2\n"
    assert read_labels(tmp_path / "a.labels").tolist() == [3, 1, 2]
    save_mvd(tmp_path / "b.mvd", np.zeros((2, 1, 1)), [4, 5])
    assert read_labels(tmp_path / "b.mvd").tolist() == [4, 5]
    save_mvd(tmp_path / "c.mvd", np.zeros((2, 1, 1)))
    with pytest.raises(MvdFormatError):
        read_labels(tmp_path / "c.mvd")


# ------------------------------------------------------------------ generate

def test_generate_contract(tmp_path):
    args = ["generate", "--preset", "two-balanced", "--n", 200, "--rho", 1, "--sigma", 1, "--seed", 7]
    code, out = run(*args, "-o", tmp_path / "d.mvd")
    assert code == 0
    assert "N=200 P=5 T=5" in out and "counts=" in out
    data, labels, meta = load_mvd(tmp_path / "d.mvd")
    assert len(data) == 200 and labels.shape == (200,)
    assert meta["rng"] == "numpy-philox4x64/seedsequence-spawn-v1" and meta["seed"] == "7"
    counts = [int(c) for c in out.split("counts=")[1].split(",")]
    assert counts == np.bincount(labels).tolist()
    run(*args, "-o", tmp_path / "e.mvd")
    assert (tmp_path / "d.mvd").read_bytes() == (tmp_path / "e.mvd").read_bytes()
    # library and CLI agree
    ref, ref_labels = generate(setting_config("two-balanced", N=200, seed=7))
    assert np.array_equal(ref.values, data.values) and np.array_equal(ref_labels, labels)


def test_generate_rho_zero_duplicates_prototypes(tmp_path):
    code, _ = run("generate", "--prototypes", "A,B", "--weights", "0.3,0.7", "--n", 30,
                  "--rho", 0, "--seed", 1, "-o", tmp_path / "z.mvd")
    assert code == 0
    data, labels, _ = load_mvd(tmp_path / "z.mvd")
    protos = [preset_prototypes("A").M, preset_prototypes("B").M]
    for x, j in zip(data.values, labels):
        assert np.array_equal(x, protos[j])


def test_generate_config_file(tmp_path):
    cfg = tmp_path / "g.cfg"
    cfg.write_text("preset = single\nn = 12\np = 3\nt = 4\nseed = 5\n")
    code, out = run("generate", "--config", cfg, "-o", tmp_path / "g.mvd")
    assert code == 0 and "N=12 P=3 T=4" in out
    cfg.write_text("bogus = 1\n")
    assert run("generate", "--config", cfg, "-o", tmp_path / "h.mvd")[0] == 2


@pytest.mark.parametrize("extra", [["--rho", 2], ["--weights", "0.5,0.4"], ["--prototypes", "Q"],
                                   ["--sigma", 0], ["--n", 0]])
def test_generate_bad_config_exits_2(tmp_path, extra):
    code, _ = run("generate", *extra, "-o", tmp_path / "x.mvd")
    assert code == 2


def test_generate_io_failure_exits_3(tmp_path):
    code, _ = run("generate", "--n", 5, "-o", tmp_path / "missing" / "x.mvd")
    assert code == 3


def test_usage_errors_exit_2():
    assert run()[0] == 2
    assert run("frobnicate")[0] == 2
    assert run("cluster")[0] == 2


# ------------------------------------------------------------------ cluster

@pytest.fixture(scope="module")
def balanced(tmp_path_factory):
    path = tmp_path_factory.mktemp("bal") / "d.mvd"
    assert cli.main(["generate", "--preset", "two-balanced", "--n", "200", "--seed", "7", "-o", str(path)],
                    out=io.StringIO()) == 0
    return path


def test_cluster_balloon_auto5(balanced, tmp_path):
    prefix = tmp_path / "run"
    code, out = run("cluster", balanced, "--estimator", "balloon", "--k", "auto5", "--out", prefix)
    assert code == 0
    rep = _read_report(tmp_path / "run.report")
    assert rep["M"] == "2" and rep["k"] == str(math.floor(5 * math.sqrt(200) + 0.5))
    assert sum(int(s) for s in rep["cluster_sizes"].split(",")) == 200
    assert float(rep["wall_time"]) >= 0
    labels = read_labels(tmp_path / "run.labels")
    modes, _, _ = load_mvd(tmp_path / "run.modes.mvd")
    assert labels.shape == (200,) and len(modes) == 2
    code, out = run("evaluate", balanced, tmp_path / "run.labels")
    assert code == 0 and out.startswith("FM=1.000000")


def test_cluster_threads_identical(balanced, tmp_path):
    for est in ("balloon", "fixed", "samplepoint"):
        for t in (1, 8):
            assert run("cluster", balanced, "--estimator", est, "--threads", t, "--out", tmp_path / f"{est}{t}")[0] == 0
        assert (tmp_path / f"{est}1.labels").read_bytes() == (tmp_path / f"{est}8.labels").read_bytes()
        assert (tmp_path / f"{est}1.modes.mvd").read_bytes() == (tmp_path / f"{est}8.modes.mvd").read_bytes()


def test_cluster_fixed_reports_bandwidth(balanced, tmp_path):
    from modalmatrix.density import normal_scale_gradient_bandwidth

    assert run("cluster", balanced, "--estimator", "fixed", "--out", tmp_path / "f")[0] == 0
    rep = _read_report(tmp_path / "f.report")
    data, _, _ = load_mvd(balanced)
    assert float(rep["h"]) == normal_scale_gradient_bandwidth(data)
    assert run("cluster", balanced, "--estimator", "fixed", "--h", "3.5", "--out", tmp_path / "g")[0] == 0
    assert float(_read_report(tmp_path / "g.report")["h"]) == 3.5


def test_cluster_standardize_returns_original_units(tmp_path):
    X = np.concatenate([np.full((5, 1, 2), [[0.0, 100.0]]), np.full((5, 1, 2), [[1.0, 300.0]])])
    X = X + np.linspace(0, 1e-3, 10)[:, None, None]
    save_mvd(tmp_path / "s.mvd", X)
    assert run("cluster", tmp_path / "s.mvd", "--estimator", "fixed", "--h", "0.5",
               "--standardize", "--out", tmp_path / "s")[0] == 0
    modes, _, _ = load_mvd(tmp_path / "s.modes.mvd")
    assert len(modes) == 2
    np.testing.assert_allclose(np.sort(modes.values[:, 0, 1]), [100.0005, 300.0005], atol=1e-3)


def test_cluster_degenerate_bandwidth_exits_4(tmp_path, capsys):
    X = np.r_[np.zeros(5), 1.0, 2.0, 3.0]
    save_mvd(tmp_path / "dup.mvd", X.reshape(-1, 1, 1))
    code, _ = run("cluster", tmp_path / "dup.mvd", "--estimator", "samplepoint", "--k", 2, "--h", 1,
                  "--out", tmp_path / "dup")
    assert code == 4
    assert "indices" in capsys.readouterr().err


def test_cluster_bad_inputs(tmp_path):
    assert run("cluster", tmp_path / "nope.mvd")[0] == 3
    (tmp_path / "bad.mvd").write_text("mvd 1 2 1 1\n0\n")
    assert run("cluster", tmp_path / "bad.mvd")[0] == 2
    save_mvd(tmp_path / "ok.mvd", np.arange(10.0).reshape(10, 1, 1))
    assert run("cluster", tmp_path / "ok.mvd", "--k", "lots")[0] == 2
    assert run("cluster", tmp_path / "ok.mvd", "--estimator", "fixed", "--h", "-1")[0] == 2


# ------------------------------------------------------------------ evaluate

@pytest.mark.parametrize("a,b,expected", [
    ([0, 0, 1, 1, 1], [0, 0, 1, 1, 1], "FM=1.000000"),
    ([1, 1, 2, 2], [1, 1, 1, 2], "FM=0.408248"),
    ([0, 1, 2, 3], [0, 0, 0, 0], "FM=0.000000"),
])
def test_evaluate_examples(tmp_path, a, b, expected):
    write_labels(tmp_path / "a", a)
    write_labels(tmp_path / "b", b)
    code, out = run("evaluate", tmp_path / "a", tmp_path / "b")
    assert code == 0 and out.splitlines()[0] == expected
    assert len(out.splitlines()) == 2 + len(set(a))


def test_evaluate_length_mismatch(tmp_path):
    write_labels(tmp_path / "a", [0, 1])
    write_labels(tmp_path / "b", [0, 1, 1])
    assert run("evaluate", tmp_path / "a", tmp_path / "b")[0] == 2


# ------------------------------------------------------------------ density

def test_density_single_point_closed_form(tmp_path):
    save_mvd(tmp_path / "one.mvd", np.array([[[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]]]))
    code, out = run("density", tmp_path / "one.mvd", tmp_path / "one.mvd", "--estimator", "fixed", "--h", 1)
    assert code == 0
    assert float(out) == pytest.approx(-3.0 * math.log(2 * math.pi), rel=1e-14)


def test_density_oversmoothed_is_flat(rng, tmp_path):
    save_mvd(tmp_path / "d.mvd", rng.normal(size=(40, 2, 2)))
    code, out = run("density", tmp_path / "d.mvd", tmp_path / "d.mvd", "--estimator", "fixed", "--h", 1e3)
    vals = np.exp(np.array([float(v) for v in out.split()]))
    assert code == 0 and vals.size == 40
    assert (vals.max() - vals.min()) / vals.mean() < 0.01


def test_density_duplicate_queries_and_shape_check(rng, tmp_path):
    save_mvd(tmp_path / "d.mvd", rng.normal(size=(20, 2, 2)))
    q = rng.normal(size=(1, 2, 2))
    save_mvd(tmp_path / "q.mvd", np.concatenate([q, q, q]))
    code, out = run("density", tmp_path / "d.mvd", tmp_path / "q.mvd", "--k", 5)
    lines = out.split()
    assert code == 0 and len(lines) == 3 and len(set(lines)) == 1
    save_mvd(tmp_path / "w.mvd", rng.normal(size=(2, 1, 4)))
    assert run("density", tmp_path / "d.mvd", tmp_path / "w.mvd")[0] == 2


# ------------------------------------------------------------------ bench

SPEC = """
[two-balanced]
n = 60
replicates = 2
methods = balloon-5
seed = 11
"""


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_bench_contract_and_determinism(tmp_path):
    (tmp_path / "s.ini").write_text(SPEC)
    assert run("bench", tmp_path / "s.ini", "-o", tmp_path / "a.csv")[0] == 0
    assert run("bench", tmp_path / "s.ini", "-o", tmp_path / "b.csv", "--threads", 4)[0] == 0
    header = (tmp_path / "a.csv").read_text().splitlines()[0]
    assert header == "setting,method,replicate,fm,n_clusters,status,seconds"
    a, b = _rows(tmp_path / "a.csv"), _rows(tmp_path / "b.csv")
    assert len(a) == 2 and all(r["status"] == "ok" for r in a)
    strip = lambda rows: [{k: v for k, v in r.items() if k != "seconds"} for r in rows]
    assert strip(a) == strip(b)
    summary = _rows(tmp_path / "a.summary.csv")
    assert len(summary) == 1 and summary[0]["method"] == "balloon-5"
    fm = sorted(float(r["fm"]) for r in a)
    assert float(summary[0]["median_fm"]) == pytest.approx(np.median(fm), abs=1e-6)


def test_bench_all_methods_and_failures_recorded(tmp_path):
    (tmp_path / "s.ini").write_text(
        "[tiny]\nsetting = single\nn = 12\np = 2\nt = 2\nreplicates = 1\nseed = 3\nkmax = 4\nrestarts = 2\n")
    assert run("bench", tmp_path / "s.ini", "-o", tmp_path / "a.csv")[0] == 0
    rows = _rows(tmp_path / "a.csv")
    assert [r["method"] for r in rows] == list(cli.METHODS)
    for r in rows:
        assert r["status"] == "ok" or r["status"].startswith("error:")
        if r["status"] != "ok":
            assert r["fm"] == "nan"


@pytest.mark.parametrize("spec", ["", "[x]\nsetting = nope\n", "[two-balanced]\nmethods = magic\n",
                                  "[two-balanced]\nreplicates = 0\n", "[s]\nprototypes = A,Z\n"])
def test_bench_bad_spec_exits_2(tmp_path, spec):
    (tmp_path / "s.ini").write_text(spec)
    assert run("bench", tmp_path / "s.ini", "-o", tmp_path / "a.csv")[0] == 2
