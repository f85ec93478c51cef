from ahlfors.cli import EXIT_FAIL, EXIT_INCONCLUSIVE, EXIT_PASS, EXIT_USAGE, main
from ahlfors.regularity import read_report_file
from ahlfors.trees import read_tree_file


def run(*args):
    return main([str(a) for a in args])


# -- gen-tree ---------------------------------------------------------------------


def test_gen_tree_writes_expected_file(tmp_path):
    out = tmp_path / "t.tree"
    assert run("gen-tree", "--spec", "homogeneous(2)", "--depth", 10, "--out", out) == EXIT_PASS
    tree = read_tree_file(out)
    assert tree.node_count == 2047


def test_gen_tree_is_deterministic(tmp_path):
    a = tmp_path / "a.tree"
    b = tmp_path / "b.tree"
    for out in (a, b):
        assert run("gen-tree", "--spec", "random(2,4,7)", "--depth", 8, "--out", out) == EXIT_PASS
    assert a.read_bytes() == b.read_bytes()


def test_gen_tree_usage_errors(tmp_path):
    assert run("gen-tree", "--spec", "nonsense(2)", "--depth", 4,
               "--out", tmp_path / "x") == EXIT_USAGE
    assert run("gen-tree", "--spec", "homogeneous(2)", "--depth", 0,
               "--out", tmp_path / "x") == EXIT_USAGE


# -- verify -----------------------------------------------------------------------


def test_verify_exact_homogeneous(tmp_path):
    report = tmp_path / "r.txt"
    code = run("verify", "--spec", "homogeneous(4)", "--depth", 10, "--Q", "2",
               "--report", report)
    assert code == EXIT_PASS
    docs = read_report_file(report)
    assert [d["keys"]["kind"] for d in docs] == ["counting", "stopping"]
    for d in docs:
        assert d["keys"]["lower"] == "1"
        assert d["keys"]["upper"] == "1"
        assert d["keys"]["drift"] == "stable"
        assert d["keys"]["status"] == "pass"


def test_verify_wrong_exponent_fails():
    assert run("verify", "--spec", "homogeneous(2)", "--depth", 10, "--Q", "2") == EXIT_FAIL


def test_verify_log2_exponent():
    assert run("verify", "--spec", "homogeneous(3)", "--depth", 8,
               "--Q", "log2(3)") == EXIT_PASS


def test_verify_drift_alone_is_inconclusive(tmp_path):
    # Q = 9/10 on the binary tree: the counting extrema creep upward with
    # the depth but stay well inside the ratio threshold, so the verdict is
    # exit 3 (inconclusive), not a hard fail.
    report = tmp_path / "r.txt"
    code = run("verify", "--spec", "homogeneous(2)", "--depth", 8,
               "--Q", "9/10", "--report", report)
    assert code == EXIT_INCONCLUSIVE
    docs = read_report_file(report)
    assert docs[0]["keys"]["drift"] == "detected"
    assert docs[0]["keys"]["status"] == "inconclusive"


def test_verify_k_max_over_depth_is_usage_error():
    assert run("verify", "--spec", "homogeneous(2)", "--depth", 6, "--Q", "1",
               "--k-max", 9) == EXIT_USAGE


def test_verify_tree_file_skips_drift(tmp_path):
    tree_file = tmp_path / "t.tree"
    run("gen-tree", "--spec", "homogeneous(2)", "--depth", 6, "--out", tree_file)
    report = tmp_path / "r.txt"
    assert run("verify", "--tree", tree_file, "--Q", "1", "--report", report) == EXIT_PASS
    docs = read_report_file(report)
    assert all(d["keys"]["drift"] == "unchecked" for d in docs)


def test_verify_needs_exactly_one_source(tmp_path):
    assert run("verify", "--Q", "1") == EXIT_USAGE
    tree_file = tmp_path / "t.tree"
    run("gen-tree", "--spec", "homogeneous(2)", "--depth", 4, "--out", tree_file)
    assert run("verify", "--spec", "homogeneous(2)", "--depth", 4,
               "--tree", tree_file, "--Q", "1") == EXIT_USAGE


# -- extract ----------------------------------------------------------------------


def test_extract_writes_all_artifacts(tmp_path):
    w = tmp_path / "w.tree"
    y = tmp_path / "y.leaves"
    report = tmp_path / "r.txt"
    code = run("extract", "--spec", "homogeneous(2)", "--depth", 12,
               "--Q", "1", "--alpha", "1/2",
               "--out-tree", w, "--out-leaves", y, "--report", report)
    assert code == EXIT_PASS
    thinned = read_tree_file(w)
    assert thinned.D == 12
    assert y.read_text().splitlines()[0] == "leaves v1"
    docs = read_report_file(report)
    assert [d["keys"]["kind"] for d in docs] == ["counting", "measure"]


def test_extract_report_replays_bit_identically(tmp_path):
    a = tmp_path / "a.txt"
    b = tmp_path / "b.txt"
    for report in (a, b):
        assert run("extract", "--spec", "homogeneous(4)", "--depth", 8,
                   "--Q", "2", "--alpha", "1", "--report", report) == EXIT_PASS
    assert a.read_bytes() == b.read_bytes()


def test_extract_alpha_at_Q_is_usage_error():
    assert run("extract", "--spec", "homogeneous(2)", "--depth", 8,
               "--Q", "1", "--alpha", "1") == EXIT_USAGE


# -- homogenize / audit-f ------------------------------------------------------------


def test_homogenize_preserves_block_counts(tmp_path, capsys):
    out = tmp_path / "u.tree"
    code = run("homogenize", "--spec", "homogeneous(2)", "--depth", 8, "--k", 2,
               "--out-tree", out)
    assert code == EXIT_PASS
    msg = capsys.readouterr().out
    assert "block-level counts" in msg
    graded = read_tree_file(out)
    assert graded.D == 8


def test_audit_f_reports_constant(capsys):
    assert run("audit-f", "--spec", "homogeneous(2)", "--depth", 8, "--k", 2) == EXIT_PASS
    out = capsys.readouterr().out
    assert "measured constant 2.0" in out


def test_thin_command_matches_schedule(tmp_path, capsys):
    out = tmp_path / "w.tree"
    code = run("thin", "--spec", "homogeneous(2)", "--depth", 10, "--k", 1,
               "--ratio", "1/2", "--out-tree", out)
    assert code == EXIT_PASS
    assert "32 leaves" in capsys.readouterr().out  # 2^E(10) = 2^5
    thinned = read_tree_file(out)
    assert len(thinned.leaves()) == 32
    # degenerate ratio keeps every block child: the output is the full
    # graded tree (level nodes plus spines), with all 2^6 leaves intact
    code = run("thin", "--spec", "homogeneous(2)", "--depth", 6, "--k", 2,
               "--ratio", "1", "--out-tree", out)
    assert code == EXIT_PASS
    thinned = read_tree_file(out)
    assert len(thinned.leaves()) == 64
    assert thinned.node_count == 169  # 1+4+4+16+16+64+64


# -- dyadize / project ----------------------------------------------------------------


def test_dyadize_grid_passes(tmp_path):
    out = tmp_path / "h.txt"
    assert run("dyadize", "--grid", 32, "--delta", "1/8", "--c2", "1/8",
               "--out", out) == EXIT_PASS
    assert out.read_text().startswith("hierarchy v1 delta=1/8")


def test_dyadize_rejects_bad_parameters():
    assert run("dyadize", "--grid", 32, "--delta", "1/4", "--c2", "1/16") == EXIT_USAGE


def test_project_all_leaves(capsys):
    assert run("project", "--grid", 16, "--delta", "1/8", "--c2", "1/8") == EXIT_PASS
    out = capsys.readouterr().out
    assert "onto 256 points" in out


def test_transport_chain_pure_cli(tmp_path, capsys):
    cube = tmp_path / "cube.tree"
    leaves = tmp_path / "y.leaves"
    assert run("dyadize", "--grid", 32, "--delta", "1/8", "--c2", "1/8",
               "--out-tree", cube) == EXIT_PASS
    assert run("extract", "--tree", cube, "--Q", "6", "--alpha", "3",
               "--out-leaves", leaves) == EXIT_PASS
    code = run("project", "--grid", 32, "--delta", "1/8", "--c2", "1/8",
               "--leaves", leaves, "--alpha", "1")
    assert code == EXIT_PASS
    assert "onto 16 points" in capsys.readouterr().out


def test_project_respects_leaf_file(tmp_path, capsys):
    w = tmp_path / "w.tree"
    y = tmp_path / "y.leaves"
    # extract on the grid's cube tree: first dyadize to a tree file via the API
    from ahlfors.construct import extract_regular_subspace
    from ahlfors.dyadic import christ_decompose, grid_space, hierarchy_tree
    from ahlfors.exact import Exponent
    from ahlfors.trees import write_leaf_file
    from fractions import Fraction

    h = christ_decompose(grid_space(32), Fraction(1, 8), Fraction(1, 8))
    tree, _ = hierarchy_tree(h)
    res = extract_regular_subspace(tree, Exponent.parse("6"), Fraction(3))
    write_leaf_file(res.subspace_ids, y)
    report = tmp_path / "r.txt"
    code = run("project", "--grid", 32, "--delta", "1/8", "--c2", "1/8",
               "--leaves", y, "--alpha", "1", "--report", report)
    assert code == EXIT_PASS
    assert "onto 16 points" in capsys.readouterr().out


# -- report ------------------------------------------------------------------------


def test_report_summary_exit_codes(tmp_path, capsys):
    ok = tmp_path / "ok.txt"
    run("verify", "--spec", "homogeneous(2)", "--depth", 8, "--Q", "1", "--report", ok)
    assert run("report", ok) == EXIT_PASS
    bad = tmp_path / "bad.txt"
    run("verify", "--spec", "homogeneous(2)", "--depth", 8, "--Q", "2", "--report", bad)
    assert run("report", bad) == EXIT_FAIL
    capsys.readouterr()


def test_unknown_command_is_usage_error():
    assert run("frobnicate") == EXIT_USAGE


def test_threads_env_validation(monkeypatch):
    monkeypatch.setenv("AHLFORS_THREADS", "zebra")
    assert run("report", "nowhere.txt") == EXIT_USAGE
    monkeypatch.setenv("AHLFORS_THREADS", "2")
    monkeypatch.delenv("AHLFORS_THREADS", raising=False)
