use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn cma(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cma")).args(args).output().unwrap()
}

fn ok(args: &[&str]) {
    let out = cma(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn synth(dir: &Path, name: &str, n: usize, seed: u64) -> PathBuf {
    let path = dir.join(name);
    ok(&[
        "synth",
        "--k",
        "6",
        "--n",
        &n.to_string(),
        "--coeffs",
        "-1.5,1,0,0,1,0,1",
        "--active",
        "0,3,5",
        "--seed",
        &seed.to_string(),
        "--out",
        p(&path),
    ]);
    path
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut rdr = csv::Reader::from_path(path).unwrap();
    let header = rdr.headers().unwrap().iter().map(str::to_owned).collect();
    let rows = rdr
        .records()
        .map(|r| r.unwrap().iter().map(str::to_owned).collect())
        .collect();
    (header, rows)
}

fn column(header: &[String], rows: &[Vec<String>], name: &str) -> Vec<String> {
    let i = header.iter().position(|h| h == name).unwrap();
    rows.iter().map(|r| r[i].clone()).collect()
}

fn floats(v: &[String]) -> Vec<f64> {
    v.iter().map(|s| s.parse().unwrap()).collect()
}

#[test]
fn synth_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let a = synth(dir.path(), "a.csv", 200, 9);
    let b = synth(dir.path(), "b.csv", 200, 9);
    let c = synth(dir.path(), "c.csv", 200, 10);
    let read = |p: &Path| std::fs::read(p).unwrap();
    assert_eq!(read(&a), read(&b));
    assert_ne!(read(&a), read(&c));
    let (header, rows) = read_csv(&a);
    assert_eq!(header, ["x1", "x2", "x3", "x4", "x5", "x6", "class"]);
    assert_eq!(rows.len(), 200);
}

#[test]
fn fit_writes_one_row_per_model() {
    let dir = TempDir::new().unwrap();
    let data = synth(dir.path(), "train.csv", 150, 1);
    let out = dir.path().join("fit.csv");
    ok(&["fit", "--data", p(&data), "--out", p(&out)]);
    let (header, rows) = read_csv(&out);
    assert_eq!(rows.len(), 64);
    let total: f64 = floats(&column(&header, &rows, "posterior_weight")).iter().sum();
    assert!((total - 1.0).abs() < 1e-9);
    assert_eq!(column(&header, &rows, "covariates")[0], "");
    assert_eq!(column(&header, &rows, "size")[63], "6");
}

#[test]
fn fit_reads_prior_config() {
    let dir = TempDir::new().unwrap();
    let data = synth(dir.path(), "train.csv", 150, 2);
    let cfg = dir.path().join("bb.toml");
    std::fs::write(&cfg, "prior = \"bb\"\nalpha = 2.0\nbeta = 3.0\n").unwrap();
    let (uniform, beta) = (dir.path().join("u.csv"), dir.path().join("b.csv"));
    ok(&["fit", "--data", p(&data), "--out", p(&uniform)]);
    ok(&["fit", "--data", p(&data), "--prior-config", p(&cfg), "--out", p(&beta)]);
    let (h, a) = read_csv(&uniform);
    let (_, b) = read_csv(&beta);
    assert_eq!(column(&h, &a, "bic"), column(&h, &b, "bic"));
    assert_ne!(column(&h, &a, "posterior_weight"), column(&h, &b, "posterior_weight"));
}

#[test]
fn credal_predictions_contain_point_predictions() {
    let dir = TempDir::new().unwrap();
    let train = synth(dir.path(), "train.csv", 120, 3);
    let test = synth(dir.path(), "test.csv", 80, 4);
    let (bma, cma_ib, cma_exp) = (
        dir.path().join("bma.csv"),
        dir.path().join("ib.csv"),
        dir.path().join("exp.csv"),
    );
    ok(&[
        "predict",
        "--data",
        p(&train),
        "--test",
        p(&test),
        "--method",
        "bma_ib",
        "--out",
        p(&bma),
    ]);
    ok(&[
        "predict",
        "--data",
        p(&train),
        "--test",
        p(&test),
        "--method",
        "cma_ib",
        "--out",
        p(&cma_ib),
    ]);
    ok(&[
        "predict",
        "--data",
        p(&train),
        "--test",
        p(&test),
        "--method",
        "cma_exp",
        "--out",
        p(&cma_exp),
    ]);

    let (h, point_rows) = read_csv(&bma);
    let point = floats(&column(&h, &point_rows, "p_point"));
    assert_eq!(point.len(), 80);
    let (h, ib_rows) = read_csv(&cma_ib);
    assert!(column(&h, &ib_rows, "p_point").iter().all(String::is_empty));
    let (lo, hi) = (
        floats(&column(&h, &ib_rows, "p_lo")),
        floats(&column(&h, &ib_rows, "p_hi")),
    );
    let decisions = column(&h, &ib_rows, "decision");
    for i in 0..80 {
        assert!(lo[i] - 1e-9 <= point[i] && point[i] <= hi[i] + 1e-9);
        assert!(["c0", "c1", "both"].contains(&decisions[i].as_str()));
    }
    let (h, exp_rows) = read_csv(&cma_exp);
    assert!(floats(&column(&h, &exp_rows, "p_lo"))
        .iter()
        .zip(floats(&column(&h, &exp_rows, "p_hi")))
        .all(|(l, h)| *l <= h));
}

#[test]
fn degenerate_credal_set_gives_point_inclusion() {
    let dir = TempDir::new().unwrap();
    let data = synth(dir.path(), "train.csv", 150, 5);
    let (point, credal) = (dir.path().join("point.csv"), dir.path().join("credal.csv"));
    ok(&[
        "inclusion",
        "--data",
        p(&data),
        "--method",
        "bma_ib",
        "--theta",
        "0.3",
        "--out",
        p(&point),
    ]);
    ok(&[
        "inclusion",
        "--data",
        p(&data),
        "--method",
        "cma_ib",
        "--theta-lo",
        "0.3",
        "--theta-hi",
        "0.3",
        "--out",
        p(&credal),
    ]);
    let (h, a) = read_csv(&point);
    let (_, b) = read_csv(&credal);
    let pt = floats(&column(&h, &a, "point"));
    let (lo, hi) = (floats(&column(&h, &b, "lo")), floats(&column(&h, &b, "hi")));
    for j in 0..6 {
        assert_eq!(lo[j], hi[j]);
        assert!((lo[j] - pt[j]).abs() < 1e-9);
    }
}

#[test]
fn canned_config_matches_builtin_default() {
    let dir = TempDir::new().unwrap();
    let data = synth(dir.path(), "train.csv", 150, 6);
    let hull = concat!(env!("CARGO_MANIFEST_DIR"), "/configs/experts_hull.toml");
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    ok(&["inclusion", "--data", p(&data), "--method", "cma_exp", "--out", p(&a)]);
    ok(&[
        "inclusion",
        "--data",
        p(&data),
        "--method",
        "cma_nb",
        "--config",
        hull,
        "--out",
        p(&b),
    ]);
    let (h, ra) = read_csv(&a);
    let (_, rb) = read_csv(&b);
    assert_eq!(column(&h, &ra, "lo"), column(&h, &rb, "lo"));
    assert_eq!(column(&h, &ra, "hi"), column(&h, &rb, "hi"));
}

#[test]
fn experiment_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let data = synth(dir.path(), "source.csv", 1500, 7);
    let protocol = dir.path().join("protocol.toml");
    std::fs::write(
        &protocol,
        "sizes = [40, 80]\ninclusion_sizes = [200]\nreplicates = 2\ntest_size = 200\nseed = 11\nmethods = [\"bma_ib\", \"cma_ib\"]\n",
    )
    .unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        ok(&[
            "experiment",
            "--data",
            p(&data),
            "--protocol-config",
            p(&protocol),
            "--out-dir",
            p(out),
        ]);
    }
    for file in [
        "metrics.csv",
        "metrics_summary.csv",
        "inclusion.csv",
        "inclusion_summary.csv",
    ] {
        let x = std::fs::read(a.join(file)).unwrap();
        assert!(!x.is_empty());
        assert_eq!(x, std::fs::read(b.join(file)).unwrap(), "{file}");
    }
    let (_, rows) = read_csv(&a.join("metrics.csv"));
    assert_eq!(rows.len(), 2 * 2 * 2);
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    let data = synth(dir.path(), "train.csv", 60, 8);
    let out = dir.path().join("out.csv");

    assert_eq!(cma(&["--help"]).status.code(), Some(0));
    let bad_flag = cma(&["fit", "--data", p(&data), "--out", p(&out), "--bogus"]);
    assert_eq!(bad_flag.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&bad_flag.stderr).starts_with("error:"));
    let bad_method = cma(&["inclusion", "--data", p(&data), "--method", "nope", "--out", p(&out)]);
    assert_eq!(bad_method.status.code(), Some(1));
    let bad_theta = cma(&["fit", "--data", p(&data), "--out", p(&out), "--theta", "1.5"]);
    assert_eq!(bad_theta.status.code(), Some(1));

    let missing = cma(&["fit", "--data", p(&dir.path().join("none.csv")), "--out", p(&out)]);
    assert_eq!(missing.status.code(), Some(2));
    let malformed = dir.path().join("bad.csv");
    std::fs::write(&malformed, "x1,class\n0.5,2\n").unwrap();
    assert_eq!(
        cma(&["fit", "--data", p(&malformed), "--out", p(&out)]).status.code(),
        Some(2)
    );
}
