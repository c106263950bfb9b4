use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use hllgemm::{read_matrix_market, write_matrix_market, CsrMatrix};
use tempfile::TempDir;

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hllgemm"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn save(dir: &Path, name: &str, m: &CsrMatrix) -> PathBuf {
    let p = dir.join(name);
    let mut buf = Vec::new();
    write_matrix_market(m, &mut buf).unwrap();
    fs::write(&p, buf).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn csv_rows(text: &str) -> Vec<Vec<String>> {
    text.lines().map(|l| l.split(',').map(str::to_owned).collect()).collect()
}

fn column(rows: &[Vec<String>], name: &str) -> usize {
    rows[0].iter().position(|c| c == name).unwrap()
}

#[test]
fn multiply_identity_square() {
    let dir = TempDir::new().unwrap();
    let id = save(dir.path(), "id.mtx", &CsrMatrix::identity(5));
    let out = dir.path().join("c.mtx");
    let o = bin(&["multiply", "--a", s(&id), "--op", "aa", "--out", s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stdout(&o).lines().count(), 1);
    assert!(stdout(&o).contains("nnz=5"));
    assert!(read_matrix_market(&out).unwrap().bitwise_eq(&CsrMatrix::identity(5)));
}

#[test]
fn multiply_matches_oracle_for_each_op() {
    let dir = TempDir::new().unwrap();
    let a = hllgemm::synth::uniform(60, 40, 0.1, 3);
    let b = hllgemm::synth::uniform(40, 30, 0.1, 4);
    let pa = save(dir.path(), "a.mtx", &a);
    let pb = save(dir.path(), "b.mtx", &b);
    let out = dir.path().join("c.mtx");
    let o = bin(&["multiply", "--a", s(&pa), "--op", "ab", "--b", s(&pb), "--out", s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let expected = hllgemm::oracle::reference_spgemm(&a, &b).unwrap();
    hllgemm::oracle::matrices_match(&read_matrix_market(&out).unwrap(), &expected, 1e-12).unwrap();

    let o = bin(&["multiply", "--a", s(&pa), "--op", "aat", "--out", s(&out), "--workflow", "symbolic"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let expected = hllgemm::oracle::reference_spgemm(&a, &a.transpose()).unwrap();
    hllgemm::oracle::matrices_match(&read_matrix_market(&out).unwrap(), &expected, 1e-12).unwrap();
}

#[test]
fn estimate_reports_are_deterministic() {
    let dir = TempDir::new().unwrap();
    let a = save(dir.path(), "a.mtx", &hllgemm::synth::power_law(800, 800, 80, 0.7, 0.05, 9));
    let mut reports = Vec::new();
    for k in 0..2 {
        let r = dir.path().join(format!("r{k}.json"));
        let o = bin(&["multiply", "--a", s(&a), "--workflow", "estimate", "--seed", "7", "--report", s(&r)]);
        assert!(o.status.success(), "{}", stderr(&o));
        let mut v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&r).unwrap()).unwrap();
        assert!(v["timings"]["total_ms"].as_f64().unwrap() >= 0.0);
        v.as_object_mut().unwrap().remove("timings");
        reports.push(serde_json::to_string(&v).unwrap());
    }
    assert_eq!(reports[0], reports[1]);
    assert!(reports[0].contains("\"workflow\":\"hll_estimation\""));
}

#[test]
fn ab_without_b_is_a_usage_error() {
    let dir = TempDir::new().unwrap();
    let id = save(dir.path(), "id.mtx", &CsrMatrix::identity(3));
    let o = bin(&["multiply", "--a", s(&id), "--op", "ab"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("--b"));
}

#[test]
fn parse_and_dimension_errors_exit_1() {
    let dir = TempDir::new().unwrap();
    let bad = dir.path().join("bad.mtx");
    fs::write(&bad, "%%MatrixMarket matrix coordinate real general\n2 2 1\n3 1 1.0\n").unwrap();
    let o = bin(&["multiply", "--a", s(&bad)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));

    let a = save(dir.path(), "a.mtx", &CsrMatrix::zeros(2, 3));
    let o = bin(&["multiply", "--a", s(&a), "--op", "ab", "--b", s(&a)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("dimension mismatch"));

    let o = bin(&["multiply", "--a", s(&a)]);
    assert_eq!(o.status.code(), Some(1));

    let o = bin(&["multiply", "--a", s(&a), "--registers", "48"]);
    assert_eq!(o.status.code(), Some(1));

    let sq = save(dir.path(), "sq.mtx", &CsrMatrix::identity(3));
    let o = bin(&["analyze", "--a", s(&sq), "--sample-ratio", "0"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("sample ratio"), "{}", stderr(&o));
}

#[test]
fn resource_errors_exit_2() {
    let dir = TempDir::new().unwrap();
    let a = save(dir.path(), "a.mtx", &hllgemm::synth::uniform(100, 100, 0.1, 1));
    let o = bin(&["multiply", "--a", s(&a), "--staging-limit", "64"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("symbolic"));
}

#[test]
fn analyze_identity_selects_upper_bound() {
    let dir = TempDir::new().unwrap();
    let id = save(dir.path(), "id.mtx", &CsrMatrix::identity(50));
    let o = bin(&["analyze", "--a", s(&id), "--json"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["er"].as_f64(), Some(1.0));
    assert_eq!(v["choice"]["kind"], "upper_bound");
    let text = stdout(&bin(&["analyze", "--a", s(&id)]));
    assert!(text.contains("upper_bound"));
}

/// A quarter of the rows of A pick 20 rows of B that all cover the same 20
/// columns: 100 products per row on average, ER 20, CR 20.
fn overlap_pair() -> (CsrMatrix, CsrMatrix) {
    let mut ta = Vec::new();
    for i in (0..800u32).step_by(4) {
        for k in 0..20 {
            ta.push((i, k, 1.0));
        }
    }
    let tb: Vec<(u32, u32, f64)> = (0..20).flat_map(|k| (0..20).map(move |j| (k, j, 0.5))).collect();
    (CsrMatrix::from_triplets(800, 20, &ta), CsrMatrix::from_triplets(20, 20, &tb))
}

#[test]
fn analyze_overlapping_pair_selects_estimation() {
    let dir = TempDir::new().unwrap();
    let (a, b) = overlap_pair();
    let pa = save(dir.path(), "a.mtx", &a);
    let pb = save(dir.path(), "b.mtx", &b);
    let run = || {
        let o = bin(&["analyze", "--a", s(&pa), "--op", "ab", "--b", s(&pb), "--json", "--seed", "3"]);
        assert!(o.status.success(), "{}", stderr(&o));
        serde_json::from_str::<serde_json::Value>(&stdout(&o)).unwrap()
    };
    let v = run();
    assert_eq!(v["avg_products"].as_f64(), Some(100.0));
    assert_eq!(v["er"].as_f64(), Some(20.0));
    let cr = v["sampled"]["cr_hat"].as_f64().unwrap();
    // one 20-key sketch shared by every row, so the HLL noise does not average out
    assert!(cr >= 8.0 && (cr / 20.0 - 1.0).abs() < 0.3, "{cr}");
    assert_eq!(v["choice"]["kind"], "hll_estimation");
    assert_eq!(v["sampled"], run()["sampled"]);
}

#[test]
fn bench_single_matrix() {
    let dir = TempDir::new().unwrap();
    let a = save(dir.path(), "a.mtx", &hllgemm::synth::uniform(200, 200, 0.05, 2));
    let csv = dir.path().join("out.csv");
    let o = bin(&["bench", "--a", s(&a), "--runs", "2", "--warmup", "1", "--csv", s(&csv)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = csv_rows(&fs::read_to_string(&csv).unwrap());
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0].len(), 27);
    assert_eq!(rows[1][column(&rows, "runs")], "2");
    assert_eq!(rows[1][column(&rows, "status")], "ok");
    let products: u64 = rows[1][column(&rows, "products")].parse().unwrap();
    let flops: u64 = rows[1][column(&rows, "flops")].parse().unwrap();
    assert_eq!(flops, 2 * products);
    let total: f64 = rows[1][column(&rows, "total_ms")].parse().unwrap();
    assert!(total > 0.0);

    // appending keeps a single header
    let o = bin(&["bench", "--a", s(&a), "--runs", "1", "--warmup", "0", "--csv", s(&csv), "--workflow", "symbolic,estimate"]);
    assert!(o.status.success());
    let rows = csv_rows(&fs::read_to_string(&csv).unwrap());
    assert_eq!(rows.len(), 4);
    assert_eq!(rows.iter().filter(|r| r[0] == "matrix").count(), 1);
}

#[test]
fn bench_list_records_failures() {
    let dir = TempDir::new().unwrap();
    save(dir.path(), "one.mtx", &hllgemm::synth::uniform(50, 50, 0.1, 1));
    save(dir.path(), "two.mtx", &hllgemm::synth::banded(50, 4, 8, 2));
    fs::write(dir.path().join("broken.mtx"), "%%MatrixMarket matrix coordinate real general\n2 2\n").unwrap();
    let list = dir.path().join("list.txt");
    fs::write(&list, "one.mtx\nbroken.mtx\n\n# comment\ntwo.mtx\n").unwrap();
    let o = bin(&["bench", "--list", s(&list), "--runs", "1", "--warmup", "0"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = csv_rows(&stdout(&o));
    assert_eq!(rows.len(), 4);
    let status = column(&rows, "status");
    let statuses: Vec<&str> = rows[1..].iter().map(|r| r[status].as_str()).collect();
    assert_eq!(statuses, ["ok", "error", "ok"]);
    // failed runs carry no timings
    assert_eq!(rows[2][column(&rows, "total_ms")], "");
}

#[test]
fn bench_timeout_is_recorded() {
    let dir = TempDir::new().unwrap();
    let a = save(dir.path(), "a.mtx", &hllgemm::synth::uniform(300, 300, 0.05, 2));
    let o = bin(&["bench", "--a", s(&a), "--runs", "1", "--warmup", "0", "--timeout", "0"]);
    assert!(o.status.success());
    let rows = csv_rows(&stdout(&o));
    assert_eq!(rows[1][column(&rows, "status")], "timeout");
    assert_eq!(rows[1][column(&rows, "total_ms")], "");
}

#[test]
fn est_eval_identity_and_coefficients() {
    let dir = TempDir::new().unwrap();
    let a = save(dir.path(), "a.mtx", &hllgemm::synth::uniform(400, 400, 0.05, 6));
    let id = save(dir.path(), "id.mtx", &CsrMatrix::identity(400));
    let o = bin(&["est-eval", "--a", s(&a), "--op", "ab", "--b", s(&id), "--registers", "32,64,128"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = csv_rows(&stdout(&o));
    assert_eq!(rows.len(), 4);
    let err = column(&rows, "mean_rel_err");
    for r in &rows[1..] {
        let e: f64 = r[err].parse().unwrap();
        assert!(e > 0.0 && e < 0.25, "{e}");
        assert!(r[column(&rows, "overflow_ratio")].parse::<f64>().is_ok());
        assert_eq!(r[column(&rows, "cr_true")], "1.0");
    }

    let list = dir.path().join("list.txt");
    save(dir.path(), "p.mtx", &hllgemm::synth::power_law(1000, 1000, 100, 0.6, 0.0, 5));
    save(dir.path(), "q.mtx", &hllgemm::synth::banded(1000, 20, 100, 6));
    fs::write(&list, "p.mtx\nq.mtx\n").unwrap();
    let ratio = |coef: &str| -> Vec<f64> {
        let o = bin(&["est-eval", "--list", s(&list), "--registers", "32", "--coef", coef]);
        assert!(o.status.success(), "{}", stderr(&o));
        let rows = csv_rows(&stdout(&o));
        let c = column(&rows, "overflow_ratio");
        rows[1..].iter().map(|r| r[c].parse().unwrap()).collect()
    };
    let (narrow, wide) = (ratio("1.5"), ratio("2.0"));
    assert!(wide.iter().zip(&narrow).all(|(w, n)| w <= n), "{wide:?} vs {narrow:?}");
}
