use std::process::Command;

use rpcaf::model::io::read_matrix;

fn rpcaf(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_rpcaf"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json(out: &std::process::Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

#[test]
fn synth_then_decompose_recovers() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("inst");
    let inst_s = inst.to_str().unwrap();
    let out = rpcaf(&["synth", "--n", "120", "--rank", "4", "--alpha", "0.05", "--seed", "3", "--out", inst_s]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = json(&out);
    assert_eq!(report["spec"]["rank"], 4);

    let l_path = dir.path().join("l.rpf");
    let p = |f: &str| inst.join(f).to_str().unwrap().to_owned();
    let out = rpcaf(&[
        "decompose",
        "--m",
        &p("m.rpf"),
        "--x",
        &p("x.rpf"),
        "--y",
        &p("y.rpf"),
        "--rank",
        "4",
        "--alpha",
        "0.05",
        "--out-l",
        l_path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = json(&out);
    assert_eq!(report["converged"], true);
    assert_eq!(report["rows"], 120);

    let l = read_matrix(&l_path).unwrap();
    let l_star = read_matrix(inst.join("l_star.rpf")).unwrap();
    let rel = (l.as_matrix() - l_star.as_matrix()).norm() / l_star.as_matrix().norm();
    assert!(rel < 1e-3, "rel {rel}");
}

#[test]
fn decompose_without_features_uses_identity() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("inst");
    let out = rpcaf(&["synth", "--n", "60", "--rank", "2", "--alpha", "0.0", "--out", inst.to_str().unwrap()]);
    assert!(out.status.success());
    let m = inst.join("m.rpf");
    let out = rpcaf(&["decompose", "--m", m.to_str().unwrap(), "--rank", "2", "--alpha", "0.0"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(json(&out)["cols"], 60);
}

#[test]
fn exit_codes() {
    assert_eq!(rpcaf(&["decompose", "--rank", "2"]).status.code(), Some(1));
    assert_eq!(
        rpcaf(&["decompose", "--m", "/nonexistent.rpf", "--rank", "2", "--alpha", "0.1"]).status.code(),
        Some(2)
    );
    assert_eq!(rpcaf(&["synth", "--alpha", "1.5", "--out", "/tmp/unused"]).status.code(), Some(1));
}

#[test]
fn phase_writes_csv_and_pgm() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("g.csv");
    let pgm = dir.path().join("g.pgm");
    let out = rpcaf(&[
        "phase",
        "--n",
        "60",
        "--grid-ranks",
        "2,4",
        "--grid-alphas",
        "0.0,0.05,0.1",
        "--trials",
        "1",
        "--row-slack",
        "0.3",
        "--csv",
        csv.to_str().unwrap(),
        "--pgm",
        pgm.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("r,alpha,trial,rel_error,iterations,wall_ms,success"));
    assert_eq!(lines.count(), 6);
    let bytes = std::fs::read(&pgm).unwrap();
    let header = b"P5 3 2 255\n";
    assert_eq!(&bytes[..header.len()], header);
    assert_eq!(bytes.len(), header.len() + 6);
    assert!(bytes[header.len()..].iter().all(|b| *b == 0 || *b == 255));
}

#[test]
fn bench_reports_rows() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("b.csv");
    let out = rpcaf(&["bench", "--sizes", "60,80", "--trials", "1", "--csv", csv.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 3);
}

#[test]
fn decompose_reads_and_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let m = dir.path().join("m.csv");
    std::fs::write(&m, "1,2,3\n2,4,6\n3,6,9\n").unwrap();
    let l = dir.path().join("l.csv");
    let out = rpcaf(&[
        "decompose", "--m", m.to_str().unwrap(), "--rank", "1", "--alpha", "0", "--out-l", l.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&l).unwrap();
    assert_eq!(text.lines().count(), 3);
}
