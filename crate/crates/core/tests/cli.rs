use std::fs;

use lsrb_core::cli::{cmd_demo_tridiag, cmd_offline, cmd_online, fmt_f64, RunConfig, MODEL_FILE};
use lsrb_core::problems::ProblemKind;

fn small_config(dir: &std::path::Path) -> RunConfig {
    let mut cfg = RunConfig::defaults(ProblemKind::Thermal1);
    cfg.n = 8;
    cfg.train_count = 12;
    cfg.out_dir = dir.to_path_buf();
    cfg
}

#[test]
fn csv_headers_carry_the_configuration() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    cmd_offline(&cfg).unwrap();
    let log = fs::read_to_string(dir.path().join("training_log.csv")).unwrap();
    let header: String = log.lines().filter(|l| l.starts_with("# ")).map(|l| format!("{}\n", &l[2..])).collect();
    // the header alone rebuilds the configuration
    let pairs: Vec<(String, String)> = header
        .lines()
        .filter_map(|l| l.split_once(" = "))
        .filter(|(k, _)| cfg.to_pairs().iter().any(|(ck, _)| ck == k) && !k.ends_with("_sampling"))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect();
    let back = RunConfig::from_pairs(&pairs).unwrap();
    assert_eq!(back.to_pairs(), cfg.to_pairs());
    let columns = log.lines().find(|l| !l.starts_with('#')).unwrap();
    assert!(columns.starts_with("iter,chosen_mu,max_estimator,delta"));
}

#[test]
fn online_output_re_sums_from_printed_values() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    cmd_offline(&cfg).unwrap();
    let model = dir.path().join(MODEL_FILE);
    fs::remove_file(lsrb_core::rb::RbModel::basis_path(&model)).unwrap();
    let text = cmd_online(&model, &[3.3]).unwrap().render();
    let get = |k: &str| -> f64 {
        let line = text.lines().find(|l| l.starts_with(&format!("{k} = "))).unwrap();
        line.split(" = ").nth(1).unwrap().parse().unwrap()
    };
    assert_eq!(get("bound"), get("err_norm") + get("aux_res") / get("alpha_lb").sqrt());
    assert!(cmd_online(&model, &[30.0]).is_err());
}

#[test]
fn reruns_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let mut ca = small_config(a.path());
    let mut cb = small_config(b.path());
    ca.tridiag_sizes = vec![4, 10];
    cb.tridiag_sizes = vec![4, 10];
    // out_dir is part of the header, so use identical relative names
    ca.out_dir = a.path().join("run");
    cb.out_dir = b.path().join("run");
    for cfg in [&ca, &cb] {
        cmd_offline(cfg).unwrap();
        cmd_demo_tridiag(cfg).unwrap();
    }
    for f in ["training_log.csv", "tridiag.csv", MODEL_FILE] {
        let x = fs::read(ca.out_dir.join(f)).unwrap();
        let y = fs::read(cb.out_dir.join(f)).unwrap();
        let strip = |s: &[u8]| String::from_utf8_lossy(s).lines().filter(|l| !l.starts_with("# out_dir")).collect::<Vec<_>>().join("\n");
        assert_eq!(strip(&x), strip(&y), "{f} differs");
    }
}

#[test]
fn floats_print_at_full_precision() {
    assert_eq!(fmt_f64(0.1), "0.1");
    assert_eq!(fmt_f64(1e-20), "1e-20");
    assert_eq!(fmt_f64(2.0 / 3.0).parse::<f64>().unwrap(), 2.0 / 3.0);
}
