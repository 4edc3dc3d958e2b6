use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const SWEEP_HEADER: &str = "trial,n,k,seed,diam,diam_kind,gw,gw_se,rw,rw_se,lambda,C,bound,ratio,ms";
const VERIFY_HEADER: &str = "n,k,trials,fraction,median_diam_sqrtk";

fn sectlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sectlab")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn first_line(text: &str) -> &str {
    text.lines().next().unwrap_or("")
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Checks that every numeric field carries 17 significant digits.
fn assert_full_precision(csv: &str, columns: &[usize]) {
    for line in csv.lines().skip(1) {
        let fields: Vec<&str> = line.split(',').collect();
        for &c in columns {
            let f = fields[c];
            if f.is_empty() || f == "inf" || f == "nan" {
                continue;
            }
            let mantissa = f.trim_start_matches('-').split('e').next().unwrap();
            assert_eq!(mantissa.replace('.', "").len(), 17, "field `{f}` in `{line}`");
        }
    }
}

#[test]
fn width_reports_csv_row() {
    let o = sectlab(&["width", "--body", "l2", "--n", "16", "--samples", "2000", "--seed", "1"]);
    assert_eq!(code(&o), 0);
    let out = stdout(&o);
    assert_eq!(first_line(&out), "kind,mean,stderr,samples,unconverged");
    let row: Vec<&str> = out.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[0], "gaussian_width");
    let mean: f64 = row[1].parse().unwrap();
    assert!((mean - 3.938).abs() < 0.1, "{mean}");
    assert_full_precision(&out, &[1, 2]);
}

#[test]
fn diameter_of_planar_section() {
    // a line through the origin meets B₁² in a segment of length between √2 and 2
    let o = sectlab(&["diameter", "--n", "2", "--k", "1", "--seed", "3", "--method", "exact"]);
    assert_eq!(code(&o), 0);
    let out = stdout(&o);
    assert_eq!(first_line(&out), "value,kind,evaluations");
    let row: Vec<&str> = out.lines().nth(1).unwrap().split(',').collect();
    let value: f64 = row[0].parse().unwrap();
    assert!(value >= 2f64.sqrt() - 1e-12 && value <= 2.0 + 1e-12, "{value}");
    assert_eq!(row[1], "exact");
}

#[test]
fn bound_variants() {
    let t = sectlab(&["bound", "--n", "32", "--k", "8", "--samples", "500"]);
    assert_eq!(code(&t), 0);
    assert_eq!(first_line(&stdout(&t)), "variant,n,k,C,gw,gw_se,rw,rw_se,lambda,bound");
    let f = sectlab(&["bound", "--n", "16", "--k", "8", "--samples", "200", "--variant", "fixed-point"]);
    assert_eq!(code(&f), 0);
    assert!(first_line(&stdout(&f)).ends_with("r_k,rho_k,saturated"));
    let bad = sectlab(&["bound", "--n", "16", "--k", "8", "--variant", "nonsense"]);
    assert_eq!(code(&bad), 1);
}

#[test]
fn input_errors_exit_one() {
    assert_eq!(code(&sectlab(&["width", "--body", "foo", "--n", "3"])), 1);
    assert_eq!(code(&sectlab(&["bogus"])), 1);
    assert_eq!(code(&sectlab(&["sweep", "--trials", "zero"])), 1);
    assert_eq!(code(&sectlab(&["verify", "--input", "/nonexistent/sweep.csv"])), 1);
    assert_eq!(code(&sectlab(&["proofkit", "lemma", "--eps", "0.2", "--k", "24"])), 1);
    assert_eq!(code(&sectlab(&["--version"])), 0);
}

#[test]
fn size_errors_exit_two() {
    let o = sectlab(&["diameter", "--n", "64", "--k", "8", "--method", "exact"]);
    assert_eq!(code(&o), 2);
    let err = String::from_utf8(o.stderr).unwrap();
    assert!(err.contains("budget"), "{err}");
    assert!(!err.contains("size error: size error"), "{err}");

    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("e.csv");
    let o = sectlab(&[
        "sweep", "--n", "64", "--k", "8", "--trials", "2", "--method", "exact", "--width-samples", "200",
        "--output", path_str(&csv),
    ]);
    assert_eq!(code(&o), 2);
    // the sweep still writes every record, marking the failed ones
    let text = fs::read_to_string(&csv).unwrap();
    assert_eq!(first_line(&text), SWEEP_HEADER);
    assert_eq!(text.lines().count(), 3);
    assert!(text.lines().skip(1).all(|l| l.split(',').nth(5) == Some("error")));
}

#[test]
fn sweep_then_verify() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("s.csv");
    let o = sectlab(&[
        "sweep", "--n", "12", "--k", "3,4", "--trials", "6", "--width-samples", "500", "--seed", "7",
        "--output", path_str(&csv),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(&csv).unwrap();
    assert_eq!(first_line(&text), SWEEP_HEADER);
    assert_eq!(text.lines().count(), 13);
    assert_full_precision(&text, &[4, 6, 7, 8, 9, 10, 11, 12]);

    let report = dir.path().join("v.csv");
    let v = sectlab(&["verify", "--input", path_str(&csv), "--output", path_str(&report)]);
    let out = fs::read_to_string(&report).unwrap();
    assert_eq!(first_line(&out), VERIFY_HEADER);
    assert_eq!(out.lines().count(), 3);
    // calibration at the smallest k puts at least 3/4 of that cell under the bound
    let first: Vec<&str> = out.lines().nth(1).unwrap().split(',').collect();
    assert!(first[3].parse::<f64>().unwrap() >= 0.75);
    assert!(matches!(code(&v), 0 | 3));
}

#[test]
fn verification_failure_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("s.csv");
    let o = sectlab(&[
        "sweep", "--n", "12", "--k", "3", "--trials", "4", "--C", "0.01", "--width-samples", "500",
        "--output", path_str(&csv),
    ]);
    assert_eq!(code(&o), 0);
    let v = sectlab(&["verify", "--input", path_str(&csv)]);
    assert_eq!(code(&v), 3);
    assert_eq!(first_line(&stdout(&v)), VERIFY_HEADER);
}

#[test]
fn config_file_and_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sweep.cfg");
    fs::write(
        &cfg,
        "# small sweep\nbody_spec = l1\nensemble_spec = gaussian\nn_list = [12, 16]\nk_list = [3]\n\
         trials = 3\nwidth_samples = 500\nmaster_seed = 4\n",
    )
    .unwrap();
    let o = sectlab(&["sweep", "--config", path_str(&cfg), "--output", "-"]);
    assert_eq!(code(&o), 0);
    let out = stdout(&o);
    assert_eq!(first_line(&out), SWEEP_HEADER);
    assert_eq!(out.lines().count(), 7);
    let o = sectlab(&["sweep", "--config", path_str(&cfg), "--n", "12", "--output", "-"]);
    assert_eq!(stdout(&o).lines().count(), 4);

    fs::write(&cfg, "unknown_key = 3\n").unwrap();
    assert_eq!(code(&sectlab(&["sweep", "--config", path_str(&cfg), "--output", "-"])), 1);
}

#[test]
fn sweep_output_independent_of_workers() {
    let run = |workers: &str| {
        let o = sectlab(&[
            "--workers", workers, "sweep", "--n", "12,20", "--k", "3,5", "--trials", "5", "--width-samples", "600",
            "--seed", "9", "--output", "-",
        ]);
        assert_eq!(code(&o), 0);
        o.stdout
    };
    let one = run("1");
    assert_eq!(one, run("1"));
    assert_eq!(one, run("8"));
}

#[test]
fn proofkit_subcommands() {
    let o = sectlab(&["proofkit", "lemma", "--eps", "0.01", "--k", "100", "--trials", "2000", "--seed", "1"]);
    assert_eq!(code(&o), 0);
    assert!(first_line(&stdout(&o)).starts_with("lambda,failures,trials,failure_rate,bound"));

    let o = sectlab(&["proofkit", "corollary", "--eps", "0.05", "--k", "40", "--N", "4", "--trials", "1000"]);
    assert_eq!(code(&o), 0);
    let o = sectlab(&["proofkit", "corollary", "--eps", "0.05", "--k", "40", "--N", "65", "--trials", "10"]);
    assert_eq!(code(&o), 1);

    let dir = tempfile::tempdir().unwrap();
    let points = dir.path().join("net.csv");
    let o = sectlab(&[
        "proofkit", "net", "--body", "l2", "--n", "5", "--r", "1", "--rho", "1.9", "--seed", "1", "--points",
        path_str(&points),
    ]);
    assert_eq!(code(&o), 0);
    let out = stdout(&o);
    assert_eq!(first_line(&out), "cardinality,r,rho,budget_exhausted,candidates");
    let card: usize = out.lines().nth(1).unwrap().split(',').next().unwrap().parse().unwrap();
    let pts: Vec<Vec<f64>> = fs::read_to_string(&points)
        .unwrap()
        .lines()
        .filter(|l| l.split(',').all(|f| f.parse::<f64>().is_ok()))
        .map(|l| l.split(',').map(|f| f.parse().unwrap()).collect())
        .collect();
    assert_eq!(pts.len(), card);
    for (i, p) in pts.iter().enumerate() {
        assert!((p.iter().map(|x| x * x).sum::<f64>().sqrt() - 1.0).abs() < 1e-9);
        for q in &pts[..i] {
            let d = p.iter().zip(q).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            assert!(d >= 1.9);
        }
    }

    let o = sectlab(&["proofkit", "net", "--n", "8", "--r", "2", "--rho", "0.5"]);
    assert_eq!(code(&o), 1);

    let o = sectlab(&[
        "proofkit", "oscillation", "--n", "8", "--k", "16", "--r", "0.5", "--rho", "0.4", "--draws", "20",
        "--probes", "8", "--width-samples", "500", "--budget", "50",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn fixed_point_subcommands() {
    for which in ["r", "rho"] {
        let o = sectlab(&["fixed-point", which, "--n", "16", "--k", "8", "--samples", "300"]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        let out = stdout(&o);
        assert_eq!(first_line(&out), "value,violated_at,saturated,steps");
        let row: Vec<&str> = out.lines().nth(1).unwrap().split(',').collect();
        let value: f64 = row[0].parse().unwrap();
        assert!(value > 0.0 && value <= 1.0);
        assert_eq!(row[3], "10");
    }
}
