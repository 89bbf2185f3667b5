//! End-to-end tests of the CLI: exit codes, golden help output, CSV
//! determinism, and the documented example invocations.

use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_levelquad"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn tmp_path(name: &str) -> PathBuf {
    let mut p = std::env::temp_dir();
    p.push(format!("levelquad-test-{}-{name}", std::process::id()));
    p
}

#[test]
fn help_output_is_golden() {
    for (args, golden) in [
        (vec!["--help"], "help_main.txt"),
        (vec!["kernel", "--help"], "help_kernel.txt"),
        (vec!["integrate", "--help"], "help_integrate.txt"),
        (vec!["study", "--help"], "help_study.txt"),
        (vec!["sweep", "--help"], "help_sweep.txt"),
        (vec!["family", "--help"], "help_family.txt"),
    ] {
        let out = run(&args);
        assert!(out.status.success());
        let expected = fs::read_to_string(
            PathBuf::from(env!("CARGO_MANIFEST_DIR"))
                .join("tests/golden")
                .join(golden),
        )
        .expect("golden file");
        assert_eq!(stdout(&out), expected, "help changed for {args:?}");
    }
}

#[test]
fn kernel_prints_published_coefficients() {
    let out = run(&["kernel", "--family", "bump", "--moments", "1"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("a = c1 = -261.519589286"), "{text}");
    assert!(text.contains("b = c0 = 145.787657708"), "{text}");
    assert!(text.contains("p=0: +1.0000000000"), "{text}");

    let out = run(&[
        "kernel",
        "--family",
        "shifted",
        "--moments",
        "1",
        "--rho",
        "0.1",
    ]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("a = c1 = -759.278193417"), "{text}");

    let out = run(&["kernel", "--family", "bump", "--moments", "0"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("at least 1"));
}

#[test]
fn kernel_sample_dump() {
    let path = tmp_path("kernel.csv");
    let out = run(&[
        "kernel",
        "--family",
        "bump",
        "--moments",
        "2",
        "--samples-csv",
        path.to_str().unwrap(),
        "--resolution",
        "16",
    ]);
    assert!(out.status.success());
    let text = fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().count(), 18); // header + 17 samples
    assert!(text.starts_with("r,delta\n"));
    fs::remove_file(&path).ok();
}

#[test]
fn integrate_circle_sdf_row() {
    let out = run(&[
        "integrate",
        "--shape",
        "circle-sdf",
        "--kernel",
        "bump",
        "--moments",
        "1",
        "--eps",
        "2*h^0.5",
        "--n",
        "100",
    ]);
    assert!(out.status.success());
    let text = stdout(&out);
    let row = text
        .lines()
        .find(|l| l.starts_with("100,"))
        .expect("data row");
    let rel: f64 = row.split(',').nth(5).unwrap().parse().unwrap();
    assert!(rel < 5e-7, "rel error column: {rel}");
}

#[test]
fn integrate_cusp_star_row() {
    let out = run(&[
        "integrate",
        "--shape",
        "cusp-star",
        "--r0",
        "0.75",
        "--eps",
        "0.05",
        "--n",
        "100",
    ]);
    assert!(out.status.success());
    let row = stdout(&out);
    let row = row.lines().find(|l| l.starts_with("100,")).unwrap();
    let rel: f64 = row.split(',').nth(5).unwrap().parse().unwrap();
    // Twice the published 7.04018e-3 (it was normalized by double the length).
    assert!((rel - 1.40803e-2).abs() < 1e-6, "rel = {rel}");
}

#[test]
fn integrate_unknown_shape_exits_2() {
    let out = run(&[
        "integrate",
        "--shape",
        "hexagon",
        "--eps",
        "0.05",
        "--n",
        "32",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("unknown shape"));
}

#[test]
fn integrate_empty_band_exits_1() {
    let out = run(&[
        "integrate",
        "--shape",
        "circle-sdf",
        "--eps",
        "1e-9",
        "--n",
        "16",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("band"));
}

#[test]
fn integrate_accepts_config_file() {
    let path = tmp_path("job.conf");
    fs::write(
        &path,
        "# circle job\nshape = \"circle-quadratic\"\nr0 = 0.501\nkernel = bump\nmoments = 2\n\
         eps = \"2*h^0.5\"\nn_list = 100,200\nside = positive\n",
    )
    .unwrap();
    let out = run(&["integrate", "--config", path.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 2);
    // Second row carries an observed order.
    let second = text.lines().last().unwrap();
    assert!(!second.split(',').nth(6).unwrap().is_empty());
    fs::remove_file(&path).ok();

    let bad = tmp_path("bad.conf");
    fs::write(&bad, "shape = circle-sdf\nbogus_key = 1\n").unwrap();
    let out = run(&["integrate", "--config", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("unknown key"));
    fs::remove_file(&bad).ok();
}

#[test]
fn study_outputs_are_byte_deterministic_across_worker_counts() {
    let a = tmp_path("t1a.csv");
    let b = tmp_path("t1b.csv");
    let out = run(&[
        "study",
        "table1",
        "--max-n",
        "200",
        "--workers",
        "1",
        "--output",
        a.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let out = run(&[
        "study",
        "table1",
        "--max-n",
        "200",
        "--workers",
        "4",
        "--output",
        b.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let bytes_a = fs::read(&a).unwrap();
    let bytes_b = fs::read(&b).unwrap();
    assert_eq!(bytes_a, bytes_b, "CSV bytes differ across worker counts");
    assert!(!bytes_a.is_empty());
    fs::remove_file(&a).ok();
    fs::remove_file(&b).ok();
}

#[test]
fn study_table4_row_cap_and_table5_hint() {
    let path = tmp_path("t4.csv");
    let out = run(&[
        "study",
        "table4",
        "--max-n",
        "400",
        "--output",
        path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 3);
    fs::remove_file(&path).ok();

    let out = run(&["study", "table5"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("a0"));

    let out = run(&["study", "table9"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("unknown study"));
}

#[test]
fn sweep_round_trips_a_circle() {
    let n = 64usize;
    let h = 2.0 / n as f64;
    let input = tmp_path("sweep_in.csv");
    let output = tmp_path("sweep_out.csv");
    let mut text = String::from("i,j,phi\n");
    for i in 0..=n {
        for j in 0..=n {
            let x = i as f64 * h - 1.0;
            let y = j as f64 * h - 1.0;
            text.push_str(&format!("{i},{j},{}\n", x * x + y * y - 0.501 * 0.501));
        }
    }
    fs::write(&input, text).unwrap();
    let out = run(&[
        "sweep",
        "--input",
        input.to_str().unwrap(),
        "--output",
        output.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).contains("converged"));
    let result = fs::read_to_string(&output).unwrap();
    let mut worst = 0.0f64;
    for line in result.lines().skip(1) {
        let mut cols = line.split(',');
        let i: usize = cols.next().unwrap().parse().unwrap();
        let j: usize = cols.next().unwrap().parse().unwrap();
        let d: f64 = cols.next().unwrap().parse().unwrap();
        let x = i as f64 * h - 1.0;
        let y = j as f64 * h - 1.0;
        let exact = (x * x + y * y).sqrt() - 0.501;
        worst = worst.max((d - exact).abs());
    }
    assert!(worst < 2.0 * h, "max deviation {worst} at h = {h}");
    fs::remove_file(&input).ok();
    fs::remove_file(&output).ok();
}

#[test]
fn sweep_uniform_sign_exits_1() {
    let input = tmp_path("uniform.csv");
    let mut text = String::from("i,j,phi\n");
    for i in 0..=8 {
        for j in 0..=8 {
            text.push_str(&format!("{i},{j},1.0\n"));
        }
    }
    fs::write(&input, text).unwrap();
    let out = run(&[
        "sweep",
        "--input",
        input.to_str().unwrap(),
        "--output",
        tmp_path("never.csv").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("no interface"));
    fs::remove_file(&input).ok();
}

#[test]
fn family_fits_circle_slope() {
    let out = run(&[
        "family",
        "--shape",
        "circle-sdf",
        "--r0",
        "0.501",
        "--etas",
        "-0.1,-0.05,0,0.05,0.1",
        "--n",
        "200",
        "--eps-probe",
        "0.08",
        "--fit",
        "poly:1",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("polynomial fit"), "{text}");
    // Slope coefficient sits within 1% of 2π.
    let coeffs_line = text.lines().find(|l| l.contains("coeffs")).unwrap();
    let slope: f64 = coeffs_line
        .split(&['[', ']'][..])
        .nth(1)
        .unwrap()
        .split(',')
        .nth(1)
        .unwrap()
        .trim()
        .parse()
        .unwrap();
    assert!((slope - std::f64::consts::TAU).abs() / std::f64::consts::TAU < 0.01);
}
