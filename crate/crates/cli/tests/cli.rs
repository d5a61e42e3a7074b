//! End-to-end checks of the command-line pipeline, driving the built
//! binary like a user would.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn dlpr() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dlpr"))
}

fn run_ok(cmd: &mut Command) -> Output {
    let out = cmd.output().expect("spawn dlpr");
    assert!(
        out.status.success(),
        "command failed\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn simulate_args<'a>(cmd: &'a mut Command, out: &Path) -> &'a mut Command {
    cmd.args([
        "simulate", "--row", "1", "--size", "32", "--masks", "12", "--chi", "1e-2",
    ])
    .arg("--out")
    .arg(out)
}

#[test]
fn simulate_writes_the_advertised_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("run");
    run_ok(simulate_args(&mut dlpr(), &dir));

    assert!(dir.join("truth.cras").is_file());
    let masks: Vec<_> = fs::read_dir(dir.join("masks"))
        .unwrap()
        .filter(|e| {
            e.as_ref()
                .unwrap()
                .path()
                .extension()
                .is_some_and(|x| x == "rras")
        })
        .collect();
    assert_eq!(masks.len(), 12, "one raster per mask");
    let obs: Vec<_> = fs::read_dir(dir.join("obs"))
        .unwrap()
        .filter(|e| {
            e.as_ref()
                .unwrap()
                .path()
                .extension()
                .is_some_and(|x| x == "rras")
        })
        .collect();
    assert_eq!(obs.len(), 12, "one raster per observation");
    assert!(dir.join("obs/observations.toml").is_file());
}

#[test]
fn simulate_is_byte_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    run_ok(simulate_args(&mut dlpr(), &a));
    run_ok(simulate_args(&mut dlpr(), &b));
    for name in [
        "truth.cras",
        "obs/obs_00.rras",
        "obs/obs_11.rras",
        "masks/mask_05.rras",
    ] {
        let x = fs::read(a.join(name)).unwrap();
        let y = fs::read(b.join(name)).unwrap();
        assert_eq!(x, y, "{name} differs between identical runs");
    }
}

#[test]
fn invalid_chi_is_rejected_with_nonzero_exit() {
    let tmp = tempfile::tempdir().unwrap();
    let out = dlpr()
        .args(["simulate", "--chi=-1.0"])
        .arg("--out")
        .arg(tmp.path().join("x"))
        .output()
        .unwrap();
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(
        stderr.contains("chi"),
        "error should name the field: {stderr}"
    );
}

#[test]
fn gsf_recovers_noiseless_flat_field() {
    // Peak 0 on a group-1 row gives the flat field a = 1, ψ = 0.
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("flat");
    run_ok(
        dlpr()
            .args(["simulate", "--row", "1", "--size", "32", "--masks", "12"])
            .args(["--model", "noiseless", "--peak", "0"])
            .arg("--out")
            .arg(&dir),
    );
    run_ok(
        dlpr()
            .args(["retrieve", "--row", "1", "--size", "32", "--masks", "12"])
            .args(["--model", "noiseless", "--peak", "0", "--solver", "gsf"])
            .arg("--out")
            .arg(&dir),
    );
    let summary = fs::read_to_string(dir.join("summary.toml")).unwrap();
    let rmse_line = summary
        .lines()
        .find(|l| l.starts_with("final_rmse"))
        .expect("summary carries final_rmse");
    let rmse: f64 = rmse_line.split('=').nth(1).unwrap().trim().parse().unwrap();
    assert!(rmse <= 1e-6, "flat noiseless baseline rmse {rmse}");

    // Trace parses: iteration, rmse, objective, seconds per line.
    let trace = fs::read_to_string(dir.join("trace.txt")).unwrap();
    for line in trace.lines().filter(|l| !l.starts_with('#')) {
        let cols: Vec<&str> = line.split_whitespace().collect();
        assert_eq!(cols.len(), 4, "trace line: {line}");
        cols[0].parse::<usize>().unwrap();
        cols[1].parse::<f64>().unwrap();
        cols[2].parse::<f64>().unwrap();
        cols[3].parse::<f64>().unwrap();
    }
}

#[test]
fn retrieve_numeric_outputs_are_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let common: &[&str] = &[
        "--row",
        "2",
        "--size",
        "24",
        "--masks",
        "6",
        "--chi",
        "1e-2",
        "--iterations",
        "4",
        "--atoms",
        "48",
    ];
    let mut estimates = Vec::new();
    let mut traces = Vec::new();
    for name in ["r1", "r2"] {
        let dir = tmp.path().join(name);
        run_ok(dlpr().arg("simulate").args(common).arg("--out").arg(&dir));
        run_ok(dlpr().arg("retrieve").args(common).arg("--out").arg(&dir));
        estimates.push(fs::read(dir.join("estimate.cras")).unwrap());
        // Timing column excluded from the comparison.
        let numeric: Vec<String> = fs::read_to_string(dir.join("trace.txt"))
            .unwrap()
            .lines()
            .filter(|l| !l.starts_with('#'))
            .map(|l| {
                let cols: Vec<&str> = l.split_whitespace().collect();
                format!("{} {} {}", cols[0], cols[1], cols[2])
            })
            .collect();
        traces.push(numeric);
    }
    assert_eq!(estimates[0], estimates[1], "estimate rasters differ");
    assert_eq!(traces[0], traces[1], "numeric trace columns differ");
}

#[test]
fn retrieve_without_simulate_fails() {
    let tmp = tempfile::tempdir().unwrap();
    let out = dlpr()
        .args(["retrieve", "--solver", "gsf"])
        .arg("--out")
        .arg(tmp.path().join("missing"))
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("simulate"));
}

#[test]
fn dlpr_prior_requires_a_prior_path() {
    let tmp = tempfile::tempdir().unwrap();
    let out = dlpr()
        .args(["retrieve", "--solver", "dlpr_prior"])
        .arg("--out")
        .arg(tmp.path().join("x"))
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("prior"));
}

#[test]
fn learn_dict_handles_constant_scene_and_is_reproducible() {
    use num_complex::Complex64;
    let tmp = tempfile::tempdir().unwrap();
    let src = tmp.path().join("const.cras");
    let field =
        dlpr_core::ComplexField::new(24, 24, vec![Complex64::new(2.0, 0.0); 24 * 24]).unwrap();
    dlpr_core::io::write_complex_raster(&src, &field).unwrap();

    let train = |out: &Path| {
        run_ok(
            dlpr()
                .args([
                    "learn-dict",
                    "--patch-side",
                    "6",
                    "--atoms",
                    "8",
                    "--passes",
                    "2",
                ])
                .arg("--sources")
                .arg(&src)
                .arg("--out")
                .arg(out),
        );
    };
    let (d1, d2) = (tmp.path().join("d1"), tmp.path().join("d2"));
    train(&d1);
    train(&d2);
    assert_eq!(
        fs::read(d1.join("dict.cras")).unwrap(),
        fs::read(d2.join("dict.cras")).unwrap(),
        "same sources and seed must give identical dictionaries"
    );

    // Rank-1 training data: a single atom reconstructs constant patches to
    // float precision.
    let dict = dlpr_core::io::load_dictionary(&d1).unwrap();
    assert!(dict.max_atom_norm() <= 1.0 + 1e-12);
    let patch = vec![Complex64::new(2.0, 0.0); 36];
    let code = dlpr_core::sparse::omp(&patch, &dict, 1e-10, 1).unwrap();
    let rec = code.reconstruct(&dict);
    let res: f64 = patch
        .iter()
        .zip(&rec)
        .map(|(p, r)| (p - r).norm_sqr())
        .sum();
    assert!(res <= 1e-10, "one-atom reconstruction residual {res:.2e}");
}

#[test]
fn eval_reports_zero_for_identical_rasters_and_offset_pair() {
    use num_complex::Complex64;
    let tmp = tempfile::tempdir().unwrap();
    let truth_path = tmp.path().join("t.cras");
    let off_path = tmp.path().join("o.cras");
    let data: Vec<Complex64> = (0..64)
        .map(|i| Complex64::from_polar(1.0, 0.15 * i as f64))
        .collect();
    let truth = dlpr_core::ComplexField::new(8, 8, data.clone()).unwrap();
    let offset = dlpr_core::ComplexField::new(
        8,
        8,
        data.iter()
            .map(|z| z * Complex64::from_polar(1.0, 0.4))
            .collect(),
    )
    .unwrap();
    dlpr_core::io::write_complex_raster(&truth_path, &truth).unwrap();
    dlpr_core::io::write_complex_raster(&off_path, &offset).unwrap();

    let out = run_ok(
        dlpr()
            .arg("eval")
            .arg("--estimate")
            .arg(&truth_path)
            .arg("--truth")
            .arg(&truth_path)
            .arg("--out")
            .arg(tmp.path().join("rep")),
    );
    let text = String::from_utf8_lossy(&out.stdout).to_string();
    assert!(text.contains("rmse_aligned = 0.000000"), "{text}");

    let out = run_ok(
        dlpr()
            .arg("eval")
            .arg("--estimate")
            .arg(&off_path)
            .arg("--truth")
            .arg(&truth_path),
    );
    let text = String::from_utf8_lossy(&out.stdout).to_string();
    let aligned: f64 = text
        .lines()
        .find(|l| l.starts_with("rmse_aligned"))
        .and_then(|l| l.split('=').nth(1))
        .unwrap()
        .trim()
        .parse()
        .unwrap();
    let unaligned: f64 = text
        .lines()
        .find(|l| l.starts_with("rmse_unaligned"))
        .and_then(|l| l.split('=').nth(1))
        .unwrap()
        .trim()
        .parse()
        .unwrap();
    assert!(aligned < 1e-9, "offset removed by alignment: {aligned}");
    assert!(
        (unaligned - 0.4).abs() < 1e-9,
        "unaligned equals the offset: {unaligned}"
    );

    // Report file parses as TOML.
    let report = fs::read_to_string(tmp.path().join("rep/report.toml")).unwrap();
    let parsed: toml::Value = toml::from_str(&report).unwrap();
    assert!(parsed.get("rmse_aligned").is_some());
}

#[test]
fn spec_file_drives_the_pipeline() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("specced");
    let spec_path = tmp.path().join("exp.toml");
    fs::write(
        &spec_path,
        format!(
            r#"
[scene]
source = "corpus"
row = 2
rows = 24
cols = 24
peak = 4.0
seed = 7

[masks]
count = 6
seed = 11

[noise]
model = "gaussian"
snr_db = 10.0
seed = 13

[solver]
kind = "gsf"
iterations = 10
patch_side = 10
stride = 1

[output]
dir = "{}"
"#,
            dir.display()
        ),
    )
    .unwrap();
    run_ok(dlpr().arg("simulate").arg("--spec").arg(&spec_path));
    run_ok(dlpr().arg("retrieve").arg("--spec").arg(&spec_path));
    assert!(dir.join("estimate.cras").is_file());

    // A malformed spec is rejected with a parse location.
    fs::write(&spec_path, "[scene]\nsource = 3\n").unwrap();
    let out = dlpr()
        .arg("simulate")
        .arg("--spec")
        .arg(&spec_path)
        .output()
        .unwrap();
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(
        stderr.contains("line"),
        "parse errors carry positions: {stderr}"
    );
}

#[test]
fn corpus_lists_nine_rows() {
    let out = run_ok(dlpr().arg("corpus"));
    let text = String::from_utf8_lossy(&out.stdout).to_string();
    assert_eq!(text.lines().count(), 10, "header plus nine rows:\n{text}");
}
