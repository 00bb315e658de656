use std::path::Path;
use std::process::{Command, Output};

fn sicspin(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sicspin"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn example(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("examples")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

/// Data rows of a written CSV (after meta lines and header).
fn data_rows(text: &str) -> Vec<Vec<f64>> {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect()
}

#[test]
fn missing_required_key_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = sicspin(dir.path(), &["fieldsweep"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("fMW"), "{}", stderr(&o));
}

#[test]
fn unknown_key_and_bad_value_are_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let o = sicspin(dir.path(), &["swr", "--set", "fMW=34", "--set", "widht=300"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("widht"));
    let o = sicspin(dir.path(), &["swr", "--set", "fMW=fast"]);
    assert_eq!(o.status.code(), Some(2));
    let o = sicspin(dir.path(), &["deer", "--set", "step=-1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn usage_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(sicspin(dir.path(), &["nonsense"]).status.code(), Some(2));
    assert_eq!(sicspin(dir.path(), &["deer", "--bogus"]).status.code(), Some(2));
}

#[test]
fn too_short_fit_segment_is_a_numerical_error() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.csv");
    let text: String = (0..20).map(|i| format!("{i},{}\n", (-(i as f64) / 5.0).exp())).collect();
    std::fs::write(&data, text).unwrap();
    let o = sicspin(dir.path(), &["fit", "--set", "data=d.csv", "--set", "lightOff=17.5"]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("after-light"));
}

#[test]
fn list_prints_every_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let o = sicspin(dir.path(), &["list"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    for name in ["rotpattern", "fieldsweep", "rabi", "echodecay", "pumprecovery", "deer", "swr", "fit"] {
        assert!(text.lines().any(|l| l.starts_with(&format!("{name}:"))), "{name} missing");
    }
}

#[test]
fn deer_default_grid() {
    let dir = tempfile::tempdir().unwrap();
    let o = sicspin(dir.path(), &["deer", "--csv", "deer.csv", "--plot", "deer.svg"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(dir.path().join("deer.csv")).unwrap();
    let rows = data_rows(&text);
    assert_eq!(rows.len(), 250);
    assert!((rows[0][0] - 9150.0).abs() < 1e-9 && (rows[249][0] - 9399.0).abs() < 1e-9);
    assert!(text.contains("\nfrequency_MHz,echo,echo_normalized\n"));
    assert!(text.contains("# scenario=deer\n"));
    let svg = std::fs::read_to_string(dir.path().join("deer.svg")).unwrap();
    assert!(svg.starts_with("<svg"));
}

#[test]
fn meta_lines_are_sorted_and_precision_applies() {
    let dir = tempfile::tempdir().unwrap();
    let o = sicspin(dir.path(), &["swr", "--set", "fMW=34", "--set", "output.precision=2", "--csv", "s.csv"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(dir.path().join("s.csv")).unwrap();
    let keys: Vec<&str> = text
        .lines()
        .filter_map(|l| l.strip_prefix("# "))
        .map(|l| l.split('=').next().unwrap())
        .collect();
    let mut sorted = keys.clone();
    sorted.sort();
    assert_eq!(keys, sorted);
    let first = text.lines().find(|l| !l.starts_with('#') && !l.starts_with("field")).unwrap();
    assert!(first.split(',').all(|x| x.split('.').nth(1).is_some_and(|d| d.len() == 2)), "{first}");
}

#[test]
fn set_overrides_config_file_and_csv_flag_overrides_output_table() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, "fMW = 34.0\nnMax = 3\n[output]\ncsvPath = \"from_file.csv\"\n").unwrap();
    let o = sicspin(dir.path(), &["swr", "--config", "c.toml", "--set", "nMax=2", "--csv", "flag.csv"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(!dir.path().join("from_file.csv").exists());
    let text = std::fs::read_to_string(dir.path().join("flag.csv")).unwrap();
    assert!(text.contains("# modes=2\n"));
    assert!(text.contains("# nMax=2\n"));
}

#[test]
fn fit_example_recovers_decay() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = example("fit_decay.toml");
    let o = sicspin(dir.path(), &["fit", "--config", &cfg, "--csv", "f.csv"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(dir.path().join("f.csv")).unwrap();
    let tau: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("# fit.timeConstant_us="))
        .unwrap()
        .parse()
        .unwrap();
    assert!((tau - 48.0).abs() < 0.05, "{tau}");
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = example("pumprecovery_noisy.toml");
    for name in ["a.csv", "b.csv"] {
        let o = sicspin(dir.path(), &["pumprecovery", "--config", &cfg, "--csv", name]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let a = std::fs::read(dir.path().join("a.csv")).unwrap();
    let b = std::fs::read(dir.path().join("b.csv")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn every_example_runs() {
    let dir = tempfile::tempdir().unwrap();
    let examples = Path::new(env!("CARGO_MANIFEST_DIR")).join("examples");
    let mut count = 0;
    for entry in std::fs::read_dir(&examples).unwrap().flatten() {
        let path = entry.path();
        if path.extension().is_none_or(|x| x != "toml") {
            continue;
        }
        let stem = path.file_stem().unwrap().to_str().unwrap();
        let scenario = stem.split('_').next().unwrap();
        let o = sicspin(dir.path(), &[scenario, "--config", path.to_str().unwrap()]);
        assert!(o.status.success(), "{stem}: {}", stderr(&o));
        count += 1;
    }
    assert!(count >= 8);
}
