use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn stripfdtd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stripfdtd"))
        .args(args)
        .env("RUST_LOG", "warn")
        .env_remove("STRIPFDTD_WORKERS")
        .output()
        .unwrap()
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("case.toml");
    fs::write(&path, body).unwrap();
    path.display().to_string()
}

fn svgs(dir: &Path) -> Vec<String> {
    let mut out = Vec::new();
    for e in fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            out.extend(svgs(&p));
        } else if p.extension().is_some_and(|x| x == "svg") {
            out.push(p.display().to_string());
        }
    }
    out
}

fn copy_tree(from: &Path, to: &Path) {
    fs::create_dir_all(to).unwrap();
    for e in fs::read_dir(from).unwrap() {
        let p = e.unwrap().path();
        let dest = to.join(p.file_name().unwrap());
        if p.is_dir() {
            copy_tree(&p, &dest);
        } else {
            fs::copy(&p, &dest).unwrap();
        }
    }
}

#[test]
fn usage_errors_exit_with_code_2() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "scenario = \"periodic_transmission\"\n");
    for args in [
        vec!["frobnicate"],
        vec!["sweep", cfg.as_str()],
        vec!["run", cfg.as_str(), "--polarization", "q"],
        vec!["run", cfg.as_str(), "--resolution-nm", "-5"],
        vec!["run", cfg.as_str(), "--workers", "many"],
    ] {
        let out = stripfdtd(&args);
        assert_eq!(out.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
    let bad = write_config(tmp.path(), "scenario = \"periodic_transmission\"\n[grid]\nresolution_nm = 5\ncolour = 3\n");
    assert_eq!(stripfdtd(&["run", &bad]).status.code(), Some(2));
}

#[test]
fn missing_config_is_a_runtime_failure() {
    let out = stripfdtd(&["run", "/nonexistent/case.toml"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("/nonexistent/case.toml"));
}

#[test]
fn truncated_run_then_analyze_and_plot() {
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().join("run");
    let cfg = write_config(
        tmp.path(),
        "scenario = \"periodic_transmission\"\n\
         [geometry]\ndelta = 65\n\
         [grid]\nresolution_nm = 10\n\
         [monitors]\nmap_wavelengths_nm = [700]\n\
         [run]\nmax_steps = 6000\n",
    );
    let run = Command::new(env!("CARGO_BIN_EXE_stripfdtd"))
        .args(["run", &cfg, "--out", out_dir.to_str().unwrap()])
        .env("RUST_LOG", "warn")
        .env("STRIPFDTD_WORKERS", "2")
        .output()
        .unwrap();
    assert_eq!(run.status.code(), Some(4), "{}", String::from_utf8_lossy(&run.stderr));
    assert!(String::from_utf8_lossy(&run.stdout).contains("periodic_transmission"));
    assert!(out_dir.join("metadata.json").is_file());

    // A corrupted copy must fail to plot without leaving partial output.
    let broken = tmp.path().join("broken");
    copy_tree(&out_dir, &broken);
    fs::write(broken.join("transmission.csv"), "").unwrap();
    let plot = stripfdtd(&["plot", broken.to_str().unwrap()]);
    assert_ne!(plot.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&plot.stderr).contains("transmission.csv"));
    assert!(svgs(&broken).is_empty());

    let analyze = stripfdtd(&["analyze", out_dir.to_str().unwrap()]);
    assert_eq!(analyze.status.code(), Some(0), "{}", String::from_utf8_lossy(&analyze.stderr));
    assert!(String::from_utf8_lossy(&analyze.stdout).contains("delta: 65 nm"));

    let plot = stripfdtd(&["plot", out_dir.to_str().unwrap()]);
    assert_eq!(plot.status.code(), Some(0), "{}", String::from_utf8_lossy(&plot.stderr));
    let written = svgs(&out_dir);
    assert!(written.iter().any(|p| p.ends_with("spectra.svg")));
    assert!(written.iter().any(|p| p.contains("maps") && p.contains("700")));
    for p in &written {
        assert!(fs::read_to_string(p).unwrap().starts_with("<svg"), "{p}");
    }
}
