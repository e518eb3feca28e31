//! End-to-end tests that spawn the built binary on a desk-scale problem:
//! homogeneous patch size 7, micrograph side 28, a 2-iteration schedule.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use micrem_core::io::{read_mrc_image, read_mrc_volume, write_mrc_volume};
use micrem_core::{BandlimitParams, VolumeCoefficients};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_micrem"));
    // Keep tests hermetic even when the developer has a cache configured.
    c.env_remove("MICREM_CACHE_DIR");
    c
}

fn run_ok(cmd: &mut Command) -> Output {
    let out = cmd.output().expect("spawn micrem");
    assert!(
        out.status.success(),
        "command failed\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn stderr_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn tiny_config() -> String {
    r#"{
        "basis": { "patch_size": 7 },
        "sim": {
            "n": 28, "gamma": 0.3, "snr": 10.0,
            "mode": "arbitrary", "method": "expanded-volume",
            "seed": 11, "count": 2,
            "truth": { "type": "random-coefficients", "seed": 4 }
        },
        "em": {
            "k_rotations": 6, "s_factor": 1.0, "epsilon": -1e300,
            "schedule": [ { "ell_max": 2, "max_iters": 2 } ],
            "seed": 21, "stop": "literal", "memory_budget": 1073741824
        }
    }"#
    .to_string()
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let p = dir.join("config.json");
    fs::write(&p, body).unwrap();
    p
}

/// Simulate into `dir/name` and return that directory.
fn simulate_into(cfg: &Path, dir: &Path, name: &str, extra: &[&str]) -> PathBuf {
    let out = dir.join(name);
    run_ok(bin()
        .arg("--config")
        .arg(cfg)
        .args(extra)
        .arg("simulate")
        .arg("--out")
        .arg(&out));
    out
}

#[test]
fn simulate_is_deterministic_per_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &tiny_config());

    let a = simulate_into(&cfg, tmp.path(), "a", &[]);
    let b = simulate_into(&cfg, tmp.path(), "b", &[]);
    for file in ["micrograph_000.mrc", "micrograph_001.mrc", "manifest.json"] {
        assert_eq!(
            fs::read(a.join(file)).unwrap(),
            fs::read(b.join(file)).unwrap(),
            "{file} differs between identical runs"
        );
    }

    let c = simulate_into(&cfg, tmp.path(), "c", &["--seed", "12"]);
    assert_ne!(
        fs::read(a.join("micrograph_000.mrc")).unwrap(),
        fs::read(c.join("micrograph_000.mrc")).unwrap(),
        "different seeds must change the data"
    );

    for file in ["truth_coefficients.json", "truth_volume.mrc", "run_config.json"] {
        assert!(a.join(file).exists(), "{file} missing");
    }
}

#[test]
fn reconstruct_resumes_and_matches_thread_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &tiny_config());
    let data = simulate_into(&cfg, tmp.path(), "data", &[]);
    let manifest = data.join("manifest.json");

    let full = tmp.path().join("full");
    run_ok(bin()
        .arg("--config")
        .arg(&cfg)
        .args(["--threads", "1"])
        .arg("reconstruct")
        .arg("--manifest")
        .arg(&manifest)
        .arg("--out")
        .arg(&full));
    for file in ["volume.mrc", "coefficients.json", "history.csv", "state_final.ckpt"] {
        assert!(full.join(file).exists(), "{file} missing");
    }
    let history = fs::read_to_string(full.join("history.csv")).unwrap();
    assert_eq!(history.lines().count(), 3, "two updates plus a header:\n{history}");

    // Resuming from the first snapshot must replay to the same coefficients.
    let resumed = tmp.path().join("resumed");
    run_ok(bin()
        .arg("--config")
        .arg(&cfg)
        .arg("reconstruct")
        .arg("--manifest")
        .arg(&manifest)
        .arg("--out")
        .arg(&resumed)
        .arg("--resume")
        .arg(full.join("checkpoints/iter_0001.ckpt")));
    assert_eq!(
        fs::read(full.join("coefficients.json")).unwrap(),
        fs::read(resumed.join("coefficients.json")).unwrap(),
        "resumed run drifted from the uninterrupted one"
    );

    // And so must a different thread count.
    let wide = tmp.path().join("wide");
    run_ok(bin()
        .arg("--config")
        .arg(&cfg)
        .args(["--threads", "4"])
        .arg("reconstruct")
        .arg("--manifest")
        .arg(&manifest)
        .arg("--out")
        .arg(&wide));
    assert_eq!(
        fs::read(full.join("coefficients.json")).unwrap(),
        fs::read(wide.join("coefficients.json")).unwrap(),
        "thread count changed the result"
    );
    assert_eq!(
        fs::read(full.join("volume.mrc")).unwrap(),
        fs::read(wide.join("volume.mrc")).unwrap()
    );
}

#[test]
fn resume_under_a_different_config_is_refused() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &tiny_config());
    let data = simulate_into(&cfg, tmp.path(), "data", &[]);
    let manifest = data.join("manifest.json");

    let full = tmp.path().join("full");
    run_ok(bin()
        .arg("--config")
        .arg(&cfg)
        .arg("reconstruct")
        .arg("--manifest")
        .arg(&manifest)
        .arg("--out")
        .arg(&full));

    let out = bin()
        .arg("--config")
        .arg(&cfg)
        .args(["--em-seed", "99"])
        .arg("reconstruct")
        .arg("--manifest")
        .arg(&manifest)
        .arg("--out")
        .arg(tmp.path().join("other"))
        .arg("--resume")
        .arg(full.join("checkpoints/iter_0001.ckpt"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1), "stderr: {}", stderr_of(&out));
    assert!(stderr_of(&out).contains("checkpoint"), "stderr: {}", stderr_of(&out));
}

#[test]
fn evaluate_self_resolves_to_nyquist() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &tiny_config());
    let data = simulate_into(&cfg, tmp.path(), "data", &[]);
    let vol = data.join("truth_volume.mrc");

    // Even demanding resolution through Nyquist (shell 3 at side 7) passes.
    let out = run_ok(bin()
        .arg("evaluate")
        .arg(&vol)
        .arg(&vol)
        .args(["--resolved-through", "3"]));
    let csv = String::from_utf8_lossy(&out.stdout).into_owned();
    assert!(csv.starts_with("shell,frequency,correlation\n"), "stdout: {csv}");
    for line in csv.lines().skip(1) {
        let corr: f64 = line.rsplit(',').next().unwrap().parse().unwrap();
        assert!(corr > 0.999, "self-FSC dipped: {line}");
    }
    assert!(stderr_of(&out).contains("resolved through shell 3"));
}

#[test]
fn evaluate_gates_on_resolution_and_warns_when_misaligned() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &tiny_config());
    let data = simulate_into(&cfg, tmp.path(), "data", &[]);
    let vol = data.join("truth_volume.mrc");

    // A deterministic unrelated volume: same side, broad spectrum.
    let side = 7;
    let other = ndarray::Array3::from_shape_fn((side, side, side), |(i, j, k)| {
        (1.3 * i as f64 + 0.7 * j as f64 + 2.1 * k as f64).sin()
    });
    let other_path = tmp.path().join("other.mrc");
    write_mrc_volume(&other_path, &other).unwrap();

    let out = bin()
        .arg("evaluate")
        .arg(&vol)
        .arg(&other_path)
        .args(["--resolved-through", "3"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1), "stderr: {}", stderr_of(&out));
    let err = stderr_of(&out);
    assert!(err.contains("--align"), "expected a misalignment hint, got: {err}");
    // The raw curve is still reported.
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("shell,frequency,correlation"));
}

#[test]
fn pick_scores_truth_coefficients_and_gates_on_thresholds() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &tiny_config());
    let data = simulate_into(&cfg, tmp.path(), "data", &[]);
    let manifest = data.join("manifest.json");

    let report_path = tmp.path().join("picks.json");
    run_ok(bin()
        .arg("--config")
        .arg(&cfg)
        .arg("pick")
        .arg("--manifest")
        .arg(&manifest)
        .arg("--coefficients")
        .arg(data.join("truth_coefficients.json"))
        .arg("--out")
        .arg(&report_path));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&report_path).unwrap()).unwrap();
    let f1 = report["report"]["f1_empty"].as_f64().unwrap();
    let baseline = report["baseline_f1_all_empty"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&f1));
    assert!((0.0..=1.0).contains(&baseline));
    assert_eq!(report["config_hash"].as_str().unwrap().len(), 64);
    assert!(!report["report"]["picks"].as_array().unwrap().is_empty());

    // Zero coefficients degenerate to all-empty picks, whose F1 equals the
    // baseline; a minimum of 1.0 then fails deterministically.
    let params = BandlimitParams::new(0.5, 7, 2).unwrap();
    let zeros_path = tmp.path().join("zeros.json");
    fs::write(
        &zeros_path,
        serde_json::to_string(&VolumeCoefficients::zeros(&params)).unwrap(),
    )
    .unwrap();
    let gated = tiny_config().replace(
        r#""em": {"#,
        r#""pick": { "min_f1": 1.0 }, "em": {"#,
    );
    let gated_cfg = tmp.path().join("gated_config.json");
    fs::write(&gated_cfg, gated).unwrap();
    let out = bin()
        .arg("--config")
        .arg(&gated_cfg)
        .arg("pick")
        .arg("--manifest")
        .arg(&manifest)
        .arg("--coefficients")
        .arg(&zeros_path)
        .arg("--out")
        .arg(tmp.path().join("gated.json"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1), "stderr: {}", stderr_of(&out));
    assert!(stderr_of(&out).contains("below the configured minimum"));

    // Exactly one volume source must be given.
    let out = bin()
        .arg("--config")
        .arg(&cfg)
        .arg("pick")
        .arg("--manifest")
        .arg(&manifest)
        .arg("--out")
        .arg(tmp.path().join("none.json"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn render_projection_writes_a_patch_sized_image() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &tiny_config());
    let data = simulate_into(&cfg, tmp.path(), "data", &[]);

    let img_path = tmp.path().join("proj.mrc");
    run_ok(bin()
        .arg("--config")
        .arg(&cfg)
        .arg("render-projection")
        .arg("--coefficients")
        .arg(data.join("truth_coefficients.json"))
        .args(["--euler", "0.3,1.0,-0.5"])
        .arg("--out")
        .arg(&img_path));
    let img = read_mrc_image(&img_path).unwrap();
    assert_eq!(img.shape(), [7, 7]);
    assert!(img.iter().all(|v| v.is_finite()));
    assert!(img.iter().any(|v| v.abs() > 0.0));

    let out = bin()
        .arg("--config")
        .arg(&cfg)
        .arg("render-projection")
        .arg("--coefficients")
        .arg(data.join("truth_coefficients.json"))
        .args(["--euler", "0.3,oops,-0.5"])
        .arg("--out")
        .arg(tmp.path().join("bad.mrc"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn cache_basis_is_reused_via_flag_and_env_var() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &tiny_config());
    let cache = tmp.path().join("cache");

    let out = run_ok(bin()
        .arg("--config")
        .arg(&cfg)
        .arg("--cache-dir")
        .arg(&cache)
        .arg("cache-basis"));
    let printed = String::from_utf8_lossy(&out.stdout).trim().to_string();
    assert!(Path::new(&printed).exists(), "cache file missing: {printed}");
    let before = fs::metadata(&printed).unwrap().modified().unwrap();

    // Same parameters through the env var: the entry is reused, not rebuilt.
    let mut cmd = bin();
    cmd.env("MICREM_CACHE_DIR", &cache);
    let again = run_ok(cmd.arg("--config").arg(&cfg).arg("cache-basis"));
    assert_eq!(String::from_utf8_lossy(&again.stdout).trim(), printed);
    assert_eq!(fs::metadata(&printed).unwrap().modified().unwrap(), before);

    // A cached simulate produces the same bytes as an uncached one.
    let cached = simulate_into(&cfg, tmp.path(), "cached", &["--cache-dir", cache.to_str().unwrap()]);
    let plain = simulate_into(&cfg, tmp.path(), "plain", &[]);
    assert_eq!(
        fs::read(cached.join("micrograph_000.mrc")).unwrap(),
        fs::read(plain.join("micrograph_000.mrc")).unwrap()
    );
}

#[test]
fn bad_inputs_map_to_the_documented_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();

    // Missing --config is a usage error.
    let out = bin().arg("cache-basis").output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr_of(&out).contains("--config"));

    // Malformed config JSON is a validation error, not an I/O one.
    let bad = write_config(tmp.path(), "{ not json");
    let out = bin().arg("--config").arg(&bad).arg("cache-basis").output().unwrap();
    assert_eq!(out.status.code(), Some(1));

    // A missing manifest is an I/O error.
    let cfg = write_config(tmp.path(), &tiny_config());
    let out = bin()
        .arg("--config")
        .arg(&cfg)
        .arg("reconstruct")
        .arg("--manifest")
        .arg(tmp.path().join("nope/manifest.json"))
        .arg("--out")
        .arg(tmp.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3), "stderr: {}", stderr_of(&out));

    // A truncated micrograph is a format error.
    let data = simulate_into(&cfg, tmp.path(), "data", &[]);
    let mrc = data.join("micrograph_000.mrc");
    let bytes = fs::read(&mrc).unwrap();
    fs::write(&mrc, &bytes[..bytes.len() / 2]).unwrap();
    let out = bin()
        .arg("--config")
        .arg(&cfg)
        .arg("reconstruct")
        .arg("--manifest")
        .arg(data.join("manifest.json"))
        .arg("--out")
        .arg(tmp.path().join("out2"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3), "stderr: {}", stderr_of(&out));
}

#[test]
fn evaluate_accepts_a_written_then_reread_volume() {
    // Round-trip sanity from the user's side of the I/O boundary.
    let tmp = tempfile::tempdir().unwrap();
    let side = 7;
    let v = ndarray::Array3::from_shape_fn((side, side, side), |(i, j, k)| {
        (0.9 * i as f64).cos() + (0.4 * j as f64 - 1.1 * k as f64).sin()
    });
    let p = tmp.path().join("v.mrc");
    write_mrc_volume(&p, &v).unwrap();
    let back = read_mrc_volume(&p).unwrap();
    let err: f64 = v
        .iter()
        .zip(back.iter())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    assert!(err < 1e-6, "f32 round trip error {err}");

    let out = run_ok(bin().arg("evaluate").arg(&p).arg(&p));
    assert!(String::from_utf8_lossy(&out.stdout).contains("shell,frequency,correlation"));
}
