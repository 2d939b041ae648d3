use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn sni(args: &[&str]) -> Output {
    let out = Command::new(env!("CARGO_BIN_EXE_sni")).args(args).output().unwrap();
    assert!(
        out.status.success(),
        "sni {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn generate_then_integrate_from_files() {
    let dir = tempfile::tempdir().unwrap();
    let gen = dir.path().join("gen");
    sni(&["generate", "--dataset", "vase", "--size", "48", "--noise-pct", "2", "--seed", "3", "--out", s(&gen)]);
    for f in ["gradient.gf", "mask.png", "truth.pfm"] {
        assert!(gen.join(f).exists(), "{f}");
    }
    let run = dir.path().join("run");
    let out = sni(&[
        "integrate",
        "--gradient",
        s(&gen.join("gradient.gf")),
        "--mask",
        s(&gen.join("mask.png")),
        "--truth",
        s(&gen.join("truth.pfm")),
        "--method",
        "fm-pcg",
        "--precond",
        "mic",
        "--tau",
        "0.01",
        "--alpha",
        "0.001",
        "--tol",
        "1e-6",
        "--lambda",
        "1e5",
        "--export-matrix",
        "--out",
        s(&run),
    ]);
    assert!(String::from_utf8_lossy(&out.stdout).contains("mse"));
    for f in ["depth.pfm", "error.png", "manifest.json", "stats.csv", "matrix.coo", "rhs.txt"] {
        assert!(run.join(f).exists(), "{f}");
    }
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(run.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["spec"]["method"], "fm-pcg");
    assert_eq!(manifest["spec"]["preconditioner"]["tau"], 0.01);
    assert_eq!(manifest["converged"], true);
    let stats = fs::read_to_string(run.join("stats.csv")).unwrap();
    assert!(stats.starts_with("size,preconditioner,tau,alpha,iterations,seconds,final_residual\n"));
}

#[test]
fn every_method_on_a_builtin_dataset() {
    let dir = tempfile::tempdir().unwrap();
    for method in ["fm", "cg", "pcg", "fm-pcg", "fft", "dct"] {
        let out = dir.path().join(method);
        sni(&["integrate", "--dataset", "peaks", "--size", "40", "--method", method, "--out", s(&out)]);
        assert!(out.join("depth.pfm").exists());
    }
    let out = dir.path().join("robust");
    sni(&[
        "integrate", "--dataset", "sombrero", "--size", "40", "--outlier-frac", "0.02", "--robustify", "--out", s(&out),
    ]);
}

#[test]
fn benchmark_numeric_columns_repeat_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        sni(&[
            "benchmark", "--dataset", "sombrero,phantom", "--sizes", "32", "--method", "cg,pcg,fm-pcg", "--precond",
            "none,mic,ic", "--tau", "0,0.001", "--noise-pct", "5", "--seed", "9", "--out", s(&out),
        ]);
        let text = fs::read_to_string(out.join("benchmark.csv")).unwrap();
        sni::pipeline::strip_timing_columns(&text).unwrap()
    };
    let (a, b) = (run("a"), run("b"));
    assert_eq!(a, b);
    assert_eq!(a.lines().count(), 1 + 2 * (1 + 5 + 5));
    assert!(!a.contains("seconds"));
}

#[test]
fn photometric_stereo_from_rendered_images() {
    let dir = tempfile::tempdir().unwrap();
    let gen = dir.path().join("gen");
    sni(&["generate", "--dataset", "sombrero", "--size", "48", "--ps-images", "--out", s(&gen)]);
    let images: Vec<String> = (0..4).map(|i| s(&gen.join(format!("image_{i}.png"))).to_string()).collect();
    let out = dir.path().join("ps");
    let mut args = vec!["ps", "--images"];
    args.extend(images.iter().map(String::as_str));
    let lights = gen.join("lights.txt");
    args.extend(["--lights", s(&lights), "--method", "fm-pcg", "--out", s(&out)]);
    sni(&args);
    for f in ["depth.pfm", "normals.png", "albedo.png", "manifest.json"] {
        assert!(out.join(f).exists(), "{f}");
    }
}

#[test]
fn bad_input_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_sni"))
        .args(["integrate", "--gradient", s(&dir.path().join("missing.gf")), "--out", s(dir.path())])
        .output()
        .unwrap();
    assert!(!out.status.success());
    let out = Command::new(env!("CARGO_BIN_EXE_sni")).args(["integrate", "--method", "sor"]).output().unwrap();
    assert!(!out.status.success());
}
