use std::path::PathBuf;
use std::process::Command;

fn example(name: &str) -> PathBuf {
    let deps = std::env::current_exe()
        .unwrap()
        .parent()
        .unwrap()
        .to_path_buf();
    let path = deps
        .parent()
        .unwrap()
        .join("examples")
        .join(format!("{name}{}", std::env::consts::EXE_SUFFIX));
    if !path.exists() {
        let status = Command::new(env!("CARGO"))
            .args([
                "build",
                "--example",
                name,
                "--manifest-path",
                concat!(env!("CARGO_MANIFEST_DIR"), "/Cargo.toml"),
            ])
            .status()
            .unwrap();
        assert!(status.success(), "building example {name}");
    }
    path
}

fn run(name: &str) -> String {
    let out = Command::new(example(name)).output().unwrap();
    assert!(
        out.status.success(),
        "{name}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn gradient_check() {
    assert!(!run("gradient_check").is_empty());
}

#[test]
fn constraint_losses() {
    assert!(!run("constraint_losses").is_empty());
}

#[test]
fn glyph_dataset() {
    assert!(!run("glyph_dataset").is_empty());
}

#[test]
fn idx_format() {
    assert!(!run("idx_format").is_empty());
}

#[test]
fn checkpoint() {
    assert!(!run("checkpoint").is_empty());
}

#[test]
fn a_distance() {
    assert!(!run("a_distance").is_empty());
}

#[test]
fn latent_manipulation() {
    assert!(!run("latent_manipulation").is_empty());
}

#[test]
fn train_ddg() {
    assert!(!run("train_ddg").is_empty());
}

#[test]
fn erm_vs_ddg() {
    assert!(!run("erm_vs_ddg").is_empty());
}
