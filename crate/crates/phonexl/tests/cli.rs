use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn phonexl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_phonexl")).args(args).output().unwrap()
}

fn config() -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("configs/panx-zh-vi.conf")
        .display()
        .to_string()
}

#[test]
fn usage_errors_exit_with_2() {
    for args in [&["no-such-command"][..], &["train", "--epochs", "many"], &["transcribe"]] {
        assert_eq!(phonexl(args).status.code(), Some(2), "{args:?}");
    }
    let missing = phonexl(&["inspect-dataset", "/nonexistent/corpus.tsv"]);
    assert_eq!(missing.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&missing.stderr).starts_with("error: "));
    let bad_key = phonexl(&["--config", &config(), "--set", "colour=blue", "train"]);
    assert_eq!(bad_key.status.code(), Some(2));
}

#[test]
fn divergent_training_exits_with_3_and_keeps_last_good() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let r = phonexl(&[
        "--config",
        &config(),
        "--set",
        "lr=1e300",
        "--set",
        "clip_norm=1e300",
        "train",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(r.status.code(), Some(3), "{}", String::from_utf8_lossy(&r.stderr));
    assert!(out.join("last-good.ckpt").exists());
}

#[test]
fn transcribe_fills_the_phonemic_column() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in.tsv");
    let output = dir.path().join("out.tsv");
    fs::write(&input, "# lang = vi\nViệt Nam\t_\tB-LOC\n").unwrap();
    let r = phonexl(&["transcribe", input.to_str().unwrap(), output.to_str().unwrap()]);
    assert!(r.status.success());
    let text = fs::read_to_string(&output).unwrap();
    assert_eq!(text, "# lang = vi\nViệt Nam\tv·i·ə·t·˨ˀ˩·.·n·a·m·˧\tB-LOC\n");
}

#[test]
fn uncovered_characters_are_reported() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in.tsv");
    fs::write(&input, "# lang = zh\n电☃\t_\tO\n").unwrap();
    let r = phonexl(&["transcribe", input.to_str().unwrap(), dir.path().join("o.tsv").to_str().unwrap()]);
    assert_eq!(r.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&r.stderr).contains('☃'));
}

#[test]
fn gradcheck_passes() {
    let r = phonexl(&["gradcheck", "--problems", "1"]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stdout));
}
