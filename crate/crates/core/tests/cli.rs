use std::fs;
use std::process::Command;

fn mlnmt(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_mlnmt")).args(args).env("RUST_LOG", "warn").output().unwrap()
}

#[test]
fn usage_and_runtime_errors_have_distinct_codes() {
    let out = mlnmt(&["translate", "--model", "m"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert_eq!(err.lines().count(), 1, "{err}");
    assert!(err.starts_with("error: "));

    let out = mlnmt(&["bleu", "--hyp", "/nonexistent/a", "--ref", "/nonexistent/b"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(String::from_utf8(out.stderr).unwrap().lines().count(), 1);

    let out =
        mlnmt(&["prep", "--strategy", "universal", "--parallel", "de:en:/nonexistent/a:/nonexistent/b", "--out", "x"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn every_subcommand_has_help() {
    for sub in [
        "bpe-learn",
        "bpe-apply",
        "prep",
        "train",
        "adapt",
        "translate",
        "pivot",
        "bleu",
        "lang-stats",
        "export-embeddings",
    ] {
        let out = mlnmt(&[sub, "--help"]);
        assert!(out.status.success(), "{sub}");
        assert!(String::from_utf8(out.stdout).unwrap().contains("--seed"), "{sub}");
    }
}

#[test]
fn bpe_and_bleu_commands() {
    let dir = tempfile::tempdir().unwrap();
    let p = |f: &str| dir.path().join(f).display().to_string();
    fs::write(p("text"), "low lower lowest\nnewer newest widest\nlow low lower\n").unwrap();
    assert!(mlnmt(&["bpe-learn", "--input", &p("text"), "--merges", "10", "--out", &p("codes")]).status.success());
    assert_eq!(mlnmt::bpe::MergeTable::load(p("codes")).unwrap().len(), 10);
    let out = mlnmt(&["bpe-apply", "--merges", &p("codes"), "--input", &p("text")]);
    let segmented = String::from_utf8(out.stdout).unwrap();
    assert_eq!(segmented.lines().count(), 3);
    assert_eq!(mlnmt::cli::join_subwords(segmented.lines().next().unwrap()), "low lower lowest");

    fs::write(p("hyp"), "the cat sat on the mat\na dog ran\n").unwrap();
    fs::write(p("ref"), "the cat sat on the mat today\na dog ran in the park quickly\n").unwrap();
    let out = mlnmt(&["bleu", "--hyp", &p("hyp"), "--ref", &p("ref")]);
    assert_eq!(
        String::from_utf8(out.stdout).unwrap(),
        "BLEU = 57.38, 100.0/100.0/100.0/100.0 (BP=0.574, ratio=0.643, hyp_len=9, ref_len=14)\n"
    );

    fs::write(p("coded"), "<EN> @en@a @fr@b @en@c\n@fr@x @fr@y\n").unwrap();
    let out = mlnmt(&["lang-stats", "--input", &p("coded"), "--forced", "en"]);
    assert_eq!(
        String::from_utf8(out.stdout).unwrap(),
        "words in wrong language: 60.00 (3/5)\tsentences in wrong language: 50.00 (1/2)\n"
    );
}
