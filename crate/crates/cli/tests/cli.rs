use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

fn migratekit(args: &[&str], config: &Path, workdir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_migratekit"))
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--workdir")
        .arg(workdir)
        .output()
        .expect("migratekit starts")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn report_after_run_reproduces_the_same_bytes() {
    let d = tempfile::tempdir().unwrap();
    let config = fixture("minic").join("config.toml");
    assert_eq!(migratekit(&["run"], &config, d.path()).status.code(), Some(0));
    let json = std::fs::read(d.path().join("report.json")).unwrap();
    let md = std::fs::read(d.path().join("report.md")).unwrap();
    std::fs::remove_file(d.path().join("report.json")).unwrap();
    let out = migratekit(&["report"], &config, d.path());
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert_eq!(std::fs::read(d.path().join("report.json")).unwrap(), json);
    assert_eq!(std::fs::read(d.path().join("report.md")).unwrap(), md);
}

#[test]
fn stages_run_one_at_a_time_and_skip_when_inputs_are_unchanged() {
    let d = tempfile::tempdir().unwrap();
    let config = fixture("minic").join("config.toml");
    for stage in ["split", "cprobe", "translate", "rustprobe"] {
        let out = migratekit(&[stage], &config, d.path());
        assert_eq!(out.status.code(), Some(0), "{stage}: {}", stderr(&out));
    }
    let before = std::fs::read(d.path().join("state.json")).unwrap();
    let out = migratekit(&["rustprobe"], &config, d.path());
    assert!(stdout(&out).contains(" 0 ran"), "{}", stdout(&out));
    assert_eq!(std::fs::read(d.path().join("state.json")).unwrap(), before);
}

#[test]
fn a_stage_without_its_inputs_names_the_missing_artifact() {
    let d = tempfile::tempdir().unwrap();
    let config = fixture("minic").join("config.toml");
    assert_eq!(migratekit(&["split"], &config, d.path()).status.code(), Some(0));
    let out = migratekit(&["translate"], &config, d.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("missing prerequisite"), "{}", stderr(&out));
    assert!(stderr(&out).contains("unit.json"), "{}", stderr(&out));
}

#[test]
fn lanes_without_completions_halt_and_the_run_exits_two() {
    let d = tempfile::tempdir().unwrap();
    let replay = d.path().join("empty.json");
    std::fs::write(&replay, "{}").unwrap();
    let config = d.path().join("config.toml");
    std::fs::write(
        &config,
        format!(
            "root = {:?}\ndataset = \"minic\"\n\n[backend]\nkind = \"replay\"\nreplay = {:?}\n",
            fixture("minic").join("src"),
            replay
        ),
    )
    .unwrap();
    let work = d.path().join("work");
    let out = migratekit(&["run"], &config, &work);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
    assert!(stderr(&out).contains("halted"), "{}", stderr(&out));
}

#[test]
fn scripted_review_resolves_the_conflict() {
    let d = tempfile::tempdir().unwrap();
    let config = fixture("conflict").join("config.toml");
    assert_eq!(migratekit(&["run"], &config, d.path()).status.code(), Some(0));
    let script = fixture("conflict").join("review.script");
    let out = migratekit(&["review", "--script", script.to_str().unwrap()], &config, d.path());
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("conflict `scale`"), "{text}");
    assert!(text.contains("rejected edit of `scale`: module has"), "{text}");
    assert!(text.contains("the new text defines `scale_a`"), "{text}");
    assert!(text.contains("accepted edit of `scale`"), "{text}");
    assert!(text.contains("1 accepted, 2 rejected, 0 open issues"), "{text}");
    let conflicts = std::fs::read_to_string(d.path().join("conflicts.json")).unwrap();
    assert_eq!(conflicts.trim(), "[]");

    // A second session has nothing left to do.
    let again = migratekit(&["review", "--script", script.to_str().unwrap()], &config, d.path());
    assert!(stdout(&again).contains("nothing to review"), "{}", stdout(&again));

    // The manual edit shows up in the report.
    let out = migratekit(&["report"], &config, d.path());
    assert_eq!(out.status.code(), Some(0));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["module"]["mml_count"], 2);
}
