use std::path::Path;
use std::process::{Command, Output};

use motionzero::planner::{build_prompt, PromptKind, ReplayProvider};
use motionzero::MotionPlan;

fn motionzero(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_motionzero"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn plan_from_lexicon() {
    let out = motionzero(&["plan", "--prompt", "An airplane is landing on the runway."]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let plan = MotionPlan::from_json(&stdout(&out)).unwrap();
    assert_eq!(plan.characters()[0].name, "airplane");
    assert!(plan.characters()[0].directions.iter().all(|d| d.label() == "down"));
}

#[test]
fn plan_from_transcript() {
    let dir = tempfile::tempdir().unwrap();
    let prompt = "A horse is jumping over a fence.";
    let request = build_prompt(PromptKind::Directions, prompt, None, 8).unwrap();
    let answer = r#"["horse": "up"], ["horse": "up"], ["horse": "down"], ["horse": "down"]"#;
    let transcript = dir.path().join("t.txt");
    std::fs::write(&transcript, ReplayProvider::render_entry(&request, answer)).unwrap();
    let out = motionzero(&["plan", "--prompt", prompt, "--llm", "replay", "--transcript", p(&transcript)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let plan = MotionPlan::from_json(&stdout(&out)).unwrap();
    let labels: Vec<&str> = plan.characters()[0].directions.iter().map(|d| d.label()).collect();
    assert_eq!(labels, ["up", "up", "up", "up", "down", "down", "down"]);
}

#[test]
fn replay_without_entry_is_a_stage_failure() {
    let dir = tempfile::tempdir().unwrap();
    let transcript = dir.path().join("t.txt");
    std::fs::write(&transcript, "").unwrap();
    let out = motionzero(&["plan", "--prompt", "a cat", "--llm", "replay", "--transcript", p(&transcript)]);
    assert_eq!(code(&out), 3, "{}", stderr(&out));
}

#[test]
fn generate_then_eval_and_edit() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run");
    let out = motionzero(&["generate", "--prompt", "a red square moving right", "--out", p(&run), "--gif"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(stdout(&out).contains("motion accuracy 1.000"));
    for f in ["frame_007.png", "mask_red_square_007.png", "plan.json", "report.json", "latents_t1.bin", "video.gif"] {
        assert!(run.join(f).exists(), "missing {f}");
    }
    assert!(!dir.path().join("run.staging").exists());

    let out = motionzero(&["eval", "--run", p(&run)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let report: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(report["mean_accuracy"], 1.0);

    let edited = dir.path().join("edited");
    let out = motionzero(&["edit", "--base", p(&run), "--background", "a red square on a blue sky", "--out", p(&edited)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(edited.join("frame_007.png").exists());
}

#[test]
fn eval_against_reversed_plan_scores_zero() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run");
    assert_eq!(code(&motionzero(&["generate", "--prompt", "a red square moving right", "--out", p(&run)])), 0);
    let plan = std::fs::read_to_string(run.join("plan.json")).unwrap().replace("\"right\"", "\"left\"");
    let reversed = dir.path().join("reversed.json");
    std::fs::write(&reversed, plan).unwrap();
    let out = motionzero(&["eval", "--run", p(&run), "--plan", p(&reversed)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let report: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(report["mean_accuracy"], 0.0);
}

#[test]
fn seeds_run_into_separate_directories() {
    let dir = tempfile::tempdir().unwrap();
    let out = motionzero(&[
        "generate", "--prompt", "a red square moving down", "--size", "256", "--sigma", "2", "--seeds", "3..4",
        "--out", p(dir.path()),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(dir.path().join("seed_3/report.json").exists());
    assert!(dir.path().join("seed_4/report.json").exists());
}

#[test]
fn unreachable_bridge_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = motionzero(&[
        "generate", "--prompt", "a red square moving right", "--backend", "bridge", "--bridge-url",
        "http://127.0.0.1:9", "--out", p(&dir.path().join("x")),
    ]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("http://127.0.0.1:9/health"), "{}", stderr(&out));
}

#[test]
fn usage_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&motionzero(&["frobnicate"])), 1);
    assert_eq!(code(&motionzero(&["generate", "--out", p(dir.path())])), 1);
    assert_eq!(code(&motionzero(&["generate", "--prompt", "a cat", "--backend", "bridge", "--out", p(dir.path())])), 1);
    assert_eq!(code(&motionzero(&["plan", "--prompt", "a cat", "--llm", "replay"])), 1);
    assert_eq!(code(&motionzero(&["generate", "--prompt", "a cat", "--gamma", "2", "--out", p(dir.path())])), 1);
    assert_eq!(code(&motionzero(&["--help"])), 0);
}

#[test]
fn edit_of_missing_run_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let out = motionzero(&[
        "edit", "--base", p(&dir.path().join("nothing")), "--foreground", "a blue square", "--out",
        p(&dir.path().join("o")),
    ]);
    assert_eq!(code(&out), 3, "{}", stderr(&out));
}

#[test]
fn skeleton_from_plan_text() {
    let dir = tempfile::tempdir().unwrap();
    let plan = dir.path().join("plan.txt");
    std::fs::write(&plan, "Frame 1: right hand: up\nFrame 2: right hand: down\n").unwrap();
    let out_dir = dir.path().join("sk");
    let out = motionzero(&["skeleton", "--prompt", "wave", "--frames", "3", "--plan", p(&plan), "--out", p(&out_dir)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let poses: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out_dir.join("poses.json")).unwrap()).unwrap();
    let hand = |k: usize| poses["poses"][k][4]["y"].as_i64().unwrap();
    assert_eq!(hand(1), hand(0) - 16);
    assert_eq!(hand(2), hand(0));
    assert!(out_dir.join("skeleton_002.png").exists());
}

#[test]
fn skeleton_fallback_warns_on_unknown_action() {
    let dir = tempfile::tempdir().unwrap();
    let out = motionzero(&["skeleton", "--prompt", "a man reading", "--size", "128", "--out", p(&dir.path().join("s"))]);
    assert_eq!(code(&out), 0);
    assert!(stderr(&out).contains("warning"));
}
