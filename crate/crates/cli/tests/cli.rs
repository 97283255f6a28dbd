use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_uav-noma"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn tiny_config(dir: &Path) -> String {
    let path = dir.join("tiny.toml");
    std::fs::write(
        &path,
        "[env]\nslots = 1\nrecluster_period = 1\n[trainer]\nepisodes = 1\nbatch_size = 2\n",
    )
    .unwrap();
    path.to_str().unwrap().to_string()
}

fn lines(path: &Path) -> Vec<String> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(String::from)
        .collect()
}

#[test]
fn train_smoke_writes_one_episode_row() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path());
    let out = dir.path().join("run");
    ok(&["train", "--config", &cfg, "--algo", "mdqn", "--seed", "3", "--out", out.to_str().unwrap()]);
    let ep = lines(&out.join("episodes.csv"));
    assert_eq!(ep[0], "episode,throughput_bits,violation_rate,epsilon");
    assert_eq!(ep.len(), 2);
    assert!(ep[1].starts_with("0,"));
    assert_eq!(lines(&out.join("loss.csv"))[0], "step,loss");
    assert!(out.join("checkpoint.txt").exists());
    let manifest = std::fs::read_to_string(out.join("manifest.toml")).unwrap();
    assert!(manifest.contains("episodes.csv") && manifest.contains("checkpoint.txt"));
    let raw = std::fs::read(out.join("episodes.csv")).unwrap();
    assert!(!raw.contains(&b'\r'));
}

#[test]
fn independent_training_then_eval_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path());
    let run_dir = dir.path().join("run");
    ok(&["train", "--config", &cfg, "--algo", "independent", "--seed", "1", "--out", run_dir.to_str().unwrap()]);
    let cps: Vec<String> = (0..3)
        .map(|u| run_dir.join(format!("checkpoint-agent{u}.txt")).to_str().unwrap().to_string())
        .collect();
    let eval_dir = dir.path().join("eval");
    let mut args = vec!["eval", "--config", &cfg, "--episodes", "2", "--out", eval_dir.to_str().unwrap()];
    for c in &cps {
        args.extend(["--checkpoint", c.as_str()]);
    }
    ok(&args);
    let slots = lines(&eval_dir.join("slots.csv"));
    assert_eq!(
        slots[0],
        "slot,sum_rate,rate_user0,rate_user1,rate_user2,rate_user3,rate_user4,rate_user5,lambda"
    );
    assert_eq!(slots.len(), 3);
    assert_eq!(lines(&eval_dir.join("eval.csv")).len(), 3);
}

#[test]
fn identical_flags_give_identical_csvs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path());
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for d in [&a, &b] {
        ok(&["train", "--config", &cfg, "--seed", "11", "--episodes", "2", "--out", d.to_str().unwrap()]);
    }
    for f in ["episodes.csv", "loss.csv", "checkpoint.txt"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn errors_are_reported() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let o = out.to_str().unwrap();

    let unknown = run(&["train", "--warp", "--out", o]);
    assert!(!unknown.status.success());

    let missing = run(&["eval", "--checkpoint", "/no/such/checkpoint.txt", "--out", o]);
    assert!(!missing.status.success());
    assert!(String::from_utf8_lossy(&missing.stderr).contains("checkpoint"));

    let bad = dir.path().join("bad.txt");
    uav_noma::neural::Mlp::zeros(4, 3, 2).save(&bad).unwrap();
    let dims = run(&["eval", "--checkpoint", bad.to_str().unwrap(), "--out", o]);
    assert!(!dims.status.success());
    assert!(String::from_utf8_lossy(&dims.stderr).contains("dimension"));

    let no_cfg = run(&["train", "--config", "/no/such.toml", "--out", o]);
    assert!(String::from_utf8_lossy(&no_cfg.stderr).contains("cannot read config"));

    let kind = run(&["baseline", "--kind", "teleport", "--out", o]);
    assert!(String::from_utf8_lossy(&kind.stderr).contains("unknown kind"));
}

#[test]
fn baseline_fixed_policy_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path());
    let out = dir.path().join("circ");
    ok(&["baseline", "--kind", "circular", "--config", &cfg, "--eval-episodes", "2", "--out", out.to_str().unwrap()]);
    assert_eq!(lines(&out.join("slots.csv")).len(), 3);
    assert!(!out.join("loss.csv").exists());

    let learned = dir.path().join("oma");
    ok(&["baseline", "--kind", "oma", "--config", &cfg, "--eval-episodes", "1", "--out", learned.to_str().unwrap()]);
    assert!(learned.join("loss.csv").exists());
    assert!(learned.join("checkpoint.txt").exists());
}

#[test]
fn compare_writes_summary_and_ratio() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.toml");
    std::fs::write(
        &spec,
        "seeds = [1, 2]\narms = [\"mdqn\", \"independent\", \"circular\"]\neval_episodes = 1\n\
         [env]\nslots = 20\nrecluster_period = 10\n[trainer]\nepisodes = 2\nbatch_size = 4\n",
    )
    .unwrap();
    let out = dir.path().join("cmp");
    ok(&["compare", "--spec", spec.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    let summary = lines(&out.join("summary.csv"));
    assert_eq!(summary.len(), 4);
    assert!(summary[3].starts_with("circular,2,"));
    assert!(summary[3].ends_with(",,"));
    let ratio = lines(&out.join("ratio.csv"));
    assert_eq!(ratio[0], "seed,mdqn_steps,independent_steps,ratio");
    assert_eq!(ratio.len(), 3);
    assert!(out.join("cells/mdqn-seed1/loss.csv").exists());
    assert!(out.join("cells/circular-seed2/slots.csv").exists());
}

#[test]
fn readme_default_config_is_accurate() {
    let readme = include_str!("../../../README.md");
    let start = readme.find("```toml\n[env]").expect("default config block") + "```toml\n".len();
    let block = &readme[start..start + readme[start..].find("```").unwrap()];
    let parsed = uav_noma::config::Config::parse(block).unwrap();
    assert_eq!(parsed, uav_noma::config::Config::default());
}
