use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn osc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_osc"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn verb(verb: &str, config: &Path, seed: u64, out: &Path, extra: &[&str]) -> Output {
    let seed = seed.to_string();
    let mut args = vec![verb, "--config", config.to_str().unwrap(), "--seed", &seed, "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    let o = osc(&args);
    assert!(o.status.success(), "{verb} failed: {}", String::from_utf8_lossy(&o.stderr));
    o
}

/// Every file under `dir` with its bytes, sorted by relative path.
fn snapshot(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    fn walk(root: &Path, dir: &Path, acc: &mut Vec<(PathBuf, Vec<u8>)>) {
        for e in std::fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                walk(root, &p, acc);
            } else {
                acc.push((p.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&p).unwrap()));
            }
        }
    }
    let mut acc = Vec::new();
    walk(dir, dir, &mut acc);
    acc.sort();
    acc
}

const SMALL_RUN: &str = r#"
[task]
kind = "spread"
objects = ["blob_a"]
[policy]
kind = "random"
[experiment]
seeds = 2
eval_rollouts = 2
"#;

#[test]
fn run_is_byte_identical_across_reruns() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "run.toml", SMALL_RUN);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    verb("run", &cfg, 11, &a, &[]);
    verb("run", &cfg, 11, &b, &[]);
    let (sa, sb) = (snapshot(&a), snapshot(&b));
    assert!(sa.iter().any(|(p, _)| p.ends_with("rewards.csv")));
    assert_eq!(sa, sb);
    let summary = std::fs::read_to_string(a.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 5);
    // a different seed changes the outcome
    let c = tmp.path().join("c");
    verb("run", &cfg, 12, &c, &[]);
    assert_ne!(std::fs::read(c.join("summary.csv")).unwrap(), summary.into_bytes());
}

#[test]
fn render_is_byte_identical_and_reads_logs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "render.toml", "[task]\nkind = \"mash\"\n[render]\nscale = 2\n");
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    verb("render", &cfg, 4, &a, &[]);
    verb("render", &cfg, 4, &b, &[]);
    let sa = snapshot(&a);
    assert_eq!(sa.iter().filter(|(p, _)| p.extension().is_some_and(|e| e == "ppm")).count(), 6);
    assert_eq!(sa, snapshot(&b));
    let first = &sa.iter().find(|(p, _)| p.ends_with("frame_000.ppm")).unwrap().1;
    assert!(first.starts_with(b"P6\n128 128\n255\n"));
    // re-rendering from the written log reproduces the frames
    let c = tmp.path().join("c");
    verb("render", &cfg, 4, &c, &["--log", a.to_str().unwrap()]);
    for (p, bytes) in snapshot(&c) {
        assert_eq!(&sa.iter().find(|(q, _)| *q == p).unwrap().1, &bytes);
    }
}

#[test]
fn matrix_and_efficiency_write_tables() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "m.toml",
        r#"
[task]
objects = ["rectangle"]
[experiment]
seeds = 1
eval_rollouts = 2
tasks = ["mash"]
policies = ["random", "sparta_g", "goaldist_l"]
efficiency_episodes = 3
"#,
    );
    let out = tmp.path().join("m");
    let o = verb("matrix", &cfg, 0, &out, &[]);
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert!(stdout.contains("rectangle (seen)"));
    let csv = std::fs::read_to_string(out.join("matrix.csv")).unwrap();
    assert!(csv.starts_with("task,object,seen,policy,mean,std,n,status\n"));
    assert!(csv.contains("goaldist_l,0.000000,0.000000,0,missing_checkpoint"));
    let again = tmp.path().join("m2");
    verb("matrix", &cfg, 0, &again, &[]);
    assert_eq!(snapshot(&out), snapshot(&again));

    let eff = tmp.path().join("e");
    let o = verb("ablate-efficiency", &cfg, 0, &eff, &[]);
    assert!(String::from_utf8(o.stdout).unwrap().contains("mash: sparta_g"));
    let rows = std::fs::read_to_string(eff.join("efficiency.csv")).unwrap();
    assert_eq!(rows.lines().count(), 3);
}

#[test]
fn train_writes_curves_and_checkpoints_deterministically() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "t.toml",
        r#"
[policy]
kind = "sparta_l"
[learn]
pool = 4
hidden = [8, 8]
batch = 16
utd = 1
seed_rollouts = 1
[experiment]
episodes = 4
seeds = 1
"#,
    );
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    verb("train", &cfg, 2, &a, &[]);
    verb("train", &cfg, 2, &b, &[]);
    assert_eq!(snapshot(&a), snapshot(&b));
    let curve = std::fs::read_to_string(a.join("curve_s2.csv")).unwrap();
    assert!(curve.starts_with("episode,env_steps,coverage,success,actor_loss,critic_loss,alpha_ent\n"));
    assert_eq!(curve.lines().count(), 5);
    let ckpt = a.join("sparta_l_spread_s2.oscl");
    assert!(std::fs::read(&ckpt).unwrap().starts_with(b"OSCL"));

    // the trained checkpoint drives `run`
    let run_cfg = write_config(
        tmp.path(),
        "r.toml",
        &format!(
            "[policy]\nkind = \"sparta_l\"\ncheckpoint = {:?}\n[learn]\npool = 4\nhidden = [8, 8]\n[task]\nobjects = [\"rectangle\"]\n[experiment]\nseeds = 1\neval_rollouts = 1\n",
            ckpt.to_str().unwrap()
        ),
    );
    verb("run", &run_cfg, 0, &tmp.path().join("r"), &[]);
}

#[test]
fn errors_exit_nonzero_with_diagnostics() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("o");
    let out = out.to_str().unwrap();
    let missing = osc(&["run", "--config", "/nonexistent/cfg.toml", "--out", out]);
    assert!(!missing.status.success());
    assert!(String::from_utf8_lossy(&missing.stderr).contains("error:"));

    let typo = write_config(tmp.path(), "typo.toml", "[task]\nknid = \"mash\"\n");
    let o = osc(&["run", "--config", typo.to_str().unwrap(), "--out", out]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("knid"));

    let not_trainable = write_config(tmp.path(), "g.toml", "[policy]\nkind = \"sparta_g\"\n");
    assert!(!osc(&["train", "--config", not_trainable.to_str().unwrap(), "--out", out]).status.success());

    let no_ckpt = write_config(tmp.path(), "l.toml", "[policy]\nkind = \"sparta_l\"\n");
    assert!(!osc(&["run", "--config", no_ckpt.to_str().unwrap(), "--out", out]).status.success());

    assert!(!osc(&["bogus-verb"]).status.success());
}
