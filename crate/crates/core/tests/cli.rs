use std::path::Path;
use std::process::{Command, Output};

fn leasc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_leasc"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn coverage_prints_the_probability() {
    let out = leasc(&["coverage", "--sizes", "50,50", "--n", "7"]);
    assert!(out.status.success());
    assert_eq!(stdout(&out).trim(), "0.9875");
    let out = leasc(&["coverage", "--sizes", "50,50", "--target", "0.98"]);
    assert_eq!(stdout(&out).trim(), "7");
}

#[test]
fn usage_errors_exit_with_one() {
    assert_eq!(leasc(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(leasc(&["pipeline", "--no-such-flag", "1"]).status.code(), Some(1));
    assert_eq!(leasc(&["coverage", "--sizes", "3,3", "--n", "9"]).status.code(), Some(1));
    assert_eq!(leasc(&["--help"]).status.code(), Some(0));
}

#[test]
fn unknown_config_key_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.conf");
    std::fs::write(&cfg, "reps = 10\ncolour = blue\n").unwrap();
    let out = leasc(&["pipeline", "--config", s(&cfg)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("colour"));
}

#[test]
fn missing_files_exit_with_two() {
    assert_eq!(leasc(&["eval", "/no/such/a", "/no/such/b"]).status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.lscm");
    std::fs::write(&bad, b"LSCM\x01\0\0\0").unwrap();
    let out = leasc(&["encode", "--encoder", s(&bad), "--data", s(&bad), "--output", s(&bad)]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn self_evaluation_is_perfect() {
    let dir = tempfile::tempdir().unwrap();
    let labels = dir.path().join("a.labels");
    std::fs::write(&labels, "0\n0\n1\n2\n2\n").unwrap();
    let out = leasc(&["eval", s(&labels), s(&labels)]);
    assert!(out.status.success());
    assert_eq!(stdout(&out), "ACC 1.0000\nNMI 1.0000\n");
}

#[test]
fn pipeline_on_generated_replica() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("y.lscm");
    let truth = dir.path().join("y.labels");
    let out_dir = dir.path().join("out");
    assert!(leasc(&["gen", "--data", s(&data), "--labels", s(&truth), "--seed", "3"])
        .status
        .success());

    let cfg = dir.path().join("run.conf");
    std::fs::write(&cfg, "# replica run\nreps = 40\nhidden = 64\n").unwrap();
    let run = |out: &Path| {
        leasc(&[
            "pipeline", "--config", s(&cfg), "--data", s(&data), "--labels", s(&truth),
            "--output", s(out), "--variant", "f2", "--reps", "88", "--k", "4",
        ])
    };
    let res = run(&out_dir);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let text = stdout(&res);
    assert!(text.contains("using 88 representatives"), "{text}");

    let labels = std::fs::read_to_string(out_dir.join("labels.txt")).unwrap();
    let mut distinct: Vec<&str> = labels.lines().collect();
    assert_eq!(distinct.len(), 800);
    distinct.sort_unstable();
    distinct.dedup();
    assert_eq!(distinct.len(), 4);

    let timings = std::fs::read_to_string(out_dir.join("timings.csv")).unwrap();
    let phases: Vec<&str> = timings.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(phases, ["select", "fit", "encode", "embed", "kmeans"]);

    let again = dir.path().join("again");
    assert!(run(&again).status.success());
    assert_eq!(
        std::fs::read(out_dir.join("labels.txt")).unwrap(),
        std::fs::read(again.join("labels.txt")).unwrap()
    );
}

#[test]
fn staged_commands_compose() {
    let dir = tempfile::tempdir().unwrap();
    let p = |name: &str| dir.path().join(name);
    assert!(leasc(&["gen", "--data", s(&p("y.csv")), "--labels", s(&p("t")), "--points", "60"])
        .status
        .success());
    let fit = leasc(&[
        "fit", "--select", "--data", s(&p("y.csv")), "--reps", "30", "--hidden", "32",
        "--encoder", s(&p("enc.txt")), "--codes", s(&p("z.lscm")),
    ]);
    assert!(fit.status.success(), "{}", String::from_utf8_lossy(&fit.stderr));
    assert!(stdout(&fit).contains("converged true"));
    assert!(leasc(&[
        "encode", "--encoder", s(&p("enc.txt")), "--data", s(&p("y.csv")), "--output", s(&p("c.lscm")),
    ])
    .status
    .success());
    assert!(leasc(&["cluster", "--codes", s(&p("c.lscm")), "--k", "4", "--output", s(&p("pred"))])
        .status
        .success());
    let eval = leasc(&["eval", s(&p("pred")), s(&p("t"))]);
    let acc: f64 = stdout(&eval).lines().next().unwrap()[4..].parse().unwrap();
    assert!(acc > 0.9, "{acc}");

    let check = leasc(&[
        "check-contraction", "--data", s(&p("y.csv")), "--encoder", s(&p("enc.txt")),
        "--reps", "30", "--output", s(&p("pairs.csv")),
    ]);
    assert!(check.status.success());
    let pairs = std::fs::read_to_string(p("pairs.csv")).unwrap();
    assert_eq!(pairs.lines().count(), 241);
    assert!(pairs.starts_with("pair,point,representative,lhs,bound,slack"));
}
