//! CLI acceptance: every command is deterministic for fixed seeds (byte
//! identical stdout and output files across runs), and exit codes follow the
//! documented mapping.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_dvcsched")
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    Command::new(bin())
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = run_in(dir, args);
    assert!(
        out.status.success(),
        "command {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

struct RunProducts {
    stdout_by_command: Vec<(String, Vec<u8>)>,
    files: Vec<(PathBuf, Vec<u8>)>,
}

/// Runs the full command matrix in `dir` and collects machine outputs.
fn full_pipeline(dir: &Path) -> RunProducts {
    let mut stdout_by_command = Vec::new();
    let mut record = |name: &str, out: Output| {
        stdout_by_command.push((name.to_owned(), out.stdout));
    };

    record(
        "synth instance",
        ok(
            dir,
            &[
                "synth", "instance", "--seed", "42", "--n-id", "5", "--n-flash", "1", "--n-conf",
                "3", "--n-calcom", "2", "--n-stations", "8", "--ct", "25", "--out", "inst",
            ],
        ),
    );
    record(
        "synth corpus",
        ok(dir, &["synth", "corpus", "--seed", "7", "--out", "corp"]),
    );
    record(
        "schedule",
        ok(
            dir,
            &[
                "schedule", "--instance", "inst", "--alpha", "1000000", "--beta", "1", "--out",
                "sched.json",
            ],
        ),
    );
    record(
        "baseline",
        ok(dir, &["baseline", "--instance", "inst", "--out", "base.json"]),
    );
    record(
        "oracle",
        ok(dir, &["oracle", "--instance", "inst", "--out", "oracle.json"]),
    );
    record(
        "graph dot",
        ok(
            dir,
            &[
                "graph",
                "--schedule",
                "sched.json",
                "--instance",
                "inst",
                "--format",
                "dot",
                "--out",
                "graph.dot",
            ],
        ),
    );
    record(
        "graph json",
        ok(
            dir,
            &[
                "graph",
                "--schedule",
                "sched.json",
                "--instance",
                "inst",
                "--format",
                "json",
                "--out",
                "graph.json",
            ],
        ),
    );
    record(
        "train",
        ok(
            dir,
            &["train", "--corpus", "corp/corpus.csv", "--out", "model.json"],
        ),
    );
    record(
        "extract fuzzy",
        ok(
            dir,
            &[
                "extract",
                "--method",
                "fuzzy",
                "--graph",
                "inst/assembly_graph.csv",
                "--topology",
                "inst/topology.csv",
                "--out",
                "extract_fuzzy.json",
            ],
        ),
    );
    record(
        "extract nb",
        ok(
            dir,
            &[
                "extract",
                "--method",
                "nb",
                "--graph",
                "inst/assembly_graph.csv",
                "--topology",
                "inst/topology.csv",
                "--model",
                "model.json",
                "--out",
                "extract_nb.json",
            ],
        ),
    );
    for method in ["nb", "fuzzy", "regex"] {
        record(
            &format!("eval {method}"),
            ok(dir, &["eval", "--method", method, "--corpus", "corp/corpus.csv"]),
        );
    }
    record("compare", ok(dir, &["compare", "--instance", "inst"]));

    let mut files = Vec::new();
    let tracked = [
        "inst/topology.csv",
        "inst/stations.csv",
        "inst/assembly_graph.csv",
        "inst/commissioning.csv",
        "inst/order.csv",
        "inst/manifest.json",
        "corp/corpus.csv",
        "corp/manifest.json",
        "sched.json",
        "base.json",
        "oracle.json",
        "graph.dot",
        "graph.json",
        "model.json",
        "extract_fuzzy.json",
        "extract_nb.json",
    ];
    for name in tracked {
        files.push((
            PathBuf::from(name),
            std::fs::read(dir.join(name)).unwrap_or_else(|_| panic!("{name} written")),
        ));
    }
    RunProducts {
        stdout_by_command,
        files,
    }
}

#[test]
fn criterion_10_every_command_is_byte_deterministic() {
    let first = tempfile::tempdir().unwrap();
    let second = tempfile::tempdir().unwrap();
    let a = full_pipeline(first.path());
    let b = full_pipeline(second.path());

    for ((name, out_a), (_, out_b)) in a.stdout_by_command.iter().zip(&b.stdout_by_command) {
        assert_eq!(out_a, out_b, "stdout of '{name}' differs between runs");
    }
    for ((name, bytes_a), (_, bytes_b)) in a.files.iter().zip(&b.files) {
        assert_eq!(
            bytes_a,
            bytes_b,
            "file '{}' differs between runs",
            name.display()
        );
    }
    println!(
        "ACCEPT 10: PASS {} commands and {} output files byte-identical across runs",
        a.stdout_by_command.len(),
        a.files.len()
    );
}

#[test]
fn exit_codes_follow_the_mapping() {
    let dir = tempfile::tempdir().unwrap();
    let dir = dir.path();

    // Usage error: unknown flag.
    let out = run_in(dir, &["schedule", "--nope"]);
    assert_eq!(out.status.code(), Some(1));

    // Data error: instance directory without topology.csv.
    std::fs::create_dir_all(dir.join("empty")).unwrap();
    let out = run_in(dir, &["schedule", "--instance", "empty", "--out", "s.json"]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));

    // Data error: corrupt CSV.
    std::fs::create_dir_all(dir.join("bad")).unwrap();
    std::fs::write(dir.join("bad/topology.csv"), "not,a,topology\n1,2,3\n").unwrap();
    for f in ["stations.csv", "assembly_graph.csv", "commissioning.csv", "order.csv"] {
        std::fs::write(dir.join("bad").join(f), "x\n").unwrap();
    }
    let out = run_in(dir, &["schedule", "--instance", "bad", "--out", "s.json"]);
    assert_eq!(out.status.code(), Some(2));

    // Infeasible: a task demands the VPE signal but no station provides it.
    ok(
        dir,
        &[
            "synth", "instance", "--seed", "1", "--n-id", "5", "--n-flash", "1", "--n-conf", "3",
            "--n-calcom", "2", "--n-stations", "8", "--ct", "25", "--out", "vpe",
        ],
    );
    let stations = std::fs::read_to_string(dir.join("vpe/stations.csv")).unwrap();
    std::fs::write(dir.join("vpe/stations.csv"), stations.replace("v;p;vpe", "v;p")).unwrap();
    let commissioning = std::fs::read_to_string(dir.join("vpe/commissioning.csv")).unwrap();
    let mut lines: Vec<String> = commissioning.lines().map(str::to_owned).collect();
    let idx = lines
        .iter()
        .position(|l| l.contains("cal_com"))
        .expect("a commissioning row");
    // needs_vpe is the seventh column.
    let mut fields: Vec<&str> = lines[idx].split(',').collect();
    fields[6] = "true";
    lines[idx] = fields.join(",");
    std::fs::write(dir.join("vpe/commissioning.csv"), lines.join("\n") + "\n").unwrap();
    let out = run_in(dir, &["schedule", "--instance", "vpe", "--out", "s.json"]);
    assert_eq!(
        out.status.code(),
        Some(3),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );

    // Success leaves machine output on stdout and diagnostics on stderr.
    ok(
        dir,
        &[
            "synth", "instance", "--seed", "2", "--n-id", "5", "--n-flash", "1", "--n-conf", "3",
            "--n-calcom", "2", "--n-stations", "8", "--ct", "25", "--out", "good",
        ],
    );
    let out = ok(dir, &["schedule", "--instance", "good", "--out", "ok.json"]);
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.starts_with("stations="), "stdout: {stdout}");
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("wall_s="), "stderr: {stderr}");
}

#[test]
fn oracle_rejects_oversized_instances() {
    let dir = tempfile::tempdir().unwrap();
    let dir = dir.path();
    ok(
        dir,
        &["synth", "instance", "--seed", "3", "--out", "big"],
    );
    let out = run_in(dir, &["oracle", "--instance", "big", "--out", "o.json"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("too large"));
}

#[test]
fn eval_regex_collapses_on_misspelled_rows() {
    // All-assembly corpus with every row misspelled: exact matching finds
    // nothing, so its assembly accuracy is zero.
    let dir = tempfile::tempdir().unwrap();
    let dir = dir.path();
    let mut csv = String::from("text,label,station,ecu_name\n");
    for i in 0..20 {
        csv.push_str(&format!(
            "zentralsteuergerat vorne verbaun,ecu_assembly,{},zentralsteuergeraet vorne\n",
            i + 1
        ));
    }
    std::fs::write(dir.join("corpus.csv"), csv).unwrap();
    let out = ok(dir, &["eval", "--method", "regex", "--corpus", "corpus.csv"]);
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(
        stdout.contains("ecu_assembly_accuracy=0.000000"),
        "stdout: {stdout}"
    );
}
