mod common;

use std::io::{Read, Write};
use std::net::{TcpListener, TcpStream};
use std::path::Path;
use std::time::{Duration, Instant};

use common::{cli, cli_in, examples_dir};

const SECOND_HAND: &str = "second_hand_platform.mag";

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn check_valid_example() {
    let out = cli_in(&examples_dir(), &["check", SECOND_HAND]);
    assert_eq!(out.code, 0, "{}", out.stderr);
    assert!(out.stdout.contains("0 error(s)"));
}

#[test]
fn check_duplicate_id_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(
        dir.path(),
        "dup.mag",
        "model \"d\" { time 0 .. 1 dt 1 }\nconst a = 1\nconst a = 2\n",
    );
    let out = cli(&["check", &p]);
    assert_eq!(out.code, 1);
    assert!(out.stdout.contains("E-DUP-ID"), "{}", out.stdout);

    let json = cli(&["check", &p, "--format", "json"]);
    assert_eq!(json.code, 1);
    let v: serde_json::Value = serde_json::from_str(&json.stdout).unwrap();
    assert!(v["diagnostics"]
        .as_array()
        .unwrap()
        .iter()
        .any(|d| d["code"] == "E-DUP-ID"));
}

#[test]
fn check_missing_file_exits_2() {
    let out = cli(&["check", "/nonexistent/model.mag"]);
    assert_eq!(out.code, 2);
}

#[test]
fn check_missing_data_file_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(
        dir.path(),
        "m.mag",
        "model \"m\" { time 0 .. 1 dt 1 }\ndata u from \"nope.csv\" column \"u\"\n",
    );
    let out = cli(&["check", &p]);
    assert_eq!(out.code, 2, "{}{}", out.stdout, out.stderr);
}

#[test]
fn run_writes_steps_plus_one_rows_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().to_str().unwrap();
    let out = cli_in(&examples_dir(), &["run", SECOND_HAND, "--out", out_dir]);
    assert_eq!(out.code, 0, "{}", out.stderr);
    assert!(out.stdout.contains("total_co2 = "));
    let file = dir.path().join("second_hand_platform__baseline.csv");
    let first = std::fs::read_to_string(&file).unwrap();
    assert_eq!(first.lines().count(), 1 + 61);
    assert!(first.starts_with("t,active_users,"));

    let again = cli_in(&examples_dir(), &["run", SECOND_HAND, "--out", out_dir]);
    assert_eq!(again.code, 0);
    assert_eq!(std::fs::read_to_string(&file).unwrap(), first);
}

#[test]
fn run_named_scenario_with_selection_as_json() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().to_str().unwrap();
    let out = cli_in(
        &examples_dir(),
        &[
            "run",
            SECOND_HAND,
            "--scenario",
            "local_filtering",
            "--format",
            "json",
            "--select",
            "transport_emissions,items_sold",
            "--out",
            out_dir,
        ],
    );
    assert_eq!(out.code, 0, "{}", out.stderr);
    let text = std::fs::read_to_string(
        dir.path()
            .join("second_hand_platform__local_filtering.json"),
    )
    .unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    let series = v["series"].as_object().unwrap();
    assert_eq!(
        series.keys().collect::<Vec<_>>(),
        ["items_sold", "transport_emissions"]
    );
    assert_eq!(series["items_sold"].as_array().unwrap().len(), 61);
    assert_ne!(v["model_fingerprint"], v["scenario_fingerprint"]);
}

#[test]
fn run_scenario_file() {
    let dir = tempfile::tempdir().unwrap();
    let sc = write(
        dir.path(),
        "s.json",
        r#"{"name": "half", "overrides": {"k": 0.25}}"#,
    );
    let m = write(dir.path(), "m.mag", "model \"m\" { time 0 .. 2 dt 1 }\nconst k = 0.5\nstock s init 8 outflow d\naux d = k * s\n");
    let out = cli(&[
        "run",
        &m,
        "--scenario-file",
        &sc,
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.code, 0, "{}", out.stderr);
    let csv = std::fs::read_to_string(dir.path().join("m__half.csv")).unwrap();
    assert_eq!(csv, "t,d,k,s\n0,2,0.25,8\n1,1.5,0.25,6\n2,1.125,0.25,4.5\n");
}

#[test]
fn run_unknown_scenario_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let out = cli_in(
        &examples_dir(),
        &[
            "run",
            SECOND_HAND,
            "--scenario",
            "nope",
            "--out",
            dir.path().to_str().unwrap(),
        ],
    );
    assert_eq!(out.code, 1);
    assert!(out.stderr.contains("E-NO-SCENARIO"), "{}", out.stderr);
}

#[test]
fn run_engine_error_names_time_and_variable() {
    let dir = tempfile::tempdir().unwrap();
    let m = write(
        dir.path(),
        "m.mag",
        "model \"m\" { time 0 .. 5 dt 1 }\naux x = 1 / (time() - 3)\n",
    );
    let out = cli(&["run", &m, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.code, 1);
    assert!(
        out.stderr.contains("E-DIV-ZERO")
            && out.stderr.contains("`x`")
            && out.stderr.contains("t = 3"),
        "{}",
        out.stderr
    );
}

#[test]
fn loops_two_variable_reinforcing() {
    let dir = tempfile::tempdir().unwrap();
    let m = write(
        dir.path(),
        "m.mag",
        "model \"m\" { time 0 .. 1 dt 1 }\naux a = b\naux b = delay_fixed(a, 1, 0)\nlink a -> b polarity -\nlink b -> a polarity - delayed\n",
    );
    let out = cli(&["loops", &m, "--format", "json"]);
    assert_eq!(out.code, 0, "{}", out.stderr);
    let v: serde_json::Value = serde_json::from_str(&out.stdout).unwrap();
    assert_eq!(v["loops"].as_array().unwrap().len(), 1);
    assert_eq!(v["loops"][0]["classification"], "reinforcing");

    let dot = cli(&["loops", &m, "--format", "dot"]);
    assert!(dot.stdout.starts_with("digraph"));
    assert!(dot.stdout.contains("style=dashed"));
}

#[test]
fn loops_tree_has_none() {
    let dir = tempfile::tempdir().unwrap();
    let m = write(
        dir.path(),
        "m.mag",
        "model \"m\" { time 0 .. 1 dt 1 }\naux a\naux b\naux c\nlink a -> b\nlink a -> c\n",
    );
    let out = cli(&["loops", &m, "--format", "json"]);
    assert_eq!(out.code, 0, "{}", out.stderr);
    let v: serde_json::Value = serde_json::from_str(&out.stdout).unwrap();
    assert!(v["loops"].as_array().unwrap().is_empty());
}

#[test]
fn loops_cap_truncates_with_warning() {
    let dir = tempfile::tempdir().unwrap();
    let mut text = String::from("model \"m\" { time 0 .. 1 dt 1 }\naux a\naux b\naux c\n");
    for (x, y) in [
        ("a", "b"),
        ("b", "a"),
        ("b", "c"),
        ("c", "b"),
        ("a", "c"),
        ("c", "a"),
    ] {
        text.push_str(&format!("link {x} -> {y}\n"));
    }
    let m = write(dir.path(), "m.mag", &text);
    let out = cli(&["loops", &m, "--max-count", "1", "--format", "json"]);
    assert_eq!(out.code, 0);
    let v: serde_json::Value = serde_json::from_str(&out.stdout).unwrap();
    assert_eq!(v["loops"].as_array().unwrap().len(), 1);
    assert_eq!(v["truncated"], true);
    assert!(out.stderr.contains("W-LOOP-TRUNCATED"), "{}", out.stderr);
}

#[test]
fn compare_baseline_against_itself_is_zero() {
    let out = cli_in(
        &examples_dir(),
        &[
            "compare",
            SECOND_HAND,
            "--scenario",
            "baseline",
            "--format",
            "json",
        ],
    );
    assert_eq!(out.code, 0, "{}", out.stderr);
    let v: serde_json::Value = serde_json::from_str(&out.stdout).unwrap();
    for row in v["rows"].as_array().unwrap() {
        assert_eq!(row["delta_abs"], 0.0);
        assert_eq!(row["delta_rel"], 0.0);
    }
}

#[test]
fn compare_local_filtering_lowers_transport() {
    let out = cli_in(
        &examples_dir(),
        &[
            "compare",
            SECOND_HAND,
            "--scenario",
            "baseline,local_filtering",
            "--format",
            "json",
        ],
    );
    assert_eq!(out.code, 0, "{}", out.stderr);
    let v: serde_json::Value = serde_json::from_str(&out.stdout).unwrap();
    let row = v["rows"]
        .as_array()
        .unwrap()
        .iter()
        .find(|r| r["scenario"] == "local_filtering" && r["indicator"] == "transport_co2")
        .unwrap();
    assert!(row["delta_rel"].as_f64().unwrap() < 0.0);

    let text = cli_in(&examples_dir(), &["compare", SECOND_HAND]);
    assert_eq!(text.code, 0);
    assert!(text.stdout.starts_with("indicator"));
    assert!(text.stdout.contains("repair_services"));
}

#[test]
fn compare_indicator_file_and_errors() {
    let dir = tempfile::tempdir().unwrap();
    let ind = write(
        dir.path(),
        "ind.json",
        r#"[{"name": "peak_items", "target": "items_sold", "kind": "peak"}]"#,
    );
    let out = cli_in(
        &examples_dir(),
        &[
            "compare",
            SECOND_HAND,
            "--indicators",
            &ind,
            "--format",
            "json",
        ],
    );
    assert_eq!(out.code, 0, "{}", out.stderr);
    let v: serde_json::Value = serde_json::from_str(&out.stdout).unwrap();
    assert!(v["rows"]
        .as_array()
        .unwrap()
        .iter()
        .all(|r| r["indicator"] == "peak_items"));

    let missing = cli_in(
        &examples_dir(),
        &[
            "compare",
            SECOND_HAND,
            "--indicators",
            "/nonexistent/ind.json",
        ],
    );
    assert_eq!(missing.code, 2);

    let no_base = cli_in(
        &examples_dir(),
        &["compare", SECOND_HAND, "--scenario", "local_filtering"],
    );
    assert_eq!(no_base.code, 1);
    assert!(
        no_base.stderr.contains("E-NO-BASELINE"),
        "{}",
        no_base.stderr
    );
}

#[test]
fn fmt_check_and_write() {
    let shipped = cli_in(&examples_dir(), &["fmt", "--check", SECOND_HAND]);
    assert_eq!(shipped.code, 0, "{}", shipped.stderr);

    let dir = tempfile::tempdir().unwrap();
    let m = write(
        dir.path(),
        "m.mag",
        "model \"m\" {time 0 .. 1 dt 1}\naux b = a+1\nconst a = 2\n",
    );
    assert_eq!(cli(&["fmt", "--check", &m]).code, 1);
    let printed = cli(&["fmt", &m]);
    assert_eq!(
        printed.stdout,
        "model \"m\" { time 0 .. 1 dt 1 }\n\nconst a = 2\naux b = a + 1\n"
    );
    assert_eq!(cli(&["fmt", "--write", &m]).code, 0);
    assert_eq!(cli(&["fmt", "--check", &m]).code, 0);
}

#[test]
fn import_tree_prints_a_skeleton() {
    let dir = tempfile::tempdir().unwrap();
    let tree = write(
        dir.path(),
        "t.json",
        r#"{"label": "Platform use", "children": [{"label": "Transport", "polarity": "+", "order": "first-order"}]}"#,
    );
    let out = cli(&["import-tree", &tree]);
    assert_eq!(out.code, 0, "{}", out.stderr);
    assert!(
        out.stdout
            .contains("link platform_use -> transport polarity + order first-order"),
        "{}",
        out.stdout
    );
    let check = write(dir.path(), "skeleton.mag", &out.stdout);
    let r = cli(&["check", &check]);
    assert_eq!(r.code, 1);
    assert!(r.stdout.contains("E-INCOMPLETE"));
}

fn free_port() -> u16 {
    TcpListener::bind("127.0.0.1:0")
        .unwrap()
        .local_addr()
        .unwrap()
        .port()
}

#[test]
fn serve_answers_over_tcp() {
    let port = free_port();
    let mut child = std::process::Command::new(env!("CARGO_BIN_EXE_magnitude"))
        .args(["serve", "--cors-origin", "http://localhost:5173"])
        .env("MAGNITUDE_PORT", port.to_string())
        .env("RUST_LOG", "off")
        .spawn()
        .unwrap();
    let deadline = Instant::now() + Duration::from_secs(10);
    let mut stream = loop {
        match TcpStream::connect(("127.0.0.1", port)) {
            Ok(s) => break s,
            Err(_) if Instant::now() < deadline => std::thread::sleep(Duration::from_millis(50)),
            Err(e) => {
                child.kill().unwrap();
                panic!("server did not start: {e}");
            }
        }
    };
    write!(stream, "GET /api/examples HTTP/1.1\r\nHost: localhost\r\nOrigin: http://localhost:5173\r\nConnection: close\r\n\r\n").unwrap();
    let mut response = String::new();
    stream.read_to_string(&mut response).unwrap();
    child.kill().unwrap();
    child.wait().unwrap();
    assert!(response.starts_with("HTTP/1.1 200"), "{response}");
    assert!(response.contains("access-control-allow-origin: http://localhost:5173"));
    assert!(response.contains("second_hand_platform"));
}
