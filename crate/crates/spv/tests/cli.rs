use std::path::PathBuf;
use std::process::{Command, Output};

fn spv(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spv")).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("spv-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

#[test]
fn verify_exit_codes() {
    let o = spv(&["verify", "--protocol", "hidden_channel", "--property", "integrity"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    assert!(String::from_utf8_lossy(&o.stdout).contains("holds"));

    let leak = scratch("leak.spv");
    std::fs::write(
        &leak,
        "protocol leak; channels: c, o; vars: x, y, y'; secret: x; received: y;
         cont P { out(o, 'done') }
         agent A { out(c, x) }
         agent B { in(c, y); cont P }
         agent Bt { in(c, y'); assert(y = x); cont P }
         system { par(A, B) } modified { par(A, Bt) }",
    )
    .unwrap();
    let o = spv(&["verify", "--protocol", leak.to_str().unwrap(), "--property", "secrecy"]);
    assert_eq!(code(&o), 1, "{}", String::from_utf8_lossy(&o.stdout));

    let o = spv(&["verify", "--protocol", "wmf", "--property", "integrity", "--budget", "1"]);
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stdout));

    let o = spv(&["verify", "--protocol", "no_such_protocol", "--property", "integrity"]);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error:"));
}

#[test]
fn certificate_round_trip() {
    let cert = scratch("eq1.json");
    let src = concat!(env!("CARGO_MANIFEST_DIR"), "/protocols/eq1.spv");
    let o = spv(&["verify", "--protocol", src, "--property", "integrity", "--witness-out", cert.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let o = spv(&["check-cert", "--protocol", src, "--witness", cert.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));

    let mut v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&cert).unwrap()).unwrap();
    v["relation"].as_array_mut().unwrap().pop();
    std::fs::write(&cert, v.to_string()).unwrap();
    let o = spv(&["check-cert", "--protocol", src, "--witness", cert.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stdout).contains("rejected"));
}

#[test]
fn reports_carry_certificates() {
    let report = scratch("report.json");
    let o =
        spv(&["verify", "--protocol", "enc_message", "--property", "secrecy", "--report", report.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let o = spv(&["check-cert", "--protocol", "enc_message", "--witness", report.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
}

#[test]
fn reduce_prints_passes_and_dot() {
    let dir = scratch("dots");
    let o = spv(&["reduce", "--protocol", "wmf", "--trace", "--emit-dot", dir.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let out = String::from_utf8_lossy(&o.stdout);
    assert!(out.contains("reduced: 10 states, 16 edges"), "{}", out);
    assert!(dir.join("pass0.dot").exists() && dir.join("pass1.dot").exists());

    let dot = scratch("sys.dot");
    let o =
        spv(&["render", "--protocol", "hidden_channel", "--which", "modified", "--emit-dot", dot.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    assert!(std::fs::read_to_string(dot).unwrap().starts_with("digraph"));
}

#[test]
fn bad_arguments_fail() {
    let o = spv(&["verify", "--protocol", "wmf"]);
    assert_ne!(code(&o), 0);
    let repl = scratch("repl.spv");
    std::fs::write(
        &repl,
        "protocol r; channels: c; vars: x;
         agent A { out(c, x); out(c, x) }
         agent R { repl(A, 3) }
         system { R } modified { R }",
    )
    .unwrap();
    let path = repl.to_str().unwrap();
    let o = spv(&["verify", "--protocol", path, "--property", "integrity", "--replication-bound", "8"]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
    let o = spv(&["verify", "--protocol", path, "--property", "integrity", "--replication-bound", "27"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
}
