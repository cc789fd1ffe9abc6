//! One line per acceptance criterion; exits non-zero when any fails.

use std::path::Path;
use std::process::{Command, ExitCode};

use vauth_core::session::AbortKind;
use vauth_core::suite::SuiteId;
use vauth_core::ProtocolMode;
use vauth_sim::authenticity::enumerate_checks;
use vauth_sim::forgery::run_forgery;
use vauth_sim::matrix::Cell;
use vauth_sim::{run_honest, run_matrix, run_scenario, ScenarioConfig, ScenarioResult, Strategy};

const KEYED_MODES: [ProtocolMode; 6] = [
    ProtocolMode::Base,
    ProtocolMode::NonceAck,
    ProtocolMode::FsDh,
    ProtocolMode::IsoKe,
    ProtocolMode::Sigma,
    ProtocolMode::Tls,
];

type Verdict = Result<String, String>;
type Check = (&'static str, fn() -> Verdict);

fn scenario(mode: ProtocolMode, strategy: Strategy, seed: u64) -> Result<ScenarioResult, String> {
    run_scenario(&ScenarioConfig::new(mode, strategy, seed)).map_err(|e| format!("{mode} {strategy}: {e}"))
}

fn honest_agreement() -> Verdict {
    let mut failures = Vec::new();
    for mode in KEYED_MODES {
        for seed in 0..500 {
            let h = run_honest(&ScenarioConfig::new(mode, Strategy::Passive, seed)).map_err(|e| e.to_string())?;
            if !h.keys_agree {
                failures.push(format!("{mode}/{seed}"));
            }
        }
    }
    if failures.is_empty() {
        Ok("3000 runs, all keyed with equal keys".into())
    } else {
        Err(format!("{} failures, first {}", failures.len(), failures[0]))
    }
}

fn round_counts() -> Verdict {
    let mut seen = Vec::new();
    for (mode, want) in [(ProtocolMode::Base, 2), (ProtocolMode::IsoKe, 3), (ProtocolMode::Sigma, 3)] {
        let h = run_honest(&ScenarioConfig::new(mode, Strategy::Passive, 1)).map_err(|e| e.to_string())?;
        seen.push(format!("{mode}={}", h.frame_count));
        if h.frame_count != want {
            return Err(format!("{mode}: {} frames, expected {want}", h.frame_count));
        }
    }
    Ok(seen.join(" "))
}

fn mitm_relay() -> Verdict {
    if !scenario(ProtocolMode::PlainPki, Strategy::MitmRelay, 3)?.adversary_success {
        return Err("relay failed against plain_pki".into());
    }
    for mode in KEYED_MODES {
        let r = scenario(mode, Strategy::MitmRelay, 3)?;
        let gate = |k: &AbortKind| matches!(k, AbortKind::AttributeMismatch | AbortKind::FingerprintMismatch);
        let aborts: Vec<AbortKind> = r.honest().filter_map(|p| p.abort).collect();
        if r.adversary_success || aborts.is_empty() || !aborts.iter().all(gate) {
            return Err(format!("{mode}: success={} aborts={:?}", r.adversary_success, r.abort_reasons()));
        }
    }
    Ok("plain_pki broken; 6 gated modes abort at the attribute gate".into())
}

fn repetition_v1() -> Verdict {
    if !scenario(ProtocolMode::Base, Strategy::RepetitionV1, 4)?.adversary_success {
        return Err("replay failed against base".into());
    }
    for mode in [ProtocolMode::NonceAck, ProtocolMode::FsDh] {
        let r = scenario(mode, Strategy::RepetitionV1, 4)?;
        let fooled = r.honest().any(|p| p.actual_peer == "A" && p.established());
        if r.adversary_success || fooled {
            return Err(format!("{mode}: responder established on a replay"));
        }
    }
    Ok("base broken; nonce_ack and fs_dh responders stay unkeyed".into())
}

fn repetition_v2() -> Verdict {
    if !scenario(ProtocolMode::Base, Strategy::RepetitionV2, 5)?.adversary_success {
        return Err("replay failed against base".into());
    }
    let r = scenario(ProtocolMode::NonceAck, Strategy::RepetitionV2, 5)?;
    if r.adversary_success || !r.abort_reasons().contains(&"S:NonceMismatch".to_string()) {
        return Err(format!("nonce_ack: success={} aborts={:?}", r.adversary_success, r.abort_reasons()));
    }
    Ok("base broken; nonce_ack aborts with NonceMismatch".into())
}

fn forward_secrecy() -> Verdict {
    let base = scenario(ProtocolMode::Base, Strategy::CorruptAfter, 6)?;
    let fs = scenario(ProtocolMode::FsDh, Strategy::CorruptAfter, 6)?;
    match (base.closure_contains_session_key, fs.closure_contains_session_key) {
        (true, false) => Ok("base key derivable after corruption, fs_dh key not".into()),
        (b, f) => Err(format!("base derivable={b}, fs_dh derivable={f}")),
    }
}

fn secrecy() -> Verdict {
    for mode in KEYED_MODES {
        for seed in 0..200 {
            let r = scenario(mode, Strategy::Passive, seed)?;
            if r.closure_contains_session_key || r.closure_contains_plaintext {
                return Err(format!("{mode}/{seed}: key={} plaintext={}", r.closure_contains_session_key, r.closure_contains_plaintext));
            }
        }
    }
    Ok("1200 transcripts, no key or plaintext derivable".into())
}

fn authenticity() -> Verdict {
    let mut n = 0;
    for suite in SuiteId::ALL {
        for o in enumerate_checks(suite, 8) {
            n += 1;
            if !o.passed() {
                return Err(format!("{suite} {}: got {:?}, phase {:?}", o.check.name(), o.error, o.victim_phase));
            }
        }
    }
    Ok(format!("{n} single-check failures, each with its named abort"))
}

fn unforgeability() -> Verdict {
    let report = run_forgery(SuiteId::Standard, 1000, 9);
    if report.accepted.is_empty() {
        Ok(format!("{} forgery attempts on 1000 certificates, none accepted", report.total_attempts()))
    } else {
        Err(format!("{} accepted: {:?}", report.accepted.len(), &report.accepted[..report.accepted.len().min(5)]))
    }
}

fn determinism() -> Verdict {
    for mode in ProtocolMode::ALL {
        for strategy in Strategy::ALL {
            let (a, b) = (scenario(mode, strategy, 10)?, scenario(mode, strategy, 10)?);
            if a.transcript.export(true) != b.transcript.export(true) || Cell::from_result(&a) != Cell::from_result(&b) {
                return Err(format!("{mode} {strategy} differs between runs"));
            }
        }
    }
    let base = ScenarioConfig::new(ProtocolMode::Base, Strategy::Passive, 10);
    let first = run_matrix(&ProtocolMode::ALL, &Strategy::ALL, &base).map_err(|e| e.to_string())?;
    let second = run_matrix(&ProtocolMode::ALL, &Strategy::ALL, &base).map_err(|e| e.to_string())?;
    let render = |r| vauth_sim::emit_report(r, vauth_sim::ReportFormat::JsonLines);
    if render(&first) != render(&second) {
        return Err("matrix reports differ".into());
    }
    Ok("35 scenarios and a full matrix repeat bit for bit".into())
}

fn wire_stability() -> Verdict {
    let golden = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/vectors.txt");
    let expected = std::fs::read(&golden).map_err(|e| format!("{}: {e}", golden.display()))?;
    let out = Command::new(env!("CARGO_BIN_EXE_vauth"))
        .arg("vectors")
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!("vectors exited with {}", out.status));
    }
    if out.stdout != expected {
        let line = out
            .stdout
            .split(|&b| b == b'\n')
            .zip(expected.split(|&b| b == b'\n'))
            .position(|(a, b)| a != b)
            .map_or("length".to_string(), |i| format!("line {}", i + 1));
        return Err(format!("output differs from golden file at {line}"));
    }
    Ok(format!("{} octets match", expected.len()))
}

fn main() -> ExitCode {
    let criteria: [Check; 11] = [
        ("honest agreement", honest_agreement),
        ("round counts", round_counts),
        ("mitm relay", mitm_relay),
        ("repetition v1", repetition_v1),
        ("repetition v2", repetition_v2),
        ("forward secrecy", forward_secrecy),
        ("secrecy", secrecy),
        ("authenticity", authenticity),
        ("certificate unforgeability", unforgeability),
        ("determinism", determinism),
        ("wire-format stability", wire_stability),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = std::time::Instant::now();
        let verdict = check();
        let secs = start.elapsed().as_secs_f64();
        match verdict {
            Ok(msg) => println!("PASS {:>2} {name}: {msg} ({secs:.1}s)", i + 1),
            Err(msg) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {msg} ({secs:.1}s)", i + 1);
            }
        }
    }
    println!("{} of {} criteria pass", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
