use std::io::Write as _;

use vauth_core::attributes::Color;
use vauth_core::suite::SuiteId;
use vauth_core::ProtocolMode;
use vauth_sim::matrix::{parse_json_lines, run_matrix_sequential, Expectations};
use vauth_sim::vectors;
use vauth_sim::{
    emit_report, load_config, parse_config, run_honest, run_matrix, run_scenario, ConfigError, Overrides,
    ReportFormat, ScenarioConfig, Strategy,
};

const FULL: &str = "\
# two named vehicles and a noisy camera
[scenario]
id = relay-demo
mode = sigma
strategy = mitm_relay
seed = 77
data_frames = 3

[flags]
responder_sends_first = true

[noise]
color = 0.0

[vehicle]
id = truck
license_number = AB123X
color = red

[vehicle]
id = van
";

#[test]
fn full_file_round_trips_into_a_run() {
    let mut f = tempfile();
    f.1.write_all(FULL.as_bytes()).unwrap();
    let cfg = load_config(&f.0, &Overrides::default()).unwrap();
    assert_eq!(cfg.id, "relay-demo");
    assert_eq!((cfg.mode, cfg.strategy, cfg.seed, cfg.data_frames), (ProtocolMode::Sigma, Strategy::MitmRelay, 77, 3));
    assert!(cfg.flags.responder_sends_first);
    assert_eq!(cfg.vehicles[0].color, Some(Color::Red));
    let r = run_scenario(&cfg).unwrap();
    assert!(r.party("truck").is_some() && r.party("van").is_some());
    assert!(!r.adversary_success);
    std::fs::remove_file(&f.0).unwrap();
}

fn tempfile() -> (std::path::PathBuf, std::fs::File) {
    let path = std::env::temp_dir().join(format!("vauth-cfg-{}.toml", std::process::id()));
    let file = std::fs::File::create(&path).unwrap();
    (path, file)
}

#[test]
fn missing_file_is_an_io_error() {
    let err = load_config(std::path::Path::new("/nonexistent/vauth.cfg"), &Overrides::default()).unwrap_err();
    assert!(matches!(err, ConfigError::Io { .. }), "{err}");
}

#[test]
fn duplicate_vehicle_id_names_the_field() {
    let text = "[scenario]\nmode = base\nstrategy = passive\nseed = 1\n[vehicle]\nid = x\n[vehicle]\nid = x\n";
    let ConfigError::Validation(v) = parse_config(text, &Overrides::default()).unwrap_err() else {
        panic!()
    };
    assert_eq!(v.field, "vehicles[1].id");
}

#[test]
fn unknown_mode_lists_the_valid_ones() {
    let text = "[scenario]\nmode = dh2\nstrategy = passive\nseed = 1\n";
    let err = parse_config(text, &Overrides::default()).unwrap_err().to_string();
    for mode in ProtocolMode::ALL {
        assert!(err.contains(mode.as_str()), "{err}");
    }
}

#[test]
fn command_line_seed_wins() {
    let text = "[scenario]\nmode = base\nstrategy = passive\nseed = 1\n";
    let cfg = parse_config(text, &Overrides { seed: Some(5), ..Overrides::default() }).unwrap();
    assert_eq!(cfg.seed, 5);
}

#[test]
fn round_counts() {
    for (mode, frames) in [
        (ProtocolMode::Base, 2),
        (ProtocolMode::NonceAck, 2),
        (ProtocolMode::FsDh, 2),
        (ProtocolMode::IsoKe, 3),
        (ProtocolMode::Sigma, 3),
    ] {
        let h = run_honest(&ScenarioConfig::new(mode, Strategy::Passive, 9)).unwrap();
        assert!(h.keys_agree, "{mode}");
        assert_eq!(h.frame_count, frames, "{mode}");
    }
}

fn small_base() -> ScenarioConfig {
    ScenarioConfig::new(ProtocolMode::Base, Strategy::Passive, 42)
}

#[test]
fn jsonl_report_round_trips() {
    let report = run_matrix(&[ProtocolMode::Base, ProtocolMode::FsDh], &Strategy::ALL, &small_base()).unwrap();
    let text = emit_report(&report, ReportFormat::JsonLines);
    assert_eq!(text.lines().count(), 10);
    assert_eq!(parse_json_lines(&text).unwrap(), report);
}

#[test]
fn parallel_and_sequential_agree_byte_for_byte() {
    let modes = [ProtocolMode::PlainPki, ProtocolMode::Base, ProtocolMode::NonceAck];
    let a = run_matrix(&modes, &Strategy::ALL, &small_base()).unwrap();
    let b = run_matrix_sequential(&modes, &Strategy::ALL, &small_base()).unwrap();
    for format in [ReportFormat::TextTable, ReportFormat::JsonLines] {
        assert_eq!(emit_report(&a, format), emit_report(&b, format));
    }
}

#[test]
fn text_table_has_header_and_one_row_per_cell() {
    let modes = [ProtocolMode::PlainPki, ProtocolMode::Base, ProtocolMode::NonceAck, ProtocolMode::FsDh];
    let strategies = [Strategy::Passive, Strategy::MitmRelay, Strategy::RepetitionV1, Strategy::RepetitionV2];
    let report = run_matrix(&modes, &strategies, &small_base()).unwrap();
    let table = emit_report(&report, ReportFormat::TextTable);
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines.len(), 17);
    assert!(lines[0].starts_with("mode") && lines[0].ends_with("aborts"));
    let row = lines.iter().find(|l| l.starts_with("plain_pki") && l.contains("mitm_relay")).unwrap();
    assert!(row.contains("true"));
}

#[test]
fn expectations_match_the_claimed_outcomes() {
    let claims = "\
plain_pki mitm_relay true
base mitm_relay false
base repetition_v1 true
nonce_ack repetition_v1 false
fs_dh repetition_v1 false
base repetition_v2 true
nonce_ack repetition_v2 false
base corrupt_after true
fs_dh corrupt_after false
";
    let e = Expectations::parse(claims).unwrap();
    let report = run_matrix(&e.modes(), &e.strategies(), &small_base()).unwrap();
    assert_eq!(e.diff(&report), Vec::<String>::new());

    let wrong = Expectations::parse("fs_dh corrupt_after true\n").unwrap();
    let diff = wrong.diff(&report);
    assert_eq!(diff.len(), 1);
    assert!(diff[0].starts_with("fs_dh corrupt_after"));
}

#[test]
fn vectors_are_stable_and_suite_specific() {
    let toy = vectors::generate(SuiteId::Toy).unwrap();
    assert_eq!(toy, vectors::generate(SuiteId::Toy).unwrap());
    assert_ne!(toy, vectors::generate(SuiteId::Standard).unwrap());
    assert!(toy.contains("frame.tls."));
}
