use std::fmt::Write as _;

use vauth_sim::{run_scenario, ScenarioConfig};

/// Human-readable account of one scenario: every frame, every party's end
/// state and the verdict.
pub fn narrate(cfg: &ScenarioConfig, verbose: bool) -> String {
    let mut out = String::new();
    let r = match run_scenario(cfg) {
        Ok(r) => r,
        Err(e) => return format!("scenario {} could not run: {e}\n", cfg.id),
    };
    let _ = writeln!(
        out,
        "scenario {}: mode={} strategy={} seed={} suite={}",
        r.scenario, r.mode, r.strategy, r.seed, r.suite
    );

    out.push_str("\nframes\n");
    for rec in &r.transcript.records {
        let note = if rec.intercepted { "  (intercepted)" } else { "" };
        let _ = writeln!(
            out,
            "  t{:<3} {:>3} -> {:<4} {:<12} {:>5} octets{note}",
            rec.tick,
            rec.from,
            rec.to,
            rec.tag,
            rec.frame.len()
        );
        if verbose {
            match rec.decode() {
                Some(frame) => {
                    let _ = writeln!(out, "        {:?}", frame.message);
                }
                None => out.push_str("        (does not decode)\n"),
            }
        }
    }

    out.push_str("\nparties\n");
    for p in &r.parties {
        let who = if p.adversarial { " [adversary]" } else { "" };
        let _ = write!(out, "  {}{who} as {:?}: {:?}", p.name, p.role, p.phase);
        if let Some(kind) = p.abort {
            let _ = write!(out, ", aborted with {kind}");
            if let Some(detail) = &p.abort_detail {
                let _ = write!(out, " ({detail})");
            }
        }
        if let Some(peer) = &p.peer {
            let _ = write!(out, "; believes peer is {peer}");
        }
        if !p.adversarial {
            let _ = write!(out, "; exchanged frames with {}", p.actual_peer);
        }
        out.push('\n');
    }

    out.push_str("\nverdict\n");
    let _ = writeln!(out, "  criterion: {}", r.criterion);
    let _ = writeln!(out, "  adversary success: {}", r.adversary_success);
    let _ = writeln!(
        out,
        "  adversary can derive a session key: {}, a data plaintext: {}",
        r.closure_contains_session_key, r.closure_contains_plaintext
    );
    let _ = writeln!(out, "  protocol frames: {}", r.frame_count);
    if !r.unknown_key_share_free() {
        out.push_str("  an honest party holds a key it attributes to the wrong vehicle\n");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use vauth_core::ProtocolMode;
    use vauth_sim::Strategy;

    #[test]
    fn relay_narration_names_the_abort() {
        let cfg = ScenarioConfig::new(ProtocolMode::Base, Strategy::MitmRelay, 1);
        let text = narrate(&cfg, true);
        assert!(text.contains("aborted with AttributeMismatch"), "{text}");
        assert!(text.contains("[adversary]"));
        assert!(text.contains("criterion: both_sides_keyed"));
    }
}
