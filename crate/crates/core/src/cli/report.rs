//! Plain-text analysis report.

use std::fmt::Write;

use crate::analysis::{
    at_window_boundaries, classify, lz_estimate, no_at_windows, AtClassification, AtState, Reason, Regime,
    ZeroEigenvalue,
};
use crate::model::s_sums;

use super::config::{RunConfig, ScanAxis};

fn list(v: &[f64]) -> String {
    let items: Vec<String> = v.iter().map(|x| format!("{x}")).collect();
    format!("[{}]", items.join(", "))
}

/// One-line existence verdict, e.g. `AT exists (S_a2*S_b2 > 0): S_a2=4.667, S_b2=2.167`.
pub fn verdict_line(c: &AtClassification) -> String {
    let head = match c.at_state {
        AtState::ExistsDarkState => "AT exists as a dark state",
        AtState::ExistsGeneral => "AT exists",
        AtState::NotExists => "AT does not exist",
    };
    let mut line = format!("{head} ({})", c.reason.describe());
    if let Some(s) = c.sums {
        let _ = write!(line, ": S_a2={:.3}, S_b2={:.3}", s.s_a2, s.s_b2);
    }
    line
}

pub fn report(cfg: &RunConfig) -> String {
    let sys = &cfg.system;
    let c = classify(sys);
    let mut out = String::new();
    let _ = writeln!(out, "system: N={}", sys.n_intermediate());
    let _ = writeln!(out, "  alphas    = {}", list(sys.alphas()));
    let _ = writeln!(out, "  betas     = {}", list(sys.betas()));
    let _ = writeln!(out, "  detunings = {}", list(sys.detunings()));

    let regime = match c.regime {
        Regime::OffResonant => "off-resonant".to_string(),
        Regime::SingleResonant => format!("single resonance (state {})", sys.resonant_indices()[0] + 1),
        Regime::DegenerateResonant => {
            let idx: Vec<String> = sys.resonant_indices().iter().map(|k| (k + 1).to_string()).collect();
            format!("degenerate resonance (states {})", idx.join(", "))
        }
    };
    let _ = writeln!(out, "regime: {regime}");

    if let Some(s) = c.sums {
        let _ = writeln!(out, "S-sums: S_a2={:.6}, S_b2={:.6}, S_ab={:.6}", s.s_a2, s.s_b2, s.s_ab);
    } else if let [n] = sys.resonant_indices()[..] {
        if let Ok(s) = s_sums(sys, Some(n)) {
            let _ = writeln!(
                out,
                "S-sums without state {}: S_a2={:.6}, S_b2={:.6}, S_ab={:.6}",
                n + 1,
                s.s_a2,
                s.s_b2,
                s.s_ab
            );
        }
    }

    let zero = match c.zero_eigenvalue {
        ZeroEigenvalue::None => "none",
        ZeroEigenvalue::Simple => "simple",
        ZeroEigenvalue::Double => "double",
        ZeroEigenvalue::Structural => "structural (three or more resonant states)",
    };
    let _ = writeln!(out, "zero eigenvalue: {zero}");
    let _ = writeln!(out, "{}", verdict_line(&c));
    let _ = writeln!(out, "verdict code: {} / {}", c.at_state.code(), c.reason.code());
    if c.reason == Reason::Marginal {
        let _ = writeln!(out, "warning: verdict is marginal; finite pulse widths decide the outcome");
    }

    if let Some(scan) = cfg.scan.as_ref().filter(|s| s.axis == ScanAxis::CommonDetuning) {
        let (lo, hi) = (scan.start.min(scan.stop), scan.start.max(scan.stop));
        let bounds = at_window_boundaries(sys, lo, hi);
        let _ = writeln!(out, "window boundaries in [{lo}, {hi}]: {}", list(&bounds));
        let windows = no_at_windows(sys, lo, hi);
        if windows.is_empty() {
            let _ = writeln!(out, "no-AT windows: none");
        } else {
            for (a, b) in windows {
                let _ = writeln!(out, "no-AT window: {a:.6} <= shift <= {b:.6}");
            }
        }
    }

    for &w in &cfg.widths {
        let Ok(pulses) = cfg.pulses(w) else { continue };
        match lz_estimate(sys, &pulses) {
            Ok(lz) => {
                let _ = writeln!(
                    out,
                    "LZ (T={w}): t_c={:.4} ({:.4} T), xi={:.6}, P_f estimate={:.6}",
                    lz.t_c,
                    lz.t_c / w,
                    lz.xi,
                    lz.pf_estimate
                );
            }
            Err(e) => {
                let _ = writeln!(out, "LZ (T={w}): not applicable ({e})");
            }
        }
    }
    out
}
