//! Figure-reproduction presets.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{parse_config, RunConfig};
use super::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunMode {
    Simulate,
    Scan,
    Spectrum,
}

#[derive(Debug, Clone, Copy)]
enum Source {
    Text(&'static str),
    Generated(fn() -> String),
}

#[derive(Debug, Clone, Copy)]
pub struct Preset {
    pub name: &'static str,
    pub mode: RunMode,
    source: Source,
}

impl Preset {
    pub fn config_text(&self) -> String {
        match self.source {
            Source::Text(t) => t.to_string(),
            Source::Generated(f) => f(),
        }
    }

    pub fn config(&self) -> Result<RunConfig, CliError> {
        parse_config(&self.config_text())
    }
}

macro_rules! preset {
    ($name:literal, $mode:ident) => {
        Preset {
            name: $name,
            mode: RunMode::$mode,
            source: Source::Text(include_str!(concat!("../../presets/", $name, ".cfg"))),
        }
    };
}

pub const PRESETS: &[Preset] = &[
    preset!("fig2_solid", Scan),
    preset!("fig2_dotted", Scan),
    preset!("fig2_dashed", Scan),
    preset!("fig2_dashdot", Scan),
    preset!("fig3_upper", Simulate),
    preset!("fig3_lower", Simulate),
    preset!("fig5_left", Spectrum),
    preset!("fig5_right", Spectrum),
    preset!("fig6_solid", Scan),
    preset!("fig6_dashed", Scan),
    preset!("fig7", Scan),
    Preset { name: "fig8", mode: RunMode::Scan, source: Source::Generated(fig8_config) },
    preset!("fig9_left", Spectrum),
    preset!("fig9_right", Spectrum),
    preset!("fig10_solid", Scan),
    preset!("fig10_dashed", Scan),
    preset!("fig11_dotted", Scan),
    preset!("fig11_dashed", Scan),
    preset!("fig11_solid", Scan),
];

pub fn find(name: &str) -> Option<&'static Preset> {
    PRESETS.iter().find(|p| p.name == name)
}

pub const FIG8_SEED: u64 = 8;

/// Couplings for five equidistant states: `α_1 = β_1 = 1`, the rest drawn
/// from U(0.2, 2) and rounded to four decimals.
pub fn fig8_couplings(seed: u64) -> (Vec<f64>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = || (rng.random_range(0.2..2.0f64) * 1e4).round() / 1e4;
    let mut alphas = vec![1.0];
    let mut betas = vec![1.0];
    for _ in 1..5 {
        alphas.push(draw());
        betas.push(draw());
    }
    (alphas, betas)
}

fn fig8_config() -> String {
    let (a, b) = fig8_couplings(FIG8_SEED);
    let join = |v: &[f64]| v.iter().map(|x| format!("{x}")).collect::<Vec<_>>().join(", ");
    format!(
        "# Five equidistant states with seeded random couplings (seed {FIG8_SEED}).\n\
         [system]\nalphas = {}\nbetas = {}\ndetunings = 0, 1, 2, 3, 4\n\n\
         [pulses]\nwidth = 20, 80\n\n\
         [scan]\naxis = common_detuning\nstart = -6\nstop = 2\npoints = 161\n",
        join(&a),
        join(&b)
    )
}
