//! Named scenario configs and their runners.
//!
//! A config is a single JSON document: `{"scenario": "<name>", "seed": N,
//! "params": {...}}`. Unknown names and unknown parameter fields are
//! rejected at parse time.

mod mc_runs;
mod oracle_runs;
mod renewal_runs;

use crate::outcome::Outcome;
use serde::Deserialize;
use std::path::Path;

const DEFAULT_SEED: u64 = 42;

#[derive(Deserialize)]
struct RawConfig {
    scenario: String,
    #[serde(default)]
    seed: Option<u64>,
    #[serde(default)]
    params: serde_json::Value,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StpParams {
    pub grid_points: usize,
    pub pushforward_k_max: i32,
    pub mc_samples: usize,
}

impl Default for StpParams {
    fn default() -> Self {
        StpParams { grid_points: 64, pushforward_k_max: 40, mc_samples: 200_000 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QsetParams {
    pub grid_points: usize,
    pub random_seeds: Vec<u64>,
    pub knots: Vec<usize>,
    /// optional target file: a JSON header line, then `y,q` CSV rows
    pub target_file: Option<String>,
}

impl Default for QsetParams {
    fn default() -> Self {
        QsetParams {
            grid_points: 96,
            random_seeds: vec![0xACCE55, 0x5EED],
            knots: vec![24, 48],
            target_file: None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConstantQParams {
    pub p: f64,
    pub grid_points: usize,
}

impl Default for ConstantQParams {
    fn default() -> Self {
        ConstantQParams { p: 0.25, grid_points: 64 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BlackwellParams {
    pub n_hi: i64,
    pub tol: f64,
}

impl Default for BlackwellParams {
    fn default() -> Self {
        BlackwellParams { n_hi: 200, tol: 1e-4 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SrtParams {
    pub alpha: f64,
    pub n_hi: i64,
    pub band_lo: f64,
    pub band_hi: f64,
    pub series_tol: f64,
}

impl Default for SrtParams {
    fn default() -> Self {
        SrtParams { alpha: 0.7, n_hi: 10_000, band_lo: 0.9, band_hi: 1.1, series_tol: 1e-12 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DefectiveParams {
    pub theta: f64,
    /// tail exponent of the tilted masses: p_k ∝ k^{-(1+tail_alpha)}
    pub tail_alpha: f64,
    pub n_hi: i64,
    pub series_tol: f64,
    pub subexp_tol: f64,
}

impl Default for DefectiveParams {
    fn default() -> Self {
        DefectiveParams { theta: 0.5, tail_alpha: 1.5, n_hi: 10_000, series_tol: 1e-13, subexp_tol: 0.02 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct McParams {
    pub samples: usize,
    pub xs: Vec<f64>,
    pub export_samples: bool,
    pub ecdf_rows: usize,
}

impl Default for McParams {
    fn default() -> Self {
        McParams {
            samples: 1_000_000,
            xs: vec![2.0, 3.0, 4.0, 6.0, 8.0],
            export_samples: false,
            ecdf_rows: 512,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IfsParams {
    pub paths: usize,
    pub burn_in: u32,
    pub grid_points: usize,
    pub depth_lo: i64,
    pub depth_hi: i64,
}

impl Default for IfsParams {
    fn default() -> Self {
        IfsParams { paths: 100_000, burn_in: 200, grid_points: 16, depth_lo: 1, depth_hi: 3 }
    }
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct ConditionsParams {}

#[derive(Debug, Clone)]
pub enum Kind {
    StPetersburg(StpParams),
    QsetRoundtrip(QsetParams),
    ConstantQ(ConstantQParams),
    Blackwell(BlackwellParams),
    Srt(SrtParams),
    Defective(DefectiveParams),
    McPerpetuity(McParams),
    McMax(McParams),
    IfsSandwich(IfsParams),
    ConditionsCheck(ConditionsParams),
}

#[derive(Debug, Clone)]
pub struct Scenario {
    kind: Kind,
    seed: u64,
}

fn parse_params<T: serde::de::DeserializeOwned + Default>(
    v: serde_json::Value,
) -> Result<T, String> {
    if v.is_null() {
        Ok(T::default())
    } else {
        serde_json::from_value(v).map_err(|e| format!("invalid params: {e}"))
    }
}

impl Scenario {
    pub fn parse(bytes: &[u8]) -> Result<Self, String> {
        let raw: RawConfig =
            serde_json::from_slice(bytes).map_err(|e| format!("invalid config: {e}"))?;
        let kind = match raw.scenario.as_str() {
            "stpetersburg" => Kind::StPetersburg(parse_params(raw.params)?),
            "qset-roundtrip" => Kind::QsetRoundtrip(parse_params(raw.params)?),
            "constant-q" => Kind::ConstantQ(parse_params(raw.params)?),
            "blackwell" => Kind::Blackwell(parse_params(raw.params)?),
            "srt" => Kind::Srt(parse_params(raw.params)?),
            "defective" => Kind::Defective(parse_params(raw.params)?),
            "mc-perpetuity" => Kind::McPerpetuity(parse_params(raw.params)?),
            "mc-max" => Kind::McMax(parse_params(raw.params)?),
            "ifs-sandwich" => Kind::IfsSandwich(parse_params(raw.params)?),
            "conditions-check" => Kind::ConditionsCheck(parse_params(raw.params)?),
            other => return Err(format!("unknown scenario name '{other}'")),
        };
        Ok(Scenario { kind, seed: raw.seed.unwrap_or(DEFAULT_SEED) })
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            Kind::StPetersburg(_) => "stpetersburg",
            Kind::QsetRoundtrip(_) => "qset-roundtrip",
            Kind::ConstantQ(_) => "constant-q",
            Kind::Blackwell(_) => "blackwell",
            Kind::Srt(_) => "srt",
            Kind::Defective(_) => "defective",
            Kind::McPerpetuity(_) => "mc-perpetuity",
            Kind::McMax(_) => "mc-max",
            Kind::IfsSandwich(_) => "ifs-sandwich",
            Kind::ConditionsCheck(_) => "conditions-check",
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
    }

    pub fn execute(&self, out_dir: &Path) -> Result<Outcome, String> {
        let mut outcome = match &self.kind {
            Kind::StPetersburg(p) => oracle_runs::st_petersburg(p, self.seed)?,
            Kind::QsetRoundtrip(p) => oracle_runs::qset_roundtrip(p, self.seed)?,
            Kind::ConstantQ(p) => oracle_runs::constant_q(p)?,
            Kind::ConditionsCheck(p) => oracle_runs::conditions_check(p)?,
            Kind::Blackwell(p) => renewal_runs::blackwell(p)?,
            Kind::Srt(p) => renewal_runs::srt(p)?,
            Kind::Defective(p) => renewal_runs::defective(p)?,
            Kind::McPerpetuity(p) => mc_runs::mc_run(p, self.seed, false, out_dir)?,
            Kind::McMax(p) => mc_runs::mc_run(p, self.seed, true, out_dir)?,
            Kind::IfsSandwich(p) => mc_runs::ifs_sandwich(p, self.seed)?,
        };
        outcome.note("seed", self.seed);
        Ok(outcome)
    }
}
