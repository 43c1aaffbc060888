//! Sectioned TOML scenario files.
//!
//! Every section is optional and falls back to the reference scenario.
//! Keys carry their unit in the name. Any key can be overridden from the
//! environment as `NLINTERF_<SECTION>_<KEY>`, matched case-insensitively.

use std::path::Path;

use serde::{Deserialize, Serialize};

use nlinterf::dispersion::{beta2_from_d, DispersionParameter, FiberUnderTest};
use nlinterf::estimator::{FitOptions, FringeSetup, Scenario};
use nlinterf::interferogram::{NoiseConfig, SynthesisConfig};
use nlinterf::phase_matching::{EnvelopeModel, ParametricProcess, ProcessKind};
use nlinterf::spectral::{SweepGrid, Wavelength};

use crate::Failure;

pub const ENV_PREFIX: &str = "NLINTERF_";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PumpSection {
    pub lambda_p_nm: f64,
}

impl Default for PumpSection {
    fn default() -> Self {
        Self { lambda_p_nm: 780.3 }
    }
}

#[allow(non_snake_case)]
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FiberSection {
    pub length_m: f64,
    /// Exclusive with `beta2_s2_m`; −82.08 when neither is given.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub D_ps_nm_km: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta2_s2_m: Option<f64>,
    pub beta0_rad_m: f64,
    pub beta1_s_m: f64,
    pub beta3_s3_m: f64,
    /// Expansion point; twice the pump wavelength when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda0_nm: Option<f64>,
}

impl Default for FiberSection {
    fn default() -> Self {
        Self {
            length_m: 10.0,
            D_ps_nm_km: None,
            beta2_s2_m: None,
            beta0_rad_m: 0.05,
            beta1_s_m: 4.9e-9,
            beta3_s3_m: 0.0,
            lambda0_nm: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProcessSection {
    pub center_nm: f64,
    /// Exclusive with `slope_rad_m_per_rad_s`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fwhm_nm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slope_rad_m_per_rad_s: Option<f64>,
    pub length_m: f64,
}

impl ProcessSection {
    fn with_fwhm(center_nm: f64, fwhm_nm: f64, length_m: f64) -> Self {
        Self { center_nm, fwhm_nm: Some(fwhm_nm), slope_rad_m_per_rad_s: None, length_m }
    }

    fn build(&self, kind: ProcessKind, section: &str) -> Result<ParametricProcess<f64>, Failure> {
        let center = Wavelength::from_nm(self.center_nm).map_err(|e| Failure::config(format!("[{section}] center_nm: {e}")))?;
        let process = match (self.fwhm_nm, self.slope_rad_m_per_rad_s) {
            (Some(_), Some(_)) => {
                return Err(Failure::config(format!("[{section}] fwhm_nm and slope_rad_m_per_rad_s are mutually exclusive")))
            }
            (None, None) => return Err(Failure::config(format!("[{section}] needs fwhm_nm or slope_rad_m_per_rad_s"))),
            (Some(fwhm), None) => ParametricProcess::with_fwhm(kind, center, fwhm, self.length_m),
            (None, Some(slope)) => ParametricProcess::new(kind, center, slope, self.length_m),
        };
        process.map_err(|e| Failure::config(format!("[{section}] {e}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub start_nm: f64,
    pub stop_nm: f64,
    pub samples: usize,
    pub speed_nm_s: f64,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self { start_nm: 1535.0, stop_nm: 1545.0, samples: 10_000, speed_nm_s: 100.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SignalSection {
    pub amplitude: f64,
    pub offset: f64,
    pub visibility: f64,
}

impl Default for SignalSection {
    fn default() -> Self {
        Self { amplitude: 1.0, offset: 0.02, visibility: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseSection {
    /// Fraction of the trace maximum.
    pub additive_sigma: f64,
    pub shot_scale: f64,
    pub drift_rad_s: f64,
    pub seed: u64,
}

impl Default for NoiseSection {
    fn default() -> Self {
        Self { additive_sigma: 0.01, shot_scale: 0.0, drift_rad_s: 0.0, seed: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitSection {
    pub max_iterations: usize,
    pub tolerance: f64,
    pub initial_damping: f64,
    pub damping_increase: f64,
    pub damping_decrease: f64,
    pub free_envelope: bool,
    pub both_signs: bool,
    pub continuation: bool,
}

impl Default for FitSection {
    fn default() -> Self {
        let d = FitOptions::<f64>::default();
        Self {
            max_iterations: d.max_iterations,
            tolerance: d.tolerance,
            initial_damping: d.initial_damping,
            damping_increase: d.damping_increase,
            damping_decrease: d.damping_decrease,
            free_envelope: d.free_envelope,
            both_signs: d.both_signs,
            continuation: d.continuation,
        }
    }
}

/// Grid of the `acceptance` command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AcceptanceSection {
    pub start_nm: f64,
    pub stop_nm: f64,
    pub points: usize,
    /// Largest tolerated SHG acceptance over the sweep, relative to its peak.
    pub shg_threshold: f64,
}

impl Default for AcceptanceSection {
    fn default() -> Self {
        Self { start_nm: 1500.0, stop_nm: 1600.0, points: 1001, shg_threshold: 0.1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct McSection {
    pub n_scans: usize,
    pub svg: bool,
}

impl Default for McSection {
    fn default() -> Self {
        Self { n_scans: 1000, svg: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: String,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: ".".into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub pump: PumpSection,
    pub fiber: FiberSection,
    pub dfg: ProcessSection,
    pub sfg1: ProcessSection,
    pub sfg2: ProcessSection,
    pub shg: ProcessSection,
    pub sweep: SweepSection,
    pub signal: SignalSection,
    pub noise: NoiseSection,
    pub fit: FitSection,
    pub acceptance: AcceptanceSection,
    pub mc: McSection,
    pub output: OutputSection,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            pump: PumpSection::default(),
            fiber: FiberSection::default(),
            dfg: ProcessSection::with_fwhm(1540.0, 40.0, 0.02),
            sfg1: ProcessSection::with_fwhm(1540.0, 24.0, 0.03),
            sfg2: ProcessSection::with_fwhm(1540.0, 24.0, 0.03),
            shg: ProcessSection::with_fwhm(1560.6, 0.6, 0.03),
            sweep: SweepSection::default(),
            signal: SignalSection::default(),
            noise: NoiseSection::default(),
            fit: FitSection::default(),
            acceptance: AcceptanceSection::default(),
            mc: McSection::default(),
            output: OutputSection::default(),
        }
    }
}

/// Section names and their keys, for environment overrides.
fn known_keys() -> Vec<(String, Vec<String>)> {
    let mut full = ScenarioConfig::default();
    full.fiber.D_ps_nm_km = Some(0.0);
    full.fiber.beta2_s2_m = Some(0.0);
    full.fiber.lambda0_nm = Some(0.0);
    for p in [&mut full.dfg, &mut full.sfg1, &mut full.sfg2, &mut full.shg] {
        p.slope_rad_m_per_rad_s = Some(0.0);
    }
    let table = toml::Table::try_from(&full).expect("config serializes");
    table
        .iter()
        .map(|(section, v)| {
            let keys = v.as_table().map(|t| t.keys().cloned().collect()).unwrap_or_default();
            (section.clone(), keys)
        })
        .collect()
}

fn parse_env_value(raw: &str) -> toml::Value {
    format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

/// Applies `NLINTERF_<SECTION>_<KEY>` variables to a parsed table.
pub fn apply_env_overrides(table: &mut toml::Table, vars: impl IntoIterator<Item = (String, String)>) -> Result<(), Failure> {
    let known = known_keys();
    for (name, raw) in vars {
        let Some(rest) = name.strip_prefix(ENV_PREFIX) else { continue };
        let rest = rest.to_ascii_lowercase();
        let Some((section, keys)) = known.iter().find(|(s, _)| rest.starts_with(&format!("{s}_"))) else {
            continue;
        };
        let key_lc = &rest[section.len() + 1..];
        let key = keys
            .iter()
            .find(|k| k.to_ascii_lowercase() == key_lc)
            .ok_or_else(|| Failure::config(format!("environment variable {name}: unknown key `{key_lc}` in [{section}]")))?;
        let entry = table.entry(section.clone()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        let sub = entry.as_table_mut().ok_or_else(|| Failure::config(format!("[{section}] must be a table")))?;
        sub.insert(key.clone(), parse_env_value(&raw));
    }
    Ok(())
}

fn table_from_file(path: &Path) -> Result<toml::Table, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::io(format!("cannot read config {}: {e}", path.display())))?;
    if path.extension().is_some_and(|e| e == "json") {
        // trace metadata sidecar: the resolved scenario sits under "config"
        let json: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| Failure::config(format!("{}: {e}", path.display())))?;
        let inner = json.get("config").cloned().unwrap_or(json);
        toml::Table::try_from(inner).map_err(|e| Failure::config(format!("{}: {e}", path.display())))
    } else {
        text.parse::<toml::Table>().map_err(|e| Failure::config(format!("{}: {e}", path.display())))
    }
}

impl ScenarioConfig {
    /// Reads `path` (or the defaults), then layers the environment on top.
    pub fn load(path: Option<&Path>, vars: impl IntoIterator<Item = (String, String)>) -> Result<Self, Failure> {
        let mut table = match path {
            Some(p) => table_from_file(p)?,
            None => toml::Table::new(),
        };
        apply_env_overrides(&mut table, vars)?;
        let cfg: Self = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Failure::config(format!("invalid config: {}", e.message())))?;
        cfg.resolved()
    }

    /// Fills the either/or keys with explicit values and validates the scenario.
    pub fn resolved(mut self) -> Result<Self, Failure> {
        match (self.fiber.D_ps_nm_km, self.fiber.beta2_s2_m) {
            (Some(_), Some(_)) => return Err(Failure::config("[fiber] D_ps_nm_km and beta2_s2_m are mutually exclusive")),
            (None, None) => self.fiber.D_ps_nm_km = Some(-82.08),
            _ => {}
        }
        if self.fiber.lambda0_nm.is_none() {
            self.fiber.lambda0_nm = Some(2.0 * self.pump.lambda_p_nm);
        }
        self.scenario()?;
        self.shg.build(ProcessKind::Shg, "shg")?;
        Ok(self)
    }

    pub fn pump(&self) -> Result<Wavelength<f64>, Failure> {
        Wavelength::from_nm(self.pump.lambda_p_nm).map_err(|e| Failure::config(format!("[pump] lambda_p_nm: {e}")))
    }

    pub fn fiber(&self) -> Result<FiberUnderTest<f64>, Failure> {
        let f = &self.fiber;
        let lambda0 = f.lambda0_nm.unwrap_or(2.0 * self.pump.lambda_p_nm);
        let reference = Wavelength::from_nm(lambda0).map_err(|e| Failure::config(format!("[fiber] lambda0_nm: {e}")))?;
        let beta2 = match (f.D_ps_nm_km, f.beta2_s2_m) {
            (Some(_), Some(_)) => return Err(Failure::config("[fiber] D_ps_nm_km and beta2_s2_m are mutually exclusive")),
            (Some(d), None) => beta2_from_d(DispersionParameter(d), reference),
            (None, Some(b)) => b,
            (None, None) => beta2_from_d(DispersionParameter(-82.08), reference),
        };
        let fiber = FiberUnderTest {
            length: f.length_m,
            beta0: f.beta0_rad_m,
            beta1: f.beta1_s_m,
            beta2,
            beta3: f.beta3_s3_m,
            reference,
        };
        fiber.validate().map_err(|e| Failure::config(format!("[fiber] {e}")))?;
        Ok(fiber)
    }

    pub fn envelope(&self) -> Result<EnvelopeModel<f64>, Failure> {
        Ok(EnvelopeModel {
            dfg: self.dfg.build(ProcessKind::Dfg, "dfg")?,
            sfg_arm1: self.sfg1.build(ProcessKind::SfgArm1, "sfg1")?,
            sfg_arm2: self.sfg2.build(ProcessKind::SfgArm2, "sfg2")?,
        })
    }

    pub fn shg(&self) -> Result<ParametricProcess<f64>, Failure> {
        self.shg.build(ProcessKind::Shg, "shg")
    }

    pub fn sweep(&self) -> Result<SweepGrid<f64>, Failure> {
        let s = &self.sweep;
        SweepGrid::from_nm(s.start_nm, s.stop_nm, s.samples, s.speed_nm_s).map_err(|e| Failure::config(format!("[sweep] {e}")))
    }

    pub fn setup(&self) -> Result<FringeSetup<f64>, Failure> {
        Ok(FringeSetup { pump: self.pump()?, envelope: self.envelope()? })
    }

    pub fn fit_options(&self) -> FitOptions<f64> {
        let f = &self.fit;
        FitOptions {
            max_iterations: f.max_iterations,
            tolerance: f.tolerance,
            initial_damping: f.initial_damping,
            damping_increase: f.damping_increase,
            damping_decrease: f.damping_decrease,
            free_envelope: f.free_envelope,
            both_signs: f.both_signs,
            continuation: f.continuation,
        }
    }

    pub fn scenario(&self) -> Result<Scenario<f64>, Failure> {
        let synthesis = SynthesisConfig {
            fiber: self.fiber()?,
            pump: self.pump()?,
            envelope: self.envelope()?,
            sweep: self.sweep()?,
            amplitude: self.signal.amplitude,
            offset: self.signal.offset,
            visibility: self.signal.visibility,
        };
        synthesis.validate().map_err(|e| Failure::config(e.to_string()))?;
        let n = &self.noise;
        let noise = NoiseConfig {
            additive_sigma: n.additive_sigma,
            shot_scale: n.shot_scale,
            drift_rad_per_s: n.drift_rad_s,
            seed: n.seed,
        };
        noise.validate().map_err(|e| Failure::config(format!("[noise] {e}")))?;
        Ok(Scenario { synthesis, noise, fit: self.fit_options() })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn no_env() -> Vec<(String, String)> {
        Vec::new()
    }

    #[test]
    fn defaults_match_reference_scenario() {
        let cfg = ScenarioConfig::load(None, no_env()).unwrap();
        let s = cfg.scenario().unwrap();
        let r = Scenario::<f64>::reference();
        assert!((s.synthesis.fiber.beta2 / r.synthesis.fiber.beta2 - 1.0).abs() < 1e-15);
        assert_eq!(s.synthesis.sweep, r.synthesis.sweep);
        assert_eq!(s.synthesis.envelope, r.synthesis.envelope);
    }

    #[test]
    fn unknown_key_is_named() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.toml");
        std::fs::write(&p, "[fiber]\nlenght_m = 3\n").unwrap();
        let err = ScenarioConfig::load(Some(&p), no_env()).unwrap_err();
        assert!(err.message.contains("lenght_m"), "{}", err.message);
    }

    #[test]
    fn exclusive_keys_conflict() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.toml");
        std::fs::write(&p, "[fiber]\nD_ps_nm_km = -80\nbeta2_s2_m = 1e-25\n").unwrap();
        assert!(ScenarioConfig::load(Some(&p), no_env()).is_err());
        std::fs::write(&p, "[dfg]\ncenter_nm = 1540\nfwhm_nm = 30\nslope_rad_m_per_rad_s = 1e-11\nlength_m = 0.01\n").unwrap();
        assert!(ScenarioConfig::load(Some(&p), no_env()).is_err());
    }

    #[test]
    fn environment_overrides_file() {
        let vars = vec![
            ("NLINTERF_FIBER_LENGTH_M".to_string(), "20".to_string()),
            ("NLINTERF_FIBER_D_PS_NM_KM".to_string(), "-40.5".to_string()),
            ("NLINTERF_FIT_FREE_ENVELOPE".to_string(), "true".to_string()),
            ("NLINTERF_OUT".to_string(), "elsewhere".to_string()),
        ];
        let cfg = ScenarioConfig::load(None, vars).unwrap();
        assert_eq!(cfg.fiber.length_m, 20.0);
        assert_eq!(cfg.fiber.D_ps_nm_km, Some(-40.5));
        assert!(cfg.fit.free_envelope);
        let bad = vec![("NLINTERF_FIBER_COLOR".to_string(), "1".to_string())];
        assert!(ScenarioConfig::load(None, bad).is_err());
    }

    #[test]
    fn toml_round_trip() {
        let cfg = ScenarioConfig::load(None, no_env()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.toml");
        std::fs::write(&p, cfg.to_toml()).unwrap();
        assert_eq!(ScenarioConfig::load(Some(&p), no_env()).unwrap(), cfg);
    }
}
