//! Scenario files.
//!
//! Scenarios are TOML documents that deserialize directly into
//! [`ScenarioConfig`]. Parse errors are reported as `file:line:column`.

use std::fs;
use std::path::Path;

use crate::error::{CbfError, Result};
use crate::sim::ScenarioConfig;

/// Command-line overrides applied on top of a scenario file.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub dt: Option<f64>,
    pub horizon: Option<f64>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut ScenarioConfig) {
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(dt) = self.dt {
            cfg.sim.dt = dt;
        }
        if let Some(horizon) = self.horizon {
            cfg.sim.horizon = horizon;
        }
    }
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
    (line, col)
}

/// Parses and validates a scenario. `origin` names the source in diagnostics.
pub fn parse_config(text: &str, origin: &str) -> Result<ScenarioConfig> {
    let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| {
        let location = match e.span() {
            Some(span) => {
                let (line, col) = line_col(text, span.start);
                format!("{origin}:{line}:{col}")
            }
            None => origin.to_string(),
        };
        CbfError::Config(format!("{location}: {}", e.message().trim_end()))
    })?;
    cfg.validate()
        .map_err(|e| CbfError::Config(format!("{origin}: {}", strip_kind(&e))))?;
    Ok(cfg)
}

fn strip_kind(e: &CbfError) -> String {
    match e {
        CbfError::Config(msg) => msg.clone(),
        other => other.to_string(),
    }
}

pub fn load_config(path: &Path) -> Result<ScenarioConfig> {
    let text = fs::read_to_string(path)
        .map_err(|e| CbfError::Usage(format!("cannot read {}: {e}", path.display())))?;
    parse_config(&text, &path.display().to_string())
}

/// Loads a scenario, applies overrides and validates the result.
pub fn load_with_overrides(path: &Path, overrides: &Overrides) -> Result<ScenarioConfig> {
    let mut cfg = load_config(path)?;
    overrides.apply(&mut cfg);
    cfg.validate()
        .map_err(|e| CbfError::Config(format!("{} (after overrides): {}", path.display(), strip_kind(&e))))?;
    Ok(cfg)
}

/// Serializes a scenario with every default written out.
pub fn to_toml(cfg: &ScenarioConfig) -> Result<String> {
    toml::to_string(cfg).map_err(|e| CbfError::Config(format!("cannot serialize scenario: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{FilterKind, NominalController};
    use crate::systems::SystemKind;

    const MINIMAL: &str = r#"
name = "di"
system = "double_integrator"
filter = "parallel_pair"
x0 = [0.0, 0.5]

[nominal]
kind = "constant"
u = [1.0]
"#;

    #[test]
    fn minimal_file_gets_defaults() {
        let cfg = parse_config(MINIMAL, "mem").unwrap();
        assert_eq!(cfg.system, SystemKind::DoubleIntegrator);
        assert_eq!(cfg.filter, FilterKind::ParallelPair);
        assert_eq!(cfg.sim.dt, 1e-3);
        assert_eq!(cfg.sim.horizon, 10.0);
        assert_eq!(cfg.sim.blowup_threshold, 1e4);
        assert_eq!(cfg.sim.safety_tol, 1e-6);
        assert_eq!(cfg.gains.margin, 0.1);
        assert_eq!(cfg.nominal, NominalController::Constant { u: vec![1.0] });
    }

    #[test]
    fn round_trip_through_toml() {
        let cfg = parse_config(MINIMAL, "mem").unwrap();
        let text = to_toml(&cfg).unwrap();
        assert_eq!(parse_config(&text, "again").unwrap(), cfg);
    }

    #[test]
    fn syntax_error_reports_line() {
        let bad = MINIMAL.replace("\"parallel_pair\"", "parallel_pair");
        let err = parse_config(&bad, "bad.toml").unwrap_err().to_string();
        assert!(err.contains("bad.toml:4:10"), "{err}");
    }

    #[test]
    fn unknown_key_reports_line() {
        let bad = MINIMAL.replace("[nominal]", "dtt = 0.1\n[nominal]");
        let err = parse_config(&bad, "bad.toml").unwrap_err().to_string();
        assert!(err.contains("bad.toml:7:1"), "{err}");
        assert!(err.contains("dtt"), "{err}");
    }

    #[test]
    fn invalid_values_rejected() {
        let bad = format!("{MINIMAL}\n[sim]\ndt = 0.0\n");
        assert!(matches!(parse_config(&bad, "z"), Err(CbfError::Config(_))));
    }

    #[test]
    fn overrides_apply() {
        let mut cfg = parse_config(MINIMAL, "mem").unwrap();
        Overrides {
            seed: Some(9),
            dt: Some(0.01),
            horizon: None,
        }
        .apply(&mut cfg);
        assert_eq!((cfg.seed, cfg.sim.dt, cfg.sim.horizon), (9, 0.01, 10.0));
    }
}
