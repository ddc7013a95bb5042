//! Scenario files: strict TOML mapping onto a scheme configuration and an
//! optional sweep grid.
//!
//! ```toml
//! [scheme]
//! alpha_i = 1.0          # or alpha_f; exactly one
//! t = 0.75
//! phi = 3.141592653589793
//! convention = "diagonal" # optional; or "parallel_h"
//!
//! [scs]
//! kind = "ideal"          # or kind = "squeezed", s = 0.161, n_cut = 7 (optional)
//!
//! [pair]
//! kind = "chi"            # or "vacuum_mixed" with z, or "spdc" with lambda,
//!                         # order_max (optional, 2) and weighting (optional, "geometric")
//!
//! [detectors]
//! kind = "pnr"            # or "on_off"
//! eta = 1.0
//!
//! [cutoffs]               # optional, each key optional
//! pair = 1
//! detector = 8
//! beam = 20
//!
//! [sweep]                 # sweep command only
//! t = [0.9, 0.99]
//! eta = [0.7, 0.9]
//! ```

use std::path::Path;

use hybrid_core::analytic::Amplitude;
use hybrid_core::detection::Detectors;
use hybrid_core::pipeline::{Cutoffs, DisplacementConvention, SchemeConfig, ScsSource, SweepGrid, SweepParam};
use hybrid_core::resources::{PairSourceSpec, SpdcWeighting, SqueezedPhotonSpec};
use serde::Deserialize;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub scheme: SchemeSection,
    pub scs: ScsSection,
    pub pair: PairSection,
    pub detectors: DetectorSection,
    #[serde(default)]
    pub cutoffs: CutoffSection,
    pub sweep: Option<SweepSection>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeSection {
    pub alpha_i: Option<f64>,
    pub alpha_f: Option<f64>,
    pub t: f64,
    pub phi: f64,
    #[serde(default)]
    pub convention: ConventionName,
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConventionName {
    #[default]
    Diagonal,
    ParallelH,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScsSection {
    Ideal {},
    Squeezed { s: f64, n_cut: Option<usize> },
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightingName {
    #[default]
    Geometric,
    Exact,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PairSection {
    Chi {},
    VacuumMixed {
        z: f64,
    },
    Spdc {
        lambda: f64,
        order_max: Option<usize>,
        #[serde(default)]
        weighting: WeightingName,
    },
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectorKind {
    Pnr,
    OnOff,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorSection {
    pub kind: DetectorKind,
    pub eta: f64,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CutoffSection {
    pub pair: Option<usize>,
    pub detector: Option<usize>,
    pub beam: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub t: Option<Vec<f64>>,
    pub eta: Option<Vec<f64>>,
    pub alpha_f: Option<Vec<f64>>,
    pub lambda: Option<Vec<f64>>,
    pub s: Option<Vec<f64>>,
    pub z: Option<Vec<f64>>,
}

/// A validated scenario.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: SchemeConfig,
    pub grid: Option<SweepGrid>,
}

pub const DEFAULT_SPDC_ORDER: usize = 2;

impl ScenarioFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| CliError::Scenario(e.to_string()))
    }

    pub fn into_scenario(self) -> Result<Scenario> {
        let amplitude = match (self.scheme.alpha_i, self.scheme.alpha_f) {
            (Some(a), None) => Amplitude::Initial(a),
            (None, Some(a)) => Amplitude::Final(a),
            _ => {
                return Err(CliError::Scenario(
                    "[scheme] needs exactly one of `alpha_i` and `alpha_f`".into(),
                ))
            }
        };
        let scs_source = match self.scs {
            ScsSection::Ideal {} => ScsSource::Ideal,
            ScsSection::Squeezed { s, n_cut } => ScsSource::Squeezed(SqueezedPhotonSpec {
                s,
                n_cut: n_cut.unwrap_or(SqueezedPhotonSpec::DEFAULT_N_CUT),
            }),
        };
        let pair_source = match self.pair {
            PairSection::Chi {} => PairSourceSpec::IdealChi,
            PairSection::VacuumMixed { z } => PairSourceSpec::VacuumMixed { z },
            PairSection::Spdc {
                lambda,
                order_max,
                weighting,
            } => PairSourceSpec::Spdc {
                lambda,
                order_max: order_max.unwrap_or(DEFAULT_SPDC_ORDER),
                weighting: match weighting {
                    WeightingName::Geometric => SpdcWeighting::Geometric,
                    WeightingName::Exact => SpdcWeighting::Exact,
                },
            },
        };
        let config = SchemeConfig {
            amplitude,
            t: self.scheme.t,
            phi: self.scheme.phi,
            scs_source,
            pair_source,
            detectors: match self.detectors.kind {
                DetectorKind::Pnr => Detectors::Pnr,
                DetectorKind::OnOff => Detectors::OnOff,
            },
            eta: self.detectors.eta,
            convention: match self.scheme.convention {
                ConventionName::Diagonal => DisplacementConvention::Diagonal,
                ConventionName::ParallelH => DisplacementConvention::ParallelH,
            },
            cutoffs: Cutoffs {
                pair: self.cutoffs.pair,
                detector: self.cutoffs.detector,
                beam: self.cutoffs.beam,
            },
        };
        config.validate()?;
        let grid = match self.sweep {
            None => None,
            Some(s) => {
                let axes: Vec<(SweepParam, Vec<f64>)> = [
                    (SweepParam::T, s.t),
                    (SweepParam::Eta, s.eta),
                    (SweepParam::AlphaF, s.alpha_f),
                    (SweepParam::Lambda, s.lambda),
                    (SweepParam::S, s.s),
                    (SweepParam::Z, s.z),
                ]
                .into_iter()
                .filter_map(|(p, v)| v.map(|v| (p, v)))
                .collect();
                let grid = SweepGrid::new(axes)?;
                // a sweep over a parameter the sources do not have is a config error
                for (p, values) in grid.axes() {
                    p.apply(&config, values[0])?;
                }
                Some(grid)
            }
        };
        Ok(Scenario { config, grid })
    }
}

pub fn load(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    ScenarioFile::parse(&text)?.into_scenario()
}

#[cfg(test)]
mod tests {
    use super::*;

    const IDEAL: &str = r#"
[scheme]
alpha_i = 1.0
t = 0.75
phi = 3.141592653589793

[scs]
kind = "ideal"

[pair]
kind = "chi"

[detectors]
kind = "pnr"
eta = 1.0
"#;

    fn parse(text: &str) -> Result<Scenario> {
        ScenarioFile::parse(text)?.into_scenario()
    }

    #[test]
    fn minimal_ideal() {
        let s = parse(IDEAL).unwrap();
        assert_eq!(s.config, SchemeConfig::ideal(Amplitude::Initial(1.0), 0.75));
        assert!(s.grid.is_none());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = IDEAL.replace("t = 0.75", "t = 0.75\ntee = 1");
        assert!(matches!(parse(&text), Err(CliError::Scenario(_))));
        let text = IDEAL.replace("kind = \"ideal\"", "kind = \"ideal\"\ns = 0.1");
        assert!(matches!(parse(&text), Err(CliError::Scenario(_))));
        let text = format!("{IDEAL}\n[extra]\nx = 1\n");
        assert!(matches!(parse(&text), Err(CliError::Scenario(_))));
    }

    #[test]
    fn physics_has_no_defaults() {
        let text = IDEAL.replace("eta = 1.0", "");
        assert!(matches!(parse(&text), Err(CliError::Scenario(_))));
        let text = IDEAL.replace("alpha_i = 1.0", "");
        assert!(matches!(parse(&text), Err(CliError::Scenario(_))));
        let text = IDEAL.replace("alpha_i = 1.0", "alpha_i = 1.0\nalpha_f = 0.8");
        assert!(matches!(parse(&text), Err(CliError::Scenario(_))));
    }

    #[test]
    fn ranges_are_validated() {
        let err = parse(&IDEAL.replace("t = 0.75", "t = 1.5")).unwrap_err();
        assert_eq!(err.exit_code(), crate::error::EXIT_INVALID);
    }

    #[test]
    fn full_sources_and_sweep() {
        let text = r#"
[scheme]
alpha_i = 0.7
t = 0.99
phi = 3.141592653589793
convention = "diagonal"

[scs]
kind = "squeezed"
s = 0.161

[pair]
kind = "spdc"
lambda = 0.02
weighting = "exact"

[detectors]
kind = "on_off"
eta = 0.5

[cutoffs]
detector = 7

[sweep]
lambda = [0.03, 0.01]
eta = [0.5]
"#;
        let s = parse(text).unwrap();
        assert_eq!(
            s.config.pair_source,
            PairSourceSpec::Spdc {
                lambda: 0.02,
                order_max: 2,
                weighting: SpdcWeighting::Exact
            }
        );
        assert_eq!(s.config.cutoffs.detector, Some(7));
        let g = s.grid.unwrap();
        assert_eq!(g.len(), 2);
        assert_eq!(g.axes()[0].0, SweepParam::Eta);
        assert_eq!(g.axes()[1].1, vec![0.01, 0.03]);
    }

    #[test]
    fn sweep_axis_must_exist_in_config() {
        let text = format!("{IDEAL}\n[sweep]\nz = [0.5]\n");
        assert!(matches!(parse(&text), Err(CliError::Core(_))));
        let text = format!("{IDEAL}\n[sweep]\nw = [0.5]\n");
        assert!(matches!(parse(&text), Err(CliError::Scenario(_))));
    }

    #[test]
    fn shipped_scenarios_parse() {
        assert!(parse(include_str!("../../../scenarios/ideal.toml")).unwrap().grid.is_none());
        let sweep = parse(include_str!("../../../scenarios/squeezed_spdc_sweep.toml")).unwrap();
        assert_eq!(sweep.grid.unwrap().len(), 6);
    }
}
