use crate::formula::{parse_complex, parse_rule};
use crate::CliError;
use krein_ball::model_domains::{make_ball, Domain, SpectralPoint};
use krein_ball::schatten_analysis::{
    p0_for_power_decay, threshold, KRange, ThresholdKind, ThresholdSpec,
};
use krein_ball::triple_engine::{
    make_boundary_operator, ExtensionPair, Realization, Representation, SymmetryClass,
};
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    pub n: usize,
    #[serde(default = "one")]
    pub radius: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LambdaConfig {
    pub re: f64,
    pub im: f64,
}

/// One side of the pair: `"neumann"`, `"dirichlet"` or a Robin formula.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SideConfig {
    Neumann,
    Dirichlet,
    Robin {
        theta: String,
        /// Inferred from the values when absent.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        class: Option<SymmetryClass>,
    },
}

impl SideConfig {
    /// Parses the flag form: `neumann`, `dirichlet` or a formula.
    pub fn from_flag(s: &str) -> Self {
        match s.trim().to_ascii_lowercase().as_str() {
            "neumann" | "n" => SideConfig::Neumann,
            "dirichlet" | "d" => SideConfig::Dirichlet,
            _ => SideConfig::Robin {
                theta: s.trim().to_string(),
                class: None,
            },
        }
    }

    pub fn realization(&self) -> Result<Realization, CliError> {
        match self {
            SideConfig::Neumann => Ok(Realization::Neumann),
            SideConfig::Dirichlet => Ok(Realization::Dirichlet),
            SideConfig::Robin { theta, class } => {
                let rule = parse_rule(theta)
                    .map_err(|e| CliError::Config(format!("theta '{theta}': {e}")))?;
                let repr = Representation::Diagonal(rule);
                if let Some(class) = class {
                    return Ok(Realization::Robin(make_boundary_operator(repr, *class)?));
                }
                let mut last = None;
                for class in [
                    SymmetryClass::SelfAdjoint,
                    SymmetryClass::Dissipative,
                    SymmetryClass::Accumulative,
                ] {
                    match make_boundary_operator(repr.clone(), class) {
                        Ok(op) => return Ok(Realization::Robin(op)),
                        Err(e @ krein_ball::Error::SymmetryMismatch(_)) => last = Some(e),
                        Err(e) => return Err(e.into()),
                    }
                }
                Err(last.expect("three classes tried").into())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairConfig {
    pub left: SideConfig,
    pub right: SideConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdConfig {
    pub kind: ThresholdKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p0: Option<f64>,
    /// Decay power of the parameter difference; sets `p0 = (n-1)/q`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub domain: DomainConfig,
    /// Defaults to `i`, or `-i` with a dissipative participant.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<LambdaConfig>,
    pub pair: PairConfig,
    pub cutoff: usize,
    /// 1-based inclusive `[start, end]`; defaults to `[K/10, K]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit_window: Option<[usize; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<ThresholdConfig>,
    /// Tolerance on the decay exponent.
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default = "default_grids")]
    pub grids: Vec<usize>,
    /// Degrees for `eig` and `oracle`.
    #[serde(default = "default_ells")]
    pub ells: Vec<usize>,
    /// Real window for `eig`.
    #[serde(default = "default_window")]
    pub eig_window: [f64; 2],
}

fn default_tolerance() -> f64 {
    0.15
}

fn default_grids() -> Vec<usize> {
    vec![1024, 2048, 4096]
}

fn default_ells() -> Vec<usize> {
    vec![0]
}

fn default_window() -> [f64; 2] {
    [-50.0, 100.0]
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            domain: DomainConfig { n: 2, radius: 1.0 },
            lambda: None,
            pair: PairConfig {
                left: SideConfig::Robin {
                    theta: "1".into(),
                    class: None,
                },
                right: SideConfig::Neumann,
            },
            cutoff: 2000,
            fit_window: None,
            threshold: None,
            tolerance: default_tolerance(),
            grids: default_grids(),
            ells: default_ells(),
            eig_window: default_window(),
        }
    }
}

/// Loads a config file. A result file with a top-level `config` object is
/// accepted as well, so any emitted JSON reproduces its run.
pub fn load(path: &Path) -> Result<ExperimentConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let value: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let inner = match value.get("config") {
        Some(c) if value.get("domain").is_none() => c.clone(),
        _ => value,
    };
    serde_json::from_value(inner).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

/// Validated module inputs built from a config.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub domain: Domain,
    pub pair: ExtensionPair,
    pub lambda: SpectralPoint,
}

impl ExperimentConfig {
    pub fn build(&self) -> Result<Experiment, CliError> {
        let domain = make_ball(self.domain.n, self.domain.radius)?;
        let pair = ExtensionPair::new(
            self.pair.left.realization()?,
            self.pair.right.realization()?,
        );
        let lambda = match self.lambda {
            Some(l) => SpectralPoint::new(l.re, l.im)?,
            None => pair.default_lambda(),
        };
        krein_ball::triple_engine::admissible_lambda(&pair, lambda)?;
        if self.grids.is_empty() {
            return Err(CliError::Config("grids must not be empty".into()));
        }
        if !(self.tolerance >= 0.0) {
            return Err(CliError::Config(format!(
                "tolerance must be >= 0, got {}",
                self.tolerance
            )));
        }
        Ok(Experiment {
            domain,
            pair,
            lambda,
        })
    }

    pub fn fit_window(&self, len: usize) -> Result<KRange, CliError> {
        Ok(match self.fit_window {
            Some([a, b]) => KRange::new(a, b)?,
            None => KRange::default_for(len)?,
        })
    }

    /// Threshold from the config, or inferred from the pair: Dirichlet
    /// against Neumann uses the Dirichlet-Neumann rate, anything else the
    /// Robin-Neumann rate.
    pub fn threshold_spec(&self) -> Result<ThresholdSpec, CliError> {
        let n = self.domain.n;
        match &self.threshold {
            Some(t) => {
                let p0 = match (t.p0, t.q) {
                    (Some(_), Some(_)) => {
                        return Err(CliError::Config("give either p0 or q, not both".into()))
                    }
                    (Some(p0), None) => Some(p0),
                    (None, Some(q)) => Some(p0_for_power_decay(n, q)?),
                    (None, None) => None,
                };
                Ok(threshold(t.kind, n, p0)?)
            }
            None => {
                let dn = matches!(
                    (&self.pair.left, &self.pair.right),
                    (SideConfig::Dirichlet, SideConfig::Neumann)
                        | (SideConfig::Neumann, SideConfig::Dirichlet)
                );
                let kind = if dn {
                    ThresholdKind::DirichletNeumann
                } else {
                    ThresholdKind::RobinNeumann
                };
                Ok(threshold(kind, n, None)?)
            }
        }
    }
}

/// Parses `re,im` or a complex constant like `1+2i`.
pub fn parse_lambda(s: &str) -> Result<LambdaConfig, String> {
    if let Some((a, b)) = s.split_once(',') {
        let re = a
            .trim()
            .parse::<f64>()
            .map_err(|e| format!("lambda '{s}': {e}"))?;
        let im = b
            .trim()
            .parse::<f64>()
            .map_err(|e| format!("lambda '{s}': {e}"))?;
        return Ok(LambdaConfig { re, im });
    }
    let z = parse_complex(s)?;
    Ok(LambdaConfig { re: z.re, im: z.im })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_round_trip() {
        let mut c = ExperimentConfig::default();
        c.lambda = Some(LambdaConfig { re: 0.5, im: -1.0 });
        c.threshold = Some(ThresholdConfig {
            kind: ThresholdKind::ParameterDifference,
            p0: None,
            q: Some(2.0),
        });
        c.pair.right = SideConfig::Robin {
            theta: "2 - (1+l)^(-2)".into(),
            class: Some(SymmetryClass::SelfAdjoint),
        };
        let text = serde_json::to_string(&c).unwrap();
        let back: ExperimentConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn class_is_inferred() {
        let side = SideConfig::from_flag("1 + i");
        match side.realization().unwrap() {
            Realization::Robin(op) => assert_eq!(op.class(), SymmetryClass::Dissipative),
            _ => panic!(),
        }
        match SideConfig::from_flag("1 - i").realization().unwrap() {
            Realization::Robin(op) => assert_eq!(op.class(), SymmetryClass::Accumulative),
            _ => panic!(),
        }
    }

    #[test]
    fn threshold_inference() {
        let mut c = ExperimentConfig::default();
        c.pair = PairConfig {
            left: SideConfig::Dirichlet,
            right: SideConfig::Neumann,
        };
        assert_eq!(
            c.threshold_spec().unwrap().kind,
            ThresholdKind::DirichletNeumann
        );
        c.threshold = Some(ThresholdConfig {
            kind: ThresholdKind::ParameterDifference,
            p0: Some(1.0),
            q: Some(1.0),
        });
        assert!(c.threshold_spec().is_err());
    }

    #[test]
    fn lambda_forms() {
        assert_eq!(
            parse_lambda("0,1").unwrap(),
            LambdaConfig { re: 0.0, im: 1.0 }
        );
        assert_eq!(
            parse_lambda("2 - 3i").unwrap(),
            LambdaConfig { re: 2.0, im: -3.0 }
        );
        assert!(parse_lambda("1,x").is_err());
    }
}
