use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use krein_ball::fd_oracle::{
    fd_weyl_value, krein_identity_residual, observed_orders, richardson_order_complex, RadialGrid,
};
use krein_ball::model_domains::{gamma_norm, modes, weyl_value};
use krein_ball::schatten_analysis::{fit_decay_exponent, p_tolerance_from_exponent, verdict};
use krein_ball::triple_engine::{robin_eigenvalues, singular_spectrum};
use serde_json::{json, Map, Value};

use crate::config::ExperimentConfig;
use crate::suites::{self, Suite};
use crate::CliError;

/// Output options shared by every subcommand.
#[derive(Debug, Clone, Default)]
pub struct OutputOptions {
    /// Adds a `generated_at_unix` field to JSON results.
    pub timestamp: bool,
}

/// Round-trip safe float (17 significant digits).
pub fn float17(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn stamp(mut v: Map<String, Value>, opts: &OutputOptions) -> String {
    if opts.timestamp {
        let secs = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        v.insert("generated_at_unix".into(), json!(secs));
    }
    let mut s = serde_json::to_string_pretty(&Value::Object(v)).expect("JSON values serialize");
    s.push('\n');
    s
}

fn config_value(cfg: &ExperimentConfig) -> Value {
    serde_json::to_value(cfg).expect("config serializes")
}

/// `k,s` rows, sorted non-increasing.
pub fn spectrum_csv(values: &[f64]) -> String {
    let mut s = String::with_capacity(values.len() * 28 + 4);
    s.push_str("k,s\n");
    for (k, v) in values.iter().enumerate() {
        writeln!(s, "{},{}", k + 1, float17(*v)).expect("write to string");
    }
    s
}

/// Weyl values and gamma norms per degree.
pub fn weyl(cfg: &ExperimentConfig) -> Result<String, CliError> {
    let exp = cfg.build()?;
    let mut s = String::from("l,multiplicity,re,im,gamma_norm\n");
    for mode in modes(&exp.domain, cfg.cutoff) {
        let m = weyl_value(&exp.domain, &mode, exp.lambda)?;
        let g = gamma_norm(&exp.domain, &mode, exp.lambda)?;
        writeln!(
            s,
            "{},{},{},{},{}",
            mode.ell,
            mode.multiplicity,
            float17(m.re),
            float17(m.im),
            float17(g)
        )
        .expect("write to string");
    }
    Ok(s)
}

/// Multiplicity-expanded singular values as CSV.
pub fn snum(cfg: &ExperimentConfig) -> Result<String, CliError> {
    let exp = cfg.build()?;
    let spectrum = singular_spectrum(&exp.pair, &exp.domain, exp.lambda, cfg.cutoff)?;
    Ok(spectrum_csv(&spectrum.values))
}

/// Exponent fit and verdict. Writes the spectrum CSV when `spectrum_out` is given.
pub fn fit(
    cfg: &ExperimentConfig,
    spectrum_out: Option<&PathBuf>,
    opts: &OutputOptions,
) -> Result<String, CliError> {
    let exp = cfg.build()?;
    let spec = cfg.threshold_spec()?;
    let spectrum = singular_spectrum(&exp.pair, &exp.domain, exp.lambda, cfg.cutoff)?;
    let window = cfg.fit_window(spectrum.values.len())?;
    let fit = fit_decay_exponent(&spectrum.values, window)?;
    let v = verdict(&fit, &spec, p_tolerance_from_exponent(&spec, cfg.tolerance));
    let mut out = Map::new();
    out.insert("config".into(), config_value(cfg));
    if let Some(path) = spectrum_out {
        write_file(path, &spectrum_csv(&spectrum.values))?;
        out.insert("spectrum_file".into(), json!(path.display().to_string()));
    }
    out.insert("fit".into(), json!(fit));
    out.insert("threshold".into(), json!(spec));
    out.insert("verdict".into(), json!(v.verdict));
    out.insert("margin".into(), json!(v.margin));
    out.insert("implied_p".into(), json!(v.implied_p));
    out.insert("p_tolerance".into(), json!(v.tolerance));
    Ok(stamp(out, opts))
}

/// Real eigenvalues of the left realization per degree inside the window.
pub fn eig(cfg: &ExperimentConfig, opts: &OutputOptions) -> Result<String, CliError> {
    let exp = cfg.build()?;
    let window = (cfg.eig_window[0], cfg.eig_window[1]);
    let rows = cfg
        .ells
        .iter()
        .map(|&ell| {
            let e = robin_eigenvalues(&exp.domain, &exp.pair.left, &exp.domain.mode(ell), window)?;
            Ok(json!({ "l": ell, "eigenvalues": e }))
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let mut out = Map::new();
    out.insert("config".into(), config_value(cfg));
    out.insert("realization".into(), json!("left"));
    out.insert("modes".into(), Value::Array(rows));
    Ok(stamp(out, opts))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleCheck {
    Krein,
    Gamma,
    Weyl,
}

impl OracleCheck {
    pub fn parse(s: &str) -> Result<Self, CliError> {
        match s {
            "krein" => Ok(OracleCheck::Krein),
            "gamma" => Ok(OracleCheck::Gamma),
            "weyl" => Ok(OracleCheck::Weyl),
            _ => Err(CliError::Config(format!(
                "unknown check '{s}'; expected krein, gamma or weyl"
            ))),
        }
    }

    fn name(self) -> &'static str {
        match self {
            OracleCheck::Krein => "krein",
            OracleCheck::Gamma => "gamma",
            OracleCheck::Weyl => "weyl",
        }
    }
}

/// FD residuals on the configured grids and the observed orders.
pub fn oracle(
    cfg: &ExperimentConfig,
    check: OracleCheck,
    opts: &OutputOptions,
) -> Result<String, CliError> {
    let exp = cfg.build()?;
    let d = &exp.domain;
    let mut rows = Vec::new();
    for &ell in &cfg.ells {
        let mode = d.mode(ell);
        let row = match check {
            OracleCheck::Krein => {
                if exp.pair.is_trivial() {
                    return Err(CliError::Config(
                        "the krein check needs two different realizations".into(),
                    ));
                }
                let errors = cfg
                    .grids
                    .iter()
                    .map(|&n| {
                        Ok(krein_identity_residual(
                            d,
                            &mode,
                            exp.lambda,
                            &exp.pair,
                            RadialGrid::new(d, n)?,
                        )?)
                    })
                    .collect::<Result<Vec<f64>, CliError>>()?;
                json!({ "l": ell, "residuals": errors, "orders": observed_orders(&errors) })
            }
            OracleCheck::Gamma => {
                let errors = suites::gamma_adjoint_errors_at(d, ell, 0, &cfg.grids, exp.lambda)?;
                json!({ "l": ell, "f": format!("r^{ell} ({})", suites::TEST_FUNCTION_NAMES[0]), "residuals": errors, "orders": observed_orders(&errors) })
            }
            OracleCheck::Weyl => {
                let exact = weyl_value(d, &mode, exp.lambda)?;
                let values = cfg
                    .grids
                    .iter()
                    .map(|&n| Ok(fd_weyl_value(d, &mode, exp.lambda, RadialGrid::new(d, n)?)?))
                    .collect::<Result<Vec<_>, CliError>>()?;
                let errors: Vec<f64> = values.iter().map(|v| (v - exact).norm()).collect();
                let richardson = if values.len() >= 3 {
                    let k = values.len();
                    Some(richardson_order_complex(
                        values[k - 3],
                        values[k - 2],
                        values[k - 1],
                    ))
                } else {
                    None
                };
                json!({ "l": ell, "errors": errors, "orders": observed_orders(&errors), "richardson_order": richardson })
            }
        };
        rows.push(row);
    }
    let mut out = Map::new();
    out.insert("config".into(), config_value(cfg));
    out.insert("check".into(), json!(check.name()));
    out.insert("grids".into(), json!(cfg.grids));
    out.insert("results".into(), Value::Array(rows));
    Ok(stamp(out, opts))
}

/// Runs a verification suite. Returns the JSON report and whether every
/// criterion passed.
pub fn verify(
    suite: Suite,
    n: Option<usize>,
    opts: &OutputOptions,
) -> Result<(String, bool), CliError> {
    let results = suites::run(suite, n)?;
    let passed = results.iter().all(|r| r.passed);
    let mut out = Map::new();
    out.insert("suite".into(), json!(Suite::NAMES[suite as usize]));
    if let Some(n) = n {
        out.insert("n".into(), json!(n));
    }
    out.insert("passed".into(), json!(passed));
    out.insert(
        "results".into(),
        serde_json::to_value(&results).expect("outcomes serialize"),
    );
    Ok((stamp(out, opts), passed))
}
