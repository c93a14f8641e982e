//! Built-in configurations of the four worked examples, and the reference values
//! stated for them.

use crate::config::{parse_config, RunConfig};
use crate::error::CliError;

pub const IDS: [&str; 4] = ["5.1", "5.2", "5.3", "6.1"];

/// Accepts `5.2` as well as `ex52`.
pub fn canonical(id: &str) -> Option<&'static str> {
    let short = id.strip_prefix("ex").unwrap_or(id).replace('.', "");
    IDS.iter().copied().find(|k| k.replace('.', "") == short)
}

pub fn text(id: &str) -> Option<&'static str> {
    Some(match canonical(id)? {
        "5.1" => include_str!("../presets/ex51.json"),
        "5.2" => include_str!("../presets/ex52.json"),
        "5.3" => include_str!("../presets/ex53.json"),
        _ => include_str!("../presets/ex61.json"),
    })
}

pub fn load(id: &str) -> Result<RunConfig, CliError> {
    let text = text(id).ok_or_else(|| CliError::Usage {
        usage: format!("unknown example `{id}`; available: {}", IDS.join(", ")),
    })?;
    parse_config(text, None)
}

/// Stated values for a preset: eigenvalues of `A` in decreasing order and
/// the small-gain bound `-L d^2 / lambda`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceValues {
    pub eigenvalues: Vec<f64>,
    pub gain: f64,
}

pub fn reference_values(id: &str) -> Option<ReferenceValues> {
    let s2 = 2f64.sqrt();
    let s5 = 5f64.sqrt();
    match canonical(id)? {
        "5.1" => Some(ReferenceValues {
            eigenvalues: vec![(-3.0 + s5) / 2.0, -1.0, (-3.0 - s5) / 2.0],
            gain: 1.0 / (2.0 * (3.0 - s5)),
        }),
        "5.2" => Some(ReferenceValues {
            eigenvalues: vec![-1.0, -2.0, -3.0],
            gain: 9.0 / 16.0,
        }),
        "5.3" => Some(ReferenceValues {
            eigenvalues: vec![-2.0 + s2, -3.0, -2.0 - s2],
            gain: 9.0 / (16.0 * (2.0 - s2)),
        }),
        _ => None,
    }
}
