//! Flat key-value configuration files.
//!
//! Keys match the parameter names; boundary units are per km^2 for
//! densities, dBm for transmit power, dB for gains, intercepts and the SIR
//! threshold, degrees for the beamwidth and metres or m/s elsewhere.
//!
//! ```text
//! lambda_b = 50          # GBSs per km^2
//! antenna = "omni"
//! r_max = 2000
//! policy = "nearest"
//! ```

use std::path::Path;

use toml::{Table, Value};

use crate::error::{Error, Result};
use crate::model::{db_from_linear, linear_from_db, watts_from_dbm, AntennaModel, SystemParams, DEFAULT_OMNI_RANGE_M};

const PER_KM2: f64 = 1e-6;

/// Every accepted key with its boundary unit.
pub const KEYS: &[(&str, &str)] = &[
    ("lambda_b", "GBSs per km^2"),
    ("p_t", "dBm"),
    ("g_b", "dB"),
    ("h_b", "m"),
    ("h_lb", "m"),
    ("h_ub", "m"),
    ("mu", "per km^2"),
    ("v", "m/s"),
    ("kappa", "probability"),
    ("t_thresh", "dB"),
    ("antenna", "\"directional\" or \"omni\""),
    ("beamwidth_deg", "degrees"),
    ("r_max", "m"),
    ("alpha_l", "exponent"),
    ("alpha_n", "exponent"),
    ("eta_l", "dB"),
    ("eta_n", "dB"),
    ("m_l", "positive integer"),
    ("m_n", "positive integer"),
    ("a", "environment parameter"),
    ("b", "environment parameter"),
    ("policy", "\"strongest_rss\" or \"nearest\""),
];

pub fn load_config(path: impl AsRef<Path>) -> Result<SystemParams> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    parse_config(&text)
}

/// Defaults overridden by the keys of `text`.
pub fn parse_config(text: &str) -> Result<SystemParams> {
    let table: Table = text.parse().map_err(|e: toml::de::Error| Error::Config(e.message().to_string()))?;
    let mut p = SystemParams::default();
    let mut antenna_kind: Option<String> = None;
    let mut beamwidth: Option<f64> = None;
    let mut r_max: Option<f64> = None;

    for (key, value) in &table {
        match key.as_str() {
            "lambda_b" => p.lambda_b = number(key, value)? * PER_KM2,
            "p_t" => p.p_t = watts_from_dbm(number(key, value)?)?,
            "g_b" => p.g_b = linear_from_db(number(key, value)?)?,
            "h_b" => p.h_b = number(key, value)?,
            "h_lb" => p.h_lb = number(key, value)?,
            "h_ub" => p.h_ub = number(key, value)?,
            "mu" => p.mu = number(key, value)? * PER_KM2,
            "v" => p.v = number(key, value)?,
            "kappa" => p.kappa = number(key, value)?,
            "t_thresh" => p.t_thresh = linear_from_db(number(key, value)?)?,
            "antenna" => antenna_kind = Some(string(key, value)?.to_string()),
            "beamwidth_deg" => beamwidth = Some(number(key, value)?),
            "r_max" => r_max = Some(number(key, value)?),
            "alpha_l" => p.channel.alpha_l = number(key, value)?,
            "alpha_n" => p.channel.alpha_n = number(key, value)?,
            "eta_l" => p.channel.eta_l = linear_from_db(number(key, value)?)?,
            "eta_n" => p.channel.eta_n = linear_from_db(number(key, value)?)?,
            "m_l" => p.channel.m_l = shape(key, value)?,
            "m_n" => p.channel.m_n = shape(key, value)?,
            "a" => p.env.a = number(key, value)?,
            "b" => p.env.b = number(key, value)?,
            "policy" => {
                p.policy = string(key, value)?
                    .parse()
                    .map_err(|_| Error::Config(format!("`policy`: expected \"strongest_rss\" or \"nearest\", got {value}")))?
            }
            _ => return Err(Error::Config(format!("unknown key `{key}`"))),
        }
    }

    let kind = antenna_kind.unwrap_or_else(|| {
        if r_max.is_some() && beamwidth.is_none() {
            "omni".into()
        } else {
            "directional".into()
        }
    });
    p.antenna = match kind.as_str() {
        "directional" => {
            if r_max.is_some() {
                return Err(Error::Config("`r_max` only applies to the omni antenna".into()));
            }
            AntennaModel::Directional {
                beamwidth_deg: beamwidth.unwrap_or(120.0),
            }
        }
        "omni" => {
            if beamwidth.is_some() {
                return Err(Error::Config("`beamwidth_deg` only applies to the directional antenna".into()));
            }
            AntennaModel::Omni {
                r_max: r_max.unwrap_or(DEFAULT_OMNI_RANGE_M),
            }
        }
        other => return Err(Error::Config(format!("`antenna`: expected \"directional\" or \"omni\", got \"{other}\""))),
    };

    p.validate().map_err(|e| match e {
        Error::InvalidParameter { name, reason } => Error::Config(format!("`{name}` {reason}")),
        other => other,
    })?;
    Ok(p)
}

/// Renders `p` in the boundary units read by [`parse_config`].
pub fn to_config_string(p: &SystemParams) -> String {
    let mut out = String::new();
    let mut line = |k: &str, v: String| out.push_str(&format!("{k} = {v}\n"));
    line("lambda_b", float(p.lambda_b / PER_KM2));
    line("p_t", float(db_from_linear(p.p_t) + 30.0));
    line("g_b", float(db_from_linear(p.g_b)));
    line("h_b", float(p.h_b));
    line("h_lb", float(p.h_lb));
    line("h_ub", float(p.h_ub));
    line("mu", float(p.mu / PER_KM2));
    line("v", float(p.v));
    line("kappa", float(p.kappa));
    line("t_thresh", float(db_from_linear(p.t_thresh)));
    match p.antenna {
        AntennaModel::Directional { beamwidth_deg } => {
            line("antenna", "\"directional\"".into());
            line("beamwidth_deg", float(beamwidth_deg));
        }
        AntennaModel::Omni { r_max } => {
            line("antenna", "\"omni\"".into());
            line("r_max", float(r_max));
        }
    }
    line("alpha_l", float(p.channel.alpha_l));
    line("alpha_n", float(p.channel.alpha_n));
    line("eta_l", float(db_from_linear(p.channel.eta_l)));
    line("eta_n", float(db_from_linear(p.channel.eta_n)));
    line("m_l", p.channel.m_l.to_string());
    line("m_n", p.channel.m_n.to_string());
    line("a", float(p.env.a));
    line("b", float(p.env.b));
    line("policy", format!("\"{}\"", p.policy.as_str()));
    out
}

fn float(x: f64) -> String {
    // keep a decimal point so the value reads back as a float
    let s = format!("{x:?}");
    if s.contains(['.', 'e', 'E']) || !x.is_finite() {
        s
    } else {
        format!("{s}.0")
    }
}

fn number(key: &str, value: &Value) -> Result<f64> {
    let x = match value {
        Value::Float(f) => *f,
        Value::Integer(i) => *i as f64,
        other => return Err(Error::Config(format!("`{key}`: expected a number, got {}", other.type_str()))),
    };
    if !x.is_finite() {
        return Err(Error::Config(format!("`{key}`: must be finite")));
    }
    Ok(x)
}

fn string<'a>(key: &str, value: &'a Value) -> Result<&'a str> {
    value
        .as_str()
        .ok_or_else(|| Error::Config(format!("`{key}`: expected a string, got {}", value.type_str())))
}

fn shape(key: &str, value: &Value) -> Result<u32> {
    match value {
        Value::Integer(i) if *i >= 1 && *i <= i64::from(u32::MAX) => Ok(*i as u32),
        _ => Err(Error::Config(format!("`{key}`: expected a positive integer"))),
    }
}
