//! INI run configuration.
//!
//! Sections and keys:
//!
//! ```text
//! [grid]          n                                   (required)
//! [coefficients]  nu l1 l2 l3 l4 a b c xi delta k_reg
//! [time]          dt t_end                            (required)
//! [init]          seed q_linf max_mode u_mode u_amp
//! [thresholds]    k1 k2 c_star
//! [output]        dir stride
//! ```

use std::path::PathBuf;

use ini::Ini;
use nematic_core::diagnostics::ThresholdConstants;
use nematic_core::field::{Coefficients, GridSpec};
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("syntax error: {0}")]
    Syntax(String),
    #[error("unknown section [{0}]")]
    UnknownSection(String),
    #[error("unknown key {section}.{key}")]
    UnknownKey { section: String, key: String },
    #[error("key {0} given more than once")]
    DuplicateKey(String),
    #[error("malformed value for {key}: {value:?}")]
    Malformed { key: String, value: String },
    #[error("missing required section [{0}]")]
    MissingSection(&'static str),
    #[error("missing required key {0}")]
    MissingKey(&'static str),
    #[error("invalid value for {key}: {reason}")]
    Invalid { key: &'static str, reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InitConfig {
    pub seed: u64,
    /// `max |Q₀|`; zero gives `Q₀ = 0`.
    pub q_linf: f64,
    /// Highest Fourier mode of `Q₀`; zero gives a spatially constant `Q₀`.
    pub max_mode: usize,
    /// Taylor–Green wavenumber of `u₀`; zero gives `u₀ = 0`.
    pub u_mode: u32,
    pub u_amp: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub n: usize,
    pub coefficients: Coefficients,
    pub dt: f64,
    pub t_end: f64,
    pub init: InitConfig,
    pub thresholds: ThresholdConstants,
    pub output_dir: PathBuf,
    pub stride: usize,
}

const SECTIONS: [(&str, &[&str]); 6] = [
    ("grid", &["n"]),
    (
        "coefficients",
        &["nu", "l1", "l2", "l3", "l4", "a", "b", "c", "xi", "delta", "k_reg"],
    ),
    ("time", &["dt", "t_end"]),
    ("init", &["seed", "q_linf", "max_mode", "u_mode", "u_amp"]),
    ("thresholds", &["k1", "k2", "c_star"]),
    ("output", &["dir", "stride"]),
];

impl RunConfig {
    /// Defaults for everything but the required keys.
    pub fn with_required(n: usize, dt: f64, t_end: f64) -> Self {
        Self {
            n,
            coefficients: Coefficients::default(),
            dt,
            t_end,
            init: InitConfig {
                seed: 1,
                q_linf: 0.3,
                max_mode: (n / 8).max(1),
                u_mode: 0,
                u_amp: 1.0,
            },
            thresholds: ThresholdConstants::default(),
            output_dir: PathBuf::from("out"),
            stride: 10,
        }
    }

    pub fn grid(&self) -> GridSpec {
        GridSpec::new(self.n).expect("validated at parse time")
    }

    /// Sets one `section.key` from its textual value, with the same parsing
    /// and validation as a config file.
    pub fn set(&mut self, dotted: &str, value: &str) -> Result<(), ConfigError> {
        let (section, key) = dotted.split_once('.').ok_or_else(|| ConfigError::UnknownKey {
            section: String::new(),
            key: dotted.to_string(),
        })?;
        let mut next = self.clone();
        next.assign(section, key, value)?;
        next.validate()?;
        *self = next;
        Ok(())
    }

    fn assign(&mut self, section: &str, key: &str, value: &str) -> Result<(), ConfigError> {
        let full = format!("{section}.{key}");
        let f = || parse_f64(&full, value);
        let u = || parse_u64(&full, value);
        let c = &mut self.coefficients;
        match (section, key) {
            ("grid", "n") => self.n = u()? as usize,
            ("coefficients", "nu") => c.nu = f()?,
            ("coefficients", "l1") => c.l1 = f()?,
            ("coefficients", "l2") => c.l2 = f()?,
            ("coefficients", "l3") => c.l3 = f()?,
            ("coefficients", "l4") => c.l4 = f()?,
            ("coefficients", "a") => c.a = f()?,
            ("coefficients", "b") => c.b = f()?,
            ("coefficients", "c") => c.c = f()?,
            ("coefficients", "xi") => c.xi = f()?,
            ("coefficients", "delta") => c.delta = f()?,
            ("coefficients", "k_reg") => {
                c.k_reg = u32::try_from(u()?).map_err(|_| malformed(&full, value))?
            }
            ("time", "dt") => self.dt = f()?,
            ("time", "t_end") => self.t_end = f()?,
            ("init", "seed") => self.init.seed = u()?,
            ("init", "q_linf") => self.init.q_linf = f()?,
            ("init", "max_mode") => self.init.max_mode = u()? as usize,
            ("init", "u_mode") => {
                self.init.u_mode = u32::try_from(u()?).map_err(|_| malformed(&full, value))?
            }
            ("init", "u_amp") => self.init.u_amp = f()?,
            ("thresholds", "k1") => self.thresholds.k1 = f()?,
            ("thresholds", "k2") => self.thresholds.k2 = f()?,
            ("thresholds", "c_star") => self.thresholds.c_star = f()?,
            ("output", "dir") => self.output_dir = PathBuf::from(value),
            ("output", "stride") => self.stride = u()? as usize,
            _ => {
                return Err(ConfigError::UnknownKey {
                    section: section.to_string(),
                    key: key.to_string(),
                })
            }
        }
        Ok(())
    }

    fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |key, reason: &str| {
            Err(ConfigError::Invalid {
                key,
                reason: reason.to_string(),
            })
        };
        if let Err(e) = GridSpec::new(self.n) {
            return invalid("grid.n", &e.to_string());
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return invalid("time.dt", "must be positive");
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return invalid("time.t_end", "must be positive");
        }
        let c = &self.coefficients;
        if !(c.delta >= 0.0) {
            return invalid("coefficients.delta", "must be non-negative");
        }
        if c.delta > 0.0 && (c.k_reg % 2 != 0 || c.k_reg < 4) {
            return invalid("coefficients.k_reg", "must be an even integer >= 4 when delta > 0");
        }
        if !(self.init.q_linf >= 0.0) {
            return invalid("init.q_linf", "must be non-negative");
        }
        if 3 * self.init.max_mode >= self.n {
            return invalid("init.max_mode", "must be below n/3");
        }
        if 3 * self.init.u_mode as usize >= self.n {
            return invalid("init.u_mode", "must be below n/3");
        }
        if self.stride == 0 {
            return invalid("output.stride", "must be at least 1");
        }
        Ok(())
    }

    pub fn to_ini_string(&self) -> String {
        let mut ini = Ini::new();
        let c = &self.coefficients;
        ini.with_section(Some("grid")).set("n", self.n.to_string());
        ini.with_section(Some("coefficients"))
            .set("nu", c.nu.to_string())
            .set("l1", c.l1.to_string())
            .set("l2", c.l2.to_string())
            .set("l3", c.l3.to_string())
            .set("l4", c.l4.to_string())
            .set("a", c.a.to_string())
            .set("b", c.b.to_string())
            .set("c", c.c.to_string())
            .set("xi", c.xi.to_string())
            .set("delta", c.delta.to_string())
            .set("k_reg", c.k_reg.to_string());
        ini.with_section(Some("time"))
            .set("dt", self.dt.to_string())
            .set("t_end", self.t_end.to_string());
        ini.with_section(Some("init"))
            .set("seed", self.init.seed.to_string())
            .set("q_linf", self.init.q_linf.to_string())
            .set("max_mode", self.init.max_mode.to_string())
            .set("u_mode", self.init.u_mode.to_string())
            .set("u_amp", self.init.u_amp.to_string());
        ini.with_section(Some("thresholds"))
            .set("k1", self.thresholds.k1.to_string())
            .set("k2", self.thresholds.k2.to_string())
            .set("c_star", self.thresholds.c_star.to_string());
        ini.with_section(Some("output"))
            .set("dir", self.output_dir.to_string_lossy())
            .set("stride", self.stride.to_string());
        let mut buf = Vec::new();
        ini.write_to(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ini output is UTF-8")
    }
}

fn malformed(key: &str, value: &str) -> ConfigError {
    ConfigError::Malformed {
        key: key.to_string(),
        value: value.to_string(),
    }
}

fn parse_f64(key: &str, value: &str) -> Result<f64, ConfigError> {
    value
        .trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| malformed(key, value))
}

fn parse_u64(key: &str, value: &str) -> Result<u64, ConfigError> {
    value.trim().parse::<u64>().map_err(|_| malformed(key, value))
}

pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let ini = Ini::load_from_str(text).map_err(|e| ConfigError::Syntax(e.to_string()))?;
    for (name, props) in ini.iter() {
        match name {
            None => {
                if let Some((key, _)) = props.iter().next() {
                    return Err(ConfigError::UnknownKey {
                        section: String::new(),
                        key: key.to_string(),
                    });
                }
            }
            Some(s) if !SECTIONS.iter().any(|(known, _)| *known == s) => {
                return Err(ConfigError::UnknownSection(s.to_string()))
            }
            Some(_) => {}
        }
    }
    for (section, _) in SECTIONS {
        if ini.section_all(Some(section)).count() > 1 {
            return Err(ConfigError::DuplicateKey(format!("[{section}]")));
        }
    }
    let grid = ini.section(Some("grid")).ok_or(ConfigError::MissingSection("grid"))?;
    let time = ini.section(Some("time")).ok_or(ConfigError::MissingSection("time"))?;
    let n = parse_u64("grid.n", grid.get("n").ok_or(ConfigError::MissingKey("grid.n"))?)? as usize;
    let dt = parse_f64("time.dt", time.get("dt").ok_or(ConfigError::MissingKey("time.dt"))?)?;
    let t_end = parse_f64(
        "time.t_end",
        time.get("t_end").ok_or(ConfigError::MissingKey("time.t_end"))?,
    )?;
    let mut cfg = RunConfig::with_required(n, dt, t_end);
    for (section, _) in SECTIONS {
        let Some(props) = ini.section(Some(section)) else {
            continue;
        };
        for (key, value) in props.iter() {
            if props.get_all(key).count() > 1 {
                return Err(ConfigError::DuplicateKey(format!("{section}.{key}")));
            }
            cfg.assign(section, key, value)?;
        }
    }
    cfg.validate()?;
    Ok(cfg)
}
