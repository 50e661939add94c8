//! Strict TOML experiment configuration.
//!
//! The parser walks the document against a fixed schema and collects every
//! violation (unknown section or key, wrong type, failed constraint, missing
//! field) before reporting, so one run surfaces all typos at once.

use bsq_core::dynamics::grid_index;
use bsq_core::{Forcing, ModeIndex, PhysParams};
use std::path::PathBuf;
use toml::{Table, Value};

#[derive(Clone, Debug, PartialEq)]
pub enum ObservableSpec {
    /// `⟨U, σ_{(1,0)}^0⟩`.
    Mode,
    Energy,
    Enstrophy,
}

#[derive(Clone, Debug, PartialEq)]
pub struct InitialSpec {
    /// Zero means the state at rest.
    pub amplitude: f64,
    pub radius: usize,
    pub decay: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProbeConfig {
    pub alpha: f64,
    pub n: usize,
    pub beta: f64,
    pub eta: f64,
    pub varsigma: f64,
    pub stages: usize,
    pub radius: usize,
    pub depth_cap: usize,
    pub interval: (f64, f64),
    pub horizons: Vec<f64>,
    pub observable: ObservableSpec,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub params: PhysParams,
    pub forced: Vec<ModeIndex>,
    pub n_trunc: usize,
    pub headroom: usize,
    pub dt: f64,
    pub horizon: f64,
    pub seed: u64,
    pub realizations: usize,
    /// Zero selects the rayon default.
    pub workers: usize,
    pub initial: InitialSpec,
    pub probe: ProbeConfig,
    pub out_dir: PathBuf,
}

const SCHEMA: &[(&str, &[&str])] = &[
    ("physics", &["nu1", "nu2", "g", "alpha", "forced"]),
    ("truncation", &["n_trunc", "headroom"]),
    ("integration", &["dt", "horizon"]),
    ("noise", &["seed", "realizations", "workers"]),
    ("initial", &["amplitude", "radius", "decay"]),
    ("probe", &["alpha", "n", "beta", "eta", "varsigma", "stages", "radius", "depth_cap", "s", "t", "horizons", "observable"]),
    ("output", &["dir"]),
];

struct Walker<'a> {
    root: &'a Table,
    errors: Vec<String>,
}

impl<'a> Walker<'a> {
    fn value(&self, section: &str, key: &str) -> Option<&'a Value> {
        self.root.get(section)?.as_table()?.get(key)
    }

    fn f64(&mut self, section: &str, key: &str, default: Option<f64>) -> f64 {
        match self.value(section, key) {
            Some(Value::Float(x)) => *x,
            Some(Value::Integer(i)) => *i as f64,
            Some(v) => {
                self.errors.push(format!("{section}.{key}: expected a number, found {}", v.type_str()));
                default.unwrap_or(f64::NAN)
            }
            None => default.unwrap_or_else(|| {
                self.errors.push(format!("{section}.{key}: missing required field"));
                f64::NAN
            }),
        }
    }

    fn int(&mut self, section: &str, key: &str, default: u64) -> u64 {
        match self.value(section, key) {
            Some(Value::Integer(i)) if *i >= 0 => *i as u64,
            Some(Value::Integer(i)) => {
                self.errors.push(format!("{section}.{key} = {i}: must be non-negative"));
                default
            }
            Some(v) => {
                self.errors.push(format!("{section}.{key}: expected an integer, found {}", v.type_str()));
                default
            }
            None => default,
        }
    }

    fn usize(&mut self, section: &str, key: &str, default: usize) -> usize {
        self.int(section, key, default as u64) as usize
    }

    fn string(&mut self, section: &str, key: &str, default: &str) -> String {
        match self.value(section, key) {
            Some(Value::String(s)) => s.clone(),
            Some(v) => {
                self.errors.push(format!("{section}.{key}: expected a string, found {}", v.type_str()));
                default.to_string()
            }
            None => default.to_string(),
        }
    }

    fn floats(&mut self, section: &str, key: &str, default: &[f64]) -> Vec<f64> {
        let Some(v) = self.value(section, key) else { return default.to_vec() };
        let parsed: Option<Vec<f64>> = v.as_array().and_then(|a| {
            a.iter()
                .map(|x| match x {
                    Value::Float(f) => Some(*f),
                    Value::Integer(i) => Some(*i as f64),
                    _ => None,
                })
                .collect()
        });
        parsed.unwrap_or_else(|| {
            self.errors.push(format!("{section}.{key}: expected an array of numbers"));
            default.to_vec()
        })
    }

    fn modes(&mut self, section: &str, key: &str, default: &[ModeIndex]) -> Vec<ModeIndex> {
        let Some(v) = self.value(section, key) else { return default.to_vec() };
        let parsed: Option<Vec<ModeIndex>> = v.as_array().and_then(|a| {
            a.iter()
                .map(|pair| match pair.as_array()?.as_slice() {
                    [Value::Integer(a), Value::Integer(b)] => Some(ModeIndex::new(i32::try_from(*a).ok()?, i32::try_from(*b).ok()?)),
                    _ => None,
                })
                .collect()
        });
        parsed.unwrap_or_else(|| {
            self.errors.push(format!("{section}.{key}: expected an array of [j1, j2] integer pairs"));
            default.to_vec()
        })
    }

    fn unknown_keys(&mut self) {
        for (section, value) in self.root {
            let Some((_, keys)) = SCHEMA.iter().find(|(s, _)| s == section) else {
                self.errors.push(format!("unknown section [{section}]"));
                continue;
            };
            let Some(table) = value.as_table() else {
                self.errors.push(format!("{section}: expected a table"));
                continue;
            };
            for key in table.keys() {
                if !keys.contains(&key.as_str()) {
                    self.errors.push(format!("unknown key {section}.{key}"));
                }
            }
        }
    }
}

/// Parses and validates a configuration, returning every violation on failure.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, Vec<String>> {
    let root: Table = text.parse().map_err(|e: toml::de::Error| vec![e.message().to_string()])?;
    let mut w = Walker { root: &root, errors: Vec::new() };
    w.unknown_keys();

    let nu1 = w.f64("physics", "nu1", None);
    let nu2 = w.f64("physics", "nu2", None);
    let g = w.f64("physics", "g", None);
    let amplitude = w.f64("physics", "alpha", Some(1.0));
    let forced = w.modes("physics", "forced", &[ModeIndex::new(1, 0), ModeIndex::new(0, 1)]);
    let forcing: Vec<Forcing> = forced
        .iter()
        .flat_map(|&index| (0..2).map(move |parity| Forcing { index, parity, alpha: amplitude }))
        .collect();
    let params = PhysParams::new(nu1, nu2, g).with_forcing(forcing);

    let n_trunc = w.usize("truncation", "n_trunc", 8);
    let headroom = w.usize("truncation", "headroom", 8);
    let dt = w.f64("integration", "dt", Some(0.01));
    let horizon = w.f64("integration", "horizon", Some(1.0));
    let seed = w.int("noise", "seed", 0);
    let realizations = w.usize("noise", "realizations", 1);
    let workers = w.usize("noise", "workers", 0);
    let initial = InitialSpec {
        amplitude: w.f64("initial", "amplitude", Some(0.0)),
        radius: w.usize("initial", "radius", 3),
        decay: w.f64("initial", "decay", Some(1.0)),
    };
    let observable = match w.string("probe", "observable", "mode").as_str() {
        "mode" => ObservableSpec::Mode,
        "energy" => ObservableSpec::Energy,
        "enstrophy" => ObservableSpec::Enstrophy,
        other => {
            w.errors.push(format!("probe.observable = {other:?}: expected \"mode\", \"energy\" or \"enstrophy\""));
            ObservableSpec::Mode
        }
    };
    let probe = ProbeConfig {
        alpha: w.f64("probe", "alpha", Some(0.5)),
        n: w.usize("probe", "n", 1),
        beta: w.f64("probe", "beta", Some(1.0)),
        eta: w.f64("probe", "eta", Some(0.1)),
        varsigma: w.f64("probe", "varsigma", Some(0.0)),
        stages: w.usize("probe", "stages", 10),
        radius: w.usize("probe", "radius", 2),
        depth_cap: w.usize("probe", "depth_cap", 64),
        interval: (w.f64("probe", "s", Some(0.0)), w.f64("probe", "t", Some(horizon))),
        horizons: w.floats("probe", "horizons", &[2.0, 4.0, 8.0, 16.0]),
        observable,
    };
    let out_dir = PathBuf::from(w.string("output", "dir", "bsq-out"));
    let mut errors = w.errors;

    // Missing coefficients are already reported.
    errors.extend(params.validate().into_iter().filter(|e| !e.contains("NaN")).map(|e| format!("physics: {e}")));
    for j in &forced {
        if j.max_norm() as usize > n_trunc {
            errors.push(format!("physics.forced: mode {j} lies outside truncation.n_trunc = {n_trunc}"));
        }
    }
    if n_trunc == 0 {
        errors.push("truncation.n_trunc must be at least 1".into());
    }
    if headroom < probe.n {
        errors.push(format!("truncation.headroom = {headroom} must be at least probe.n = {}", probe.n));
    }
    let positive = [
        ("integration.dt", dt),
        ("integration.horizon", horizon),
        ("probe.beta", probe.beta),
        ("probe.eta", probe.eta),
    ];
    for (name, x) in positive {
        if !(x > 0.0 && x.is_finite()) {
            errors.push(format!("{name} = {x} must be positive and finite"));
        }
    }
    if errors.is_empty() && grid_index(horizon, dt).is_err() {
        errors.push(format!("integration.horizon = {horizon} is not a multiple of dt = {dt}"));
    }
    if realizations == 0 {
        errors.push("noise.realizations must be at least 1".into());
    }
    if !(initial.amplitude >= 0.0 && initial.amplitude.is_finite()) {
        errors.push(format!("initial.amplitude = {} must be non-negative and finite", initial.amplitude));
    }
    if !(probe.alpha > 0.0 && probe.alpha <= 1.0) {
        errors.push(format!("probe.alpha = {} must lie in (0, 1]", probe.alpha));
    }
    if !(probe.varsigma >= 0.0) {
        errors.push(format!("probe.varsigma = {} must be non-negative", probe.varsigma));
    }
    if probe.stages == 0 || probe.stages % 2 != 0 {
        errors.push(format!("probe.stages = {} must be a positive even number", probe.stages));
    }
    let (s, t) = probe.interval;
    if !(0.0 <= s && s < t && t <= horizon) {
        errors.push(format!("probe.s = {s}, probe.t = {t}: need 0 <= s < t <= integration.horizon"));
    } else if grid_index(s, dt).is_err() || grid_index(t, dt).is_err() {
        errors.push(format!("probe.s = {s}, probe.t = {t}: must lie on the step grid dt = {dt}"));
    }
    if probe.horizons.is_empty() || probe.horizons.iter().any(|h| !(*h > 0.0)) || probe.horizons.windows(2).any(|w| w[1] <= w[0]) {
        errors.push(format!("probe.horizons = {:?} must be positive and strictly increasing", probe.horizons));
    }

    if !errors.is_empty() {
        return Err(errors);
    }
    Ok(ExperimentConfig {
        params,
        forced,
        n_trunc,
        headroom,
        dt,
        horizon,
        seed,
        realizations,
        workers,
        initial,
        probe,
        out_dir,
    })
}
