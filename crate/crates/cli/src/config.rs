//! Resolved run configuration: defaults, then a config file, then flags.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use hypokinetic::constants::CoefficientScheme;
use hypokinetic::ModelManifold;
use serde::ser::{Serialize, Serializer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Command {
    VerifyGamma,
    VerifyBrackets,
    Constants,
    Optimize,
    Regularization,
    Simulate,
    RateExperiment,
}

impl Command {
    pub const ALL: [Command; 7] = [
        Command::VerifyGamma,
        Command::VerifyBrackets,
        Command::Constants,
        Command::Optimize,
        Command::Regularization,
        Command::Simulate,
        Command::RateExperiment,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::VerifyGamma => "verify-gamma",
            Command::VerifyBrackets => "verify-brackets",
            Command::Constants => "constants",
            Command::Optimize => "optimize",
            Command::Regularization => "regularization",
            Command::Simulate => "simulate",
            Command::RateExperiment => "rate-experiment",
        }
    }

    pub fn about(self) -> &'static str {
        match self {
            Command::VerifyGamma => "Compare definitional and closed-form Γ₂/Σ₂ on seeded samples",
            Command::VerifyBrackets => "Check the frame-bundle bracket relations on seeded points",
            Command::Constants => "Build, validate and report the tensor coefficients",
            Command::Optimize => "Maximize the convergence rate over (epsilon, epsilon-prime)",
            Command::Regularization => "Build and certify the short-time regularization scheme",
            Command::Simulate => "Run a Monte Carlo ensemble and record observable means",
            Command::RateExperiment => "Compare the theoretical rate with a fitted simulation rate",
        }
    }

    pub fn from_name(s: &str) -> Option<Command> {
        Command::ALL.into_iter().find(|c| c.name() == s)
    }

    pub fn keys(self) -> Vec<KeySpec> {
        use Bound::*;
        use Kind::*;
        let k = KeySpec::new;
        let seed = k("seed", UInt, Some("0"), "Master random seed");
        let sigma = k("sigma", Float(Positive), Some("1"), "Vertical noise strength σ");
        let kappa = k("kappa", Float(Positive), Some("1"), "Geodesic speed κ");
        let params = || {
            vec![
                sigma.clone(),
                kappa.clone(),
                k("n", UInt, None, "Base dimension n ≥ 2"),
                k("M", Float(NonNegative), Some("0"), "Curvature bound M"),
            ]
        };
        let mut keys = match self {
            Command::VerifyGamma => vec![
                k("manifold", Manifold, None, "euclidean:N, flat-torus:N:L or sphere2:R"),
                sigma.clone(),
                kappa.clone(),
                k("samples", UInt, Some("50"), "Seeded (f, p) pairs per kind"),
                k("tol", Float(Positive), Some("1e-7"), "Relative residual tolerance"),
                k(
                    "kinds",
                    Texts,
                    Some("vv,vh,hh,xi,sigma-v,sigma-vxi"),
                    "Forms to certify",
                ),
            ],
            Command::VerifyBrackets => vec![
                k("manifold", Manifold, None, "euclidean:N, flat-torus:N:L or sphere2:R"),
                k("points", UInt, Some("100"), "Seeded frame points"),
                k("tol", Float(Positive), Some("1e-8"), "Absolute residual tolerance"),
            ],
            Command::Constants => {
                let mut v = params();
                v.extend([
                    k("epsilon", Float(OpenUnit), None, "ε in (0, 1)"),
                    k("epsilon-prime", Float(Positive), None, "ε′ > 0"),
                    k("scheme", Scheme, Some("proof-chain"), "proof-chain or consistent"),
                    k(
                        "lambda",
                        Float(Positive),
                        Some(""),
                        "Poincaré constant for a rate report",
                    ),
                    k(
                        "asymptotic-sigmas",
                        FloatList,
                        Some("100,1000,10000"),
                        "σ = κ values for the large-σ limit of K",
                    ),
                ]);
                v
            }
            Command::Optimize => {
                let mut v = params();
                v.extend([
                    k("lambda", Float(Positive), None, "Poincaré constant"),
                    k("grid", UInt, Some("32"), "Grid points per axis"),
                    k("iterations", UInt, Some("200"), "Nelder–Mead iterations"),
                    k("scheme", Scheme, Some("consistent"), "proof-chain or consistent"),
                ]);
                v
            }
            Command::Regularization => {
                let mut v = params();
                v.extend([
                    k(
                        "epsilon",
                        Float(OpenUnit),
                        Some("0.1"),
                        "ε of the proof chain supplying (a, b, c)",
                    ),
                    k(
                        "epsilon-prime",
                        Float(Positive),
                        Some("1"),
                        "ε′ of the proof chain supplying (a, b, c)",
                    ),
                    k("abc", FloatList, Some(""), "Explicit a,b,c instead of the proof chain"),
                    k(
                        "fit-tol",
                        Float(Positive),
                        Some("0.05"),
                        "Relative tolerance of the leading-order fits",
                    ),
                ]);
                v
            }
            Command::Simulate => vec![
                k("manifold", Manifold, None, "euclidean:N, flat-torus:N:L or sphere2:R"),
                sigma.clone(),
                kappa.clone(),
                k("dt", Float(Positive), Some("1e-3"), "Step size"),
                k("horizon", Float(Positive), None, "Final time"),
                k("paths", UInt, Some("10000"), "Ensemble size"),
                k("observables", Texts, Some("cos:0:1"), "cos:K:M, x:K, v:K or const:C"),
                k("initial", Text, Some("auto"), "uniform, point or auto"),
                k(
                    "initial-x",
                    FloatList,
                    Some(""),
                    "Start position (default origin, or (r,0,0) on spheres)",
                ),
                k(
                    "initial-angle",
                    Float(Any),
                    Some("0"),
                    "Rotation of e^0 towards e^1 at the start",
                ),
                k(
                    "fit-decay",
                    Bool,
                    Some("false"),
                    "Fit exponential decay rates of the observables",
                ),
                k(
                    "diffusivity-window",
                    FloatList,
                    Some(""),
                    "t0,t1 window for the diffusivity estimate",
                ),
            ],
            Command::RateExperiment => vec![
                k("manifold", Manifold, Some("flat-torus:2:1"), "Compact base"),
                sigma.clone(),
                kappa.clone(),
                k(
                    "lambda",
                    Float(Positive),
                    Some(""),
                    "Poincaré constant (default: spectral gap)",
                ),
                k("dt", Float(Positive), Some("1e-3"), "Step size"),
                k("horizon", Float(Positive), Some("50"), "Final time"),
                k("paths", UInt, Some("10000"), "Ensemble size"),
                k("observable", Text, Some("cos:0:1"), "Decaying observable"),
                k("initial-x", FloatList, Some(""), "Start position"),
                k(
                    "initial-angle",
                    Float(Any),
                    Some("0"),
                    "Rotation of e^0 towards e^1 at the start",
                ),
                k("grid", UInt, Some("32"), "Optimizer grid points per axis"),
                k("iterations", UInt, Some("200"), "Nelder–Mead iterations"),
            ],
        };
        keys.push(seed);
        keys
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bound {
    Any,
    Positive,
    NonNegative,
    OpenUnit,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Kind {
    Float(Bound),
    UInt,
    Bool,
    Text,
    Texts,
    FloatList,
    Manifold,
    Scheme,
}

impl Kind {
    pub fn hint(self) -> &'static str {
        match self {
            Kind::Float(_) => "REAL",
            Kind::UInt => "INT",
            Kind::Bool => "BOOL",
            Kind::Text => "TEXT",
            Kind::Texts => "A,B,..",
            Kind::FloatList => "X,Y,..",
            Kind::Manifold => "MANIFOLD",
            Kind::Scheme => "SCHEME",
        }
    }
}

/// One configuration key. A default of `Some("")` marks an optional key.
#[derive(Debug, Clone)]
pub struct KeySpec {
    pub name: &'static str,
    pub kind: Kind,
    pub default: Option<&'static str>,
    pub help: &'static str,
}

impl KeySpec {
    fn new(name: &'static str, kind: Kind, default: Option<&'static str>, help: &'static str) -> Self {
        KeySpec {
            name,
            kind,
            default,
            help,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Float(f64),
    UInt(u64),
    Bool(bool),
    Text(String),
    Texts(Vec<String>),
    FloatList(Vec<f64>),
    Manifold(ModelManifold),
    Scheme(CoefficientScheme),
}

impl Serialize for Value {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Value::Float(v) => s.serialize_f64(*v),
            Value::UInt(v) => s.serialize_u64(*v),
            Value::Bool(v) => s.serialize_bool(*v),
            Value::Text(v) => s.serialize_str(v),
            Value::Texts(v) => v.serialize(s),
            Value::FloatList(v) => v.serialize(s),
            Value::Manifold(m) => s.collect_str(m),
            Value::Scheme(c) => s.collect_str(c),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ConfigError {
    UnknownKey(String),
    MissingKey(String),
    Invalid { key: String, message: String },
    File { path: PathBuf, message: String },
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::UnknownKey(k) => write!(f, "unknown key '{k}'"),
            ConfigError::MissingKey(k) => write!(f, "missing required key '{k}'"),
            ConfigError::Invalid { key, message } => write!(f, "invalid value for '{key}': {message}"),
            ConfigError::File { path, message } => write!(f, "cannot read config {}: {message}", path.display()),
        }
    }
}

impl std::error::Error for ConfigError {}

fn invalid(key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        key: key.to_string(),
        message: message.into(),
    }
}

fn parse_float(key: &str, s: &str) -> Result<f64, ConfigError> {
    s.trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| invalid(key, format!("'{s}' is not a finite number")))
}

pub fn parse_value(spec: &KeySpec, raw: &str) -> Result<Value, ConfigError> {
    let key = spec.name;
    let list = |s: &str| -> Vec<String> {
        s.split(',')
            .map(|t| t.trim().to_string())
            .filter(|t| !t.is_empty())
            .collect()
    };
    Ok(match spec.kind {
        Kind::Float(bound) => {
            let v = parse_float(key, raw)?;
            let ok = match bound {
                Bound::Any => true,
                Bound::Positive => v > 0.0,
                Bound::NonNegative => v >= 0.0,
                Bound::OpenUnit => v > 0.0 && v < 1.0,
            };
            if !ok {
                let what = match bound {
                    Bound::Positive => "must be positive",
                    Bound::NonNegative => "must be nonnegative",
                    Bound::OpenUnit => "must lie in (0, 1)",
                    Bound::Any => unreachable!(),
                };
                return Err(invalid(key, format!("{v} {what}")));
            }
            Value::Float(v)
        }
        Kind::UInt => Value::UInt(
            raw.trim()
                .parse()
                .map_err(|_| invalid(key, format!("'{raw}' is not a nonnegative integer")))?,
        ),
        Kind::Bool => match raw.trim() {
            "true" | "1" | "yes" => Value::Bool(true),
            "false" | "0" | "no" => Value::Bool(false),
            _ => return Err(invalid(key, format!("'{raw}' is not a boolean"))),
        },
        Kind::Text => Value::Text(raw.trim().to_string()),
        Kind::Texts => Value::Texts(list(raw)),
        Kind::FloatList => Value::FloatList(
            list(raw)
                .iter()
                .map(|t| parse_float(key, t))
                .collect::<Result<_, _>>()?,
        ),
        Kind::Manifold => Value::Manifold(raw.trim().parse().map_err(|e| invalid(key, format!("{e}")))?),
        Kind::Scheme => Value::Scheme(raw.trim().parse().map_err(|e: String| invalid(key, e))?),
    })
}

/// `epsilon_prime` and `epsilon-prime` name the same key.
pub fn normalize_key(k: &str) -> String {
    k.trim().replace('_', "-")
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub values: BTreeMap<String, Value>,
    pub output: Option<PathBuf>,
    pub csv: Option<PathBuf>,
}

impl RunConfig {
    pub fn f64(&self, key: &str) -> f64 {
        match self.values.get(key) {
            Some(Value::Float(v)) => *v,
            Some(Value::UInt(v)) => *v as f64,
            other => panic!("key {key} is not numeric: {other:?}"),
        }
    }

    pub fn opt_f64(&self, key: &str) -> Option<f64> {
        self.values.contains_key(key).then(|| self.f64(key))
    }

    pub fn u64(&self, key: &str) -> u64 {
        match self.values.get(key) {
            Some(Value::UInt(v)) => *v,
            other => panic!("key {key} is not an integer: {other:?}"),
        }
    }

    pub fn usize(&self, key: &str) -> usize {
        self.u64(key) as usize
    }

    pub fn text(&self, key: &str) -> &str {
        match self.values.get(key) {
            Some(Value::Text(v)) => v,
            other => panic!("key {key} is not text: {other:?}"),
        }
    }

    pub fn texts(&self, key: &str) -> &[String] {
        match self.values.get(key) {
            Some(Value::Texts(v)) => v,
            other => panic!("key {key} is not a list: {other:?}"),
        }
    }

    pub fn floats(&self, key: &str) -> Option<&[f64]> {
        match self.values.get(key) {
            Some(Value::FloatList(v)) => Some(v),
            None => None,
            other => panic!("key {key} is not a list: {other:?}"),
        }
    }

    pub fn bool(&self, key: &str) -> bool {
        matches!(self.values.get(key), Some(Value::Bool(true)))
    }

    pub fn manifold(&self, key: &str) -> Option<ModelManifold> {
        match self.values.get(key) {
            Some(Value::Manifold(m)) => Some(*m),
            _ => None,
        }
    }

    pub fn scheme(&self) -> CoefficientScheme {
        match self.values.get("scheme") {
            Some(Value::Scheme(s)) => *s,
            other => panic!("scheme missing: {other:?}"),
        }
    }

    pub fn seed(&self) -> u64 {
        self.u64("seed")
    }
}

/// Raw `key = value` pairs from a file, with the command it names (if any).
pub struct FileConfig {
    pub command: Option<String>,
    pub pairs: Vec<(String, String)>,
}

fn json_to_raw(v: &serde_json::Value) -> String {
    match v {
        serde_json::Value::String(s) => s.clone(),
        serde_json::Value::Array(items) => items.iter().map(json_to_raw).collect::<Vec<_>>().join(","),
        other => other.to_string(),
    }
}

/// Reads a `key = value` file, a CSV written by this tool (config in `# key = value`
/// header lines), or a JSON record written by this tool (its `config` object).
pub fn read_file(path: &Path) -> Result<FileConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::File {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    if text.trim_start().starts_with('{') {
        let json: serde_json::Value = serde_json::from_str(&text).map_err(|e| ConfigError::File {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        let obj = json
            .get("config")
            .and_then(|c| c.as_object())
            .ok_or_else(|| ConfigError::File {
                path: path.to_path_buf(),
                message: "no 'config' object".into(),
            })?;
        return Ok(FileConfig {
            command: json.get("command").and_then(|c| c.as_str()).map(str::to_string),
            pairs: obj.iter().map(|(k, v)| (k.clone(), json_to_raw(v))).collect(),
        });
    }
    let embedded = text.starts_with("# hypokinetic ");
    let mut command = None;
    let mut pairs = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = if embedded {
            match line.strip_prefix('#') {
                Some(rest) => rest.trim(),
                None => break,
            }
        } else {
            line.split('#').next().unwrap_or("").trim()
        };
        if line.is_empty() {
            continue;
        }
        if embedded && lineno == 0 {
            command = line.strip_prefix("hypokinetic ").map(|c| c.trim().to_string());
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| ConfigError::File {
            path: path.to_path_buf(),
            message: format!("line {}: expected 'key = value'", lineno + 1),
        })?;
        pairs.push((normalize_key(k), v.trim().to_string()));
    }
    Ok(FileConfig { command, pairs })
}

/// Merges defaults, file pairs and flag pairs (in increasing priority).
pub fn resolve(
    command: Command,
    file: &[(String, String)],
    flags: &[(String, String)],
    output: Option<PathBuf>,
    csv: Option<PathBuf>,
) -> Result<RunConfig, ConfigError> {
    let specs = command.keys();
    let mut raw: BTreeMap<&str, String> = BTreeMap::new();
    for (k, v) in file.iter().chain(flags) {
        let spec = specs
            .iter()
            .find(|s| s.name == k)
            .ok_or_else(|| ConfigError::UnknownKey(k.clone()))?;
        raw.insert(spec.name, v.clone());
    }
    let mut values = BTreeMap::new();
    for spec in &specs {
        let text = match (raw.get(spec.name), spec.default) {
            (Some(v), _) => v.clone(),
            (None, Some(d)) => d.to_string(),
            (None, None) => return Err(ConfigError::MissingKey(spec.name.to_string())),
        };
        // Empty values leave optional keys unset.
        if text.trim().is_empty() && spec.default == Some("") {
            continue;
        }
        values.insert(spec.name.to_string(), parse_value(spec, &text)?);
    }
    Ok(RunConfig {
        command,
        values,
        output,
        csv,
    })
}
