//! Experiment configuration: `key = value` lines grouped in sections.
//!
//! ```text
//! command = form
//! seed = 7
//!
//! [model gauss]
//! variant = product-1d
//! dimension = 3
//! marginal = normal(0, 1)
//!
//! [function eta]
//! kind = cutoff
//! coordinate = 1
//!
//! [form]
//! model = gauss
//! function = eta
//! alpha = 1
//! delta = 0.1
//! ```
//!
//! Keys before the first header are global. Named sections (`model`,
//! `function`, `scheme`, `table`) are referenced by name from command
//! sections; coordinates are 1-based throughout.

use std::fmt;
use std::str::FromStr;

use dirform::qr_check::ConditionId;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub line: usize,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

fn err(line: usize, message: impl Into<String>) -> ConfigError {
    ConfigError {
        line,
        message: message.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Eigen,
    Sample,
    Propagator,
    Form,
    Chain,
    QrReport,
    Verify,
}

impl Command {
    pub const ALL: [Command; 7] = [
        Command::Eigen,
        Command::Sample,
        Command::Propagator,
        Command::Form,
        Command::Chain,
        Command::QrReport,
        Command::Verify,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Command::Eigen => "eigen",
            Command::Sample => "sample",
            Command::Propagator => "propagator",
            Command::Form => "form",
            Command::Chain => "chain",
            Command::QrReport => "qr-report",
            Command::Verify => "verify",
        }
    }

    pub fn is_stochastic(&self) -> bool {
        !matches!(self, Command::Eigen | Command::Propagator)
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Command {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Command::ALL
            .iter()
            .find(|c| c.name() == s)
            .copied()
            .ok_or_else(|| format!("unknown command '{s}' (expected one of {})", command_list()))
    }
}

fn command_list() -> String {
    Command::ALL.iter().map(|c| c.name()).collect::<Vec<_>>().join(", ")
}

#[derive(Debug, Clone)]
pub struct Entry {
    pub key: String,
    pub value: String,
    pub line: usize,
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.key == other.key && self.value == other.value
    }
}

#[derive(Debug, Clone)]
pub struct Section {
    pub kind: String,
    pub name: Option<String>,
    pub line: usize,
    pub entries: Vec<Entry>,
}

impl PartialEq for Section {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind && self.name == other.name && self.entries == other.entries
    }
}

impl Section {
    pub fn get(&self, key: &str) -> Option<&Entry> {
        self.entries.iter().find(|e| e.key == key)
    }

    pub fn header(&self) -> String {
        match &self.name {
            Some(n) => format!("[{} {}]", self.kind, n),
            None => format!("[{}]", self.kind),
        }
    }
}

const GLOBAL_KEYS: [&str; 6] = ["command", "seed", "out", "threads", "blocks", "threshold"];

/// Allowed keys per section kind.
fn section_keys(kind: &str) -> Option<&'static [&'static str]> {
    Some(match kind {
        "model" => &[
            "variant", "dimension", "marginal", "marginals", "covariance", "table", "mass_sq", "basis", "d", "l",
            "eps", "lambda", "a_eps", "burn_in", "thin", "guard", "axes", "pmf",
        ],
        "function" => &["kind", "coordinate", "coordinates", "scale", "coefficients"],
        "scheme" => &["kind", "p", "beta", "gamma", "m0", "alpha", "length", "table", "tag"],
        "table" => &["d", "extent", "n", "k", "file"],
        "eigen" => &["d", "extent", "n", "k"],
        "sample" => &["model", "samples", "function"],
        "propagator" => &["d", "eps", "mass_sq", "sites", "periodic"],
        "form" => &[
            "model", "function", "other", "alpha", "delta", "samples", "coordinates", "deltas", "budget", "exact",
        ],
        "chain" => &["model", "function", "alpha", "delta", "horizon", "chains", "max_events", "dump"],
        "qr-report" => &["model", "scheme", "conditions", "n_terms", "samples", "m0_grid", "density_draws", "budget"],
        "verify" => &["criteria"],
        _ => return None,
    })
}

fn is_named_kind(kind: &str) -> bool {
    matches!(kind, "model" | "function" | "scheme" | "table")
}

/// Keys holding a reference to a named section of the given kind.
const REFERENCES: [(&str, &str); 5] = [
    ("model", "model"),
    ("function", "function"),
    ("other", "function"),
    ("scheme", "scheme"),
    ("table", "table"),
];

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub command: Command,
    pub seed: Option<u64>,
    pub out: Option<String>,
    pub threads: Option<usize>,
    /// Sample blocks per estimate; with the seed it fixes every output bit.
    pub blocks: Option<usize>,
    /// Increment threshold of quasi-regularity verdicts.
    pub threshold: Option<f64>,
    pub globals: Vec<Entry>,
    pub sections: Vec<Section>,
}

impl PartialEq for ExperimentConfig {
    fn eq(&self, other: &Self) -> bool {
        self.globals == other.globals && self.sections == other.sections
    }
}

pub const DEFAULT_BLOCKS: usize = 8;
pub const DEFAULT_THRESHOLD: f64 = 1e-6;

impl ExperimentConfig {
    pub fn blocks(&self) -> usize {
        self.blocks.unwrap_or(DEFAULT_BLOCKS)
    }

    pub fn threshold(&self) -> f64 {
        self.threshold.unwrap_or(DEFAULT_THRESHOLD)
    }

    /// The section of the active command, if present.
    pub fn command_section(&self) -> Option<&Section> {
        self.sections.iter().find(|s| s.kind == self.command.name())
    }

    pub fn named(&self, kind: &str, name: &str) -> Option<&Section> {
        self.sections
            .iter()
            .find(|s| s.kind == kind && s.name.as_deref() == Some(name))
    }

    /// Replaces the seed, as `--seed` does.
    pub fn set_seed(&mut self, seed: u64) {
        self.seed = Some(seed);
        set_global(&mut self.globals, "seed", seed.to_string());
    }

    pub fn set_out(&mut self, out: &str) {
        self.out = Some(out.to_string());
        set_global(&mut self.globals, "out", out.to_string());
    }

    pub fn set_threads(&mut self, k: usize) {
        self.threads = Some(k);
        set_global(&mut self.globals, "threads", k.to_string());
    }
}

fn set_global(globals: &mut Vec<Entry>, key: &str, value: String) {
    match globals.iter_mut().find(|e| e.key == key) {
        Some(e) => e.value = value,
        None => {
            globals.push(Entry {
                key: key.into(),
                value,
                line: 0,
            });
            globals.sort_by_key(|e| GLOBAL_KEYS.iter().position(|k| *k == e.key));
        }
    }
}

/// Canonical text: globals in fixed order, then sections as given.
/// Parsing the output yields an equal configuration.
impl fmt::Display for ExperimentConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for e in &self.globals {
            writeln!(f, "{} = {}", e.key, e.value)?;
        }
        for s in &self.sections {
            writeln!(f)?;
            writeln!(f, "{}", s.header())?;
            for e in &s.entries {
                writeln!(f, "{} = {}", e.key, e.value)?;
            }
        }
        Ok(())
    }
}

/// Parses and validates; every problem found is reported.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, Vec<ConfigError>> {
    parse_config_with(text, Overrides::default())
}

/// Command-line values applied before validation.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    /// Supplies the command when the text has none; must agree otherwise.
    pub command: Option<Command>,
    /// Replaces the seed.
    pub seed: Option<u64>,
}

/// As [`parse_config`], with command-line overrides.
pub fn parse_config_with(text: &str, overrides: Overrides) -> Result<ExperimentConfig, Vec<ConfigError>> {
    let mut errors = Vec::new();
    let (mut globals, sections) = lex(text, &mut errors);
    if let Some(seed) = overrides.seed {
        set_global(&mut globals, "seed", seed.to_string());
    }
    let command = overrides.command;

    if let Some(c) = command {
        match globals.iter().find(|e| e.key == "command") {
            Some(e) if e.value != c.name() => errors.push(err(
                e.line,
                format!("config is for command '{}', invoked as '{c}'", e.value),
            )),
            Some(_) => {}
            None => set_global(&mut globals, "command", c.name().into()),
        }
    }

    let command_entry = globals.iter().find(|e| e.key == "command").cloned();
    let command = match &command_entry {
        None => {
            errors.insert(0, err(1, "missing command"));
            None
        }
        Some(e) => match e.value.parse::<Command>() {
            Ok(c) => Some(c),
            Err(m) => {
                errors.push(err(e.line, m));
                None
            }
        },
    };
    let global = |key: &str| globals.iter().find(|e| e.key == key);
    let seed = global("seed").and_then(|e| parse_value::<u64>(e, &mut errors));
    let threads = global("threads").and_then(|e| parse_value::<usize>(e, &mut errors));
    let blocks = global("blocks").and_then(|e| parse_value::<usize>(e, &mut errors));
    let threshold = global("threshold").and_then(|e| parse_value::<f64>(e, &mut errors));
    if let (Some(0), Some(e)) = (threads, global("threads")) {
        errors.push(err(e.line, "threads must be >= 1"));
    }
    if let (Some(0), Some(e)) = (blocks, global("blocks")) {
        errors.push(err(e.line, "blocks must be >= 1"));
    }
    if let (Some(t), Some(e)) = (threshold, global("threshold")) {
        if !(t > 0.0 && t.is_finite()) {
            errors.push(err(e.line, "threshold must be > 0"));
        }
    }
    let out = global("out").map(|e| e.value.clone());

    if let (Some(c), Some(e)) = (command, &command_entry) {
        if c.is_stochastic() && seed.is_none() && global("seed").is_none() {
            errors.push(err(e.line, format!("missing seed (required by command '{c}')")));
        }
    }

    for s in &sections {
        for (key, kind) in REFERENCES {
            let Some(e) = s.get(key) else { continue };
            if !sections.iter().any(|t| t.kind == kind && t.name.as_deref() == Some(e.value.as_str())) {
                errors.push(err(e.line, format!("{key} '{}' is not defined", e.value)));
            }
        }
    }

    let cfg = command.map(|command| ExperimentConfig {
        command,
        seed,
        out,
        threads,
        blocks,
        threshold,
        globals,
        sections,
    });
    if let Some(cfg) = &cfg {
        if cfg.command != Command::Verify && cfg.command_section().is_none() {
            errors.push(err(
                command_entry.as_ref().map_or(1, |e| e.line),
                format!("missing section [{}]", cfg.command),
            ));
        }
        crate::defs::check(cfg, &mut errors);
    }
    if errors.is_empty() {
        Ok(cfg.expect("command present when error-free"))
    } else {
        errors.sort_by_key(|e| e.line);
        Err(errors)
    }
}

fn parse_value<T: FromStr>(e: &Entry, errors: &mut Vec<ConfigError>) -> Option<T> {
    match e.value.parse::<T>() {
        Ok(v) => Some(v),
        Err(_) => {
            errors.push(err(e.line, format!("invalid value '{}' for {}", e.value, e.key)));
            None
        }
    }
}

fn lex(text: &str, errors: &mut Vec<ConfigError>) -> (Vec<Entry>, Vec<Section>) {
    let mut globals: Vec<Entry> = Vec::new();
    let mut sections: Vec<Section> = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        if let Some(inner) = body.strip_prefix('[') {
            let Some(inner) = inner.strip_suffix(']') else {
                errors.push(err(line, format!("malformed section header '{body}'")));
                continue;
            };
            let mut parts = inner.split_whitespace();
            let kind = parts.next().unwrap_or("").to_string();
            let name = parts.next().map(str::to_string);
            if parts.next().is_some() {
                errors.push(err(line, format!("malformed section header '{body}'")));
            }
            if section_keys(&kind).is_none() {
                errors.push(err(line, format!("unknown section kind '{kind}'")));
            } else if is_named_kind(&kind) && name.is_none() {
                errors.push(err(line, format!("section [{kind}] needs a name")));
            } else if !is_named_kind(&kind) && name.is_some() {
                errors.push(err(line, format!("section [{kind}] takes no name")));
            }
            if let Some(prev) = sections.iter().find(|s| s.kind == kind && s.name == name) {
                errors.push(err(
                    line,
                    format!("duplicate section {} (lines {} and {line})", prev.header(), prev.line),
                ));
            }
            sections.push(Section {
                kind,
                name,
                line,
                entries: Vec::new(),
            });
            continue;
        }
        let Some((key, value)) = body.split_once('=') else {
            errors.push(err(line, format!("expected 'key = value', got '{body}'")));
            continue;
        };
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        let (target, allowed, place): (&mut Vec<Entry>, &[&str], String) = match sections.last_mut() {
            Some(s) => {
                let place = s.header();
                (&mut s.entries, section_keys(&s.kind).unwrap_or(&[]), place)
            }
            None => (&mut globals, &GLOBAL_KEYS, "global scope".into()),
        };
        if !allowed.contains(&key.as_str()) {
            errors.push(err(line, format!("unknown key '{key}' in {place}")));
            continue;
        }
        if value.is_empty() {
            errors.push(err(line, format!("empty value for '{key}'")));
            continue;
        }
        if let Some(prev) = target.iter().find(|e| e.key == key) {
            errors.push(err(line, format!("duplicate key '{key}' (lines {} and {line})", prev.line)));
            continue;
        }
        target.push(Entry { key, value, line });
    }
    globals.sort_by_key(|e| GLOBAL_KEYS.iter().position(|k| *k == e.key));
    (globals, sections)
}

/// Comma-separated reals.
pub fn parse_list(value: &str) -> Result<Vec<f64>, String> {
    value
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| format!("'{}' is not a number", t.trim())))
        .collect()
}

/// Comma-separated condition ids, or `all`.
pub fn parse_conditions(value: &str) -> Result<Vec<ConditionId>, String> {
    if value.trim() == "all" {
        return Ok(ConditionId::ALL.to_vec());
    }
    value
        .split(',')
        .map(|t| t.trim().parse::<ConditionId>().map_err(|e| e.to_string()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const FORM: &str = "\
command = form
seed = 7

[model gauss]
variant = product-1d
dimension = 2
marginal = normal(0, 1)

[function eta]
kind = cutoff
coordinate = 1

[form]
model = gauss
function = eta
alpha = 1
delta = 0.1
";

    #[test]
    fn empty_text_is_missing_command() {
        let e = parse_config("").unwrap_err();
        assert_eq!(e[0].message, "missing command");
    }

    #[test]
    fn minimal_form_round_trips() {
        let cfg = parse_config(FORM).unwrap();
        assert_eq!(cfg.command, Command::Form);
        assert_eq!(cfg.seed, Some(7));
        let text = cfg.to_string();
        let again = parse_config(&text).unwrap();
        assert_eq!(again, cfg);
        assert_eq!(again.to_string(), text);
    }

    #[test]
    fn duplicate_key_names_both_lines() {
        let text = FORM.replace("alpha = 1\n", "alpha = 1\nalpha = 0.5\n");
        let e = parse_config(&text).unwrap_err();
        let dup = e.iter().find(|e| e.message.contains("duplicate key 'alpha'")).unwrap();
        assert!(dup.message.contains("lines 16 and 17"), "{dup}");
        assert_eq!(dup.line, 17);
    }

    #[test]
    fn collects_every_error() {
        let text = FORM
            .replace("seed = 7\n", "")
            .replace("model = gauss", "model = nowhere")
            .replace("kind = cutoff", "kind = cutoff\ncolour = red");
        let e = parse_config(&text).unwrap_err();
        let msgs: Vec<String> = e.iter().map(|e| e.to_string()).collect();
        assert!(msgs.iter().any(|m| m.starts_with("line 1:") && m.contains("missing seed")), "{msgs:?}");
        assert!(msgs.iter().any(|m| m.contains("unknown key 'colour'")), "{msgs:?}");
        assert!(msgs.iter().any(|m| m.contains("model 'nowhere' is not defined")), "{msgs:?}");
        assert!(e.windows(2).all(|w| w[0].line <= w[1].line));
    }

    #[test]
    fn deterministic_commands_need_no_seed() {
        let text = "command = propagator\n[propagator]\nd = 1\neps = 1\nmass_sq = 1\nsites = 0\n";
        assert!(parse_config(text).is_ok());
    }

    #[test]
    fn unknown_command() {
        let e = parse_config("command = dance\n").unwrap_err();
        assert!(e[0].message.contains("unknown command 'dance'"));
    }

    #[test]
    fn seed_override_is_serialized() {
        let mut cfg = parse_config(FORM).unwrap();
        cfg.set_seed(99);
        let again = parse_config(&cfg.to_string()).unwrap();
        assert_eq!(again.seed, Some(99));
    }

    #[test]
    fn command_supplied_by_caller() {
        let text = FORM.replace("command = form\n", "");
        assert!(parse_config(&text).is_err());
        let form = Overrides {
            command: Some(Command::Form),
            seed: None,
        };
        assert_eq!(parse_config_with(&text, form).unwrap().command, Command::Form);
        let chain = Overrides {
            command: Some(Command::Chain),
            seed: None,
        };
        assert!(parse_config_with(FORM, chain).is_err());
    }

    #[test]
    fn seed_override_satisfies_requirement() {
        let text = FORM.replace("seed = 7\n", "");
        let cfg = parse_config_with(
            &text,
            Overrides {
                command: None,
                seed: Some(3),
            },
        )
        .unwrap();
        assert_eq!(cfg.seed, Some(3));
    }
}
