//! Typed views of config sections.

use std::str::FromStr;

use dirform::qr_check::ConditionId;

use crate::config::{parse_conditions, parse_list, Command, ConfigError, ExperimentConfig, Section};

struct Reader<'a> {
    s: &'a Section,
    errors: &'a mut Vec<ConfigError>,
}

impl<'a> Reader<'a> {
    fn new(s: &'a Section, errors: &'a mut Vec<ConfigError>) -> Self {
        Self { s, errors }
    }

    fn fail(&mut self, line: usize, msg: String) {
        self.errors.push(ConfigError { line, message: msg });
    }

    fn with<T>(&mut self, key: &str, required: bool, f: impl FnOnce(&str) -> Result<T, String>) -> Option<T> {
        match self.s.get(key) {
            None => {
                if required {
                    let msg = format!("missing key '{key}' in {}", self.s.header());
                    self.fail(self.s.line, msg);
                }
                None
            }
            Some(e) => match f(&e.value) {
                Ok(v) => Some(v),
                Err(m) => {
                    let line = e.line;
                    self.fail(line, format!("{key}: {m}"));
                    None
                }
            },
        }
    }

    fn req<T: FromStr>(&mut self, key: &str) -> Option<T> {
        self.with(key, true, scalar)
    }

    fn opt<T: FromStr>(&mut self, key: &str) -> Option<T> {
        self.with(key, false, scalar)
    }

    fn coordinate(&mut self, key: &str, required: bool) -> Option<usize> {
        self.with(key, required, coordinate)
    }

    fn text(&mut self, key: &str) -> Option<String> {
        self.s.get(key).map(|e| e.value.clone())
    }
}

fn scalar<T: FromStr>(v: &str) -> Result<T, String> {
    v.parse::<T>().map_err(|_| format!("invalid value '{v}'"))
}

/// 1-based coordinate to 0-based index.
fn coordinate(v: &str) -> Result<usize, String> {
    match v.parse::<usize>() {
        Ok(i) if i >= 1 => Ok(i - 1),
        _ => Err(format!("coordinates are 1-based integers, got '{v}'")),
    }
}

fn coordinates(v: &str) -> Result<Vec<usize>, String> {
    v.split(',').map(|t| coordinate(t.trim())).collect()
}

/// Semicolon-separated rows of comma-separated reals.
fn rows(v: &str) -> Result<Vec<Vec<f64>>, String> {
    v.split(';').map(parse_list).collect()
}

/// `name(a, b, ...)` into its name and raw argument string.
fn call(v: &str) -> Result<(&str, &str), String> {
    let open = v.find('(').ok_or_else(|| format!("expected name(args), got '{v}'"))?;
    let inner = v[open + 1..]
        .strip_suffix(')')
        .ok_or_else(|| format!("unclosed parenthesis in '{v}'"))?;
    Ok((v[..open].trim(), inner))
}

#[derive(Debug, Clone, PartialEq)]
pub enum MarginalDef {
    Normal { mean: f64, sd: f64 },
    Uniform { lo: f64, hi: f64 },
    Atoms { locs: Vec<f64>, masses: Vec<f64> },
}

fn marginal(v: &str) -> Result<MarginalDef, String> {
    let (name, args) = call(v.trim())?;
    match name {
        "normal" | "uniform" => {
            let a = parse_list(args)?;
            if a.len() != 2 {
                return Err(format!("{name} takes two arguments"));
            }
            Ok(if name == "normal" {
                MarginalDef::Normal { mean: a[0], sd: a[1] }
            } else {
                MarginalDef::Uniform { lo: a[0], hi: a[1] }
            })
        }
        "atoms" => {
            let mut locs = Vec::new();
            let mut masses = Vec::new();
            for pair in args.split(',') {
                let (x, m) = pair
                    .split_once(':')
                    .ok_or_else(|| format!("atoms take location:mass pairs, got '{}'", pair.trim()))?;
                locs.push(scalar::<f64>(x.trim())?);
                masses.push(scalar::<f64>(m.trim())?);
            }
            Ok(MarginalDef::Atoms { locs, masses })
        }
        _ => Err(format!("unknown marginal '{name}' (normal, uniform, atoms)")),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CovarianceDef {
    Matrix(Vec<Vec<f64>>),
    FreeField { table: String, mass_sq: f64, basis: Option<usize> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Phi4Def {
    pub d: usize,
    pub l: usize,
    pub eps: f64,
    pub mass_sq: f64,
    pub lambda: f64,
    pub a_eps: Option<f64>,
    pub burn_in: usize,
    pub thin: usize,
    pub guard: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelDef {
    Product(Vec<MarginalDef>),
    Correlated(CovarianceDef),
    Phi4(Phi4Def),
    Discrete { axes: Vec<Vec<f64>>, pmf: Option<Vec<f64>> },
}

pub fn model_def(s: &Section, errors: &mut Vec<ConfigError>) -> Option<ModelDef> {
    let mut r = Reader::new(s, errors);
    let variant = r.req::<String>("variant")?;
    match variant.as_str() {
        "product-1d" => {
            if let Some(list) = r.with("marginals", false, |v| v.split(';').map(marginal).collect::<Result<Vec<_>, _>>()) {
                return Some(ModelDef::Product(list));
            }
            let n = r.req::<usize>("dimension");
            let m = r.with("marginal", true, marginal);
            Some(ModelDef::Product(vec![m?; n?]))
        }
        "correlated-gaussian" => {
            let cov = r.req::<String>("covariance")?;
            if cov == "free-field" {
                let table = r.text("table");
                if table.is_none() {
                    r.fail(s.line, "free-field covariance needs 'table'".into());
                }
                let mass_sq = r.opt::<f64>("mass_sq").unwrap_or(1.0);
                let basis = r.opt::<usize>("basis");
                Some(ModelDef::Correlated(CovarianceDef::FreeField {
                    table: table?,
                    mass_sq,
                    basis,
                }))
            } else {
                r.with("covariance", true, rows).map(|m| ModelDef::Correlated(CovarianceDef::Matrix(m)))
            }
        }
        "lattice-phi4" => {
            let d = r.req("d");
            let l = r.req("l");
            let eps = r.opt("eps").unwrap_or(1.0);
            let mass_sq = r.req("mass_sq");
            let lambda = r.req("lambda");
            let a_eps = r.opt("a_eps");
            let burn_in = r.opt("burn_in").unwrap_or(1000);
            let thin = r.opt("thin").unwrap_or(1);
            let guard = r.opt("guard").unwrap_or(1e3);
            Some(ModelDef::Phi4(Phi4Def {
                d: d?,
                l: l?,
                eps,
                mass_sq: mass_sq?,
                lambda: lambda?,
                a_eps,
                burn_in,
                thin,
                guard,
            }))
        }
        "discrete-test" => {
            let axes = r.with("axes", true, rows);
            let pmf = r.with("pmf", false, parse_list);
            Some(ModelDef::Discrete { axes: axes?, pmf })
        }
        other => {
            let line = s.get("variant").map_or(s.line, |e| e.line);
            r.fail(
                line,
                format!("unknown variant '{other}' (product-1d, correlated-gaussian, lattice-phi4, discrete-test)"),
            );
            None
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FunctionDef {
    Coordinate(usize),
    Cutoff { coordinate: usize, scale: f64 },
    ProductOfCutoffs { coordinates: Vec<usize>, scale: f64 },
    Polynomial { coordinate: usize, coefficients: Vec<f64> },
}

pub fn function_def(s: &Section, errors: &mut Vec<ConfigError>) -> Option<FunctionDef> {
    let mut r = Reader::new(s, errors);
    let kind = r.req::<String>("kind")?;
    let scale = r.opt::<f64>("scale").unwrap_or(1.0);
    match kind.as_str() {
        "coordinate" => r.coordinate("coordinate", true).map(FunctionDef::Coordinate),
        "cutoff" => r
            .coordinate("coordinate", true)
            .map(|coordinate| FunctionDef::Cutoff { coordinate, scale }),
        "product-of-cutoffs" => r
            .with("coordinates", true, coordinates)
            .map(|coordinates| FunctionDef::ProductOfCutoffs { coordinates, scale }),
        "polynomial" => {
            let c = r.coordinate("coordinate", true);
            let k = r.with("coefficients", true, parse_list);
            Some(FunctionDef::Polynomial {
                coordinate: c?,
                coefficients: k?,
            })
        }
        other => {
            let line = s.get("kind").map_or(s.line, |e| e.line);
            r.fail(
                line,
                format!("unknown function kind '{other}' (coordinate, cutoff, product-of-cutoffs, polynomial)"),
            );
            None
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TableDef {
    Grid { d: usize, extent: f64, n: usize, k: usize },
    /// Records written by the `eigen` command.
    File(String),
}

pub fn table_def(s: &Section, errors: &mut Vec<ConfigError>) -> Option<TableDef> {
    let mut r = Reader::new(s, errors);
    if let Some(path) = r.text("file") {
        return Some(TableDef::File(path));
    }
    grid_fields(&mut r)
}

fn grid_fields(r: &mut Reader) -> Option<TableDef> {
    let d = r.opt("d").unwrap_or(1);
    let extent = r.req("extent");
    let n = r.req("n");
    let k = r.req("k");
    Some(TableDef::Grid {
        d,
        extent: extent?,
        n: n?,
        k: k?,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum SeqDef {
    Constant(f64),
    Power(f64),
    Eigen(i32),
}

fn sequence(v: &str) -> Result<SeqDef, String> {
    let (name, arg) = call(v.trim())?;
    match name {
        "constant" => Ok(SeqDef::Constant(scalar(arg.trim())?)),
        "power" => Ok(SeqDef::Power(scalar(arg.trim())?)),
        "eigen" => Ok(SeqDef::Eigen(scalar(arg.trim())?)),
        _ => Err(format!("unknown sequence '{name}' (constant, power, eigen)")),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SchemeKindDef {
    Lp(f64),
    Linf,
    Rn,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SchemeDef {
    FreeField {
        m: i32,
        table: String,
        m0: f64,
        alpha: f64,
    },
    Manual {
        kind: SchemeKindDef,
        beta: SeqDef,
        gamma: SeqDef,
        length: Option<usize>,
        table: Option<String>,
        m0: f64,
        alpha: f64,
    },
}

pub fn scheme_def(s: &Section, errors: &mut Vec<ConfigError>) -> Option<SchemeDef> {
    let mut r = Reader::new(s, errors);
    let alpha = r.req::<f64>("alpha");
    let m0 = r.opt::<f64>("m0").unwrap_or(1.0);
    let table = r.text("table");
    if let Some(tag) = r.text("tag") {
        let m = match tag.as_str() {
            "free-field-m(-2)" => -2,
            "free-field-m(-3)" => -3,
            _ => {
                let line = s.get("tag").map_or(s.line, |e| e.line);
                r.fail(line, format!("unknown scheme tag '{tag}' (free-field-m(-2), free-field-m(-3))"));
                return None;
            }
        };
        if table.is_none() {
            r.fail(s.line, "free-field schemes need 'table'".into());
        }
        return Some(SchemeDef::FreeField {
            m,
            table: table?,
            m0,
            alpha: alpha?,
        });
    }
    let kind = r.with("kind", true, |v| match v {
        "lp" => Ok(None),
        "linf" => Ok(Some(SchemeKindDef::Linf)),
        "rn" => Ok(Some(SchemeKindDef::Rn)),
        _ => Err(format!("unknown scheme kind '{v}' (lp, linf, rn)")),
    });
    let kind = match kind? {
        Some(k) => k,
        None => SchemeKindDef::Lp(r.req::<f64>("p")?),
    };
    let beta = r.with("beta", true, sequence);
    let gamma = r.with("gamma", true, sequence);
    let length = r.opt::<usize>("length");
    let (beta, gamma) = (beta?, gamma?);
    let needs_table = matches!(beta, SeqDef::Eigen(_)) || matches!(gamma, SeqDef::Eigen(_));
    if needs_table && table.is_none() {
        r.fail(s.line, "eigen(m) sequences need 'table'".into());
        return None;
    }
    if !needs_table && length.is_none() {
        r.fail(s.line, "schemes without an eigen table need 'length'".into());
        return None;
    }
    Some(SchemeDef::Manual {
        kind,
        beta,
        gamma,
        length,
        table,
        m0,
        alpha: alpha?,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleCmd {
    pub model: String,
    pub samples: usize,
    pub function: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropagatorCmd {
    pub d: usize,
    pub eps: f64,
    pub mass_sq: f64,
    pub sites: Vec<Vec<i64>>,
    pub periodic: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FormCmd {
    pub model: String,
    pub function: String,
    pub other: Option<String>,
    pub alpha: f64,
    pub delta: f64,
    pub samples: usize,
    pub coordinates: Option<Vec<usize>>,
    pub deltas: Option<Vec<f64>>,
    pub budget: u128,
    pub exact: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainCmd {
    pub model: String,
    pub function: Option<String>,
    pub alpha: f64,
    pub delta: f64,
    pub horizon: f64,
    pub chains: usize,
    pub max_events: usize,
    pub dump: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QrCmd {
    pub model: String,
    pub scheme: String,
    pub conditions: Vec<ConditionId>,
    pub n_terms: Option<usize>,
    pub samples: usize,
    pub m0_grid: Vec<f64>,
    pub density_draws: usize,
    pub budget: u128,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CommandDef {
    Eigen(TableDef),
    Sample(SampleCmd),
    Propagator(PropagatorCmd),
    Form(FormCmd),
    Chain(ChainCmd),
    QrReport(QrCmd),
    Verify(Vec<u32>),
}

pub const DEFAULT_BUDGET: u128 = 1 << 32;

fn sites(v: &str) -> Result<Vec<Vec<i64>>, String> {
    v.split(';')
        .map(|row| {
            row.split(',')
                .map(|t| scalar::<i64>(t.trim()))
                .collect::<Result<Vec<_>, _>>()
        })
        .collect()
}

fn criteria(v: &str) -> Result<Vec<u32>, String> {
    if v.trim() == "all" {
        return Ok((1..=13).collect());
    }
    v.split(',')
        .map(|t| match t.trim().parse::<u32>() {
            Ok(k) if (1..=13).contains(&k) => Ok(k),
            _ => Err(format!("criteria are numbered 1 to 13, got '{}'", t.trim())),
        })
        .collect()
}

pub fn command_def(command: Command, s: Option<&Section>, errors: &mut Vec<ConfigError>) -> Option<CommandDef> {
    let Some(s) = s else {
        return (command == Command::Verify).then(|| CommandDef::Verify((1..=13).collect()));
    };
    let mut r = Reader::new(s, errors);
    match command {
        Command::Eigen => grid_fields(&mut r).map(CommandDef::Eigen),
        Command::Sample => {
            let model = r.req("model");
            let samples = r.opt("samples").unwrap_or(1000);
            let function = r.text("function");
            Some(CommandDef::Sample(SampleCmd {
                model: model?,
                samples,
                function,
            }))
        }
        Command::Propagator => {
            let d = r.opt("d").unwrap_or(1);
            let eps = r.opt("eps").unwrap_or(1.0);
            let mass_sq = r.req("mass_sq");
            let sites = r.with("sites", false, sites).unwrap_or_else(|| vec![vec![0; d]]);
            let periodic = r.opt("periodic");
            Some(CommandDef::Propagator(PropagatorCmd {
                d,
                eps,
                mass_sq: mass_sq?,
                sites,
                periodic,
            }))
        }
        Command::Form => {
            let model = r.req("model");
            let function = r.req("function");
            let other = r.text("other");
            let alpha = r.req("alpha");
            let delta = r.req("delta");
            let samples = r.opt("samples").unwrap_or(10_000);
            let coordinates = r.with("coordinates", false, coordinates);
            let deltas = r.with("deltas", false, parse_list);
            let budget = r.opt("budget").unwrap_or(DEFAULT_BUDGET);
            let exact = r.opt("exact").unwrap_or(false);
            Some(CommandDef::Form(FormCmd {
                model: model?,
                function: function?,
                other,
                alpha: alpha?,
                delta: delta?,
                samples,
                coordinates,
                deltas,
                budget,
                exact,
            }))
        }
        Command::Chain => {
            let model = r.req("model");
            let function = r.text("function");
            let alpha = r.req("alpha");
            let delta = r.req("delta");
            let horizon = r.req("horizon");
            let chains = r.opt("chains").unwrap_or(100);
            let max_events = r.opt("max_events").unwrap_or(1_000_000);
            let dump = r.opt("dump").unwrap_or(false);
            Some(CommandDef::Chain(ChainCmd {
                model: model?,
                function,
                alpha: alpha?,
                delta: delta?,
                horizon: horizon?,
                chains,
                max_events,
                dump,
            }))
        }
        Command::QrReport => {
            let model = r.req("model");
            let scheme = r.req("scheme");
            let conditions = r.with("conditions", false, parse_conditions).unwrap_or_else(|| vec![ConditionId::C4_3]);
            let n_terms = r.opt("n_terms");
            let samples = r.opt("samples").unwrap_or(10_000);
            let m0_grid = r.with("m0_grid", false, parse_list).unwrap_or_default();
            let density_draws = r.opt("density_draws").unwrap_or(32);
            let budget = r.opt("budget").unwrap_or(DEFAULT_BUDGET);
            Some(CommandDef::QrReport(QrCmd {
                model: model?,
                scheme: scheme?,
                conditions,
                n_terms,
                samples,
                m0_grid,
                density_draws,
                budget,
            }))
        }
        Command::Verify => Some(CommandDef::Verify(
            r.with("criteria", false, criteria).unwrap_or_else(|| (1..=13).collect()),
        )),
    }
}

/// Type-checks every named section and the active command section.
pub fn check(cfg: &ExperimentConfig, errors: &mut Vec<ConfigError>) {
    for s in &cfg.sections {
        match s.kind.as_str() {
            "model" => {
                model_def(s, errors);
            }
            "function" => {
                function_def(s, errors);
            }
            "scheme" => {
                scheme_def(s, errors);
            }
            "table" => {
                table_def(s, errors);
            }
            _ => {}
        }
    }
    command_def(cfg.command, cfg.command_section(), errors);
}
