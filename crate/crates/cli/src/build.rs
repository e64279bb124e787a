//! Turns validated definitions into library objects.

use std::cell::RefCell;
use std::collections::HashMap;
use std::fs;
use std::rc::Rc;

use dirform::hilbert_scale::{eigensystem, free_field_covariance, EigenSystem, GridSpec};
use dirform::measures::{Atoms, CorrelatedGaussian, DiscreteModel, Marginal, MeasureModel, Phi4Model, Phi4Params};
use dirform::qr_check::{free_field_scheme, SchemeKind, SchemeSource, WeightScheme};
use dirform::seqspace::{CylinderFunction, Sequence};
use dirform::Error;
use nalgebra::DMatrix;
use serde_json::Value;

use crate::config::{ConfigError, ExperimentConfig};
use crate::defs::{
    function_def, model_def, scheme_def, table_def, CovarianceDef, FunctionDef, MarginalDef, ModelDef, SchemeDef,
    SchemeKindDef, SeqDef, TableDef,
};
use crate::error::CliError;

pub struct Context<'a> {
    cfg: &'a ExperimentConfig,
    tables: RefCell<HashMap<String, Rc<EigenSystem>>>,
}

fn definition<T>(
    cfg: &ExperimentConfig,
    kind: &str,
    name: &str,
    parse: fn(&crate::config::Section, &mut Vec<ConfigError>) -> Option<T>,
) -> Result<T, CliError> {
    let s = cfg
        .named(kind, name)
        .ok_or_else(|| CliError::Usage(format!("{kind} '{name}' is not defined")))?;
    let mut errors = Vec::new();
    match parse(s, &mut errors) {
        Some(v) if errors.is_empty() => Ok(v),
        _ => Err(CliError::Config(errors)),
    }
}

impl<'a> Context<'a> {
    pub fn new(cfg: &'a ExperimentConfig) -> Self {
        Self {
            cfg,
            tables: RefCell::new(HashMap::new()),
        }
    }

    pub fn table(&self, name: &str) -> Result<Rc<EigenSystem>, CliError> {
        if let Some(t) = self.tables.borrow().get(name) {
            return Ok(t.clone());
        }
        let t = Rc::new(build_table(&definition(self.cfg, "table", name, table_def)?)?);
        self.tables.borrow_mut().insert(name.into(), t.clone());
        Ok(t)
    }

    pub fn model(&self, name: &str) -> Result<MeasureModel, CliError> {
        match definition(self.cfg, "model", name, model_def)? {
            ModelDef::Product(ms) => {
                let marginals = ms.iter().map(marginal).collect::<Result<Vec<_>, _>>()?;
                Ok(MeasureModel::product(marginals)?)
            }
            ModelDef::Correlated(CovarianceDef::Matrix(rows)) => {
                let n = rows.len();
                if rows.iter().any(|r| r.len() != n) {
                    return Err(Error::invalid("covariance must be square").into());
                }
                let flat: Vec<f64> = rows.concat();
                Ok(MeasureModel::Correlated(CorrelatedGaussian::new(DMatrix::from_row_slice(n, n, &flat))?))
            }
            ModelDef::Correlated(CovarianceDef::FreeField { table, mass_sq, basis }) => {
                let eig = self.table(&table)?;
                if eig.vectors.is_empty() {
                    return Err(Error::Precondition(format!(
                        "table '{table}' has no eigenvectors; free-field covariances need a grid table"
                    ))
                    .into());
                }
                let k = basis.unwrap_or(eig.len());
                let c = free_field_covariance(&eig.grid, mass_sq, &eig, k)?;
                Ok(MeasureModel::Correlated(CorrelatedGaussian::new(c)?))
            }
            ModelDef::Phi4(p) => {
                let params = Phi4Params::new(p.d, p.l, p.eps, p.mass_sq, p.lambda, p.a_eps)?;
                Ok(MeasureModel::Phi4(Phi4Model::new(params, p.burn_in, p.thin, p.guard)?))
            }
            ModelDef::Discrete { axes, pmf } => {
                let states: usize = axes.iter().map(Vec::len).product();
                let pmf = pmf.unwrap_or_else(|| vec![1.0; states]);
                Ok(MeasureModel::Discrete(DiscreteModel::new(axes, pmf)?))
            }
        }
    }

    pub fn function(&self, name: &str) -> Result<CylinderFunction<f64>, CliError> {
        let f = match definition(self.cfg, "function", name, function_def)? {
            FunctionDef::Coordinate(i) => CylinderFunction::coordinate(i),
            FunctionDef::Cutoff { coordinate, scale } => CylinderFunction::cutoff(coordinate, scale)?,
            FunctionDef::ProductOfCutoffs { coordinates, scale } => {
                CylinderFunction::product_of_cutoffs(&coordinates, scale)?
            }
            FunctionDef::Polynomial {
                coordinate,
                coefficients,
            } => CylinderFunction::polynomial(coordinate, &coefficients),
        };
        Ok(f)
    }

    pub fn scheme(&self, name: &str) -> Result<WeightScheme, CliError> {
        match definition(self.cfg, "scheme", name, scheme_def)? {
            SchemeDef::FreeField { m, table, m0, alpha } => {
                let eig = self.table(&table)?;
                Ok(free_field_scheme(&eig, m, alpha, m0)?)
            }
            SchemeDef::Manual {
                kind,
                beta,
                gamma,
                length,
                table,
                m0,
                alpha,
            } => {
                let eig = table.map(|t| self.table(&t)).transpose()?;
                let n = length.or(eig.as_ref().map(|e| e.len())).unwrap_or(0);
                let seq = |s: &SeqDef, what: &str| -> Result<Vec<f64>, CliError> {
                    let seq = match s {
                        SeqDef::Constant(c) => Sequence::Constant(*c),
                        SeqDef::Power(a) => Sequence::Power(*a),
                        SeqDef::Eigen(m) => Sequence::eigen(&eig.as_ref().expect("checked at parse").lambdas, *m),
                    };
                    Ok(seq.validate_positive(n, what)?)
                };
                let kind = match kind {
                    SchemeKindDef::Lp(p) => SchemeKind::Lp { p },
                    SchemeKindDef::Linf => SchemeKind::Linf,
                    SchemeKindDef::Rn => SchemeKind::Rn,
                };
                Ok(WeightScheme::new(
                    kind,
                    seq(&beta, "beta")?,
                    seq(&gamma, "gamma")?,
                    m0,
                    alpha,
                    SchemeSource::Manual,
                )?)
            }
        }
    }
}

fn marginal(m: &MarginalDef) -> Result<Marginal, CliError> {
    Ok(match m {
        MarginalDef::Normal { mean, sd } => Marginal::Normal { mean: *mean, sd: *sd },
        MarginalDef::Uniform { lo, hi } => Marginal::Uniform { lo: *lo, hi: *hi },
        MarginalDef::Atoms { locs, masses } => Marginal::Atoms(Atoms::new(locs.clone(), masses.clone())?),
    })
}

pub fn build_table(def: &TableDef) -> Result<EigenSystem, CliError> {
    match def {
        TableDef::Grid { d, extent, n, k } => Ok(eigensystem(&GridSpec::new(*d, *extent, *n)?, *k)?),
        TableDef::File(path) => {
            let text = fs::read_to_string(path).map_err(|e| CliError::Io {
                path: path.clone(),
                message: e.to_string(),
            })?;
            read_table(&text).map_err(|m| Error::invalid(format!("eigen table {path}: {m}")).into())
        }
    }
}

/// Reads the records of an `eigen` run back into an eigenvalue table.
pub fn read_table(text: &str) -> Result<EigenSystem, String> {
    let mut grid = None;
    let mut lambdas = Vec::new();
    for (k, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let v: Value = serde_json::from_str(line).map_err(|e| format!("line {}: {e}", k + 1))?;
        let num = |key: &str| v[key].as_f64().ok_or_else(|| format!("line {}: missing {key}", k + 1));
        match v["record"].as_str() {
            Some("grid") => {
                let g = GridSpec::new(num("d")? as usize, num("extent")?, num("n")? as usize).map_err(|e| e.to_string())?;
                grid = Some(g);
            }
            Some("eigenpair") => lambdas.push(num("lambda")?),
            _ => {}
        }
    }
    let grid = grid.ok_or("no grid record")?;
    EigenSystem::from_table(grid, lambdas).map_err(|e| e.to_string())
}
