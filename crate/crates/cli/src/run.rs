//! Command dispatch.

use dirform::forms::{form_estimate, form_exact_small, truncation_monotonicity_check, FormSpec};
use dirform::hilbert_scale::{eigensystem, lattice_propagator, lattice_propagator_1d_exact, periodic_lattice_propagator, GridSpec};
use dirform::measures::{sample_mean, MeasureModel};
use dirform::process::{invariance_test, simulate, JumpChainConfig, Terminal};
use dirform::qr_check::{check_condition, QrOptions};
use dirform::rng::Streams;
use dirform::suite::{run_criterion, SuiteConfig, CRITERIA};
use dirform::Error;
use rayon::prelude::*;
use serde_json::{Map, Value};

use crate::build::Context;
use crate::config::{ExperimentConfig, DEFAULT_BLOCKS};
use crate::defs::{command_def, ChainCmd, CommandDef, FormCmd, PropagatorCmd, QrCmd, SampleCmd, TableDef};
use crate::emit::{cell, render_line, Header, Record, Table};
use crate::error::CliError;

/// Records produced so far, the summary table and the error that stopped
/// the run, if any.
#[derive(Debug)]
pub struct Output {
    pub header: Header,
    pub records: Vec<Record>,
    pub table: Table,
    pub error: Option<CliError>,
}

impl Output {
    pub fn exit_code(&self) -> i32 {
        self.error.as_ref().map_or(0, CliError::exit_code)
    }
}

pub fn header(cfg: &ExperimentConfig) -> Header {
    let mut parameters = Map::new();
    if let Some(s) = cfg.command_section() {
        for e in &s.entries {
            parameters.insert(e.key.clone(), Value::String(e.value.clone()));
        }
    }
    parameters.insert("blocks".into(), Value::from(cfg.blocks() as u64));
    parameters.insert("threshold".into(), Value::from(cfg.threshold()));
    Header {
        command: cfg.command.name().into(),
        seed: cfg.seed,
        parameters,
    }
}

struct Sink {
    records: Vec<Record>,
    table: Table,
}

pub fn run(cfg: &ExperimentConfig) -> Output {
    let header = header(cfg);
    let mut sink = Sink {
        records: Vec::new(),
        table: Table::default(),
    };
    let error = dispatch(cfg, &header, &mut sink).err();
    Output {
        header,
        records: sink.records,
        table: sink.table,
        error,
    }
}

fn dispatch(cfg: &ExperimentConfig, header: &Header, sink: &mut Sink) -> Result<(), CliError> {
    let mut errors = Vec::new();
    let def = command_def(cfg.command, cfg.command_section(), &mut errors);
    let def = match def {
        Some(d) if errors.is_empty() => d,
        _ => return Err(CliError::Config(errors)),
    };
    let ctx = Context::new(cfg);
    let streams = Streams::new(cfg.seed.unwrap_or(0));
    match def {
        CommandDef::Eigen(t) => eigen(&t, sink),
        CommandDef::Sample(c) => sample(&ctx, &c, &streams, sink),
        CommandDef::Propagator(c) => propagator(&c, sink),
        CommandDef::Form(c) => form(&ctx, &c, cfg.blocks(), &streams, sink),
        CommandDef::Chain(c) => chain(&ctx, &c, &streams, sink),
        CommandDef::QrReport(c) => qr_report(&ctx, &c, cfg.threshold(), &streams, sink),
        CommandDef::Verify(ids) => {
            let suite = SuiteConfig {
                seed: cfg.seed.unwrap_or(SuiteConfig::default().seed),
                blocks: cfg.blocks.unwrap_or(DEFAULT_BLOCKS),
            };
            verify(&ids, &suite, header, sink)
        }
    }
}

fn eigen(t: &TableDef, sink: &mut Sink) -> Result<(), CliError> {
    let TableDef::Grid { d, extent, n, k } = *t else {
        return Err(CliError::Usage("the eigen command needs d, extent, n and k".into()));
    };
    let eig = eigensystem(&GridSpec::new(d, extent, n)?, k)?;
    let max_res = eig.residuals.iter().copied().fold(0.0, f64::max);
    sink.records.push(
        Record::new("grid")
            .with("d", d as u64)
            .with("extent", extent)
            .with("n", n as u64)
            .with("k", k as u64)
            .with("rescale", eig.rescale)
            .with("max_residual", max_res),
    );
    sink.table = Table::new(&["index", "lambda", "residual"]);
    for (i, (l, r)) in eig.lambdas.iter().zip(&eig.residuals).enumerate() {
        sink.records.push(
            Record::new("eigenpair")
                .with("index", (i + 1) as u64)
                .with("lambda", *l)
                .with("residual", *r),
        );
        sink.table.row(vec![(i + 1).to_string(), cell(*l), cell(*r)]);
    }
    Ok(())
}

fn sample(ctx: &Context, c: &SampleCmd, streams: &Streams, sink: &mut Sink) -> Result<(), CliError> {
    let model = ctx.model(&c.model)?;
    let draws = model.draw(c.samples, &mut streams.stream(&[0]))?;
    for (k, p) in draws.points.iter().enumerate() {
        sink.records.push(Record::new("sample").with("index", k as u64).with("point", p.to_vec()));
    }
    sink.table = Table::new(&["quantity", "value", "stderr", "nsamples"]);
    sink.table.row(vec![
        "draws".into(),
        draws.points.len().to_string(),
        "-".into(),
        draws.sweeps.to_string(),
    ]);
    if let Some(name) = &c.function {
        let u = ctx.function(name)?;
        if u.depth() > model.dim() {
            return Err(Error::invalid(format!("function '{name}' reads beyond the model dimension")).into());
        }
        let e = sample_mean(&model, &draws, |x| u.eval(x));
        sink.records.push(
            Record::from_payload("estimate", &e)?
                .with("function", name.clone())
                .with("sweeps", draws.sweeps),
        );
        sink.table.row(vec![format!("mean {name}"), cell(e.value), cell(e.stderr), e.nsamples.to_string()]);
    }
    Ok(())
}

fn propagator(c: &PropagatorCmd, sink: &mut Sink) -> Result<(), CliError> {
    sink.table = Table::new(&["site", "value", "closed_form"]);
    for site in &c.sites {
        if site.len() != c.d {
            return Err(Error::invalid(format!("site {site:?} does not have {} components", c.d)).into());
        }
        let value = match c.periodic {
            Some(l) => periodic_lattice_propagator(c.d, l, c.eps, c.mass_sq, site)?,
            None => lattice_propagator(c.d, c.eps, c.mass_sq, site)?,
        };
        let mut r = Record::new("propagator").with("site", site.clone()).with("value", value);
        let mut closed = "-".to_string();
        if c.d == 1 && c.periodic.is_none() {
            let exact = lattice_propagator_1d_exact(c.eps, c.mass_sq, site[0]);
            closed = cell(exact);
            r = r.with("closed_form", exact);
        }
        sink.table.row(vec![format!("{site:?}"), cell(value), closed]);
        sink.records.push(r);
    }
    Ok(())
}

fn form(ctx: &Context, c: &FormCmd, blocks: usize, streams: &Streams, sink: &mut Sink) -> Result<(), CliError> {
    let model = ctx.model(&c.model)?;
    let u = ctx.function(&c.function)?;
    let v = match &c.other {
        Some(name) => ctx.function(name)?,
        None => u.clone(),
    };
    let coords = c.coordinates.clone().unwrap_or_else(|| (0..model.dim()).collect());
    let cost = (coords.len() as u128) * (c.samples as u128) * (1 + c.deltas.as_ref().map_or(0, Vec::len)) as u128;
    if cost > c.budget {
        return Err(Error::ResourceLimit {
            what: "form samples".into(),
            requested: cost,
            budget: c.budget,
        }
        .into());
    }
    let spec = FormSpec::new(c.alpha, c.delta, coords, c.samples, blocks)?;
    let est = form_estimate(&model, &u, &v, &spec, streams)?;
    sink.table = Table::new(&["coordinate", "value", "stderr", "nsamples"]);
    for t in &est.per_coordinate {
        let value = if t.exact_zero { "0 (exact)".into() } else { cell(t.value) };
        sink.table.row(vec![t.coordinate.to_string(), value, cell(t.stderr), t.nsamples.to_string()]);
    }
    sink.table.row(vec!["total".into(), cell(est.value), cell(est.stderr), est.nsamples.to_string()]);
    sink.records.push(Record::from_payload("form-estimate", &est)?);
    if let Some(deltas) = &c.deltas {
        let rep = truncation_monotonicity_check(&model, &u, deltas, &spec, streams)?;
        sink.records.push(Record::from_payload("monotonicity", &rep)?);
    }
    if c.exact {
        let MeasureModel::Discrete(m) = &model else {
            return Err(Error::Unsupported("exact forms need a discrete-test model".into()).into());
        };
        let ex = form_exact_small(m, &u, &v, &spec, c.budget)?;
        sink.table.row(vec!["exact".into(), cell(ex.value), "-".into(), "-".into()]);
        sink.records.push(Record::from_payload("form-exact", &ex)?);
    }
    Ok(())
}

fn chain(ctx: &Context, c: &ChainCmd, streams: &Streams, sink: &mut Sink) -> Result<(), CliError> {
    let model = ctx.model(&c.model)?;
    let cfg = JumpChainConfig::new(c.alpha, c.delta, c.horizon, c.max_events)?;
    // same stream paths as the invariance test, so its chains are these
    let trajectories: Vec<_> = (0..c.chains as u64)
        .into_par_iter()
        .map(|k| {
            let x0 = model.sample(&mut streams.stream(&[k, 0]))?;
            simulate(&model, &x0, &cfg, &mut streams.stream(&[k, 1]))
        })
        .collect::<Result<_, Error>>()?;
    let mut events = 0usize;
    let mut terminals = [0usize; 4];
    for (k, t) in trajectories.iter().enumerate() {
        events += t.events.len();
        terminals[match t.terminal {
            Terminal::Horizon => 0,
            Terminal::Budget => 1,
            Terminal::Absorbed => 2,
            Terminal::Cemetery => 3,
        }] += 1;
        sink.records.push(
            Record::new("trajectory")
                .with("chain", k as u64)
                .with("events", t.events.len() as u64)
                .with("terminal", serde_json::to_value(t.terminal).map_err(|e| CliError::Internal(e.to_string()))?)
                .with("end_time", t.end_time)
                .with("final_state", t.final_state()),
        );
        if c.dump {
            for e in &t.events {
                sink.records.push(
                    Record::new("event")
                        .with("chain", k as u64)
                        .with("time", e.time)
                        .with("coordinate", (e.coordinate + 1) as u64)
                        .with("value", e.value),
                );
            }
        }
    }
    sink.table = Table::new(&["quantity", "value"]);
    sink.table.row(vec!["chains".into(), c.chains.to_string()]);
    sink.table.row(vec!["mean events".into(), cell(events as f64 / c.chains.max(1) as f64)]);
    for (name, n) in ["horizon", "budget", "absorbed", "cemetery"].iter().zip(terminals) {
        sink.table.row(vec![format!("terminal {name}"), n.to_string()]);
    }
    if let Some(name) = &c.function {
        let u = ctx.function(name)?;
        let rep = invariance_test(&model, &u, &cfg, c.chains, streams)?;
        sink.table.row(vec!["E u(X_T) - E u".into(), cell(rep.difference)]);
        sink.table.row(vec!["pooled stderr".into(), cell(rep.pooled_stderr)]);
        sink.table.row(vec!["invariance".into(), if rep.pass { "pass" } else { "fail" }.into()]);
        sink.records.push(Record::from_payload("invariance", &rep)?.with("function", name.clone()));
    }
    Ok(())
}

fn qr_report(ctx: &Context, c: &QrCmd, threshold: f64, streams: &Streams, sink: &mut Sink) -> Result<(), CliError> {
    let model = ctx.model(&c.model)?;
    let scheme = ctx.scheme(&c.scheme)?;
    let n_terms = c.n_terms.unwrap_or_else(|| scheme.len().min(model.dim()));
    let cost = (n_terms as u128) * (c.samples as u128) * (c.conditions.len() as u128);
    if cost > c.budget {
        return Err(Error::ResourceLimit {
            what: "quasi-regularity draws".into(),
            requested: cost,
            budget: c.budget,
        }
        .into());
    }
    let opts = QrOptions {
        nsamples: c.samples,
        threshold,
        m0_grid: c.m0_grid.clone(),
        density_draws: c.density_draws,
    };
    sink.table = Table::new(&["condition", "scheme", "m0", "partial_sum", "stderr", "verdict"]);
    for &id in &c.conditions {
        let rep = check_condition(&model, &scheme, id, n_terms, &opts, streams)?;
        let last = rep.last();
        sink.table.row(vec![
            id.label().into(),
            rep.scheme.into(),
            cell(rep.m0),
            cell(last.value),
            cell(last.stderr),
            rep.verdict.to_string(),
        ]);
        sink.records.push(Record::from_payload("qr-report", &rep)?);
    }
    Ok(())
}

/// Runs the selected criteria; criterion 13 replays every stochastic one
/// and compares the emitted lines byte for byte.
fn verify(ids: &[u32], suite: &SuiteConfig, header: &Header, sink: &mut Sink) -> Result<(), CliError> {
    sink.table = Table::new(&["criterion", "name", "result"]);
    let mut failed = Vec::new();
    let mut first_lines: Vec<(u32, String)> = Vec::new();
    for &id in ids.iter().filter(|&&id| id != 13) {
        let res = run_criterion(id, suite)?;
        let rec = Record::from_payload("criterion", &res)?;
        if res.stochastic {
            first_lines.push((id, render_line(header, &rec)));
        }
        if !res.pass {
            failed.push(id);
        }
        sink.table.row(vec![id.to_string(), res.name.into(), verdict(res.pass)]);
        sink.records.push(rec);
    }
    if ids.contains(&13) {
        if first_lines.is_empty() {
            for c in CRITERIA.iter().filter(|c| c.stochastic) {
                let res = run_criterion(c.id, suite)?;
                first_lines.push((c.id, render_line(header, &Record::from_payload("criterion", &res)?)));
            }
        }
        let mut mismatched = Vec::new();
        for (id, line) in &first_lines {
            let again = render_line(header, &Record::from_payload("criterion", &run_criterion(*id, suite)?)?);
            if &again != line {
                mismatched.push(*id as u64);
            }
        }
        let pass = mismatched.is_empty();
        if !pass {
            failed.push(13);
        }
        let c = &CRITERIA[12];
        sink.table.row(vec!["13".into(), c.name.into(), verdict(pass)]);
        sink.records.push(
            Record::new("criterion")
                .with("id", 13u64)
                .with("name", c.name)
                .with("stochastic", false)
                .with("pass", pass)
                .with("replayed", first_lines.iter().map(|(id, _)| *id as u64).collect::<Vec<_>>())
                .with("mismatched", mismatched),
        );
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Error::Diagnostics(format!("criteria {failed:?} failed")).into())
    }
}

fn verdict(pass: bool) -> String {
    if pass { "pass" } else { "FAIL" }.into()
}
