use rand::Rng;
use rand_distr::{Distribution, Exp};
use rayon::prelude::*;
use serde::Serialize;

use super::rate::{jump_from, side_rates};
use crate::error::{Error, Result};
use crate::measures::MeasureModel;
use crate::rng::{StreamRng, Streams};
use crate::seqspace::CylinderFunction;
use crate::stats::{Accumulator, Estimate};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct JumpChainConfig {
    pub alpha: f64,
    pub delta: f64,
    /// Time horizon `T`.
    pub horizon: f64,
    /// Maximal number of events per trajectory.
    pub max_events: usize,
}

impl JumpChainConfig {
    pub fn new(alpha: f64, delta: f64, horizon: f64, max_events: usize) -> Result<Self> {
        let c = Self {
            alpha,
            delta,
            horizon,
            max_events,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 2.0) {
            return Err(Error::invalid(format!("alpha must lie in (0, 2), got {}", self.alpha)));
        }
        if !(self.delta.is_finite() && self.delta > 0.0) {
            return Err(Error::invalid(format!("jump cutoff delta must be > 0, got {}", self.delta)));
        }
        if !(self.horizon.is_finite() && self.horizon >= 0.0) {
            return Err(Error::invalid(format!("horizon must be >= 0, got {}", self.horizon)));
        }
        if self.max_events == 0 {
            return Err(Error::invalid("event budget must be >= 1"));
        }
        Ok(())
    }
}

/// How a trajectory ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Terminal {
    Horizon,
    Budget,
    /// Total rate vanished; the state is frozen up to the horizon.
    Absorbed,
    /// The cemetery point. Truncated rates are finite, so this is never
    /// entered; kept so reports can assert it.
    Cemetery,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Event {
    pub time: f64,
    /// 0-based coordinate that jumped.
    pub coordinate: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub start: Vec<f64>,
    pub events: Vec<Event>,
    pub terminal: Terminal,
    /// Time at which the simulation stopped (`T` unless the budget ran out).
    pub end_time: f64,
}

impl Trajectory {
    /// `0` followed by the event times.
    pub fn times(&self) -> Vec<f64> {
        std::iter::once(0.0).chain(self.events.iter().map(|e| e.time)).collect()
    }

    /// State after the `k`-th event (`k = 0` is the start).
    pub fn state(&self, k: usize) -> Vec<f64> {
        let mut x = self.start.clone();
        for e in &self.events[..k] {
            x[e.coordinate] = e.value;
        }
        x
    }

    pub fn final_state(&self) -> Vec<f64> {
        self.state(self.events.len())
    }

    /// Time spent in each visited state, paired with the state index.
    pub fn holding_times(&self) -> Vec<(usize, f64)> {
        let times = self.times();
        let mut out: Vec<(usize, f64)> = times.windows(2).enumerate().map(|(k, w)| (k, w[1] - w[0])).collect();
        out.push((self.events.len(), self.end_time - times[times.len() - 1]));
        out
    }
}

/// Event-driven simulation up to the horizon or the event budget.
pub fn simulate(model: &MeasureModel, x0: &[f64], config: &JumpChainConfig, rng: &mut StreamRng) -> Result<Trajectory> {
    config.validate()?;
    let n = model.dim();
    if x0.len() != n || x0.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("start point must be finite and match the model dimension"));
    }
    let mut x = x0.to_vec();
    let rates_at = |x: &[f64], i: usize| -> Result<(f64, f64)> {
        let cond = model.conditional(i, x)?;
        side_rates(&cond, x[i], config.alpha, config.delta)
    };
    let mut rates: Vec<(f64, f64)> = (0..n).map(|i| rates_at(&x, i)).collect::<Result<_>>()?;
    let mut t = 0.0;
    let mut events = Vec::new();
    let terminal = loop {
        let total: f64 = rates.iter().map(|(l, r)| l + r).sum();
        if !total.is_finite() {
            return Err(Error::numerical(format!("non-finite total jump rate at time {t}")));
        }
        if total <= 0.0 {
            break Terminal::Absorbed;
        }
        let wait = Exp::new(total).expect("positive rate").sample(rng);
        if t + wait > config.horizon {
            break Terminal::Horizon;
        }
        if events.len() >= config.max_events {
            break Terminal::Budget;
        }
        t += wait;
        let target = rng.random::<f64>() * total;
        let mut acc = 0.0;
        let mut i = n - 1;
        for (k, (l, r)) in rates.iter().enumerate() {
            acc += l + r;
            if target < acc && l + r > 0.0 {
                i = k;
                break;
            }
        }
        while rates[i].0 + rates[i].1 <= 0.0 {
            // rounding pushed the target past the last positive rate
            i -= 1;
        }
        let cond = model.conditional(i, &x)?;
        let y = jump_from(&cond, x[i], rates[i], config.alpha, config.delta, rng)?;
        x[i] = y;
        events.push(Event {
            time: t,
            coordinate: i,
            value: y,
        });
        if model.is_product() {
            rates[i] = rates_at(&x, i)?;
        } else {
            rates = (0..n).map(|k| rates_at(&x, k)).collect::<Result<_>>()?;
        }
    };
    let end_time = if terminal == Terminal::Budget { t } else { config.horizon };
    debug_assert_ne!(terminal, Terminal::Cemetery);
    Ok(Trajectory {
        start: x0.to_vec(),
        events,
        terminal,
        end_time,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InvarianceReport {
    pub chains: usize,
    pub horizon: f64,
    pub evolved: Estimate,
    pub fresh: Estimate,
    pub difference: f64,
    pub pooled_stderr: f64,
    pub pass: bool,
    pub mean_events: f64,
    pub budget_exhausted: usize,
    pub absorbed: usize,
}

/// Chains started from independent μ-draws: compares `E u(X_T)` with
/// `E_μ u` from fresh draws.
///
/// Chain `c` draws its start from stream `[c, 0]`, its path from `[c, 1]`
/// and the fresh comparison draw from `[c, 2]`.
pub fn invariance_test(
    model: &MeasureModel,
    u: &CylinderFunction<f64>,
    config: &JumpChainConfig,
    nchains: usize,
    streams: &Streams,
) -> Result<InvarianceReport> {
    config.validate()?;
    if nchains < 2 {
        return Err(Error::invalid("invariance test needs at least two chains"));
    }
    if u.depth() > model.dim() {
        return Err(Error::invalid("function reads more coordinates than the model has"));
    }
    let per_chain: Vec<(f64, f64, usize, Terminal)> = (0..nchains)
        .into_par_iter()
        .map(|c| {
            let c = c as u64;
            let x0 = model.sample(&mut streams.stream(&[c, 0]))?;
            let traj = simulate(model, &x0, config, &mut streams.stream(&[c, 1]))?;
            let fresh = model.sample(&mut streams.stream(&[c, 2]))?;
            Ok((u.eval(&traj.final_state()), u.eval(&fresh), traj.events.len(), traj.terminal))
        })
        .collect::<Result<_>>()?;
    let evolved_acc: Accumulator = per_chain.iter().map(|p| p.0).collect();
    let fresh_acc: Accumulator = per_chain.iter().map(|p| p.1).collect();
    // ordered plain sums keep the difference exactly zero for constant u
    let ev = per_chain.iter().map(|p| p.0).sum::<f64>() / nchains as f64;
    let fr = per_chain.iter().map(|p| p.1).sum::<f64>() / nchains as f64;
    let evolved = Estimate {
        value: ev,
        ..evolved_acc.estimate()
    };
    let fresh = Estimate {
        value: fr,
        ..fresh_acc.estimate()
    };
    let difference = ev - fr;
    let pooled_stderr = evolved.stderr.hypot(fresh.stderr);
    Ok(InvarianceReport {
        chains: nchains,
        horizon: config.horizon,
        evolved,
        fresh,
        difference,
        pooled_stderr,
        pass: difference.abs() <= 3.0 * pooled_stderr,
        mean_events: per_chain.iter().map(|p| p.2 as f64).sum::<f64>() / nchains as f64,
        budget_exhausted: per_chain.iter().filter(|p| p.3 == Terminal::Budget).count(),
        absorbed: per_chain.iter().filter(|p| p.3 == Terminal::Absorbed).count(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{Atoms, Marginal};
    use crate::process::coordinate_rate;

    #[test]
    fn frozen_chain() {
        let m = MeasureModel::product(vec![Marginal::Uniform { lo: 0.0, hi: 1.0 }; 2]).unwrap();
        let cfg = JumpChainConfig::new(1.0, 5.0, 3.0, 10).unwrap();
        let t = simulate(&m, &[0.2, 0.7], &cfg, &mut Streams::new(1).stream(&[0])).unwrap();
        assert!(t.events.is_empty());
        assert_eq!(t.terminal, Terminal::Absorbed);
        assert_eq!(t.times(), vec![0.0]);
        assert_eq!(t.end_time, 3.0);
    }

    #[test]
    fn structure_of_paths() {
        let m = MeasureModel::standard_normal(3).unwrap();
        let cfg = JumpChainConfig::new(1.0, 0.1, 2.0, 10_000).unwrap();
        let t = simulate(&m, &[0.0, 0.5, -0.5], &cfg, &mut Streams::new(2).stream(&[0])).unwrap();
        assert_eq!(t.terminal, Terminal::Horizon);
        assert!(!t.events.is_empty());
        assert!(t.times().windows(2).all(|w| w[1] > w[0]));
        for k in 0..t.events.len() {
            let (a, b) = (t.state(k), t.state(k + 1));
            let changed = a.iter().zip(&b).filter(|(p, q)| p != q).count();
            assert_eq!(changed, 1);
            assert!((a[t.events[k].coordinate] - b[t.events[k].coordinate]).abs() > 0.1);
        }
    }

    #[test]
    fn budget_is_flagged() {
        let m = MeasureModel::standard_normal(2).unwrap();
        let cfg = JumpChainConfig::new(1.0, 0.1, 100.0, 5).unwrap();
        let t = simulate(&m, &[0.0, 0.0], &cfg, &mut Streams::new(3).stream(&[0])).unwrap();
        assert_eq!(t.terminal, Terminal::Budget);
        assert_eq!(t.events.len(), 5);
        assert_eq!(t.end_time, t.events[4].time);
    }

    #[test]
    fn empirical_rate_matches() {
        let a = Atoms::new(vec![-1.0, 0.0, 2.0], vec![0.2, 0.5, 0.3]).unwrap();
        let m = MeasureModel::product(vec![Marginal::Atoms(a.clone()), Marginal::Atoms(a)]).unwrap();
        let cfg = JumpChainConfig::new(1.0, 0.5, 50.0, 100_000).unwrap();
        let x0 = [0.0, -1.0];
        let want: f64 = (0..2).map(|i| coordinate_rate(&m, &x0, i, 1.0, 0.5).unwrap()).sum();
        let streams = Streams::new(4);
        let (mut exits, mut time) = (0.0, 0.0);
        for c in 0..40 {
            let t = simulate(&m, &x0, &cfg, &mut streams.stream(&[c])).unwrap();
            for (k, h) in t.holding_times() {
                if t.state(k) == x0 {
                    time += h;
                    if k < t.events.len() {
                        exits += 1.0;
                    }
                }
            }
        }
        let rate = exits / time;
        assert!((rate - want).abs() < 3.0 * exits.sqrt() / time, "{rate} {want}");
    }

    #[test]
    fn constant_function_has_zero_difference() {
        let m = MeasureModel::standard_normal(1).unwrap();
        let cfg = JumpChainConfig::new(1.0, 0.2, 0.5, 1000).unwrap();
        let r = invariance_test(&m, &CylinderFunction::constant(1.5), &cfg, 50, &Streams::new(5)).unwrap();
        assert_eq!(r.difference, 0.0);
        assert!(r.pass);
    }

    #[test]
    fn zero_horizon_passes() {
        let m = MeasureModel::standard_normal(1).unwrap();
        let cfg = JumpChainConfig::new(1.0, 0.2, 0.0, 1000).unwrap();
        let u = CylinderFunction::cutoff(0, 1.0).unwrap();
        let r = invariance_test(&m, &u, &cfg, 2000, &Streams::new(6)).unwrap();
        assert_eq!(r.mean_events, 0.0);
        assert!(r.pass, "{r:?}");
    }
}
