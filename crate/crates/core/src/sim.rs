//! Continuous-time Monte Carlo simulation of user arrivals and departures.
//!
//! Each replication draws a randomization outcome (or takes a fixed one),
//! then runs the finite-source birth-death dynamics with competing
//! exponential clocks. Arrivals that the admission policy rejects are
//! consumed as no-op events. All estimators are time averages over the part
//! of the horizon after the warmup.

use std::collections::BTreeMap;

use rand::distr::{weighted::WeightedIndex, Distribution};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mac::{throughput_for_count, utility_of_use};
use crate::model::{
    check_outcome, validate_policy, validate_scenario, ActionProfile, CountMatrix, PricingPolicy, RandomizationOutcome,
    Scenario,
};

/// Name of the generator recorded in every report.
pub const RNG_NAME: &str = "ChaCha8 (rand_chacha), stream = replication index";

/// How users are assigned to plans at time zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Assignment {
    /// Every replication uses the same outcome.
    Fixed { n: RandomizationOutcome },
    /// Every user draws a plan independently from its type's row.
    Profile { profile: ActionProfile },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub scenario: Scenario,
    pub assignment: Assignment,
    pub policy: PricingPolicy,
    /// Simulated time per replication.
    pub horizon: f64,
    /// Discarded prefix of every replication.
    pub warmup: f64,
    pub seed: u64,
    pub replications: usize,
    /// Also estimate the fraction of time spent in each system state.
    #[serde(default)]
    pub record_states: bool,
}

impl SimConfig {
    /// A config with the default warmup of a tenth of the horizon.
    pub fn new(scenario: Scenario, assignment: Assignment, policy: PricingPolicy, horizon: f64) -> Self {
        SimConfig {
            scenario,
            assignment,
            policy,
            horizon,
            warmup: 0.1 * horizon,
            seed: 0,
            replications: 8,
            record_states: false,
        }
    }

    /// Horizon at which a replication sees about `events` state changes in
    /// steady state, ignoring blocking.
    pub fn horizon_for_events(scenario: &Scenario, n: &RandomizationOutcome, events: f64) -> f64 {
        let rate: f64 = (0..n.rows())
            .map(|k| {
                let t = &scenario.types[k];
                f64::from(n.row_sum(k)) * 2.0 * t.lambda * t.mu / (t.lambda + t.mu)
            })
            .sum();
        events / rate
    }

    pub fn validate(&self) -> Result<()> {
        validate_scenario(&self.scenario)?;
        validate_policy(&self.policy, &self.scenario.protocol)?;
        let mut issues = Vec::new();
        if !(self.horizon > self.warmup && self.warmup >= 0.0 && self.horizon.is_finite()) {
            issues.push("horizon must exceed a nonnegative warmup".to_string());
        }
        if self.replications == 0 {
            issues.push("at least one replication is required".to_string());
        }
        let plans = self.policy.plans.len();
        match &self.assignment {
            Assignment::Fixed { n } => {
                check_outcome(n, &self.scenario)?;
                if n.cols() != plans {
                    issues.push(format!("outcome has {} plans, policy has {plans}", n.cols()));
                }
            }
            Assignment::Profile { profile } => {
                if profile.num_types() != self.scenario.num_types() || profile.num_plans() != plans {
                    issues.push("profile shape does not match scenario and policy".to_string());
                }
            }
        }
        if issues.is_empty() {
            Ok(())
        } else {
            Err(Error::Invalid(issues))
        }
    }
}

/// Mean across replications with its standard error (absent for a single
/// replication).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: Option<f64>,
}

impl Estimate {
    pub fn from_samples(xs: &[f64]) -> Self {
        let r = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / r;
        let std_error = (xs.len() >= 2).then(|| {
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (r - 1.0);
            (var / r).sqrt()
        });
        Estimate { mean, std_error }
    }

    /// Whether `exact` lies within `z` standard errors of the mean. With a
    /// zero standard error the mean must match to rounding.
    pub fn covers(&self, exact: f64, z: f64) -> bool {
        let se = self.std_error.unwrap_or(0.0);
        (self.mean - exact).abs() <= z * se + 1e-12 * exact.abs().max(1.0)
    }
}

/// Estimates for one (type, plan) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub k: usize,
    pub plan: usize,
    /// Mean number of online users in the cell.
    pub online: Estimate,
    /// Steady-state utility of use per user in the cell.
    pub use_value: Estimate,
    /// Guaranteed rate per user in the cell.
    pub usage: Estimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypeReport {
    /// Expected utility of use of a type-`k` user.
    pub use_value: Estimate,
    /// Expected cost of a type-`k` user.
    pub cost: Estimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateFrequency {
    pub state: CountMatrix,
    pub fraction: Estimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub rng: String,
    pub seed: u64,
    pub replications: usize,
    pub horizon: f64,
    pub warmup: f64,
    /// Mean number of events per replication.
    pub events_per_replication: f64,
    /// Cells that held users in a fixed assignment; with a random assignment,
    /// cells that held users in every replication.
    pub cells: Vec<CellReport>,
    pub types: Vec<TypeReport>,
    /// Largest pricing state seen at any instant, per plan.
    pub peak_pricing_state: Vec<u32>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub states: Vec<StateFrequency>,
}

impl SimReport {
    pub fn cell(&self, k: usize, plan: usize) -> Option<&CellReport> {
        self.cells.iter().find(|c| c.k == k && c.plan == plan)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Output of one replication.
struct Run {
    n: CountMatrix,
    events: u64,
    online: Vec<f64>,
    use_value: Vec<f64>,
    usage: Vec<f64>,
    type_use: Vec<f64>,
    type_cost: Vec<f64>,
    peak: Vec<u32>,
    states: BTreeMap<Vec<u32>, f64>,
}

fn draw_outcome(profile: &ActionProfile, s: &Scenario, rng: &mut ChaCha8Rng) -> Result<CountMatrix> {
    let plans = profile.num_plans();
    let mut n = CountMatrix::zeros(s.num_types(), plans);
    for (k, t) in s.types.iter().enumerate() {
        if t.count == 0 {
            continue;
        }
        let pick = WeightedIndex::new(profile.row(k)).map_err(|e| Error::invalid(format!("type {k}: {e}")))?;
        for _ in 0..t.count {
            let l = pick.sample(rng);
            n.set(k, l, n.get(k, l) + 1);
        }
    }
    Ok(n)
}

fn replicate(cfg: &SimConfig, index: usize) -> Result<Run> {
    let s = &cfg.scenario;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(index as u64);
    let n = match &cfg.assignment {
        Assignment::Fixed { n } => n.clone(),
        Assignment::Profile { profile } => draw_outcome(profile, s, &mut rng)?,
    };
    let rows = n.rows();
    let cols = n.cols();
    let cells = rows * cols;
    let mut x = CountMatrix::zeros(rows, cols);
    let mut v = vec![0u32; cols];
    let mut peak = vec![0u32; cols];

    // Per online-count throughput and utility tables.
    let max_online: u32 = (1..cols).map(|l| n.col_sum(l)).sum();
    let mut tau = vec![0.0; max_online as usize + 1];
    let mut util = vec![vec![0.0; max_online as usize + 1]; rows];
    for m in 1..=max_online {
        tau[m as usize] = throughput_for_count(m, &s.protocol)?;
        for (row, t) in util.iter_mut().zip(&s.types) {
            row[m as usize] = utility_of_use(t, tau[m as usize])?;
        }
    }

    let mut online = vec![0.0; cells];
    let mut use_acc = vec![0.0; cells];
    let mut usage_acc = vec![0.0; cells];
    let mut states = BTreeMap::new();
    let mut rates = vec![0.0; 2 * cells];
    let mut t = 0.0f64;
    let mut events = 0u64;
    loop {
        for k in 0..rows {
            let ty = &s.types[k];
            for l in 0..cols {
                let i = k * cols + l;
                rates[2 * i] = ty.lambda * f64::from(n.get(k, l) - x.get(k, l));
                rates[2 * i + 1] = ty.mu * f64::from(x.get(k, l));
            }
        }
        let total: f64 = rates.iter().sum();
        let dt = if total > 0.0 {
            Exp::new(total).map_err(|e| Error::invalid(e.to_string()))?.sample(&mut rng)
        } else {
            f64::INFINITY
        };
        // Accrue the time spent in the current state that falls after warmup.
        let start = t.max(cfg.warmup);
        let end = (t + dt).min(cfg.horizon);
        if end > start {
            let span = end - start;
            let m: u32 = v[1..].iter().sum();
            for (k, util_k) in util.iter().enumerate() {
                for l in 0..cols {
                    let i = k * cols + l;
                    let xi = f64::from(x.get(k, l));
                    online[i] += span * xi;
                    if l > 0 && xi > 0.0 {
                        use_acc[i] += span * xi * util_k[m as usize];
                        usage_acc[i] += span * xi * tau[m as usize];
                    }
                }
            }
            if cfg.record_states {
                *states.entry(x.as_slice().to_vec()).or_insert(0.0) += span;
            }
        }
        t += dt;
        if t >= cfg.horizon {
            break;
        }
        events += 1;
        let mut u = rng.random::<f64>() * total;
        let mut pick = rates.len() - 1;
        for (j, r) in rates.iter().enumerate() {
            if u < *r {
                pick = j;
                break;
            }
            u -= r;
        }
        // Skip slots whose rate is zero in case rounding landed on one.
        while rates[pick] == 0.0 {
            pick -= 1;
        }
        let (k, l) = ((pick / 2) / cols, (pick / 2) % cols);
        if pick.is_multiple_of(2) {
            if s.admission.admits(&v, l) {
                x.set(k, l, x.get(k, l) + 1);
                v[l] += 1;
                peak[l] = peak[l].max(v[l]);
            }
        } else {
            x.set(k, l, x.get(k, l) - 1);
            v[l] -= 1;
        }
    }

    let window = cfg.horizon - cfg.warmup;
    let mut use_value = vec![0.0; cells];
    let mut usage = vec![0.0; cells];
    let mut type_use = vec![0.0; rows];
    let mut type_cost = vec![0.0; rows];
    for k in 0..rows {
        for l in 0..cols {
            let i = k * cols + l;
            online[i] /= window;
            let nkl = f64::from(n.get(k, l));
            if nkl > 0.0 {
                use_value[i] = s.delta_t * use_acc[i] / window / nkl;
                usage[i] = s.delta_t * usage_acc[i] / window / nkl;
            }
            let nk = f64::from(n.row_sum(k));
            if nk > 0.0 && l > 0 && nkl > 0.0 {
                let plan = cfg.policy.plan(l);
                let charge = if plan.rate_charge() == 0.0 { 0.0 } else { plan.rate_charge() * usage[i] };
                type_use[k] += nkl / nk * use_value[i];
                type_cost[k] += nkl / nk * (plan.subscription() + charge);
            }
        }
    }
    for f in states.values_mut() {
        *f /= window;
    }
    Ok(Run { n, events, online, use_value, usage, type_use, type_cost, peak, states })
}

/// Runs every replication (in parallel) and merges them in replication order.
pub fn simulate(cfg: &SimConfig) -> Result<SimReport> {
    cfg.validate()?;
    let runs: Vec<Run> = (0..cfg.replications)
        .into_par_iter()
        .map(|i| replicate(cfg, i))
        .collect::<Result<Vec<_>>>()?;
    let first = &runs[0].n;
    let (rows, cols) = (first.rows(), first.cols());
    let column = |f: &dyn Fn(&Run) -> f64| -> Estimate {
        let xs: Vec<f64> = runs.iter().map(f).collect();
        Estimate::from_samples(&xs)
    };
    let mut cells = Vec::new();
    for k in 0..rows {
        for l in 1..cols {
            if runs.iter().any(|r| r.n.get(k, l) == 0) {
                continue;
            }
            let i = k * cols + l;
            cells.push(CellReport {
                k,
                plan: l,
                online: column(&|r| r.online[i]),
                use_value: column(&|r| r.use_value[i]),
                usage: column(&|r| r.usage[i]),
            });
        }
    }
    let types = (0..rows)
        .map(|k| TypeReport { use_value: column(&|r| r.type_use[k]), cost: column(&|r| r.type_cost[k]) })
        .collect();
    let peak_pricing_state = (0..cols).map(|l| runs.iter().map(|r| r.peak[l]).max().unwrap_or(0)).collect();
    let mut states = Vec::new();
    if cfg.record_states {
        let mut keys: Vec<&Vec<u32>> = runs.iter().flat_map(|r| r.states.keys()).collect();
        keys.sort();
        keys.dedup();
        for key in keys {
            let fraction = column(&|r| r.states.get(key).copied().unwrap_or(0.0));
            let mut state = CountMatrix::zeros(rows, cols);
            state.as_mut_slice().copy_from_slice(key);
            states.push(StateFrequency { state, fraction });
        }
    }
    Ok(SimReport {
        rng: RNG_NAME.to_string(),
        seed: cfg.seed,
        replications: cfg.replications,
        horizon: cfg.horizon,
        warmup: cfg.warmup,
        events_per_replication: runs.iter().map(|r| r.events as f64).sum::<f64>() / runs.len() as f64,
        cells,
        types,
        peak_pricing_state,
        states,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{cell_values, stationary_distribution};
    use crate::model::{AdmissionPolicy, MacProtocol, UserType, BASELINE_CSMA_P};

    fn lone_user(protocol: MacProtocol) -> Scenario {
        Scenario {
            types: vec![UserType { alpha: 10.0, beta: 0.3, lambda: 1.0, mu: 1.0, count: 1 }],
            delta_t: 1.0,
            c0: 0.0,
            protocol,
            admission: AdmissionPolicy::AdmitAll,
        }
    }

    fn fixed(rows: Vec<Vec<u32>>) -> Assignment {
        Assignment::Fixed { n: CountMatrix::from_rows(rows).unwrap() }
    }

    #[test]
    fn lone_user_is_online_half_the_time() {
        let s = lone_user(MacProtocol::Csma { p: BASELINE_CSMA_P });
        let mut cfg = SimConfig::new(s, fixed(vec![vec![0, 1]]), PricingPolicy::single(0.0, 0.0), 20_000.0);
        cfg.seed = 7;
        let r = simulate(&cfg).unwrap();
        let c = r.cell(0, 1).unwrap();
        assert!(c.online.covers(0.5, 3.0), "{c:?}");
        assert!(c.use_value.covers(3.725, 3.0), "{c:?}");
    }

    #[test]
    fn same_seed_same_report() {
        let s = Scenario::two_type_baseline([2, 3], [1.0, 0.1], MacProtocol::Tdma, 0.0);
        let profile = ActionProfile::two_type([0.5, 0.7]);
        let mut cfg =
            SimConfig::new(s, Assignment::Profile { profile }, PricingPolicy::single(0.5, 1.0), 2_000.0);
        cfg.seed = 11;
        cfg.record_states = true;
        let a = simulate(&cfg).unwrap();
        let b = simulate(&cfg).unwrap();
        assert_eq!(a, b);
        cfg.seed = 12;
        assert_ne!(simulate(&cfg).unwrap(), a);
    }

    #[test]
    fn caps_are_never_exceeded() {
        let mut s = Scenario::two_type_baseline([3, 4], [1.0, 2.0], MacProtocol::Tdma, 0.0);
        s.admission = AdmissionPolicy::PerPlanCap { caps: vec![None, Some(2), Some(3)] };
        let n = fixed(vec![vec![0, 2, 1], vec![1, 1, 2]]);
        let policy = PricingPolicy::new(vec![
            crate::model::PricingPlan::Dummy,
            crate::model::PricingPlan::paid(0.0, 0.0),
            crate::model::PricingPlan::paid(0.0, 0.0),
        ])
        .unwrap();
        let cfg = SimConfig::new(s, n, policy, 5_000.0);
        let r = simulate(&cfg).unwrap();
        assert!(r.peak_pricing_state[1] <= 2 && r.peak_pricing_state[2] <= 3, "{:?}", r.peak_pricing_state);
        assert_eq!(r.peak_pricing_state[1], 2);
    }

    #[test]
    fn state_frequencies_follow_the_stationary_law() {
        let s = Scenario::two_type_baseline([2, 1], [1.0, 0.5], MacProtocol::Tdma, 0.0);
        let rows = vec![vec![0, 2], vec![0, 1]];
        let n = CountMatrix::from_rows(rows.clone()).unwrap();
        let mut cfg = SimConfig::new(s.clone(), fixed(rows), PricingPolicy::single(0.0, 0.0), 20_000.0);
        cfg.record_states = true;
        cfg.seed = 3;
        let r = simulate(&cfg).unwrap();
        let exact = stationary_distribution(&n, &s).unwrap();
        assert_eq!(r.states.len(), exact.support.len());
        // Chi-square over the visited states using the replication means.
        let total_time = (cfg.horizon - cfg.warmup) * cfg.replications as f64;
        let chi2: f64 = exact
            .support
            .iter()
            .map(|(x, p)| {
                let f = r.states.iter().find(|f| &f.state == x).unwrap().fraction.mean;
                (f - p).powi(2) / p
            })
            .sum::<f64>();
        // Scaled by an effective sample size of one independent draw per
        // unit of time; generous bound for 5 degrees of freedom.
        assert!(chi2 * total_time < 40.0, "chi2 {}", chi2 * total_time);
        let b = cell_values(0, 1, &n, &s).unwrap();
        assert!(r.cell(0, 1).unwrap().usage.covers(b.usage, 4.0));
    }

    #[test]
    fn standard_errors_need_two_replications() {
        assert_eq!(Estimate::from_samples(&[1.0]).std_error, None);
        let e = Estimate::from_samples(&[1.0, 3.0]);
        assert_eq!(e.mean, 2.0);
        assert_eq!(e.std_error, Some(1.0));
    }

    #[test]
    fn rejects_bad_windows() {
        let s = lone_user(MacProtocol::Tdma);
        let mut cfg = SimConfig::new(s, fixed(vec![vec![0, 1]]), PricingPolicy::single(0.0, 0.0), 10.0);
        cfg.warmup = 10.0;
        assert!(simulate(&cfg).is_err());
        cfg.warmup = 1.0;
        cfg.replications = 0;
        assert!(simulate(&cfg).is_err());
    }
}
