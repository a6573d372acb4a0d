//! Oracle suites: closed forms against exact enumeration, the design
//! procedures against a brute-force price search, the exact engine against
//! Monte Carlo, and the reduction of TDMA menus to a single paid plan.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::design::{solve, Provider, SearchConfig};
use crate::engine::{cell_values, expected_cost, expected_utility_of_use, plan_values, stationary_distribution};
use crate::error::{Error, Result};
use crate::game::{collapse_policy, is_nash, NASH_TOL};
use crate::mac::{csma_expected_utility, tdma_expected_usage, tdma_expected_utility, TwoTypeModel};
use crate::model::{
    ActionProfile, AdmissionPolicy, CountMatrix, MacProtocol, NeType, PricingPlan, PricingPolicy, Scenario, UserType,
    BASELINE_CSMA_P,
};
use crate::sim::{simulate, Assignment, SimConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerifyMode {
    Lemmas,
    Solver,
    Simulator,
    Collapse,
}

impl VerifyMode {
    pub const ALL: [VerifyMode; 4] = [VerifyMode::Lemmas, VerifyMode::Solver, VerifyMode::Simulator, VerifyMode::Collapse];

    pub fn name(self) -> &'static str {
        match self {
            VerifyMode::Lemmas => "lemmas",
            VerifyMode::Solver => "solver",
            VerifyMode::Simulator => "simulator",
            VerifyMode::Collapse => "collapse",
        }
    }
}

impl fmt::Display for VerifyMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for VerifyMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        VerifyMode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Invalid(vec![format!("unknown verify mode {s:?}")]))
    }
}

/// Outcome of one oracle suite.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub suite: String,
    pub checks: usize,
    pub failures: Vec<String>,
    /// Cases that are reported but do not count as failures.
    pub notes: Vec<String>,
}

impl VerifyReport {
    fn new(suite: impl Into<String>) -> Self {
        VerifyReport { suite: suite.into(), ..Default::default() }
    }

    fn check(&mut self, ok: bool, describe: impl FnOnce() -> String) {
        self.checks += 1;
        if !ok {
            self.failures.push(describe());
        }
    }

    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    fn absorb(&mut self, other: VerifyReport) {
        self.checks += other.checks;
        self.failures.extend(other.failures);
        self.notes.extend(other.notes);
    }
}

impl fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {} checks, {} failures", self.suite, self.checks, self.failures.len())?;
        if !self.notes.is_empty() {
            write!(f, ", {} notes", self.notes.len())?;
        }
        Ok(())
    }
}

/// `|a - b| <= rel * max(|a|, |b|)`, with exact zeros matching only zeros.
pub fn rel_close(a: f64, b: f64, rel: f64) -> bool {
    a == b || (a - b).abs() <= rel * a.abs().max(b.abs())
}

/// Runs one suite with its default settings.
pub fn verify(mode: VerifyMode) -> Result<VerifyReport> {
    match mode {
        VerifyMode::Lemmas => {
            let mut r = VerifyReport::new("lemmas");
            r.absorb(verify_lemma_csma()?);
            r.absorb(verify_lemma_tdma()?);
            Ok(r)
        }
        VerifyMode::Solver => verify_solver(&SearchConfig::default(), &BruteForceGrid::default()),
        VerifyMode::Simulator => verify_simulator(SIM_EVENTS, SIM_REPLICATIONS, SIM_SEED),
        VerifyMode::Collapse => verify_collapse(COLLAPSE_POLICIES, COLLAPSE_SEED),
    }
}

// ---------------------------------------------------------------------------
// Closed forms against enumeration

const LEMMA_TOL: f64 = 1e-9;
const LEMMA_PI: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];
const LEMMA_DEMANDS: [f64; 2] = [0.1, 1.0];

fn lemma_grid(protocol: MacProtocol) -> impl Iterator<Item = (Scenario, ActionProfile)> {
    (1..=6u32).flat_map(move |n1| {
        (1..=6u32).flat_map(move |n2| {
            LEMMA_DEMANDS.into_iter().flat_map(move |d1| {
                LEMMA_DEMANDS.into_iter().flat_map(move |d2| {
                    let s = Scenario::two_type_baseline([n1, n2], [d1, d2], protocol, 0.0);
                    LEMMA_PI.into_iter().flat_map(move |a| {
                        let s = s.clone();
                        LEMMA_PI.into_iter().map(move |b| (s.clone(), ActionProfile::two_type([a, b])))
                    })
                })
            })
        })
    })
}

/// CSMA expected utility and cost in closed form against enumeration.
pub fn verify_lemma_csma() -> Result<VerifyReport> {
    let mut r = VerifyReport::new("csma closed form vs enumeration");
    let policy = PricingPolicy::single(1.5, 0.0);
    for (s, profile) in lemma_grid(MacProtocol::Csma { p: BASELINE_CSMA_P }) {
        for k in 0..2 {
            let (u, c) = csma_expected_utility(k, &profile, None, &policy, &s)?;
            let u_exact = expected_utility_of_use(k, &profile, &s, None)?;
            let c_exact = expected_cost(k, &profile, &policy, &s, None)?;
            r.check(rel_close(u, u_exact, LEMMA_TOL) && rel_close(c, c_exact, LEMMA_TOL), || {
                format!("N={:?} pi={:?} k={k}: U {u} vs {u_exact}, C {c} vs {c_exact}", s.counts(), profile.pi)
            });
        }
    }
    Ok(r)
}

/// TDMA expected utility and expected usage in closed form against
/// enumeration.
pub fn verify_lemma_tdma() -> Result<VerifyReport> {
    let mut r = VerifyReport::new("tdma closed form vs enumeration");
    for (s, profile) in lemma_grid(MacProtocol::Tdma) {
        for k in 0..2 {
            let u = tdma_expected_utility(k, &profile, None, &s)?;
            let u_exact = expected_utility_of_use(k, &profile, &s, None)?;
            let b = tdma_expected_usage(k, &profile, &s)?;
            let b_exact = plan_values(k, &profile, &s)?[1].usage;
            r.check(rel_close(u, u_exact, LEMMA_TOL) && rel_close(b, b_exact, LEMMA_TOL), || {
                format!("N={:?} pi={:?} k={k}: U {u} vs {u_exact}, B {b} vs {b_exact}", s.counts(), profile.pi)
            });
        }
    }
    Ok(r)
}

// ---------------------------------------------------------------------------
// Brute-force price search

/// Resolution of the brute-force price search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BruteForceGrid {
    /// Subscription-fee grid points under CSMA.
    pub fee_points: usize,
    /// Points per axis of the `(p_s, q)` grid under TDMA.
    pub price_points: usize,
    /// Points per axis of every zoom grid.
    pub zoom_points: usize,
    pub zoom_rounds: usize,
    /// Best coarse points that get zoomed into, per objective.
    pub zoom_seeds: usize,
    /// Subscription-probability grid used to bracket equilibria with one
    /// mixed type.
    pub pi_points: usize,
    /// Points per axis of the grid used to bracket both-mixed equilibria.
    pub joint_points: usize,
}

impl Default for BruteForceGrid {
    fn default() -> Self {
        BruteForceGrid { fee_points: 10_000, price_points: 300, zoom_points: 21, zoom_rounds: 4, zoom_seeds: 4, pi_points: 200, joint_points: 40 }
    }
}

/// Best objective found and where.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BruteForceBest {
    pub value: f64,
    pub p_s: f64,
    pub q: f64,
    pub ne_type: NeType,
    pub pi: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BruteForceOptimum {
    pub welfare: BruteForceBest,
    pub revenue: BruteForceBest,
    pub prices_evaluated: usize,
}

/// Subscription probabilities strictly inside this band count as mixed.
const MIXED_LO: f64 = 1e-6;
const MIXED_HI: f64 = 1.0 - 1e-6;

/// Price-independent tables of expected use and usage on a grid of
/// subscription probabilities, so each price costs only arithmetic.
struct Tables<'a> {
    m: &'a TwoTypeModel,
    xs: Vec<f64>,
    ys: Vec<f64>,
    /// `single[k][fixed][i]`: (use, usage) of type `k` when it subscribes
    /// with probability `xs[i]` and the other type with `fixed`.
    single: [[Vec<(f64, f64)>; 2]; 2],
    /// `joint[k][i][j]` at `(ys[i], ys[j])`.
    joint: [Vec<Vec<(f64, f64)>>; 2],
}

impl<'a> Tables<'a> {
    fn new(m: &'a TwoTypeModel, points: usize, joint_points: usize) -> Self {
        let axis = |n: usize| -> Vec<f64> {
            (0..=n).map(|i| MIXED_LO + (MIXED_HI - MIXED_LO) * i as f64 / n as f64).collect()
        };
        let xs = axis(points);
        let ys = axis(joint_points);
        let eval = |k: usize, pi: [f64; 2]| (m.use_value(k, pi), m.usage(k, pi));
        let single = [0, 1].map(|k| {
            [0.0, 1.0].map(|fixed| {
                xs.iter()
                    .map(|&x| {
                        let mut pi = [fixed; 2];
                        pi[k] = x;
                        eval(k, pi)
                    })
                    .collect()
            })
        });
        let joint =
            [0, 1].map(|k| ys.iter().map(|&a| ys.iter().map(|&b| eval(k, [a, b])).collect()).collect());
        Tables { m, xs, ys, single, joint }
    }
}

/// Net value of subscribing given cached (use, usage).
fn net(v: (f64, f64), p_s: f64, q: f64) -> f64 {
    v.0 - p_s - if q == 0.0 { 0.0 } else { q * v.1 }
}

/// Every equilibrium of the one-plan game at `(p_s, q)` that the grid
/// brackets, as subscription probabilities.
fn equilibria_at(t: &Tables, p_s: f64, q: f64) -> Vec<[f64; 2]> {
    let m = t.m;
    let present = [m.count(0) > 0, m.count(1) > 0];
    let w = |k: usize, pi: [f64; 2]| net((m.use_value(k, pi), m.usage(k, pi)), p_s, q);
    let mut out = Vec::new();
    // Pure profiles.
    for a in [0.0, 1.0] {
        for b in [0.0, 1.0] {
            let pi = [a, b];
            let ok = (0..2).all(|k| {
                let v = w(k, pi);
                !present[k] || if pi[k] == 1.0 { v >= 0.0 } else { v <= 0.0 }
            });
            if ok {
                out.push(pi);
            }
        }
    }
    let n = t.xs.len();
    // One type mixed, the other pure.
    for k in 0..2 {
        if !present[k] {
            continue;
        }
        let o = 1 - k;
        for (fi, fixed) in [0.0, 1.0].into_iter().enumerate() {
            let at = |x: f64| {
                let mut pi = [fixed; 2];
                pi[k] = x;
                pi
            };
            let vals: Vec<f64> = t.single[k][fi].iter().map(|&v| net(v, p_s, q)).collect();
            for i in 0..n - 1 {
                if (vals[i] > 0.0) == (vals[i + 1] > 0.0) && vals[i] != 0.0 {
                    continue;
                }
                let (mut a, mut b) = (t.xs[i], t.xs[i + 1]);
                let positive_at_a = vals[i] > 0.0;
                for _ in 0..60 {
                    let mid = 0.5 * (a + b);
                    if (w(k, at(mid)) > 0.0) == positive_at_a {
                        a = mid;
                    } else {
                        b = mid;
                    }
                }
                let pi = at(0.5 * (a + b));
                if w(k, pi).abs() > 1e-9 {
                    continue;
                }
                let v = w(o, pi);
                if !present[o] || if fixed == 1.0 { v >= 0.0 } else { v <= 0.0 } {
                    out.push(pi);
                }
            }
        }
    }
    // Both mixed: Newton from every cell where both conditions change sign.
    if present[0] && present[1] {
        let vals: [Vec<Vec<f64>>; 2] =
            [0, 1].map(|k| t.joint[k].iter().map(|row| row.iter().map(|&v| net(v, p_s, q)).collect()).collect());
        let mut found: Vec<[f64; 2]> = Vec::new();
        let n = t.ys.len();
        for i in 0..n - 1 {
            for j in 0..n - 1 {
                let straddles = |k: usize| {
                    let c = [vals[k][i][j], vals[k][i + 1][j], vals[k][i][j + 1], vals[k][i + 1][j + 1]];
                    c.iter().any(|&v| v >= 0.0) && c.iter().any(|&v| v <= 0.0)
                };
                if !(straddles(0) && straddles(1)) {
                    continue;
                }
                let mut x = [0.5 * (t.ys[i] + t.ys[i + 1]), 0.5 * (t.ys[j] + t.ys[j + 1])];
                let f = |x: [f64; 2]| [w(0, x), w(1, x)];
                for _ in 0..50 {
                    let fx = f(x);
                    if fx[0].abs() < 1e-13 && fx[1].abs() < 1e-13 {
                        break;
                    }
                    let h = 1e-7;
                    let d0 = f([x[0] + h, x[1]]);
                    let d1 = f([x[0], x[1] + h]);
                    let jac = [
                        [(d0[0] - fx[0]) / h, (d1[0] - fx[0]) / h],
                        [(d0[1] - fx[1]) / h, (d1[1] - fx[1]) / h],
                    ];
                    let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
                    if det == 0.0 || !det.is_finite() {
                        break;
                    }
                    x = [
                        x[0] - (fx[0] * jac[1][1] - fx[1] * jac[0][1]) / det,
                        x[1] - (jac[0][0] * fx[1] - jac[1][0] * fx[0]) / det,
                    ];
                    if !(x[0].is_finite() && x[1].is_finite()) {
                        break;
                    }
                }
                let fx = f(x);
                let inside = x.iter().all(|v| (MIXED_LO..=MIXED_HI).contains(v));
                if inside
                    && fx[0].abs() < 1e-9
                    && fx[1].abs() < 1e-9
                    && !found.iter().any(|y| (y[0] - x[0]).abs() < 1e-8 && (y[1] - x[1]).abs() < 1e-8)
                {
                    found.push(x);
                }
            }
        }
        out.extend(found);
    }
    out
}

/// (welfare, revenue) of an equilibrium, or `None` if revenue misses the
/// fixed cost while someone subscribes.
fn accounts(m: &TwoTypeModel, c0: f64, pi: [f64; 2], p_s: f64, q: f64) -> Option<(f64, f64)> {
    let n = m.counts();
    let mut total_use = 0.0;
    let mut revenue = 0.0;
    for k in 0..2 {
        if pi[k] == 0.0 || n[k] == 0.0 {
            continue;
        }
        let charge = p_s + if q == 0.0 { 0.0 } else { q * m.usage(k, pi) };
        total_use += pi[k] * n[k] * m.use_value(k, pi);
        revenue += pi[k] * n[k] * charge;
    }
    let operating = (0..2).any(|k| pi[k] > 0.0 && n[k] > 0.0);
    if operating && revenue < c0 - 1e-9 * c0.max(1.0) {
        return None;
    }
    Some((total_use - revenue, revenue))
}

#[derive(Clone, Copy)]
struct Point {
    p_s: f64,
    q: f64,
    welfare: Best,
    revenue: Best,
}

/// Best objective value at a price and the equilibrium attaining it.
type Best = Option<(f64, [f64; 2])>;

fn evaluate_price(t: &Tables, c0: f64, p_s: f64, q: f64) -> Point {
    let mut pt = Point { p_s, q, welfare: None, revenue: None };
    for pi in equilibria_at(t, p_s, q) {
        if let Some((w, r)) = accounts(t.m, c0, pi, p_s, q) {
            if pt.welfare.is_none_or(|b| w > b.0) {
                pt.welfare = Some((w, pi));
            }
            if pt.revenue.is_none_or(|b| r > b.0) {
                pt.revenue = Some((r, pi));
            }
        }
    }
    pt
}

/// Dense search over prices: at every price, enumerate the equilibria,
/// keep those meeting the cost, and take the best one for each objective.
/// Shutting the service (infinite fee) is always available at zero.
pub fn brute_force(s: &Scenario, grid: &BruteForceGrid) -> Result<BruteForceOptimum> {
    let m = TwoTypeModel::new(s)?;
    let tables = Tables::new(&m, grid.pi_points, grid.joint_points);
    let fee_max = 1.02 * (0..2).map(|k| m.lone_use_value(k)).fold(0.0, f64::max);
    let tdma = s.protocol.is_tdma();
    let rate_max = if tdma {
        let b_min = (0..2).map(|k| m.usage(k, [1.0, 1.0])).fold(f64::INFINITY, f64::min);
        fee_max / b_min
    } else {
        0.0
    };
    let mut evaluated = 0usize;
    let mut eval = |p_s: f64, q: f64| {
        evaluated += 1;
        evaluate_price(&tables, s.c0, p_s, q)
    };

    let mut points = Vec::new();
    let cell = if tdma {
        let n = grid.price_points;
        let cell = [fee_max / n as f64, rate_max / n as f64];
        for i in 0..=n {
            for j in 0..=n {
                points.push(eval(i as f64 * cell[0], j as f64 * cell[1]));
            }
        }
        cell
    } else {
        let n = grid.fee_points;
        let cell = [fee_max / n as f64, 0.0];
        for i in 0..=n {
            points.push(eval(i as f64 * cell[0], 0.0));
        }
        cell
    };

    let mut best_w = BruteForceBest { value: 0.0, p_s: f64::INFINITY, q: 0.0, ne_type: NeType::of(&ActionProfile::two_type([0.0, 0.0])), pi: [0.0; 2] };
    let mut best_r = best_w.clone();
    let offer = |best: &mut BruteForceBest, cand: Best, p_s: f64, q: f64| {
        if let Some((v, pi)) = cand {
            if v > best.value {
                *best = BruteForceBest { value: v, p_s, q, ne_type: NeType::of(&ActionProfile::two_type(pi)), pi };
            }
        }
    };
    for pt in &points {
        offer(&mut best_w, pt.welfare, pt.p_s, pt.q);
        offer(&mut best_r, pt.revenue, pt.p_s, pt.q);
    }

    // Zoom into the best coarse points of each objective, per equilibrium
    // type, so a long near-optimal ridge of one type cannot crowd out the
    // corner optimum of another.
    let pick = |key: &dyn Fn(&Point) -> Best| -> Vec<(f64, f64)> {
        let mut ranked: Vec<(NeType, f64, f64, f64)> = points
            .iter()
            .filter_map(|p| key(p).map(|(v, pi)| (NeType::of(&ActionProfile::two_type(pi)), v, p.p_s, p.q)))
            .collect();
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1));
        let mut taken: Vec<(NeType, usize)> = Vec::new();
        let mut seeds = Vec::new();
        for (t, _, p, q) in ranked {
            let slot = match taken.iter().position(|e| e.0 == t) {
                Some(i) => i,
                None => {
                    taken.push((t, 0));
                    taken.len() - 1
                }
            };
            if taken[slot].1 < grid.zoom_seeds {
                taken[slot].1 += 1;
                seeds.push((p, q));
            }
        }
        seeds
    };
    let seeds: Vec<(bool, (f64, f64))> = pick(&|p| p.welfare)
        .into_iter()
        .map(|s| (true, s))
        .chain(pick(&|p| p.revenue).into_iter().map(|s| (false, s)))
        .collect();
    let z = grid.zoom_points.max(3);
    for (for_welfare, (p0, q0)) in seeds {
        let mut centre = (p0, q0);
        let mut half = cell;
        for _ in 0..grid.zoom_rounds {
            let mut local: Option<(f64, f64, f64)> = None;
            let qs: Vec<f64> = if tdma {
                (0..z).map(|j| (centre.1 - half[1] + 2.0 * half[1] * j as f64 / (z - 1) as f64).max(0.0)).collect()
            } else {
                vec![0.0]
            };
            for i in 0..z {
                let p_s = (centre.0 - half[0] + 2.0 * half[0] * i as f64 / (z - 1) as f64).max(0.0);
                for &q in &qs {
                    let pt = eval(p_s, q);
                    offer(&mut best_w, pt.welfare, p_s, q);
                    offer(&mut best_r, pt.revenue, p_s, q);
                    let v = if for_welfare { pt.welfare } else { pt.revenue };
                    if let Some((v, _)) = v {
                        if local.is_none_or(|l| v > l.0) {
                            local = Some((v, p_s, q));
                        }
                    }
                }
            }
            if let Some((_, p, q)) = local {
                centre = (p, q);
            }
            half = [2.0 * half[0] / (z - 1) as f64, 2.0 * half[1] / (z - 1) as f64];
        }
    }
    Ok(BruteForceOptimum { welfare: best_w, revenue: best_r, prices_evaluated: evaluated })
}

/// Relative tolerance between the design procedures and brute force.
pub const SOLVER_TOL: f64 = 1e-3;

/// Design procedures against brute force for all small populations, both
/// providers and protocols, and two fixed costs.
pub fn verify_solver(cfg: &SearchConfig, grid: &BruteForceGrid) -> Result<VerifyReport> {
    let mut r = VerifyReport::new("design procedures vs brute force");
    for protocol in [MacProtocol::Csma { p: BASELINE_CSMA_P }, MacProtocol::Tdma] {
        for n1 in 1..=3 {
            for n2 in 1..=3 {
                for c0 in [0.0, 0.5] {
                    let s = Scenario::two_type_baseline([n1, n2], [1.0, 1.0], protocol, c0);
                    r.absorb(compare_with_brute_force(&s, cfg, grid)?);
                }
            }
        }
    }
    Ok(r)
}

/// One scenario of [`verify_solver`].
pub fn compare_with_brute_force(s: &Scenario, cfg: &SearchConfig, grid: &BruteForceGrid) -> Result<VerifyReport> {
    let mut r = VerifyReport::new("design procedures vs brute force");
    let brute = brute_force(s, grid)?;
    for provider in [Provider::Benevolent, Provider::Selfish] {
        let sol = solve(s, provider, cfg)?;
        let (got, want) = match provider {
            Provider::Benevolent => (sol.welfare, &brute.welfare),
            Provider::Selfish => (sol.revenue, &brute.revenue),
        };
        r.check(rel_close(got, want.value, SOLVER_TOL), || {
            format!(
                "{} {} N={:?} C0={}: procedure {got} ({}) vs brute force {} ({} at p_s={}, q={})",
                provider,
                s.protocol,
                s.counts(),
                s.c0,
                sol.ne_type,
                want.value,
                want.ne_type,
                want.p_s,
                want.q
            )
        });
    }
    Ok(r)
}

// ---------------------------------------------------------------------------
// Engine against Monte Carlo

pub const SIM_EVENTS: f64 = 1e6;
pub const SIM_REPLICATIONS: usize = 8;
pub const SIM_SEED: u64 = 20_240_601;
/// Standard errors allowed between an estimate and the exact value.
pub const SIM_Z: f64 = 3.0;

/// The fixed scenarios of the simulator check: name, scenario, outcome.
pub fn simulator_scenarios() -> Vec<(&'static str, Scenario, CountMatrix)> {
    let csma = MacProtocol::Csma { p: BASELINE_CSMA_P };
    let video = UserType { alpha: 10.0, beta: 0.3, lambda: 1.0, mu: 1.0, count: 1 };
    let single = |t: UserType, protocol| Scenario {
        types: vec![t],
        delta_t: 1.0,
        c0: 0.0,
        protocol,
        admission: AdmissionPolicy::AdmitAll,
    };
    let rows = |r: Vec<Vec<u32>>| CountMatrix::from_rows(r).expect("static outcome");
    let mut capped = Scenario::two_type_baseline([3, 4], [1.0, 0.5], MacProtocol::Tdma, 0.0);
    capped.admission = AdmissionPolicy::PerPlanCap { caps: vec![None, Some(2), Some(2)] };
    vec![
        ("lone user, CSMA", single(video, csma), rows(vec![vec![0, 1]])),
        (
            "three low-demand users, CSMA",
            single(UserType { lambda: 0.1, count: 3, ..video }, csma),
            rows(vec![vec![0, 3]]),
        ),
        (
            "five and five, TDMA",
            Scenario::two_type_baseline([5, 5], [1.0, 1.0], MacProtocol::Tdma, 0.0),
            rows(vec![vec![0, 5], vec![0, 5]]),
        ),
        (
            "mixed demands with a dummy subscriber, CSMA",
            Scenario::two_type_baseline([3, 3], [1.0, 0.1], csma, 0.0),
            rows(vec![vec![1, 2], vec![0, 3]]),
        ),
        ("two plans with caps, TDMA", capped, rows(vec![vec![0, 2, 1], vec![1, 1, 2]])),
    ]
}

fn free_policy(plans: usize) -> PricingPolicy {
    let mut v = vec![PricingPlan::Dummy];
    v.extend((1..plans).map(|_| PricingPlan::paid(0.0, 0.0)));
    PricingPolicy { plans: v }
}

/// Every non-empty cell's online count, utility of use and guaranteed rate
/// against the exact engine, within [`SIM_Z`] standard errors.
pub fn verify_simulator(events: f64, replications: usize, seed: u64) -> Result<VerifyReport> {
    let mut r = VerifyReport::new("simulator vs exact engine");
    for (name, s, n) in simulator_scenarios() {
        let horizon = SimConfig::horizon_for_events(&s, &n, events);
        let mut cfg = SimConfig::new(s.clone(), Assignment::Fixed { n: n.clone() }, free_policy(n.cols()), horizon);
        cfg.seed = seed;
        cfg.replications = replications;
        let report = simulate(&cfg)?;
        let exact = stationary_distribution(&n, &s)?;
        for cell in &report.cells {
            let (k, l) = (cell.k, cell.plan);
            let v = cell_values(k, l, &n, &s)?;
            let online = exact.mean_occupancy(k, l);
            for (what, est, want) in
                [("online", cell.online, online), ("V", cell.use_value, v.use_value), ("B", cell.usage, v.usage)]
            {
                r.check(est.covers(want, SIM_Z), || {
                    format!(
                        "{name}: cell ({k},{l}) {what} {} +- {:?} vs exact {want}",
                        est.mean, est.std_error
                    )
                });
            }
        }
    }
    Ok(r)
}

// ---------------------------------------------------------------------------
// Menu reduction

pub const COLLAPSE_POLICIES: usize = 100;
pub const COLLAPSE_SEED: u64 = 7;
const COLLAPSE_TOL: f64 = 1e-9;

/// A two-paid-plan TDMA menu together with an equilibrium of its game.
#[derive(Debug, Clone, PartialEq)]
pub struct MenuEquilibrium {
    pub scenario: Scenario,
    pub policy: PricingPolicy,
    pub profile: ActionProfile,
}

const SUPPORTS: [&[usize]; 7] = [&[1], &[2], &[1, 2], &[0, 1], &[0, 2], &[0, 1, 2], &[0]];

fn random_row(rng: &mut ChaCha8Rng, support: &[usize]) -> Vec<f64> {
    let mut row = vec![0.0; 3];
    let weights: Vec<f64> = support.iter().map(|_| rng.random_range(0.1..1.0)).collect();
    let total: f64 = weights.iter().sum();
    for (&l, w) in support.iter().zip(&weights) {
        row[l] = w / total;
    }
    // Exact row sums keep the profile valid.
    let last = *support.last().expect("nonempty support");
    row[last] = 1.0 - support.iter().filter(|&&l| l != last).map(|&l| row[l]).sum::<f64>();
    row
}

/// Draws a random two-type TDMA scenario and profile, then prices both paid
/// plans so that every plan in each type's support gives that type the same
/// net value. Returns `None` when the draw admits no nonnegative prices or
/// the result is not an equilibrium.
pub fn random_menu_equilibrium(rng: &mut ChaCha8Rng) -> Result<Option<MenuEquilibrium>> {
    let n = [rng.random_range(1..=4u32), rng.random_range(1..=4u32)];
    let demand = [rng.random_range(0.1..2.0), rng.random_range(0.1..2.0)];
    let s = Scenario::two_type_baseline(n, demand, MacProtocol::Tdma, 0.0);
    let supports = [SUPPORTS[rng.random_range(0..SUPPORTS.len())], SUPPORTS[rng.random_range(0..SUPPORTS.len())]];
    let rows: Vec<Vec<f64>> = supports.iter().map(|sup| random_row(rng, sup)).collect();
    let profile = ActionProfile::new(rows)?;
    // Paid plans are interchangeable for the users, so the per-plan use and
    // usage of a type do not depend on the plan.
    let values: Vec<(f64, f64)> = (0..2)
        .map(|k| plan_values(k, &profile, &s).map(|v| (v[1].use_value, v[1].usage)))
        .collect::<Result<_>>()?;
    // Target net value of every plan in the support.
    let target: Vec<f64> = (0..2)
        .map(|k| if supports[k].contains(&0) { 0.0 } else { rng.random_range(0.0..0.5) * values[k].0.max(0.0) })
        .collect();
    // Charge each type must face on the plans it uses.
    let charge: Vec<f64> = (0..2).map(|k| values[k].0 - target[k]).collect();
    let mut plans = vec![PricingPlan::Dummy];
    for l in 1..=2 {
        let users: Vec<usize> = (0..2).filter(|&k| supports[k].contains(&l)).collect();
        let (p_s, q) = match users.as_slice() {
            [] => {
                let fee = rng.random_range(0.0..2.0) * values[0].0.max(values[1].0).max(1.0);
                (fee, rng.random_range(0.0..5.0))
            }
            [k] => {
                let q = rng.random_range(0.0..1.0) * charge[*k].max(0.0) / values[*k].1;
                (charge[*k] - q * values[*k].1, q)
            }
            _ => {
                let (b0, b1) = (values[0].1, values[1].1);
                if b0 == b1 {
                    return Ok(None);
                }
                let q = (charge[1] - charge[0]) / (b1 - b0);
                (charge[0] - q * b0, q)
            }
        };
        if !(p_s >= 0.0 && q >= 0.0) {
            return Ok(None);
        }
        plans.push(PricingPlan::paid(p_s, q));
    }
    let policy = PricingPolicy::new(plans)?;
    if !is_nash(&profile, &policy, &s, NASH_TOL)?.is_nash {
        return Ok(None);
    }
    Ok(Some(MenuEquilibrium { scenario: s, policy, profile }))
}

/// Collapses random two-plan menus at an equilibrium and checks that the
/// single-plan policy keeps both types' costs and the equilibrium. Systems
/// without an exact nonnegative solution are reported, not failed.
pub fn verify_collapse(count: usize, seed: u64) -> Result<VerifyReport> {
    let mut r = VerifyReport::new("single-plan reduction of TDMA menus");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut accepted = 0;
    let mut draws = 0;
    while accepted < count {
        draws += 1;
        if draws > 10_000 * count.max(1) {
            return Err(Error::invalid("could not draw enough menu equilibria"));
        }
        let Some(me) = random_menu_equilibrium(&mut rng)? else {
            continue;
        };
        accepted += 1;
        let s = &me.scenario;
        match collapse_policy(&me.policy, &me.profile, s) {
            Ok(c) => {
                let mut costs_ok = true;
                let mut detail = String::new();
                for k in 0..2 {
                    let before = expected_cost(k, &me.profile, &me.policy, s, None)?;
                    let after = expected_cost(k, &c.profile, &c.policy, s, None)?;
                    if (before - after).abs() > COLLAPSE_TOL * before.abs().max(1.0) {
                        costs_ok = false;
                        detail.push_str(&format!(" type {k}: {before} vs {after};"));
                    }
                }
                let nash = is_nash(&c.profile, &c.policy, s, NASH_TOL)?;
                r.check(costs_ok && nash.is_nash, || {
                    format!(
                        "menu {:?} at {:?}: collapsed to {:?};{detail} equilibrium violation {}",
                        me.policy.plans, me.profile.pi, c.policy.plans, nash.worst_violation
                    )
                });
            }
            Err(Error::NoExactCollapse(why)) => {
                r.notes.push(format!("menu {:?} at {:?}: {why}", me.policy.plans, me.profile.pi));
            }
            Err(e) => return Err(e),
        }
    }
    r.notes.insert(0, format!("{accepted} menus accepted out of {draws} draws"));
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mode_names_round_trip() {
        for m in VerifyMode::ALL {
            assert_eq!(m.name().parse::<VerifyMode>().unwrap(), m);
        }
        assert!("nope".parse::<VerifyMode>().is_err());
    }

    #[test]
    fn brute_force_finds_the_lone_monopoly_price() {
        let s = Scenario::two_type_baseline([2, 1], [1.0, 1.0], MacProtocol::Csma { p: BASELINE_CSMA_P }, 0.0);
        let m = TwoTypeModel::new(&s).unwrap();
        let grid = BruteForceGrid { fee_points: 500, ..BruteForceGrid::default() };
        let b = brute_force(&s, &grid).unwrap();
        // Revenue can never exceed total use with everybody in at zero price.
        let ceiling = 2.0 * m.use_value(0, [1.0, 1.0]) + m.use_value(1, [1.0, 1.0]);
        assert!(b.revenue.value <= ceiling + 1e-9);
        assert!(b.revenue.value > 0.0);
        assert!(b.welfare.value >= b.revenue.value - 1e-9 || b.welfare.value > 0.0);
    }

    #[test]
    fn brute_force_agrees_on_a_small_tdma_case() {
        let s = Scenario::two_type_baseline([2, 1], [1.0, 0.1], MacProtocol::Tdma, 0.5);
        let grid = BruteForceGrid { price_points: 80, ..BruteForceGrid::default() };
        let r = compare_with_brute_force(&s, &SearchConfig::default(), &grid).unwrap();
        assert!(r.passed(), "{:?}", r.failures);
    }

    #[test]
    fn menu_equilibria_are_equilibria() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut seen = 0;
        for _ in 0..200 {
            if let Some(me) = random_menu_equilibrium(&mut rng).unwrap() {
                assert!(is_nash(&me.profile, &me.policy, &me.scenario, NASH_TOL).unwrap().is_nash);
                seen += 1;
            }
        }
        assert!(seen > 0);
    }
}
