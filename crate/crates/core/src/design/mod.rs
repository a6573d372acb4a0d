//! The provider's first-stage problem: pick the single-plan pricing policy
//! whose induced equilibrium maximizes social welfare (benevolent provider)
//! or revenue (selfish provider), subject to revenue covering the fixed cost.
//!
//! Each solver evaluates one candidate per equilibrium type and keeps the
//! best; ties go to the type listed first in [`NeType::priority_order`].

mod csma;
pub mod search;
mod tdma;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::engine::{expected_cost, expected_utility_of_use};
use crate::error::{Error, Result};
use crate::mac::TwoTypeModel;
use crate::model::{ActionProfile, MacProtocol, NeType, PricingPolicy, Scenario};

pub use search::{maximize_2d, scalar_maximize, Maximum, Maximum2};

/// Slack allowed when checking that revenue covers the fixed cost.
pub const IR_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provider {
    /// Maximizes the users' total net utility.
    Benevolent,
    /// Maximizes revenue.
    Selfish,
}

impl Provider {
    pub fn name(self) -> &'static str {
        match self {
            Provider::Benevolent => "benevolent",
            Provider::Selfish => "selfish",
        }
    }
}

impl fmt::Display for Provider {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Objective value of a design step; an infeasible step is worse than every
/// value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Objective {
    Value(f64),
    Infeasible,
}

impl Objective {
    pub fn as_f64(self) -> f64 {
        match self {
            Objective::Value(v) => v,
            Objective::Infeasible => f64::NEG_INFINITY,
        }
    }

    pub fn is_feasible(self) -> bool {
        matches!(self, Objective::Value(_))
    }

    fn from_f64(v: f64) -> Self {
        if v.is_finite() {
            Objective::Value(v)
        } else {
            Objective::Infeasible
        }
    }
}

/// Knobs of the numerical searches.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    /// Grid spacing of one-dimensional searches over subscription probabilities.
    pub pi_step: f64,
    /// Grid points of the subscription-fee search for the both-mixed CSMA case.
    pub fee_points: usize,
    /// Cells per axis of the two-dimensional both-mixed TDMA search.
    pub grid_2d: usize,
    /// Refinement tolerance.
    pub tol: f64,
    /// Leave out the both-mixed equilibrium type entirely.
    pub skip_both_mixed: bool,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig { pi_step: 1e-2, fee_points: 1000, grid_2d: 100, tol: 1e-8, skip_both_mixed: false }
    }
}

/// Smallest and largest subscription probability a mixed type may use.
pub(crate) const PI_LO: f64 = 1e-6;
pub(crate) const PI_HI: f64 = 1.0 - 1e-6;

/// A fully specified operating point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    pub policy: PricingPolicy,
    pub profile: ActionProfile,
    pub welfare: f64,
    pub revenue: f64,
}

/// Best operating point the provider can reach within one equilibrium type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeCandidate {
    pub ne_type: NeType,
    /// The provider's objective as computed by the design step.
    pub objective: Objective,
    pub point: Option<OperatingPoint>,
}

impl NeCandidate {
    pub fn infeasible(ne_type: NeType) -> Self {
        NeCandidate { ne_type, objective: Objective::Infeasible, point: None }
    }

    pub fn feasible(&self) -> bool {
        self.objective.is_feasible()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignSolution {
    pub protocol: MacProtocol,
    pub provider: Provider,
    pub policy: PricingPolicy,
    pub profile: ActionProfile,
    pub ne_type: NeType,
    pub welfare: f64,
    pub revenue: f64,
    pub feasible: bool,
    /// Per-type expected use and cost at the chosen operating point.
    pub breakdown: Vec<TypeBreakdown>,
    pub candidates: Vec<NeCandidate>,
}

impl DesignSolution {
    /// Objective value of the chosen candidate.
    pub fn objective(&self) -> f64 {
        match self.provider {
            Provider::Benevolent => self.welfare,
            Provider::Selfish => self.revenue,
        }
    }

    /// Whether anyone subscribes at the chosen point.
    pub fn operating(&self) -> bool {
        (0..self.profile.num_types()).any(|k| self.profile.subscribed(k) > 0.0)
    }

    /// Revenue net of the fixed cost, which is only incurred when operating.
    pub fn profit(&self, c0: f64) -> f64 {
        self.revenue - if self.operating() { c0 } else { 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TypeBreakdown {
    /// Expected utility of use of one type-`k` user.
    pub use_value: f64,
    /// Expected cost of one type-`k` user.
    pub cost: f64,
}

/// Welfare, revenue and the provider's participation constraint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Objectives {
    /// `sum_k (U_k - C_k) N_k`.
    pub welfare: f64,
    /// `sum_k C_k N_k`.
    pub revenue: f64,
    /// Revenue covers the fixed cost whenever someone subscribes.
    pub ir_satisfied: bool,
    pub per_type: Vec<TypeBreakdown>,
}

/// Evaluates welfare and revenue of a profile under a policy.
pub fn evaluate_objectives(profile: &ActionProfile, policy: &PricingPolicy, s: &Scenario) -> Result<Objectives> {
    let closed = (profile.num_types() == 2 && profile.num_plans() == 2 && policy.plans.len() == 2)
        .then(|| TwoTypeModel::new(s).ok())
        .flatten();
    let mut per_type = Vec::with_capacity(profile.num_types());
    for k in 0..profile.num_types() {
        let b = if s.types[k].count == 0 || profile.subscribed(k) == 0.0 {
            TypeBreakdown { use_value: 0.0, cost: 0.0 }
        } else if let Some(m) = &closed {
            let pi = [profile.row(0)[1], profile.row(1)[1]];
            let plan = policy.plan(1);
            let q = plan.rate_charge();
            let charge = if q == 0.0 { 0.0 } else { q * m.usage(k, pi) };
            TypeBreakdown { use_value: pi[k] * m.use_value(k, pi), cost: pi[k] * (plan.subscription() + charge) }
        } else {
            TypeBreakdown {
                use_value: expected_utility_of_use(k, profile, s, None)?,
                cost: expected_cost(k, profile, policy, s, None)?,
            }
        };
        per_type.push(b);
    }
    let counts = s.counts();
    let welfare = per_type.iter().zip(&counts).map(|(b, &n)| (b.use_value - b.cost) * f64::from(n)).sum();
    let revenue: f64 = per_type.iter().zip(&counts).map(|(b, &n)| b.cost * f64::from(n)).sum();
    let operating = (0..profile.num_types()).any(|k| counts[k] > 0 && profile.subscribed(k) > 0.0);
    let ir_satisfied = !operating || revenue >= s.c0 - IR_TOL * s.c0.max(1.0);
    Ok(Objectives { welfare, revenue, ir_satisfied, per_type })
}

/// Builds a feasible candidate, attaching welfare and revenue recomputed
/// from the policy and profile.
pub(crate) fn candidate(
    ne_type: NeType,
    objective: f64,
    policy: PricingPolicy,
    profile: ActionProfile,
    s: &Scenario,
) -> NeCandidate {
    let objective = Objective::from_f64(objective);
    if !objective.is_feasible() {
        return NeCandidate::infeasible(ne_type);
    }
    match evaluate_objectives(&profile, &policy, s) {
        Ok(o) => NeCandidate {
            ne_type,
            objective,
            point: Some(OperatingPoint { policy, profile, welfare: o.welfare, revenue: o.revenue }),
        },
        Err(_) => NeCandidate::infeasible(ne_type),
    }
}

/// Shut-out candidate: nobody subscribes, nothing is earned or spent.
pub(crate) fn shut_out(s: &Scenario) -> NeCandidate {
    use crate::model::{NeTag, NeType};
    candidate(
        NeType::pair(NeTag::Out, NeTag::Out),
        0.0,
        PricingPolicy::shut_out(),
        ActionProfile::two_type([0.0, 0.0]),
        s,
    )
}

fn same_objective(a: f64, b: f64) -> bool {
    a == b || (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0)
}

fn pick(s: &Scenario, provider: Provider, candidates: Vec<NeCandidate>) -> Result<DesignSolution> {
    let mut best: Option<&NeCandidate> = None;
    for c in candidates.iter().filter(|c| c.feasible()) {
        best = match best {
            None => Some(c),
            Some(b) => {
                let (x, y) = (c.objective.as_f64(), b.objective.as_f64());
                let better = if same_objective(x, y) { c.ne_type.priority() < b.ne_type.priority() } else { x > y };
                Some(if better { c } else { b })
            }
        };
    }
    let best = best.ok_or_else(|| Error::invalid("no feasible candidate"))?;
    let point = best.point.clone().ok_or_else(|| Error::invalid("feasible candidate without an operating point"))?;
    let breakdown = evaluate_objectives(&point.profile, &point.policy, s)?.per_type;
    Ok(DesignSolution {
        protocol: s.protocol,
        provider,
        policy: point.policy,
        profile: point.profile,
        ne_type: best.ne_type.clone(),
        welfare: point.welfare,
        revenue: point.revenue,
        feasible: true,
        breakdown,
        candidates,
    })
}

fn check_two_type(s: &Scenario, protocol_ok: bool, what: &'static str, needs: &'static str) -> Result<TwoTypeModel> {
    crate::model::validate_scenario(s)?;
    if !protocol_ok {
        return Err(Error::Unsupported { what, needs });
    }
    TwoTypeModel::new(s)
}

/// Candidates for every equilibrium type the provider considers.
pub fn design_candidates(s: &Scenario, provider: Provider, cfg: &SearchConfig) -> Result<Vec<NeCandidate>> {
    match s.protocol {
        MacProtocol::Csma { .. } => {
            let m = check_two_type(s, true, "CSMA design", "a CSMA scenario")?;
            Ok(match provider {
                Provider::Benevolent => csma::benevolent(&m, s, cfg),
                Provider::Selfish => csma::selfish(&m, s, cfg),
            })
        }
        MacProtocol::Tdma => {
            let m = check_two_type(s, true, "TDMA design", "a TDMA scenario")?;
            Ok(match provider {
                Provider::Benevolent => tdma::benevolent(&m, s, cfg),
                Provider::Selfish => tdma::selfish(&m, s, cfg),
            })
        }
    }
}

/// Solves the provider's design problem for the scenario's protocol.
pub fn solve(s: &Scenario, provider: Provider, cfg: &SearchConfig) -> Result<DesignSolution> {
    let candidates = design_candidates(s, provider, cfg)?;
    pick(s, provider, candidates)
}

pub fn solve_benevolent_csma(s: &Scenario) -> Result<DesignSolution> {
    require_csma(s)?;
    solve(s, Provider::Benevolent, &SearchConfig::default())
}

pub fn solve_selfish_csma(s: &Scenario) -> Result<DesignSolution> {
    require_csma(s)?;
    solve(s, Provider::Selfish, &SearchConfig::default())
}

pub fn solve_benevolent_tdma(s: &Scenario) -> Result<DesignSolution> {
    require_tdma(s)?;
    solve(s, Provider::Benevolent, &SearchConfig::default())
}

pub fn solve_selfish_tdma(s: &Scenario) -> Result<DesignSolution> {
    require_tdma(s)?;
    solve(s, Provider::Selfish, &SearchConfig::default())
}

fn require_csma(s: &Scenario) -> Result<()> {
    match s.protocol {
        MacProtocol::Csma { .. } => Ok(()),
        MacProtocol::Tdma => Err(Error::Unsupported { what: "CSMA design", needs: "a CSMA scenario" }),
    }
}

fn require_tdma(s: &Scenario) -> Result<()> {
    match s.protocol {
        MacProtocol::Tdma => Ok(()),
        MacProtocol::Csma { .. } => Err(Error::Unsupported { what: "TDMA design", needs: "a TDMA scenario" }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{NeTag, BASELINE_CSMA_P};
    use proptest::prelude::*;

    fn csma(n: [u32; 2], d: [f64; 2], c0: f64) -> Scenario {
        Scenario::two_type_baseline(n, d, MacProtocol::Csma { p: BASELINE_CSMA_P }, c0)
    }

    #[test]
    fn all_out_has_zero_objectives() {
        let s = csma([3, 3], [1.0, 1.0], 2.0);
        let o = evaluate_objectives(&ActionProfile::two_type([0.0, 0.0]), &PricingPolicy::shut_out(), &s).unwrap();
        assert_eq!((o.welfare, o.revenue), (0.0, 0.0));
        assert!(o.ir_satisfied);
    }

    #[test]
    fn free_access_meets_cost_only_when_cost_is_zero() {
        let profile = ActionProfile::two_type([1.0, 1.0]);
        let free = PricingPolicy::single(0.0, 0.0);
        let zero = evaluate_objectives(&profile, &free, &csma([3, 3], [0.1, 0.1], 0.0)).unwrap();
        assert_eq!(zero.revenue, 0.0);
        assert!(zero.ir_satisfied);
        let costly = evaluate_objectives(&profile, &free, &csma([3, 3], [0.1, 0.1], 1.0)).unwrap();
        assert!(!costly.ir_satisfied);
    }

    #[test]
    fn ties_prefer_higher_priority_types() {
        let s = csma([2, 2], [0.1, 0.1], 0.0);
        let a = candidate(
            NeType::pair(NeTag::Out, NeTag::In),
            1.0,
            PricingPolicy::single(0.0, 0.0),
            ActionProfile::two_type([0.0, 1.0]),
            &s,
        );
        let b = candidate(
            NeType::pair(NeTag::In, NeTag::In),
            1.0,
            PricingPolicy::single(0.0, 0.0),
            ActionProfile::two_type([1.0, 1.0]),
            &s,
        );
        let sol = pick(&s, Provider::Benevolent, vec![a, b]).unwrap();
        assert_eq!(sol.ne_type, NeType::pair(NeTag::In, NeTag::In));
    }

    proptest! {
        #[test]
        fn welfare_plus_revenue_is_total_use(
            p1 in 0.0f64..1.0, p2 in 0.0f64..1.0, ps in 0.0f64..5.0, q in 0.0f64..5.0, n1 in 0u32..10, n2 in 0u32..10, tdma: bool,
        ) {
            let protocol = if tdma { MacProtocol::Tdma } else { MacProtocol::Csma { p: BASELINE_CSMA_P } };
            let s = Scenario::two_type_baseline([n1, n2], [1.0, 0.1], protocol, 0.0);
            let policy = PricingPolicy::single(ps, if tdma { q } else { 0.0 });
            let o = evaluate_objectives(&ActionProfile::two_type([p1, p2]), &policy, &s).unwrap();
            let total: f64 = o.per_type.iter().zip([n1, n2]).map(|(b, n)| b.use_value * f64::from(n)).sum();
            prop_assert!((o.welfare + o.revenue - total).abs() <= 1e-9 * total.abs().max(1.0));
        }
    }
}
