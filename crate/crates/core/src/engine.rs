//! Exact steady-state evaluation by enumerating the admissible system states.
//!
//! Every user on plan `l` toggles between offline and online with rates
//! `lambda_k` and `mu_k`. Without admission control the cells are independent
//! binomials; with per-plan caps the product form is truncated to the states
//! whose pricing state respects the caps and renormalized.

use crate::error::{Error, Result};
use crate::mac::{throughput_for_count, utility_of_use};
use crate::model::{
    check_outcome, ActionProfile, CountMatrix, PricingPolicy, RandomizationOutcome, Scenario, SystemState,
};

/// Largest box `prod (n_kl + 1)` the engine is willing to walk.
pub const MAX_STATES: u128 = 10_000_000;

/// Stationary law over the admissible system states.
#[derive(Debug, Clone, PartialEq)]
pub struct StationaryDistribution {
    pub support: Vec<(SystemState, f64)>,
}

impl StationaryDistribution {
    pub fn total(&self) -> f64 {
        self.support.iter().map(|(_, p)| p).sum()
    }

    pub fn probability(&self, x: &SystemState) -> f64 {
        self.support.iter().find(|(s, _)| s == x).map_or(0.0, |(_, p)| *p)
    }

    /// `E[x_kl]`.
    pub fn mean_occupancy(&self, k: usize, l: usize) -> f64 {
        self.support.iter().map(|(x, p)| p * f64::from(x.get(k, l))).sum()
    }
}

/// Per-plan expectations for a user who is pinned to that plan.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PlanValue {
    /// Expected utility of use over a billing period.
    pub use_value: f64,
    /// Expected guaranteed rate accrued over a billing period.
    pub usage: f64,
}

fn binomial_pmf_table(n: u32, prob: f64) -> Vec<f64> {
    // Scaled weights C(n, x) r^x (1 - r)^(n - x); the common factor cancels
    // after normalization but keeps magnitudes near one.
    let mut out = Vec::with_capacity(n as usize + 1);
    let mut c = 1.0f64;
    for x in 0..=n {
        if x > 0 {
            c = c * f64::from(n - x + 1) / f64::from(x);
        }
        out.push(c * prob.powi(x as i32) * (1.0 - prob).powi((n - x) as i32));
    }
    out
}

/// Walks every admissible state of `n`, calling `visit(x, weight)` with the
/// unnormalized weight, and returns the total weight.
fn walk_states(n: &CountMatrix, s: &Scenario, mut visit: impl FnMut(&CountMatrix, f64)) -> Result<f64> {
    let box_size = n
        .as_slice()
        .iter()
        .fold(1u128, |acc, &c| acc.saturating_mul(u128::from(c) + 1));
    if box_size > MAX_STATES {
        return Err(Error::StateSpaceTooLarge { states: box_size, limit: MAX_STATES });
    }
    let cols = n.cols();
    let tables: Vec<Vec<f64>> = (0..n.rows())
        .flat_map(|k| {
            let occ = s.types[k].occupancy();
            n.row(k).iter().map(move |&c| binomial_pmf_table(c, occ)).collect::<Vec<_>>()
        })
        .collect();
    let mut x = CountMatrix::zeros(n.rows(), cols);
    let mut v = vec![0u32; cols];
    let mut total = 0.0;
    let cells = n.as_slice().len();
    loop {
        if s.admission.allows_state(&v) {
            let w: f64 = x.as_slice().iter().zip(&tables).map(|(&xi, t)| t[xi as usize]).product();
            if w > 0.0 {
                total += w;
                visit(&x, w);
            }
        }
        // Odometer increment.
        let mut i = 0;
        loop {
            if i == cells {
                if total > 0.0 {
                    return Ok(total);
                }
                return Err(Error::EmptyAdmissibleSet);
            }
            let slot = &mut x.as_mut_slice()[i];
            if *slot < n.as_slice()[i] {
                *slot += 1;
                v[i % cols] += 1;
                break;
            }
            v[i % cols] -= *slot;
            *slot = 0;
            i += 1;
        }
    }
}

/// Stationary distribution of the system state for a fixed randomization
/// outcome.
pub fn stationary_distribution(n: &RandomizationOutcome, s: &Scenario) -> Result<StationaryDistribution> {
    check_outcome(n, s)?;
    let mut support = Vec::new();
    let total = walk_states(n, s, |x, w| support.push((x.clone(), w)))?;
    for (_, p) in &mut support {
        *p /= total;
    }
    Ok(StationaryDistribution { support })
}

/// `(V, B)` for a type-`k` user on plan `l` given the outcome `n`.
pub fn cell_values(k: usize, l: usize, n: &RandomizationOutcome, s: &Scenario) -> Result<PlanValue> {
    check_outcome(n, s)?;
    cell_values_unchecked(k, l, n, s)
}

fn cell_values_unchecked(k: usize, l: usize, n: &RandomizationOutcome, s: &Scenario) -> Result<PlanValue> {
    if l == 0 || n.get(k, l) == 0 {
        return Err(Error::EmptyCell { k, plan: l });
    }
    // Dummy-plan users never enter the network and their column is
    // independent of the rest, so it is marginalized out up front.
    let mut paid = n.clone();
    for r in 0..paid.rows() {
        paid.set(r, 0, 0);
    }
    let nkl = f64::from(n.get(k, l));
    let t = &s.types[k];
    let mut use_acc = 0.0;
    let mut usage_acc = 0.0;
    let mut failure = None;
    let total = walk_states(&paid, s, |x, w| {
        let xkl = x.get(k, l);
        if xkl == 0 || failure.is_some() {
            return;
        }
        let m: u32 = (1..x.cols()).map(|c| x.col_sum(c)).sum();
        match throughput_for_count(m, &s.protocol).and_then(|tau| Ok((tau, utility_of_use(t, tau)?))) {
            Ok((tau, u)) => {
                let share = w * f64::from(xkl) / nkl;
                use_acc += share * u;
                usage_acc += share * tau;
            }
            Err(e) => failure = Some(e),
        }
    })?;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(PlanValue { use_value: s.delta_t * use_acc / total, usage: s.delta_t * usage_acc / total })
}

/// Steady-state utility of use `V_k^l(n)` of a type-`k` user on plan `l`.
pub fn steady_state_utility(k: usize, l: usize, n: &RandomizationOutcome, s: &Scenario) -> Result<f64> {
    Ok(cell_values(k, l, n, s)?.use_value)
}

/// Expected guaranteed rate `B_k^l(n)` of a type-`k` user on plan `l`.
pub fn expected_guaranteed_rate(k: usize, l: usize, n: &RandomizationOutcome, s: &Scenario) -> Result<f64> {
    Ok(cell_values(k, l, n, s)?.usage)
}

fn ln_factorials(n: u32) -> Vec<f64> {
    let mut out = vec![0.0; n as usize + 1];
    for i in 1..=n as usize {
        out[i] = out[i - 1] + (i as f64).ln();
    }
    out
}

/// All compositions of `total` into `parts` nonnegative integers, in
/// lexicographic order.
fn compositions(total: u32, parts: usize) -> Vec<Vec<u32>> {
    if parts == 1 {
        return vec![vec![total]];
    }
    let mut out = Vec::new();
    for first in 0..=total {
        for mut rest in compositions(total - first, parts - 1) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

/// Multinomial distribution of one type's counts over the plans.
fn multinomial(count: u32, probs: &[f64], lnf: &[f64]) -> Vec<(Vec<u32>, f64)> {
    compositions(count, probs.len())
        .into_iter()
        .filter_map(|c| {
            let mut ln_p = lnf[count as usize];
            for (&ci, &pi) in c.iter().zip(probs) {
                if ci > 0 {
                    if pi <= 0.0 {
                        return None;
                    }
                    ln_p += f64::from(ci) * pi.ln() - lnf[ci as usize];
                }
            }
            Some((c, ln_p.exp()))
        })
        .collect()
}

/// Law of the randomization outcome given that one particular type-`k` user
/// chose plan `l`: that user is pinned to `l` and everyone else randomizes
/// independently according to the profile. Zero-probability outcomes are
/// omitted.
pub fn randomization_distribution(
    k: usize,
    l: usize,
    profile: &ActionProfile,
    s: &Scenario,
) -> Result<Vec<(RandomizationOutcome, f64)>> {
    check_profile(profile, s)?;
    if s.types[k].count == 0 {
        return Err(Error::invalid(format!("type {k} has no users to pin")));
    }
    let plans = profile.num_plans();
    let max_n = s.types.iter().map(|t| t.count).max().unwrap_or(0);
    let lnf = ln_factorials(max_n);
    let per_type: Vec<Vec<(Vec<u32>, f64)>> = s
        .types
        .iter()
        .enumerate()
        .map(|(j, t)| {
            let free = if j == k { t.count - 1 } else { t.count };
            let mut rows = multinomial(free, profile.row(j), &lnf);
            if j == k {
                for (row, _) in &mut rows {
                    row[l] += 1;
                }
            }
            rows
        })
        .collect();
    let mut out = vec![(Vec::<u32>::new(), 1.0)];
    for rows in &per_type {
        let mut next = Vec::with_capacity(out.len() * rows.len());
        for (prefix, p) in &out {
            for (row, q) in rows {
                let mut flat = prefix.clone();
                flat.extend_from_slice(row);
                next.push((flat, p * q));
            }
        }
        out = next;
    }
    out.into_iter()
        .map(|(flat, p)| {
            let rows = flat.chunks(plans).map(<[u32]>::to_vec).collect();
            Ok((CountMatrix::from_rows(rows)?, p))
        })
        .collect()
}

pub(crate) fn check_profile(profile: &ActionProfile, s: &Scenario) -> Result<()> {
    if profile.num_types() != s.num_types() {
        return Err(Error::invalid(format!(
            "profile has {} rows but the scenario has {} types",
            profile.num_types(),
            s.num_types()
        )));
    }
    if profile.num_plans() < 2 {
        return Err(Error::invalid("profile must cover the dummy plan and at least one paid plan"));
    }
    Ok(())
}

/// Expected `(use, usage)` of a type-`k` user who commits to plan `l`, for
/// every plan. Entry 0 (the dummy plan) is zero.
pub fn plan_values(k: usize, profile: &ActionProfile, s: &Scenario) -> Result<Vec<PlanValue>> {
    check_profile(profile, s)?;
    let mut out = vec![PlanValue::default(); profile.num_plans()];
    for (l, slot) in out.iter_mut().enumerate().skip(1) {
        for (n, p) in randomization_distribution(k, l, profile, s)? {
            let v = cell_values_unchecked(k, l, &n, s)?;
            slot.use_value += p * v.use_value;
            slot.usage += p * v.usage;
        }
    }
    Ok(out)
}

fn deviation_row<'a>(k: usize, profile: &'a ActionProfile, deviation: Option<&'a [f64]>) -> Result<&'a [f64]> {
    let row = deviation.unwrap_or_else(|| profile.row(k));
    if row.len() != profile.num_plans() {
        return Err(Error::invalid(format!(
            "deviation lists {} plans but the profile has {}",
            row.len(),
            profile.num_plans()
        )));
    }
    Ok(row)
}

/// Expected utility of use `U_k` of a type-`k` user playing `deviation`
/// (default: its own row of the profile) against `profile`.
pub fn expected_utility_of_use(
    k: usize,
    profile: &ActionProfile,
    s: &Scenario,
    deviation: Option<&[f64]>,
) -> Result<f64> {
    let row = deviation_row(k, profile, deviation)?;
    if row.iter().skip(1).all(|&x| x == 0.0) {
        return Ok(0.0);
    }
    let values = plan_values(k, profile, s)?;
    Ok(row.iter().zip(&values).skip(1).map(|(&w, v)| w * v.use_value).sum())
}

/// Expected cost `C_k` of a type-`k` user playing `deviation` against
/// `profile` under `policy`.
pub fn expected_cost(
    k: usize,
    profile: &ActionProfile,
    policy: &PricingPolicy,
    s: &Scenario,
    deviation: Option<&[f64]>,
) -> Result<f64> {
    let row = deviation_row(k, profile, deviation)?;
    if policy.plans.len() != profile.num_plans() {
        return Err(Error::invalid("policy and profile disagree on the number of plans"));
    }
    if row.iter().skip(1).all(|&x| x == 0.0) {
        return Ok(0.0);
    }
    let values = plan_values(k, profile, s)?;
    Ok(plan_costs(policy, &values).iter().zip(row).skip(1).filter(|(_, &w)| w > 0.0).map(|(c, &w)| w * c).sum())
}

/// Cost of committing to each plan: `p_s + q * usage`.
pub fn plan_costs(policy: &PricingPolicy, values: &[PlanValue]) -> Vec<f64> {
    policy
        .plans
        .iter()
        .zip(values)
        .map(|(plan, v)| {
            let q = plan.rate_charge();
            plan.subscription() + if q == 0.0 { 0.0 } else { q * v.usage }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{AdmissionPolicy, MacProtocol, UserType, BASELINE_CSMA_P};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn single(lambda: f64, mu: f64, count: u32, protocol: MacProtocol) -> Scenario {
        Scenario {
            types: vec![UserType { alpha: 10.0, beta: 0.3, lambda, mu, count }],
            delta_t: 1.0,
            c0: 0.0,
            protocol,
            admission: AdmissionPolicy::AdmitAll,
        }
    }

    fn m(rows: Vec<Vec<u32>>) -> CountMatrix {
        CountMatrix::from_rows(rows).unwrap()
    }

    #[test]
    fn lone_user_with_equal_rates_is_online_half_the_time() {
        let s = single(1.0, 1.0, 1, MacProtocol::Tdma);
        let d = stationary_distribution(&m(vec![vec![0, 1]]), &s).unwrap();
        assert_relative_eq!(d.probability(&m(vec![vec![0, 0]])), 0.5, epsilon = 1e-15);
        assert_relative_eq!(d.probability(&m(vec![vec![0, 1]])), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn two_users_follow_binomial() {
        let s = single(1.0, 1.0, 2, MacProtocol::Tdma);
        let d = stationary_distribution(&m(vec![vec![0, 2]]), &s).unwrap();
        let probs: Vec<f64> = (0..=2).map(|x| d.probability(&m(vec![vec![0, x]]))).collect();
        for (p, want) in probs.iter().zip([0.25, 0.5, 0.25]) {
            assert_relative_eq!(*p, want, epsilon = 1e-15);
        }
    }

    #[test]
    fn single_user_values() {
        let n = m(vec![vec![0, 1]]);
        let csma = single(1.0, 1.0, 1, MacProtocol::Csma { p: BASELINE_CSMA_P });
        assert_relative_eq!(steady_state_utility(0, 1, &n, &csma).unwrap(), 3.725, epsilon = 1e-12);
        let tdma = single(1.0, 1.0, 1, MacProtocol::Tdma);
        assert_relative_eq!(steady_state_utility(0, 1, &n, &tdma).unwrap(), 4.85, epsilon = 1e-12);
        assert_relative_eq!(expected_guaranteed_rate(0, 1, &n, &tdma).unwrap(), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn two_type_tdma_usage_enumerates_other_user() {
        let s = Scenario::two_type_baseline([1, 1], [1.0, 1.0], MacProtocol::Tdma, 0.0);
        let n = m(vec![vec![0, 1], vec![0, 1]]);
        assert_relative_eq!(expected_guaranteed_rate(0, 1, &n, &s).unwrap(), 0.375, epsilon = 1e-12);
    }

    #[test]
    fn empty_cell_is_an_error() {
        let s = single(1.0, 1.0, 1, MacProtocol::Tdma);
        let n = m(vec![vec![1, 0]]);
        assert!(matches!(steady_state_utility(0, 1, &n, &s), Err(Error::EmptyCell { .. })));
    }

    #[test]
    fn oversized_box_is_refused() {
        let s = single(1.0, 1.0, 30_000_000, MacProtocol::Tdma);
        let n = m(vec![vec![0, 30_000_000]]);
        assert!(matches!(stationary_distribution(&n, &s), Err(Error::StateSpaceTooLarge { .. })));
    }

    #[test]
    fn pure_profile_gives_degenerate_outcome() {
        let s = Scenario::two_type_baseline([3, 2], [1.0, 1.0], MacProtocol::Tdma, 0.0);
        let profile = ActionProfile::two_type([1.0, 1.0]);
        let d = randomization_distribution(0, 1, &profile, &s).unwrap();
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].0, m(vec![vec![0, 3], vec![0, 2]]));
        assert_relative_eq!(d[0].1, 1.0);
    }

    #[test]
    fn one_free_bernoulli_user() {
        let s = single(1.0, 1.0, 2, MacProtocol::Tdma);
        let profile = ActionProfile::new(vec![vec![0.5, 0.5]]).unwrap();
        let d = randomization_distribution(0, 1, &profile, &s).unwrap();
        assert_eq!(d.len(), 2);
        for (n, p) in d {
            assert!(n == m(vec![vec![1, 1]]) || n == m(vec![vec![0, 2]]));
            assert_relative_eq!(p, 0.5, epsilon = 1e-15);
        }
    }

    #[test]
    fn all_out_has_no_use_or_cost() {
        let s = Scenario::two_type_baseline([2, 2], [1.0, 1.0], MacProtocol::Tdma, 0.0);
        let profile = ActionProfile::two_type([0.0, 0.5]);
        assert_eq!(expected_utility_of_use(0, &profile, &s, None).unwrap(), 0.0);
        let policy = PricingPolicy::single(3.0, 1.0);
        assert_eq!(expected_cost(0, &profile, &policy, &s, None).unwrap(), 0.0);
    }

    #[test]
    fn subscription_only_cost_is_the_fee() {
        let s = Scenario::two_type_baseline([2, 3], [0.1, 1.0], MacProtocol::Csma { p: BASELINE_CSMA_P }, 0.0);
        let profile = ActionProfile::two_type([0.3, 0.6]);
        let policy = PricingPolicy::single(1.7, 0.0);
        let c = expected_cost(1, &profile, &policy, &s, Some(&[0.0, 1.0])).unwrap();
        assert_eq!(c, 1.7);
    }

    #[test]
    fn tdma_single_user_rate_charge() {
        let s = single(1.0, 1.0, 1, MacProtocol::Tdma);
        let profile = ActionProfile::new(vec![vec![0.0, 1.0]]).unwrap();
        let c = expected_cost(0, &profile, &PricingPolicy::single(0.0, 1.0), &s, None).unwrap();
        assert_relative_eq!(c, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn cap_truncates_the_product_form() {
        let mut s = single(1.0, 1.0, 3, MacProtocol::Tdma);
        s.admission = AdmissionPolicy::PerPlanCap { caps: vec![None, Some(1)] };
        let d = stationary_distribution(&m(vec![vec![0, 3]]), &s).unwrap();
        // Weights C(3, x) over x <= 1: 1 and 3.
        assert_relative_eq!(d.probability(&m(vec![vec![0, 0]])), 0.25, epsilon = 1e-15);
        assert_relative_eq!(d.probability(&m(vec![vec![0, 1]])), 0.75, epsilon = 1e-15);
    }

    fn arb_instance() -> impl Strategy<Value = (Scenario, CountMatrix)> {
        (
            prop::collection::vec((0.05f64..5.0, 0.05f64..5.0), 1..=2),
            prop::collection::vec(0u32..4, 6),
            prop::option::of(prop::collection::vec(0u32..4, 2)),
            any::<bool>(),
        )
            .prop_map(|(rates, counts, caps, tdma)| {
                let k = rates.len();
                let rows: Vec<Vec<u32>> = (0..k).map(|i| counts[i * 3..i * 3 + 3].to_vec()).collect();
                let types = rates
                    .iter()
                    .zip(&rows)
                    .map(|(&(lambda, mu), r)| UserType { alpha: 5.0, beta: 0.1, lambda, mu, count: r.iter().sum() })
                    .collect();
                let admission = match caps {
                    None => AdmissionPolicy::AdmitAll,
                    Some(c) => AdmissionPolicy::PerPlanCap { caps: vec![None, Some(c[0]), Some(c[1])] },
                };
                let protocol = if tdma { MacProtocol::Tdma } else { MacProtocol::Csma { p: 0.2 } };
                let s = Scenario { types, delta_t: 1.0, c0: 0.0, protocol, admission };
                (s, CountMatrix::from_rows(rows).unwrap())
            })
    }

    proptest! {
        #[test]
        fn distribution_is_normalized((s, n) in arb_instance()) {
            let d = stationary_distribution(&n, &s).unwrap();
            prop_assert!((d.total() - 1.0).abs() <= 1e-12);
            prop_assert!(d.support.iter().all(|(_, p)| *p >= 0.0));
        }

        #[test]
        fn admit_all_marginals_are_binomial((s, n) in arb_instance()) {
            let s = Scenario { admission: AdmissionPolicy::AdmitAll, ..s };
            let d = stationary_distribution(&n, &s).unwrap();
            for k in 0..n.rows() {
                for l in 0..n.cols() {
                    let want = f64::from(n.get(k, l)) * s.types[k].occupancy();
                    prop_assert!((d.mean_occupancy(k, l) - want).abs() <= 1e-12);
                }
            }
        }

        #[test]
        fn caps_never_raise_capped_occupancy((s, n) in arb_instance()) {
            let open = Scenario { admission: AdmissionPolicy::AdmitAll, ..s.clone() };
            let free = stationary_distribution(&n, &open).unwrap();
            let capped = stationary_distribution(&n, &s).unwrap();
            for l in 1..n.cols() {
                for k in 0..n.rows() {
                    prop_assert!(capped.mean_occupancy(k, l) <= free.mean_occupancy(k, l) + 1e-12);
                }
            }
        }

        #[test]
        fn pinned_law_mixes_back_to_multinomial(p1 in 0.0f64..1.0, p2 in 0.0f64..1.0, n1 in 1u32..4, n2 in 0u32..3) {
            let s = Scenario::two_type_baseline([n1, n2], [1.0, 1.0], MacProtocol::Tdma, 0.0);
            let profile = ActionProfile::two_type([p1, p2]);
            let lnf = ln_factorials(4);
            // Mixing over the pinned user's own choice recovers the unconditional law.
            let mut mixed: Vec<(CountMatrix, f64)> = Vec::new();
            for (l, &w) in profile.row(0).iter().enumerate() {
                if w == 0.0 { continue; }
                for (n, p) in randomization_distribution(0, l, &profile, &s).unwrap() {
                    match mixed.iter_mut().find(|(m, _)| *m == n) {
                        Some((_, acc)) => *acc += w * p,
                        None => mixed.push((n, w * p)),
                    }
                }
            }
            for (n, p) in mixed {
                let direct: f64 = (0..2)
                    .map(|k| {
                        multinomial(s.types[k].count, profile.row(k), &lnf)
                            .into_iter()
                            .find(|(c, _)| c.as_slice() == n.row(k))
                            .map_or(0.0, |(_, q)| q)
                    })
                    .product();
                prop_assert!((p - direct).abs() <= 1e-12);
            }
        }

        #[test]
        fn utility_and_cost_are_affine_in_the_deviation(
            p1 in 0.0f64..1.0, p2 in 0.0f64..1.0, a in 0.0f64..1.0, b in 0.0f64..1.0, ps in 0.0f64..3.0, q in 0.0f64..3.0,
        ) {
            let s = Scenario {
                admission: AdmissionPolicy::AdmitAll,
                ..Scenario::two_type_baseline([2, 2], [1.0, 0.1], MacProtocol::Tdma, 0.0)
            };
            let profile = ActionProfile::new(vec![vec![1.0 - p1, p1 * 0.5, p1 * 0.5], vec![1.0 - p2, 0.0, p2]]).unwrap();
            let policy = PricingPolicy::single(ps, q);
            let policy = PricingPolicy { plans: vec![policy.plans[0], policy.plans[1], PricingPlan::paid(ps * 0.5, q * 2.0)] };
            let dev = [1.0 - a, a * b, a * (1.0 - b)];
            let values = plan_values(0, &profile, &s).unwrap();
            let costs = plan_costs(&policy, &values);
            let u_direct = expected_utility_of_use(0, &profile, &s, Some(&dev)).unwrap();
            let c_direct = expected_cost(0, &profile, &policy, &s, Some(&dev)).unwrap();
            let u_lin: f64 = (1..3).map(|l| dev[l] * values[l].use_value).sum();
            let c_lin: f64 = (1..3).map(|l| dev[l] * costs[l]).sum();
            prop_assert!((u_direct - u_lin).abs() <= 1e-12);
            prop_assert!((c_direct - c_lin).abs() <= 1e-12);
        }
    }

    use crate::model::PricingPlan;
}
