//! The users' plan-selection game: per-plan net payoffs, equilibrium
//! verification, mixed-equilibrium solving for the two-type game, and the
//! reduction of a TDMA menu to a single paid plan.

use crate::engine::{plan_costs, plan_values};
use crate::error::{Error, Result};
use crate::mac::TwoTypeModel;
use crate::model::{
    validate_policy, ActionProfile, MacProtocol, NeTag, NeType, PricingPlan, PricingPolicy, Scenario,
};

/// Default absolute tolerance on net payoffs when verifying an equilibrium.
pub const NASH_TOL: f64 = 1e-6;

/// Net value `w[l]` of committing to plan `l` for one type-`k` user; the
/// payoff of any deviation `pi'` is `pi' . w`.
#[derive(Debug, Clone, PartialEq)]
pub struct NetPayoffVector {
    pub k: usize,
    pub w: Vec<f64>,
}

impl NetPayoffVector {
    pub fn payoff(&self, deviation: &[f64]) -> f64 {
        deviation.iter().zip(&self.w).filter(|(&p, _)| p > 0.0).map(|(p, w)| p * w).sum()
    }

    /// Largest entry, which is at least the dummy plan's zero.
    pub fn best(&self) -> f64 {
        self.w.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

fn closed_form_model(profile: &ActionProfile, policy: &PricingPolicy, s: &Scenario) -> Option<TwoTypeModel> {
    if profile.num_types() == 2 && profile.num_plans() == 2 && policy.plans.len() == 2 {
        TwoTypeModel::new(s).ok()
    } else {
        None
    }
}

/// Per-plan net payoffs of a type-`k` user. Uses the closed forms for the
/// two-type, one-plan game without admission control and the exact engine
/// otherwise.
pub fn net_payoffs(k: usize, profile: &ActionProfile, policy: &PricingPolicy, s: &Scenario) -> Result<NetPayoffVector> {
    validate_policy(policy, &s.protocol)?;
    if policy.plans.len() != profile.num_plans() {
        return Err(Error::invalid("policy and profile disagree on the number of plans"));
    }
    if let Some(model) = closed_form_model(profile, policy, s) {
        let pi = [profile.row(0)[1], profile.row(1)[1]];
        let plan = policy.plan(1);
        return Ok(NetPayoffVector {
            k,
            w: vec![0.0, model.net_value(k, pi, plan.subscription(), plan.rate_charge())],
        });
    }
    let values = plan_values(k, profile, s)?;
    let costs = plan_costs(policy, &values);
    let mut w: Vec<f64> = values.iter().zip(&costs).map(|(v, c)| v.use_value - c).collect();
    w[0] = 0.0;
    Ok(NetPayoffVector { k, w })
}

/// Outcome of checking one type's best-response condition.
#[derive(Debug, Clone, PartialEq)]
pub struct TypeCertificate {
    pub payoffs: NetPayoffVector,
    /// How far the worst plan in the support falls short of the best plan.
    pub violation: f64,
    /// Plan attaining `violation`, if any plan falls short.
    pub worst_plan: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NashCertificate {
    pub is_nash: bool,
    pub per_type: Vec<TypeCertificate>,
    pub worst_violation: f64,
    /// Type with the largest violation when the check fails.
    pub offending_type: Option<usize>,
}

/// Checks that every plan in the support of each type's strategy attains the
/// best net payoff within `tol`. Types with no users are vacuous.
pub fn is_nash(profile: &ActionProfile, policy: &PricingPolicy, s: &Scenario, tol: f64) -> Result<NashCertificate> {
    let mut per_type = Vec::with_capacity(profile.num_types());
    let mut worst = 0.0f64;
    let mut offender = None;
    for k in 0..profile.num_types() {
        let payoffs = net_payoffs(k, profile, policy, s)?;
        let best = payoffs.best();
        let mut violation = 0.0f64;
        let mut worst_plan = None;
        if s.types[k].count > 0 {
            for (l, (&p, &w)) in profile.row(k).iter().zip(&payoffs.w).enumerate() {
                let gap = if best == w { 0.0 } else { best - w };
                if p > 0.0 && gap > violation {
                    violation = gap;
                    worst_plan = Some(l);
                }
            }
        }
        if violation > worst {
            worst = violation;
            offender = Some(k);
        }
        per_type.push(TypeCertificate { payoffs, violation, worst_plan });
    }
    Ok(NashCertificate {
        is_nash: worst <= tol,
        per_type,
        worst_violation: worst,
        offending_type: if worst > tol { offender } else { None },
    })
}

const SCAN_INTERVALS: usize = 100;

/// Cells per axis of the sign-change grid that seeds the both-mixed search.
const BOTH_MIXED_GRID: usize = 24;

/// All roots of `f` on `[lo, hi]` found by a uniform scan followed by
/// bisection of every sign change, plus grid points where `f` vanishes.
pub(crate) fn scan_roots(lo: f64, hi: f64, intervals: usize, f: impl Fn(f64) -> f64) -> Vec<f64> {
    let mut roots = Vec::new();
    let xs: Vec<f64> = (0..=intervals).map(|i| lo + (hi - lo) * i as f64 / intervals as f64).collect();
    let ys: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
    for i in 0..intervals {
        let (a, b) = (xs[i], xs[i + 1]);
        let (fa, fb) = (ys[i], ys[i + 1]);
        if fa == 0.0 {
            roots.push(a);
            continue;
        }
        if fa.is_nan() || fb.is_nan() || fa.signum() == fb.signum() || fb == 0.0 {
            continue;
        }
        let (mut a, mut b, mut fa) = (a, b, fa);
        while b - a > 1e-15 * (1.0 + a.abs()) {
            let mid = 0.5 * (a + b);
            if mid <= a || mid >= b {
                break;
            }
            let fm = f(mid);
            if fm == 0.0 {
                a = mid;
                b = mid;
                break;
            }
            if fm.signum() == fa.signum() {
                a = mid;
                fa = fm;
            } else {
                b = mid;
            }
        }
        roots.push(0.5 * (a + b));
    }
    if ys[intervals] == 0.0 {
        roots.push(xs[intervals]);
    }
    roots
}

/// Subscription probabilities solving both indifference conditions under
/// CSMA with subscription fee `p_s`, in closed form. `None` when the
/// logarithms are undefined or fewer than two users exist.
pub fn csma_both_mixed(model: &TwoTypeModel, p_s: f64) -> Option<[f64; 2]> {
    let MacProtocol::Csma { p } = model.protocol else {
        return None;
    };
    let n = [model.count(0), model.count(1)];
    let total = n[0] + n[1];
    if total < 2 || n[0] == 0 || n[1] == 0 {
        return None;
    }
    let a: Vec<f64> = (0..2)
        .map(|k| {
            let t = &model.types[k];
            (t.alpha - p_s / (model.delta_t * t.occupancy())) * p / t.beta
        })
        .collect();
    if a.iter().any(|&v| v.is_nan() || v <= 0.0) {
        return None;
    }
    let denom = f64::from(total - 1);
    let mut out = [0.0; 2];
    for k in 0..2 {
        let o = 1 - k;
        let x = a[o].powf(f64::from(n[o]) / denom) / a[k].powf(f64::from(n[o] - 1) / denom);
        let t = &model.types[k];
        out[k] = (x - 1.0) / (t.occupancy() * p / (1.0 - p));
    }
    Some(out)
}

fn two_type_setup(policy: &PricingPolicy, s: &Scenario) -> Result<(TwoTypeModel, f64, f64)> {
    validate_policy(policy, &s.protocol)?;
    if policy.plans.len() != 2 {
        return Err(Error::Unsupported { what: "mixed-equilibrium solving", needs: "exactly one paid plan" });
    }
    let model = TwoTypeModel::new(s)?;
    let plan = policy.plan(1);
    Ok((model, plan.subscription(), plan.rate_charge()))
}

/// Whether a fixed (non-mixed) coordinate is consistent with its tag.
fn tag_holds(tag: NeTag, w: f64, present: bool, tol: f64) -> bool {
    !present
        || match tag {
            NeTag::In => w >= -tol,
            NeTag::Out => w <= tol,
            NeTag::Mixed => w.abs() <= tol,
        }
}

fn pure_value(tag: NeTag) -> f64 {
    if tag == NeTag::In {
        1.0
    } else {
        0.0
    }
}

/// Newton iteration on both indifference conditions from a starting point.
fn newton_both(w: &impl Fn([f64; 2]) -> [f64; 2], start: [f64; 2]) -> Option<[f64; 2]> {
    let mut x = start;
    for _ in 0..60 {
        let f = w(x);
        if !(f[0].is_finite() && f[1].is_finite()) {
            return None;
        }
        if f[0].abs() < 1e-12 && f[1].abs() < 1e-12 {
            return Some(x);
        }
        let h = 1e-7;
        let mut jac = [[0.0; 2]; 2];
        for j in 0..2 {
            let mut up = x;
            let mut dn = x;
            up[j] += h;
            dn[j] -= h;
            let (fu, fd) = (w(up), w(dn));
            for i in 0..2 {
                jac[i][j] = (fu[i] - fd[i]) / (2.0 * h);
            }
        }
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        if det.abs() < 1e-300 {
            return None;
        }
        let dx0 = (f[0] * jac[1][1] - f[1] * jac[0][1]) / det;
        let dx1 = (jac[0][0] * f[1] - jac[1][0] * f[0]) / det;
        let next = [(x[0] - dx0).clamp(-0.5, 1.5), (x[1] - dx1).clamp(-0.5, 1.5)];
        if (next[0] - x[0]).abs() < 1e-16 && (next[1] - x[1]).abs() < 1e-16 {
            x = next;
            break;
        }
        x = next;
    }
    let f = w(x);
    (f[0].abs() < 1e-10 && f[1].abs() < 1e-10).then_some(x)
}

/// Every symmetric equilibrium of the given type that the solver can find,
/// for the two-type game with one paid plan.
pub fn equilibria_of_type(which: &NeType, policy: &PricingPolicy, s: &Scenario) -> Result<Vec<ActionProfile>> {
    let (model, p_s, q) = two_type_setup(policy, s)?;
    let tags = [which.tag(0), which.tag(1)];
    let present = [model.count(0) > 0, model.count(1) > 0];
    if (0..2).any(|k| tags[k] == NeTag::Mixed && !present[k]) || p_s.is_infinite() && tags.contains(&NeTag::Mixed) {
        return Ok(Vec::new());
    }
    let w = |pi: [f64; 2]| [model.net_value(0, pi, p_s, q), model.net_value(1, pi, p_s, q)];
    let lo = NASH_TOL;
    let hi = 1.0 - NASH_TOL;
    let mut found: Vec<[f64; 2]> = Vec::new();
    match (tags[0] == NeTag::Mixed, tags[1] == NeTag::Mixed) {
        (false, false) => found.push([pure_value(tags[0]), pure_value(tags[1])]),
        (true, false) | (false, true) => {
            let k = if tags[0] == NeTag::Mixed { 0 } else { 1 };
            let o = 1 - k;
            let fixed = pure_value(tags[o]);
            let at = |x: f64| {
                let mut pi = [0.0; 2];
                pi[k] = x;
                pi[o] = fixed;
                pi
            };
            for r in scan_roots(lo, hi, SCAN_INTERVALS, |x| w(at(x))[k]) {
                found.push(at(r));
            }
        }
        (true, true) => {
            if let (MacProtocol::Csma { .. }, Some(pi)) = (model.protocol, csma_both_mixed(&model, p_s)) {
                found.push(pi);
            }
            // Newton starts only from cells where both conditions change sign
            // across the corners.
            let grid = BOTH_MIXED_GRID;
            let at = |i: usize| lo + (hi - lo) * i as f64 / grid as f64;
            let vals: Vec<Vec<[f64; 2]>> = (0..=grid).map(|i| (0..=grid).map(|j| w([at(i), at(j)])).collect()).collect();
            for i in 0..grid {
                for j in 0..grid {
                    let corners = [vals[i][j], vals[i + 1][j], vals[i][j + 1], vals[i + 1][j + 1]];
                    let straddles = |c: usize| {
                        corners.iter().any(|v| v[c] >= 0.0) && corners.iter().any(|v| v[c] <= 0.0)
                    };
                    if !(straddles(0) && straddles(1)) {
                        continue;
                    }
                    let start = [0.5 * (at(i) + at(i + 1)), 0.5 * (at(j) + at(j + 1))];
                    if let Some(x) = newton_both(&w, start) {
                        if !found.iter().any(|f| (f[0] - x[0]).abs() < 1e-7 && (f[1] - x[1]).abs() < 1e-7) {
                            found.push(x);
                        }
                    }
                }
            }
        }
    }
    let mut out = Vec::new();
    for pi in found {
        let inside = (0..2).all(|k| tags[k] != NeTag::Mixed || (lo..=hi).contains(&pi[k]));
        if !inside {
            continue;
        }
        let vals = w(pi);
        let ok = (0..2).all(|k| {
            let tol = if tags[k] == NeTag::Mixed { 1e-9 } else { 0.0 };
            tag_holds(tags[k], vals[k], present[k], tol)
        });
        if ok {
            out.push(ActionProfile::two_type(pi));
        }
    }
    Ok(out)
}

/// One equilibrium of the requested type, or `None` when none exists.
pub fn solve_mixed_indifference(which: &NeType, policy: &PricingPolicy, s: &Scenario) -> Result<Option<ActionProfile>> {
    Ok(equilibria_of_type(which, policy, s)?.into_iter().next())
}

/// Every equilibrium of the two-type, one-plan game that the solver finds,
/// tagged by type, in priority order.
pub fn enumerate_equilibria(policy: &PricingPolicy, s: &Scenario) -> Result<Vec<(NeType, ActionProfile)>> {
    let mut out = Vec::new();
    for t in NeType::priority_order() {
        for profile in equilibria_of_type(&t, policy, s)? {
            out.push((t.clone(), profile));
        }
    }
    Ok(out)
}

/// A single-plan TDMA policy together with the profile it supports.
#[derive(Debug, Clone, PartialEq)]
pub struct CollapsedPolicy {
    pub policy: PricingPolicy,
    pub profile: ActionProfile,
}

/// Replaces a TDMA menu with one paid plan `(p_s, q)` that keeps `profile`
/// (with all paid plans merged) an equilibrium and leaves both types'
/// expected costs unchanged.
pub fn collapse_policy(policy_multi: &PricingPolicy, profile: &ActionProfile, s: &Scenario) -> Result<CollapsedPolicy> {
    if !s.protocol.is_tdma() {
        return Err(Error::Unsupported { what: "policy collapse", needs: "a TDMA scenario" });
    }
    let model = TwoTypeModel::new(s)?;
    validate_policy(policy_multi, &s.protocol)?;
    if policy_multi.plans.len() != profile.num_plans() {
        return Err(Error::invalid("policy and profile disagree on the number of plans"));
    }
    let merged = [profile.subscribed(0), profile.subscribed(1)];
    let collapsed_profile = ActionProfile::two_type(merged);
    if policy_multi.plans.len() == 2 {
        return Ok(CollapsedPolicy { policy: policy_multi.clone(), profile: collapsed_profile });
    }
    let subscribing: Vec<usize> = (0..2).filter(|&k| merged[k] > 0.0 && model.count(k) > 0).collect();
    let used: Vec<PricingPlan> = (1..profile.num_plans())
        .filter(|&l| subscribing.iter().any(|&k| profile.row(k)[l] > 0.0))
        .map(|l| policy_multi.plans[l])
        .collect();
    if subscribing.len() == 2 && used.windows(2).all(|w| w[0] == w[1]) {
        let policy = PricingPolicy { plans: vec![PricingPlan::Dummy, used[0]] };
        return Ok(CollapsedPolicy { policy, profile: collapsed_profile });
    }
    let policy = match subscribing.as_slice() {
        [] => PricingPolicy { plans: vec![PricingPlan::Dummy, policy_multi.plans[1]] },
        [k] => {
            // Any plan in the support is a best response for the subscribing
            // type and was already deterring the other one.
            let row = profile.row(*k);
            let l = (1..row.len()).max_by(|&a, &b| row[a].total_cmp(&row[b])).unwrap_or(1);
            PricingPolicy { plans: vec![PricingPlan::Dummy, policy_multi.plans[l]] }
        }
        _ => {
            let mut c = [0.0; 2];
            for (k, ck) in c.iter_mut().enumerate() {
                let values = plan_values(k, profile, s)?;
                let costs = plan_costs(policy_multi, &values);
                let total: f64 =
                    profile.row(k).iter().zip(&costs).skip(1).filter(|(&p, _)| p > 0.0).map(|(p, c)| p * c).sum();
                *ck = total / merged[k];
            }
            let b = [model.usage(0, merged), model.usage(1, merged)];
            let scale = c[0].abs().max(c[1].abs()).max(1.0);
            let (p_s, q) = if (b[0] - b[1]).abs() <= 1e-14 * b[0].abs().max(b[1].abs()) {
                if (c[0] - c[1]).abs() > 1e-9 * scale {
                    return Err(Error::NoExactCollapse(format!(
                        "equal usage {:.6e} but different costs {:.9} and {:.9}",
                        b[0], c[0], c[1]
                    )));
                }
                (0.5 * (c[0] + c[1]), 0.0)
            } else {
                let q = (c[1] - c[0]) / (b[1] - b[0]);
                (c[0] - q * b[0], q)
            };
            if q < -1e-12 * scale || p_s < -1e-12 * scale {
                return Err(Error::NoExactCollapse(format!("solution p_s = {p_s}, q = {q} leaves the price range")));
            }
            PricingPolicy::single(p_s.max(0.0), q.max(0.0))
        }
    };
    Ok(CollapsedPolicy { policy, profile: collapsed_profile })
}
