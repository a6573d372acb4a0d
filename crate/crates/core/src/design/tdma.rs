//! Design procedures under TDMA. Two instruments, the subscription fee `p_s`
//! and the rate charge `q`, let the provider charge the two types different
//! amounts: a type-`k` subscriber pays `p_s + q b_k`, where `b_k` is its
//! expected guaranteed rate.

use super::csma::{placed, rival_use, typed};
use super::{candidate, maximize_2d, scalar_maximize, shut_out, NeCandidate, SearchConfig, PI_HI, PI_LO};
use crate::mac::TwoTypeModel;
use crate::model::{ActionProfile, NeTag, NeType, PricingPolicy, Scenario};

/// Slack on the sign of a computed price.
const PRICE_SLACK: f64 = 1e-12;

/// Relative gap below which two charges or two rates count as equal.
const SAME: f64 = 1e-12;

fn same(a: f64, b: f64) -> bool {
    (a - b).abs() <= SAME * a.abs().max(b.abs())
}

/// `a / b`, snapped to one when the two are equal up to rounding.
fn ratio(a: f64, b: f64) -> f64 {
    if same(a, b) {
        1.0
    } else {
        a / b
    }
}

/// Prices under which type `k` pays `ck` and type `o` pays `co`, given their
/// expected guaranteed rates. Equal targets need no rate charge.
fn prices_for(ck: f64, co: f64, bk: f64, bo: f64) -> Option<(f64, f64)> {
    if same(ck, co) {
        return (ck >= 0.0).then_some((ck, 0.0));
    }
    if same(bk, bo) {
        return None;
    }
    let q = (co - ck) / (bo - bk);
    let p_s = ck - q * bk;
    let slack = PRICE_SLACK * ck.abs().max(co.abs()).max(1.0);
    (q >= -slack && p_s >= -slack).then_some((p_s.max(0.0), q.max(0.0)))
}

fn priced(t: NeType, objective: f64, prices: Option<(f64, f64)>, pi: [f64; 2], s: &Scenario) -> NeCandidate {
    match prices {
        Some((p_s, q)) => candidate(t, objective, PricingPolicy::single(p_s, q), ActionProfile::two_type(pi), s),
        None => NeCandidate::infeasible(t),
    }
}

fn both_in(m: &TwoTypeModel, s: &Scenario, selfish: bool) -> NeCandidate {
    let t = NeType::pair(NeTag::In, NeTag::In);
    if m.count(0) == 0 || m.count(1) == 0 {
        return NeCandidate::infeasible(t);
    }
    let pi = [1.0, 1.0];
    let u = [m.use_value(0, pi), m.use_value(1, pi)];
    let b = [m.usage(0, pi), m.usage(1, pi)];
    let n = m.counts();
    // k is the type with the lower expected use.
    let k = if u[1] < u[0] { 1 } else { 0 };
    let o = 1 - k;
    if u[k] < 0.0 {
        return NeCandidate::infeasible(t);
    }
    // Ratio of the two types' charges: as large as the higher-use type will
    // bear and the fee/rate split can produce.
    let rho = if u[k] == 0.0 { 1.0 } else { (u[o] / u[k]).min(ratio(b[o], b[k]).max(1.0)) };
    let weight = n[k] + rho * n[o];
    if u[k] * weight < m.c0 {
        return NeCandidate::infeasible(t);
    }
    if selfish {
        priced(t, u[k] * weight, prices_for(u[k], rho * u[k], b[k], b[o]), pi, s)
    } else {
        let c = m.c0 / weight;
        let welfare = u[0] * n[0] + u[1] * n[1] - m.c0;
        priced(t, welfare, prices_for(c, rho * c, b[k], b[o]), pi, s)
    }
}

fn one_in(m: &TwoTypeModel, s: &Scenario, k: usize, selfish: bool) -> NeCandidate {
    let o = 1 - k;
    let t = typed(k, NeTag::In, NeTag::Out);
    if m.count(k) == 0 {
        return NeCandidate::infeasible(t);
    }
    let pi = placed(k, 1.0, 0.0);
    let uk = m.use_value(k, pi);
    let bk = m.usage(k, pi);
    let uo = rival_use(m, o, pi);
    let nk = m.counts()[k];
    if uo <= 0.0 {
        // Nobody on the other side wants in at any nonnegative price.
        return if selfish {
            if uk >= 0.0 && uk * nk >= m.c0 {
                priced(t, uk * nk, Some((uk, 0.0)), pi, s)
            } else {
                NeCandidate::infeasible(t)
            }
        } else {
            let c = m.c0 / nk;
            if uk >= c {
                priced(t, (uk - c) * nk, Some((c, 0.0)), pi, s)
            } else {
                NeCandidate::infeasible(t)
            }
        };
    }
    let bo = m.usage(o, pi);
    // rho is the ratio of the in-type's charge to the out-type's use.
    let floor = ratio(bk, bo).min(1.0);
    if selfish {
        let rho = uk / uo;
        if rho < floor || uk * nk < m.c0 {
            return NeCandidate::infeasible(t);
        }
        priced(t, uk * nk, prices_for(uk, uo * rho.max(1.0), bk, bo), pi, s)
    } else {
        let rho = (m.c0 / nk / uo).max(floor);
        if uk < rho * uo {
            return NeCandidate::infeasible(t);
        }
        priced(t, (uk - rho * uo) * nk, prices_for(rho * uo, uo * rho.max(1.0), bk, bo), pi, s)
    }
}

/// Type `k` mixes (and is held indifferent), type `o` is in. Returns the best
/// `(p_s, q, objective)` at subscription probability `x`.
fn mixed_in_prices(m: &TwoTypeModel, k: usize, x: f64, selfish: bool) -> Option<(f64, f64, f64)> {
    let o = 1 - k;
    let n = m.counts();
    let pi = placed(k, x, 1.0);
    let (uk, uo) = (m.use_value(k, pi), m.use_value(o, pi));
    let (bk, bo) = (m.usage(k, pi), m.usage(o, pi));
    if uk < 0.0 {
        return None;
    }
    let q_max = uk / bk;
    let charge_o = |q: f64| uk + q * (bo - bk);
    let revenue = |q: f64| x * n[k] * uk + n[o] * charge_o(q);
    let mut qs = vec![0.0, q_max];
    if bo != bk {
        qs.push((uo - uk) / (bo - bk));
        qs.push(((m.c0 - x * n[k] * uk) / n[o] - uk) / (bo - bk));
    }
    let slack = PRICE_SLACK * uo.abs().max(m.c0).max(1.0);
    let mut best: Option<(f64, f64, f64)> = None;
    for q in qs {
        if !(q.is_finite() && q >= 0.0 && q <= q_max) {
            continue;
        }
        if charge_o(q) > uo + slack || revenue(q) < m.c0 - slack {
            continue;
        }
        let objective = if selfish { revenue(q) } else { n[o] * (uo - charge_o(q)) };
        if best.is_none_or(|b| objective > b.2) {
            best = Some(((uk - q * bk).max(0.0), q, objective));
        }
    }
    best
}

fn mixed_in(m: &TwoTypeModel, s: &Scenario, cfg: &SearchConfig, k: usize, selfish: bool) -> NeCandidate {
    let t = typed(k, NeTag::Mixed, NeTag::In);
    if m.count(0) == 0 || m.count(1) == 0 {
        return NeCandidate::infeasible(t);
    }
    let f = |x: f64| mixed_in_prices(m, k, x, selfish).map_or(f64::NEG_INFINITY, |v| v.2);
    let best = scalar_maximize(f, PI_LO, PI_HI, cfg.pi_step, cfg.tol);
    match mixed_in_prices(m, k, best.x, selfish) {
        Some((p_s, q, objective)) => priced(t, objective, Some((p_s, q)), placed(k, best.x, 1.0), s),
        None => NeCandidate::infeasible(t),
    }
}

/// Type `k` mixes, type `o` stays out. Returns `(p_s, q, revenue)`.
fn mixed_out_prices(m: &TwoTypeModel, k: usize, x: f64) -> Option<(f64, f64, f64)> {
    let o = 1 - k;
    let pi = placed(k, x, 0.0);
    let uk = m.use_value(k, pi);
    let revenue = x * m.counts()[k] * uk;
    if uk < 0.0 || revenue < m.c0 {
        return None;
    }
    let uo = rival_use(m, o, pi);
    if uo <= uk {
        return Some((uk, 0.0, revenue));
    }
    // Deterrence needs the out type to be charged more than the in type.
    let bk = m.usage(k, pi);
    let bo = m.usage(o, pi);
    if bo <= bk {
        return None;
    }
    let q = (uo - uk) / (bo - bk);
    (q <= uk / bk).then(|| ((uk - q * bk).max(0.0), q, revenue))
}

fn mixed_out(m: &TwoTypeModel, s: &Scenario, cfg: &SearchConfig, k: usize) -> NeCandidate {
    let t = typed(k, NeTag::Mixed, NeTag::Out);
    if m.count(k) == 0 {
        return NeCandidate::infeasible(t);
    }
    let f = |x: f64| mixed_out_prices(m, k, x).map_or(f64::NEG_INFINITY, |v| v.2);
    let best = scalar_maximize(f, PI_LO, PI_HI, cfg.pi_step, cfg.tol);
    match mixed_out_prices(m, k, best.x) {
        Some((p_s, q, revenue)) => priced(t, revenue, Some((p_s, q)), placed(k, best.x, 0.0), s),
        None => NeCandidate::infeasible(t),
    }
}

/// Both types indifferent: the two indifference conditions fix `(p_s, q)`.
fn both_mixed_prices(m: &TwoTypeModel, pi: [f64; 2]) -> Option<(f64, f64, f64)> {
    let n = m.counts();
    let u = [m.use_value(0, pi), m.use_value(1, pi)];
    let b = [m.usage(0, pi), m.usage(1, pi)];
    let (p_s, q) = prices_for(u[0], u[1], b[0], b[1])?;
    let revenue = pi[0] * n[0] * u[0] + pi[1] * n[1] * u[1];
    (revenue >= m.c0).then_some((p_s, q, revenue))
}

fn both_mixed(m: &TwoTypeModel, s: &Scenario, cfg: &SearchConfig) -> NeCandidate {
    let t = NeType::pair(NeTag::Mixed, NeTag::Mixed);
    if m.count(0) == 0 || m.count(1) == 0 || cfg.skip_both_mixed {
        return NeCandidate::infeasible(t);
    }
    let f = |pi: [f64; 2]| both_mixed_prices(m, pi).map_or(f64::NEG_INFINITY, |v| v.2);
    let best = maximize_2d(f, [PI_LO; 2], [PI_HI; 2], cfg.grid_2d, cfg.tol);
    match both_mixed_prices(m, best.x) {
        Some((p_s, q, revenue)) => priced(t, revenue, Some((p_s, q)), best.x, s),
        None => NeCandidate::infeasible(t),
    }
}

pub(super) fn benevolent(m: &TwoTypeModel, s: &Scenario, cfg: &SearchConfig) -> Vec<NeCandidate> {
    vec![
        both_in(m, s, false),
        one_in(m, s, 0, false),
        one_in(m, s, 1, false),
        mixed_in(m, s, cfg, 0, false),
        mixed_in(m, s, cfg, 1, false),
        shut_out(s),
    ]
}

pub(super) fn selfish(m: &TwoTypeModel, s: &Scenario, cfg: &SearchConfig) -> Vec<NeCandidate> {
    vec![
        both_in(m, s, true),
        one_in(m, s, 0, true),
        one_in(m, s, 1, true),
        mixed_in(m, s, cfg, 0, true),
        mixed_in(m, s, cfg, 1, true),
        mixed_out(m, s, cfg, 0),
        mixed_out(m, s, cfg, 1),
        both_mixed(m, s, cfg),
        shut_out(s),
    ]
}
