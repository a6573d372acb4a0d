//! Design procedures under CSMA. The only instrument is the subscription fee;
//! each equilibrium type pins the fee to some type's expected use.

use super::{candidate, scalar_maximize, shut_out, NeCandidate, SearchConfig, PI_HI, PI_LO};
use crate::game::csma_both_mixed;
use crate::mac::TwoTypeModel;
use crate::model::{ActionProfile, NeTag, NeType, PricingPolicy, Scenario};

pub(super) fn typed(k: usize, tk: NeTag, to: NeTag) -> NeType {
    if k == 0 {
        NeType::pair(tk, to)
    } else {
        NeType::pair(to, tk)
    }
}

pub(super) fn placed(k: usize, pik: f64, pio: f64) -> [f64; 2] {
    if k == 0 {
        [pik, pio]
    } else {
        [pio, pik]
    }
}

fn present(m: &TwoTypeModel, k: usize) -> bool {
    m.count(k) > 0
}

/// Expected use of a would-be type-`o` subscriber, or `-inf` when there are
/// no type-`o` users to deter.
pub(super) fn rival_use(m: &TwoTypeModel, o: usize, pi: [f64; 2]) -> f64 {
    if present(m, o) {
        m.use_value(o, pi)
    } else {
        f64::NEG_INFINITY
    }
}

fn fee_candidate(t: NeType, objective: f64, p_s: f64, pi: [f64; 2], s: &Scenario) -> NeCandidate {
    candidate(t, objective, PricingPolicy::single(p_s, 0.0), ActionProfile::two_type(pi), s)
}

fn both_in(m: &TwoTypeModel, s: &Scenario, selfish: bool) -> NeCandidate {
    let t = NeType::pair(NeTag::In, NeTag::In);
    if !present(m, 0) || !present(m, 1) {
        return NeCandidate::infeasible(t);
    }
    let pi = [1.0, 1.0];
    let u = [m.use_value(0, pi), m.use_value(1, pi)];
    let n = m.counts();
    let total = n[0] + n[1];
    let floor = u[0].min(u[1]);
    if selfish {
        if floor >= 0.0 && floor * total >= m.c0 {
            return fee_candidate(t, floor * total, floor, pi, s);
        }
    } else if floor * total >= m.c0 {
        let welfare = u[0] * n[0] + u[1] * n[1] - m.c0;
        return fee_candidate(t, welfare, m.c0 / total, pi, s);
    }
    NeCandidate::infeasible(t)
}

fn one_in(m: &TwoTypeModel, s: &Scenario, k: usize, selfish: bool) -> NeCandidate {
    let o = 1 - k;
    let t = typed(k, NeTag::In, NeTag::Out);
    if !present(m, k) {
        return NeCandidate::infeasible(t);
    }
    let pi = placed(k, 1.0, 0.0);
    let u = m.use_value(k, pi);
    let nk = m.counts()[k];
    let rival = rival_use(m, o, pi);
    let floor = rival.max(m.c0 / nk).max(0.0);
    if u < floor {
        return NeCandidate::infeasible(t);
    }
    if selfish {
        fee_candidate(t, u * nk, u, pi, s)
    } else {
        fee_candidate(t, (u - floor) * nk, floor, pi, s)
    }
}

fn mixed_in(m: &TwoTypeModel, s: &Scenario, cfg: &SearchConfig, k: usize, selfish: bool) -> NeCandidate {
    let o = 1 - k;
    let t = typed(k, NeTag::Mixed, NeTag::In);
    if !present(m, k) || !present(m, o) {
        return NeCandidate::infeasible(t);
    }
    let n = m.counts();
    let eval = |x: f64| -> Option<(f64, f64)> {
        let pi = placed(k, x, 1.0);
        let uk = m.use_value(k, pi);
        let uo = m.use_value(o, pi);
        let revenue = uk * (x * n[k] + n[o]);
        if uk < 0.0 || uo < uk || revenue < m.c0 {
            return None;
        }
        Some((uk, if selfish { revenue } else { (uo - uk) * n[o] }))
    };
    let best = scalar_maximize(|x| eval(x).map_or(f64::NEG_INFINITY, |v| v.1), PI_LO, PI_HI, cfg.pi_step, cfg.tol);
    match eval(best.x) {
        Some((fee, objective)) => fee_candidate(t, objective, fee, placed(k, best.x, 1.0), s),
        None => NeCandidate::infeasible(t),
    }
}

fn mixed_out(m: &TwoTypeModel, s: &Scenario, cfg: &SearchConfig, k: usize) -> NeCandidate {
    let o = 1 - k;
    let t = typed(k, NeTag::Mixed, NeTag::Out);
    if !present(m, k) {
        return NeCandidate::infeasible(t);
    }
    let nk = m.counts()[k];
    let eval = |x: f64| -> Option<(f64, f64)> {
        let pi = placed(k, x, 0.0);
        let uk = m.use_value(k, pi);
        let revenue = uk * x * nk;
        if uk < 0.0 || uk < rival_use(m, o, pi) || revenue < m.c0 {
            return None;
        }
        Some((uk, revenue))
    };
    let best = scalar_maximize(|x| eval(x).map_or(f64::NEG_INFINITY, |v| v.1), PI_LO, PI_HI, cfg.pi_step, cfg.tol);
    match eval(best.x) {
        Some((fee, revenue)) => fee_candidate(t, revenue, fee, placed(k, best.x, 0.0), s),
        None => NeCandidate::infeasible(t),
    }
}

fn both_mixed(m: &TwoTypeModel, s: &Scenario, cfg: &SearchConfig) -> NeCandidate {
    let t = NeType::pair(NeTag::Mixed, NeTag::Mixed);
    if !present(m, 0) || !present(m, 1) || cfg.skip_both_mixed {
        return NeCandidate::infeasible(t);
    }
    let hi = m.lone_use_value(0).min(m.lone_use_value(1));
    if hi <= 0.0 {
        return NeCandidate::infeasible(t);
    }
    let n = m.counts();
    let eval = |p_s: f64| -> Option<([f64; 2], f64)> {
        let pi = csma_both_mixed(m, p_s)?;
        if !pi.iter().all(|x| (PI_LO..=PI_HI).contains(x)) {
            return None;
        }
        let revenue = p_s * (pi[0] * n[0] + pi[1] * n[1]);
        (revenue >= m.c0).then_some((pi, revenue))
    };
    let step = hi / cfg.fee_points as f64;
    let best = scalar_maximize(|x| eval(x).map_or(f64::NEG_INFINITY, |v| v.1), 0.0, hi, step, cfg.tol * hi.max(1.0));
    match eval(best.x) {
        Some((pi, revenue)) => fee_candidate(t, revenue, best.x, pi, s),
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
