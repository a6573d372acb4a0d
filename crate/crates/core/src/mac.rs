//! Throughput models, the utility of use, and closed-form expectations for the
//! two-type, one-plan game without admission control.

use crate::error::{Error, Result};
use crate::model::{ActionProfile, AdmissionPolicy, MacProtocol, PricingPolicy, Scenario, SystemState, UserType};

/// Per-user throughput of a MAC protocol as a function of the online count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThroughputModel {
    pub protocol: MacProtocol,
}

impl ThroughputModel {
    pub fn per_user(&self, online: u32) -> Result<f64> {
        throughput_for_count(online, &self.protocol)
    }
}

/// Throughput of one online subscriber when `m` subscribers are online:
/// `p (1 - p)^(m - 1)` under CSMA, `1 / m` under TDMA.
pub fn throughput_for_count(m: u32, protocol: &MacProtocol) -> Result<f64> {
    if m == 0 {
        return Err(Error::NoOnlineUsers);
    }
    Ok(match *protocol {
        MacProtocol::Csma { p } => p * (1.0 - p).powi(m as i32 - 1),
        MacProtocol::Tdma => 1.0 / f64::from(m),
    })
}

/// Throughput of the type-`k` users on plan `l` in state `x`. Users on the
/// dummy plan are not in the network and do not count towards `m`.
pub fn throughput(x: &SystemState, k: usize, l: usize, protocol: &MacProtocol) -> Result<f64> {
    if l == 0 || x.get(k, l) == 0 {
        return Err(Error::NoOnlineUsers);
    }
    let m: u32 = (1..x.cols()).map(|c| x.col_sum(c)).sum();
    throughput_for_count(m, protocol)
}

/// `u(tau) = alpha - beta / tau`.
pub fn utility_of_use(t: &UserType, tau: f64) -> Result<f64> {
    if tau.is_nan() || tau <= 0.0 {
        return Err(Error::NonPositiveThroughput(tau));
    }
    Ok(t.alpha - t.beta / tau)
}

/// `E[(1 - p)^-X]` for one user who subscribes with probability `pi_in` and
/// is then online with the type's own occupancy.
pub fn x_factor(pi_in: f64, t: &UserType, p: f64) -> f64 {
    pi_in * t.occupancy() * p / (1.0 - p) + 1.0
}

/// Binomial pmf `Bin(n, prob)` as a vector over `0..=n`.
pub(crate) fn binomial_pmf(n: u32, prob: f64) -> Vec<f64> {
    let mut out = vec![0.0; n as usize + 1];
    if prob <= 0.0 {
        out[0] = 1.0;
        return out;
    }
    if prob >= 1.0 {
        out[n as usize] = 1.0;
        return out;
    }
    let ratio = prob / (1.0 - prob);
    let mut c = (1.0 - prob).powi(n as i32);
    for x in 0..=n {
        if x > 0 {
            c *= ratio * f64::from(n - x + 1) / f64::from(x);
        }
        out[x as usize] = c;
    }
    out
}

/// The two-type, one-plan, no-admission-control setting in which the
/// expectations have closed forms. All `pi` arguments are the subscription
/// probabilities `[pi_1, pi_2]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoTypeModel {
    pub types: [UserType; 2],
    pub delta_t: f64,
    pub c0: f64,
    pub protocol: MacProtocol,
}

impl TwoTypeModel {
    pub fn new(s: &Scenario) -> Result<Self> {
        if s.num_types() != 2 {
            return Err(Error::Unsupported { what: "closed-form expectations", needs: "exactly two user types" });
        }
        if s.admission != AdmissionPolicy::AdmitAll {
            return Err(Error::Unsupported { what: "closed-form expectations", needs: "no admission control" });
        }
        Ok(TwoTypeModel { types: [s.types[0], s.types[1]], delta_t: s.delta_t, c0: s.c0, protocol: s.protocol })
    }

    pub fn count(&self, k: usize) -> u32 {
        self.types[k].count
    }

    pub fn counts(&self) -> [f64; 2] {
        [f64::from(self.types[0].count), f64::from(self.types[1].count)]
    }

    fn occ(&self, k: usize) -> f64 {
        self.types[k].occupancy()
    }

    /// Expected utility of use of a type-`k` user who subscribes, when the
    /// others subscribe with probabilities `pi`.
    pub fn use_value(&self, k: usize, pi: [f64; 2]) -> f64 {
        let o = 1 - k;
        let t = &self.types[k];
        let own_others = t.count.saturating_sub(1) as i32;
        let bracket = match self.protocol {
            MacProtocol::Csma { p } => {
                t.alpha
                    - t.beta / p
                        * x_factor(pi[k], t, p).powi(own_others)
                        * x_factor(pi[o], &self.types[o], p).powi(self.types[o].count as i32)
            }
            MacProtocol::Tdma => {
                t.alpha
                    - t.beta
                        * (1.0
                            + self.occ(k) * f64::from(own_others) * pi[k]
                            + self.occ(o) * f64::from(self.types[o].count) * pi[o])
            }
        };
        self.delta_t * self.occ(k) * bracket
    }

    /// Expected guaranteed rate accrued by a type-`k` subscriber.
    pub fn usage(&self, k: usize, pi: [f64; 2]) -> f64 {
        let o = 1 - k;
        let own_others = self.types[k].count.saturating_sub(1);
        let others = self.types[o].count;
        let scale = self.delta_t * self.occ(k);
        match self.protocol {
            MacProtocol::Csma { p } => {
                scale
                    * p
                    * (1.0 - pi[k] * self.occ(k) * p).powi(own_others as i32)
                    * (1.0 - pi[o] * self.occ(o) * p).powi(others as i32)
            }
            MacProtocol::Tdma => {
                // Other subscribers are online independently, so only the
                // number of online others matters.
                let a = binomial_pmf(own_others, pi[k] * self.occ(k));
                let b = binomial_pmf(others, pi[o] * self.occ(o));
                let mut acc = 0.0;
                for (i, pa) in a.iter().enumerate() {
                    for (j, pb) in b.iter().enumerate() {
                        acc += pa * pb / (1 + i + j) as f64;
                    }
                }
                scale * acc
            }
        }
    }

    /// Net value of subscribing for a type-`k` user under `(p_s, q)`.
    pub fn net_value(&self, k: usize, pi: [f64; 2], p_s: f64, q: f64) -> f64 {
        let charge = if q == 0.0 { 0.0 } else { q * self.usage(k, pi) };
        self.use_value(k, pi) - p_s - charge
    }

    /// Upper end of the useful subscription fee range: what a lone subscriber
    /// of type `k` would get.
    pub fn lone_use_value(&self, k: usize) -> f64 {
        let tau = throughput_for_count(1, &self.protocol).unwrap_or(1.0);
        self.delta_t * self.occ(k) * (self.types[k].alpha - self.types[k].beta / tau)
    }
}

fn two_type_args(
    k: usize,
    profile: &ActionProfile,
    deviation: Option<&[f64]>,
    s: &Scenario,
) -> Result<(TwoTypeModel, [f64; 2], f64)> {
    let model = TwoTypeModel::new(s)?;
    if profile.num_types() != 2 || profile.num_plans() != 2 {
        return Err(Error::Unsupported { what: "closed-form expectations", needs: "a 2 x 2 action profile" });
    }
    let pi = [profile.row(0)[1], profile.row(1)[1]];
    let dev = match deviation {
        Some(d) if d.len() == 2 => d[1],
        Some(_) => return Err(Error::invalid("deviation must list two plans")),
        None => pi[k],
    };
    Ok((model, pi, dev))
}

/// Closed-form `(U_k, C_k)` under CSMA.
pub fn csma_expected_utility(
    k: usize,
    profile: &ActionProfile,
    deviation: Option<&[f64]>,
    policy: &PricingPolicy,
    s: &Scenario,
) -> Result<(f64, f64)> {
    if !matches!(s.protocol, MacProtocol::Csma { .. }) {
        return Err(Error::Unsupported { what: "csma_expected_utility", needs: "a CSMA scenario" });
    }
    let (model, pi, dev) = two_type_args(k, profile, deviation, s)?;
    if dev == 0.0 {
        return Ok((0.0, 0.0));
    }
    Ok((dev * model.use_value(k, pi), dev * policy.plan(1).subscription()))
}

/// Closed-form `U_k` under TDMA.
pub fn tdma_expected_utility(k: usize, profile: &ActionProfile, deviation: Option<&[f64]>, s: &Scenario) -> Result<f64> {
    if !s.protocol.is_tdma() {
        return Err(Error::Unsupported { what: "tdma_expected_utility", needs: "a TDMA scenario" });
    }
    let (model, pi, dev) = two_type_args(k, profile, deviation, s)?;
    if dev == 0.0 {
        return Ok(0.0);
    }
    Ok(dev * model.use_value(k, pi))
}

/// Expected guaranteed rate `B_k` of a type-`k` TDMA subscriber.
pub fn tdma_expected_usage(k: usize, profile: &ActionProfile, s: &Scenario) -> Result<f64> {
    if !s.protocol.is_tdma() {
        return Err(Error::Unsupported { what: "tdma_expected_usage", needs: "a TDMA scenario" });
    }
    let (model, pi, _) = two_type_args(k, profile, None, s)?;
    Ok(model.usage(k, pi))
}

/// The same quantity as [`tdma_expected_usage`], written as the double
/// binomial mixture over how many users of each type subscribed, with the
/// inner per-outcome rate taken from the exact engine.
pub fn tdma_expected_usage_mixture(k: usize, profile: &ActionProfile, s: &Scenario) -> Result<f64> {
    use crate::engine::expected_guaranteed_rate;
    use crate::model::CountMatrix;
    let (model, pi, _) = two_type_args(k, profile, None, s)?;
    let o = 1 - k;
    let nk = model.count(k);
    let no = model.count(o);
    if nk == 0 {
        return Err(Error::EmptyCell { k, plan: 1 });
    }
    let own = binomial_pmf(nk - 1, pi[k]);
    let other = binomial_pmf(no, pi[o]);
    let mut acc = 0.0;
    for (i, wa) in own.iter().enumerate() {
        for (j, wb) in other.iter().enumerate() {
            let w = wa * wb;
            if w == 0.0 {
                continue;
            }
            let in_k = i as u32 + 1;
            let in_o = j as u32;
            let mut rows = vec![vec![0; 2]; 2];
            rows[k] = vec![nk - in_k, in_k];
            rows[o] = vec![no - in_o, in_o];
            acc += w * expected_guaranteed_rate(k, 1, &CountMatrix::from_rows(rows)?, s)?;
        }
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::BASELINE_CSMA_P;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    const VIDEO: UserType = UserType { alpha: 10.0, beta: 0.3, lambda: 1.0, mu: 1.0, count: 1 };
    const EMAIL: UserType = UserType { alpha: 5.0, beta: 0.1, lambda: 1.0, mu: 1.0, count: 1 };

    fn csma() -> MacProtocol {
        MacProtocol::Csma { p: BASELINE_CSMA_P }
    }

    #[test]
    fn throughput_examples() {
        assert_relative_eq!(throughput_for_count(1, &csma()).unwrap(), 2.0 / 17.0);
        assert_eq!(throughput_for_count(4, &MacProtocol::Tdma).unwrap(), 0.25);
        let p = BASELINE_CSMA_P;
        assert_relative_eq!(throughput_for_count(20, &csma()).unwrap(), p * (1.0 - p).powi(19));
        assert!(matches!(throughput_for_count(0, &MacProtocol::Tdma), Err(Error::NoOnlineUsers)));
    }

    #[test]
    fn utility_examples() {
        assert_relative_eq!(utility_of_use(&VIDEO, 1.0).unwrap(), 9.7);
        assert_eq!(utility_of_use(&VIDEO, 0.03).unwrap(), 0.0);
        assert_relative_eq!(utility_of_use(&EMAIL, 2.0 / 17.0).unwrap(), 4.15, epsilon = 1e-12);
        assert!(utility_of_use(&EMAIL, 0.0).is_err());
    }

    #[test]
    fn x_factor_examples() {
        let p = BASELINE_CSMA_P;
        assert_eq!(x_factor(0.0, &VIDEO, p), 1.0);
        assert_relative_eq!(x_factor(1.0, &VIDEO, p), 16.0 / 15.0, epsilon = 1e-15);
        let low = UserType { lambda: 0.1, ..VIDEO };
        assert_relative_eq!(x_factor(0.5, &low, p), 1.0 + 0.5 / 11.0 * 2.0 / 15.0, epsilon = 1e-15);
    }

    #[test]
    fn lone_subscriber_closed_forms() {
        let s = Scenario::two_type_baseline([1, 0], [1.0, 1.0], csma(), 0.0);
        let profile = ActionProfile::two_type([1.0, 1.0]);
        let (u, c) = csma_expected_utility(0, &profile, None, &PricingPolicy::single(2.0, 0.0), &s).unwrap();
        assert_relative_eq!(u, 3.725, epsilon = 1e-12);
        assert_eq!(c, 2.0);
        let out = csma_expected_utility(0, &profile, Some(&[1.0, 0.0]), &PricingPolicy::single(2.0, 0.0), &s).unwrap();
        assert_eq!(out, (0.0, 0.0));

        let t = s.with_protocol(MacProtocol::Tdma);
        assert_relative_eq!(tdma_expected_utility(0, &profile, None, &t).unwrap(), 4.85, epsilon = 1e-12);
        assert_relative_eq!(tdma_expected_usage(0, &profile, &t).unwrap(), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn tdma_bracket_without_competition() {
        let s = Scenario::two_type_baseline([1, 7], [0.4, 1.0], MacProtocol::Tdma, 0.0);
        let model = TwoTypeModel::new(&s).unwrap();
        let u = model.use_value(0, [0.3, 0.0]);
        assert_relative_eq!(u / (model.delta_t * s.types[0].occupancy()), 10.0 - 0.3, epsilon = 1e-12);
    }

    #[test]
    fn two_subscribers_tdma_usage() {
        let s = Scenario::two_type_baseline([1, 1], [1.0, 1.0], MacProtocol::Tdma, 0.0);
        let profile = ActionProfile::two_type([1.0, 1.0]);
        assert_relative_eq!(tdma_expected_usage(0, &profile, &s).unwrap(), 0.375, epsilon = 1e-12);
    }

    #[test]
    fn wrong_protocol_is_rejected() {
        let s = Scenario::two_type_baseline([1, 1], [1.0, 1.0], MacProtocol::Tdma, 0.0);
        let profile = ActionProfile::two_type([1.0, 1.0]);
        assert!(csma_expected_utility(0, &profile, None, &PricingPolicy::single(0.0, 0.0), &s).is_err());
        let c = s.with_protocol(csma());
        assert!(tdma_expected_usage(0, &profile, &c).is_err());
    }

    proptest! {
        #[test]
        fn aggregate_throughput_never_exceeds_capacity(m in 1u32..200, p in 0.001f64..0.9) {
            let t = throughput_for_count(m, &MacProtocol::Tdma).unwrap();
            prop_assert!(t * f64::from(m) <= 1.0 + 1e-12 && t > 0.0 && t <= 1.0);
            let c = throughput_for_count(m, &MacProtocol::Csma { p }).unwrap();
            prop_assert!(c * f64::from(m) <= 1.0 + 1e-12 && c > 0.0 && c <= p);
        }

        #[test]
        fn congestion_shapes(
            n1 in 1u32..30, n2 in 0u32..30, pi1 in 0.0f64..1.0, pi2 in 0.01f64..1.0,
            d1 in 0.05f64..2.0, d2 in 0.05f64..2.0, k in 0usize..2,
        ) {
            let base = Scenario::two_type_baseline([n1, n2], [d1, d2], csma(), 0.0);
            let o = 1 - k;
            let bump = |s: &Scenario| {
                let mut c = s.counts();
                c[o] += 1;
                s.with_counts(&c)
            };
            let pi = [pi1, pi2];
            // CSMA: the congestion term scales by x_{-k} per extra rival.
            let m0 = TwoTypeModel::new(&base).unwrap();
            let m1 = TwoTypeModel::new(&bump(&base)).unwrap();
            let alpha = m0.types[k].alpha;
            let scale = m0.delta_t * m0.types[k].occupancy();
            let g0 = alpha - m0.use_value(k, pi) / scale;
            let g1 = alpha - m1.use_value(k, pi) / scale;
            let ratio = x_factor(pi[o], &m0.types[o], BASELINE_CSMA_P);
            prop_assert!((g1 - g0 * ratio).abs() <= 1e-9 * g1.abs().max(1.0));
            // TDMA: constant increment per extra rival.
            let t = base.with_protocol(MacProtocol::Tdma);
            let t0 = TwoTypeModel::new(&t).unwrap();
            let t1 = TwoTypeModel::new(&bump(&t)).unwrap();
            let t2 = TwoTypeModel::new(&bump(&bump(&t))).unwrap();
            let d01 = t0.use_value(k, pi) - t1.use_value(k, pi);
            let d12 = t1.use_value(k, pi) - t2.use_value(k, pi);
            prop_assert!((d01 - d12).abs() <= 1e-9);
            prop_assert!(d01 >= 0.0);
        }

        #[test]
        fn use_value_is_monotone_in_rivals(
            n1 in 1u32..20, n2 in 1u32..20, pi1 in 0.0f64..1.0, pi2 in 0.0f64..0.99, bump in 0.0f64..0.01,
            k in 0usize..2, tdma: bool,
        ) {
            let protocol = if tdma { MacProtocol::Tdma } else { csma() };
            let m = TwoTypeModel::new(&Scenario::two_type_baseline([n1, n2], [1.0, 0.1], protocol, 0.0)).unwrap();
            let o = 1 - k;
            let mut pi = [pi1, pi2];
            let before = m.use_value(k, pi);
            pi[o] = (pi[o] + bump).min(1.0);
            prop_assert!(m.use_value(k, pi) <= before + 1e-12);
            let mut counts = [n1, n2];
            counts[o] += 1;
            let bigger = TwoTypeModel::new(&Scenario::two_type_baseline(counts, [1.0, 0.1], protocol, 0.0)).unwrap();
            prop_assert!(bigger.use_value(k, pi) <= m.use_value(k, pi) + 1e-12);
        }
    }
}
