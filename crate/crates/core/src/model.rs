//! Domain types shared by every other module: user classes, scenarios, MAC
//! protocols, pricing plans and policies, action profiles and the integer
//! count matrices that describe randomization outcomes and system states.
//!
//! Indices follow one convention throughout the crate: user types are
//! `0..K` and plans are `0..=L`, with plan `0` the dummy (non-subscription)
//! plan.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row sums of an action profile must be within this distance of one.
pub const ROW_SUM_TOL: f64 = 1e-12;

/// One class of statistically identical users.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UserType {
    /// Utility ceiling `alpha` of `u(tau) = alpha - beta / tau`.
    pub alpha: f64,
    /// Throughput sensitivity `beta`.
    pub beta: f64,
    /// Individual arrival rate.
    pub lambda: f64,
    /// Individual departure rate (inverse mean session length).
    pub mu: f64,
    /// Population size.
    pub count: u32,
}

impl UserType {
    pub fn new(alpha: f64, beta: f64, lambda: f64, mu: f64, count: u32) -> Result<Self> {
        let t = UserType { alpha, beta, lambda, mu, count };
        let issues = t.issues("user type");
        if issues.is_empty() {
            Ok(t)
        } else {
            Err(Error::Invalid(issues))
        }
    }

    /// Steady-state probability that one user is online, `lambda / (lambda + mu)`.
    pub fn occupancy(&self) -> f64 {
        self.lambda / (self.lambda + self.mu)
    }

    /// Demand ratio `lambda / mu`.
    pub fn demand(&self) -> f64 {
        self.lambda / self.mu
    }

    fn issues(&self, label: &str) -> Vec<String> {
        let mut out = Vec::new();
        let positive = [("alpha", self.alpha), ("beta", self.beta), ("lambda", self.lambda), ("mu", self.mu)];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                out.push(format!("{label}: {name} must be positive and finite, got {v}"));
            }
        }
        out
    }
}

/// Medium access control protocol.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MacProtocol {
    /// Contention access, modelled as symmetric slotted ALOHA with per-slot
    /// transmission probability `p`.
    Csma { p: f64 },
    /// Scheduled access: online subscribers split the unit bandwidth equally.
    Tdma,
}

impl MacProtocol {
    pub fn name(&self) -> &'static str {
        match self {
            MacProtocol::Csma { .. } => "csma",
            MacProtocol::Tdma => "tdma",
        }
    }

    pub fn is_tdma(&self) -> bool {
        matches!(self, MacProtocol::Tdma)
    }
}

impl fmt::Display for MacProtocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Admission control as a function of the pricing state and the plan of the
/// arriving user.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AdmissionPolicy {
    AdmitAll,
    /// `caps[l]` bounds the number of online users on plan `l`; an arrival on
    /// plan `l` is admitted iff `v_l <= caps[l] - 1`. `caps[0]` must be
    /// `None`: the dummy plan is never capped.
    PerPlanCap { caps: Vec<Option<u32>> },
}

impl AdmissionPolicy {
    /// Whether an arrival on `plan` is admitted given the pricing state `v`.
    pub fn admits(&self, v: &[u32], plan: usize) -> bool {
        match self {
            AdmissionPolicy::AdmitAll => true,
            AdmissionPolicy::PerPlanCap { caps } => match caps.get(plan).copied().flatten() {
                Some(cap) => v[plan] < cap,
                None => true,
            },
        }
    }

    /// Whether the pricing state `v` lies inside the admissible region.
    pub fn allows_state(&self, v: &[u32]) -> bool {
        match self {
            AdmissionPolicy::AdmitAll => true,
            AdmissionPolicy::PerPlanCap { caps } => v
                .iter()
                .zip(caps)
                .all(|(&vl, cap)| cap.is_none_or(|c| vl <= c)),
        }
    }
}

/// A complete problem instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub types: Vec<UserType>,
    /// Billing period length.
    pub delta_t: f64,
    /// Fixed provider cost per billing period.
    pub c0: f64,
    pub protocol: MacProtocol,
    pub admission: AdmissionPolicy,
}

/// The CSMA transmission probability used throughout the experiments.
pub const BASELINE_CSMA_P: f64 = 2.0 / 17.0;

impl Scenario {
    /// The two-type video/email scenario: `alpha = (10, 5)`, `beta = (0.3, 0.1)`,
    /// unit billing period, no admission control, departure rate one and arrival
    /// rates equal to the given demand ratios.
    pub fn two_type_baseline(n: [u32; 2], demand: [f64; 2], protocol: MacProtocol, c0: f64) -> Self {
        Scenario {
            types: vec![
                UserType { alpha: 10.0, beta: 0.3, lambda: demand[0], mu: 1.0, count: n[0] },
                UserType { alpha: 5.0, beta: 0.1, lambda: demand[1], mu: 1.0, count: n[1] },
            ],
            delta_t: 1.0,
            c0,
            protocol,
            admission: AdmissionPolicy::AdmitAll,
        }
    }

    pub fn num_types(&self) -> usize {
        self.types.len()
    }

    pub fn counts(&self) -> Vec<u32> {
        self.types.iter().map(|t| t.count).collect()
    }

    pub fn with_protocol(&self, protocol: MacProtocol) -> Self {
        Scenario { protocol, ..self.clone() }
    }

    pub fn with_counts(&self, counts: &[u32]) -> Self {
        let mut s = self.clone();
        for (t, &c) in s.types.iter_mut().zip(counts) {
            t.count = c;
        }
        s
    }

    pub fn with_c0(&self, c0: f64) -> Self {
        Scenario { c0, ..self.clone() }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Parses and validates a scenario document.
    pub fn from_json(s: &str) -> Result<Self> {
        let scenario: Scenario = serde_json::from_str(s)?;
        validate_scenario(&scenario)?;
        Ok(scenario)
    }
}

/// Reports every violated invariant of the scenario instead of stopping at
/// the first.
pub fn validate_scenario(s: &Scenario) -> Result<()> {
    let mut issues = Vec::new();
    if s.types.is_empty() {
        issues.push("scenario needs at least one user type".to_string());
    }
    for (k, t) in s.types.iter().enumerate() {
        issues.extend(t.issues(&format!("type {k}")));
    }
    if !(s.delta_t.is_finite() && s.delta_t > 0.0) {
        issues.push(format!("delta_t must be positive and finite, got {}", s.delta_t));
    }
    if !(s.c0.is_finite() && s.c0 >= 0.0) {
        issues.push(format!("c0 must be nonnegative and finite, got {}", s.c0));
    }
    if let MacProtocol::Csma { p } = s.protocol {
        if !(p > 0.0 && p < 1.0) {
            issues.push(format!("CSMA p out of range (0, 1): {p}"));
        }
    }
    if let AdmissionPolicy::PerPlanCap { caps } = &s.admission {
        if caps.is_empty() {
            issues.push("per-plan caps must list the dummy plan".to_string());
        } else if caps[0].is_some() {
            issues.push("caps[0] must be unbounded: the dummy plan is never capped".to_string());
        }
    }
    if issues.is_empty() {
        Ok(())
    } else {
        Err(Error::Invalid(issues))
    }
}

/// A schedule of charges.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PricingPlan {
    /// Non-subscription: no charge, no service.
    Dummy,
    Paid {
        /// Subscription fee per billing period; `+inf` shuts everyone out.
        #[serde(with = "inf_f64")]
        subscription: f64,
        /// Charge per unit of guaranteed rate.
        rate_charge: f64,
    },
}

impl PricingPlan {
    pub fn paid(subscription: f64, rate_charge: f64) -> Self {
        PricingPlan::Paid { subscription, rate_charge }
    }

    pub fn subscription(&self) -> f64 {
        match *self {
            PricingPlan::Dummy => 0.0,
            PricingPlan::Paid { subscription, .. } => subscription,
        }
    }

    pub fn rate_charge(&self) -> f64 {
        match *self {
            PricingPlan::Dummy => 0.0,
            PricingPlan::Paid { rate_charge, .. } => rate_charge,
        }
    }
}

/// A menu of `L + 1` plans; index 0 is the dummy plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PricingPolicy {
    pub plans: Vec<PricingPlan>,
}

impl PricingPolicy {
    pub fn new(plans: Vec<PricingPlan>) -> Result<Self> {
        let policy = PricingPolicy { plans };
        let issues = policy.issues();
        if issues.is_empty() {
            Ok(policy)
        } else {
            Err(Error::Invalid(issues))
        }
    }

    /// `(dummy, (p_s, q))`.
    pub fn single(subscription: f64, rate_charge: f64) -> Self {
        PricingPolicy { plans: vec![PricingPlan::Dummy, PricingPlan::paid(subscription, rate_charge)] }
    }

    /// The shut-out policy `(dummy, (inf, 0))`.
    pub fn shut_out() -> Self {
        Self::single(f64::INFINITY, 0.0)
    }

    /// Number of non-dummy plans `L`.
    pub fn num_paid(&self) -> usize {
        self.plans.len().saturating_sub(1)
    }

    pub fn plan(&self, l: usize) -> &PricingPlan {
        &self.plans[l]
    }

    fn issues(&self) -> Vec<String> {
        let mut out = Vec::new();
        match self.plans.first() {
            Some(PricingPlan::Dummy) => {}
            _ => out.push("missing dummy plan at index 0".to_string()),
        }
        for (l, plan) in self.plans.iter().enumerate().skip(1) {
            match *plan {
                PricingPlan::Dummy => out.push(format!("plan {l}: only plan 0 may be the dummy plan")),
                PricingPlan::Paid { subscription, rate_charge } => {
                    if subscription.is_nan() || subscription < 0.0 {
                        out.push(format!("plan {l}: subscription must be >= 0, got {subscription}"));
                    }
                    if !(rate_charge.is_finite() && rate_charge >= 0.0) {
                        out.push(format!("plan {l}: rate charge must be finite and >= 0, got {rate_charge}"));
                    }
                }
            }
        }
        out
    }
}

/// Checks a policy on its own and against the protocol: CSMA cannot
/// guarantee rates, so its plans must not charge for them.
pub fn validate_policy(policy: &PricingPolicy, protocol: &MacProtocol) -> Result<()> {
    let mut issues = policy.issues();
    if matches!(protocol, MacProtocol::Csma { .. }) {
        for (l, plan) in policy.plans.iter().enumerate().skip(1) {
            if plan.rate_charge() != 0.0 {
                issues.push(format!("plan {l}: CSMA plans cannot charge for guaranteed rate"));
            }
        }
    }
    if issues.is_empty() {
        Ok(())
    } else {
        Err(Error::Invalid(issues))
    }
}

/// Row `k` is the plan-choice distribution of every type-`k` user.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionProfile {
    pub pi: Vec<Vec<f64>>,
}

impl ActionProfile {
    pub fn new(pi: Vec<Vec<f64>>) -> Result<Self> {
        let mut issues = Vec::new();
        let width = pi.first().map_or(0, Vec::len);
        for (k, row) in pi.iter().enumerate() {
            if row.len() != width || width == 0 {
                issues.push(format!("row {k}: expected {width} plan probabilities, got {}", row.len()));
                continue;
            }
            if row.iter().any(|&x| !(0.0..=1.0).contains(&x)) {
                issues.push(format!("row {k}: probabilities must lie in [0, 1]"));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                issues.push(format!("row {k}: not row-stochastic (sums to {sum})"));
            }
        }
        if issues.is_empty() {
            Ok(ActionProfile { pi })
        } else {
            Err(Error::Invalid(issues))
        }
    }

    /// Two types, one paid plan: row `k` is `[1 - pi[k], pi[k]]`.
    pub fn two_type(pi: [f64; 2]) -> Self {
        ActionProfile { pi: pi.iter().map(|&x| vec![1.0 - x, x]).collect() }
    }

    pub fn num_types(&self) -> usize {
        self.pi.len()
    }

    pub fn num_plans(&self) -> usize {
        self.pi.first().map_or(0, Vec::len)
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.pi[k]
    }

    /// Probability that a type-`k` user subscribes to some paid plan.
    pub fn subscribed(&self, k: usize) -> f64 {
        self.pi[k].iter().skip(1).sum()
    }

    /// Replaces row `k`.
    pub fn with_row(&self, k: usize, row: Vec<f64>) -> Self {
        let mut p = self.clone();
        p.pi[k] = row;
        p
    }
}

/// Dense `K x (L + 1)` matrix of nonnegative counts.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "Vec<Vec<u32>>", try_from = "Vec<Vec<u32>>")]
pub struct CountMatrix {
    rows: usize,
    cols: usize,
    data: Vec<u32>,
}

impl CountMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        CountMatrix { rows, cols, data: vec![0; rows * cols] }
    }

    pub fn from_rows(rows: Vec<Vec<u32>>) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if r == 0 || c == 0 || rows.iter().any(|row| row.len() != c) {
            return Err(Error::invalid("count matrix must be non-empty and rectangular"));
        }
        Ok(CountMatrix { rows: r, cols: c, data: rows.into_iter().flatten().collect() })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, k: usize, l: usize) -> u32 {
        self.data[k * self.cols + l]
    }

    pub fn set(&mut self, k: usize, l: usize, v: u32) {
        self.data[k * self.cols + l] = v;
    }

    pub fn row(&self, k: usize) -> &[u32] {
        &self.data[k * self.cols..(k + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [u32] {
        &mut self.data
    }

    pub fn row_sum(&self, k: usize) -> u32 {
        self.row(k).iter().sum()
    }

    pub fn col_sum(&self, l: usize) -> u32 {
        (0..self.rows).map(|k| self.get(k, l)).sum()
    }

    pub fn to_rows(&self) -> Vec<Vec<u32>> {
        self.data.chunks(self.cols).map(<[u32]>::to_vec).collect()
    }
}

impl From<CountMatrix> for Vec<Vec<u32>> {
    fn from(m: CountMatrix) -> Self {
        m.to_rows()
    }
}

impl TryFrom<Vec<Vec<u32>>> for CountMatrix {
    type Error = Error;

    fn try_from(rows: Vec<Vec<u32>>) -> Result<Self> {
        CountMatrix::from_rows(rows)
    }
}

/// `n[k][l]`: how many type-`k` users picked plan `l` at time zero.
pub type RandomizationOutcome = CountMatrix;

/// `x[k][l]`: how many type-`k` users on plan `l` are currently online.
pub type SystemState = CountMatrix;

/// Checks that `n` is a randomization outcome for the scenario's populations.
pub fn check_outcome(n: &RandomizationOutcome, s: &Scenario) -> Result<()> {
    if n.rows() != s.num_types() {
        return Err(Error::invalid(format!(
            "outcome has {} rows but the scenario has {} types",
            n.rows(),
            s.num_types()
        )));
    }
    let issues: Vec<String> = s
        .types
        .iter()
        .enumerate()
        .filter(|(k, t)| n.row_sum(*k) != t.count)
        .map(|(k, t)| format!("row {k} sums to {} but N_{k} = {}", n.row_sum(k), t.count))
        .collect();
    if !issues.is_empty() {
        return Err(Error::Invalid(issues));
    }
    if let AdmissionPolicy::PerPlanCap { caps } = &s.admission {
        if caps.len() != n.cols() {
            return Err(Error::invalid(format!(
                "admission caps list {} plans but the outcome has {}",
                caps.len(),
                n.cols()
            )));
        }
    }
    Ok(())
}

/// Online users per plan, `v_l = sum_k x[k][l]`.
pub fn pricing_state(x: &SystemState) -> Vec<u32> {
    (0..x.cols()).map(|l| x.col_sum(l)).collect()
}

/// Participation of one type in a symmetric equilibrium with one paid plan.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NeTag {
    In,
    Out,
    Mixed,
}

impl NeTag {
    pub fn letter(self) -> char {
        match self {
            NeTag::In => 'i',
            NeTag::Out => 'o',
            NeTag::Mixed => 'm',
        }
    }

    /// Classifies a subscription probability; anything strictly inside
    /// `(0, 1)` is mixed.
    pub fn of(pi_in: f64) -> Self {
        if pi_in <= 0.0 {
            NeTag::Out
        } else if pi_in >= 1.0 {
            NeTag::In
        } else {
            NeTag::Mixed
        }
    }
}

/// Equilibrium type `(t_1, ..., t_K)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct NeType(pub Vec<NeTag>);

impl NeType {
    pub fn pair(a: NeTag, b: NeTag) -> Self {
        NeType(vec![a, b])
    }

    /// Classifies a profile with one paid plan.
    pub fn of(profile: &ActionProfile) -> Self {
        NeType((0..profile.num_types()).map(|k| NeTag::of(profile.subscribed(k))).collect())
    }

    /// All nine two-type combinations in tie-breaking priority order.
    pub fn priority_order() -> [NeType; 9] {
        use NeTag::*;
        [
            (In, In),
            (In, Out),
            (Out, In),
            (Mixed, In),
            (In, Mixed),
            (Mixed, Mixed),
            (Mixed, Out),
            (Out, Mixed),
            (Out, Out),
        ]
        .map(|(a, b)| NeType::pair(a, b))
    }

    /// Position in [`NeType::priority_order`]; lower wins ties.
    pub fn priority(&self) -> usize {
        NeType::priority_order().iter().position(|t| t == self).unwrap_or(usize::MAX)
    }

    pub fn tag(&self, k: usize) -> NeTag {
        self.0[k]
    }
}

impl fmt::Display for NeType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let letters: Vec<String> = self.0.iter().map(|t| t.letter().to_string()).collect();
        write!(f, "({})", letters.join(","))
    }
}

impl From<NeType> for String {
    fn from(t: NeType) -> Self {
        t.to_string()
    }
}

impl TryFrom<String> for NeType {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        let inner = s
            .strip_prefix('(')
            .and_then(|r| r.strip_suffix(')'))
            .ok_or_else(|| Error::invalid(format!("bad NE type {s:?}")))?;
        inner
            .split(',')
            .map(|c| match c.trim() {
                "i" => Ok(NeTag::In),
                "o" => Ok(NeTag::Out),
                "m" => Ok(NeTag::Mixed),
                other => Err(Error::invalid(format!("bad NE tag {other:?}"))),
            })
            .collect::<Result<Vec<_>>>()
            .map(NeType)
    }
}

/// Serializes `f64` as a JSON number, with `+inf` as the string `"inf"`.
pub mod inf_f64 {
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if *v == f64::INFINITY {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*v)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Text(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) if t == "inf" => Ok(f64::INFINITY),
            Repr::Text(t) => Err(de::Error::custom(format!("expected a number or \"inf\", got {t:?}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn baseline() -> Scenario {
        Scenario::two_type_baseline([20, 20], [0.1, 0.1], MacProtocol::Csma { p: BASELINE_CSMA_P }, 0.0)
    }

    #[test]
    fn pricing_state_sums_columns() {
        let zero = CountMatrix::zeros(2, 2);
        assert_eq!(pricing_state(&zero), vec![0, 0]);
        let x = CountMatrix::from_rows(vec![vec![0, 2], vec![0, 3]]).unwrap();
        assert_eq!(pricing_state(&x), vec![0, 5]);
        let x = CountMatrix::from_rows(vec![vec![1, 0], vec![0, 1]]).unwrap();
        assert_eq!(pricing_state(&x), vec![1, 1]);
    }

    #[test]
    fn baseline_validates() {
        validate_scenario(&baseline()).unwrap();
    }

    #[test]
    fn bad_csma_p_is_reported() {
        let s = baseline().with_protocol(MacProtocol::Csma { p: 1.2 });
        let err = validate_scenario(&s).unwrap_err().to_string();
        assert!(err.contains("CSMA p out of range"), "{err}");
    }

    #[test]
    fn every_issue_is_reported() {
        let mut s = baseline().with_protocol(MacProtocol::Csma { p: 0.0 });
        s.types[0].lambda = -1.0;
        s.delta_t = 0.0;
        match validate_scenario(&s) {
            Err(Error::Invalid(issues)) => assert_eq!(issues.len(), 3, "{issues:?}"),
            other => panic!("expected issues, got {other:?}"),
        }
    }

    #[test]
    fn non_stochastic_row_is_rejected() {
        let err = ActionProfile::new(vec![vec![0.5, 0.4]]).unwrap_err().to_string();
        assert!(err.contains("not row-stochastic"), "{err}");
    }

    #[test]
    fn policy_requires_dummy_plan() {
        let err = PricingPolicy::new(vec![PricingPlan::paid(1.0, 0.0)]).unwrap_err().to_string();
        assert!(err.contains("missing dummy plan"), "{err}");
        let csma = MacProtocol::Csma { p: 0.1 };
        assert!(validate_policy(&PricingPolicy::single(1.0, 0.5), &csma).is_err());
        assert!(validate_policy(&PricingPolicy::single(1.0, 0.5), &MacProtocol::Tdma).is_ok());
        assert!(validate_policy(&PricingPolicy::shut_out(), &csma).is_ok());
    }

    #[test]
    fn capped_dummy_plan_is_rejected() {
        let mut s = baseline();
        s.admission = AdmissionPolicy::PerPlanCap { caps: vec![Some(1), Some(3)] };
        assert!(validate_scenario(&s).is_err());
        s.admission = AdmissionPolicy::PerPlanCap { caps: vec![None, Some(3)] };
        assert!(validate_scenario(&s).is_ok());
    }

    #[test]
    fn infinite_subscription_serializes_as_inf() {
        let json = serde_json::to_string(&PricingPolicy::shut_out()).unwrap();
        assert!(json.contains("\"inf\""), "{json}");
        let back: PricingPolicy = serde_json::from_str(&json).unwrap();
        assert_eq!(back.plans[1].subscription(), f64::INFINITY);
    }

    #[test]
    fn scenario_json_uses_documented_keys() {
        let mut s = baseline();
        s.admission = AdmissionPolicy::PerPlanCap { caps: vec![None, Some(4)] };
        let v: serde_json::Value = serde_json::from_str(&s.to_json().unwrap()).unwrap();
        assert_eq!(v["protocol"]["kind"], "csma");
        assert_eq!(v["admission"]["kind"], "per_plan_cap");
        assert_eq!(v["types"][0]["count"], 20);
        let tdma: serde_json::Value = serde_json::to_value(MacProtocol::Tdma).unwrap();
        assert_eq!(tdma, serde_json::json!({"kind": "tdma"}));
    }

    #[test]
    fn ne_type_round_trips_through_text() {
        for t in NeType::priority_order() {
            let text = t.to_string();
            assert_eq!(NeType::try_from(text).unwrap(), t);
        }
        assert_eq!(NeType::pair(NeTag::In, NeTag::Mixed).to_string(), "(i,m)");
    }

    #[test]
    fn admission_cap_blocks_at_bound() {
        let a = AdmissionPolicy::PerPlanCap { caps: vec![None, Some(2)] };
        assert!(a.admits(&[5, 1], 1));
        assert!(!a.admits(&[5, 2], 1));
        assert!(a.admits(&[5, 2], 0));
        assert!(a.allows_state(&[9, 2]));
        assert!(!a.allows_state(&[0, 3]));
    }

    proptest! {
        #[test]
        fn occupancy_is_monotone(lambda in 0.01f64..10.0, mu in 0.01f64..10.0, d in 0.001f64..1.0) {
            let t = UserType::new(1.0, 1.0, lambda, mu, 1).unwrap();
            let more_arrivals = UserType { lambda: lambda + d, ..t };
            let more_departures = UserType { mu: mu + d, ..t };
            prop_assert!(t.occupancy() > 0.0 && t.occupancy() < 1.0);
            prop_assert!(more_arrivals.occupancy() > t.occupancy());
            prop_assert!(more_departures.occupancy() < t.occupancy());
        }

        #[test]
        fn scenario_json_round_trip_is_identity(
            alpha in 0.1f64..20.0, beta in 0.01f64..2.0, lambda in 0.01f64..5.0, mu in 0.01f64..5.0,
            count in 0u32..60, c0 in 0.0f64..50.0, p in 0.01f64..0.99, tdma: bool, cap in proptest::option::of(0u32..10),
        ) {
            let t = UserType::new(alpha, beta, lambda, mu, count).unwrap();
            let s = Scenario {
                types: vec![t, UserType { count: count / 2, ..t }],
                delta_t: 1.5,
                c0,
                protocol: if tdma { MacProtocol::Tdma } else { MacProtocol::Csma { p } },
                admission: match cap {
                    None => AdmissionPolicy::AdmitAll,
                    Some(c) => AdmissionPolicy::PerPlanCap { caps: vec![None, Some(c)] },
                },
            };
            let back = Scenario::from_json(&s.to_json().unwrap()).unwrap();
            prop_assert_eq!(back, s);
        }
    }
}
