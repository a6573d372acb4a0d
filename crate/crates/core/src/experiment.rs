//! Parameter sweeps: phase diagrams of the optimal equilibrium type, the
//! welfare and profit curves of the two protocols, and the utility-of-use
//! curve. Each sweep returns typed rows plus a [`Table`] whose CSV text is
//! reproducible byte for byte from the same spec.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::design::{solve, DesignSolution, Provider, SearchConfig};
use crate::error::{Error, Result};
use crate::mac::{throughput_for_count, utility_of_use};
use crate::model::{MacProtocol, NeType, Scenario, BASELINE_CSMA_P};

/// Significant digits of every float written to a CSV.
pub const CSV_DIGITS: usize = 12;

/// Inclusive range of user counts sampled every `step`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountRange {
    pub start: u32,
    pub end: u32,
    pub step: u32,
}

impl CountRange {
    pub fn new(start: u32, end: u32, step: u32) -> Result<Self> {
        let r = CountRange { start, end, step };
        r.validate()?;
        Ok(r)
    }

    pub fn single(n: u32) -> Self {
        CountRange { start: n, end: n, step: 1 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.step == 0 {
            return Err(Error::invalid("count step must be at least 1"));
        }
        if self.start > self.end {
            return Err(Error::invalid(format!("empty count range {}:{}", self.start, self.end)));
        }
        Ok(())
    }

    pub fn with_step(self, step: u32) -> Self {
        CountRange { step, ..self }
    }

    pub fn values(&self) -> Vec<u32> {
        (self.start..=self.end).step_by(self.step.max(1) as usize).collect()
    }
}

/// Parses `a`, `a:b` or `a:b:step`.
impl FromStr for CountRange {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let num = |p: &str| p.trim().parse::<u32>().map_err(|_| Error::invalid(format!("bad count `{p}` in `{s}`")));
        match parts.as_slice() {
            [a] => Ok(CountRange::single(num(a)?)),
            [a, b] => CountRange::new(num(a)?, num(b)?, 1),
            [a, b, c] => CountRange::new(num(a)?, num(b)?, num(c)?),
            _ => Err(Error::invalid(format!("bad count range `{s}`"))),
        }
    }
}

impl fmt::Display for CountRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.start, self.end, self.step)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mac {
    Csma,
    Tdma,
}

impl Mac {
    pub const BOTH: [Mac; 2] = [Mac::Csma, Mac::Tdma];

    pub fn protocol(self, csma_p: f64) -> MacProtocol {
        match self {
            Mac::Csma => MacProtocol::Csma { p: csma_p },
            Mac::Tdma => MacProtocol::Tdma,
        }
    }
}

impl FromStr for Mac {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csma" => Ok(Mac::Csma),
            "tdma" => Ok(Mac::Tdma),
            _ => Err(Error::invalid(format!("unknown protocol `{s}`"))),
        }
    }
}

/// Fixed provider cost under each protocol.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostPair {
    pub csma: f64,
    pub tdma: f64,
}

impl CostPair {
    pub fn zero() -> Self {
        CostPair { csma: 0.0, tdma: 0.0 }
    }

    pub fn of(&self, mac: Mac) -> f64 {
        match mac {
            Mac::Csma => self.csma,
            Mac::Tdma => self.tdma,
        }
    }
}

/// A sweep over the two-type video/email population.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub provider: Provider,
    pub protocols: Vec<Mac>,
    pub csma_p: f64,
    pub n1: CountRange,
    pub n2: CountRange,
    /// Demand ratio `lambda / mu` of the video and the email type.
    pub demand: [f64; 2],
    pub costs: Vec<CostPair>,
    pub search: SearchConfig,
}

impl SweepSpec {
    /// Phase-diagram sweep with the experimental defaults: zero cost, counts
    /// 1..50 for both types.
    pub fn baseline_phase(provider: Provider, mac: Mac, demand: [f64; 2]) -> Self {
        SweepSpec {
            provider,
            protocols: vec![mac],
            csma_p: BASELINE_CSMA_P,
            n1: CountRange { start: 1, end: 50, step: 1 },
            n2: CountRange { start: 1, end: 50, step: 1 },
            demand,
            costs: vec![CostPair::zero()],
            search: SearchConfig::default(),
        }
    }

    /// Curve sweep with the experimental defaults: ten video users, 1..50
    /// email users, unit demand, and a cheap and an expensive cost pair.
    pub fn baseline_curves(provider: Provider) -> Self {
        SweepSpec {
            provider,
            protocols: Mac::BOTH.to_vec(),
            csma_p: BASELINE_CSMA_P,
            n1: CountRange::single(10),
            n2: CountRange { start: 1, end: 50, step: 1 },
            demand: [1.0, 1.0],
            costs: vec![CostPair { csma: 1.0, tdma: 2.0 }, CostPair { csma: 15.0, tdma: 30.0 }],
            search: SearchConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        for r in [self.n1, self.n2] {
            if let Err(Error::Invalid(e)) = r.validate() {
                errs.extend(e);
            }
        }
        if self.protocols.is_empty() {
            errs.push("no protocol selected".into());
        }
        if !(self.csma_p > 0.0 && self.csma_p < 1.0) {
            errs.push(format!("CSMA transmission probability {} outside (0, 1)", self.csma_p));
        }
        if self.demand.iter().any(|d| !(d.is_finite() && *d > 0.0)) {
            errs.push(format!("demand ratios {:?} must be positive", self.demand));
        }
        if self.costs.is_empty() {
            errs.push("no cost pair".into());
        }
        if self.costs.iter().any(|c| !(c.csma.is_finite() && c.csma >= 0.0 && c.tdma.is_finite() && c.tdma >= 0.0)) {
            errs.push("costs must be finite and nonnegative".into());
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Invalid(errs))
        }
    }

    pub fn scenario(&self, mac: Mac, n: [u32; 2], c0: f64) -> Scenario {
        Scenario::two_type_baseline(n, self.demand, mac.protocol(self.csma_p), c0)
    }

    fn grid(&self) -> Vec<[u32; 2]> {
        let n2 = self.n2.values();
        self.n1.values().into_iter().flat_map(|a| n2.iter().map(move |&b| [a, b])).collect()
    }
}

/// Optimal operating point at one grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub ne_type: NeType,
    pub p_s: f64,
    pub q: f64,
    pub pi: [f64; 2],
    pub welfare: f64,
    pub revenue: f64,
    /// Revenue net of the fixed cost, zero when nobody subscribes.
    pub profit: f64,
}

impl PhasePoint {
    fn of(sol: &DesignSolution, c0: f64) -> Self {
        let plan = sol.policy.plan(1);
        PhasePoint {
            ne_type: sol.ne_type.clone(),
            p_s: plan.subscription(),
            q: plan.rate_charge(),
            pi: [sol.profile.subscribed(0), sol.profile.subscribed(1)],
            welfare: sol.welfare,
            revenue: sol.revenue,
            profit: sol.profit(c0),
        }
    }
}

/// A solver failure is kept as its message so one bad point never aborts a
/// sweep.
pub type Outcome = std::result::Result<PhasePoint, String>;

fn optimum(spec: &SweepSpec, provider: Provider, mac: Mac, n: [u32; 2], c0: f64) -> Outcome {
    let s = spec.scenario(mac, n, c0);
    solve(&s, provider, &spec.search).map(|sol| PhasePoint::of(&sol, c0)).map_err(|e| e.to_string())
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseRow {
    pub n: [u32; 2],
    pub provider: Provider,
    pub mac: Mac,
    pub c0: f64,
    pub outcome: Outcome,
}

/// Optimal design at every grid point, for every protocol and cost pair.
/// Points are solved in parallel and returned in grid order.
pub fn phase_diagram(spec: &SweepSpec) -> Result<Vec<PhaseRow>> {
    spec.validate()?;
    let mut jobs = Vec::new();
    for &mac in &spec.protocols {
        for cost in &spec.costs {
            for n in spec.grid() {
                jobs.push((mac, cost.of(mac), n));
            }
        }
    }
    Ok(jobs
        .into_par_iter()
        .map(|(mac, c0, n)| PhaseRow { n, provider: spec.provider, mac, c0, outcome: optimum(spec, spec.provider, mac, n, c0) })
        .collect())
}

pub fn phase_table(rows: &[PhaseRow]) -> Table {
    let mut t = Table::new(&[
        "n1", "n2", "provider", "protocol", "c0", "ne_type", "p_s", "q", "pi1", "pi2", "welfare", "revenue", "status",
    ]);
    for r in rows {
        let mut row = vec![
            Cell::Int(r.n[0].into()),
            Cell::Int(r.n[1].into()),
            Cell::text(r.provider.name()),
            Cell::text(mac_name(r.mac)),
            Cell::Num(r.c0),
        ];
        match &r.outcome {
            Ok(p) => {
                row.extend([
                    Cell::text(p.ne_type.to_string()),
                    Cell::Num(p.p_s),
                    Cell::Num(p.q),
                    Cell::Num(p.pi[0]),
                    Cell::Num(p.pi[1]),
                    Cell::Num(p.welfare),
                    Cell::Num(p.revenue),
                    Cell::text("ok"),
                ]);
            }
            Err(e) => {
                row.extend(std::iter::repeat_n(Cell::Empty, 7));
                row.push(Cell::text(format!("error: {e}")));
            }
        }
        t.rows.push(row);
    }
    t
}

fn mac_name(mac: Mac) -> &'static str {
    match mac {
        Mac::Csma => "csma",
        Mac::Tdma => "tdma",
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    /// Optimal welfare of the benevolent provider.
    Welfare,
    /// Optimal revenue net of cost of the selfish provider.
    Profit,
}

impl Metric {
    pub fn provider(self) -> Provider {
        match self {
            Metric::Welfare => Provider::Benevolent,
            Metric::Profit => Provider::Selfish,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Metric::Welfare => "welfare",
            Metric::Profit => "profit",
        }
    }

    fn value(self, p: &PhasePoint) -> f64 {
        match self {
            Metric::Welfare => p.welfare,
            Metric::Profit => p.profit,
        }
    }
}

/// CSMA and TDMA optima at one population under one cost pair.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveRow {
    pub n: [u32; 2],
    pub cost: CostPair,
    pub csma: Outcome,
    pub tdma: Outcome,
}

impl CurveRow {
    pub fn value(&self, metric: Metric, mac: Mac) -> Option<f64> {
        let o = match mac {
            Mac::Csma => &self.csma,
            Mac::Tdma => &self.tdma,
        };
        o.as_ref().ok().map(|p| metric.value(p))
    }
}

/// Both protocols at every population of the spec, for every cost pair. The
/// provider follows from the metric; `spec.provider` and `spec.protocols`
/// are not consulted.
pub fn curve(spec: &SweepSpec, metric: Metric) -> Result<Vec<CurveRow>> {
    spec.validate()?;
    let provider = metric.provider();
    let jobs: Vec<(CostPair, [u32; 2])> =
        spec.costs.iter().flat_map(|&c| spec.grid().into_iter().map(move |n| (c, n))).collect();
    Ok(jobs
        .into_par_iter()
        .map(|(cost, n)| CurveRow {
            n,
            cost,
            csma: optimum(spec, provider, Mac::Csma, n, cost.csma),
            tdma: optimum(spec, provider, Mac::Tdma, n, cost.tdma),
        })
        .collect())
}

pub fn welfare_curve(spec: &SweepSpec) -> Result<Vec<CurveRow>> {
    curve(spec, Metric::Welfare)
}

pub fn profit_curve(spec: &SweepSpec) -> Result<Vec<CurveRow>> {
    curve(spec, Metric::Profit)
}

pub fn curve_table(rows: &[CurveRow], metric: Metric) -> Table {
    let m = metric.name();
    let mut t = Table::new(&[
        "n1",
        "n2",
        "c0_csma",
        "c0_tdma",
        &format!("{m}_csma"),
        &format!("{m}_tdma"),
        "ne_csma",
        "ne_tdma",
        "status",
    ]);
    for r in rows {
        let num = |o: &Outcome| o.as_ref().map_or(Cell::Empty, |p| Cell::Num(metric.value(p)));
        let ne = |o: &Outcome| o.as_ref().map_or(Cell::Empty, |p| Cell::text(p.ne_type.to_string()));
        let errors: Vec<String> = [("csma", &r.csma), ("tdma", &r.tdma)]
            .iter()
            .filter_map(|(name, o)| o.as_ref().err().map(|e| format!("{name}: {e}")))
            .collect();
        let status = if errors.is_empty() { "ok".to_string() } else { format!("error: {}", errors.join("; ")) };
        t.rows.push(vec![
            Cell::Int(r.n[0].into()),
            Cell::Int(r.n[1].into()),
            Cell::Num(r.cost.csma),
            Cell::Num(r.cost.tdma),
            num(&r.csma),
            num(&r.tdma),
            ne(&r.csma),
            ne(&r.tdma),
            Cell::text(status),
        ]);
    }
    t
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UtilityRow {
    pub m: u32,
    pub tau: f64,
    pub u_video: f64,
    pub u_email: f64,
}

/// Utility of use of the video and email users against CSMA throughput, for
/// 20 down to 1 online users at the experimental transmission probability.
pub fn utility_curve() -> Vec<UtilityRow> {
    let protocol = MacProtocol::Csma { p: BASELINE_CSMA_P };
    let base = Scenario::two_type_baseline([1, 1], [1.0, 1.0], protocol, 0.0);
    (1..=20)
        .rev()
        .map(|m| {
            let tau = throughput_for_count(m, &protocol).expect("m >= 1");
            UtilityRow {
                m,
                tau,
                u_video: utility_of_use(&base.types[0], tau).expect("positive throughput"),
                u_email: utility_of_use(&base.types[1], tau).expect("positive throughput"),
            }
        })
        .collect()
}

pub fn utility_table(rows: &[UtilityRow]) -> Table {
    let mut t = Table::new(&["m", "tau", "u_video", "u_email"]);
    for r in rows {
        t.rows.push(vec![Cell::Int(r.m.into()), Cell::Num(r.tau), Cell::Num(r.u_video), Cell::Num(r.u_email)]);
    }
    t
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(u64),
    Num(f64),
    Text(String),
    Empty,
}

impl Cell {
    pub fn text(s: impl Into<String>) -> Self {
        Cell::Text(s.into())
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cell::Int(v) => write!(f, "{v}"),
            Cell::Num(x) => f.write_str(&format_num(*x)),
            Cell::Text(s) => f.write_str(s),
            Cell::Empty => Ok(()),
        }
    }
}

/// Rounds to [`CSV_DIGITS`] significant digits and prints the shortest text
/// that reads back as the rounded value. Infinities print as `inf`.
pub fn format_num(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.into();
    }
    if x == 0.0 {
        return "0".into();
    }
    let rounded: f64 = format!("{:.*e}", CSV_DIGITS - 1, x).parse().expect("formatted float parses");
    format!("{rounded}")
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table { header: header.iter().map(|h| h.to_string()).collect(), rows: Vec::new() }
    }

    /// CSV text with LF line endings.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
        w.write_record(&self.header).map_err(io)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|c| c.to_string())).map_err(io)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
        Ok(String::from_utf8(bytes).expect("CSV of UTF-8 fields"))
    }
}

/// Metadata written next to a CSV: the experiment, the fully resolved spec,
/// and the tool version.
pub fn sidecar<T: Serialize>(experiment: &str, spec: &T) -> Result<String> {
    let v = serde_json::json!({
        "tool": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "experiment": experiment,
        "spec": spec,
    });
    Ok(serde_json::to_string_pretty(&v)? + "\n")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_parse() {
        assert_eq!("5".parse::<CountRange>().unwrap().values(), vec![5]);
        assert_eq!("1:11:5".parse::<CountRange>().unwrap().values(), vec![1, 6, 11]);
        assert_eq!("3:4".parse::<CountRange>().unwrap().values(), vec![3, 4]);
        assert!("4:3".parse::<CountRange>().is_err());
        assert!("1:5:0".parse::<CountRange>().is_err());
        assert!("a:b".parse::<CountRange>().is_err());
    }

    #[test]
    fn numbers_use_twelve_digits() {
        assert_eq!(format_num(2.0 / 7.0), "0.285714285714");
        assert_eq!(format_num(0.1), "0.1");
        assert_eq!(format_num(7.45), "7.45");
        assert_eq!(format_num(-1.0 / 3.0), "-0.333333333333");
        assert_eq!(format_num(f64::INFINITY), "inf");
        assert_eq!(format_num(-0.0), "0");
        assert_eq!(format_num(123456789012345.0), "123456789012000");
    }

    #[test]
    fn lone_user_utility_matches_arithmetic() {
        let rows = utility_curve();
        assert_eq!(rows.len(), 20);
        assert_eq!(rows[0].m, 20);
        let last = rows.last().unwrap();
        assert_eq!(last.m, 1);
        assert_eq!(format_num(last.tau), format_num(2.0 / 17.0));
        assert!((last.u_video - 7.45).abs() < 1e-12);
        assert!((last.u_email - 4.15).abs() < 1e-12);
    }

    #[test]
    fn utility_rises_as_users_leave_and_curves_cross_at_four_percent() {
        let rows = utility_curve();
        for w in rows.windows(2) {
            assert!(w[1].tau > w[0].tau);
            assert!(w[1].u_video > w[0].u_video && w[1].u_email > w[0].u_email);
        }
        for r in &rows {
            assert_eq!(r.u_video < r.u_email, r.tau < 0.04, "m = {}", r.m);
        }
    }

    #[test]
    fn text_with_commas_is_quoted() {
        let mut t = Table::new(&["a", "b"]);
        t.rows.push(vec![Cell::text("(i,o)"), Cell::Num(1.5)]);
        assert_eq!(t.to_csv().unwrap(), "a,b\n\"(i,o)\",1.5\n");
    }

    #[test]
    fn bad_specs_are_rejected() {
        let mut s = SweepSpec::baseline_curves(Provider::Selfish);
        s.demand = [0.0, 1.0];
        s.costs.clear();
        match s.validate() {
            Err(Error::Invalid(e)) => assert_eq!(e.len(), 2),
            other => panic!("{other:?}"),
        }
    }
}
