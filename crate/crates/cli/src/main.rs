use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use wlan_pricing::design::{solve, Provider, SearchConfig};
use wlan_pricing::experiment::{
    curve, curve_table, phase_diagram, phase_table, sidecar, utility_curve, utility_table, CostPair, CountRange, Mac,
    Metric, SweepSpec, Table,
};
use wlan_pricing::sim::{simulate, Assignment, SimConfig};
use wlan_pricing::verify::{self, VerifyMode, COLLAPSE_POLICIES, SIM_EVENTS, SIM_REPLICATIONS};
use wlan_pricing::{CountMatrix, Scenario};

#[derive(Parser)]
#[command(name = "wlan-pricing", version, about = "Optimal WLAN pricing under CSMA and TDMA")]
struct Cli {
    /// Worker threads for sweeps and replications (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Optimal equilibrium type and prices over a grid of populations.
    PhaseDiagram(SweepArgs),
    /// Optimal welfare of the benevolent provider, CSMA against TDMA.
    WelfareCurve(SweepArgs),
    /// Optimal profit of the selfish provider, CSMA against TDMA.
    ProfitCurve(SweepArgs),
    /// Utility of use against CSMA throughput for 20 down to 1 online users.
    UtilityCurve {
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte Carlo run at the optimal design of one population.
    Simulate(SimArgs),
    /// Oracle-equivalence suites; exits nonzero on any failure.
    Verify(VerifyArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    /// Experimental baseline: video and email users, p = 2/17, unit billing
    /// period, zero cost for phase diagrams, cost pairs (1, 2) and (15, 30)
    /// for curves.
    Paper,
}

#[derive(Clone, Copy, ValueEnum)]
enum ProviderArg {
    Benevolent,
    Selfish,
}

impl From<ProviderArg> for Provider {
    fn from(p: ProviderArg) -> Self {
        match p {
            ProviderArg::Benevolent => Provider::Benevolent,
            ProviderArg::Selfish => Provider::Selfish,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ProtocolArg {
    Csma,
    Tdma,
    Both,
}

impl ProtocolArg {
    fn macs(self) -> Vec<Mac> {
        match self {
            ProtocolArg::Csma => vec![Mac::Csma],
            ProtocolArg::Tdma => vec![Mac::Tdma],
            ProtocolArg::Both => Mac::BOTH.to_vec(),
        }
    }
}

#[derive(Args)]
struct SweepArgs {
    /// Start from the experimental baseline; other flags override it.
    #[arg(long, value_enum, default_value = "paper")]
    preset: Preset,
    /// Ignored by the curves, which fix the provider by their metric.
    #[arg(long, value_enum)]
    provider: Option<ProviderArg>,
    /// Ignored by the curves, which always compare both protocols.
    #[arg(long, value_enum)]
    protocol: Option<ProtocolArg>,
    /// Video users: `n`, `a:b` or `a:b:step`.
    #[arg(long)]
    n1: Option<CountRange>,
    /// Email users: `a:b` or `a:b:step`.
    #[arg(long = "n2-range")]
    n2_range: Option<CountRange>,
    /// Demand ratio lambda/mu of the video users.
    #[arg(long)]
    demand1: Option<f64>,
    /// Demand ratio lambda/mu of the email users.
    #[arg(long)]
    demand2: Option<f64>,
    /// Fixed cost under CSMA. Given together with --c0-tdma, replaces the
    /// preset cost pairs by a single pair.
    #[arg(long)]
    c0_csma: Option<f64>,
    #[arg(long)]
    c0_tdma: Option<f64>,
    /// Sample every `step` users on both count axes.
    #[arg(long)]
    grid_step: Option<u32>,
    /// Accepted for interface symmetry; sweeps are deterministic.
    #[arg(long)]
    seed: Option<u64>,
    /// CSV destination; a JSON sidecar goes next to it. Defaults to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl SweepArgs {
    fn spec(&self, metric: Option<Metric>) -> Result<SweepSpec> {
        let Preset::Paper = self.preset;
        let provider = metric.map_or(self.provider.map_or(Provider::Benevolent, Into::into), |m| m.provider());
        let mut spec = match metric {
            Some(_) => SweepSpec::baseline_curves(provider),
            None => SweepSpec::baseline_phase(provider, Mac::Csma, [0.1, 0.1]),
        };
        if let (None, Some(p)) = (metric, self.protocol) {
            spec.protocols = p.macs();
        }
        if let Some(n1) = self.n1 {
            spec.n1 = n1;
        }
        if let Some(n2) = self.n2_range {
            spec.n2 = n2;
        }
        if let Some(d) = self.demand1 {
            spec.demand[0] = d;
        }
        if let Some(d) = self.demand2 {
            spec.demand[1] = d;
        }
        match (self.c0_csma, self.c0_tdma) {
            (None, None) => {}
            (csma, tdma) => {
                let base = spec.costs[0];
                spec.costs = vec![CostPair { csma: csma.unwrap_or(base.csma), tdma: tdma.unwrap_or(base.tdma) }];
            }
        }
        if let Some(step) = self.grid_step {
            spec.n1 = spec.n1.with_step(step);
            spec.n2 = spec.n2.with_step(step);
        }
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Args)]
struct SimArgs {
    /// Scenario document (JSON); overrides the population flags.
    #[arg(long)]
    scenario: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "benevolent")]
    provider: ProviderArg,
    #[arg(long, value_enum, default_value = "csma")]
    protocol: ProtocolArg,
    #[arg(long, default_value_t = 3)]
    n1: u32,
    #[arg(long, default_value_t = 3)]
    n2: u32,
    #[arg(long, default_value_t = 1.0)]
    demand1: f64,
    #[arg(long, default_value_t = 1.0)]
    demand2: f64,
    /// Fixed cost; the CSMA or TDMA value is used by protocol.
    #[arg(long, default_value_t = 0.0)]
    c0_csma: f64,
    #[arg(long, default_value_t = 0.0)]
    c0_tdma: f64,
    /// Expected state changes per replication.
    #[arg(long, default_value_t = SIM_EVENTS)]
    events: f64,
    #[arg(long, default_value_t = SIM_REPLICATIONS)]
    replications: usize,
    #[arg(long, default_value_t = verify::SIM_SEED)]
    seed: u64,
    /// Also report the fraction of time spent in each state.
    #[arg(long)]
    record_states: bool,
    /// JSON destination; defaults to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(value_enum, default_value = "all")]
    mode: VerifyArg,
    /// Seed of the simulator and collapse suites.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum VerifyArg {
    Lemmas,
    Solver,
    Simulator,
    Collapse,
    All,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    }
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(command: Command) -> Result<ExitCode> {
    match command {
        Command::PhaseDiagram(args) => {
            let spec = args.spec(None)?;
            let rows = phase_diagram(&spec)?;
            emit(&phase_table(&rows), args.out.as_deref(), "phase-diagram", &spec)?;
        }
        Command::WelfareCurve(args) => sweep_curve(&args, Metric::Welfare)?,
        Command::ProfitCurve(args) => sweep_curve(&args, Metric::Profit)?,
        Command::UtilityCurve { out } => {
            emit(&utility_table(&utility_curve()), out.as_deref(), "utility-curve", &serde_json::json!({}))?;
        }
        Command::Simulate(args) => run_simulation(&args)?,
        Command::Verify(args) => return run_verify(&args),
    }
    Ok(ExitCode::SUCCESS)
}

fn sweep_curve(args: &SweepArgs, metric: Metric) -> Result<()> {
    let spec = args.spec(Some(metric))?;
    let rows = curve(&spec, metric)?;
    let name = format!("{}-curve", metric.name());
    emit(&curve_table(&rows, metric), args.out.as_deref(), &name, &spec)
}

fn emit<T: serde::Serialize>(table: &Table, out: Option<&Path>, experiment: &str, spec: &T) -> Result<()> {
    let csv = table.to_csv()?;
    match out {
        None => print!("{csv}"),
        Some(path) => {
            fs::write(path, csv).with_context(|| format!("writing {}", path.display()))?;
            let side = path.with_extension("json");
            fs::write(&side, sidecar(experiment, spec)?).with_context(|| format!("writing {}", side.display()))?;
        }
    }
    Ok(())
}

fn run_simulation(args: &SimArgs) -> Result<()> {
    let scenario = match &args.scenario {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            Scenario::from_json(&text)?
        }
        None => {
            let mac = match args.protocol {
                ProtocolArg::Csma => Mac::Csma,
                ProtocolArg::Tdma => Mac::Tdma,
                ProtocolArg::Both => bail!("simulate takes a single protocol"),
            };
            let c0 = CostPair { csma: args.c0_csma, tdma: args.c0_tdma }.of(mac);
            let spec = SweepSpec::baseline_phase(args.provider.into(), mac, [args.demand1, args.demand2]);
            spec.scenario(mac, [args.n1, args.n2], c0)
        }
    };
    let design = solve(&scenario, args.provider.into(), &SearchConfig::default())?;
    if !design.operating() {
        bail!("the optimal design shuts the service; nothing to simulate");
    }
    // Dummy-plan users toggle too, so the horizon depends only on the counts.
    let n = CountMatrix::from_rows(scenario.counts().into_iter().map(|c| vec![0, c]).collect())?;
    let horizon = SimConfig::horizon_for_events(&scenario, &n, args.events);
    let mut cfg = SimConfig::new(
        scenario,
        Assignment::Profile { profile: design.profile.clone() },
        design.policy.clone(),
        horizon,
    );
    cfg.seed = args.seed;
    cfg.replications = args.replications;
    cfg.record_states = args.record_states;
    let report = simulate(&cfg)?;
    let doc = serde_json::json!({ "design": design, "config": cfg, "report": report });
    let text = serde_json::to_string_pretty(&doc)? + "\n";
    match &args.out {
        None => print!("{text}"),
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display()))?,
    }
    Ok(())
}

fn run_verify(args: &VerifyArgs) -> Result<ExitCode> {
    let modes: Vec<VerifyMode> = match args.mode {
        VerifyArg::Lemmas => vec![VerifyMode::Lemmas],
        VerifyArg::Solver => vec![VerifyMode::Solver],
        VerifyArg::Simulator => vec![VerifyMode::Simulator],
        VerifyArg::Collapse => vec![VerifyMode::Collapse],
        VerifyArg::All => VerifyMode::ALL.to_vec(),
    };
    let mut ok = true;
    for mode in modes {
        let report = match (mode, args.seed) {
            (VerifyMode::Simulator, Some(seed)) => verify::verify_simulator(SIM_EVENTS, SIM_REPLICATIONS, seed)?,
            (VerifyMode::Collapse, Some(seed)) => verify::verify_collapse(COLLAPSE_POLICIES, seed)?,
            _ => verify::verify(mode)?,
        };
        println!("{report}");
        ok &= report.passed();
    }
    Ok(if ok { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}
