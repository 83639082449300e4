//! Command-line interface: single-point rate evaluation, parameter sweeps
//! with CSV/SVG output, and a quick invariant self-test.
//!
//! Exit codes: 0 on success, 2 on validation/config errors, 3 on numerical
//! failures.

use clap::{Args, Parser, Subcommand};
use hdrelay_core::error::Error;
use hdrelay_core::model::{Combining, KnowledgeMode};
use hdrelay_core::protocols::{optimize_point, ProtocolKind};
use hdrelay_core::sweep::{emit_outputs, load_config, run_sweep, SweepKind, SweepSpec};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "hdrelay",
    about = "Achievable rates and capacity bounds for Gaussian half-duplex relay networks",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Optimize one protocol at a single network configuration.
    Rate {
        /// Protocol: single-hop, df, df-no-reuse, pdf, cf, combined, cutset.
        protocol: String,
        #[command(flatten)]
        point: PointArgs,
    },
    /// Run a sweep and write CSV (and optionally an SVG plot).
    Sweep {
        /// Sweep kind: two-relay-distance, single-relay-distance,
        /// relay-count, path-loss, single-point.
        kind: String,
        /// Config file (flat `key = value` lines).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory for sweep.csv / sweep.svg.
        #[arg(long)]
        out: PathBuf,
        /// Also write a vector-graphics plot.
        #[arg(long)]
        plot: bool,
    },
    /// Run the built-in invariant checks.
    Selftest,
}

#[derive(Args)]
struct PointArgs {
    /// Config file supplying defaults for this point.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Relay position parameter (may be negative).
    #[arg(long, allow_negative_numbers = true)]
    r: Option<f64>,
    /// Source-to-destination SNR in dB.
    #[arg(long = "snr-db", allow_negative_numbers = true)]
    snr_db: Option<f64>,
    /// Path loss exponent.
    #[arg(long)]
    theta: Option<f64>,
    /// Number of relays (0, 1, or 2 for distance-parameterized points).
    #[arg(long = "n-relays")]
    n_relays: Option<usize>,
    /// fixed | random
    #[arg(long)]
    schedule: Option<String>,
    /// coherent | noncoherent
    #[arg(long)]
    combining: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Objective evaluation budget.
    #[arg(long)]
    budget: Option<usize>,
    /// Scale the single-hop source power by N+1.
    #[arg(long = "normalize-power")]
    normalize_power: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            match err {
                Error::Numerical(_) | Error::Io(_) => ExitCode::from(3),
                _ => ExitCode::from(2),
            }
        }
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Rate { protocol, point } => rate_command(&protocol, point),
        Command::Sweep {
            kind,
            config,
            out,
            plot,
        } => {
            let kind = SweepKind::parse(&kind)?;
            let spec = match config {
                Some(path) => load_config(&path, Some(kind))?,
                None => SweepSpec::defaults(kind),
            };
            let spec = SweepSpec { kind, ..spec };
            let table = run_sweep(&spec)?;
            let written = emit_outputs(&table, &out, plot)?;
            for path in written {
                println!("wrote {}", path.display());
            }
            Ok(())
        }
        Command::Selftest => selftest(),
    }
}

fn rate_command(protocol: &str, args: PointArgs) -> Result<(), Error> {
    let kind = ProtocolKind::parse(protocol)?;
    let mut spec = match &args.config {
        Some(path) => load_config(path, Some(SweepKind::SinglePoint))?,
        None => SweepSpec::defaults(SweepKind::SinglePoint),
    };
    spec.kind = SweepKind::SinglePoint;
    if let Some(r) = args.r {
        spec.r = r;
    }
    if let Some(snr) = args.snr_db {
        spec.snr_db = snr;
    }
    if let Some(theta) = args.theta {
        spec.theta = theta;
    }
    if let Some(n) = args.n_relays {
        spec.n_relays = n;
    }
    if let Some(s) = &args.schedule {
        spec.schedule = match s.as_str() {
            "fixed" => KnowledgeMode::FixedSchedule,
            "random" => KnowledgeMode::RandomAccess,
            other => {
                return Err(Error::Domain(format!(
                    "schedule '{other}' is not one of fixed, random"
                )))
            }
        };
    }
    if let Some(c) = &args.combining {
        spec.combining = match c.as_str() {
            "coherent" => Combining::Coherent,
            "noncoherent" => Combining::NonCoherent,
            other => {
                return Err(Error::Domain(format!(
                    "combining '{other}' is not one of coherent, noncoherent"
                )))
            }
        };
    }
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    if let Some(budget) = args.budget {
        spec.budget = budget;
    }
    if args.normalize_power {
        spec.normalize_power = true;
    }
    spec.validate()?;

    let network = spec.network_at(spec.r);
    let schedule = if kind.supports_random_schedule() {
        spec.schedule
    } else {
        if spec.schedule == KnowledgeMode::RandomAccess {
            return Err(Error::Domain(format!(
                "protocol '{}' supports only fixed schedules",
                kind.name()
            )));
        }
        KnowledgeMode::FixedSchedule
    };
    let result = optimize_point(
        &network,
        kind,
        schedule,
        spec.budget,
        spec.seed,
        spec.normalize_power && kind == ProtocolKind::SingleHop,
    )?;
    println!(
        "protocol={} schedule={} combining={} r={:.5} n={} theta={:.5} snr_db={:.5}",
        kind.name(),
        match schedule {
            KnowledgeMode::FixedSchedule => "fixed",
            KnowledgeMode::RandomAccess => "random",
        },
        match spec.combining {
            Combining::Coherent => "coherent",
            Combining::NonCoherent => "noncoherent",
        },
        spec.r,
        network.num_relays,
        network.path_loss_exponent,
        spec.snr_db
    );
    println!("rate_bpcu={:.5}", result.rate);
    println!("binding={}", result.binding);
    println!("evals={}", result.evals);
    Ok(())
}

fn selftest() -> Result<(), Error> {
    use hdrelay_core::cutset::{cutset_bound, CorrelationSpec};
    use hdrelay_core::df::df_rate;
    use hdrelay_core::entropy::{gaussian_entropy, mixture_entropy, MixtureSpec};
    use hdrelay_core::model::{
        build_gains, capacity, line_network, PowerAllocation, StateDistribution,
    };

    let mut failures = 0usize;
    let mut check = |name: &str, ok: bool| {
        println!("{} {name}", if ok { "PASS" } else { "FAIL" });
        if !ok {
            failures += 1;
        }
    };

    // Gains decrease with distance.
    let near = line_network(&[0.4], 4.0, 10.0, Combining::NonCoherent, 1e-3);
    let far = line_network(&[0.8], 4.0, 10.0, Combining::NonCoherent, 1e-3);
    let g_near = build_gains(&near)?[0][1];
    let g_far = build_gains(&far)?[0][1];
    check("gain monotone in distance", g_near > g_far);

    // Mixture entropy of a single component matches the closed form.
    let h = mixture_entropy(&MixtureSpec::new(vec![(1.0, 2.0)])?)?;
    check(
        "entropy closed form",
        (h - gaussian_entropy(2.0)).abs() < 1e-9,
    );

    // Entropy sandwich for a genuine mixture.
    let mix = MixtureSpec::new(vec![(0.5, 1.0), (0.5, 4.0)])?;
    let hm = mixture_entropy(&mix)?;
    let lower = 0.5 * gaussian_entropy(1.0) + 0.5 * gaussian_entropy(4.0);
    let upper = gaussian_entropy(2.5);
    check("entropy sandwich", hm > lower && hm < upper);

    // Direct-link rate at 10 dB.
    let cfg = line_network(&[], 4.0, 10.0, Combining::NonCoherent, 1e-3);
    let mut alloc = PowerAllocation::zeros(0);
    alloc.set_nu(0, 0, 1, 1.0);
    let dist = StateDistribution::new(vec![0.0, 1.0], KnowledgeMode::FixedSchedule)?;
    let rb = df_rate(&cfg, &alloc, &dist, 1)?;
    check("single-hop rate", (rb.total - capacity(10.0)).abs() < 1e-9);

    // Cut-set bound dominates decode-and-forward at a sample point.
    let cfg = line_network(&[0.4], 4.0, 10.0, Combining::NonCoherent, 1e-3);
    let df = optimize_point(
        &cfg,
        ProtocolKind::Df,
        KnowledgeMode::FixedSchedule,
        600,
        1,
        false,
    )?;
    let mut w = vec![0.0; 4];
    w[0b01] = 0.5;
    w[0b11] = 0.5;
    let sched = StateDistribution::from_weights(&w, KnowledgeMode::FixedSchedule)?;
    let (bound, _) = cutset_bound(&cfg, &sched, &CorrelationSpec::independent(1))?;
    let bound = bound.max(
        optimize_point(
            &cfg,
            ProtocolKind::CutSet,
            KnowledgeMode::FixedSchedule,
            600,
            1,
            false,
        )?
        .rate,
    );
    check("cut-set dominates df", bound >= df.rate - 1e-9);

    // Optimizer determinism.
    let a = optimize_point(
        &cfg,
        ProtocolKind::Df,
        KnowledgeMode::FixedSchedule,
        300,
        9,
        false,
    )?;
    let b = optimize_point(
        &cfg,
        ProtocolKind::Df,
        KnowledgeMode::FixedSchedule,
        300,
        9,
        false,
    )?;
    check(
        "optimizer determinism",
        a.rate.to_bits() == b.rate.to_bits(),
    );

    if failures > 0 {
        Err(Error::Numerical(format!(
            "{failures} selftest checks failed"
        )))
    } else {
        println!("all selftest checks passed");
        Ok(())
    }
}
