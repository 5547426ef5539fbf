//! Command-line front end: Monte Carlo sweeps, single-trial inspection, and
//! a quick self test.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;

use afdm_sim::afdm::AfdmTransform;
use afdm_sim::baselines::{gabp_detect_known_channel, gabp_estimate_known_data, Scenario};
use afdm_sim::frame::{qpsk_hard_decide, qpsk_map};
use afdm_sim::harness::{
    nmse, rows_to_csv, sweep_with_output, trial_seed, ReceiverKind, SweepSpec,
};
use afdm_sim::noise::{build_shaper, sample_noise};
use afdm_sim::pbigabp::PbigabpEngine;
use afdm_sim::sysconfig::{substream, validate, SystemParams};

/// Environment variable overriding the rayon worker count (0 = default pool).
const WORKERS_ENV: &str = "AFDM_SIM_WORKERS";

#[derive(Parser)]
#[command(
    name = "afdm-sim",
    version,
    about = "Link-level simulator for AFDM over doubly dispersive channels \
             with an oversampled bilinear-GaBP receiver"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte Carlo sweep over SNR and pilot-count grids.
    Sweep(SweepArgs),
    /// Run and dissect a single trial.
    Trial(TrialArgs),
    /// Run fast built-in sanity checks and exit nonzero on failure.
    Selftest,
}

/// System parameters: a JSON config file plus individual overrides. Field
/// names in the file match the override flags.
#[derive(Args)]
struct ParamArgs {
    /// JSON parameter file; missing fields take library defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Subcarrier count N.
    #[arg(long)]
    n: Option<usize>,
    /// Path count minus one.
    #[arg(long)]
    p: Option<usize>,
    /// Maximum delay spread in samples.
    #[arg(long = "ell-max")]
    ell_max: Option<usize>,
    /// Maximum normalised Doppler.
    #[arg(long = "f-max")]
    f_max: Option<f64>,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Receiver iteration cap.
    #[arg(long = "i-max")]
    i_max: Option<usize>,
    /// Symbol-belief damping factor in (0, 1].
    #[arg(long = "beta-x")]
    beta_x: Option<f64>,
    /// Gain-belief damping factor in (0, 1].
    #[arg(long = "beta-h")]
    beta_h: Option<f64>,
    /// Receive-pulse raised-cosine roll-off in [0, 1].
    #[arg(long)]
    rolloff: Option<f64>,
}

impl ParamArgs {
    fn build(&self) -> Result<SystemParams, String> {
        let mut params = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| format!("cannot read {}: {}", path.display(), e))?;
                serde_json::from_str::<SystemParams>(&text)
                    .map_err(|e| format!("bad config {}: {}", path.display(), e))?
            }
            None => SystemParams::default(),
        };
        if let Some(v) = self.n {
            params.n = v;
        }
        if let Some(v) = self.p {
            params.p = v;
        }
        if let Some(v) = self.ell_max {
            params.ell_max = v;
        }
        if let Some(v) = self.f_max {
            params.f_max = v;
        }
        if let Some(v) = self.seed {
            params.seed = v;
        }
        if let Some(v) = self.i_max {
            params.i_max = v;
        }
        if let Some(v) = self.beta_x {
            params.beta_x = v;
        }
        if let Some(v) = self.beta_h {
            params.beta_h = v;
        }
        if let Some(v) = self.rolloff {
            params.rolloff = v;
        }
        Ok(params)
    }
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    params: ParamArgs,
    /// SNR grid in dB.
    #[arg(long = "snr-db", value_delimiter = ',', default_values_t = vec![5.0, 7.5, 10.0, 12.5, 15.0, 17.5, 20.0])]
    snr_db: Vec<f64>,
    /// Pilot-count grid.
    #[arg(long = "pilot-counts", value_delimiter = ',', default_values_t = vec![32])]
    pilot_counts: Vec<usize>,
    /// Oversampling factors to compare (each must divide the largest).
    #[arg(long, value_delimiter = ',', default_values_t = vec![1, 2])]
    oversampling: Vec<usize>,
    /// Monte Carlo frames per sweep point.
    #[arg(long, default_value_t = 500)]
    frames: usize,
    /// Receivers: pbigabp, linear_gabp, genie_detection.
    #[arg(long, value_delimiter = ',', default_values_t = vec![String::from("pbigabp")])]
    receivers: Vec<String>,
    /// CSV output path (stdout when omitted).
    #[arg(long)]
    output: Option<PathBuf>,
    /// Manifest path for resume (defaults to the output path with a
    /// .manifest.json extension).
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Also print the rows as JSON to stdout.
    #[arg(long)]
    json: bool,
    /// Zero the wall_ms column for byte-reproducible output.
    #[arg(long = "no-timing")]
    no_timing: bool,
    /// Rayon worker threads (0 = library default); the AFDM_SIM_WORKERS
    /// environment variable is used when the flag is absent.
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args)]
struct TrialArgs {
    #[command(flatten)]
    params: ParamArgs,
    /// SNR in dB for this trial.
    #[arg(long = "snr-db", default_value_t = 15.0)]
    snr_db: f64,
    /// Sweep-point index used for seed derivation.
    #[arg(long, default_value_t = 0)]
    point: usize,
    /// Frame index used for seed derivation.
    #[arg(long, default_value_t = 0)]
    frame: usize,
    /// Print per-iteration diagnostics.
    #[arg(long)]
    trace: bool,
    /// Print the sampled path table.
    #[arg(long = "dump-paths")]
    dump_paths: bool,
}

fn parse_receivers(names: &[String]) -> Result<Vec<ReceiverKind>, String> {
    names.iter().map(|s| s.parse::<ReceiverKind>()).collect()
}

fn checked_params(params: SystemParams) -> Result<SystemParams, String> {
    let report = validate(&params);
    if report.pass() {
        Ok(params)
    } else {
        Err(format!("invalid parameters:\n  {}", report.violations().join("\n  ")))
    }
}

fn run_sweep(args: &SweepArgs) -> Result<(), String> {
    let base = checked_params(args.params.build()?)?;
    let receivers = parse_receivers(&args.receivers)?;
    let workers = match args.workers {
        Some(w) => w,
        None => std::env::var(WORKERS_ENV)
            .ok()
            .map(|v| v.parse::<usize>().map_err(|e| format!("bad {}: {}", WORKERS_ENV, e)))
            .transpose()?
            .unwrap_or(0),
    };
    let spec = SweepSpec {
        base,
        snr_db: args.snr_db.clone(),
        pilot_counts: args.pilot_counts.clone(),
        oversampling_factors: args.oversampling.clone(),
        frames_per_point: args.frames,
        receivers,
        workers,
        include_timing: !args.no_timing,
    };
    spec.validate()?;
    let manifest = args
        .manifest
        .clone()
        .or_else(|| args.output.as_ref().map(|p| p.with_extension("manifest.json")));
    let rows = sweep_with_output(&spec, args.output.as_deref(), manifest.as_deref())
        .map_err(|e| format!("sweep failed: {}", e))?;
    if args.json {
        println!("{}", serde_json::to_string_pretty(&rows).unwrap());
    } else if args.output.is_none() {
        print!("{}", rows_to_csv(&rows));
    } else {
        eprintln!(
            "wrote {} rows to {}",
            rows.len(),
            args.output.as_ref().unwrap().display()
        );
    }
    Ok(())
}

fn run_trial_cmd(args: &TrialArgs) -> Result<(), String> {
    let base = checked_params(args.params.build()?.with_snr_db(args.snr_db))?;
    let mut params = base.clone();
    params.seed = trial_seed(base.seed, args.point, args.frame);
    let scenario = Scenario::draw(&params);
    if args.dump_paths {
        println!("path  delay  doppler      gain");
        for (p, rec) in scenario.paths.to_records().iter().enumerate() {
            println!(
                "{:>4}  {:>5}  {:>8.5}  {:+.5}{:+.5}j",
                p, rec.delay, rec.doppler, rec.gain_re, rec.gain_im
            );
        }
    }
    let mut engine = PbigabpEngine::new(&scenario.dict, &scenario.frame, &scenario.params);
    let output = engine
        .run_traced(&scenario.y, Some(&scenario.frame.data_bits))
        .map_err(|e| format!("receiver aborted: {}", e))?;
    if args.trace {
        println!("iter  mean_var_x    mean_var_h    ber");
        for d in &output.diagnostics {
            println!(
                "{:>4}  {:.6e}  {:.6e}  {}",
                d.iteration,
                d.mean_var_x,
                d.mean_var_h,
                d.ber.map(|b| format!("{:.6}", b)).unwrap_or_default()
            );
        }
    }
    let errs = output
        .data_bits()
        .iter()
        .zip(&scenario.frame.data_bits)
        .filter(|(a, b)| a != b)
        .count();
    let nm = nmse(&output.h_est, &scenario.paths.gains);
    println!(
        "trial point={} frame={} seed={}: iterations={} bit_errors={}/{} ber={:.6} nmse={:.3} dB",
        args.point,
        args.frame,
        params.seed,
        output.iterations,
        errs,
        scenario.frame.data_bits.len(),
        errs as f64 / scenario.frame.data_bits.len() as f64,
        10.0 * nm.log10()
    );
    if args.dump_paths {
        println!("estimated gains:");
        for (p, h) in output.h_est.iter().enumerate() {
            println!("{:>4}  {:+.5}{:+.5}j", p, h.re, h.im);
        }
    }
    Ok(())
}

fn run_selftest() -> Result<(), String> {
    let mut failures = 0usize;
    let mut check = |name: &str, pass: bool| {
        println!("{}  {}", if pass { "PASS" } else { "FAIL" }, name);
        if !pass {
            failures += 1;
        }
    };

    // Transform round trip at a non-trivial size.
    {
        let params = SystemParams::default();
        let transform = AfdmTransform::from_params(&params);
        let mut rng = substream(1, &[0x99]);
        let x: Vec<Complex64> = (0..params.n)
            .map(|_| {
                use rand::Rng;
                Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
            })
            .collect();
        let back = transform.demodulate(&transform.modulate(&x));
        let err = x
            .iter()
            .zip(&back)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0f64, f64::max);
        check("daft round trip (N = 128)", err < 1e-12);
    }

    // QPSK mapping round trip.
    {
        let bits: Vec<u8> = (0..64).map(|i| ((i * 7) % 3 == 0) as u8).collect();
        let syms = qpsk_map(&bits, (0.5f64).sqrt());
        check("qpsk map/decide round trip", qpsk_hard_decide(&syms) == bits);
    }

    // Shaped-noise covariance at G = 2 (quick Monte Carlo).
    {
        let shaper = build_shaper(2, 2.0, 0.25);
        let mut rng = substream(2, &[0x77]);
        let trials = 20_000usize;
        let mut c00 = 0.0;
        let mut c01 = Complex64::new(0.0, 0.0);
        for _ in 0..trials {
            let block = sample_noise(&shaper, 1, &mut rng);
            let w0 = block.streams[0][0];
            let w1 = block.streams[1][0];
            c00 += w0.norm_sqr();
            c01 += w0 * w1.conj();
        }
        c00 /= trials as f64;
        c01 /= trials as f64;
        let target = shaper.covariance(0, 1);
        let ok = (c00 - 1.0).abs() < 0.05 && (c01.re - target).abs() < 0.05 && c01.im.abs() < 0.05;
        check("oversampled noise covariance (G = 2)", ok);
    }

    // End-to-end noiseless recovery on a small system.
    {
        let mut params = SystemParams::default().with_snr_db(45.0);
        params.n = 32;
        params.n_p = 12;
        params.p = 2;
        params.ell_max = 6;
        params.seed = 3;
        let scenario = Scenario::draw(&params);
        let mut engine = PbigabpEngine::new(&scenario.dict, &scenario.frame, &scenario.params);
        let ok = match engine.run(&scenario.y) {
            Ok(out) => {
                let errs = out
                    .data_bits()
                    .iter()
                    .zip(&scenario.frame.data_bits)
                    .filter(|(a, b)| a != b)
                    .count();
                errs == 0 && nmse(&out.h_est, &scenario.paths.gains) < 1e-2
            }
            Err(_) => false,
        };
        check("joint receiver solves a clean small trial", ok);
    }

    // Genie bounds behave.
    {
        let mut params = SystemParams::default().with_snr_db(30.0);
        params.n = 32;
        params.n_p = 12;
        params.p = 2;
        params.ell_max = 6;
        params.seed = 4;
        let scenario = Scenario::draw(&params);
        let det = gabp_detect_known_channel(&scenario);
        let est = gabp_estimate_known_data(&scenario);
        let ok = match (det, est) {
            (Ok(d), Ok(e)) => {
                let errs = d
                    .data_bits()
                    .iter()
                    .zip(&scenario.frame.data_bits)
                    .filter(|(a, b)| a != b)
                    .count();
                errs == 0 && nmse(&e.h_est, &scenario.paths.gains) < 1e-2
            }
            _ => false,
        };
        check("genie-aided bounds on a clean small trial", ok);
    }

    if failures == 0 {
        println!("selftest: all checks passed");
        Ok(())
    } else {
        Err(format!("selftest: {} check(s) failed", failures))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Sweep(args) => run_sweep(args),
        Command::Trial(args) => run_trial_cmd(args),
        Command::Selftest => run_selftest(),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(msg) => {
            eprintln!("error: {}", msg);
            ExitCode::FAILURE
        }
    }
}
