//! Command-line front end. Exit codes: 0 verified or converged, 1 ran but
//! falsified or diverged, 2 usage or input error.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;
use serde_json::json;

use crate::activation::Activation;
use crate::calculus::ProbeOptions;
use crate::conv::{conv_matrix, conv_rank_expected, ConvMode, ConvSpec};
use crate::counterexamples::{
    build_cnn_same_valley, build_sd_minimum, build_ss_valley, probe_cnn_same_valley, verify_sd_minimum,
    verify_ss_valley, SS_COMPLIANT_Y, SS_EXPERIMENT_Y,
};
use crate::error::{Error, Result};
use crate::io::{read_net_spec, write_json, write_net_spec, RunManifest};
use crate::landscape::{
    block_least_squares_optimum, full_rank_trial, property_p_path_cond1, property_p_path_cond3, PathTrace,
};
use crate::linalg::{numerical_rank, pinv, RANK_TOL};
use crate::net::{decompose_mask, mask_from_rows, node_label, prune_useless, useless_connection_demo_net, SparseNet};
use crate::trainer::{
    gd_train, gen_synthetic, linear_regression_optimum, random_effective_net, run_ss_trials, seed_from_env, Init,
    LossKind, StopReason, TrainConfig, TrialClass,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FALSIFIED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "sparse-landscape", version, about = "Loss-landscape checks for sparse neural networks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone)]
pub struct Common {
    /// Seed; falls back to the SEED environment variable, then 0.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Directory for reports, traces and the run manifest.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Print the JSON report instead of text.
    #[arg(long, global = true)]
    pub json: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Instance {
    SdMinimum,
    SsValley,
    CnnSameValley,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LossArg {
    Mse,
    HalfSse,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check one of the built-in counterexample instances.
    Verify {
        instance: Instance,
        /// Activation for ss-valley.
        #[arg(long, default_value = "tanh")]
        activation: String,
        /// y1,y2,y3,y4 for ss-valley.
        #[arg(long, value_delimiter = ',')]
        values: Option<Vec<f64>>,
        #[arg(long, default_value_t = 500)]
        probes: usize,
        #[arg(long, default_value_t = 1e-2)]
        radius: f64,
        #[command(flatten)]
        common: Common,
    },
    /// Gradient descent on a network spec (or a random sparse deep net) with
    /// synthetic data; writes trace.csv.
    Train {
        /// JSON network spec; without it a random sparse net is built.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', default_value = "20,100,100,100,100,1")]
        widths: Vec<usize>,
        /// Sparsity of every layer but the last for the random net.
        #[arg(long, default_value_t = 0.4)]
        sparsity: f64,
        #[arg(long, default_value = "linear")]
        activation: String,
        #[arg(long, default_value_t = 100)]
        n: usize,
        #[arg(long, default_value_t = 5.0)]
        a_norm: f64,
        #[arg(long, default_value_t = 1.0)]
        noise: f64,
        #[arg(long, default_value_t = 0.01)]
        lr: f64,
        #[arg(long, default_value_t = 50_000)]
        epochs: usize,
        #[arg(long, value_enum, default_value = "mse")]
        loss: LossArg,
        /// Multiply the default initialization by this factor.
        #[arg(long)]
        scale_init: Option<f64>,
        #[arg(long, default_value_t = 500)]
        rank_every: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Repeated training on the sparse-sparse valley instance.
    Trials {
        #[arg(long, default_value_t = 100)]
        n: usize,
        #[arg(long, default_value = "tanh")]
        activation: String,
        #[arg(long, value_delimiter = ',')]
        values: Option<Vec<f64>>,
        #[arg(long, default_value_t = 0.01)]
        lr: f64,
        #[arg(long, default_value_t = 50_000)]
        epochs: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Non-increasing path to the global minimum on a random instance.
    Path {
        /// 1: p_i ≥ d_i, 3: scalar output.
        #[arg(long, value_parser = ["1", "3"])]
        cond: String,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        /// Extra neurons per group beyond d_i (condition 1).
        #[arg(long, default_value_t = 1)]
        extra: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Remove useless connections from a spec (or the built-in demo net).
    Prune {
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long, default_value = "tanh")]
        activation: String,
        #[command(flatten)]
        common: Common,
    },
    /// Full-rank frequency of a random hidden layer with p = n.
    Rank {
        #[arg(long, default_value = "sigmoid")]
        activation: String,
        #[arg(long, default_value_t = 8)]
        n: usize,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 4)]
        dx: usize,
        #[arg(long, default_value_t = 0.3)]
        sparsity: f64,
        #[command(flatten)]
        common: Common,
    },
    /// Closed-form versus numerical rank of a 1-D convolution matrix.
    ConvRank {
        #[arg(long)]
        mode: ConvMode,
        #[arg(long)]
        d: usize,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        kernel: Vec<f64>,
        #[command(flatten)]
        common: Common,
    },
}

fn usage(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

fn activation(name: &str) -> Result<Activation> {
    Activation::from_name(name).ok_or_else(|| usage(format!("unknown activation {name:?}")))
}

fn ss_values(values: &Option<Vec<f64>>, default: [f64; 4]) -> Result<[f64; 4]> {
    match values {
        None => Ok(default),
        Some(v) => v
            .as_slice()
            .try_into()
            .map_err(|_| usage(format!("--values needs 4 numbers, got {}", v.len()))),
    }
}

struct Ctx<'a> {
    out: &'a mut dyn Write,
    common: Common,
    seed: u64,
    argv: Vec<String>,
    command: &'static str,
}

impl Ctx<'_> {
    // Text for humans or the JSON report, then the files under --out.
    fn finish<T: Serialize>(
        &mut self,
        report: &T,
        text: &str,
        config: serde_json::Value,
        files: Vec<(String, Vec<u8>)>,
        result: serde_json::Value,
    ) -> Result<()> {
        if self.common.json {
            writeln!(self.out, "{}", serde_json::to_string_pretty(report)?)?;
        } else {
            write!(self.out, "{text}")?;
        }
        if let Some(dir) = &self.common.out {
            fs::create_dir_all(dir)?;
            let mut manifest = RunManifest::new(self.command, self.argv.clone(), config, self.seed);
            let report_path = dir.join("report.json");
            write_json(&report_path, report)?;
            manifest.outputs.push(report_path);
            for (name, bytes) in files {
                let p = dir.join(name);
                fs::write(&p, bytes)?;
                manifest.outputs.push(p);
            }
            manifest.result = result;
            manifest.write(dir)?;
        }
        Ok(())
    }
}

/// Parses `args` (program name first) and runs the command, writing
/// human-readable output to `out`. Returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let mut argv: Vec<String> = args.iter().skip(1).map(|a| a.to_string_lossy().into_owned()).collect();
    match dispatch(cli.command, &mut argv, out) {
        Ok(code) => code,
        Err(e @ (Error::InvalidArgument(_) | Error::InvalidSpec(_) | Error::Io(_) | Error::Json(_))) => {
            eprintln!("error: {e}");
            EXIT_USAGE
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_FALSIFIED
        }
    }
}

fn common_of(cmd: &Command) -> Common {
    match cmd {
        Command::Verify { common, .. }
        | Command::Train { common, .. }
        | Command::Trials { common, .. }
        | Command::Path { common, .. }
        | Command::Prune { common, .. }
        | Command::Rank { common, .. }
        | Command::ConvRank { common, .. } => common.clone(),
    }
}

fn dispatch(cmd: Command, argv: &mut Vec<String>, out: &mut dyn Write) -> Result<i32> {
    let common = common_of(&cmd);
    let seed = common.seed.unwrap_or_else(|| seed_from_env(0));
    if common.seed.is_none() {
        argv.extend(["--seed".to_string(), seed.to_string()]);
    }
    let name = match &cmd {
        Command::Verify { .. } => "verify",
        Command::Train { .. } => "train",
        Command::Trials { .. } => "trials",
        Command::Path { .. } => "path",
        Command::Prune { .. } => "prune",
        Command::Rank { .. } => "rank",
        Command::ConvRank { .. } => "conv-rank",
    };
    let mut ctx = Ctx {
        out,
        common,
        seed,
        argv: argv.clone(),
        command: name,
    };
    match cmd {
        Command::Verify {
            instance,
            activation: act,
            values,
            probes,
            radius,
            ..
        } => verify(&mut ctx, instance, &act, &values, probes, radius),
        Command::Train {
            spec,
            widths,
            sparsity,
            activation: act,
            n,
            a_norm,
            noise,
            lr,
            epochs,
            loss,
            scale_init,
            rank_every,
            ..
        } => {
            let config = TrainConfig {
                learning_rate: lr,
                max_epochs: epochs,
                seed,
                init: scale_init.map_or(Init::DefaultUniformFanin, |m| Init::Scaled { multiplier: m }),
                loss: match loss {
                    LossArg::Mse => LossKind::Mse,
                    LossArg::HalfSse => LossKind::HalfSse,
                },
                rank_every,
                ..TrainConfig::default()
            };
            train(&mut ctx, spec.as_deref(), &widths, sparsity, &act, n, a_norm, noise, config)
        }
        Command::Trials {
            n,
            activation: act,
            values,
            lr,
            epochs,
            ..
        } => trials(&mut ctx, n, &act, &values, lr, epochs),
        Command::Path { cond, samples, extra, .. } => path(&mut ctx, &cond, samples, extra),
        Command::Prune { spec, activation: act, .. } => prune(&mut ctx, spec.as_deref(), &act),
        Command::Rank {
            activation: act,
            n,
            trials,
            dx,
            sparsity,
            ..
        } => rank(&mut ctx, &act, n, trials, dx, sparsity),
        Command::ConvRank { mode, d, kernel, .. } => conv_rank(&mut ctx, mode, d, kernel),
    }
}

fn verdict(ok: bool) -> i32 {
    if ok {
        EXIT_OK
    } else {
        EXIT_FALSIFIED
    }
}

fn verify(ctx: &mut Ctx, instance: Instance, act: &str, values: &Option<Vec<f64>>, probes: usize, radius: f64) -> Result<i32> {
    // verdicts are always JSON
    ctx.common.json = true;
    let config = json!({"instance": format!("{instance:?}"), "activation": act, "values": values, "probes": probes, "radius": radius});
    match instance {
        Instance::SdMinimum => {
            let inst = build_sd_minimum()?;
            let opts = ProbeOptions {
                n_probes: probes,
                probe_radius: radius,
                seed: ctx.seed,
                ..ProbeOptions::default()
            };
            let v = verify_sd_minimum(&inst, &opts)?;
            let text = format!(
                "loss {:.12} (better point {:.7})\ngrad_zero {}\nhessian_psd {}\nhessian_matches {} (max err {:.1e})\neigs_match {} {:?}\nstrict_probe_pass {} ({:?})\nbetter_point_exists {}\n",
                v.loss,
                v.better_loss,
                v.grad_zero,
                v.hessian_psd,
                v.hessian_matches,
                v.hessian_max_error,
                v.eigs_match,
                v.report.eigenvalues.iter().map(|e| (e * 1e4).round() / 1e4).collect::<Vec<_>>(),
                v.strict_probe_pass,
                v.report.min_probe,
                v.better_point_exists
            );
            let ok = v.all_pass();
            ctx.finish(&v, &text, config, vec![], json!({"all_pass": ok}))?;
            Ok(verdict(ok))
        }
        Instance::SsValley => {
            let inst = build_ss_valley(ss_values(values, SS_COMPLIANT_Y)?, activation(act)?)?;
            let v = verify_ss_valley(&inst, probes, radius, ctx.seed);
            let text = format!(
                "valley loss {:.12} (level {})\nescape loss {:.12}\nrows_fit_exactly {}\nvalley_at_level {}\nescape_matches {}\nescape_below_valley {}\nconstraints_hold {} {:?}\nprobe falsifications {} / {}, strictness failures {}\n",
                v.valley_loss,
                inst.valley_level(),
                v.escape_loss,
                v.rows_fit_exactly,
                v.valley_at_level,
                v.escape_matches,
                v.escape_below_valley,
                v.constraints_hold,
                inst.constraints,
                v.probe.falsifications,
                v.probe.n_perturb,
                v.probe.strictness_failures
            );
            let ok = v.all_pass();
            ctx.finish(&v, &text, config, vec![], json!({"all_pass": ok}))?;
            Ok(verdict(ok))
        }
        Instance::CnnSameValley => {
            let valley = build_cnn_same_valley();
            let reports: Vec<_> = [0.5, 1.0, 2.0]
                .iter()
                .map(|&a| probe_cnn_same_valley(&valley, a, probes, ctx.seed))
                .collect();
            let (u, w) = valley.global_witness();
            let witness = valley.loss(&u, w);
            let ok = reports.iter().all(|r| r.valley_loss == 0.5 && r.falsifications == 0) && witness < 1e-20;
            let mut text = String::new();
            for r in &reports {
                text += &format!(
                    "a = {}: valley loss {}, min perturbed {:.12}, falsifications {}\n",
                    r.a, r.valley_loss, r.min_loss, r.falsifications
                );
            }
            text += &format!("global witness loss {witness:e}\n");
            let report = json!({"valleys": reports, "witness_loss": witness, "all_pass": ok});
            ctx.finish(&report, &text, config, vec![], json!({"all_pass": ok}))?;
            Ok(verdict(ok))
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn train(
    ctx: &mut Ctx,
    spec: Option<&Path>,
    widths: &[usize],
    sparsity: f64,
    act: &str,
    n: usize,
    a_norm: f64,
    noise: f64,
    config: TrainConfig,
) -> Result<i32> {
    config.validate()?;
    let net: SparseNet = match spec {
        Some(p) => read_net_spec(p)?,
        None => {
            if widths.len() < 3 {
                return Err(usage("--widths needs at least three entries"));
            }
            let mut sp = vec![sparsity; widths.len() - 1];
            *sp.last_mut().expect("non-empty") = 0.0;
            random_effective_net(widths, &sp, activation(act)?, ctx.seed, 100)?.0
        }
    };
    let data = gen_synthetic(n, net.in_dim(), net.out_dim(), ctx.seed, a_norm, noise)?;
    let trace = gd_train(&net, &data, &config)?;
    let optimum = (net.activation == Activation::Linear).then(|| linear_regression_optimum(&data, config.loss));
    let mut text = format!(
        "realized sparsity {:.4}\nstop {:?} after {} epochs\nfinal loss {:.10}\n",
        net.sparsity(),
        trace.stop,
        trace.epochs,
        trace.final_loss
    );
    if let Some(o) = optimum {
        text += &format!("least-squares optimum {o:.10}\ngap {:.3e}\n", trace.final_loss - o);
    }
    let mut csv = Vec::new();
    trace.write_csv(&mut csv)?;
    let mut files = vec![("trace.csv".to_string(), csv)];
    if ctx.common.out.is_some() {
        let tmp = tempfile_spec(&trace.final_net(&net)?)?;
        files.push(("final_net.json".to_string(), tmp));
    }
    let report = json!({
        "stop": trace.stop,
        "epochs": trace.epochs,
        "final_loss": trace.final_loss,
        "optimum": optimum,
        "gap": optimum.map(|o| trace.final_loss - o),
        "realized_sparsity": net.sparsity(),
        "monotone_violation": trace.monotone_violation(),
    });
    let cfg = json!({"train": config, "data": {"n": n, "a_norm": a_norm, "noise": noise}, "spec": spec, "widths": widths, "sparsity": sparsity, "activation": act});
    ctx.finish(&report, &text, cfg, files, json!({"stop": trace.stop}))?;
    Ok(verdict(trace.stop != StopReason::Diverged))
}

fn tempfile_spec(net: &SparseNet) -> Result<Vec<u8>> {
    let mut text = serde_json::to_vec_pretty(&crate::io::NetSpec::from_net(net))?;
    text.push(b'\n');
    Ok(text)
}

fn trials(ctx: &mut Ctx, n: usize, act: &str, values: &Option<Vec<f64>>, lr: f64, epochs: usize) -> Result<i32> {
    let y = ss_values(values, SS_EXPERIMENT_Y)?;
    let config = TrainConfig {
        learning_rate: lr,
        max_epochs: epochs,
        seed: ctx.seed,
        ..TrainConfig::default()
    };
    let stats = run_ss_trials(activation(act)?, y, n, &config)?;
    let mut text = format!(
        "{act}: valley {} / escaped {} / other {} of {}\n",
        stats.count(TrialClass::Valley),
        stats.count(TrialClass::Escaped),
        stats.count(TrialClass::Other),
        stats.n_trials
    );
    for c in &stats.clusters {
        text += &format!("  {:<8} loss {:>12.6}  x{}\n", format!("{:?}", c.classification).to_lowercase(), c.center_loss, c.count);
    }
    let cfg = json!({"n": n, "activation": act, "values": y, "train": config});
    ctx.finish(&stats, &text, cfg, vec![], json!({"clusters": stats.clusters.len()}))?;
    Ok(EXIT_OK)
}

fn gauss(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.sample(StandardNormal))
}

fn path(ctx: &mut Ctx, cond: &str, samples: usize, extra: usize) -> Result<i32> {
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
    let (trace, optimum): (PathTrace, f64) = if cond == "1" {
        // two disjoint groups over five inputs
        let (p1, p2) = (2 + extra, 3 + extra);
        let mut rows = vec![vec![1u8, 1, 0, 0, 0]; p1];
        rows.extend(vec![vec![0u8, 0, 1, 1, 1]; p2]);
        let mask = mask_from_rows(&rows);
        let x = gauss(&mut rng, 5, 12);
        let y = gauss(&mut rng, 3, 12);
        let decomp = decompose_mask(&mask, &x)?;
        let w = gauss(&mut rng, p1 + p2, 5).zip_map(&mask, |v, m| if m { v } else { 0.0 });
        let u = gauss(&mut rng, 3, p1 + p2);
        (property_p_path_cond1(&decomp, &u, &w, &y, samples)?, block_least_squares_optimum(&decomp, &y))
    } else {
        let mask = mask_from_rows(&[vec![1, 1, 0, 0], vec![0, 1, 1, 0], vec![0, 0, 1, 1]]);
        let x = gauss(&mut rng, 4, 12);
        let y = gauss(&mut rng, 1, 12);
        let decomp = decompose_mask(&mask, &x)?;
        let w = gauss(&mut rng, 3, 4).zip_map(&mask, |v, m| if m { v } else { 0.0 });
        let mut u = gauss(&mut rng, 1, 3);
        u[(0, 0)] = 0.0;
        let n = x.ncols();
        let opt = 0.5 * (&y * (DMatrix::identity(n, n) - pinv(&x) * &x)).norm_squared();
        (property_p_path_cond3(&decomp, &u, &w, &y, samples)?, opt)
    };
    let ok = trace.monotone_violation <= 1e-10 && (trace.end_loss - optimum).abs() <= 1e-8;
    let mut text = format!(
        "start loss {:.10}\nend loss {:.10}\noptimum {:.10}\nmonotone violation {:.3e}\n",
        trace.samples[0].loss, trace.end_loss, optimum, trace.monotone_violation
    );
    for s in &trace.segments {
        text += &format!("  [{:.3}, {:.3}] {}\n", s.t_start, s.t_end, s.name);
    }
    let mut csv = Vec::new();
    trace.write_csv(&mut csv)?;
    let report = json!({"end_loss": trace.end_loss, "optimum": optimum, "monotone_violation": trace.monotone_violation, "segments": trace.segments, "ok": ok});
    let cfg = json!({"cond": cond, "samples": samples, "extra": extra});
    ctx.finish(&report, &text, cfg, vec![("path.csv".to_string(), csv)], json!({"ok": ok}))?;
    Ok(verdict(ok))
}

fn prune(ctx: &mut Ctx, spec: Option<&Path>, act: &str) -> Result<i32> {
    let net = match spec {
        Some(p) => read_net_spec(p)?,
        None => useless_connection_demo_net(activation(act)?),
    };
    let (reduced, report) = prune_useless(&net);
    let levels = net.layers.len() + 1;
    let edge = |e: &crate::net::EdgeId| {
        format!(
            "{}->{}",
            node_label(crate::net::NodeId { level: e.layer, index: e.col }, levels),
            node_label(crate::net::NodeId { level: e.layer + 1, index: e.row }, levels)
        )
    };
    let mut text = format!(
        "removed {} connections in {} sweeps\n  {}\n",
        report.removed_edges.len(),
        report.sweeps,
        report.removed_edges.iter().map(edge).collect::<Vec<_>>().join(" ")
    );
    let labels = |v: &[crate::net::NodeId]| v.iter().map(|&n| node_label(n, levels)).collect::<Vec<_>>().join(" ");
    text += &format!("neutered neurons: {}\n", labels(&report.neutered));
    if !report.isolated_inputs.is_empty() {
        text += &format!("isolated inputs: {:?}\n", report.isolated_inputs.iter().map(|i| i + 1).collect::<Vec<_>>());
    }
    if !report.isolated_outputs.is_empty() {
        text += &format!("isolated outputs: {:?}\n", report.isolated_outputs.iter().map(|i| i + 1).collect::<Vec<_>>());
    }
    text += &format!("sparsity {:.4} -> {:.4}\n", net.sparsity(), reduced.sparsity());
    let mut files = Vec::new();
    if let Some(dir) = &ctx.common.out {
        fs::create_dir_all(dir)?;
        let p = dir.join("pruned_net.json");
        write_net_spec(&p, &reduced)?;
        files.push(("pruned_net.json".to_string(), fs::read(&p)?));
    }
    let cfg = json!({"spec": spec, "activation": act});
    ctx.finish(&report, &text, cfg, files, json!({"removed": report.removed_edges.len()}))?;
    Ok(EXIT_OK)
}

fn rank(ctx: &mut Ctx, act: &str, n: usize, trials: usize, dx: usize, sparsity: f64) -> Result<i32> {
    if !(0.0..1.0).contains(&sparsity) || n == 0 || dx == 0 {
        return Err(usage("need n, dx > 0 and sparsity in [0, 1)"));
    }
    let a = activation(act)?;
    let results: Vec<_> = (0..trials as u64)
        .map(|t| full_rank_trial(&a, n, dx, 1.0 - sparsity, ctx.seed + t))
        .collect::<Result<_>>()?;
    let full = results.iter().filter(|r| r.rank == n).count();
    let text = format!(
        "{act}, p = n = {n}, d_x = {dx}: full rank in {full} / {trials} draws (assumptions met in {})\n",
        results.iter().filter(|r| r.assumptions_ok).count()
    );
    let report = json!({"full_rank": full, "trials": trials, "draws": results});
    let cfg = json!({"activation": act, "n": n, "trials": trials, "dx": dx, "sparsity": sparsity});
    ctx.finish(&report, &text, cfg, vec![], json!({"full_rank": full}))?;
    Ok(EXIT_OK)
}

fn conv_rank(ctx: &mut Ctx, mode: ConvMode, d: usize, kernel: Vec<f64>) -> Result<i32> {
    let spec = ConvSpec::new(kernel, d, mode)?;
    let m = conv_matrix(&spec)?;
    let expected = conv_rank_expected(&spec);
    let numeric = numerical_rank(&m, RANK_TOL);
    let text = format!("{mode} d = {d} kernel {:?}: expected {expected}, numeric {numeric}\n", spec.kernel);
    let report = json!({"spec": spec, "expected": expected, "numeric": numeric, "matrix": crate::linalg::to_rows(&m)});
    let cfg = json!({"mode": mode, "d": d, "kernel": spec.kernel});
    ctx.finish(&report, &text, cfg, vec![], json!({"match": expected == numeric}))?;
    Ok(verdict(expected == numeric))
}
