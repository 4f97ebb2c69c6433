use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use gmrf_geodesic::christoffel::christoffel_at;
use gmrf_geodesic::linalg::{Mat3, Vec3};
use gmrf_geodesic::metric::{derivatives_from_sums, entropy_from_sums, metric_from_sums};
use gmrf_geodesic::validation::{fd_metric_derivatives, fd_score_check, mc_fisher};
use gmrf_geodesic::{
    integrate, inverse_metric, patch_stats, reverse_run, sample_field, ChristoffelRefresh, FieldSampler,
    G33BetaDerivative, GeodesicCurve, IntegratorConfig, Kernel, McmcConfig, Mode, ModelParams, NeighborhoodSpec,
    PatchStats, TensorSums,
};
use gmrf_geodesic_cli::error::{exit, CliError};
use gmrf_geodesic_cli::format::fmt_g;
use gmrf_geodesic_cli::output::{load_field, save, write_curve_csv, write_field_csv, Summary};
use gmrf_geodesic_cli::table::{run_table, summarize, write_rows_csv, write_summary_csv, TableConfig};
use serde::Serialize;
use serde_json::json;

#[derive(Parser)]
#[command(name = "gmrf-geodesic", version, about = "Geodesics on the parameter manifold of Gaussian-Markov random fields")]
struct Cli {
    /// Master random seed.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Print machine-readable JSON on standard output.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw one field outcome and write it as CSV.
    Sample(SampleArgs),
    /// Metric tensor, optionally with inverse, derivatives and connection.
    Metric(MetricArgs),
    /// Entropy of the local conditional density.
    Entropy(StatsArgs),
    /// Integrate one geodesic.
    Geodesic(GeodesicArgs),
    /// Integrate a geodesic forward, then back from its end point.
    Reverse(GeodesicArgs),
    /// Run the distance table in batch.
    Table(TableArgs),
    /// Check the closed forms against Monte-Carlo and finite differences.
    Validate(ValidateArgs),
}

#[derive(Args, Clone)]
struct ThetaArgs {
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    mu: f64,
    #[arg(long, default_value_t = 1.0)]
    sigma2: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    beta: f64,
}

impl ThetaArgs {
    fn params(&self) -> Result<ModelParams, CliError> {
        Ok(ModelParams::new(self.mu, self.sigma2, self.beta)?)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum KernelArg {
    Gibbs,
    Metropolis,
}

impl From<KernelArg> for Kernel {
    fn from(k: KernelArg) -> Self {
        match k {
            KernelArg::Gibbs => Kernel::Gibbs,
            KernelArg::Metropolis => Kernel::Metropolis,
        }
    }
}

#[derive(Args, Clone)]
struct McmcArgs {
    /// Lattice size as H,W.
    #[arg(long, value_parser = parse_lattice)]
    lattice: Option<(usize, usize)>,
    /// Burn-in sweeps of a cold start.
    #[arg(long)]
    burnin: Option<usize>,
    /// Sweeps between successive outcomes.
    #[arg(long)]
    sweeps: Option<usize>,
    #[arg(long, value_enum)]
    kernel: Option<KernelArg>,
}

impl McmcArgs {
    fn apply(&self, cfg: &mut McmcConfig, seed: u64) {
        cfg.seed = seed;
        if let Some(l) = self.lattice {
            cfg.lattice_size = l;
        }
        if let Some(b) = self.burnin {
            cfg.burn_in_sweeps = b;
        }
        if let Some(s) = self.sweeps {
            cfg.sweeps_per_sample = s;
        }
        if let Some(k) = self.kernel {
            cfg.kernel = k.into();
        }
    }
}

#[derive(Args)]
struct SampleArgs {
    #[command(flatten)]
    theta: ThetaArgs,
    #[command(flatten)]
    mcmc: McmcArgs,
}

#[derive(Args)]
struct StatsArgs {
    #[command(flatten)]
    theta: ThetaArgs,
    /// Use the exact covariances of an i.i.d. field with variance σ².
    #[arg(long, conflicts_with = "field")]
    analytic: bool,
    /// Estimate the covariances from a field CSV instead of sampling.
    #[arg(long)]
    field: Option<PathBuf>,
    #[command(flatten)]
    mcmc: McmcArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum G33Arg {
    Exact,
    Published,
}

impl From<G33Arg> for G33BetaDerivative {
    fn from(g: G33Arg) -> Self {
        match g {
            G33Arg::Exact => G33BetaDerivative::Exact,
            G33Arg::Published => G33BetaDerivative::Published,
        }
    }
}

#[derive(Args)]
struct MetricArgs {
    #[command(flatten)]
    stats: StatsArgs,
    /// Regularization added to the diagonal before inversion.
    #[arg(long, default_value_t = 0.01)]
    lambda: f64,
    #[arg(long)]
    inverse: bool,
    #[arg(long)]
    derivatives: bool,
    #[arg(long)]
    christoffel: bool,
    #[arg(long, value_enum, default_value = "exact")]
    g33_form: G33Arg,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Mcmc,
    Frozen,
}

#[derive(Clone, Copy, ValueEnum)]
enum RefreshArg {
    PerStep,
    PerStage,
}

#[derive(Args)]
struct GeodesicArgs {
    /// Start point μ,σ²,β.
    #[arg(long, value_parser = parse_vec3, allow_hyphen_values = true)]
    start: Vec3,
    /// Start tangent α1,α2,α3.
    #[arg(long, value_parser = parse_vec3, allow_hyphen_values = true)]
    tangent: Vec3,
    /// Base integrator configuration (JSON). Flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, allow_negative_numbers = true)]
    a: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    b: Option<f64>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    #[arg(long)]
    lambda: Option<f64>,
    /// Frozen mode only: use i.i.d. covariances at the start variance.
    #[arg(long)]
    analytic: bool,
    /// Restart the chain from noise at every step.
    #[arg(long)]
    cold: bool,
    /// How often the connection is re-evaluated within a step.
    #[arg(long, value_enum)]
    christoffel: Option<RefreshArg>,
    #[command(flatten)]
    mcmc: McmcArgs,
}

#[derive(Args)]
struct TableArgs {
    /// Table configuration (JSON). Defaults to the fifteen published rows.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    repeats: Option<usize>,
}

#[derive(Args)]
struct ValidateArgs {
    /// Parameters μ,σ²,β.
    #[arg(long, value_parser = parse_vec3, allow_hyphen_values = true, default_value = "0,1,0")]
    theta: Vec3,
    /// Number of independent fields for the Monte-Carlo oracle.
    #[arg(long, default_value_t = 30)]
    fields: usize,
    /// Relative tolerance on the metric diagonal.
    #[arg(long, default_value_t = 0.1)]
    tolerance: f64,
    #[command(flatten)]
    mcmc: McmcArgs,
}

fn parse_floats(s: &str) -> Result<Vec<f64>, String> {
    s.split(',').map(|v| v.trim().parse::<f64>().map_err(|e| format!("{v:?}: {e}"))).collect()
}

fn parse_vec3(s: &str) -> Result<Vec3, String> {
    match parse_floats(s)?[..] {
        [x, y, z] => Ok([x, y, z]),
        _ => Err(format!("expected three comma-separated numbers, got {s:?}")),
    }
}

fn parse_lattice(s: &str) -> Result<(usize, usize), String> {
    let parts: Vec<&str> = s.split(',').collect();
    match parts[..] {
        [h, w] => Ok((
            h.trim().parse().map_err(|e| format!("{h:?}: {e}"))?,
            w.trim().parse().map_err(|e| format!("{w:?}: {e}"))?,
        )),
        _ => Err(format!("expected H,W, got {s:?}")),
    }
}

struct Ctx {
    seed: u64,
    out: Option<PathBuf>,
    json: bool,
}

impl Ctx {
    fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("out"))
    }

    fn print<T: Serialize>(&self, value: &T, text: impl FnOnce() -> String) -> Result<(), CliError> {
        let mut stdout = std::io::stdout().lock();
        if self.json {
            writeln!(stdout, "{}", serde_json::to_string(value)?)?;
        } else {
            writeln!(stdout, "{}", text())?;
        }
        Ok(())
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    save(path, |w| {
        serde_json::to_writer_pretty(&mut *w, value)?;
        writeln!(w)
    })
}

fn mat_text(m: &Mat3) -> String {
    m.iter()
        .map(|r| r.iter().map(|v| format!("{:>14}", fmt_g(*v, 8))).collect::<String>())
        .collect::<Vec<_>>()
        .join("\n")
}

fn stats_mcmc(mcmc: &McmcArgs, seed: u64) -> McmcConfig {
    let mut cfg = McmcConfig::default();
    mcmc.apply(&mut cfg, seed);
    cfg
}

/// Covariance statistics for a query, and a word on where they came from.
fn query_stats(args: &StatsArgs, params: &ModelParams, seed: u64) -> Result<(PatchStats, &'static str), CliError> {
    if args.analytic {
        return Ok((PatchStats::independent(params.sigma2), "analytic"));
    }
    let cfg = stats_mcmc(&args.mcmc, seed);
    let field = match &args.field {
        Some(path) => load_field(path, cfg.boundary)?,
        None => sample_field(params, &NeighborhoodSpec::second_order(), &cfg, None)?,
    };
    let source = if args.field.is_some() { "field" } else { "sampled" };
    Ok((patch_stats(&field)?, source))
}

fn cmd_sample(ctx: &Ctx, args: &SampleArgs) -> Result<(), CliError> {
    let params = args.theta.params()?;
    let cfg = stats_mcmc(&args.mcmc, ctx.seed);
    let field = sample_field(&params, &NeighborhoodSpec::second_order(), &cfg, None)?;
    let path = ctx.out_dir().join("field.csv");
    save(&path, |w| write_field_csv(w, &field))?;
    let (h, w) = field.dims();
    let report = json!({
        "theta": params.to_array(),
        "height": h,
        "width": w,
        "mean": field.mean(),
        "variance": field.variance(),
        "seed": ctx.seed,
        "path": path,
    });
    ctx.print(&report, || {
        format!(
            "{h}x{w} field, mean {}, variance {} -> {}",
            fmt_g(field.mean(), 6),
            fmt_g(field.variance(), 6),
            path.display()
        )
    })
}

fn cmd_metric(ctx: &Ctx, args: &MetricArgs) -> Result<(), CliError> {
    let params = args.stats.theta.params()?;
    let (stats, source) = query_stats(&args.stats, &params, ctx.seed)?;
    let sums = TensorSums::from_stats(&stats);
    let delta = NeighborhoodSpec::second_order().delta();
    let form = args.g33_form.into();
    let g = metric_from_sums(&params, &sums, delta)?;
    let mut report = json!({ "theta": params.to_array(), "stats": source, "g": g.matrix() });
    let mut text = format!("g:\n{}", mat_text(&g.matrix()));
    if args.inverse {
        let inv = inverse_metric(&g, args.lambda)?;
        report["g_inv"] = json!(inv.g_inv.matrix());
        report["lambda"] = json!(args.lambda);
        text += &format!("\n(g + {} I)^-1:\n{}", fmt_g(args.lambda, 6), mat_text(&inv.g_inv.matrix()));
    }
    if args.derivatives {
        let dg = derivatives_from_sums(&params, &sums, delta, form)?;
        report["dg_dsigma2"] = json!(dg.dg_dtheta2.matrix());
        report["dg_dbeta"] = json!(dg.dg_dtheta3.matrix());
        text += &format!(
            "\ndg/dsigma2:\n{}\ndg/dbeta:\n{}",
            mat_text(&dg.dg_dtheta2.matrix()),
            mat_text(&dg.dg_dtheta3.matrix())
        );
    }
    if args.christoffel {
        let c = christoffel_at(&params, &sums, delta, args.lambda, form)?;
        report["christoffel"] = json!([c.gamma1, c.gamma2, c.gamma3]);
        for (k, m) in [c.gamma1, c.gamma2, c.gamma3].iter().enumerate() {
            text += &format!("\nGamma^{}:\n{}", k + 1, mat_text(m));
        }
    }
    if let Some(dir) = &ctx.out {
        write_json(&dir.join("metric.json"), &report)?;
    }
    ctx.print(&report, || text)
}

fn cmd_entropy(ctx: &Ctx, args: &StatsArgs) -> Result<(), CliError> {
    let params = args.theta.params()?;
    let (stats, source) = query_stats(args, &params, ctx.seed)?;
    let h = entropy_from_sums(&params, &TensorSums::from_stats(&stats))?;
    let report = json!({
        "theta": params.to_array(),
        "stats": source,
        "entropy": h.h_beta,
        "gaussian_entropy": h.h_gauss,
    });
    if let Some(dir) = &ctx.out {
        write_json(&dir.join("entropy.json"), &report)?;
    }
    ctx.print(&report, || fmt_g(h.h_beta, 10))
}

fn integrator_config(ctx: &Ctx, args: &GeodesicArgs) -> Result<IntegratorConfig, CliError> {
    let mut cfg = match &args.config {
        Some(path) => serde_json::from_str(&fs::read_to_string(path)?)?,
        None => IntegratorConfig::default(),
    };
    if let Some(a) = args.a {
        cfg.a = a;
    }
    if let Some(b) = args.b {
        cfg.b = b;
    }
    if let Some(n) = args.steps {
        cfg.steps = n;
    }
    if let Some(l) = args.lambda {
        cfg.lambda = l;
    }
    if let Some(m) = args.mode {
        cfg.mode = match m {
            ModeArg::Mcmc => Mode::Mcmc,
            ModeArg::Frozen => Mode::Frozen,
        };
    }
    if let Some(r) = args.christoffel {
        cfg.refresh = Some(match r {
            RefreshArg::PerStep => ChristoffelRefresh::PerStep,
            RefreshArg::PerStage => ChristoffelRefresh::PerStage,
        });
    }
    if args.cold {
        cfg.warm_start = false;
    }
    args.mcmc.apply(&mut cfg.mcmc, ctx.seed);
    if args.analytic {
        if cfg.mode != Mode::Frozen {
            return Err(CliError::Usage("--analytic needs --mode frozen".into()));
        }
        cfg.frozen_stats = Some(TensorSums::independent(args.start[1]));
    }
    cfg.validate()?;
    Ok(cfg)
}

fn divergence_error(curve: &GeodesicCurve) -> Result<(), CliError> {
    match (&curve.diverged_at, &curve.divergence_reason) {
        (Some(step), reason) => Err(CliError::Diverged(format!(
            "step {step}: {}",
            reason.as_deref().unwrap_or("unknown reason")
        ))),
        _ => Ok(()),
    }
}

fn print_distances(ctx: &Ctx, summary: &Summary) -> Result<(), CliError> {
    let line = if ctx.json {
        serde_json::to_string(summary)?
    } else {
        serde_json::to_string(&json!({ "gd": summary.gd, "ed": summary.ed }))?
    };
    writeln!(std::io::stdout().lock(), "{line}")?;
    Ok(())
}

fn cmd_geodesic(ctx: &Ctx, args: &GeodesicArgs) -> Result<(), CliError> {
    let cfg = integrator_config(ctx, args)?;
    let curve = integrate(args.start, args.tangent, &cfg)?;
    let dir = ctx.out_dir();
    save(&dir.join("curve.csv"), |w| write_curve_csv(w, &curve))?;
    let summary = Summary::new(&curve, ctx.seed);
    write_json(&dir.join("summary.json"), &summary)?;
    print_distances(ctx, &summary)?;
    divergence_error(&curve)
}

fn cmd_reverse(ctx: &Ctx, args: &GeodesicArgs) -> Result<(), CliError> {
    let cfg = integrator_config(ctx, args)?;
    let forward = integrate(args.start, args.tangent, &cfg)?;
    let dir = ctx.out_dir();
    save(&dir.join("forward.csv"), |w| write_curve_csv(w, &forward))?;
    if forward.diverged_at.is_some() {
        write_json(&dir.join("summary.json"), &json!({ "forward": Summary::new(&forward, ctx.seed) }))?;
        return divergence_error(&forward);
    }
    let reversed = reverse_run(&forward, &cfg)?;
    save(&dir.join("reverse.csv"), |w| write_curve_csv(w, &reversed.curve))?;
    save(&dir.join("divergence.csv"), |w| {
        writeln!(w, "t,divergence")?;
        for (s, d) in reversed.curve.states.iter().zip(&reversed.divergence) {
            writeln!(w, "{},{}", fmt_g(s.t, 12), fmt_g(*d, 12))?;
        }
        Ok(())
    })?;
    let max_divergence = reversed.divergence.iter().fold(0.0f64, |m, v| m.max(*v));
    let final_divergence = reversed.divergence.last().copied().unwrap_or(0.0);
    let report = json!({
        "forward": Summary::new(&forward, ctx.seed),
        "reverse": Summary::new(&reversed.curve, ctx.seed),
        "max_divergence": max_divergence,
        "final_divergence": final_divergence,
    });
    write_json(&dir.join("summary.json"), &report)?;
    let line = if ctx.json {
        serde_json::to_string(&report)?
    } else {
        serde_json::to_string(&json!({ "max_divergence": max_divergence, "final_divergence": final_divergence }))?
    };
    writeln!(std::io::stdout().lock(), "{line}")?;
    divergence_error(&reversed.curve)
}

fn cmd_table(ctx: &Ctx, args: &TableArgs) -> Result<(), CliError> {
    let mut cfg: TableConfig = match &args.config {
        Some(path) => serde_json::from_str(&fs::read_to_string(path)?)?,
        None => TableConfig::default(),
    };
    if let Some(r) = args.repeats {
        cfg.repeats = r;
    }
    if cfg.repeats == 0 {
        return Err(CliError::Usage("repeats must be at least 1".into()));
    }
    cfg.integrator.validate()?;
    let runs = run_table(&cfg, ctx.seed);
    let rows = summarize(&cfg, &runs);
    let dir = ctx.out_dir();
    save(&dir.join("table_runs.csv"), |w| write_rows_csv(w, &runs))?;
    save(&dir.join("table_summary.csv"), |w| write_summary_csv(w, &rows))?;
    write_json(&dir.join("table.json"), &json!({ "seed": ctx.seed, "runs": runs, "rows": rows }))?;
    ctx.print(&rows, || {
        let mut text = String::from("row  runs  div   gd_median   ed_median   ref_gd");
        for r in &rows {
            text += &format!(
                "\n{:>3}  {:>4}  {:>3}  {:>10}  {:>10}  {:>7}",
                r.row,
                r.runs,
                r.diverged,
                fmt_g(r.gd_median, 5),
                fmt_g(r.ed_median, 5),
                r.reference.map(|x| fmt_g(x.gd, 4)).unwrap_or_default()
            );
            if let Some(note) = &r.note {
                text += &format!("  note: {note}");
            }
        }
        text
    })
}

fn cmd_validate(ctx: &Ctx, args: &ValidateArgs) -> Result<(), CliError> {
    let params = ModelParams::from_array(args.theta)?;
    let hood = NeighborhoodSpec::second_order();
    let cfg = stats_mcmc(&args.mcmc, ctx.seed);
    let fisher = mc_fisher(&params, &hood, &cfg, args.fields)?;
    let z12 = fisher.z_score(0, 1);
    let z13 = fisher.z_score(0, 2);
    let fisher_ok = fisher.max_rel_error_diag <= args.tolerance && z12.abs() <= 3.0 && z13.abs() <= 3.0;

    // A separate stream so the derivative and score checks see a fresh field.
    let field = FieldSampler::with_stream(cfg, args.fields as u64)?.cold(&params, &hood)?;
    let stats = patch_stats(&field)?;
    let step = 1e-3 * params.sigma2.min(1.0);
    let derivatives = fd_metric_derivatives(&params, &stats, hood.delta(), step)?;
    let derivatives_ok = derivatives.passes(1e-5);

    let mut nb = vec![0.0; hood.delta()];
    let samples: Vec<(f64, Vec<f64>)> = field
        .evaluated_sites(hood.radius())
        .step_by(16)
        .map(|(r, c)| {
            field.neighbor_values(r, c, &hood, &mut nb);
            (field.get(r, c), nb.clone())
        })
        .collect();
    let scores = fd_score_check(&params, &samples, 1e-6 * params.sigma2.min(1.0))?;
    let scores_ok = scores.max_rel_error < 1e-5;

    let report = json!({
        "theta": args.theta,
        "fisher": {
            "pass": fisher_ok,
            "max_rel_error_diag": fisher.max_rel_error_diag,
            "z12": z12,
            "z13": z13,
            "report": fisher,
        },
        "derivatives": { "pass": derivatives_ok, "max_rel_error": derivatives.max_rel_error, "mu_slope": derivatives.mu_slope },
        "score": { "pass": scores_ok, "max_rel_error": scores.max_rel_error, "n_samples": scores.n_samples },
    });
    if let Some(dir) = &ctx.out {
        write_json(&dir.join("validate.json"), &report)?;
    }
    let word = |ok: bool| if ok { "PASS" } else { "FAIL" };
    ctx.print(&report, || {
        format!(
            "{} fisher: diagonal rel error {} (tol {}), z12 {}, z13 {}\n{} metric derivatives: rel error {}\n{} score: rel error {}",
            word(fisher_ok),
            fmt_g(fisher.max_rel_error_diag, 4),
            fmt_g(args.tolerance, 4),
            fmt_g(z12, 3),
            fmt_g(z13, 3),
            word(derivatives_ok),
            fmt_g(derivatives.max_rel_error, 3),
            word(scores_ok),
            fmt_g(scores.max_rel_error, 3)
        )
    })?;
    let failed: Vec<&str> = [("fisher", fisher_ok), ("derivatives", derivatives_ok), ("score", scores_ok)]
        .iter()
        .filter(|(_, ok)| !ok)
        .map(|(name, _)| *name)
        .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Validation(failed.join(", ")))
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let ctx = Ctx { seed: cli.seed, out: cli.out, json: cli.json };
    match &cli.command {
        Command::Sample(a) => cmd_sample(&ctx, a),
        Command::Metric(a) => cmd_metric(&ctx, a),
        Command::Entropy(a) => cmd_entropy(&ctx, a),
        Command::Geodesic(a) => cmd_geodesic(&ctx, a),
        Command::Reverse(a) => cmd_reverse(&ctx, a),
        Command::Table(a) => cmd_table(&ctx, a),
        Command::Validate(a) => cmd_validate(&ctx, a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { exit::USAGE as u8 } else { exit::OK as u8 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
