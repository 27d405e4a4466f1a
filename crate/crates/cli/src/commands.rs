use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::time::{SystemTime, UNIX_EPOCH};

use klab_core::action::{classify_regime, regime_thresholds, Measure};
use klab_core::config::{read_run_config, GroundStateSpec, OutputFormat, PoissonRunSpec, RunConfig};
use klab_core::hypersphere::{parse_exponent_spec, sample_uniform_direction, sphere_moment};
use klab_core::lattice::SourceField;
use klab_core::poisson::{
    characteristic_functional, residual_refinement, smeared_moment, smeared_moment_cutoff_sequence,
    total_mass_divergence_probe, write_characteristic_csv,
};
use klab_core::rng::{derive_seed, stream};
use klab_core::sampler::trace::write_trace;
use klab_core::sampler::{generating_functional_ratio, run_chains};
use klab_core::scaling::{
    divergence_isolation_report, fit_n_exponent, fit_unit_volume_a_exponent, run_sweep, write_csv,
    Axis, FitResult, ReportConfig, VolumeMode,
};
use klab_core::stats::Estimate;
use serde::Serialize;
use serde_json::{json, Value};

use crate::{Cli, Command, MomentsArgs, Pair};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Runtime(#[from] klab_core::Error),
    #[error("{0}")]
    Acceptance(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Runtime(_) => 1,
            CliError::Usage(_) => 2,
            CliError::Acceptance(_) => 3,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.into())
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

pub fn dispatch(cli: &Cli) -> CliResult<()> {
    if let Some(w) = cli.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(w as usize)
            .build_global()
            .map_err(|e| CliError::Usage(format!("cannot size worker pool: {e}")))?;
    }
    match &cli.command {
        Command::Classify { p, n } => classify(*p, *n, cli.format),
        Command::Moments(args) => moments(args, cli.seed.unwrap_or(0), cli.format),
        Command::Run => {
            let ctx = Context::resolve(cli, "run")?;
            run(&ctx)
        }
        Command::Sweep => {
            let ctx = Context::resolve(cli, "sweep")?;
            sweep(&ctx)
        }
        Command::Report => {
            let ctx = Context::resolve(cli, "report")?;
            report(&ctx)
        }
        Command::Poisson => {
            let ctx = Context::resolve(cli, "poisson")?;
            poisson(&ctx)
        }
    }
}

fn classify(p: u32, n: u32, format: Option<crate::Format>) -> CliResult<()> {
    let usage = |e: klab_core::Error| CliError::Usage(e.to_string());
    let regime = classify_regime(p, n).map_err(usage)?;
    let thresholds = regime_thresholds(n).map_err(usage)?;
    let (lo, hi) = match thresholds {
        Some((lo, hi)) => (lo.to_string(), hi.to_string()),
        None => ("none".into(), "none".into()),
    };
    if format == Some(crate::Format::Json) {
        let v = json!({"p": p, "n": n, "regime": regime.label(),
                       "lower_threshold": lo, "upper_threshold": hi});
        println!("{}", serde_json::to_string_pretty(&v).expect("json value"));
    } else {
        println!("{}", regime.label());
        println!("thresholds for n = {n}: n/(n-2) = {lo}, 2n/(n-2) = {hi}");
    }
    Ok(())
}

fn moments(args: &MomentsArgs, seed: u64, format: Option<crate::Format>) -> CliResult<()> {
    let n = args.sites as usize;
    let exps = match (args.pair, args.single, &args.exponents) {
        (Some(Pair::Same), _, _) => vec![4],
        (Some(Pair::Different), _, _) => vec![2, 2],
        (_, Some(e), _) => vec![e],
        (_, _, Some(spec)) => parse_exponent_spec(spec).map_err(|e| CliError::Usage(e.to_string()))?,
        _ => unreachable!("clap requires one moment selector"),
    };
    let exact = sphere_moment(n, &exps).map_err(|e| CliError::Usage(e.to_string()))?;
    let mc = match args.mc {
        None => None,
        Some(samples) if samples < 2 => {
            return Err(CliError::Usage("--mc needs at least 2 samples".into()));
        }
        Some(samples) => {
            let mut rng = stream(seed);
            let mut xs = Vec::with_capacity(samples);
            for _ in 0..samples {
                let eta = sample_uniform_direction(n, &mut rng)?;
                xs.push(exps.iter().zip(&eta).map(|(&e, x)| x.powi(e as i32)).product::<f64>());
            }
            let est = klab_core::stats::naive_estimate(&xs);
            Some((samples, est, est.deviation(exact)))
        }
    };
    if format == Some(crate::Format::Json) {
        let v = json!({
            "N": n, "exponents": exps, "exact": exact,
            "monte_carlo": mc.map(|(s, e, d)| json!({"samples": s, "estimate": e, "sigma_deviation": d})),
        });
        println!("{}", serde_json::to_string_pretty(&v).expect("json value"));
    } else {
        println!("{exact}");
        if let Some((s, e, d)) = mc {
            println!(
                "monte carlo: {} ± {} ({} samples, {:.2} sigma)",
                e.mean, e.std_error, s, d
            );
        }
    }
    Ok(())
}

/// Resolved configuration and output location of a file-producing command.
struct Context {
    command: &'static str,
    config: RunConfig,
    out: PathBuf,
    workers: Option<u32>,
    artifacts: std::cell::RefCell<Vec<String>>,
}

impl Context {
    fn resolve(cli: &Cli, command: &'static str) -> CliResult<Self> {
        let mut config = match &cli.config {
            Some(p) => read_run_config(p).map_err(|e| CliError::Usage(e.to_string()))?,
            None => RunConfig::default(),
        };
        if let Some(s) = cli.seed {
            config.seed = s;
        }
        if let Some(o) = &cli.out {
            config.output.dir = o.to_string_lossy().into_owned();
        }
        if let Some(f) = cli.format {
            config.output.format = f.into();
        }
        let out = PathBuf::from(&config.output.dir);
        fs::create_dir_all(&out)?;
        Ok(Self {
            command,
            config,
            out,
            workers: cli.workers,
            artifacts: Default::default(),
        })
    }

    fn format(&self) -> OutputFormat {
        self.config.output.format
    }

    fn create(&self, name: &str) -> CliResult<BufWriter<File>> {
        self.artifacts.borrow_mut().push(name.into());
        Ok(BufWriter::new(File::create(self.out.join(name))?))
    }

    fn write_json<T: Serialize>(&self, name: &str, value: &T) -> CliResult<()> {
        let mut w = self.create(name)?;
        serde_json::to_writer_pretty(&mut w, value).map_err(|e| klab_core::Error::Config(e.to_string()))?;
        writeln!(w)?;
        w.flush()?;
        Ok(())
    }

    fn path(&self, name: &str) -> PathBuf {
        self.artifacts.borrow_mut().push(name.into());
        self.out.join(name)
    }

    /// The manifest echoes the resolved config; running the same command
    /// with `--config` pointed at its `config` object reproduces every
    /// artifact.
    fn write_manifest(&self) -> CliResult<()> {
        let created = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        let manifest = json!({
            "tool": "klab",
            "version": env!("CARGO_PKG_VERSION"),
            "command": self.command,
            "created_unix": created,
            "workers": self.workers,
            "seed_scheme": "splitmix64(seed + (index + 1) * 0x9E3779B97F4A7C15) per chain, task or angular stream",
            "artifacts": self.artifacts.borrow().clone(),
            "config": self.config,
        });
        let mut w = BufWriter::new(File::create(self.out.join("manifest.json"))?);
        serde_json::to_writer_pretty(&mut w, &manifest).map_err(|e| klab_core::Error::Config(e.to_string()))?;
        writeln!(w)?;
        w.flush()?;
        Ok(())
    }
}

fn missing(block: &str) -> CliError {
    CliError::Usage(format!("config has no `{block}` block (pass --config)"))
}

fn estimate_csv_row(w: &mut impl Write, name: &str, e: &Estimate) -> std::io::Result<()> {
    writeln!(
        w,
        "{},{:?},{:?},{:?},{}",
        name,
        e.mean,
        e.std_error,
        e.n_effective,
        serde_json::to_value(e.method).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default()
    )
}

fn run(ctx: &Context) -> CliResult<()> {
    let spec = ctx.config.run.as_ref().ok_or_else(|| missing("run"))?;
    let geom = spec.geometry.build()?;
    let params = spec.model.bare(&geom, spec.measure, klab_core::scaling::Protocol::BareFixed);
    let seed = ctx.config.seed;
    let chain = spec.chain.with_seed(derive_seed(seed, 0));
    let zero = SourceField::zeros(geom.sites());
    let result = run_chains(&geom, &params, &zero, spec.measure, &chain, &spec.observables, spec.chains)?;
    let ratio = match spec.source {
        Some(h) => {
            let h = SourceField::uniform(geom.sites(), h)?;
            Some(generating_functional_ratio(
                &geom,
                &params,
                &h,
                spec.measure,
                &spec.chain.with_seed(derive_seed(seed, 1)),
            )?)
        }
        None => None,
    };
    if ctx.format().csv() {
        let mut w = ctx.create("run.csv")?;
        writeln!(w, "observable,mean,std_error,n_effective,method")?;
        for (o, e) in &result.combined {
            estimate_csv_row(&mut w, &o.to_string(), e)?;
        }
        if let Some(e) = &ratio {
            estimate_csv_row(&mut w, "source_ratio", e)?;
        }
        w.flush()?;
    }
    if ctx.format().json() {
        let chains: Vec<Value> = result
            .chains
            .iter()
            .map(|c| {
                json!({
                    "acceptance": c.acceptance,
                    "kappa_step": c.kappa_step,
                    "eta_step": c.eta_step,
                    "estimates": c.estimates.iter().map(|(o, e)| json!({"observable": o, "estimate": e})).collect::<Vec<_>>(),
                })
            })
            .collect();
        let v = json!({
            "N": geom.sites(),
            "measure": spec.measure,
            "bare": params,
            "estimates": result.combined.iter().map(|(o, e)| json!({"observable": o, "estimate": e})).collect::<Vec<_>>(),
            "source_ratio": ratio,
            "chains": chains,
        });
        ctx.write_json("run.json", &v)?;
    }
    if spec.trace {
        write_trace(&ctx.path("trace.klab"), &result.chains[0].trace)?;
    }
    for (o, e) in &result.combined {
        println!("{o}: {} ± {}", e.mean, e.std_error);
    }
    ctx.write_manifest()
}

#[derive(Serialize)]
struct SweepFit {
    measure: Measure,
    observable: String,
    axis: Axis,
    fit: Option<FitResult>,
    error: Option<String>,
}

fn sweep(ctx: &Context) -> CliResult<()> {
    let spec = ctx.config.sweep.as_ref().ok_or_else(|| missing("sweep"))?;
    let result = run_sweep(&spec.plan, &spec.observables, ctx.config.seed)?;
    let mut fits = Vec::new();
    for &m in &spec.plan.measures {
        for o in &spec.observables {
            let name = o.name();
            let rows = result.series(m, &name);
            let (axis, fit) = match spec.plan.volume {
                VolumeMode::Free => (Axis::N, fit_n_exponent(&rows)),
                VolumeMode::UnitVolume => (Axis::A, fit_unit_volume_a_exponent(&rows, 0.0)),
            };
            let (fit, error) = match fit {
                Ok(f) => (Some(f), None),
                Err(e) => (None, Some(e.to_string())),
            };
            fits.push(SweepFit {
                measure: m,
                observable: name,
                axis,
                fit,
                error,
            });
        }
    }
    if ctx.format().csv() {
        let mut w = ctx.create("sweep.csv")?;
        write_csv(&result.rows, &mut w)?;
        w.flush()?;
    }
    if ctx.format().json() {
        ctx.write_json("sweep.json", &json!({"rows": result.rows, "failures": result.failures, "fits": fits}))?;
    }
    for f in &fits {
        match (&f.fit, &f.error) {
            (Some(fit), _) => println!(
                "{} {} {:?}-exponent {:.4} ± {:.4}",
                f.measure, f.observable, f.axis, fit.exponent, fit.exponent_std_error
            ),
            (None, Some(e)) => println!("{} {}: {e}", f.measure, f.observable),
            _ => {}
        }
    }
    for fail in &result.failures {
        log::warn!("sweep point L={} a={} {} failed: {}", fail.half_extent, fail.a, fail.measure, fail.message);
    }
    ctx.write_manifest()
}

fn report(ctx: &Context) -> CliResult<()> {
    let cfg = ctx.config.report.clone().unwrap_or_else(ReportConfig::default);
    let rep = divergence_isolation_report(&cfg, ctx.config.seed)?;
    let text = rep.to_text();
    print!("{text}");
    let mut w = ctx.create("report.txt")?;
    w.write_all(text.as_bytes())?;
    w.flush()?;
    if ctx.format().csv() {
        let mut w = ctx.create("report_n_sweep.csv")?;
        write_csv(&rep.n_sweep.rows, &mut w)?;
        w.flush()?;
        let mut w = ctx.create("report_unit_volume.csv")?;
        write_csv(&rep.unit_volume_sweep.rows, &mut w)?;
        w.flush()?;
    }
    if ctx.format().json() {
        ctx.write_json("report.json", &rep)?;
    }
    ctx.write_manifest()?;
    if rep.pass {
        Ok(())
    } else {
        Err(CliError::Acceptance("report: at least one check failed".into()))
    }
}

fn ground_state_summary(gs: &GroundStateSpec) -> CliResult<Value> {
    let (residuals, ratios) = residual_refinement(
        |x| gs.psi(x),
        &gs.grid,
        gs.gradient_coeff,
        gs.spacing,
        gs.s,
        gs.refinements,
    )?;
    Ok(json!({"residuals": residuals, "ratios": ratios}))
}

fn poisson(ctx: &Context) -> CliResult<()> {
    let spec: &PoissonRunSpec = ctx.config.poisson.as_ref().ok_or_else(|| missing("poisson"))?;
    let params = spec.params.build()?;
    let mut angular = spec.angular;
    angular.seed = derive_seed(ctx.config.seed, 0);
    let mut rows = Vec::with_capacity(spec.scales.len());
    for &t in &spec.scales {
        let g: Vec<f64> = spec.g.iter().map(|x| t * x).collect();
        rows.push((t, characteristic_functional(&params, &g, &angular)?));
    }
    let mass_fit = total_mass_divergence_probe(&params, &spec.mass_cutoffs, &angular);
    let moment = smeared_moment(&params, &spec.g, 2, 0.0, &angular);
    let sequence = smeared_moment_cutoff_sequence(&params, &spec.g, 2, &spec.moment_cutoffs, &angular);
    let ground = spec.ground_state.as_ref().map(ground_state_summary).transpose()?;
    if ctx.format().csv() {
        let mut w = ctx.create("characteristic.csv")?;
        write_characteristic_csv(&rows, &mut w)?;
        w.flush()?;
    }
    let err = |e: &klab_core::Error| e.to_string();
    let v = json!({
        "N'": params.sites(),
        "gamma": params.gamma(),
        "characteristic": rows.iter().map(|(t, c)| json!({"scale": t, "re": c.re, "im": c.im, "error": c.error})).collect::<Vec<_>>(),
        "total_mass_fit": mass_fit.as_ref().map_err(err),
        "second_moment": moment.as_ref().map_err(err),
        "second_moment_cutoffs": sequence.as_ref().map(|(v, d)| json!({"cutoffs": spec.moment_cutoffs, "values": v, "differences": d})).map_err(err),
        "ground_state": ground,
    });
    if ctx.format().json() {
        ctx.write_json("poisson.json", &v)?;
    }
    for (t, c) in &rows {
        println!("C({t} g) = {} + {} i", c.re, c.im);
    }
    match &mass_fit {
        Ok(f) => println!("total mass cutoff exponent {:.4} (expected {})", f.exponent, -params.xi()),
        Err(e) => println!("total mass fit failed: {e}"),
    }
    if let Ok(m) = &moment {
        println!("second moment {}", m.mean);
    }
    ctx.write_manifest()
}
