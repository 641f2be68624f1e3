//! Command-line entry point: `simulate`, `train`, `bench`, `gradcheck` and
//! `impulse`. Every command writes its artifacts and a `manifest.json` under
//! `--out`.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{ArgGroup, Args, Parser, Subcommand};
use pmsn_core::grad::{fd_check, FdModel, FdReport};
use pmsn_core::neuron::{init_params, pmsn_hidden_trace, PmsnParams};
use pmsn_core::numeric::SeqTensor;
use pmsn_core::parallel::{layer_forward, ExecMode};
use pmsn_core::train::{Network, NeuronLayer};
use pmsn_core::Real;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::bench::{convolution_check, energy_table, histogram, impulse_trace, mode_table, time_models};
use crate::checkpoint::{checkpoint_from_container, params_from_container, params_to_container};
use crate::config::{PrecisionOpt, RunConfig};
use crate::container::Container;
use crate::dataset::DatasetHandle;
use crate::error::{Error, Result};
use crate::manifest::RunManifest;
use crate::report::{read_series_csv, write_json, write_modes_trace, write_rows, write_trace};
use crate::trainer::{evaluate_parallel, train_loop, TrainOptions, CHECKPOINT_FILE, LAST_GOOD_FILE, METRICS_FILE};

#[derive(Debug, Parser)]
#[command(name = "pmsn", version = env!("CARGO_PKG_VERSION"), about = "Parallel multi-compartment spiking neuron engine")]
pub struct Cli {
    /// TOML run configuration; built-in defaults when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides `seed` of the configuration.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Overrides `workers` of the configuration.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Output directory for every artifact of the run.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Overrides `precision` of the configuration: single or double.
    #[arg(long, global = true, value_parser = parse_precision)]
    pub precision: Option<PrecisionOpt>,
    #[command(subcommand)]
    pub command: Command,
}

fn parse_precision(s: &str) -> std::result::Result<PrecisionOpt, String> {
    PrecisionOpt::parse(s).ok_or_else(|| format!("expected 'single' or 'double', got '{s}'"))
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Runs one PMSN layer and writes v_s.csv, spikes.csv, i_h.csv and v_h.csv.
    Simulate(SimulateArgs),
    /// Trains the configured network; writes metrics.csv and checkpoint.pmsn.
    Train(TrainArgs),
    /// Writes timing.csv, conv_check.csv, energy.csv and density.csv.
    Bench(BenchArgs),
    /// Compares analytic gradients with central differences; writes gradcheck.json.
    Gradcheck,
    /// Writes impulse.csv, modes.csv and histograms.csv for one layer.
    Impulse(ImpulseArgs),
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("source").required(true).args(["input", "impulse", "random"])))]
pub struct SimulateArgs {
    /// CSV of input currents, one row per time step, one column per neuron
    /// (a single column drives every neuron).
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Drives the layer with a unit impulse at t = 0 and also writes
    /// impulse_trace.csv with one column per hidden mode and one for the output compartment.
    #[arg(long)]
    pub impulse: bool,
    /// Drives the layer with this many steps of uniform [0, 1) input.
    #[arg(long, value_name = "STEPS")]
    pub random: Option<usize>,
    /// Also runs the serial and parallel paths and writes compare.json;
    /// fails if they disagree beyond the precision's tolerance.
    #[arg(long)]
    pub compare: bool,
    /// Layer parameter file; a freshly initialized layer of `model.width`
    /// neurons when omitted.
    #[arg(long)]
    pub params: Option<PathBuf>,
    /// Length of the impulse response.
    #[arg(long, default_value_t = 64)]
    pub steps: usize,
    /// Neuron whose response impulse_trace.csv shows.
    #[arg(long, default_value_t = 0)]
    pub neuron: usize,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Checkpoint to continue from.
    #[arg(long)]
    pub resume: Option<PathBuf>,
    /// Stops after this many epochs; the learning-rate schedule still spans
    /// `train.epochs`.
    #[arg(long)]
    pub stop_after: Option<usize>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Skips the timing and convolution tables.
    #[arg(long)]
    pub skip_timing: bool,
    /// Skips the energy and density tables.
    #[arg(long)]
    pub skip_energy: bool,
    /// Trained checkpoint whose spike rates feed the energy table; a freshly
    /// initialized network when omitted.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Number of test samples evaluated for the energy table.
    #[arg(long)]
    pub energy_samples: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ImpulseArgs {
    /// Layer parameter file; a freshly initialized layer of `model.width`
    /// neurons when omitted.
    #[arg(long)]
    pub params: Option<PathBuf>,
    #[arg(long, default_value_t = 64)]
    pub steps: usize,
    #[arg(long, default_value_t = 0)]
    pub neuron: usize,
    /// Histogram bins.
    #[arg(long, default_value_t = 20)]
    pub bins: usize,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Simulate(_) => "simulate",
            Command::Train(_) => "train",
            Command::Bench(_) => "bench",
            Command::Gradcheck => "gradcheck",
            Command::Impulse(_) => "impulse",
        }
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Resolves the configuration from the file and flag overrides.
pub fn resolve_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(workers) = cli.workers {
        cfg.workers = workers;
    }
    if let Some(p) = cli.precision {
        cfg.precision = p;
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn execute(cli: &Cli) -> Result<()> {
    let cfg = resolve_config(cli)?;
    fs::create_dir_all(&cli.out).map_err(|e| Error::io(&cli.out, e))?;
    let mut man = RunManifest::start(cli.command.name(), &cfg, &cli.out);
    man.write()?;
    let result = match (&cli.command, cfg.precision) {
        (Command::Simulate(a), PrecisionOpt::Single) => simulate::<f32>(&cfg, a, &mut man),
        (Command::Simulate(a), PrecisionOpt::Double) => simulate::<f64>(&cfg, a, &mut man),
        (Command::Train(a), PrecisionOpt::Single) => train::<f32>(&cfg, a, &mut man),
        (Command::Train(a), PrecisionOpt::Double) => train::<f64>(&cfg, a, &mut man),
        (Command::Bench(a), PrecisionOpt::Single) => bench::<f32>(&cfg, a, &mut man),
        (Command::Bench(a), PrecisionOpt::Double) => bench::<f64>(&cfg, a, &mut man),
        (Command::Gradcheck, _) => gradcheck(&cfg, &mut man),
        (Command::Impulse(a), _) => impulse(&cfg, a, &mut man),
    };
    man.status = match &result {
        Ok(()) => "ok".into(),
        Err(e) => e.to_string(),
    };
    let written = man.write();
    result.and(written)
}

fn layer_params<T: Real>(cfg: &RunConfig, path: Option<&Path>, features: usize) -> Result<PmsnParams<T>> {
    match path {
        Some(p) => params_from_container(&Container::read(p)?, p),
        None => Ok(init_params::<T>(cfg.model.compartment_count(), features, cfg.seed, &cfg.init_config())?.1),
    }
}

/// Largest tolerated serial/parallel deviation of the output potential.
pub fn equivalence_tolerance(p: PrecisionOpt) -> f64 {
    match p {
        PrecisionOpt::Single => 1e-5,
        PrecisionOpt::Double => 1e-9,
    }
}

#[derive(Debug, Serialize)]
struct CompareSummary {
    precision: PrecisionOpt,
    time: usize,
    features: usize,
    max_abs_v_s: f64,
    max_abs_i_h: f64,
    spike_mismatches: usize,
    tolerance: f64,
    pass: bool,
}

fn simulate<T: Real>(cfg: &RunConfig, a: &SimulateArgs, man: &mut RunManifest) -> Result<()> {
    let (series, time, cols) = if let Some(path) = &a.input {
        read_series_csv(path)?
    } else if a.impulse {
        if a.steps == 0 {
            return Err(Error::Validation("--steps must be positive".into()));
        }
        let mut s = vec![0.0; a.steps];
        s[0] = 1.0;
        (s, a.steps, 1)
    } else {
        let t = a.random.unwrap_or(0);
        if t == 0 {
            return Err(Error::Validation("--random needs a positive step count".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let f = cfg.model.width;
        ((0..t * f).map(|_| rng.random_range(0.0..1.0)).collect(), t, f)
    };
    let features = match (&a.params, &a.input) {
        (Some(_), _) => None,
        (None, Some(_)) if cols > 1 => Some(cols),
        _ => Some(cfg.model.width),
    };
    let p: PmsnParams<T> = match features {
        Some(f) => layer_params(cfg, None, f)?,
        None => layer_params(cfg, a.params.as_deref(), 0)?,
    };
    let f = p.features;
    if cols != 1 && cols != f {
        return Err(Error::Validation(format!(
            "input has {cols} columns but the layer has {f} neurons"
        )));
    }
    let mut x = SeqTensor::<T>::zeros(1, time, f);
    for t in 0..time {
        for j in 0..f {
            let c = if cols == 1 { 0 } else { j };
            x.set(0, t, j, T::lit(series[t * cols + c]));
        }
    }
    let lc = cfg.layer_config();
    let out = layer_forward(&p, &x, &lc)?;
    write_trace(&man.artifact("v_s.csv"), &out.v_s, 0)?;
    write_trace(&man.artifact("spikes.csv"), &out.spikes, 0)?;
    write_trace(&man.artifact("i_h.csv"), &out.i_h, 0)?;
    let hidden_in = lc.hidden_input(&x);
    let traces = (0..f)
        .map(|j| pmsn_hidden_trace(&p, j, &hidden_in.lane(0, j)))
        .collect::<pmsn_core::Result<Vec<_>>>()?;
    write_modes_trace(&man.artifact("v_h.csv"), &traces)?;
    println!(
        "simulated {f} neurons for {time} steps: {} spikes",
        out.spikes.sum().as_f64()
    );

    if a.impulse {
        let p64 = p.cast::<f64>();
        if a.neuron >= f {
            return Err(Error::Validation(format!(
                "--neuron {} is out of range for {f} neurons",
                a.neuron
            )));
        }
        let rows = impulse_trace(&p64, a.neuron, time)?;
        let per_step = p64.modes + 1;
        let path = man.artifact("impulse_trace.csv");
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["t".to_string()];
        header.extend(rows.iter().take(per_step).map(|r| r.compartment.clone()));
        w.write_record(&header)
            .map_err(|e| Error::format(&path, e.to_string()))?;
        for chunk in rows.chunks(per_step) {
            let mut rec = vec![chunk[0].t.to_string()];
            rec.extend(chunk.iter().map(|r| r.value.to_string()));
            w.write_record(&rec).map_err(|e| Error::format(&path, e.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| Error::format(&path, e.to_string()))?;
        fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
    }

    if a.compare {
        let mut serial_cfg = lc;
        serial_cfg.mode = ExecMode::Serial;
        let mut parallel_cfg = lc;
        parallel_cfg.mode = ExecMode::Parallel;
        let s = layer_forward(&p, &x, &serial_cfg)?;
        let q = layer_forward(&p, &x, &parallel_cfg)?;
        let mismatches = s
            .spikes
            .data()
            .iter()
            .zip(q.spikes.data())
            .filter(|(u, v)| u != v)
            .count();
        let tolerance = equivalence_tolerance(cfg.precision);
        let max_abs_v_s = s.v_s.max_abs_diff(&q.v_s).as_f64();
        let summary = CompareSummary {
            precision: cfg.precision,
            time,
            features: f,
            max_abs_v_s,
            max_abs_i_h: s.i_h.max_abs_diff(&q.i_h).as_f64(),
            spike_mismatches: mismatches,
            tolerance,
            pass: mismatches == 0 && max_abs_v_s <= tolerance,
        };
        write_json(&man.artifact("compare.json"), &summary)?;
        println!(
            "serial vs parallel: max |dv_s| = {:.3e}, spike mismatches = {}",
            summary.max_abs_v_s, summary.spike_mismatches
        );
        if !summary.pass {
            return Err(Error::Validation(format!(
                "serial and parallel paths disagree (max |dv_s| = {:.3e}, {} spike mismatches, tolerance {:.0e})",
                summary.max_abs_v_s, summary.spike_mismatches, tolerance
            )));
        }
    }
    Ok(())
}

fn train<T: Real>(cfg: &RunConfig, a: &TrainArgs, man: &mut RunManifest) -> Result<()> {
    let data = DatasetHandle::from_config(cfg).load::<T>()?;
    let opts = TrainOptions {
        out_dir: Some(man.output_dir.clone()),
        resume: a.resume.clone(),
        stop_after: a.stop_after,
    };
    man.artifact(METRICS_FILE);
    man.artifact(CHECKPOINT_FILE);
    let outcome = match train_loop::<T>(cfg, &data, &opts) {
        Ok(o) => o,
        Err(e @ Error::Numeric(_)) => {
            man.artifact(LAST_GOOD_FILE);
            return Err(e);
        }
        Err(e) => return Err(e),
    };
    for (i, b) in outcome.net.blocks.iter().enumerate() {
        if let NeuronLayer::Pmsn(p) = &b.neuron {
            params_to_container(p).write(&man.artifact(&format!("layer{i}.pmsn")))?;
        }
    }
    for m in &outcome.history {
        println!(
            "epoch {:>3} {:<5} loss {:.4} accuracy {:.4} ({:.1}s)",
            m.epoch, m.split, m.loss, m.accuracy, m.wall_seconds
        );
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct DensityRow {
    layer: String,
    spikes: u64,
    neuron_steps: u64,
    density: f64,
}

fn bench<T: Real>(cfg: &RunConfig, a: &BenchArgs, man: &mut RunManifest) -> Result<()> {
    let n = cfg.model.compartment_count();
    if !a.skip_timing {
        let rows = time_models(&cfg.bench, n, cfg.seed)?;
        write_rows(&man.artifact("timing.csv"), &rows, &[])?;
        for r in &rows {
            println!(
                "{:<14} {:<16} T={:<5} batch={:<3} median {:>12.1} us  ratio {:>7.2}",
                r.model, r.pass, r.t, r.batch, r.median_us, r.ratio
            );
        }
        let conv = convolution_check(&cfg.bench.t_list, n, cfg.seed)?;
        write_rows(&man.artifact("conv_check.csv"), &conv, &[])?;
    }
    if !a.skip_energy {
        let data = DatasetHandle::from_config(cfg).load::<T>()?;
        let spec = cfg.network_spec(data.inputs(), data.classes());
        let net = match &a.checkpoint {
            Some(path) => checkpoint_from_container::<T>(&Container::read(path)?, spec, path)?.0,
            None => Network::<T>::new(spec)?,
        };
        let samples = a.energy_samples.unwrap_or(data.test.len()).min(data.test.len());
        let test = data.test.slice(0, samples);
        let ev = evaluate_parallel(&net, &test, cfg.train.eval_batch_size, cfg.workers)?;
        let rows = energy_table(&net, &ev, test.x.time())?;
        write_rows(&man.artifact("energy.csv"), &rows, &[])?;
        let per_layer = ev.layer_density();
        let density: Vec<DensityRow> = (0..ev.spikes.len())
            .map(|i| DensityRow {
                layer: format!("block{i}"),
                spikes: ev.spikes[i],
                neuron_steps: ev.neuron_steps[i],
                density: per_layer[i],
            })
            .collect();
        write_rows(
            &man.artifact("density.csv"),
            &density,
            &["layer", "spikes", "neuron_steps", "density"],
        )?;
        if let Some(total) = rows.last() {
            println!(
                "energy over {samples} samples: {:.3} pJ per sample, accuracy {:.4}",
                total.picojoules,
                ev.accuracy()
            );
        }
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct ParamEntry {
    name: String,
    max_rel_err: f64,
    argmax: usize,
    coords: usize,
}

#[derive(Debug, Serialize)]
struct GradcheckCase {
    seed: u64,
    model: &'static str,
    eps: f64,
    tolerance: f64,
    max_rel_err: f64,
    pass: bool,
    params: Vec<ParamEntry>,
}

#[derive(Debug, Serialize)]
struct GradcheckReport {
    pass: bool,
    worst: f64,
    cases: Vec<GradcheckCase>,
}

fn gradcheck_case(seed: u64, model: &'static str, eps: f64, tolerance: f64, r: FdReport) -> GradcheckCase {
    let max = r.max_rel_err();
    GradcheckCase {
        seed,
        model,
        eps,
        tolerance,
        max_rel_err: max,
        pass: max <= tolerance,
        params: r
            .params
            .into_iter()
            .map(|p| ParamEntry {
                name: p.name,
                max_rel_err: p.max_rel_err,
                argmax: p.argmax,
                coords: p.coords,
            })
            .collect(),
    }
}

fn gradcheck(cfg: &RunConfig, man: &mut RunManifest) -> Result<()> {
    let g = &cfg.gradcheck;
    let n = cfg.model.compartment_count();
    let mut layer = cfg.layer_config();
    layer.mode = ExecMode::Parallel;
    let mut cases = Vec::new();
    for k in 0..g.seeds as u64 {
        let seed = cfg.seed.wrapping_add(k);
        let mut model = FdModel::sample(seed, n, 2, g.features, g.batch, g.time)?;
        model.layer = layer;
        model.surrogate.gamma_width = cfg.model.surrogate_width;
        let smooth = fd_check(&model, g.eps)?;
        cases.push(gradcheck_case(seed, "smoothed", g.eps, g.tolerance, smooth));
        model.layer.clamp_ih = false;
        model.linear = true;
        let linear = fd_check(&model, g.linear_eps)?;
        cases.push(gradcheck_case(seed, "linear", g.linear_eps, g.linear_tolerance, linear));
    }
    let report = GradcheckReport {
        pass: cases.iter().all(|c| c.pass),
        worst: cases.iter().map(|c| c.max_rel_err / c.tolerance).fold(0.0, f64::max),
        cases,
    };
    write_json(&man.artifact("gradcheck.json"), &report)?;
    for c in &report.cases {
        println!(
            "seed {:>3} {:<8} max relative error {:.3e} (tolerance {:.0e}) {}",
            c.seed,
            c.model,
            c.max_rel_err,
            c.tolerance,
            if c.pass { "ok" } else { "FAIL" }
        );
    }
    if !report.pass {
        let bad = report.cases.iter().filter(|c| !c.pass).count();
        return Err(Error::Validation(format!("gradient check failed on {bad} case(s)")));
    }
    Ok(())
}

fn impulse(cfg: &RunConfig, a: &ImpulseArgs, man: &mut RunManifest) -> Result<()> {
    let p: PmsnParams<f64> = layer_params(cfg, a.params.as_deref(), cfg.model.width)?;
    if a.neuron >= p.features {
        return Err(Error::Validation(format!(
            "--neuron {} is out of range for {} neurons",
            a.neuron, p.features
        )));
    }
    let rows = impulse_trace(&p, a.neuron, a.steps)?;
    write_rows(&man.artifact("impulse.csv"), &rows, &["t", "compartment", "value"])?;
    let modes = mode_table(&p);
    write_rows(
        &man.artifact("modes.csv"),
        &modes,
        &["neuron", "mode", "damping", "frequency"],
    )?;
    let damping: Vec<f64> = modes.iter().map(|m| m.damping).collect();
    let frequency: Vec<f64> = modes.iter().map(|m| m.frequency.abs()).collect();
    let dt: Vec<f64> = p.dt.clone();
    let gamma: Vec<f64> = p.gamma_n.clone();
    let mut hist = histogram("damping", &damping, a.bins);
    hist.extend(histogram("frequency", &frequency, a.bins));
    hist.extend(histogram("dt", &dt, a.bins));
    hist.extend(histogram("gamma_n", &gamma, a.bins));
    write_rows(
        &man.artifact("histograms.csv"),
        &hist,
        &["quantity", "bin_lo", "bin_hi", "count"],
    )?;
    for m in modes.iter().filter(|m| m.neuron == a.neuron) {
        let period = if m.frequency != 0.0 {
            format!("{:.2} steps", 1.0 / m.frequency.abs())
        } else {
            "none".into()
        };
        println!(
            "neuron {} mode {}: damping {:.4}, period {period}",
            m.neuron, m.mode, m.damping
        );
    }
    Ok(())
}
