//! `coldscatter` command-line front end.
//!
//! Exit status: 0 success, 1 I/O failure, 2 configuration error,
//! 3 numerical failure, 4 resource cap.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use coldscatter::ensemble::{
    average_decay, average_spectrum, configuration_modes, holstein_estimate, single_decay, single_spectrum,
};
use coldscatter::microscopic::tail_rate;
use coldscatter::microscopic::{MicroOptions, ModeCache};
use coldscatter::mie::mie_spectrum;
use coldscatter::output::{
    averaged_decay_csv, averaged_spectrum_csv, comparison_csv, decay_csv, fmt_f64, permittivity_csv, spectrum_csv,
    write_json, Csv, RunManifest,
};
use coldscatter::permittivity::{
    coupling_strength, critical_density, negative_window, permittivity_scan, CouplingStrength,
};
use coldscatter::{AngularMomentum, Error, SampleSpec, DEFAULT_MAX_DIM};

#[derive(Parser, Debug)]
#[command(
    name = "coldscatter",
    version,
    about = "Light scattering from dense cold atomic clouds"
)]
struct Cli {
    /// Worker threads (default: all cores). Outputs do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Largest accepted dense dimension 3N.
    #[arg(long, global = true, default_value_t = DEFAULT_MAX_DIM)]
    max_dim: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Scenario {
    /// Scenario file (TOML, or JSON with a `.json` extension).
    #[arg(long)]
    config: PathBuf,
}

#[derive(Args, Debug, Clone)]
struct Micro {
    /// Minimum pair distance in lambdabar.
    #[arg(long, default_value_t = 0.0)]
    min_separation: f64,
    /// Do not read or write the eigendecomposition cache.
    #[arg(long)]
    no_cache: bool,
}

#[derive(Args, Debug, Clone)]
struct TimeGrid {
    /// Last time in 1/gamma.
    #[arg(long, default_value_t = 80.0)]
    t_max: f64,
    /// Time step in 1/gamma.
    #[arg(long, default_value_t = 0.5)]
    t_step: f64,
    /// Fit window for the tail rate, `t1,t2`.
    #[arg(long, value_delimiter = ',', default_values_t = [30.0, 60.0])]
    tail_window: Vec<f64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Self-consistent permittivity on the scenario's detuning grid.
    Permittivity(Scenario),
    /// Mie cross sections on the detuning grid.
    MieSpectrum(Scenario),
    /// Microscopic cross sections of one configuration.
    MicroSpectrum {
        #[command(flatten)]
        scenario: Scenario,
        #[command(flatten)]
        micro: Micro,
        #[arg(long, default_value_t = 0)]
        config_index: u64,
    },
    /// Collective eigenmodes of one configuration.
    Modes {
        #[command(flatten)]
        scenario: Scenario,
        #[command(flatten)]
        micro: Micro,
        #[arg(long, default_value_t = 0)]
        config_index: u64,
    },
    /// Fluorescence decay of one configuration after a short pulse.
    Decay {
        #[command(flatten)]
        scenario: Scenario,
        #[command(flatten)]
        micro: Micro,
        #[command(flatten)]
        time: TimeGrid,
        #[arg(long, default_value_t = 0)]
        config_index: u64,
    },
    /// Configuration averages.
    Average {
        #[command(subcommand)]
        what: Average,
    },
    /// Smallest density with a negative-permittivity window.
    CriticalDensity {
        #[arg(long, default_value_t = 0.0)]
        f_ground: f64,
        #[arg(long, default_value_t = 1.0)]
        f_excited: f64,
    },
    /// Mie and averaged microscopic spectra side by side.
    Compare {
        #[command(flatten)]
        scenario: Scenario,
        #[command(flatten)]
        micro: Micro,
        /// Number of configurations (default: the scenario's n_configs).
        #[arg(long)]
        configs: Option<usize>,
    },
}

#[derive(Subcommand, Debug)]
enum Average {
    Spectrum {
        #[command(flatten)]
        scenario: Scenario,
        #[command(flatten)]
        micro: Micro,
        #[arg(long)]
        configs: Option<usize>,
    },
    Decay {
        #[command(flatten)]
        scenario: Scenario,
        #[command(flatten)]
        micro: Micro,
        #[command(flatten)]
        time: TimeGrid,
        #[arg(long)]
        configs: Option<usize>,
    },
}

fn micro_options(m: &Micro, max_dim: usize) -> MicroOptions {
    MicroOptions {
        min_separation: m.min_separation,
        max_dim,
        cache: (!m.no_cache).then(ModeCache::from_env),
    }
}

fn time_grid(t: &TimeGrid) -> Result<Vec<f64>, Error> {
    if !(t.t_max > 0.0 && t.t_step > 0.0 && t.t_step <= t.t_max) {
        return Err(Error::Config("need 0 < t-step <= t-max".into()));
    }
    if t.tail_window.len() != 2 {
        return Err(Error::Config("tail-window takes two times, `t1,t2`".into()));
    }
    let n = (t.t_max / t.t_step).round() as usize;
    Ok((0..=n).map(|k| k as f64 * t.t_step).collect())
}

fn exit_code(e: &Error) -> u8 {
    let mut cur = e;
    while let Error::Configuration { source, .. } = cur {
        cur = source;
    }
    match cur {
        Error::ResourceCap { .. } => 4,
        Error::Io(_) | Error::Cache(_) => 1,
        _ if e.is_config_error() => 2,
        _ => 3,
    }
}

struct Run {
    out: PathBuf,
    manifest: RunManifest,
    started: std::time::Instant,
}

impl Run {
    fn new(out: &Path, spec: Option<&SampleSpec>) -> Self {
        Run {
            out: out.to_owned(),
            manifest: RunManifest::new(std::env::args().collect(), spec),
            started: std::time::Instant::now(),
        }
    }

    fn csv(&mut self, name: &str, csv: &Csv) -> Result<(), Error> {
        let path = self.out.join(name);
        csv.write(&path)?;
        self.manifest.record(&path)
    }

    fn json<T: serde::Serialize>(&mut self, name: &str, value: &T) -> Result<(), Error> {
        let path = self.out.join(name);
        write_json(&path, value)?;
        self.manifest.record(&path)
    }

    fn finish(mut self) -> Result<(), Error> {
        self.manifest.wall_clock_seconds = self.started.elapsed().as_secs_f64();
        write_json(&self.out.join("manifest.json"), &self.manifest)
    }
}

fn coupling(spec: &SampleSpec) -> Result<CouplingStrength, Error> {
    coupling_strength(spec.eta(), spec.f_ground(), spec.f_excited())
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Permittivity(s) => {
            let spec = SampleSpec::load(&s.config)?;
            let mut run = Run::new(&cli.out, Some(&spec));
            let a = coupling(&spec)?;
            let points = run
                .manifest
                .time("permittivity", || permittivity_scan(&spec.detuning_values(), a))?;
            let grid = spec.detuning_values();
            let window = if grid.first().is_some_and(|&d| d <= -10.0) && grid.last().is_some_and(|&d| d >= 10.0) {
                Some(negative_window(a, &grid)?)
            } else {
                None
            };
            run.csv("permittivity.csv", &permittivity_csv(&points))?;
            run.json(
                "permittivity.json",
                &json!({
                    "spec": spec,
                    "coupling": a.value(),
                    "negative_window": window,
                    "max_residual": points.iter().map(|p| p.residual).fold(0.0, f64::max),
                    "columns": ["delta", "re_eps", "im_eps", "re_n", "im_n"],
                }),
            )?;
            run.finish()
        }
        Command::MieSpectrum(s) => {
            let spec = SampleSpec::load(&s.config)?;
            let mut run = Run::new(&cli.out, Some(&spec));
            let table = run.manifest.time("mie", || mie_spectrum(&spec))?;
            run.csv("mie_spectrum.csv", &spectrum_csv(&table))?;
            run.json(
                "mie_spectrum.json",
                &json!({ "method": table.method, "spec": spec, "n_configs": 1, "coupling": coupling(&spec)?.value() }),
            )?;
            run.finish()
        }
        Command::MicroSpectrum {
            scenario,
            micro,
            config_index,
        } => {
            let spec = SampleSpec::load(&scenario.config)?;
            let mut run = Run::new(&cli.out, Some(&spec));
            let opts = micro_options(&micro, cli.max_dim);
            let table = run
                .manifest
                .time("micro-spectrum", || single_spectrum(&spec, config_index, &opts))?;
            run.csv("micro_spectrum.csv", &spectrum_csv(&table))?;
            run.json(
                "micro_spectrum.json",
                &json!({
                    "method": table.method, "spec": spec, "config_index": config_index,
                    "n_atoms": spec.n_atoms()?, "min_separation": opts.min_separation,
                }),
            )?;
            run.finish()
        }
        Command::Modes {
            scenario,
            micro,
            config_index,
        } => {
            let spec = SampleSpec::load(&scenario.config)?;
            let mut run = Run::new(&cli.out, Some(&spec));
            let opts = micro_options(&micro, cli.max_dim);
            let (_, _, modes) = run
                .manifest
                .time("eigenmodes", || configuration_modes(&spec, config_index, &opts))?;
            let mut csv = Csv::new(&["index", "shift", "width"]);
            for (k, (s, w)) in modes.shifts().iter().zip(modes.widths()).enumerate() {
                csv.row(&[k.to_string(), fmt_f64(*s), fmt_f64(w)]);
            }
            run.csv("modes.csv", &csv)?;
            let widths = modes.widths();
            run.json(
                "modes.json",
                &json!({
                    "spec": spec, "config_index": config_index, "dim": modes.dim(),
                    "width_sum": widths.iter().sum::<f64>(),
                    "fraction_below_0.1": modes.fraction_below(0.1),
                    "biorthogonality_residual": modes.biorthogonality_residual(),
                }),
            )?;
            run.finish()
        }
        Command::Decay {
            scenario,
            micro,
            time,
            config_index,
        } => {
            let spec = SampleSpec::load(&scenario.config)?;
            let mut run = Run::new(&cli.out, Some(&spec));
            let opts = micro_options(&micro, cli.max_dim);
            let t = time_grid(&time)?;
            let trace = run
                .manifest
                .time("decay", || single_decay(&spec, config_index, &t, &opts))?;
            run.csv("decay.csv", &decay_csv(&trace))?;
            let window = (time.tail_window[0], time.tail_window[1]);
            let holstein = holstein_estimate(&spec, 0.0)?;
            run.manifest.notes.push(holstein.transport_model.clone());
            run.json(
                "decay.json",
                &json!({
                    "spec": spec, "config_index": config_index,
                    "tail_window": window,
                    "tail_rate": tail_rate(&trace, window).ok(),
                    "holstein": holstein,
                }),
            )?;
            run.finish()
        }
        Command::Average { what } => match what {
            Average::Spectrum {
                scenario,
                micro,
                configs,
            } => {
                let spec = SampleSpec::load(&scenario.config)?;
                let n = configs.unwrap_or(spec.n_configs());
                let mut run = Run::new(&cli.out, Some(&spec));
                let opts = micro_options(&micro, cli.max_dim);
                let ens = run
                    .manifest
                    .time("average-spectrum", || average_spectrum(&spec, n, &opts))?;
                run.csv("average_spectrum.csv", &averaged_spectrum_csv(&ens.table))?;
                run.json(
                    "average_spectrum.json",
                    &json!({
                        "method": ens.table.method, "spec": spec, "n_configs": n,
                        "relative_std": ens.relative_std(),
                    }),
                )?;
                run.finish()
            }
            Average::Decay {
                scenario,
                micro,
                time,
                configs,
            } => {
                let spec = SampleSpec::load(&scenario.config)?;
                let n = configs.unwrap_or(spec.n_configs());
                let mut run = Run::new(&cli.out, Some(&spec));
                let opts = micro_options(&micro, cli.max_dim);
                let t = time_grid(&time)?;
                let ens = run
                    .manifest
                    .time("average-decay", || average_decay(&spec, n, &t, &opts))?;
                run.csv(
                    "average_decay.csv",
                    &averaged_decay_csv(&ens.mean, &ens.population_stderr, &ens.intensity_stderr),
                )?;
                let window = (time.tail_window[0], time.tail_window[1]);
                let holstein = holstein_estimate(&spec, 0.0)?;
                run.manifest.notes.push(holstein.transport_model.clone());
                run.json(
                    "average_decay.json",
                    &json!({
                        "spec": spec, "n_configs": n, "tail_window": window,
                        "tail_rate": tail_rate(&ens.mean, window).ok(),
                        "holstein": holstein,
                    }),
                )?;
                run.finish()
            }
        },
        Command::CriticalDensity { f_ground, f_excited } => {
            let g = AngularMomentum::new(f_ground)?;
            let e = AngularMomentum::new(f_excited)?;
            let mut run = Run::new(&cli.out, None);
            let eta_c = run.manifest.time("critical-density", || critical_density(g, e))?;
            let mut csv = Csv::new(&["f_ground", "f_excited", "eta_c"]);
            csv.row(&[fmt_f64(f_ground), fmt_f64(f_excited), fmt_f64(eta_c)]);
            run.csv("critical_density.csv", &csv)?;
            println!("{eta_c:.6}");
            run.finish()
        }
        Command::Compare {
            scenario,
            micro,
            configs,
        } => {
            let spec = SampleSpec::load(&scenario.config)?;
            let n = configs.unwrap_or(spec.n_configs());
            let mut run = Run::new(&cli.out, Some(&spec));
            let opts = micro_options(&micro, cli.max_dim);
            let mie = run.manifest.time("mie", || mie_spectrum(&spec))?;
            let ens = run
                .manifest
                .time("average-spectrum", || average_spectrum(&spec, n, &opts))?;
            run.csv("compare.csv", &comparison_csv(&mie, &ens.table))?;
            run.json(
                "compare.json",
                &json!({ "spec": spec, "n_configs": n, "relative_std": ens.relative_std() }),
            )?;
            run.finish()
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
