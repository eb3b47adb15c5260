use clap::{Args, Parser, Subcommand, ValueEnum};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;
use switchsynth::abstraction::{discretize, validate, BuildOptions, Imdp};
use switchsynth::exec::Parallelism;
use switchsynth::format::{
    heatmap, parse_model, read_imdp, read_results, read_strategy, write_imdp, write_results, write_strategy, Model, Results,
};
use switchsynth::logic::{read_dfa, Dfa, DfaError};
use switchsynth::pipeline::{abstract_model, formula_dfa, SpecError};
use switchsynth::synthesis::{
    monte_carlo, refine_strategy, synthesize, verify_bounds, IterationOptions, SynthesisError, VerifyMode,
};

#[derive(Parser)]
#[command(name = "switchsynth", version, about = "IMDP abstraction and strategy synthesis for switched stochastic systems")]
struct Cli {
    /// Worker threads (1 runs sequentially).
    #[arg(long, global = true, env = "SWITCHSYNTH_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the IMDP abstraction of a model.
    Abstract {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Synthesize a switching strategy and bound its satisfaction probability.
    Synthesize {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        spec: Spec,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Where to write the product strategy.
        #[arg(long)]
        strategy_out: Option<PathBuf>,
    },
    /// Bound the satisfaction probability without a fixed strategy.
    Verify {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        spec: Spec,
        #[arg(long, value_enum, default_value_t = ModeArg::Pessimistic)]
        mode: ModeArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte Carlo estimate of the satisfaction probability under a strategy.
    Simulate {
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        spec: Spec,
        #[arg(long)]
        strategy: PathBuf,
        /// Initial state, comma separated.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        x0: Vec<f64>,
        /// Index of the initial mode.
        #[arg(long, default_value_t = 0)]
        mode: usize,
        #[arg(long, default_value_t = 10_000)]
        runs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Step cap for unbounded specifications.
        #[arg(long, default_value_t = 10_000)]
        max_steps: usize,
    },
    /// Write `x y p_lo` rows of one mode for plotting (2D models only).
    ExportHeatmap {
        #[arg(long)]
        results: PathBuf,
        #[arg(long, default_value_t = 0)]
        mode: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct Input {
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    imdp: Option<PathBuf>,
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct Spec {
    /// Formula, e.g. "!red U green" or "G<=10 X".
    #[arg(long, allow_hyphen_values = true)]
    formula: Option<String>,
    /// Automaton file, for specifications outside the built-in templates.
    #[arg(long)]
    dfa: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Pessimistic,
    Optimistic,
}

/// Error with its process exit code.
struct Failure {
    code: u8,
    msg: String,
}

impl Failure {
    fn model(msg: impl std::fmt::Display) -> Self {
        Self { code: 2, msg: msg.to_string() }
    }
    fn formula(msg: impl std::fmt::Display) -> Self {
        Self { code: 3, msg: msg.to_string() }
    }
    fn unsupported(msg: impl std::fmt::Display) -> Self {
        Self { code: 4, msg: msg.to_string() }
    }
    fn numerical(msg: impl std::fmt::Display) -> Self {
        Self { code: 5, msg: msg.to_string() }
    }
}

impl From<SpecError> for Failure {
    fn from(e: SpecError) -> Self {
        Failure::formula(e)
    }
}

impl From<SynthesisError> for Failure {
    fn from(e: SynthesisError) -> Self {
        match e {
            SynthesisError::UnknownAtom(_) => Failure::formula(e),
            _ => Failure::numerical(e),
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::model(format!("{}: {e}", path.display())))
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| Failure { code: 1, msg: format!("{}: {e}", p.display()) }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn load_model(path: &Path) -> Result<Model, Failure> {
    parse_model(&read(path)?).map_err(|e| Failure::model(format!("{}: {e}", path.display())))
}

fn build(model: &Model, par: Parallelism) -> Result<Imdp, Failure> {
    let opts = BuildOptions { parallelism: par, ..BuildOptions::default() };
    let (_, imdp) = abstract_model(model, &opts).map_err(Failure::model)?;
    Ok(imdp)
}

fn load_input(input: &Input, par: Parallelism) -> Result<Imdp, Failure> {
    match (&input.model, &input.imdp) {
        (Some(m), _) => build(&load_model(m)?, par),
        (None, Some(i)) => {
            let imdp = read_imdp(&read(i)?).map_err(|e| Failure::model(format!("{}: {e}", i.display())))?;
            if !validate(&imdp).is_valid() {
                return Err(Failure::model(format!("{}: invalid interval rows", i.display())));
            }
            Ok(imdp)
        }
        (None, None) => unreachable!("clap enforces one input"),
    }
}

fn region_names(atoms: &[String]) -> Vec<String> {
    atoms.iter().filter(|a| !a.starts_with('~')).cloned().collect()
}

fn load_spec(spec: &Spec, atoms: &[String]) -> Result<(Dfa, String), Failure> {
    match (&spec.formula, &spec.dfa) {
        (Some(f), _) => {
            let dfa = formula_dfa(f, &region_names(atoms)).map_err(|e| match e {
                SpecError::Dfa(DfaError::UnsupportedFormula(f)) => {
                    Failure::formula(format!("formula {f} has no built-in automaton; pass one with --dfa"))
                }
                e => Failure::from(e),
            })?;
            Ok((dfa, f.clone()))
        }
        (None, Some(p)) => {
            let dfa = read_dfa(&read(p)?).map_err(|e| Failure::formula(format!("{}: {e}", p.display())))?;
            Ok((dfa, format!("dfa:{}", p.display())))
        }
        (None, None) => unreachable!("clap enforces one specification"),
    }
}

fn iteration(par: Parallelism) -> IterationOptions {
    IterationOptions { parallelism: par, ..IterationOptions::default() }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let par = match cli.threads {
        Some(0) => return Err(Failure::model("--threads must be positive")),
        Some(1) => Parallelism::Sequential,
        Some(_n) => {
            #[cfg(feature = "parallel")]
            {
                // Fails only if a pool already exists, which is harmless.
                let _ = rayon::ThreadPoolBuilder::new().num_threads(_n).build_global();
            }
            Parallelism::default()
        }
        None => Parallelism::default(),
    };
    let start = Instant::now();
    match cli.command {
        Command::Abstract { model, out } => {
            let imdp = build(&load_model(&model)?, par)?;
            emit(out.as_deref(), &write_imdp(&imdp))?;
            eprintln!("states {} (+ sink), entries {}", imdp.states.len(), imdp.stats.entries);
        }
        Command::Synthesize { input, spec, out, strategy_out } => {
            let imdp = load_input(&input, par)?;
            let (dfa, label) = load_spec(&spec, &imdp.atoms)?;
            let o = synthesize(&imdp, &dfa, &iteration(par))?;
            let r = Results::new(&imdp, &label, &o.bounds, &o.actions, o.metrics, start.elapsed().as_secs_f64());
            emit(out.as_deref(), &write_results(&r))?;
            if let Some(p) = strategy_out {
                emit(Some(&p), &write_strategy(&o.strategy))?;
            }
            summary(&r);
        }
        Command::Verify { input, spec, mode, out } => {
            let imdp = load_input(&input, par)?;
            let (dfa, label) = load_spec(&spec, &imdp.atoms)?;
            let mode = match mode {
                ModeArg::Pessimistic => VerifyMode::Pessimistic,
                ModeArg::Optimistic => VerifyMode::Optimistic,
            };
            let (bounds, metrics) = verify_bounds(&imdp, &dfa, mode, &iteration(par))?;
            let actions = vec![0; imdp.n_states()];
            let r = Results::new(&imdp, &label, &bounds, &actions, metrics, start.elapsed().as_secs_f64());
            emit(out.as_deref(), &write_results(&r))?;
            summary(&r);
        }
        Command::Simulate { model, spec, strategy, x0, mode, runs, seed, max_steps } => {
            let model = load_model(&model)?;
            let m = model.system.dim();
            if x0.len() != m {
                return Err(Failure::model(format!("--x0 needs {m} coordinates")));
            }
            if mode >= model.system.modes.len() {
                return Err(Failure::model(format!("mode index {mode} out of range")));
            }
            let (dfa, _) = load_spec(&spec, &model.system.atoms())?;
            let st = read_strategy(&read(&strategy)?).map_err(|e| Failure::model(format!("{}: {e}", strategy.display())))?;
            let d = discretize(&model.system, &model.discretization).map_err(Failure::model)?;
            let imdp = build(&model, par)?;
            if st.n_imdp_states != imdp.n_states() || st.n_dfa_states != dfa.n_states {
                return Err(Failure::model("strategy does not match the model and specification"));
            }
            let c = refine_strategy(&model.system, &d, &imdp, &dfa, &st);
            let rep = monte_carlo(&c, &x0, mode, runs, seed, max_steps, par);
            println!("runs {}", rep.runs);
            println!("seed {seed}");
            println!("successes {}", rep.successes);
            println!("exits {}", rep.exits);
            match (rep.frequency, rep.wilson99) {
                (Some(f), Some((lo, hi))) => {
                    println!("frequency {f}");
                    println!("wilson99 {lo} {hi}");
                }
                _ => println!("frequency none"),
            }
        }
        Command::ExportHeatmap { results, mode, out } => {
            let r = read_results(&read(&results)?).map_err(|e| Failure::model(format!("{}: {e}", results.display())))?;
            let table = heatmap(&r, mode).ok_or_else(|| Failure::unsupported("heatmaps are only available for 2D models"))?;
            emit(out.as_deref(), &table)?;
        }
    }
    Ok(())
}

fn summary(r: &Results) {
    eprintln!(
        "states {}  eps_max {:.6}  eps_med {:.6}  eps_ave {:.6}  time {:.3}s",
        r.states.len(),
        r.metrics.max,
        r.metrics.median,
        r.metrics.average,
        r.wall_time
    );
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}
