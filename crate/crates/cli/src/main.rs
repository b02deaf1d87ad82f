mod config;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use layerwise::cascade::FeatureMode;
use layerwise::hilbert::{self, CellCoord, HilbertIndex};
use layerwise::layernet::train_layernet_ge;
use layerwise::shallow::{fit_samples, Optimizer};
use layerwise::study::{self, render_report, RateReport, ReportFormat};
use layerwise::{corpus, make_grid, train_cascade, train_layernet_lt, Activation, ChainConfig, Error, FitConfig, Result, TargetFunction};

use config::{pick, FileConfig};

#[derive(Parser)]
#[command(name = "layerwise", version, about = "Sup-norm approximation fits and rate studies on [-1, 1]^n")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Base random seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Grid points per axis (defaults depend on the dimension).
    #[arg(long, global = true)]
    grid_points: Option<usize>,
    /// Flat TOML file with defaults for any flag.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory to write output files into; stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Study report format: csv or structured.
    #[arg(long, global = true)]
    format: Option<String>,
    #[arg(long, global = true)]
    restarts: Option<usize>,
    #[arg(long, global = true)]
    iterations: Option<usize>,
    #[arg(long, global = true)]
    step_size: Option<f64>,
    #[arg(long, global = true)]
    step_decay: Option<f64>,
    #[arg(long, global = true)]
    init_scale: Option<f64>,
    /// Activation of the trained units.
    #[arg(long, global = true)]
    activation: Option<Activation>,
    #[arg(long, global = true)]
    optimizer: Option<Optimizer>,
    /// Store wall-clock runtimes in study reports (breaks byte-identical reruns).
    #[arg(long, global = true)]
    record_runtime: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Hilbert-curve index conversions.
    Hilbert {
        #[command(subcommand)]
        verb: HilbertVerb,
    },
    /// Fit one shallow network.
    FitShallow {
        #[arg(long)]
        function: Option<String>,
        #[arg(long)]
        units: Option<usize>,
    },
    /// Train a layer-wise residual cascade; emits the error trace.
    FitCascade {
        #[arg(long)]
        function: Option<String>,
        #[arg(long)]
        depth: Option<usize>,
        #[arg(long)]
        width: Option<usize>,
        #[arg(long)]
        mode: Option<FeatureMode>,
    },
    /// Train an invertible layer network, Hilbert-reduced when width < n.
    FitLayernet {
        #[command(flatten)]
        chain: ChainArgs,
        #[arg(long)]
        function: Option<String>,
        #[arg(long)]
        depth: Option<usize>,
        #[arg(long)]
        width: Option<usize>,
        #[arg(long)]
        level: Option<u32>,
    },
    /// Error against shallow width.
    RateStudy {
        #[arg(long, value_delimiter = ',')]
        functions: Option<Vec<String>>,
        #[arg(long, value_delimiter = ',')]
        widths: Option<Vec<usize>>,
    },
    /// Cascade error against depth.
    DepthStudy {
        #[arg(long, value_delimiter = ',')]
        functions: Option<Vec<String>>,
        #[arg(long)]
        max_depth: Option<usize>,
        #[arg(long)]
        width: Option<usize>,
        #[arg(long)]
        mode: Option<FeatureMode>,
    },
    /// Hilbert-reduced layer network error against curve level.
    KStudy {
        #[command(flatten)]
        chain: ChainArgs,
        #[arg(long)]
        function: Option<String>,
        #[arg(long)]
        width: Option<usize>,
        #[arg(long, value_delimiter = ',')]
        levels: Option<Vec<u32>>,
        #[arg(long)]
        depth: Option<usize>,
    },
    /// Built-in target functions.
    Corpus {
        #[command(subcommand)]
        verb: CorpusVerb,
    },
}

#[derive(Subcommand)]
enum HilbertVerb {
    /// Cell coordinates (groups of `dims` integers) to indices.
    Encode {
        #[arg(long)]
        dims: Option<usize>,
        #[arg(long)]
        level: Option<u32>,
        coords: Vec<u64>,
    },
    /// Indices to cell coordinates.
    Decode {
        #[arg(long)]
        dims: Option<usize>,
        #[arg(long)]
        level: Option<u32>,
        indices: Vec<u64>,
    },
    /// Points of [0, 1]^d (groups of `dims` values) to index and cell centre.
    Snap {
        #[arg(long)]
        dims: Option<usize>,
        #[arg(long)]
        level: Option<u32>,
        #[arg(allow_hyphen_values = true)]
        values: Vec<f64>,
    },
}

#[derive(Subcommand)]
enum CorpusVerb {
    List,
}

#[derive(Args)]
struct ChainArgs {
    /// Minimum singular value of every layer map.
    #[arg(long)]
    tau: Option<f64>,
    /// Largest accepted reconstruction error of a layer map.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    mode: Option<FeatureMode>,
    /// Activation of the layer maps (tanh or logistic).
    #[arg(long)]
    chain_activation: Option<Activation>,
}

struct Context {
    file: FileConfig,
    fit: FitConfig,
    grid_points: Option<usize>,
    out: Option<PathBuf>,
    format: ReportFormat,
    record_runtime: bool,
}

impl Context {
    fn new(g: Global) -> Result<Self> {
        let file = match &g.config {
            Some(path) => FileConfig::load(path)?,
            None => FileConfig::default(),
        };
        let d = FitConfig::default();
        let fit = FitConfig {
            seed: pick(g.seed, file.seed, d.seed),
            restarts: pick(g.restarts, file.restarts, d.restarts),
            iterations: pick(g.iterations, file.iterations, d.iterations),
            step_size: pick(g.step_size, file.step_size, d.step_size),
            step_decay: pick(g.step_decay, file.step_decay, d.step_decay),
            init_scale: pick(g.init_scale, file.init_scale, d.init_scale),
            activation: pick(g.activation, file.activation, d.activation),
            optimizer: pick(g.optimizer, file.optimizer, d.optimizer),
        };
        fit.validate()?;
        let format = pick(g.format, file.format.clone(), "csv".into()).parse()?;
        Ok(Self {
            fit,
            grid_points: g.grid_points.or(file.grid_points),
            out: g.out.or_else(|| file.out.clone()),
            format,
            record_runtime: g.record_runtime || file.record_runtime.unwrap_or(false),
            file,
        })
    }

    fn study(&self) -> study::StudyConfig {
        study::StudyConfig {
            fit: self.fit.clone(),
            points_per_dim: self.grid_points,
            record_runtime: self.record_runtime,
        }
    }

    fn grid(&self, n: usize) -> Result<layerwise::Grid> {
        make_grid(n, self.grid_points.unwrap_or_else(|| layerwise::grid::default_points_per_dim(n)))
    }

    fn function(&self, flag: Option<String>, default: &str) -> Result<TargetFunction> {
        corpus::by_name(&pick(flag, self.file.function.clone(), default.into()))
    }

    fn functions(&self, flag: Option<Vec<String>>) -> Result<Vec<TargetFunction>> {
        let names = pick(
            flag,
            self.file.functions.clone(),
            corpus::standard().into_iter().map(|f| f.name).collect(),
        );
        names.iter().map(|n| corpus::by_name(n)).collect()
    }

    fn chain(&self, a: ChainArgs) -> ChainConfig {
        let d = ChainConfig::default();
        ChainConfig {
            tau: pick(a.tau, self.file.tau, d.tau),
            tol: pick(a.tol, self.file.tol, d.tol),
            activation: pick(a.chain_activation, self.file.chain_activation, d.activation),
            mode: pick(a.mode, self.file.mode, d.mode),
        }
    }

    fn hilbert_shape(&self, dims: Option<usize>, level: Option<u32>) -> Result<(usize, u32)> {
        let dims = dims.or(self.file.dims);
        let level = level.or(self.file.level);
        match (dims, level) {
            (Some(d), Some(k)) => Ok((d, k)),
            _ => Err(Error::InvalidArgument("hilbert needs --dims and --level".into())),
        }
    }

    /// Writes `text` to `<out>/<name>` and reports the path, or prints it when no output
    /// directory is set.
    fn emit(&self, name: &str, text: &str) -> Result<()> {
        match &self.out {
            Some(dir) => {
                fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
                let path = dir.join(name);
                fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
                println!("{}", path.display());
                Ok(())
            }
            None => {
                let mut stdout = std::io::stdout().lock();
                stdout
                    .write_all(text.as_bytes())
                    .map_err(|e| Error::io(Path::new("<stdout>"), e))
            }
        }
    }

    fn emit_reports(&self, prefix: &str, reports: &[RateReport]) -> Result<()> {
        for r in reports {
            let name = format!("{prefix}_{}.{}", r.function_name, self.format.extension());
            self.emit(&name, &render_report(r, self.format)?)?;
        }
        Ok(())
    }
}

fn groups<T: Copy>(values: &[T], dims: usize) -> Result<std::slice::ChunksExact<'_, T>> {
    if dims == 0 || values.is_empty() || values.len() % dims != 0 {
        return Err(Error::InvalidArgument(format!(
            "expected a non-empty multiple of {dims} values, got {}",
            values.len()
        )));
    }
    Ok(values.chunks_exact(dims))
}

fn join<T: std::fmt::Display>(values: impl IntoIterator<Item = T>) -> String {
    values.into_iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" ")
}

fn run_hilbert(ctx: &Context, verb: HilbertVerb) -> Result<()> {
    let mut lines = Vec::new();
    match verb {
        HilbertVerb::Encode { dims, level, coords } => {
            let (d, k) = ctx.hilbert_shape(dims, level)?;
            for cell in groups(&coords, d)? {
                let idx = hilbert::encode(&CellCoord::new(k, cell.to_vec())?)?;
                lines.push(idx.value().to_string());
            }
        }
        HilbertVerb::Decode { dims, level, indices } => {
            let (d, k) = ctx.hilbert_shape(dims, level)?;
            for &v in groups(&indices, 1)?.flatten() {
                let cell = hilbert::decode(&HilbertIndex::new(v, d, k)?)?;
                lines.push(join(cell.coords()));
            }
        }
        HilbertVerb::Snap { dims, level, values } => {
            let (d, k) = ctx.hilbert_shape(dims, level)?;
            for x in groups(&values, d)? {
                let (idx, centre) = hilbert::snap_point(x, k)?;
                lines.push(format!("{} {}", idx.value(), join(centre)));
            }
        }
    }
    lines.push(String::new());
    ctx.emit("hilbert.txt", &lines.join("\n"))
}

fn run(cli: Cli) -> Result<()> {
    let ctx = Context::new(cli.global)?;
    let file = &ctx.file;
    match cli.command {
        Command::Hilbert { verb } => run_hilbert(&ctx, verb),
        Command::FitShallow { function, units } => {
            let f = ctx.function(function, "tanh1d")?;
            let units = pick(units, file.units, 8);
            let grid = ctx.grid(f.n)?;
            let targets = grid.points().evaluate(&f.as_fn())?;
            let fit = fit_samples(grid.points(), &targets, units, &ctx.fit, None)?;
            eprintln!("measured_error {:e}", fit.error);
            ctx.emit(&format!("shallow_{}.model", f.name), &fit.net.to_string())
        }
        Command::FitCascade { function, depth, width, mode } => {
            let f = ctx.function(function, "tanh1d")?;
            let depth = pick(depth, file.depth, 4);
            let width = pick(width, file.width, 8);
            let mode = pick(mode, file.mode, FeatureMode::XPlusPrevApprox);
            let grid = ctx.grid(f.n)?;
            let fit = train_cascade(&f, grid.points(), depth, width, mode, &ctx.fit)?;
            ctx.emit(&format!("cascade_{}_trace.csv", f.name), &fit.trace.to_csv())?;
            if ctx.out.is_some() {
                ctx.emit(&format!("cascade_{}.model", f.name), &fit.model.to_string())?;
            }
            Ok(())
        }
        Command::FitLayernet { chain, function, depth, width, level } => {
            let f = ctx.function(function, "plane2d")?;
            let depth = pick(depth, file.depth, 3);
            let width = pick(width, file.width, 1);
            let chain = ctx.chain(chain);
            let grid = ctx.grid(f.n)?;
            let (fit, bound) = if width >= f.n {
                (train_layernet_ge(&f, grid.points(), depth, width, &ctx.fit, &chain)?, None)
            } else {
                let level = pick(level, file.level, 6);
                let (fit, bound) = train_layernet_lt(&f, &grid, depth, width, level, &ctx.fit, &chain)?;
                (fit, Some(bound))
            };
            match bound {
                Some(b) => {
                    let mut json = serde_json::to_string_pretty(&b)
                        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
                    json.push('\n');
                    ctx.emit(&format!("layernet_{}_bound_report.json", f.name), &json)?;
                }
                None => ctx.emit(&format!("layernet_{}_trace.csv", f.name), &fit.trace.to_csv())?,
            }
            if ctx.out.is_some() {
                ctx.emit(&format!("layernet_{}.model", f.name), &fit.model.to_string())?;
            }
            Ok(())
        }
        Command::RateStudy { functions, widths } => {
            let fs = ctx.functions(functions)?;
            let widths = pick(widths, file.widths.clone(), vec![2, 4, 8, 16, 32]);
            ctx.emit_reports("rate", &study::rate_study_shallow(&fs, &widths, &ctx.study())?)
        }
        Command::DepthStudy { functions, max_depth, width, mode } => {
            let fs = ctx.functions(functions)?;
            let max_depth = pick(max_depth, file.max_depth, 4);
            let width = pick(width, file.width, 8);
            let mode = pick(mode, file.mode, FeatureMode::XPlusPrevApprox);
            ctx.emit_reports("depth", &study::depth_study(&fs, max_depth, width, mode, &ctx.study())?)
        }
        Command::KStudy { chain, function, width, levels, depth } => {
            let f = ctx.function(function, "plane2d")?;
            let width = pick(width, file.width, 1);
            let levels = pick(levels, file.levels.clone(), vec![4, 6, 8]);
            let depth = pick(depth, file.depth, 3);
            let chain = ctx.chain(chain);
            let report = study::hilbert_k_study(&f, width, &levels, depth, &ctx.study(), &chain)?;
            ctx.emit_reports("k", &[report])
        }
        Command::Corpus { verb: CorpusVerb::List } => {
            let mut text = String::from("name n smoothness_m lipschitz sobolev_scaled\n");
            for name in corpus::names() {
                let f = corpus::by_name(&name)?;
                let l = f.lipschitz.map_or_else(|| "-".to_string(), |l| format!("{l:e}"));
                text.push_str(&format!("{} {} {} {} {}\n", f.name, f.n, f.smoothness_m, l, f.sobolev_scaled));
            }
            ctx.emit("corpus.txt", &text)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("").trim_start_matches("error: ");
            eprintln!("error: usage: {first}");
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}: {}", e.category(), e.to_string().replace('\n', " "));
            ExitCode::FAILURE
        }
    }
}
