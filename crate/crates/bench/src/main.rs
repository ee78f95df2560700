use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, ValueEnum};

use odt_bench::report::{write_matrix, write_sweep, Format};
use odt_bench::{
    default_baseline, parse_sweep, run_batch_sweep_on, run_matrix_on, BenchCase, MatrixSpec, ModelSource, RunOptions,
};
use odt_core::{EvalConfig, Layout, LeafStrategy, SyntheticSpec, TailPolicy, VectorWidth, BLOCK_SIZES};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Preset {
    Desk,
    #[value(name = "epsilon8k64")]
    Epsilon8k64,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum LayoutArg {
    ObjectMajor,
    FeatureMajor,
    Both,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum TailArg {
    Scalar,
    Padded,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Md,
    Tsv,
}

/// Single-core timing of oblivious tree ensemble evaluation strategies.
///
/// Every case is checked against the scalar oracle before it is timed; the
/// exit code is nonzero if any check fails. Pin the process to one core
/// externally (for example with `taskset -c 2`) for stable numbers.
#[derive(Debug, Parser)]
#[command(name = "odt-bench", version)]
struct Args {
    /// Load a model document instead of generating one.
    #[arg(long, conflicts_with = "synthetic")]
    model: Option<PathBuf>,

    /// Generate a model: n_features,borders,trees,depth,seed.
    #[arg(long, value_parser = parse_synthetic)]
    synthetic: Option<SyntheticSpec>,

    /// Synthetic model shape when neither --model nor --synthetic is given.
    #[arg(long, value_enum, default_value_t = Preset::Desk)]
    preset: Preset,

    #[arg(long, value_enum, default_value_t = LayoutArg::Both)]
    layout: LayoutArg,

    /// 64, 128, 256, 512 or all.
    #[arg(long, default_value = "all", value_parser = parse_blocks)]
    block: Blocks,

    /// naive, gather, permute64, permute16, naive16 or all.
    #[arg(long, default_value = "all", value_parser = parse_strategies)]
    strategy: Strategies,

    /// scalar, 128, 256, 512 or auto (every host width; the widest one for sweeps).
    #[arg(long, default_value = "auto", value_parser = parse_width)]
    width: WidthArg,

    #[arg(long, value_enum, default_value_t = TailArg::Scalar)]
    tail: TailArg,

    /// Objects per batch.
    #[arg(long, default_value_t = 1024, conflicts_with = "sweep")]
    batch: usize,

    /// Batch sizes a..b or a..b:step (inclusive) for a single configuration.
    #[arg(long, value_parser = |s: &str| parse_sweep(s).map(Sweep))]
    sweep: Option<Sweep>,

    /// Timed repetitions per case (at least 3).
    #[arg(long, default_value_t = 50)]
    reps: usize,

    /// Untimed runs before timing.
    #[arg(long, default_value_t = 2)]
    warmup: usize,

    /// Seed for the generated feature values.
    #[arg(long, default_value_t = 42)]
    seed: u64,

    /// Case id that d is computed against (see --list-cases).
    #[arg(long)]
    baseline: Option<String>,

    /// Print the case ids of the selected matrix and exit.
    #[arg(long)]
    list_cases: bool,

    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Defaults to md for the matrix and tsv for sweeps.
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
}

#[derive(Debug, Clone)]
struct Blocks(Option<Vec<usize>>);

#[derive(Debug, Clone)]
struct Strategies(Option<Vec<LeafStrategy>>);

#[derive(Debug, Clone)]
struct Sweep(Vec<usize>);

#[derive(Debug, Clone, Copy)]
struct WidthArg(Option<VectorWidth>);

fn parse_synthetic(s: &str) -> Result<SyntheticSpec, String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let [f, b, t, d, seed] = parts.as_slice() else {
        return Err("expected n_features,borders,trees,depth,seed".into());
    };
    let num = |x: &str| x.parse::<usize>().map_err(|e| format!("{x:?}: {e}"));
    Ok(SyntheticSpec {
        n_features: num(f)?,
        borders_per_feature: num(b)?,
        n_trees: num(t)?,
        depth: num(d)?,
        seed: seed.parse().map_err(|e| format!("{seed:?}: {e}"))?,
    })
}

fn parse_blocks(s: &str) -> Result<Blocks, String> {
    if s == "all" {
        return Ok(Blocks(None));
    }
    match s.parse::<usize>() {
        Ok(b) if BLOCK_SIZES.contains(&b) => Ok(Blocks(Some(vec![b]))),
        _ => Err(format!("block must be one of {BLOCK_SIZES:?} or all")),
    }
}

fn parse_strategies(s: &str) -> Result<Strategies, String> {
    if s == "all" {
        return Ok(Strategies(None));
    }
    Ok(Strategies(Some(vec![s.parse()?])))
}

fn parse_width(s: &str) -> Result<WidthArg, String> {
    if s == "auto" {
        return Ok(WidthArg(None));
    }
    Ok(WidthArg(Some(s.parse()?)))
}

impl Args {
    fn source(&self) -> ModelSource {
        match (&self.model, &self.synthetic) {
            (Some(path), _) => ModelSource::File(path.clone()),
            (None, Some(spec)) => ModelSource::Synthetic(*spec),
            (None, None) => ModelSource::Synthetic(match self.preset {
                Preset::Desk => SyntheticSpec::desk(1),
                Preset::Epsilon8k64 => SyntheticSpec::epsilon8k64(1),
            }),
        }
    }

    fn layouts(&self) -> Vec<Layout> {
        match self.layout {
            LayoutArg::ObjectMajor => vec![Layout::ObjectMajor],
            LayoutArg::FeatureMajor => vec![Layout::FeatureMajor],
            LayoutArg::Both => vec![Layout::ObjectMajor, Layout::FeatureMajor],
        }
    }

    fn tail(&self) -> TailPolicy {
        match self.tail {
            TailArg::Scalar => TailPolicy::ScalarTail,
            TailArg::Padded => TailPolicy::PaddedGroup,
        }
    }

    fn matrix(&self) -> MatrixSpec {
        MatrixSpec {
            strategies: self.strategy.0.clone().unwrap_or_else(|| LeafStrategy::ALL.to_vec()),
            widths: self.width.0.map_or_else(VectorWidth::supported, |w| vec![w]),
            blocks: self.block.0.clone().unwrap_or_else(|| BLOCK_SIZES.to_vec()),
            layouts: self.layouts(),
            tail_policy: self.tail(),
            batch_size: self.batch,
            repetitions: self.reps,
        }
    }

    /// The single configuration a sweep runs; "all" falls back to naive,
    /// block 128 and object-major.
    fn sweep_config(&self) -> Result<(EvalConfig, Layout)> {
        let strategy = match &self.strategy.0 {
            Some(s) => s[0],
            None => LeafStrategy::Naive,
        };
        let width = match self.width.0 {
            Some(w) => w,
            None => match VectorWidth::supported()
                .into_iter()
                .rev()
                .find(|&w| strategy.runs_on_host(w))
            {
                Some(w) => w,
                None => bail!("no width on this host runs {strategy}"),
            },
        };
        let block_size = self.block.0.as_ref().map_or(128, |b| b[0]);
        let layout = match self.layout {
            LayoutArg::FeatureMajor => Layout::FeatureMajor,
            _ => Layout::ObjectMajor,
        };
        let config = EvalConfig {
            block_size,
            width,
            strategy,
            tail_policy: self.tail(),
        };
        config
            .validate()
            .with_context(|| format!("sweep configuration {config}"))?;
        Ok((config, layout))
    }

    fn format(&self, sweep: bool) -> Format {
        match self.format {
            Some(FormatArg::Csv) => Format::Csv,
            Some(FormatArg::Md) => Format::Markdown,
            Some(FormatArg::Tsv) => Format::Tsv,
            None if sweep => Format::Tsv,
            None => Format::Markdown,
        }
    }
}

fn output(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

fn run(args: Args) -> Result<usize> {
    let options = RunOptions {
        warmup: args.warmup,
        feature_seed: args.seed,
    };
    let source = args.source();

    if args.list_cases {
        for case in args.matrix().cases() {
            println!("{}", case.id());
        }
        return Ok(0);
    }

    let model = source.load()?;
    let name = source.to_string();
    if let Some(Sweep(batches)) = &args.sweep {
        let (config, layout) = args.sweep_config()?;
        eprintln!("sweeping {} batch sizes with {config} {}", batches.len(), layout.name());
        let table = run_batch_sweep_on(&model, &name, config, layout, batches, args.reps, options)?;
        let mut out = output(&args.out)?;
        write_sweep(&table, args.format(true), &mut out)?;
        out.flush()?;
        return Ok(table.failures());
    }

    let cases: Vec<BenchCase> = args.matrix().cases();
    if cases.is_empty() {
        bail!("no strategy in the selection has a kernel at the selected widths");
    }
    let baseline = match &args.baseline {
        Some(b) => b.clone(),
        None => default_baseline(&cases).expect("cases is non-empty"),
    };
    eprintln!("running {} cases on {name}, baseline {baseline}", cases.len());
    let report = run_matrix_on(&model, &name, &cases, &baseline, options)?;
    let mut out = output(&args.out)?;
    write_matrix(&report, args.format(false), &mut out)?;
    out.flush()?;
    Ok(report.failures())
}

fn main() -> ExitCode {
    match run(Args::parse()) {
        Ok(0) => ExitCode::SUCCESS,
        Ok(failures) => {
            eprintln!("error: {failures} case(s) disagreed with the oracle");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
