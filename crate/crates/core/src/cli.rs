//! The `eprank` command line.
//!
//! Exit codes: 0 success, 1 data error (names the file and line), 2 usage or
//! configuration error (names the flag or path).

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::corpus::{self, Corpus, EntityDefinition, RecordFormat, YearFilter};
use crate::double_rank::{count_series, rank_descending, RankRounding};
use crate::error::Error;
use crate::fitting::{default_percentiles, fit_power_law, InterceptMode};
use crate::indicators::{self, AnalysisConfig, Cohort, DisplayProfile, IndicatorRow};
use crate::synth::{self, CitationModel, GeneratorConfig};

/// Environment variable naming a JSON file of analysis defaults.
pub const CONFIG_ENV: &str = "EPRANK_CONFIG";

#[derive(Debug, Parser)]
#[command(name = "eprank", version, about = "Percentile-based double-rank citation indicators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Validate a publications file and echo it in canonical form.
    Ingest(IngestArgs),
    /// Domestic indicator table (N, e_p, P(x0), P_top) per entity.
    Indicators(TableArgs),
    /// Indicator table for papers shared by pairs of entities.
    Collab(CollabArgs),
    /// Indicator table with P_top divided by a per-entity denominator.
    Percapita(TableArgs),
    /// Indicator rows per year, each year ranked against its own world.
    Timeseries(TimeseriesArgs),
    /// Empirical and fitted cumulative probability for one entity.
    Plotdata(PlotArgs),
    /// Generate a synthetic world with a planted entity.
    Synth(SynthArgs),
    /// Compare proportional tie counts with random-ordering oracles.
    Oracle(OracleArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum InputFormat {
    Csv,
    Jsonl,
}

impl From<InputFormat> for RecordFormat {
    fn from(f: InputFormat) -> Self {
        match f {
            InputFormat::Csv => RecordFormat::Csv,
            InputFormat::Jsonl => RecordFormat::Jsonl,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum TableFormat {
    Csv,
    Json,
}

#[derive(Debug, Args, Serialize)]
struct InputArgs {
    /// Publications file (CSV or JSONL); repeat to concatenate.
    #[arg(long = "input", required = true)]
    inputs: Vec<PathBuf>,
    /// Override format detection by extension.
    #[arg(long)]
    input_format: Option<InputFormat>,
    /// Keep only these years, e.g. `2014` or `2010-2014`.
    #[arg(long)]
    year: Option<String>,
}

#[derive(Debug, Args, Serialize)]
struct AnalysisArgs {
    /// JSON file of defaults for the flags below.
    #[arg(long, env = CONFIG_ENV)]
    config: Option<PathBuf>,
    /// Fit sample, e.g. `1,2,5,10`, `1..10` or `0.5..5:0.5`.
    #[arg(long)]
    percentiles: Option<String>,
    /// Top percentile for the probability and P_top columns.
    #[arg(long)]
    x0: Option<f64>,
    /// `fixed-at-total` or `free`.
    #[arg(long)]
    intercept: Option<String>,
    /// Rank cutoff rule: `half-up`, `floor` or `ceil`.
    #[arg(long)]
    rank_rounding: Option<String>,
    /// CSV number formatting: `paper` or `full`.
    #[arg(long)]
    display: Option<String>,
}

#[derive(Debug, Args, Serialize)]
struct OutputArgs {
    /// Output path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output format; inferred from the extension of `--out` when absent.
    #[arg(long)]
    format: Option<TableFormat>,
}

#[derive(Debug, Args, Serialize)]
struct EntityArgs {
    /// JSON object mapping entity name to an array of country codes.
    #[arg(long)]
    entities: PathBuf,
    /// Entity to report; repeatable. Defaults to every defined entity.
    #[arg(long = "entity")]
    selected: Vec<String>,
}

#[derive(Debug, Args, Serialize)]
struct IngestArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    out_format: Option<InputFormat>,
}

#[derive(Debug, Args, Serialize)]
struct TableArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    entity: EntityArgs,
    #[command(flatten)]
    analysis: AnalysisArgs,
    /// JSON object mapping entity name to a positive denominator (e.g. millions of inhabitants).
    #[arg(long)]
    populations: Option<PathBuf>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Args, Serialize)]
struct CollabArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Entity definitions file.
    #[arg(long)]
    entities: PathBuf,
    /// Pairs as `A:B`, comma separated.
    #[arg(long)]
    pairs: Option<String>,
    /// Pair every `--entity` with this partner.
    #[arg(long)]
    partner: Option<String>,
    #[arg(long = "entity")]
    selected: Vec<String>,
    #[command(flatten)]
    analysis: AnalysisArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Args, Serialize)]
struct TimeseriesArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    entity: EntityArgs,
    /// Years to report, comma separated; defaults to every year present.
    #[arg(long)]
    years: Option<String>,
    #[command(flatten)]
    analysis: AnalysisArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Args, Serialize)]
struct PlotArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long)]
    entities: PathBuf,
    #[arg(long)]
    entity: String,
    /// Percentiles at which to emit points; the fit sample plus 100 by default.
    #[arg(long)]
    plot_percentiles: Option<String>,
    #[command(flatten)]
    analysis: AnalysisArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum ModelKind {
    Lognormal,
    Pareto,
}

#[derive(Debug, Args, Serialize)]
struct SynthArgs {
    #[arg(long, default_value_t = 200_000)]
    world_size: usize,
    #[arg(long, value_enum, default_value_t = ModelKind::Lognormal)]
    model: ModelKind,
    #[arg(long, default_value_t = 2.3)]
    mu: f64,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    #[arg(long, default_value_t = 1.0)]
    pareto_scale: f64,
    #[arg(long, default_value_t = 1.5)]
    pareto_shape: f64,
    #[arg(long, default_value_t = 0.1)]
    entity_fraction: f64,
    /// Planted exponent.
    #[arg(long, default_value_t = 0.9)]
    alpha: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 2014)]
    year: i32,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    out_format: Option<InputFormat>,
}

#[derive(Debug, Args, Serialize)]
struct OracleArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long)]
    entities: PathBuf,
    #[arg(long)]
    entity: String,
    #[command(flatten)]
    analysis: AnalysisArgs,
    /// Random tie orderings per percentile; 0 disables the Monte Carlo check.
    #[arg(long, default_value_t = 100_000)]
    mc_samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Data(String),
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Data(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Data(m) => f.write_str(m),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

/// Map a library error raised while processing `context` to an exit class.
fn classify(context: &str, e: Error) -> CliError {
    match e {
        Error::Config(_)
        | Error::PercentileOutOfRange(_)
        | Error::PercentilesNotIncreasing
        | Error::MissingYear(_)
        | Error::NonPositiveDenominator(_) => usage(format!("{context}: {e}")),
        _ => CliError::Data(format!("{context}: {e}")),
    }
}

/// Parse and run; returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.code()
        }
    }
}

fn dispatch(cmd: Command) -> CliResult<()> {
    match cmd {
        Command::Ingest(a) => cmd_ingest(a),
        Command::Indicators(a) => cmd_table("indicators", a, false),
        Command::Percapita(a) => cmd_table("percapita", a, true),
        Command::Collab(a) => cmd_collab(a),
        Command::Timeseries(a) => cmd_timeseries(a),
        Command::Plotdata(a) => cmd_plot(a),
        Command::Synth(a) => cmd_synth(a),
        Command::Oracle(a) => cmd_oracle(a),
    }
}

/// Parse a percentile list: comma-separated values and `a..b` or `a..b:step`
/// ranges (integer step 1 by default). The result is sorted and de-duplicated.
pub fn parse_percentiles(spec: &str) -> Result<Vec<f64>, String> {
    let mut out = Vec::new();
    for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        if let Some((a, rest)) = part.split_once("..") {
            let (b, step) = match rest.split_once(':') {
                Some((b, s)) => (b, s.parse::<f64>().map_err(|_| format!("bad step in {part:?}"))?),
                None => (rest, 1.0),
            };
            let a: f64 = a.parse().map_err(|_| format!("bad range start in {part:?}"))?;
            let b: f64 = b.parse().map_err(|_| format!("bad range end in {part:?}"))?;
            if step.is_nan() || step <= 0.0 || b < a {
                return Err(format!("empty or invalid range {part:?}"));
            }
            let n = ((b - a) / step + 1e-9).floor() as usize;
            for k in 0..=n {
                let v = a + k as f64 * step;
                out.push((v * 1e10).round() / 1e10);
            }
        } else {
            out.push(part.parse().map_err(|_| format!("bad percentile {part:?}"))?);
        }
    }
    if out.is_empty() {
        return Err("empty percentile list".into());
    }
    out.sort_by(f64::total_cmp);
    out.dedup();
    Ok(out)
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    percentiles: Option<serde_json::Value>,
    x0: Option<f64>,
    intercept: Option<String>,
    rank_rounding: Option<String>,
    display: Option<String>,
}

struct Resolved {
    analysis: AnalysisConfig,
    display: DisplayProfile,
}

fn resolve_analysis(a: &AnalysisArgs) -> CliResult<Resolved> {
    let file: ConfigFile = match &a.config {
        Some(path) => {
            let f = File::open(path)
                .map_err(|e| usage(format!("--config {}: {e}", path.display())))?;
            serde_json::from_reader(f)
                .map_err(|e| usage(format!("--config {}: {e}", path.display())))?
        }
        None => ConfigFile::default(),
    };

    let percentiles = match (&a.percentiles, &file.percentiles) {
        (Some(s), _) => parse_percentiles(s).map_err(|e| usage(format!("--percentiles: {e}")))?,
        (None, Some(serde_json::Value::String(s))) => {
            parse_percentiles(s).map_err(|e| usage(format!("config percentiles: {e}")))?
        }
        (None, Some(v)) => serde_json::from_value(v.clone())
            .map_err(|e| usage(format!("config percentiles: {e}")))?,
        (None, None) => default_percentiles(),
    };
    let intercept_mode = match a.intercept.as_ref().or(file.intercept.as_ref()) {
        Some(s) => s.parse().map_err(|e| usage(format!("--intercept: {e}")))?,
        None => InterceptMode::default(),
    };
    let rank_rounding = match a.rank_rounding.as_ref().or(file.rank_rounding.as_ref()) {
        Some(s) => s.parse().map_err(|e| usage(format!("--rank-rounding: {e}")))?,
        None => RankRounding::default(),
    };
    let display = match a.display.as_ref().or(file.display.as_ref()) {
        Some(s) => s.parse().map_err(|e| usage(format!("--display: {e}")))?,
        None => DisplayProfile::default(),
    };
    let analysis = AnalysisConfig {
        percentiles,
        intercept_mode,
        rank_rounding,
        x0: a.x0.or(file.x0).unwrap_or(0.01),
    };
    analysis
        .validate()
        .map_err(|e| usage(format!("--percentiles/--x0: {e}")))?;
    Ok(Resolved { analysis, display })
}

fn load_inputs(args: &InputArgs) -> CliResult<Corpus> {
    let mut parts = Vec::with_capacity(args.inputs.len());
    for path in &args.inputs {
        if !path.is_file() {
            return Err(usage(format!("--input {}: no such file", path.display())));
        }
        let c = corpus::ingest_path(path, args.input_format.map(Into::into))
            .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        parts.push(c);
    }
    let label = args
        .inputs
        .iter()
        .map(|p| p.display().to_string())
        .collect::<Vec<_>>()
        .join("+");
    let world = if parts.len() == 1 {
        parts.pop().expect("one input")
    } else {
        Corpus::concat(label, parts).map_err(|e| classify("--input", e))?
    };
    let world = match &args.year {
        Some(y) => {
            let filter: YearFilter = y.parse().map_err(|e| usage(format!("--year: {e}")))?;
            world.filter_years(filter)
        }
        None => world,
    };
    if world.is_empty() {
        return Err(CliError::Data("no publications after filtering".into()));
    }
    Ok(world)
}

fn load_entities(path: &Path) -> CliResult<Vec<EntityDefinition>> {
    let f = File::open(path).map_err(|e| usage(format!("--entities {}: {e}", path.display())))?;
    corpus::read_entities(std::io::BufReader::new(f))
        .map_err(|e| usage(format!("--entities {}: {e}", path.display())))
}

fn find_entity<'a>(defs: &'a [EntityDefinition], name: &str) -> CliResult<&'a EntityDefinition> {
    defs.iter()
        .find(|d| d.name == name)
        .ok_or_else(|| usage(format!("--entity {name:?} is not defined in the entities file")))
}

fn select_entities(defs: &[EntityDefinition], names: &[String]) -> CliResult<Vec<EntityDefinition>> {
    if names.is_empty() {
        return Ok(defs.to_vec());
    }
    names.iter().map(|n| find_entity(defs, n).cloned()).collect()
}

fn load_populations(path: &Path) -> CliResult<BTreeMap<String, f64>> {
    let f = File::open(path).map_err(|e| usage(format!("--populations {}: {e}", path.display())))?;
    let map: BTreeMap<String, f64> = serde_json::from_reader(f)
        .map_err(|e| usage(format!("--populations {}: {e}", path.display())))?;
    if let Some((k, v)) = map.iter().find(|(_, &v)| !(v > 0.0 && v.is_finite())) {
        return Err(usage(format!(
            "--populations {}: denominator for {k:?} must be positive, got {v}",
            path.display()
        )));
    }
    Ok(map)
}

fn open_out(path: Option<&Path>) -> CliResult<Box<dyn Write>> {
    match path {
        Some(p) => {
            let f = File::create(p).map_err(|e| usage(format!("--out {}: {e}", p.display())))?;
            Ok(Box::new(BufWriter::new(f)))
        }
        None => Ok(Box::new(BufWriter::new(std::io::stdout()))),
    }
}

fn table_format(out: &OutputArgs) -> TableFormat {
    out.format.unwrap_or_else(|| match out.out.as_ref().and_then(|p| p.extension()).and_then(|e| e.to_str()) {
        Some("json") => TableFormat::Json,
        _ => TableFormat::Csv,
    })
}

fn metadata(command: &str, args: &impl Serialize, resolved: Option<&Resolved>) -> serde_json::Value {
    let mut meta = json!({
        "tool": "eprank",
        "version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "args": args,
    });
    if let Some(r) = resolved {
        meta["analysis"] = json!({
            "percentiles": r.analysis.percentiles,
            "intercept_mode": r.analysis.intercept_mode.to_string(),
            "rank_rounding": r.analysis.rank_rounding.to_string(),
            "x0": r.analysis.x0,
            "display": r.display.to_string(),
        });
    }
    meta
}

fn emit_rows(
    rows: &[IndicatorRow],
    meta: serde_json::Value,
    resolved: &Resolved,
    output: &OutputArgs,
    with_year: bool,
) -> CliResult<()> {
    let flagged: Vec<_> = rows
        .iter()
        .filter_map(|r| r.flag.as_ref().map(|f| json!({"entity": r.entity, "year": r.year, "flag": f})))
        .collect();
    let mut meta = meta;
    meta["flagged"] = json!(flagged);
    let sink = open_out(output.out.as_deref())?;
    let res = match table_format(output) {
        TableFormat::Csv => indicators::write_rows_csv(rows, &meta, resolved.display, with_year, sink),
        TableFormat::Json => indicators::write_rows_json(rows, &meta, sink),
    };
    res.map_err(|e| usage(format!("--out: {e}")))
}

fn cmd_ingest(a: IngestArgs) -> CliResult<()> {
    let world = load_inputs(&a.input)?;
    let format = a.out_format.map(Into::into).unwrap_or_else(|| match &a.out {
        Some(p) => RecordFormat::from_path(p),
        None => RecordFormat::Csv,
    });
    let meta = json!({
        "tool": "eprank",
        "version": env!("CARGO_PKG_VERSION"),
        "command": "ingest",
        "args": &a,
        "records": world.len(),
        "year_range": world.year_range(),
    });
    write_records_with_sidecar(&world, format, a.out.as_deref(), &meta)
}

fn write_records_with_sidecar(
    corpus: &Corpus,
    format: RecordFormat,
    out: Option<&Path>,
    meta: &serde_json::Value,
) -> CliResult<()> {
    let sink = open_out(out)?;
    corpus::write_records(corpus, sink, format).map_err(|e| usage(format!("--out: {e}")))?;
    let text = serde_json::to_string_pretty(meta).expect("metadata serializes");
    match out {
        Some(p) => {
            let mut side = p.as_os_str().to_owned();
            side.push(".meta.json");
            std::fs::write(&side, text + "\n")
                .map_err(|e| usage(format!("--out {}: {e}", Path::new(&side).display())))?;
        }
        None => eprintln!("{text}"),
    }
    Ok(())
}

fn cmd_table(command: &str, a: TableArgs, per_capita_order: bool) -> CliResult<()> {
    let resolved = resolve_analysis(&a.analysis)?;
    let world = load_inputs(&a.input)?;
    let defs = load_entities(&a.entity.entities)?;
    let entities = select_entities(&defs, &a.entity.selected)?;
    let pops = match &a.populations {
        Some(p) => Some(load_populations(p)?),
        None if per_capita_order => return Err(usage("--populations is required for percapita")),
        None => None,
    };
    if per_capita_order {
        let pops = pops.as_ref().expect("checked above");
        if let Some(missing) = entities.iter().find(|e| !pops.contains_key(&e.name)) {
            return Err(usage(format!("--populations has no entry for {:?}", missing.name)));
        }
    }
    let cohorts: Vec<Cohort> = entities.into_iter().map(Cohort::domestic).collect();
    let mut rows = indicators::indicator_table(&world, &cohorts, &resolved.analysis, pops.as_ref())
        .map_err(|e| classify(command, e))?;
    if per_capita_order {
        rows.sort_by(|x, y| match (x.per_capita, y.per_capita) {
            (Some(p), Some(q)) => q.total_cmp(&p),
            (Some(_), None) => std::cmp::Ordering::Less,
            (None, Some(_)) => std::cmp::Ordering::Greater,
            (None, None) => std::cmp::Ordering::Equal,
        });
    }
    let meta = metadata(command, &a, Some(&resolved));
    emit_rows(&rows, meta, &resolved, &a.output, false)
}

fn cmd_collab(a: CollabArgs) -> CliResult<()> {
    let resolved = resolve_analysis(&a.analysis)?;
    let world = load_inputs(&a.input)?;
    let defs = load_entities(&a.entities)?;
    let mut cohorts = Vec::new();
    if let Some(pairs) = &a.pairs {
        for pair in pairs.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (x, y) = pair
                .split_once(':')
                .ok_or_else(|| usage(format!("--pairs: {pair:?} is not of the form A:B")))?;
            let c = Cohort::pair(find_entity(&defs, x.trim())?.clone(), find_entity(&defs, y.trim())?.clone())
                .map_err(|e| usage(format!("--pairs: {e}")))?;
            cohorts.push(c);
        }
    }
    if let Some(partner) = &a.partner {
        let p = find_entity(&defs, partner)?;
        let names: Vec<String> = if a.selected.is_empty() {
            defs.iter().filter(|d| d.is_disjoint(p)).map(|d| d.name.clone()).collect()
        } else {
            a.selected.clone()
        };
        for n in names {
            let c = Cohort::pair(find_entity(&defs, &n)?.clone(), p.clone())
                .map_err(|e| usage(format!("--partner: {e}")))?;
            cohorts.push(c);
        }
    }
    if cohorts.is_empty() {
        return Err(usage("collab needs --pairs or --partner"));
    }
    let rows = indicators::indicator_table(&world, &cohorts, &resolved.analysis, None)
        .map_err(|e| classify("collab", e))?;
    let meta = metadata("collab", &a, Some(&resolved));
    emit_rows(&rows, meta, &resolved, &a.output, false)
}

fn cmd_timeseries(a: TimeseriesArgs) -> CliResult<()> {
    let resolved = resolve_analysis(&a.analysis)?;
    let world = load_inputs(&a.input)?;
    let defs = load_entities(&a.entity.entities)?;
    let entities = select_entities(&defs, &a.entity.selected)?;
    let years: Vec<i32> = match &a.years {
        Some(s) => s
            .split(',')
            .map(|y| y.trim().parse::<i32>().map_err(|_| usage(format!("--years: bad year {y:?}"))))
            .collect::<CliResult<_>>()?,
        None => world.years(),
    };
    let worlds: BTreeMap<i32, Corpus> = world
        .years()
        .into_iter()
        .map(|y| (y, world.filter_years(YearFilter::single(y))))
        .collect();
    let cohorts: Vec<Cohort> = entities.into_iter().map(Cohort::domestic).collect();
    let rows = indicators::time_series(&worlds, &cohorts, &years, &resolved.analysis)
        .map_err(|e| classify("--years", e))?;
    let meta = metadata("timeseries", &a, Some(&resolved));
    emit_rows(&rows, meta, &resolved, &a.output, true)
}

fn cmd_plot(a: PlotArgs) -> CliResult<()> {
    let resolved = resolve_analysis(&a.analysis)?;
    let world = load_inputs(&a.input)?;
    let defs = load_entities(&a.entities)?;
    let entity = find_entity(&defs, &a.entity)?;
    let subset = Cohort::domestic(entity.clone())
        .select(&world)
        .map_err(|e| classify("plotdata", e))?;
    let plot_xs = match &a.plot_percentiles {
        Some(s) => parse_percentiles(s).map_err(|e| usage(format!("--plot-percentiles: {e}")))?,
        None => {
            let mut xs = resolved.analysis.percentiles.clone();
            if xs.last() != Some(&100.0) {
                xs.push(100.0);
            }
            xs
        }
    };
    let ranked = rank_descending(&world).map_err(|e| classify("plotdata", e))?;
    let rr = resolved.analysis.rank_rounding;
    let fit_series = count_series(&ranked, &subset, &resolved.analysis.percentiles, rr)
        .map_err(|e| classify("--percentiles", e))?;
    let fit = fit_power_law(&fit_series, resolved.analysis.intercept_mode, None)
        .map_err(|e| classify(&format!("entity {:?}", entity.name), e))?;
    let plot_series = count_series(&ranked, &subset, &plot_xs, rr)
        .map_err(|e| classify("--plot-percentiles", e))?;
    let points = indicators::plot_data(&plot_series, &fit);

    let mut meta = metadata("plotdata", &a, Some(&resolved));
    meta["fit"] = json!(fit);
    meta["entity_total"] = json!(subset.len());
    let sink = open_out(a.output.out.as_deref())?;
    let res = match table_format(&a.output) {
        TableFormat::Csv => indicators::write_plot_csv(&points, &meta, sink),
        TableFormat::Json => indicators::write_plot_json(&points, &meta, sink),
    };
    res.map_err(|e| usage(format!("--out: {e}")))
}

fn cmd_synth(a: SynthArgs) -> CliResult<()> {
    let citation_model = match a.model {
        ModelKind::Lognormal => CitationModel::Lognormal { mu: a.mu, sigma: a.sigma },
        ModelKind::Pareto => CitationModel::Pareto {
            scale: a.pareto_scale,
            shape: a.pareto_shape,
        },
    };
    let config = GeneratorConfig {
        world_size: a.world_size,
        citation_model,
        entity_fraction: a.entity_fraction,
        planted_alpha: a.alpha,
        seed: a.seed,
        year: a.year,
    };
    let planted = synth::synthesize(&config).map_err(|e| classify("synth", e))?;
    let format = a.out_format.map(Into::into).unwrap_or_else(|| match &a.out {
        Some(p) => RecordFormat::from_path(p),
        None => RecordFormat::Csv,
    });
    let meta = json!({
        "tool": "eprank",
        "version": env!("CARGO_PKG_VERSION"),
        "command": "synth",
        "generator": config,
        "entity_country": synth::PLANTED_COUNTRY,
        "world_country": synth::WORLD_COUNTRY,
        "entity_size": planted.entity_size(),
        "clipped_ranks": planted.clipped,
        "warnings": planted.warnings,
    });
    write_records_with_sidecar(&planted.corpus, format, a.out.as_deref(), &meta)
}

#[derive(Debug, Serialize)]
struct OracleRow {
    x: f64,
    rank_cutoff: usize,
    citation_cutoff: u64,
    tie_fraction: f64,
    proportional: f64,
    oracle_exact: f64,
    mc_mean: Option<f64>,
    mc_std_err: Option<f64>,
    agree: bool,
}

fn cmd_oracle(a: OracleArgs) -> CliResult<()> {
    let resolved = resolve_analysis(&a.analysis)?;
    let world = load_inputs(&a.input)?;
    let defs = load_entities(&a.entities)?;
    let entity = find_entity(&defs, &a.entity)?;
    let subset = Cohort::domestic(entity.clone())
        .select(&world)
        .map_err(|e| classify("oracle", e))?;
    let in_entity: std::collections::HashSet<&str> =
        subset.records().iter().map(|r| r.id.as_str()).collect();
    let citations: Vec<u64> = world.citations().collect();
    let labels: Vec<bool> = world.records().iter().map(|r| in_entity.contains(r.id.as_str())).collect();

    let ranked = rank_descending(&world).map_err(|e| classify("oracle", e))?;
    let rr = resolved.analysis.rank_rounding;
    let mut rows = Vec::new();
    for (i, &x) in resolved.analysis.percentiles.iter().enumerate() {
        let t = ranked.percentile_threshold(x, rr).map_err(|e| classify("--percentiles", e))?;
        let proportional = crate::double_rank::entity_count_at(&subset, &t);
        let exact = synth::oracle_top_count(&citations, &labels, x, rr).map_err(|e| classify("oracle", e))?;
        let mc = if a.mc_samples > 0 {
            Some(
                synth::oracle_monte_carlo(&citations, &labels, x, rr, a.mc_samples, a.seed.wrapping_add(i as u64))
                    .map_err(|e| classify("--mc-samples", e))?,
            )
        } else {
            None
        };
        let agree = (proportional - exact).abs() <= 1e-9
            && mc.is_none_or(|m| (m.mean - exact).abs() <= 3.0 * m.std_err.max(1e-12));
        rows.push(OracleRow {
            x,
            rank_cutoff: t.rank_cutoff,
            citation_cutoff: t.citation_cutoff,
            tie_fraction: t.tie_fraction,
            proportional,
            oracle_exact: exact,
            mc_mean: mc.map(|m| m.mean),
            mc_std_err: mc.map(|m| m.std_err),
            agree,
        });
    }
    let meta = metadata("oracle", &a, Some(&resolved));
    let mut sink = open_out(a.output.out.as_deref())?;
    let res: crate::error::Result<()> = (|| {
        match table_format(&a.output) {
            TableFormat::Json => {
                serde_json::to_writer_pretty(&mut sink, &json!({"metadata": meta, "rows": rows}))?;
                sink.write_all(b"\n")?;
            }
            TableFormat::Csv => {
                for line in serde_json::to_string_pretty(&meta)?.lines() {
                    writeln!(sink, "# {line}")?;
                }
                let mut w = csv::Writer::from_writer(sink);
                for r in &rows {
                    w.serialize(r)?;
                }
                w.flush()?;
            }
        }
        Ok(())
    })();
    res.map_err(|e| usage(format!("--out: {e}")))?;
    if rows.iter().all(|r| r.agree) {
        Ok(())
    } else {
        Err(CliError::Data("proportional counts disagree with the oracle".into()))
    }
}
