//! grpsel command-line driver.
//!
//! Exit codes: 0 success, 1 a verify-theory check failed, 2 usage error,
//! 3 unreadable or malformed input, 4 solver or domain error.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use grpsel::lab::{run_experiment, CheckStatus, ExperimentConfig};
use grpsel::{
    build_grouped_design, default_gamma_grid, fit_path, fit_penalized, kfold_cv, simulate, standardization_for, FitResult, GroupedDesign,
    PathOptions, PenaltyFamily, PenaltySpec, ScenarioName, ScenarioSpec, SolutionPath, SolverOptions, WeightRule,
};
use nalgebra::DMatrix;

#[derive(Parser)]
#[command(name = "grpsel", version, about = "Group and bi-level penalized linear regression")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit at a single (lambda, gamma).
    Fit(FitArgs),
    /// Fit a regularization path over lambda (and a gamma list).
    Path(PathArgs),
    /// K-fold cross-validation over the path grid.
    Cv(CvArgs),
    /// Write a simulated dataset.
    Simulate(SimArgs),
    /// Run a theory experiment described by a JSON config.
    VerifyTheory(TheoryArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum WeightsArg {
    Sqrt,
    Pow,
    File,
}

#[derive(Args)]
struct DataArgs {
    /// Headered predictor CSV.
    #[arg(long)]
    x: PathBuf,
    /// Single-column response CSV.
    #[arg(long)]
    y: PathBuf,
    /// Two-column CSV: column_name, group_id.
    #[arg(long)]
    groups: PathBuf,
    #[arg(long, default_value = "glasso")]
    penalty: PenaltyFamily,
    #[arg(long, value_enum, default_value = "sqrt")]
    weights: WeightsArg,
    /// Exponent a in c_j = d_j^a for --weights pow.
    #[arg(long, default_value_t = 0.5)]
    weight_power: f64,
    /// Two-column CSV (group_id, weight) for --weights file.
    #[arg(long)]
    weight_file: Option<PathBuf>,
    /// Sparse group LASSO only: group-level lambda2 as a multiple of the
    /// coordinate-level lambda.
    #[arg(long, default_value_t = 1.0)]
    sgl_ratio: f64,
    #[arg(long, default_value_t = 1e-7)]
    tol: f64,
    #[arg(long, default_value_t = 10_000)]
    max_iter: usize,
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Penalty level, or "max" for the smallest lambda giving the zero fit.
    #[arg(long)]
    lambda: String,
    /// Concavity parameter; "inf" for the group LASSO limit.
    #[arg(long)]
    gamma: Option<String>,
    /// Coefficient CSV to write.
    #[arg(long)]
    out: PathBuf,
    /// Optional JSON fit report.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct PathArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Comma-separated gamma values ("inf" allowed).
    #[arg(long)]
    gamma: Option<String>,
    #[arg(long, default_value_t = 100)]
    nlambda: usize,
    #[arg(long)]
    lambda_min_ratio: Option<f64>,
    /// Output directory for path_coef.csv, norms_gamma_*.csv and path.json.
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct CvArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    gamma: Option<String>,
    #[arg(long, default_value_t = 100)]
    nlambda: usize,
    #[arg(long)]
    lambda_min_ratio: Option<f64>,
    #[arg(long, default_value_t = 10)]
    folds: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// JSON report.
    #[arg(long)]
    out: PathBuf,
    /// Optional coefficient CSV with the full-data fits at the chosen points.
    #[arg(long)]
    coef_out: Option<PathBuf>,
}

#[derive(Args)]
struct SimArgs {
    #[arg(long, default_value = "figure1")]
    scenario: String,
    #[arg(long, default_value_t = 100)]
    n: usize,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    #[arg(long, default_value_t = 0.0)]
    correlation: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// JSON scenario spec; overrides the other scenario flags.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct TheoryArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug)]
enum CliError {
    Input(String),
    Solver(String),
}

impl From<grpsel::Error> for CliError {
    fn from(e: grpsel::Error) -> Self {
        match e {
            grpsel::Error::BadSpec(_) | grpsel::Error::EmptyGroup { .. } | grpsel::Error::DimensionMismatch { .. } => {
                CliError::Input(e.to_string())
            }
            _ => CliError::Solver(e.to_string()),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn input_err(path: &Path, msg: impl std::fmt::Display) -> CliError {
    CliError::Input(format!("{}: {msg}", path.display()))
}

fn parse_f64(s: &str) -> Option<f64> {
    match s.trim() {
        "inf" | "Inf" | "infinity" => Some(f64::INFINITY),
        t => t.parse().ok().filter(|v: &f64| !v.is_nan()),
    }
}

fn parse_gammas(s: &str) -> CliResult<Vec<f64>> {
    s.split(',')
        .map(|t| parse_f64(t).ok_or_else(|| CliError::Input(format!("bad gamma value '{t}'"))))
        .collect()
}

fn reader(path: &Path, headers: bool) -> CliResult<csv::Reader<File>> {
    csv::ReaderBuilder::new()
        .has_headers(headers)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| input_err(path, e))
}

struct Table {
    names: Vec<String>,
    x: DMatrix<f64>,
}

fn read_x(path: &Path) -> CliResult<Table> {
    let mut rdr = reader(path, true)?;
    let names: Vec<String> = rdr.headers().map_err(|e| input_err(path, e))?.iter().map(str::to_string).collect();
    if names.is_empty() {
        return Err(input_err(path, "no columns"));
    }
    let mut vals = Vec::new();
    let mut rows = 0;
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| input_err(path, e))?;
        if rec.len() != names.len() {
            return Err(input_err(path, format!("row {} has {} fields, expected {}", i + 2, rec.len(), names.len())));
        }
        for f in rec.iter() {
            vals.push(f.parse::<f64>().map_err(|_| input_err(path, format!("row {}: '{f}' is not a number", i + 2)))?);
        }
        rows += 1;
    }
    Ok(Table { x: DMatrix::from_row_slice(rows, names.len(), &vals), names })
}

/// Reads a CSV whose first row may be a header; returns the data rows.
fn read_rows(path: &Path, width: usize) -> CliResult<Vec<Vec<String>>> {
    let mut rdr = reader(path, false)?;
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| input_err(path, e))?;
        if rec.len() != width {
            return Err(input_err(path, format!("row {} has {} fields, expected {width}", i + 1, rec.len())));
        }
        out.push(rec.iter().map(str::to_string).collect());
    }
    Ok(out)
}

fn read_y(path: &Path) -> CliResult<Vec<f64>> {
    let rows = read_rows(path, 1)?;
    let mut out = Vec::with_capacity(rows.len());
    for (i, r) in rows.iter().enumerate() {
        match r[0].parse::<f64>() {
            Ok(v) => out.push(v),
            Err(_) if i == 0 => {}
            Err(_) => return Err(input_err(path, format!("row {}: '{}' is not a number", i + 1, r[0]))),
        }
    }
    Ok(out)
}

fn read_groups(path: &Path, names: &[String]) -> CliResult<Vec<i64>> {
    let rows = read_rows(path, 2)?;
    let mut map = HashMap::new();
    for (i, r) in rows.iter().enumerate() {
        let Ok(g) = r[1].parse::<i64>() else {
            if i == 0 {
                continue;
            }
            return Err(input_err(path, format!("row {}: group id '{}' is not an integer", i + 1, r[1])));
        };
        if map.insert(r[0].clone(), g).is_some() {
            return Err(input_err(path, format!("column '{}' listed twice", r[0])));
        }
    }
    let labels = names
        .iter()
        .map(|n| map.get(n).copied().ok_or_else(|| input_err(path, format!("no group for column '{n}'"))))
        .collect::<CliResult<Vec<_>>>()?;
    if map.len() != names.len() {
        return Err(input_err(path, "group file names columns that are not in the predictor file"));
    }
    Ok(labels)
}

fn read_weight_file(path: &Path, labels: &[i64]) -> CliResult<Vec<f64>> {
    let rows = read_rows(path, 2)?;
    let mut map = HashMap::new();
    for (i, r) in rows.iter().enumerate() {
        match (r[0].parse::<i64>(), r[1].parse::<f64>()) {
            (Ok(g), Ok(w)) => {
                map.insert(g, w);
            }
            _ if i == 0 => {}
            _ => return Err(input_err(path, format!("row {} is not (group_id, weight)", i + 1))),
        }
    }
    let mut ids: Vec<i64> = labels.to_vec();
    ids.sort_unstable();
    ids.dedup();
    ids.iter()
        .map(|g| map.get(g).copied().ok_or_else(|| input_err(path, format!("no weight for group {g}"))))
        .collect()
}

struct Loaded {
    names: Vec<String>,
    design: GroupedDesign,
    solver: SolverOptions,
}

fn load(args: &DataArgs) -> CliResult<Loaded> {
    let table = read_x(&args.x)?;
    let y = read_y(&args.y)?;
    if y.len() != table.x.nrows() {
        return Err(CliError::Input(format!("response has {} rows but predictors have {}", y.len(), table.x.nrows())));
    }
    let labels = read_groups(&args.groups, &table.names)?;
    let rule = match args.weights {
        WeightsArg::Sqrt => WeightRule::SqrtDj,
        WeightsArg::Pow => WeightRule::DjPow(args.weight_power),
        WeightsArg::File => {
            let p = args.weight_file.as_ref().ok_or_else(|| CliError::Input("--weights file needs --weight-file".into()))?;
            WeightRule::Custom(read_weight_file(p, &labels)?)
        }
    };
    let design = build_grouped_design(&table.x, &y, &labels, rule, standardization_for(args.penalty))?;
    let solver = SolverOptions { tol: args.tol, max_iter: args.max_iter, ..Default::default() };
    Ok(Loaded { names: table.names, design, solver })
}

fn template(args: &DataArgs, lambda: f64, gamma: Option<f64>) -> CliResult<PenaltySpec> {
    Ok(PenaltySpec::for_family(args.penalty, lambda, gamma, args.sgl_ratio)?)
}

/// Writes through a temporary file in the target directory, then renames.
fn write_atomic(path: &Path, body: impl FnOnce(&mut dyn Write) -> std::io::Result<()>) -> CliResult<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let io = |e: std::io::Error| input_err(path, e);
    let mut tmp = tempfile::NamedTempFile::new_in(&dir).map_err(io)?;
    {
        let mut w = BufWriter::new(tmp.as_file_mut());
        body(&mut w).map_err(io)?;
        w.flush().map_err(io)?;
    }
    tmp.persist(path).map_err(|e| input_err(path, e.error))?;
    Ok(())
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Solver(e.to_string()))?;
    write_atomic(path, |w| writeln!(w, "{text}"))
}

fn write_coefs<'a>(path: &Path, names: &[String], rows: impl Iterator<Item = (f64, f64, &'a [f64])>) -> CliResult<()> {
    let rows: Vec<_> = rows.collect();
    write_atomic(path, |w| {
        let mut c = csv::Writer::from_writer(w);
        let mut header = vec!["lambda".to_string(), "gamma".to_string()];
        header.extend(names.iter().cloned());
        c.write_record(&header)?;
        for (l, g, beta) in rows {
            let mut rec = vec![l.to_string(), g.to_string()];
            rec.extend(beta.iter().map(|v| v.to_string()));
            c.write_record(&rec)?;
        }
        c.flush()
    })
}

fn write_norms(path: &Path, design: &GroupedDesign, path_fit: &SolutionPath, gi: usize) -> CliResult<()> {
    write_atomic(path, |w| {
        let mut c = csv::Writer::from_writer(w);
        let mut header = vec!["lambda".to_string(), "lambda_ratio".to_string(), "gamma".to_string()];
        header.extend(design.group_labels().iter().map(|l| format!("group_{l}")));
        c.write_record(&header)?;
        for (fit, l) in path_fit.fits_for_gamma(gi).iter().zip(&path_fit.lambdas) {
            let mut rec = vec![l.to_string(), (l / path_fit.lambda_max).to_string(), path_fit.gammas[gi].to_string()];
            rec.extend(design.original_group_norms(&fit.beta).iter().map(|v| v.to_string()));
            c.write_record(&rec)?;
        }
        c.flush()
    })
}

fn fit_row(fit: &FitResult) -> (f64, f64, &[f64]) {
    (fit.lambda(), fit.gamma(), fit.beta.as_slice())
}

fn path_opts(nlambda: usize, ratio: Option<f64>, gammas: Vec<f64>, solver: SolverOptions) -> PathOptions {
    PathOptions { n_lambda: nlambda, lambda_min_ratio: ratio, gamma_grid: gammas, solver, ..Default::default() }
}

fn cmd_fit(a: FitArgs) -> CliResult<()> {
    let l = load(&a.data)?;
    let gamma = a.gamma.as_deref().map(parse_gammas).transpose()?.and_then(|g| g.first().copied());
    let lambda = if a.lambda.trim() == "max" {
        let t = template(&a.data, 1.0, gamma)?;
        grpsel::path::path_lambda_max(&l.design, &t, &l.solver)?
    } else {
        parse_f64(&a.lambda).ok_or_else(|| CliError::Input(format!("bad lambda '{}'", a.lambda)))?
    };
    let spec = template(&a.data, 1.0, gamma)?.with_lambda(lambda);
    let fit = fit_penalized(&l.design, &spec, None, &l.solver)?;
    if !fit.converged {
        eprintln!("warning: fit did not converge in {} iterations", l.solver.max_iter);
    }
    write_coefs(&a.out, &l.names, std::iter::once(fit_row(&fit)))?;
    if let Some(r) = &a.report {
        write_json(r, &fit)?;
    }
    Ok(())
}

#[derive(serde::Serialize)]
struct PathSummary<'a> {
    family: PenaltyFamily,
    lambda_max: f64,
    lambdas: &'a [f64],
    gammas: &'a [f64],
    converged: Vec<bool>,
    iterations: Vec<usize>,
    objective: Vec<f64>,
    n_nonzero: Vec<usize>,
}

fn cmd_path(a: PathArgs) -> CliResult<()> {
    let l = load(&a.data)?;
    let gammas = a.gamma.as_deref().map(parse_gammas).transpose()?.unwrap_or_default();
    let spec = template(&a.data, 1.0, gammas.first().copied())?;
    let p = fit_path(&l.design, &spec, &path_opts(a.nlambda, a.lambda_min_ratio, gammas, l.solver))?;
    std::fs::create_dir_all(&a.out_dir).map_err(|e| input_err(&a.out_dir, e))?;
    write_coefs(&a.out_dir.join("path_coef.csv"), &l.names, p.fits.iter().map(fit_row))?;
    for gi in 0..p.gammas.len() {
        write_norms(&a.out_dir.join(format!("norms_gamma_{}.csv", p.gammas[gi])), &l.design, &p, gi)?;
    }
    if !p.all_converged() {
        eprintln!("warning: some path fits did not converge");
    }
    let summary = PathSummary {
        family: p.family,
        lambda_max: p.lambda_max,
        lambdas: &p.lambdas,
        gammas: &p.gammas,
        converged: p.fits.iter().map(|f| f.converged).collect(),
        iterations: p.fits.iter().map(|f| f.iterations).collect(),
        objective: p.fits.iter().map(|f| f.objective).collect(),
        n_nonzero: p.fits.iter().map(|f| f.n_nonzero()).collect(),
    };
    write_json(&a.out_dir.join("path.json"), &summary)
}

fn cmd_cv(a: CvArgs) -> CliResult<()> {
    let l = load(&a.data)?;
    let gammas = match a.gamma.as_deref() {
        Some(g) => parse_gammas(g)?,
        None => default_gamma_grid(a.data.penalty),
    };
    let spec = template(&a.data, 1.0, gammas.first().copied())?;
    let opts = path_opts(a.nlambda, a.lambda_min_ratio, gammas, l.solver);
    let rep = kfold_cv(&l.design, &spec, &opts, a.folds, a.seed)?;
    write_json(&a.out, &rep)?;
    if let Some(out) = &a.coef_out {
        let full = fit_path(&l.design, &spec, &PathOptions { lambdas: Some(rep.lambdas.clone()), ..opts })?;
        let picks = [rep.chosen_min.index, rep.chosen_1se.index];
        write_coefs(out, &l.names, picks.iter().map(|&i| fit_row(&full.fits[i])))?;
    }
    Ok(())
}

fn cmd_simulate(a: SimArgs) -> CliResult<()> {
    let spec = match &a.spec {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| input_err(p, e))?;
            serde_json::from_str::<ScenarioSpec>(&text).map_err(|e| input_err(p, e))?
        }
        None => {
            let name: ScenarioName = a.scenario.parse()?;
            if name == ScenarioName::Custom {
                return Err(CliError::Input("custom scenarios need --spec".into()));
            }
            ScenarioSpec { name, n: a.n, sigma: a.sigma, correlation: a.correlation, seed: a.seed, groups: None }
        }
    };
    let d = simulate(&spec)?;
    std::fs::create_dir_all(&a.out_dir).map_err(|e| input_err(&a.out_dir, e))?;
    let dir = &a.out_dir;
    write_atomic(&dir.join("X.csv"), |w| {
        let mut c = csv::Writer::from_writer(w);
        c.write_record(&d.names)?;
        for i in 0..d.x.nrows() {
            c.write_record(d.x.row(i).iter().map(|v| v.to_string()))?;
        }
        c.flush()
    })?;
    write_atomic(&dir.join("y.csv"), |w| {
        writeln!(w, "y")?;
        d.y.iter().try_for_each(|v| writeln!(w, "{v}"))
    })?;
    write_atomic(&dir.join("groups.csv"), |w| {
        writeln!(w, "column_name,group_id")?;
        d.names.iter().zip(&d.labels).try_for_each(|(n, g)| writeln!(w, "{n},{g}"))
    })?;
    write_atomic(&dir.join("truth.csv"), |w| {
        writeln!(w, "column_name,group_id,beta,in_support")?;
        d.names
            .iter()
            .zip(&d.labels)
            .zip(&d.true_beta)
            .try_for_each(|((n, g), b)| writeln!(w, "{n},{g},{b},{}", d.support.contains(g)))
    })?;
    write_json(&dir.join("scenario.json"), &spec)
}

fn cmd_verify(a: TheoryArgs) -> CliResult<bool> {
    let text = std::fs::read_to_string(&a.config).map_err(|e| input_err(&a.config, e))?;
    let cfg: ExperimentConfig = serde_json::from_str(&text).map_err(|e| input_err(&a.config, format!("config error: {e}")))?;
    let rep = run_experiment(&cfg)?;
    write_json(&a.out, &rep)?;
    for c in &rep.checks {
        eprintln!("{}: {} ({})", c.status, c.name, c.detail);
    }
    Ok(rep.status != CheckStatus::Fail)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.cmd {
        Command::Fit(a) => cmd_fit(a).map(|_| true),
        Command::Path(a) => cmd_path(a).map(|_| true),
        Command::Cv(a) => cmd_cv(a).map(|_| true),
        Command::Simulate(a) => cmd_simulate(a).map(|_| true),
        Command::VerifyTheory(a) => cmd_verify(a),
    };
    match res {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(CliError::Input(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(3)
        }
        Err(CliError::Solver(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(4)
        }
    }
}
