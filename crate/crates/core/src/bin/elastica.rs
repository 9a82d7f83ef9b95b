use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use elastica_core::energy::{DiscreteEnergy, PhysicalParams, QuarticBump, RegularizationParams, Term, TestFunction};
use elastica_core::experiments::{
    gamma_convergence_study, initial_guess, run_experiment, write_gamma_csv, DeltaRule, EnergyTable,
    ExperimentConfig, ExperimentRecord, GuessSpec, InitialGuess, RhoRule, MISSING, PRESETS, PRESET_NS,
};
use elastica_core::gradient::{analytic_term_gradient, finite_difference_gradient, DEFAULT_FD_SCALE};
use elastica_core::grid::PeriodicGrid;
use elastica_core::obstacles::Obstacle;
use elastica_core::{Error, Result};

#[derive(Parser)]
#[command(name = "elastica", version, about = "Elastic curves on obstacles with adhesion")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Minimize from one initial guess.
    Minimize(MinimizeArgs),
    /// Run a full preset or config over all its N and guesses.
    Sweep(SweepArgs),
    /// Discrete vs continuous bending of an interpolated test function.
    GammaCheck(GammaArgs),
    /// Analytic vs finite-difference gradient, per node.
    GradCheck(GradArgs),
    /// Energy tables of all presets, plus the Type D seminorms.
    Tables(TablesArgs),
}

#[derive(Args, Clone)]
struct ModelArgs {
    /// JSON config; flags given here override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Obstacle: sin24, peak(eps=..), flat(c=..) or csv:<path>.
    #[arg(long)]
    obstacle: Option<String>,
    #[arg(long = "N")]
    n: Option<usize>,
    /// Bending modulus (the full C, not C/2).
    #[arg(long = "C")]
    c: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    /// `h` or a number.
    #[arg(long)]
    delta_rule: Option<DeltaRule>,
    /// `h/<divisor>` or a number.
    #[arg(long)]
    rho_rule: Option<RhoRule>,
    /// constant:c, top:k, full, bump:k:a, dips:bits, tent:w:a, spike:a or random:seed:a.
    #[arg(long)]
    guess: Option<InitialGuess>,
}

impl ModelArgs {
    fn config(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig {
                name: "run".into(),
                obstacle: "sin24".into(),
                params: PhysicalParams::from_half_modulus(0.0005, 0.01, 1.0)?,
                delta_rule: DeltaRule::Mesh,
                rho_rule: RhoRule::MeshOver(100.0),
                ns: vec![100],
                guesses: vec![GuessSpec::new("run", InitialGuess::FullAdhesion, Default::default())],
                options: Default::default(),
            },
        };
        if let Some(o) = &self.obstacle {
            cfg.obstacle = o.clone();
        }
        if let Some(n) = self.n {
            cfg.ns = vec![n];
        }
        if let Some(c) = self.c {
            cfg.params.c = c;
        }
        if let Some(s) = self.sigma {
            cfg.params.sigma = s;
        }
        if let Some(g) = self.gamma {
            cfg.params.gamma = g;
        }
        if let Some(d) = self.delta_rule {
            cfg.delta_rule = d;
        }
        if let Some(r) = self.rho_rule {
            cfg.rho_rule = r;
        }
        if let Some(g) = self.guess {
            cfg.guesses = vec![GuessSpec::new("run", g, Default::default())];
        }
        cfg.normalize()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct MinimizeArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Stopping tolerance on `|grad E|_inf / |E|`.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    /// Output directory for result.json and curve CSVs.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    /// One of psi1-p1, psi1-p2, psi2-p1, psi2-p2, psi2-p3.
    #[arg(long, conflicts_with = "config")]
    preset: Option<String>,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated mesh sizes.
    #[arg(long = "N", value_delimiter = ',')]
    ns: Option<Vec<usize>>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct GammaArgs {
    /// sin:A:k, cos:A:k or const:c.
    #[arg(long, default_value = "sin:0.1:1")]
    function: String,
    #[arg(long = "N", value_delimiter = ',', default_value = "50,100,200,400")]
    ns: Vec<usize>,
    #[arg(long = "C", default_value_t = 1.0)]
    c: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GradArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// total, bending, tension, adhesion or penalty.
    #[arg(long, default_value = "total")]
    term: String,
    #[arg(long, default_value_t = DEFAULT_FD_SCALE)]
    step: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TablesArgs {
    #[arg(long = "N", value_delimiter = ',')]
    ns: Option<Vec<usize>>,
    #[arg(long)]
    out: PathBuf,
}

fn create(path: &Path) -> Result<File> {
    File::create(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(create(p)?),
        None => Box::new(io::stdout().lock()),
    })
}

fn mkdir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |e| Error::Csv {
        path: path.to_path_buf(),
        source: e,
    }
}

fn summarize(record: &ExperimentRecord) {
    for r in &record.runs {
        println!(
            "{:>5} {:<3} {:<22} E = {:>13.7}  iters = {:>6}  crit = {:.2e}  contact = {:.3} ({} runs)  {}",
            r.n,
            r.type_label(),
            r.guess.to_string(),
            r.energy.total,
            r.iterations,
            r.final_criterion,
            r.fraction,
            r.runs,
            if r.converged { "converged" } else { r.diagnostic.as_deref().unwrap_or("not converged") }
        );
    }
}

fn save_record(record: &ExperimentRecord, dir: &Path) -> Result<()> {
    mkdir(dir)?;
    record.save_json(&dir.join("record.json"))?;
    record.save_runs_csv(&dir.join("runs.csv"))?;
    let table = dir.join("table.csv");
    record.table().write_csv(create(&table)?).map_err(csv_err(&table))?;
    record.dump_curves(&dir.join("curves"))
}

fn minimize(args: MinimizeArgs) -> Result<bool> {
    let mut cfg = args.model.config()?;
    cfg.ns.truncate(1);
    cfg.guesses.truncate(1);
    if let Some(t) = args.tol {
        cfg.options.tolerance = t;
    }
    if let Some(m) = args.max_iter {
        cfg.options.max_iterations = m;
    }
    let record = run_experiment(&cfg)?;
    summarize(&record);
    let r = &record.runs[0];
    println!(
        "bending = {:.7}  tension = {:.7}  adhesion = {:.7}  penalty = {:.3e}",
        r.energy.bending, r.energy.tension, r.energy.adhesion, r.energy.penalty
    );
    if let Some(dir) = &args.out {
        mkdir(dir)?;
        std::fs::write(dir.join("result.json"), serde_json::to_string_pretty(r)?).map_err(|e| Error::Io {
            path: dir.join("result.json"),
            source: e,
        })?;
        save_record(&record, dir)?;
    }
    Ok(record.all_converged())
}

fn sweep(args: SweepArgs) -> Result<bool> {
    let mut cfg = match (&args.preset, &args.config) {
        (Some(p), _) => ExperimentConfig::preset(p)?,
        (None, Some(path)) => ExperimentConfig::load(path)?,
        (None, None) => return Err(Error::InvalidParameter("give --preset or --config".into())),
    };
    if let Some(ns) = args.ns {
        cfg.ns = ns;
    }
    if let Some(t) = args.tol {
        cfg.options.tolerance = t;
    }
    let record = run_experiment(&cfg)?;
    summarize(&record);
    save_record(&record, &args.out)?;
    Ok(record.all_converged())
}

fn gamma_check(args: GammaArgs) -> Result<bool> {
    let f = TestFunction::parse(&args.function)?;
    let params = PhysicalParams::new(args.c, 1.0, 1.0)?;
    let rows = gamma_convergence_study(&f, &args.ns, &params)?;
    let label = args.out.clone().unwrap_or_else(|| PathBuf::from("<stdout>"));
    write_gamma_csv(&rows, output(args.out.as_deref())?).map_err(csv_err(&label))?;
    Ok(true)
}

fn grad_check(args: GradArgs) -> Result<bool> {
    let cfg = args.model.config()?;
    let term = Term::ALL
        .into_iter()
        .find(|t| t.name() == args.term)
        .ok_or_else(|| Error::InvalidParameter(format!("unknown term `{}`", args.term)))?;
    let obstacle = Obstacle::from_name(&cfg.obstacle)?;
    let grid = PeriodicGrid::new(cfg.ns[0])?;
    let h = grid.h();
    let reg = RegularizationParams::new(cfg.delta_rule.delta(h), cfg.rho_rule.rho(h))?;
    let guess = match args.model.guess {
        Some(g) => g,
        None => InitialGuess::Random {
            seed: 1,
            amplitude: 2.0 * reg.delta,
        },
    };
    let curve = initial_guess(&guess, grid, &obstacle, &reg)?;
    let energy = DiscreteEnergy::new(grid, &obstacle, cfg.params, reg, Arc::new(QuarticBump));
    let analytic = analytic_term_gradient(&curve, &energy, term);
    let fd = finite_difference_gradient(&curve, &energy, term, args.step);
    let label = args.out.clone().unwrap_or_else(|| PathBuf::from("<stdout>"));
    let mut w = csv::Writer::from_writer(output(args.out.as_deref())?);
    let err = csv_err(&label);
    w.write_record(["j", "analytic", "fd", "rel_err"]).map_err(&err)?;
    for (j, (a, f)) in analytic.iter().zip(fd.iter()).enumerate() {
        w.serialize((j, a, f, (a - f).abs() / a.abs().max(1.0))).map_err(&err)?;
    }
    w.flush().map_err(|e| Error::Io {
        path: label.clone(),
        source: e,
    })?;
    let total = analytic.relative_error(&fd);
    eprintln!("relative sup error {total:.3e}");
    Ok(true)
}

/// Side-by-side table of several presets: rows are Types, columns `<preset> N=<n>`.
fn write_joined(tables: &[(&str, EnergyTable)], path: &Path) -> Result<()> {
    let mut labels: Vec<String> = Vec::new();
    for (_, t) in tables {
        for l in &t.labels {
            if !labels.contains(l) {
                labels.push(l.clone());
            }
        }
    }
    let mut w = csv::Writer::from_writer(create(path)?);
    let err = csv_err(path);
    let mut header = vec!["type".to_string()];
    for (name, t) in tables {
        header.extend(t.ns.iter().map(|n| format!("{name} N={n}")));
    }
    w.write_record(&header).map_err(&err)?;
    for l in labels.iter().map(Some).chain([None]) {
        let mut row = vec![l.cloned().unwrap_or_else(|| "global".into())];
        for (_, t) in tables {
            for (k, &n) in t.ns.iter().enumerate() {
                row.push(match l {
                    Some(l) => t.get(l, n).map_or(MISSING.to_string(), |e| format!("{e:.7}")),
                    None => t.global[k].clone().unwrap_or_else(|| MISSING.to_string()),
                });
            }
        }
        w.write_record(&row).map_err(&err)?;
    }
    w.flush().map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn tables(args: TablesArgs) -> Result<bool> {
    mkdir(&args.out)?;
    let ns = args.ns.unwrap_or_else(|| PRESET_NS.to_vec());
    let mut records = Vec::new();
    for p in PRESETS {
        let mut cfg = ExperimentConfig::preset(p)?;
        cfg.ns = ns.clone();
        let record = run_experiment(&cfg)?;
        eprintln!("{p}");
        summarize(&record);
        save_record(&record, &args.out.join(p))?;
        records.push((p, record));
    }
    let table = |names: &[&str]| -> Vec<(&str, EnergyTable)> {
        records
            .iter()
            .filter(|(p, _)| names.contains(p))
            .map(|(p, r)| (*p, r.table()))
            .collect()
    };
    write_joined(&table(&["psi1-p1", "psi1-p2"]), &args.out.join("psi1_energy.csv"))?;
    write_joined(&table(&["psi2-p1", "psi2-p2", "psi2-p3"]), &args.out.join("psi2_energy.csv"))?;

    let path = args.out.join("psi2_seminorms.csv");
    let mut w = csv::Writer::from_writer(create(&path)?);
    let err = csv_err(&path);
    w.write_record(["preset", "N", "seminorm"]).map_err(&err)?;
    for (p, r) in records.iter().filter(|(p, _)| p.starts_with("psi2")) {
        for (n, s) in r.seminorms("D") {
            let cell = s.map_or(MISSING.to_string(), |s| format!("{s:.6}"));
            w.write_record([p.to_string(), n.to_string(), cell]).map_err(&err)?;
        }
    }
    w.flush().map_err(|e| Error::Io {
        path: path.clone(),
        source: e,
    })?;
    Ok(records.iter().all(|(_, r)| r.all_converged()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Minimize(a) => minimize(a),
        Command::Sweep(a) => sweep(a),
        Command::GammaCheck(a) => gamma_check(a),
        Command::GradCheck(a) => grad_check(a),
        Command::Tables(a) => tables(a),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("some runs did not converge");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
