//! Command-line harness: decompositions, norm tables, sparse forms and the
//! scaling experiments, all with CSV output.

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use sparsedom::csvio;
use sparsedom::cube::DyadicCube;
use sparsedom::cz::{combined_cz, CzConfig, CzMode};
use sparsedom::dyadic::measure_csq;
use sparsedom::experiments::{run_experiment, ExperimentConfig};
use sparsedom::norms::{AklTable, ProbeBudget};
use sparsedom::sparse::{greedy_lambda_star, MaximizerOptions};
use sparsedom::symbols::parse_symbol_spec;

#[derive(Parser)]
#[command(name = "sparsedom", about = "dyadic decompositions, multiplier norms and sparse forms on periodic grids")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the atomic + Calderon-Zygmund decomposition on input functions
    /// and emit lemma reports.
    Decompose {
        /// CSV file with f1 (dim/log_size header + index,re,im rows)
        #[arg(long)]
        f1: PathBuf,
        /// CSV file with f2; defaults to f1
        #[arg(long)]
        f2: Option<PathBuf>,
        /// log side of the reference cube (default: grid log - 2, centered)
        #[arg(long)]
        s0_log: Option<u32>,
        #[arg(long, default_value_t = 1.5)]
        p: f64,
        #[arg(long, default_value_t = 2.0)]
        q: f64,
        #[arg(long, default_value_t = 0.5)]
        gamma: f64,
        /// `paper` or `experiment`
        #[arg(long, default_value = "experiment")]
        mode: String,
        #[arg(long, default_value_t = 64)]
        csq_seeds: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Piece-norm table A^{k,l} for a symbol spec.
    Norms {
        /// symbol spec string, e.g. "kind=oscillatory a=2 b=0.5 ref_freq=4"
        #[arg(long)]
        symbol: String,
        #[arg(long, default_value_t = 1)]
        dim: u8,
        #[arg(long, default_value_t = 9)]
        grid_log: u32,
        #[arg(long, default_value_t = 1.5)]
        p: f64,
        #[arg(long, default_value_t = 1.5)]
        r: f64,
        #[arg(long, default_value_t = 2.0)]
        q: f64,
        #[arg(long, default_value_t = 5)]
        ell_max: u32,
        #[arg(long)]
        out: PathBuf,
    },
    /// Packed-family sparse form maximization for a pair of functions.
    Sparse {
        #[arg(long)]
        f1: PathBuf,
        #[arg(long)]
        f2: PathBuf,
        #[arg(long, default_value_t = 1.5)]
        p1: f64,
        #[arg(long, default_value_t = 1.5)]
        p2: f64,
        #[arg(long, default_value_t = 0.5)]
        gamma: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Named experiment with key=value config.
    Experiment {
        name: String,
        /// key=value lines
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() {
    if let Err(e) = run() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}

fn run() -> sparsedom::Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Decompose { f1, f2, s0_log, p, q, gamma, mode, csq_seeds, out } => {
            let f1 = csvio::grid_function_from_csv(&std::fs::read_to_string(&f1)?)?;
            let f2v = match f2 {
                Some(path) => csvio::grid_function_from_csv(&std::fs::read_to_string(&path)?)?,
                None => f1.clone(),
            };
            let grid_log = f1.log_size();
            let s0_log = s0_log.unwrap_or(grid_log.saturating_sub(2));
            let side = 1usize << s0_log;
            let corner = ((1usize << grid_log) / 2 / side) * side;
            let s0 = DyadicCube::new(f1.dim(), [corner, if f1.dim() == 2 { corner } else { 0 }], s0_log);
            let f1 = f1.restrict(&s0);
            let mode = if mode == "paper" { CzMode::Paper } else { CzMode::Experiment };
            let csq = measure_csq(f1.dim(), grid_log, p, csq_seeds);
            let cfg = CzConfig::new(p, q, gamma, mode, csq)?;
            // clip f2 to the triple of s0
            let mut f2c = sparsedom::grid::GridFunction::zero(f1.dim(), grid_log);
            for pt in s0.triple_points(grid_log) {
                let idx = f2c.index_of(&pt);
                f2c.values_mut()[idx] = f2v.values()[idx];
            }
            let dec = combined_cz(&f1, &f2c, &s0, &cfg)?;
            let mut rows = Vec::new();
            rows.extend(sparsedom::cz::verify_exact_splits(&dec));
            rows.push(sparsedom::cz::verify_good_sq_bound(&dec));
            rows.push(sparsedom::cz::verify_o_tilde_size(&dec));
            let (wq_rows, violations) = sparsedom::cz::verify_w_in_q(&dec);
            rows.extend(wq_rows);
            rows.extend(sparsedom::cz::verify_f2_cz(&dec));
            rows.extend(sparsedom::cz::verify_key_estimates(&dec));
            rows.extend(sparsedom::cz::verify_stopping_time(&dec));
            rows.extend(sparsedom::cz::verify_bad_regrouping(&dec));
            csvio::write_file(&out.join("lemmas.csv"), &csvio::lemma_rows_to_csv(&rows))?;
            csvio::write_file(
                &out.join("atomic_summary.csv"),
                &csvio::atomic_summary_to_csv(&dec.atomic),
            )?;
            if !violations.is_empty() {
                let mut s = String::from("mu,corner0,corner1,log_side,o_tilde_card\n");
                for v in &violations {
                    s.push_str(&format!(
                        "{},{},{},{},{}\n",
                        v.mu, v.w.corner[0], v.w.corner[1], v.w.log_side, v.o_tilde_card
                    ));
                }
                csvio::write_file(&out.join("containment_violations.csv"), &s)?;
            }
            println!("decompose: {} lemma rows, {} violations", rows.len(), violations.len());
            Ok(())
        }
        Command::Norms { symbol, dim, grid_log, p, r, q, ell_max, out } => {
            let m = parse_symbol_spec(&symbol)?;
            let pair = sparsedom::calderon::CalderonPair::new();
            let k_range: Vec<i32> = pair.k_range(dim, grid_log).collect();
            let table = AklTable::build(
                &m,
                dim,
                grid_log,
                &k_range,
                ell_max,
                p,
                r,
                q,
                &ProbeBudget::default(),
            )?;
            let (lo, up, tail) = table.cal_a();
            let mut s = csvio::akl_table_to_csv(&table);
            s.push_str(&format!("cal_a_lower,{lo}\ncal_a_upper,{up}\ncal_a_tail,{tail}\n"));
            csvio::write_file(&out, &s)?;
            println!("norms: cal_a in [{lo}, {up}], tail {tail}");
            Ok(())
        }
        Command::Sparse { f1, f2, p1, p2, gamma, out } => {
            let f1 = csvio::grid_function_from_csv(&std::fs::read_to_string(&f1)?)?;
            let f2 = csvio::grid_function_from_csv(&std::fs::read_to_string(&f2)?)?;
            let (value, family) =
                greedy_lambda_star(&f1, &f2, p1, p2, gamma, &MaximizerOptions::default())?;
            let mut s = format!("lambda_star_lower,{value}\n");
            s.push_str(&csvio::sparse_family_to_csv(&family));
            csvio::write_file(&out, &s)?;
            println!("sparse: lambda* >= {value} over {} cubes", family.cubes.len());
            Ok(())
        }
        Command::Experiment { name, config, seed, out } => {
            let mut cfg = match config {
                Some(path) => ExperimentConfig::parse(&std::fs::read_to_string(&path)?),
                None => ExperimentConfig::default(),
            };
            if let Some(s) = seed {
                cfg.set("seed", s);
            }
            let result = run_experiment(&name, &cfg)?;
            csvio::write_file(&out, &result.csv)?;
            for (label, fit) in &result.fits {
                println!(
                    "{name}: {label} slope={:.4} intercept={:.3} residual={:.3}",
                    fit.slope, fit.intercept, fit.residual
                );
            }
            println!("{name}: wrote {}", out.display());
            Ok(())
        }
    }
}
