//! `cote` — compress a regression-tree ensemble into one decision list,
//! and evaluate decision lists against labelled examples.
//!
//! Exit codes: 0 success, 1 usage error, 2 input error, 3 time budget
//! exhausted (a partial report is still written), 4 the compressed list
//! failed its faithfulness self-check.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use cote_core::compress::{ecote, predict, prep, scote, CompressionMode, ScoteOptions};
use cote_core::coverage::{ExampleSet, FactBase};
use cote_core::error::Error;
use cote_core::io::{parse_examples, parse_facts, parse_list, parse_model, write_list, Model};
use cote_core::logic::{Atom, DecisionList};
use cote_core::metrics::{auc_pr, auc_roc, compression_stats, CompressionStats, Faithfulness, RunReport};
use cote_core::subsumption::{Deadline, SearchBudget};
use cote_core::synth::fuzz_instances;
use cote_core::tree::eval_ensemble;

/// Seed for the fresh instances probed by the faithfulness self-check.
const FUZZ_SEED: u64 = 0xC07E;
const FUZZ_INSTANCES: usize = 200;

const EXIT_USAGE: u8 = 1;
const EXIT_INPUT: u8 = 2;
const EXIT_BUDGET: u8 = 3;
const EXIT_UNFAITHFUL: u8 = 4;

#[derive(Parser)]
#[command(
    name = "cote",
    version,
    about = "Compress regression-tree ensembles into ordered decision lists"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Compress an ensemble model into a decision list
    Compress(CompressArgs),
    /// Score labelled examples with a decision list
    Eval(EvalArgs),
}

#[derive(Args)]
struct CompressArgs {
    /// Ensemble model file
    #[arg(long)]
    model: PathBuf,
    /// `scote` (logically equivalent) or `ecote` (training-set faithful)
    #[arg(long, value_parser = parse_mode)]
    mode: CompressionMode,
    /// Background facts file
    #[arg(long)]
    facts: PathBuf,
    /// Positive examples (required for ecote)
    #[arg(long)]
    pos: Option<PathBuf>,
    /// Negative examples (required for ecote)
    #[arg(long)]
    neg: Option<PathBuf>,
    /// Where to write the decision list
    #[arg(long)]
    out: PathBuf,
    /// Where to write the key=value run report
    #[arg(long)]
    report: Option<PathBuf>,
    /// Where to dump the group subsumption matrix as CSV (scote only)
    #[arg(long)]
    sm_diagnostics: Option<PathBuf>,
    /// Abort with a partial report after this many seconds
    #[arg(long)]
    budget_seconds: Option<f64>,
    /// Backtrack limit per subsumption test
    #[arg(long, default_value_t = 1_000_000)]
    max_backtracks: u64,
    /// Time limit per subsumption test, in seconds
    #[arg(long, default_value_t = 5.0)]
    per_test_seconds: f64,
    /// Escalate missed rule-removal candidates to an exact whole-clause test
    #[arg(long)]
    exact_clause_subsumption: bool,
}

#[derive(Args)]
struct EvalArgs {
    /// Decision list file
    #[arg(long)]
    list: PathBuf,
    /// Background facts file
    #[arg(long)]
    facts: PathBuf,
    /// Positive examples
    #[arg(long)]
    pos: PathBuf,
    /// Negative examples
    #[arg(long)]
    neg: PathBuf,
    /// Display scores through the logistic function
    #[arg(long)]
    sigmoid: bool,
    /// Print key=value lines instead of the table
    #[arg(long)]
    machine: bool,
}

fn parse_mode(s: &str) -> Result<CompressionMode, String> {
    CompressionMode::from_str(s).ok_or_else(|| format!("unknown mode `{s}` (use scote or ecote)"))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let outcome = match cli.cmd {
        Cmd::Compress(args) => run_compress(args),
        Cmd::Eval(args) => run_eval(args),
    };
    match outcome {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            let code = match err {
                Error::BudgetExhausted { .. } => EXIT_BUDGET,
                _ => EXIT_INPUT,
            };
            ExitCode::from(code)
        }
    }
}

fn read_file(path: &Path) -> Result<String, Error> {
    fs::read_to_string(path).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", path.display()),
        ))
    })
}

fn write_file(path: &Path, content: &str) -> Result<(), Error> {
    fs::write(path, content).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", path.display()),
        ))
    })
}

fn load_examples(
    pos: &Path,
    neg: &Path,
) -> Result<ExampleSet, Error> {
    let (pos_atoms, warnings) = parse_examples(&read_file(pos)?)
        .map_err(|e| e.in_file(&pos.display().to_string()))?;
    for w in warnings {
        eprintln!("warning: {}: {w}", pos.display());
    }
    let (neg_atoms, warnings) = parse_examples(&read_file(neg)?)
        .map_err(|e| e.in_file(&neg.display().to_string()))?;
    for w in warnings {
        eprintln!("warning: {}: {w}", neg.display());
    }
    ExampleSet::new(pos_atoms, neg_atoms)
}

/// Warn about body predicates with no facts behind them: their atoms can
/// never hold, which is legal but usually a misspelling.
fn warn_unknown_predicates<'a>(fb: &FactBase, bodies: impl Iterator<Item = &'a Atom>) {
    let mut missing = BTreeSet::new();
    for atom in bodies {
        if !fb.has_predicate(atom.predicate(), atom.arity()) {
            missing.insert(format!("{}/{}", atom.predicate(), atom.arity()));
        }
    }
    for sig in missing {
        eprintln!(
            "warning: predicate `{sig}` does not appear in the fact base; its atoms never hold"
        );
    }
}

fn model_body_atoms(model: &Model) -> Vec<Atom> {
    fn walk(node: &cote_core::tree::TreeNode, out: &mut Vec<Atom>) {
        if let cote_core::tree::TreeNode::Inner { tests, yes, no } = node {
            out.extend(tests.iter().cloned());
            walk(yes, out);
            walk(no, out);
        }
    }
    let mut out = Vec::new();
    for tree in &model.trees {
        walk(tree.root(), &mut out);
    }
    out
}

/// Constants the faithfulness probe may build instances from: everything
/// in the fact base plus everything named by an example.
fn probe_constants(fb: &FactBase, examples: Option<&ExampleSet>) -> Vec<String> {
    let mut set: BTreeSet<String> = fb.constants().into_iter().collect();
    if let Some(es) = examples {
        for (atom, _) in es.iter() {
            for t in atom.args() {
                set.insert(t.name().to_string());
            }
        }
    }
    set.into_iter().collect()
}

fn run_compress(args: CompressArgs) -> Result<ExitCode, Error> {
    let started = Instant::now();

    let model = parse_model(&read_file(&args.model)?)
        .map_err(|e| e.in_file(&args.model.display().to_string()))?;
    let facts = parse_facts(&read_file(&args.facts)?)
        .map_err(|e| e.in_file(&args.facts.display().to_string()))?;
    let fb = FactBase::new(facts)?;

    let examples = match (&args.pos, &args.neg) {
        (Some(pos), Some(neg)) => Some(load_examples(pos, neg)?),
        (None, None) => None,
        _ => {
            eprintln!("error: --pos and --neg must be given together");
            return Ok(ExitCode::from(EXIT_USAGE));
        }
    };
    if args.mode == CompressionMode::Ecote && examples.is_none() {
        eprintln!("error: ecote needs training examples; pass --pos and --neg");
        return Ok(ExitCode::from(EXIT_USAGE));
    }

    warn_unknown_predicates(&fb, model_body_atoms(&model).iter());

    let budget = SearchBudget::new(
        args.max_backtracks,
        Duration::from_secs_f64(args.per_test_seconds),
    )?;
    let deadline = match args.budget_seconds {
        Some(s) if s <= 0.0 => {
            eprintln!("error: --budget-seconds must be positive");
            return Ok(ExitCode::from(EXIT_USAGE));
        }
        Some(s) => Deadline::after(Duration::from_secs_f64(s)),
        None => Deadline::none(),
    };

    let run = prep(&model.target, &model.trees, model.combine, &budget, deadline).and_then(
        |prepared| match args.mode {
            CompressionMode::Scote => scote(
                &prepared,
                &ScoteOptions {
                    budget: budget.clone(),
                    deadline,
                    exact_clause_fallback: args.exact_clause_subsumption,
                },
            ),
            CompressionMode::Ecote => {
                let empty;
                let es = match &examples {
                    Some(es) => es,
                    None => {
                        empty = ExampleSet::new(vec![], vec![])?;
                        &empty
                    }
                };
                ecote(&prepared, &fb, es, deadline)
            }
        },
    );

    let compressed = match run {
        Ok(c) => c,
        Err(Error::BudgetExhausted {
            phase,
            elapsed,
            progress,
        }) => {
            // partial report: how far the run got before the deadline
            if let Some(report_path) = &args.report {
                let report = RunReport {
                    mode: args.mode,
                    stats: CompressionStats {
                        rules_before: cote_core::metrics::naive_max_clauses(&model.trees),
                        rules_after: progress.rules_so_far,
                        avg_body_len: 0.0,
                        paths_total: model.trees.iter().map(|t| t.path_count()).sum(),
                        max_depth: model.trees.iter().map(|t| t.max_depth()).max().unwrap_or(0),
                    },
                    wall_time: started.elapsed(),
                    budget_aborts: 0,
                    faithfulness: Faithfulness::Unchecked,
                    aborted_phase: Some(phase),
                };
                write_file(report_path, &report.render())?;
                eprintln!("partial report written to {}", report_path.display());
            }
            eprintln!(
                "error: time budget exhausted during {phase} after {:.1}s \
                 ({} iterations done, {} rules formed)",
                elapsed.as_secs_f64(),
                progress.iterations_done,
                progress.rules_so_far
            );
            return Ok(ExitCode::from(EXIT_BUDGET));
        }
        Err(e) => return Err(e),
    };

    // self-check: the list must score exactly like the ensemble — on the
    // training examples always, and on fresh instances for scote
    let mut probes: Vec<Atom> = Vec::new();
    if let Some(es) = &examples {
        probes.extend(es.iter().map(|(a, _)| a.clone()));
    }
    if args.mode == CompressionMode::Scote {
        probes.extend(fuzz_instances(
            &model.target,
            &probe_constants(&fb, examples.as_ref()),
            FUZZ_INSTANCES,
            FUZZ_SEED,
        ));
    }
    let mut violations = 0usize;
    for instance in &probes {
        let direct = eval_ensemble(&model.target, &model.trees, model.combine, &fb, instance)?;
        let listed = predict(&compressed.list, &fb, instance)?;
        if direct.to_bits() != listed.to_bits() {
            violations += 1;
        }
    }
    let faithfulness = if violations > 0 {
        Faithfulness::Violated(violations)
    } else if args.mode == CompressionMode::Scote {
        Faithfulness::Exact
    } else {
        Faithfulness::TrainExact
    };

    write_file(&args.out, &write_list(&compressed.list, Some(args.mode)))?;

    if let Some(csv_path) = &args.sm_diagnostics {
        match &compressed.sm {
            Some(sm) => {
                let mut buf = Vec::new();
                sm.write_diagnostics_csv(&mut buf)?;
                write_file(csv_path, &String::from_utf8_lossy(&buf))?;
            }
            None => eprintln!(
                "warning: --sm-diagnostics ignored: ecote does not build a subsumption matrix"
            ),
        }
    }

    let stats = compression_stats(&model.trees, &compressed.list);
    let report = RunReport {
        mode: args.mode,
        stats: stats.clone(),
        wall_time: started.elapsed(),
        budget_aborts: compressed.budget_aborts,
        faithfulness,
        aborted_phase: None,
    };
    if let Some(report_path) = &args.report {
        write_file(report_path, &report.render())?;
    }

    println!(
        "compressed {} trees ({} paths) into {} rules",
        model.trees.len(),
        stats.paths_total,
        stats.rules_after
    );
    println!("  mode            {}", args.mode.as_str());
    println!("  rules before    {}", stats.rules_before);
    println!("  rules after     {}", stats.rules_after);
    println!("  avg body len    {:?}", stats.avg_body_len);
    println!("  max depth       {}", stats.max_depth);
    println!("  budget aborts   {}", compressed.budget_aborts);
    println!("  faithfulness    {faithfulness}");
    println!("  wall time       {} ms", report.wall_time.as_millis());
    println!("wrote decision list to {}", args.out.display());
    if let Some(report_path) = &args.report {
        println!("wrote report to {}", report_path.display());
    }

    if violations > 0 {
        eprintln!(
            "error: the compressed list disagrees with the ensemble on {violations} of {} probes",
            probes.len()
        );
        return Ok(ExitCode::from(EXIT_UNFAITHFUL));
    }
    Ok(ExitCode::SUCCESS)
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn run_eval(args: EvalArgs) -> Result<ExitCode, Error> {
    let (list, _mode) = parse_list(&read_file(&args.list)?)
        .map_err(|e| e.in_file(&args.list.display().to_string()))?;
    let facts = parse_facts(&read_file(&args.facts)?)
        .map_err(|e| e.in_file(&args.facts.display().to_string()))?;
    let fb = FactBase::new(facts)?;
    let examples = load_examples(&args.pos, &args.neg)?;

    warn_unknown_predicates(&fb, list.rules().iter().flat_map(|r| r.body().iter()));
    check_example_shape(&list, &examples)?;

    let mut scored = Vec::with_capacity(examples.len());
    for (atom, label) in examples.iter() {
        let mut score = predict(&list, &fb, atom)?;
        if args.sigmoid {
            score = sigmoid(score);
        }
        scored.push((score, *label));
    }

    let roc = auc_roc(&scored)?;
    let pr = auc_pr(&scored)?;
    if args.machine {
        println!("examples={}", scored.len());
        println!("pos={}", examples.pos_count());
        println!("neg={}", examples.neg_count());
        println!("auc_roc={roc:?}");
        println!("auc_pr={pr:?}");
    } else {
        println!(
            "evaluated {} examples ({} pos / {} neg){}",
            scored.len(),
            examples.pos_count(),
            examples.neg_count(),
            if args.sigmoid { ", sigmoid scores" } else { "" }
        );
        println!("  auc_roc  {roc:.4}");
        println!("  auc_pr   {pr:.4}");
    }
    Ok(ExitCode::SUCCESS)
}

fn check_example_shape(list: &DecisionList, examples: &ExampleSet) -> Result<(), Error> {
    for (atom, _) in examples.iter() {
        if atom.predicate() != list.head().predicate() || atom.arity() != list.head().arity() {
            return Err(Error::Invariant(format!(
                "example `{atom}` does not match the list's target `{}`",
                list.head()
            )));
        }
    }
    Ok(())
}
