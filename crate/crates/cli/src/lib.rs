//! Command-line front end: train, encode, query and verify binarised
//! networks, and a standalone DIMACS solver.

pub mod pgm;

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use bnnsat::encode::{emit_dimacs, emit_manifest, encode_bnn};
use bnnsat::model::{forward_folded, forward_reference};
use bnnsat::sample::{enumerate_preimage, infer_sat, invert, InversionQuery, InversionStatus};
use bnnsat::solve::{SolveStatus, Solver};
use bnnsat::train::{evaluate, train, Dataset, TrainConfig};
use bnnsat::verify::{
    check_inference_equivalence, check_inversion, InputSelection, EXHAUSTIVE_WIDTH,
};
use bnnsat::{Bipolar, BnnModel, CnfFormula, VariableMap};
use clap::{Parser, Subcommand, ValueEnum};
use sha2::{Digest, Sha256};

/// Process exit codes.
pub mod exit {
    pub const OK: u8 = 0;
    pub const ERROR: u8 = 1;
    pub const USAGE: u8 = 2;
    /// A verification harness found a mismatch, or a sample failed re-checking.
    pub const VERIFY_FAILED: u8 = 3;
    /// `solve`: the formula is satisfiable.
    pub const SAT: u8 = 10;
    /// `invert`: no input maps to the label. `solve`: unsatisfiable.
    pub const UNSAT: u8 = 20;
}

#[derive(Debug, Parser)]
#[command(
    name = "bnnsat",
    version,
    about = "Binarised neural networks as SAT problems"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VerifyMode {
    Exhaustive,
    Random,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train on MNIST IDX files and write the model as JSON.
    Train {
        /// Directory holding train-* and t10k-* IDX files (optionally .gz).
        #[arg(long)]
        data_dir: PathBuf,
        /// Layer widths, e.g. 100,20,10. The input width must be a square
        /// unless --image is given.
        #[arg(long, value_parser = parse_arch)]
        arch: Arch,
        /// Image size as WIDTHxHEIGHT.
        #[arg(long, value_parser = parse_shape)]
        image: Option<(usize, usize)>,
        #[arg(long, default_value_t = 25)]
        epochs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        batch_size: usize,
        #[arg(long, default_value_t = 0.2)]
        learning_rate: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compile a model into DIMACS CNF plus a variable manifest.
    Encode {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out_cnf: PathBuf,
        #[arg(long)]
        out_manifest: PathBuf,
    },
    /// Classify one input by solving with the inputs fixed.
    Infer {
        #[arg(long)]
        cnf: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        /// A P5 PGM file, or comma-separated +1/-1 values.
        #[arg(long, allow_hyphen_values = true)]
        input: String,
    },
    /// Sample inputs the network assigns to a label.
    Invert {
        #[arg(long)]
        cnf: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        label: usize,
        #[arg(long, default_value_t = 100)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Never return the same input twice.
        #[arg(long)]
        distinct: bool,
        /// Receives one PGM per sample and report.json.
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// List every input mapped to a label, up to a cap.
    Enumerate {
        #[arg(long)]
        cnf: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        label: usize,
        #[arg(long, default_value_t = 1000)]
        cap: usize,
    },
    /// Check the formula against the network it was compiled from.
    Verify {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        cnf: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        /// Widths up to 16 are always checked exhaustively.
        #[arg(long, value_enum, default_value_t = VerifyMode::Exhaustive)]
        mode: VerifyMode,
        /// Inputs drawn in random mode.
        #[arg(long, default_value_t = 1000)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Solve a DIMACS file, printing `s` and `v` lines. Exits 10 when
    /// satisfiable and 20 when unsatisfiable.
    Solve {
        cnf: PathBuf,
        /// Randomise decisions with this seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Give up after this many conflicts and report UNKNOWN.
        #[arg(long)]
        conflicts: Option<u64>,
        /// Print search statistics as comment lines.
        #[arg(long)]
        stats: bool,
    },
}

/// Layer widths from input to output.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Arch(pub Vec<usize>);

fn parse_arch(s: &str) -> Result<Arch, String> {
    let arch = s
        .split(',')
        .map(|w| {
            w.trim()
                .parse::<usize>()
                .map_err(|_| format!("`{w}` is not a layer width"))
        })
        .collect::<Result<Vec<_>, _>>()?;
    if arch.len() < 2 || arch.contains(&0) {
        return Err("need at least two positive layer widths".into());
    }
    Ok(Arch(arch))
}

fn parse_shape(s: &str) -> Result<(usize, usize), String> {
    let (w, h) = s.split_once('x').ok_or("expected WIDTHxHEIGHT")?;
    let parse = |v: &str| {
        v.parse::<usize>()
            .map_err(|_| format!("`{v}` is not a size"))
    };
    Ok((parse(w)?, parse(h)?))
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn sha256_hex(text: &str) -> String {
    format!("{:x}", Sha256::digest(text.as_bytes()))
}

fn load_model(path: &Path) -> Result<BnnModel> {
    BnnModel::from_json(&read_text(path)?)
        .with_context(|| format!("loading model {}", path.display()))
}

/// Loads a CNF and its manifest, refusing pairs that were not written
/// together.
fn load_encoding(cnf: &Path, manifest: &Path) -> Result<(CnfFormula, VariableMap)> {
    let text = read_text(cnf)?;
    let map = VariableMap::from_json(&read_text(manifest)?)
        .with_context(|| format!("loading manifest {}", manifest.display()))?;
    if let Some(expected) = &map.cnf_sha256 {
        ensure!(
            *expected == sha256_hex(&text),
            "{} does not match the CNF file it was written for",
            manifest.display()
        );
    }
    let formula =
        CnfFormula::from_dimacs(&text).with_context(|| format!("parsing {}", cnf.display()))?;
    ensure!(
        formula.num_vars == map.num_vars,
        "CNF has {} variables, manifest expects {}",
        formula.num_vars,
        map.num_vars
    );
    Ok((formula, map))
}

fn parse_input(spec: &str, map: &VariableMap) -> Result<Vec<Bipolar>> {
    let path = Path::new(spec);
    let x = if path.is_file() {
        let (x, w, h) = pgm::read_pgm(path)?;
        ensure!(
            (w, h) == (map.image.width, map.image.height),
            "image is {w}x{h}, network expects {}x{}",
            map.image.width,
            map.image.height
        );
        x
    } else {
        spec.split(',')
            .map(|v| match v.trim() {
                "1" | "+1" => Ok(1),
                "-1" => Ok(-1),
                other => bail!("`{other}` is neither +1 nor -1"),
            })
            .collect::<Result<Vec<_>>>()?
    };
    ensure!(
        x.len() == map.input_width(),
        "input has {} entries, network expects {}",
        x.len(),
        map.input_width()
    );
    Ok(x)
}

fn check_label(label: usize, map: &VariableMap) -> Result<()> {
    ensure!(
        label < map.classes(),
        "label {label} out of range for {} classes",
        map.classes()
    );
    Ok(())
}

fn signs(x: &[Bipolar]) -> String {
    x.iter().map(|&v| if v > 0 { '+' } else { '-' }).collect()
}

/// Runs one subcommand and returns the process exit code.
pub fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Train {
            data_dir,
            arch,
            image,
            epochs,
            seed,
            batch_size,
            learning_rate,
            out,
        } => {
            let Arch(arch) = arch;
            let (w, h) = match image {
                Some(shape) => shape,
                None => {
                    let side = (arch[0] as f64).sqrt().round() as usize;
                    ensure!(
                        side * side == arch[0],
                        "input width {} is not a square; pass --image",
                        arch[0]
                    );
                    (side, side)
                }
            };
            let train_set = Dataset::load(&data_dir, "train", w, h)?;
            let config = TrainConfig {
                epochs,
                batch_size,
                learning_rate,
                seed,
            };
            let model = train(&train_set, &arch, &config)?;
            write_text(&out, &model.to_json())?;
            println!("train accuracy {:.4}", evaluate(&model, &train_set)?);
            match Dataset::load(&data_dir, "t10k", w, h) {
                Ok(test_set) => println!("test accuracy {:.4}", evaluate(&model, &test_set)?),
                Err(e) => eprintln!("no test split evaluated: {e}"),
            }
            Ok(exit::OK)
        }
        Command::Encode {
            model,
            out_cnf,
            out_manifest,
        } => {
            let model = load_model(&model)?;
            let (formula, mut map) = encode_bnn(&model)?;
            let text = emit_dimacs(&formula);
            map.cnf_sha256 = Some(sha256_hex(&text));
            write_text(&out_cnf, &text)?;
            write_text(&out_manifest, &emit_manifest(&map))?;
            println!("variables {}", formula.num_vars);
            println!("clauses {}", formula.num_clauses());
            Ok(exit::OK)
        }
        Command::Infer {
            cnf,
            manifest,
            input,
        } => {
            let (formula, map) = load_encoding(&cnf, &manifest)?;
            let x = parse_input(&input, &map)?;
            println!("label {}", infer_sat(&formula, &map, &x)?);
            Ok(exit::OK)
        }
        Command::Invert {
            cnf,
            manifest,
            model,
            label,
            samples,
            seed,
            distinct,
            out_dir,
        } => {
            let (formula, map) = load_encoding(&cnf, &manifest)?;
            check_label(label, &map)?;
            let model = load_model(&model)?;
            let query = InversionQuery {
                target_label: label,
                num_samples: samples,
                seed,
                distinct,
            };
            let report = invert(&formula, &map, &model, &query)?;
            fs::create_dir_all(&out_dir)
                .with_context(|| format!("creating {}", out_dir.display()))?;
            for (i, x) in report.inputs.iter().enumerate() {
                let path = out_dir.join(format!("sample_{i:04}.pgm"));
                pgm::write_pgm(&path, x, map.image.width, map.image.height)?;
            }
            write_text(
                &out_dir.join("report.json"),
                &(serde_json::to_string_pretty(&report)? + "\n"),
            )?;
            println!("status {:?}", report.status);
            println!("samples {}", report.inputs.len());
            println!(
                "verified {}",
                report.verified.iter().filter(|&&v| v).count()
            );
            println!("distinct {}", report.distinct_count);
            println!("mean_pairwise_hamming {:.3}", report.mean_pairwise_hamming);
            Ok(match report.status {
                InversionStatus::UnsatLabel => exit::UNSAT,
                _ if !report.all_verified() => exit::VERIFY_FAILED,
                _ => exit::OK,
            })
        }
        Command::Enumerate {
            cnf,
            manifest,
            label,
            cap,
        } => {
            let (formula, map) = load_encoding(&cnf, &manifest)?;
            check_label(label, &map)?;
            let preimage = enumerate_preimage(&formula, &map, label, cap)?;
            for x in &preimage.inputs {
                println!("{}", signs(x));
            }
            println!("count {}", preimage.inputs.len());
            println!("truncated {}", preimage.truncated);
            Ok(exit::OK)
        }
        Command::Verify {
            model,
            cnf,
            manifest,
            mode,
            count,
            seed,
        } => {
            let (formula, map) = load_encoding(&cnf, &manifest)?;
            let model = load_model(&model)?;
            let selection = match mode {
                VerifyMode::Exhaustive => InputSelection::Exhaustive,
                VerifyMode::Random => InputSelection::Random { count, seed },
            };
            let inference = check_inference_equivalence(&model, &formula, &map, selection)?;
            println!(
                "inference checked {} mismatches {}",
                inference.total_checked,
                inference.mismatches.len()
            );
            let mut pass = inference.pass;
            if model.input_width() <= EXHAUSTIVE_WIDTH {
                let inversion = check_inversion(&model, &formula, &map)?;
                println!(
                    "preimages checked {} mismatches {}",
                    inversion.total_checked,
                    inversion.mismatches.len()
                );
                pass &= inversion.pass;
            }
            // Real-valued and integer inference may disagree on inputs that
            // land exactly on a rounding boundary; reported, not judged.
            let width = model.input_width();
            let mut divergent = 0usize;
            let mut examined = 0usize;
            let mut probe = |x: &[Bipolar]| -> Result<()> {
                examined += 1;
                if forward_reference(&model, x)?.0 != forward_folded(&model, x)?.0 {
                    divergent += 1;
                }
                Ok(())
            };
            if width <= EXHAUSTIVE_WIDTH {
                for bits in 0..1u64 << width {
                    probe(&bnnsat::model::bipolar_from_bits(bits, width))?;
                }
            } else {
                for m in &inference.mismatches {
                    probe(&m.input)?;
                }
            }
            if examined > 0 {
                println!("reference/folded divergence {divergent} of {examined}");
            }
            for m in inference.mismatches.iter().take(5) {
                println!(
                    "mismatch {} expected {:?} got {:?}",
                    signs(&m.input),
                    m.expected,
                    m.got
                );
            }
            println!("{}", if pass { "PASS" } else { "FAIL" });
            Ok(if pass { exit::OK } else { exit::VERIFY_FAILED })
        }
        Command::Solve {
            cnf,
            seed,
            conflicts,
            stats,
        } => {
            let formula = CnfFormula::from_dimacs(&read_text(&cnf)?)
                .with_context(|| format!("parsing {}", cnf.display()))?;
            let mut solver = Solver::from_formula(&formula);
            solver.set_conflict_budget(conflicts);
            let outcome = match seed {
                Some(s) => solver.solve_randomized(&[], s),
                None => solver.solve(&[]),
            };
            if stats {
                for line in outcome.stats.to_string().lines() {
                    println!("c {line}");
                }
            }
            Ok(match (outcome.status, outcome.model) {
                (SolveStatus::Sat, Some(model)) => {
                    println!("s SATISFIABLE");
                    let mut line = String::from("v");
                    for (i, &v) in model.iter().enumerate() {
                        let lit = if v { i as i64 + 1 } else { -(i as i64 + 1) };
                        line.push_str(&format!(" {lit}"));
                        if line.len() > 72 {
                            println!("{line}");
                            line = String::from("v");
                        }
                    }
                    println!("{line} 0");
                    exit::SAT
                }
                (SolveStatus::Unsat, _) => {
                    println!("s UNSATISFIABLE");
                    exit::UNSAT
                }
                _ => {
                    println!("s UNKNOWN");
                    exit::OK
                }
            })
        }
    }
}
