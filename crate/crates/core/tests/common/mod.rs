//! Oracles shared by the integration test targets. Nothing here calls the
//! solver: satisfiability is decided by enumeration and unit propagation.

#![allow(dead_code)]

use std::path::PathBuf;

use bnnsat::cnf::{CnfFormula, Lit};
use bnnsat::encode::{seq_counter, ClauseBuilder};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/mnist")
}

/// Clause as a pair of bit masks over at most 32 variables.
#[derive(Clone, Copy)]
struct MaskClause {
    pos: u32,
    neg: u32,
}

fn masks(formula: &CnfFormula) -> Vec<MaskClause> {
    assert!(formula.num_vars <= 32);
    formula
        .clauses
        .iter()
        .map(|c| {
            let mut m = MaskClause { pos: 0, neg: 0 };
            for l in c {
                let bit = 1u32 << (l.var() - 1);
                if l.is_negated() {
                    m.neg |= bit;
                } else {
                    m.pos |= bit;
                }
            }
            m
        })
        .collect()
}

/// Clause-by-clause evaluation written independently of the library.
pub fn satisfies(formula: &CnfFormula, model: &[bool]) -> bool {
    formula.clauses.iter().all(|c| {
        c.iter().any(|l| {
            let v = model[(l.var() - 1) as usize];
            v != l.is_negated()
        })
    })
}

/// Number of models of a formula over at most 20 variables.
pub fn brute_force_count(formula: &CnfFormula) -> u64 {
    assert!(formula.num_vars <= 20);
    let cs = masks(formula);
    let mut count = 0;
    for a in 0u32..(1 << formula.num_vars) {
        if cs.iter().all(|c| (a & c.pos) | (!a & c.neg) != 0) {
            count += 1;
        }
    }
    count
}

/// Random CNF; most clauses have `max_width` literals, one in ten is
/// shorter.
pub fn random_cnf(rng: &mut ChaCha8Rng, vars: u32, clauses: usize, max_width: usize) -> CnfFormula {
    let mut f = CnfFormula::new(vars);
    let max_width = max_width.min(vars as usize);
    for _ in 0..clauses {
        let width = if rng.random_bool(0.1) {
            rng.random_range(1..=max_width)
        } else {
            max_width
        };
        let mut c: Vec<Lit> = Vec::with_capacity(width);
        while c.len() < width {
            let v = rng.random_range(1..=vars);
            if c.iter().all(|l| l.var() != v) {
                c.push(Lit::new(v, rng.random_bool(0.5)));
            }
        }
        f.add_clause(c);
    }
    f
}

/// Corpus of small formulas around and away from the 3-SAT threshold.
pub fn cnf_corpus(count: usize, seed: u64) -> Vec<CnfFormula> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let vars = rng.random_range(1..=20u32);
            let density = [1.5, 3.5, 4.5, 6.0][i % 4];
            let clauses = ((vars as f64 * density).round() as usize).max(1);
            let width = if i % 5 == 0 { 2 } else { 3 };
            random_cnf(&mut rng, vars, clauses, width)
        })
        .collect()
}

/// `pigeons` pigeons into `holes` holes, one variable per (pigeon, hole).
pub fn pigeonhole(pigeons: u32, holes: u32) -> CnfFormula {
    let var = |p: u32, h: u32| p * holes + h + 1;
    let mut f = CnfFormula::new(pigeons * holes);
    for p in 0..pigeons {
        f.add_clause((0..holes).map(|h| Lit::pos(var(p, h))).collect::<Vec<_>>());
    }
    for h in 0..holes {
        for p in 0..pigeons {
            for q in p + 1..pigeons {
                f.add_clause(vec![Lit::neg(var(p, h)), Lit::neg(var(q, h))]);
            }
        }
    }
    f
}

/// Whether `clauses` has a model extending the partial assignment, decided
/// by unit propagation followed by enumeration of whatever is left open.
fn extendable(num_vars: usize, clauses: &[Vec<Lit>], fixed: &[(u32, bool)]) -> bool {
    let mut value: Vec<Option<bool>> = vec![None; num_vars + 1];
    for &(v, b) in fixed {
        value[v as usize] = Some(b);
    }
    if !propagate(clauses, &mut value) {
        return false;
    }
    let open: Vec<usize> = (1..=num_vars).filter(|&v| value[v].is_none()).collect();
    assert!(open.len() <= 16, "{} variables left open", open.len());
    (0u32..(1 << open.len())).any(|bits| {
        let mut v2 = value.clone();
        for (i, &v) in open.iter().enumerate() {
            v2[v] = Some(bits >> i & 1 == 1);
        }
        clauses.iter().all(|c| {
            c.iter()
                .any(|l| v2[l.var() as usize] == Some(!l.is_negated()))
        })
    })
}

fn propagate(clauses: &[Vec<Lit>], value: &mut [Option<bool>]) -> bool {
    loop {
        let mut changed = false;
        for c in clauses {
            let mut unassigned = None;
            let mut open = 0;
            let mut sat = false;
            for &l in c {
                match value[l.var() as usize] {
                    Some(b) if b != l.is_negated() => {
                        sat = true;
                        break;
                    }
                    Some(_) => {}
                    None => {
                        open += 1;
                        unassigned = Some(l);
                    }
                }
            }
            if sat {
                continue;
            }
            match (open, unassigned) {
                (0, _) => return false,
                (1, Some(l)) => {
                    value[l.var() as usize] = Some(!l.is_negated());
                    changed = true;
                }
                _ => {}
            }
        }
        if !changed {
            return true;
        }
    }
}

/// Checks the reified at-least-`k` counter over `n` fresh literals against
/// its truth table: for every assignment of the literals and the reify
/// variable, a model exists exactly when `reify == (popcount >= k)`. The
/// unreified form is checked the same way with `reify` replaced by `true`.
pub fn check_seq_counter(n: usize, k: i64) -> Result<(), String> {
    let lits: Vec<Lit> = (1..=n as u32).map(Lit::pos).collect();
    let r = Lit::pos(n as u32 + 1);

    let mut b = ClauseBuilder::new(n as u32 + 1);
    let aux = seq_counter(&mut b, &lits, k, Some(r));
    if aux as usize > n * (k.max(0) as usize) {
        return Err(format!("n={n} k={k}: {aux} registers exceed n*k"));
    }
    let reified = b.into_formula();

    let mut b = ClauseBuilder::new(n as u32);
    seq_counter(&mut b, &lits, k, None);
    let plain = b.into_formula();

    for bits in 0u32..(1 << n) {
        let holds = bits.count_ones() as i64 >= k;
        let mut fixed: Vec<(u32, bool)> =
            (0..n).map(|p| (p as u32 + 1, bits >> p & 1 == 1)).collect();
        if extendable(plain.num_vars as usize, &plain.clauses, &fixed) != holds {
            return Err(format!("n={n} k={k} unreified, inputs {bits:0n$b}"));
        }
        for rv in [false, true] {
            fixed.push((n as u32 + 1, rv));
            if extendable(reified.num_vars as usize, &reified.clauses, &fixed) != (rv == holds) {
                return Err(format!("n={n} k={k} reify={rv}, inputs {bits:0n$b}"));
            }
            fixed.pop();
        }
    }
    Ok(())
}
