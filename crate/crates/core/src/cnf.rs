//! Literals, clause sets and the DIMACS CNF text format.

use std::fmt;
use std::fmt::Write as _;
use std::ops::Not;

use crate::error::{Error, Result};

/// A propositional literal over a 1-based variable id.
///
/// Stored as `2 * (var - 1) + negated` so it can index per-literal tables
/// directly.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Lit(u32);

impl Lit {
    /// Builds a literal. Panics when `var` is 0.
    #[inline]
    pub fn new(var: u32, negated: bool) -> Lit {
        assert!(var >= 1, "variable ids start at 1");
        Lit(((var - 1) << 1) | negated as u32)
    }

    #[inline]
    pub fn pos(var: u32) -> Lit {
        Lit::new(var, false)
    }

    #[inline]
    pub fn neg(var: u32) -> Lit {
        Lit::new(var, true)
    }

    /// Parses a signed DIMACS integer; `0` is rejected.
    pub fn from_dimacs(value: i64) -> Result<Lit> {
        if value == 0 || value.unsigned_abs() > u32::MAX as u64 / 2 {
            return Err(Error::InvalidInput(format!(
                "invalid DIMACS literal {value}"
            )));
        }
        Ok(Lit::new(value.unsigned_abs() as u32, value < 0))
    }

    #[inline]
    pub fn to_dimacs(self) -> i64 {
        let v = self.var() as i64;
        if self.is_negated() {
            -v
        } else {
            v
        }
    }

    /// 1-based variable id.
    #[inline]
    pub fn var(self) -> u32 {
        (self.0 >> 1) + 1
    }

    /// 0-based variable index.
    #[inline]
    pub fn var_index(self) -> usize {
        (self.0 >> 1) as usize
    }

    #[inline]
    pub fn is_negated(self) -> bool {
        self.0 & 1 == 1
    }

    /// Dense code usable as an index into per-literal tables.
    #[inline]
    pub fn code(self) -> usize {
        self.0 as usize
    }

    /// Literal that is true exactly when `var` takes `value`.
    #[inline]
    pub fn with_value(var: u32, value: bool) -> Lit {
        Lit::new(var, !value)
    }

    /// Truth value under a full assignment indexed by 0-based variable.
    #[inline]
    pub fn eval(self, assignment: &[bool]) -> bool {
        assignment[self.var_index()] != self.is_negated()
    }
}

impl Not for Lit {
    type Output = Lit;

    #[inline]
    fn not(self) -> Lit {
        Lit(self.0 ^ 1)
    }
}

impl fmt::Debug for Lit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_dimacs())
    }
}

impl fmt::Display for Lit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_dimacs())
    }
}

/// A conjunction of clauses over variables `1..=num_vars`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CnfFormula {
    pub num_vars: u32,
    pub clauses: Vec<Vec<Lit>>,
}

impl CnfFormula {
    pub fn new(num_vars: u32) -> Self {
        CnfFormula {
            num_vars,
            clauses: Vec::new(),
        }
    }

    pub fn add_clause(&mut self, clause: impl Into<Vec<Lit>>) {
        let clause = clause.into();
        for lit in &clause {
            self.num_vars = self.num_vars.max(lit.var());
        }
        self.clauses.push(clause);
    }

    pub fn num_clauses(&self) -> usize {
        self.clauses.len()
    }

    /// Checks every clause against a full assignment.
    ///
    /// This is deliberately a separate code path from the solver, used to
    /// audit solver models.
    pub fn is_satisfied_by(&self, assignment: &[bool]) -> bool {
        assignment.len() >= self.num_vars as usize
            && self
                .clauses
                .iter()
                .all(|c| c.iter().any(|l| l.eval(assignment)))
    }

    /// Index of the first clause falsified by `assignment`, if any.
    pub fn first_falsified(&self, assignment: &[bool]) -> Option<usize> {
        self.clauses
            .iter()
            .position(|c| !c.iter().any(|l| l.eval(assignment)))
    }

    /// Standard DIMACS text. Byte-deterministic for a given formula.
    pub fn to_dimacs(&self) -> String {
        let mut out = String::with_capacity(16 + self.clauses.len() * 24);
        writeln!(out, "p cnf {} {}", self.num_vars, self.clauses.len()).unwrap();
        for clause in &self.clauses {
            for lit in clause {
                write!(out, "{} ", lit.to_dimacs()).unwrap();
            }
            out.push_str("0\n");
        }
        out
    }

    /// Parses DIMACS CNF. Comment lines (`c ...`) and `%` trailers are skipped;
    /// clauses may span lines.
    pub fn from_dimacs(text: &str) -> Result<CnfFormula> {
        let mut header: Option<(u32, usize)> = None;
        let mut clauses = Vec::new();
        let mut current = Vec::new();

        for (idx, line) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = line.trim();
            if line.is_empty() || line.starts_with('c') {
                continue;
            }
            if line.starts_with('%') {
                break;
            }
            if line.starts_with('p') {
                if header.is_some() {
                    return Err(Error::Parse {
                        line: line_no,
                        message: "duplicate problem line".into(),
                    });
                }
                let fields: Vec<&str> = line.split_whitespace().collect();
                if fields.len() != 4 || fields[1] != "cnf" {
                    return Err(Error::Parse {
                        line: line_no,
                        message: format!("malformed problem line `{line}`"),
                    });
                }
                let parse = |s: &str| {
                    s.parse::<u64>().map_err(|_| Error::Parse {
                        line: line_no,
                        message: format!("bad count `{s}`"),
                    })
                };
                header = Some((parse(fields[2])? as u32, parse(fields[3])? as usize));
                continue;
            }
            let Some((num_vars, _)) = header else {
                return Err(Error::Parse {
                    line: line_no,
                    message: "clause before problem line".into(),
                });
            };
            for token in line.split_whitespace() {
                let value: i64 = token.parse().map_err(|_| Error::Parse {
                    line: line_no,
                    message: format!("bad literal `{token}`"),
                })?;
                if value == 0 {
                    clauses.push(std::mem::take(&mut current));
                    continue;
                }
                if value.unsigned_abs() > num_vars as u64 {
                    return Err(Error::Parse {
                        line: line_no,
                        message: format!("literal {value} exceeds declared {num_vars} variables"),
                    });
                }
                current.push(Lit::from_dimacs(value)?);
            }
        }

        let Some((num_vars, num_clauses)) = header else {
            return Err(Error::Parse {
                line: 0,
                message: "missing problem line".into(),
            });
        };
        if !current.is_empty() {
            clauses.push(current);
        }
        if clauses.len() != num_clauses {
            return Err(Error::Parse {
                line: 0,
                message: format!(
                    "header declares {num_clauses} clauses, found {}",
                    clauses.len()
                ),
            });
        }
        Ok(CnfFormula { num_vars, clauses })
    }
}
