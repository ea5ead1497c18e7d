//! Cardinality constraints and their sequential-counter lowering to clauses.

use crate::cnf::{CnfFormula, Lit};

/// Appends clauses and hands out fresh variable ids.
#[derive(Debug, Clone, Default)]
pub struct ClauseBuilder {
    next_var: u32,
    clauses: Vec<Vec<Lit>>,
}

impl ClauseBuilder {
    /// Starts allocating after the `reserved` ids already in use.
    pub fn new(reserved: u32) -> Self {
        ClauseBuilder {
            next_var: reserved + 1,
            clauses: Vec::new(),
        }
    }

    pub fn fresh(&mut self) -> Lit {
        let v = self.next_var;
        self.next_var += 1;
        Lit::pos(v)
    }

    pub fn num_vars(&self) -> u32 {
        self.next_var - 1
    }

    pub fn clause(&mut self, lits: &[Lit]) {
        self.clauses.push(lits.to_vec());
    }

    pub fn clauses(&self) -> &[Vec<Lit>] {
        &self.clauses
    }

    pub fn into_formula(self) -> CnfFormula {
        CnfFormula {
            num_vars: self.next_var - 1,
            clauses: self.clauses,
        }
    }
}

/// How a reified constraint is tied to its indicator literal.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Link {
    Equivalent,
    /// Only `reify -> constraint`.
    ReifyImpliesConstraint,
    /// Only `constraint -> reify`.
    ConstraintImpliesReify,
}

/// `sense` of a linear constraint on a bipolar dot product.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    AtLeast,
    AtMost,
}

/// "At least `bound` of `literals` are true", optionally reified:
/// `reify <-> (at least bound true)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CardConstraint {
    pub literals: Vec<Lit>,
    pub bound: i64,
    pub reify: Option<Lit>,
}

impl CardConstraint {
    pub fn holds(&self, assignment: &[bool]) -> bool {
        let count = self.literals.iter().filter(|l| l.eval(assignment)).count() as i64;
        count >= self.bound
    }
}

fn floor_half(v: i64) -> i64 {
    v.div_euclid(2)
}

fn ceil_half(v: i64) -> i64 {
    -(-v).div_euclid(2)
}

/// Rewrites `<a, x> >= c` (or `<= c`) over bipolar `x` as a count of true
/// literals, using `<a, x> = 2 * (#satisfied) - n`.
///
/// Position `p` contributes `input_lits[p]` when `a_p = +1`, its negation
/// otherwise. `AtMost` counts the falsified literals instead.
pub fn dot_to_card(weights_row: &[i8], input_lits: &[Lit], c: i64, sense: Sense) -> CardConstraint {
    assert_eq!(
        weights_row.len(),
        input_lits.len(),
        "weights/literals length"
    );
    let n = weights_row.len() as i64;
    let aligned = weights_row
        .iter()
        .zip(input_lits)
        .map(|(&w, &l)| if w > 0 { l } else { !l });
    let (literals, bound): (Vec<Lit>, i64) = match sense {
        Sense::AtLeast => (aligned.collect(), ceil_half(c + n)),
        Sense::AtMost => (aligned.map(|l| !l).collect(), n - floor_half(c + n)),
    };
    CardConstraint {
        literals,
        bound: bound.clamp(0, n + 1),
        reify: None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Signal {
    Const(bool),
    Lit(Lit),
}

impl Signal {
    fn known(self, value: bool) -> bool {
        self == Signal::Const(value)
    }
}

/// Ties `out` to `signal` through `link`.
fn bind(b: &mut ClauseBuilder, out: Lit, signal: Signal, link: Link) {
    let forward = link != Link::ConstraintImpliesReify;
    let backward = link != Link::ReifyImpliesConstraint;
    match signal {
        Signal::Const(true) if backward => b.clause(&[out]),
        Signal::Const(false) if forward => b.clause(&[!out]),
        Signal::Const(_) => {}
        Signal::Lit(s) => {
            if forward {
                b.clause(&[!out, s]);
            }
            if backward {
                b.clause(&[out, !s]);
            }
        }
    }
}

/// `out <-> prev_same OR (x AND prev_less)` with constant folding. Returns the
/// resulting signal; a fresh variable is only introduced when needed.
fn counter_cell(b: &mut ClauseBuilder, prev_same: Signal, x: Lit, prev_less: Signal) -> Signal {
    if prev_same.known(true) {
        return Signal::Const(true);
    }
    match (prev_same, prev_less) {
        (_, Signal::Const(false)) => prev_same,
        (Signal::Const(false), Signal::Const(true)) => Signal::Lit(x),
        (Signal::Const(false), Signal::Lit(l)) => {
            let o = b.fresh();
            b.clause(&[!o, x]);
            b.clause(&[!o, l]);
            b.clause(&[!x, !l, o]);
            Signal::Lit(o)
        }
        (Signal::Lit(a), Signal::Const(true)) => {
            let o = b.fresh();
            b.clause(&[!a, o]);
            b.clause(&[!x, o]);
            b.clause(&[!o, a, x]);
            Signal::Lit(o)
        }
        (Signal::Lit(a), Signal::Lit(l)) => {
            let o = b.fresh();
            b.clause(&[!a, o]);
            b.clause(&[!x, !l, o]);
            b.clause(&[!o, a, x]);
            b.clause(&[!o, a, l]);
            Signal::Lit(o)
        }
        (Signal::Const(true), _) => unreachable!(),
    }
}

/// Sequential (unary) counter for "at least `k` of `literals`".
///
/// Register `(i, j)` is equivalent to "at least `j` of the first `i`
/// literals are true", so every register is functionally determined by the
/// literals. Registers that cannot influence the final count are skipped,
/// which keeps the register count at most `n * k`.
///
/// Without `reify` the constraint is asserted. With `reify = r` the clauses
/// force `r <-> (at least k true)`. Returns the number of auxiliary variables
/// introduced.
pub fn seq_counter(b: &mut ClauseBuilder, literals: &[Lit], k: i64, reify: Option<Lit>) -> u32 {
    seq_counter_linked(b, literals, k, reify, Link::Equivalent)
}

pub(crate) fn seq_counter_linked(
    b: &mut ClauseBuilder,
    literals: &[Lit],
    k: i64,
    reify: Option<Lit>,
    link: Link,
) -> u32 {
    let start = b.num_vars();
    let n = literals.len() as i64;
    let result = if k <= 0 {
        Signal::Const(true)
    } else if k > n {
        Signal::Const(false)
    } else {
        let k = k as usize;
        let n = n as usize;
        // prev[j]: at least j of the first i literals; None outside the live band.
        let mut prev: Vec<Option<Signal>> = vec![Some(Signal::Const(false)); k + 1];
        prev[0] = Some(Signal::Const(true));
        for (i, &x) in literals.iter().enumerate() {
            let i = i + 1;
            let lo = (k + i).saturating_sub(n).max(1);
            let hi = i.min(k);
            let mut next: Vec<Option<Signal>> = vec![None; k + 1];
            next[0] = Some(Signal::Const(true));
            for cell in &mut next[hi + 1..] {
                *cell = Some(Signal::Const(false));
            }
            for j in lo..=hi {
                let same = prev[j].expect("register in live band");
                let less = prev[j - 1].expect("register in live band");
                next[j] = Some(counter_cell(b, same, x, less));
            }
            prev = next;
        }
        prev[k].expect("final register")
    };
    match reify {
        Some(r) => bind(b, r, result, link),
        None => match result {
            Signal::Const(true) => {}
            Signal::Const(false) => b.clause(&[]),
            Signal::Lit(l) => b.clause(&[l]),
        },
    }
    b.num_vars() - start
}

/// Lowers a [`CardConstraint`] with its own `reify` literal.
pub fn encode_card(b: &mut ClauseBuilder, card: &CardConstraint) -> u32 {
    seq_counter(b, &card.literals, card.bound, card.reify)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Every assignment to the first `free` variables that extends to a
    /// model of `clauses` over `total` variables, found by brute force.
    fn projected_models(clauses: &[Vec<Lit>], free: usize, total: usize) -> Vec<u64> {
        let mut out = Vec::new();
        for base in 0..(1u64 << free) {
            let aux = total - free;
            let sat = (0..(1u64 << aux)).any(|rest| {
                let bits = base | (rest << free);
                let a: Vec<bool> = (0..total).map(|v| bits >> v & 1 == 1).collect();
                clauses.iter().all(|c| c.iter().any(|l| l.eval(&a)))
            });
            if sat {
                out.push(base);
            }
        }
        out
    }

    fn lits(n: u32) -> Vec<Lit> {
        (1..=n).map(Lit::pos).collect()
    }

    #[test]
    fn at_least_two_of_three() {
        let mut b = ClauseBuilder::new(3);
        seq_counter(&mut b, &lits(3), 2, None);
        let total = b.num_vars() as usize;
        let models = projected_models(b.clauses(), 3, total);
        assert_eq!(models, vec![0b011, 0b101, 0b110, 0b111]);
    }

    #[test]
    fn vacuous_bound_emits_nothing() {
        let mut b = ClauseBuilder::new(4);
        assert_eq!(seq_counter(&mut b, &lits(4), 0, None), 0);
        assert!(b.clauses().is_empty());
    }

    #[test]
    fn impossible_bound_with_reify_is_unit() {
        let mut b = ClauseBuilder::new(3);
        let r = Lit::pos(3);
        seq_counter(&mut b, &lits(2), 3, Some(r));
        assert_eq!(b.clauses(), &[vec![!r]]);
    }

    #[test]
    fn impossible_bound_without_reify_is_contradiction() {
        let mut b = ClauseBuilder::new(2);
        seq_counter(&mut b, &lits(2), 3, None);
        assert_eq!(b.clauses(), &[Vec::<Lit>::new()]);
    }

    #[test]
    fn register_budget() {
        for n in 1..=12u32 {
            for k in 1..=n as i64 {
                let mut b = ClauseBuilder::new(n + 1);
                let aux = seq_counter(&mut b, &lits(n), k, Some(Lit::pos(n + 1)));
                assert!(aux as i64 <= n as i64 * k, "n={n} k={k} aux={aux}");
            }
        }
    }

    #[test]
    fn dot_to_card_examples() {
        let x = lits(3);
        let c = dot_to_card(&[1, 1, 1], &x, 1, Sense::AtLeast);
        assert_eq!(c.literals, x);
        assert_eq!(c.bound, 2);
        for bits in 0..8u64 {
            let a: Vec<bool> = (0..3).map(|p| bits >> p & 1 == 1).collect();
            let dot: i64 = a.iter().map(|&v| if v { 1 } else { -1 }).sum();
            assert_eq!(c.holds(&a), dot >= 1);
        }

        let c = dot_to_card(&[1], &lits(1), -1, Sense::AtLeast);
        assert_eq!(c.bound, 0);

        let c = dot_to_card(&[-1, -1], &lits(2), 3, Sense::AtLeast);
        assert_eq!(c.bound, 3);
        assert_eq!(c.literals, vec![Lit::neg(1), Lit::neg(2)]);
    }

    #[test]
    fn dot_to_card_matches_dot_product_exhaustively() {
        for n in 1..=5usize {
            let x = lits(n as u32);
            for wbits in 0..(1u64 << n) {
                let w: Vec<i8> = (0..n)
                    .map(|p| if wbits >> p & 1 == 1 { 1 } else { -1 })
                    .collect();
                for c in -(n as i64) - 2..=(n as i64) + 2 {
                    for sense in [Sense::AtLeast, Sense::AtMost] {
                        let card = dot_to_card(&w, &x, c, sense);
                        for bits in 0..(1u64 << n) {
                            let a: Vec<bool> = (0..n).map(|p| bits >> p & 1 == 1).collect();
                            let dot: i64 = (0..n)
                                .map(|p| w[p] as i64 * if a[p] { 1 } else { -1 })
                                .sum();
                            let want = match sense {
                                Sense::AtLeast => dot >= c,
                                Sense::AtMost => dot <= c,
                            };
                            assert_eq!(card.holds(&a), want, "w={w:?} c={c} {sense:?}");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn dropped_link_direction_loosens_reification() {
        let r = Lit::pos(3);
        let mut b = ClauseBuilder::new(3);
        seq_counter_linked(&mut b, &lits(2), 1, Some(r), Link::ReifyImpliesConstraint);
        let total = b.num_vars() as usize;
        // r = false with x1 = true is now allowed.
        let models = projected_models(b.clauses(), 3, total);
        assert!(models.contains(&0b001));
    }
}
