//! Compilation of a binarised network into CNF.
//!
//! Every inner neuron becomes `v_i <-> (<a_i, x> >= C_i)` (or `<= C_i`),
//! lowered through a reified sequential counter. The output block gets one
//! comparator `b_ij <-> l_i >= l_j` per ordered class pair and one indicator
//! per class, `o_i <-> AND_{j<i} !b_ji AND AND_{j>i} b_ij`, so ties go to
//! the lowest class index exactly as in [`FoldedModel`].

mod card;
mod varmap;

pub use card::{dot_to_card, encode_card, seq_counter, CardConstraint, ClauseBuilder, Sense};
pub use varmap::{emit_manifest, ComparatorVar, OutputVar, VarRange, VariableMap};

use card::{seq_counter_linked, Link};

use crate::cnf::{CnfFormula, Lit};
use crate::error::{Error, Result};
use crate::model::{BnnModel, FoldedLayer, FoldedModel, InnerBlock, NeuronThreshold, OutputBlock};

/// Deliberate encoder defects, used to check that the verification
/// harnesses notice them.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    /// Adds `delta` to the folded threshold of one hidden neuron.
    ThresholdShift {
        block: usize,
        neuron: usize,
        delta: i64,
    },
    /// Keeps only `neuron -> constraint` for every hidden neuron.
    DropReifyBackward,
    /// Keeps only `constraint -> neuron` for every hidden neuron.
    DropReifyForward,
    /// Ties go to the highest class index.
    HighestIndexTieBreak,
    /// Omits the (redundant) exactly-one constraint over output indicators.
    DropExactlyOne,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EncodeOptions {
    pub fault: Option<Fault>,
}

impl EncodeOptions {
    fn link(&self) -> Link {
        match self.fault {
            Some(Fault::DropReifyBackward) => Link::ReifyImpliesConstraint,
            Some(Fault::DropReifyForward) => Link::ConstraintImpliesReify,
            _ => Link::Equivalent,
        }
    }
}

fn check_dims(context: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::Dimension {
            context,
            expected,
            got,
        });
    }
    Ok(())
}

fn encode_folded_layer(
    b: &mut ClauseBuilder,
    layer: &FoldedLayer,
    input_lits: &[Lit],
    outputs: &[Lit],
    link: Link,
    shift: Option<(usize, i64)>,
) {
    for (i, (row, &t)) in layer.weights.iter().zip(&layer.thresholds).enumerate() {
        let v = outputs[i];
        let delta = match shift {
            Some((neuron, d)) if neuron == i => d,
            _ => 0,
        };
        match t {
            NeuronThreshold::ConstPlus => b.clause(&[v]),
            NeuronThreshold::ConstMinus => b.clause(&[!v]),
            NeuronThreshold::AtLeast(c) => {
                let card = dot_to_card(row, input_lits, c + delta, Sense::AtLeast);
                seq_counter_linked(b, &card.literals, card.bound, Some(v), link);
            }
            NeuronThreshold::AtMost(c) => {
                let card = dot_to_card(row, input_lits, c + delta, Sense::AtMost);
                seq_counter_linked(b, &card.literals, card.bound, Some(v), link);
            }
        }
    }
}

/// Encodes one inner block: `outputs[i] <-> neuron i fires` on `input_lits`.
pub fn encode_inner_block(
    b: &mut ClauseBuilder,
    block: &InnerBlock,
    input_lits: &[Lit],
    outputs: &[Lit],
) -> Result<()> {
    let thresholds = block
        .weights
        .iter()
        .enumerate()
        .map(|(i, row)| {
            check_dims("inner block row", input_lits.len(), row.len())?;
            crate::model::fold_neuron(row, block.bias[i], block.bn.neuron(i))
        })
        .collect::<Result<Vec<_>>>()?;
    check_dims("inner block outputs", block.weights.len(), outputs.len())?;
    let layer = FoldedLayer {
        weights: block.weights.clone(),
        thresholds,
    };
    encode_folded_layer(b, &layer, input_lits, outputs, Link::Equivalent, None);
    Ok(())
}

/// Positions where two sign rows differ, with row `i`'s signs there.
fn difference_support(row_i: &[i8], row_j: &[i8], input_lits: &[Lit]) -> (Vec<i8>, Vec<Lit>) {
    row_i
        .iter()
        .zip(row_j)
        .zip(input_lits)
        .filter(|((a, b), _)| a != b)
        .map(|((&a, _), &l)| (a, l))
        .unzip()
}

fn encode_folded_output(
    b: &mut ClauseBuilder,
    weights: &[Vec<i8>],
    comparators: &[Vec<i64>],
    input_lits: &[Lit],
    outputs: &[Lit],
    comparator_vars: &[ComparatorVar],
    options: &EncodeOptions,
) {
    let c = weights.len();
    let mut cmp = vec![vec![None; c]; c];
    for cv in comparator_vars {
        let (i, j) = (cv.i, cv.j);
        let lit = Lit::pos(cv.var);
        cmp[i][j] = Some(lit);
        let (signs, lits) = difference_support(&weights[i], &weights[j], input_lits);
        let card = dot_to_card(&signs, &lits, comparators[i][j], Sense::AtLeast);
        seq_counter(b, &card.literals, card.bound, Some(lit));
    }
    let cmp = |i: usize, j: usize| cmp[i][j].expect("comparator for every ordered pair");

    let highest_wins = options.fault == Some(Fault::HighestIndexTieBreak);
    for (i, &o) in outputs.iter().enumerate() {
        let conds: Vec<Lit> = (0..c)
            .filter(|&j| j != i)
            .map(|j| match (j < i, highest_wins) {
                (true, false) => !cmp(j, i),
                (false, false) => cmp(i, j),
                (true, true) => cmp(i, j),
                (false, true) => !cmp(j, i),
            })
            .collect();
        for &l in &conds {
            b.clause(&[!o, l]);
        }
        let mut back: Vec<Lit> = conds.iter().map(|&l| !l).collect();
        back.push(o);
        b.clause(&back);
    }

    if options.fault != Some(Fault::DropExactlyOne) {
        b.clause(outputs);
        for i in 0..c {
            for j in i + 1..c {
                b.clause(&[!outputs[i], !outputs[j]]);
            }
        }
    }
}

/// Encodes the output block: comparator variables for every ordered class
/// pair (row-major over `i`, skipping `i == j`) and one indicator per class.
pub fn encode_output_block(
    b: &mut ClauseBuilder,
    block: &OutputBlock,
    input_lits: &[Lit],
    outputs: &[Lit],
    comparator_vars: &[ComparatorVar],
) -> Result<()> {
    let c = block.classes();
    check_dims("output indicators", c, outputs.len())?;
    check_dims(
        "comparators",
        c * c.saturating_sub(1),
        comparator_vars.len(),
    )?;
    for row in &block.weights {
        check_dims("output block row", input_lits.len(), row.len())?;
    }
    let n = input_lits.len();
    let comparators: Vec<Vec<i64>> = (0..c)
        .map(|i| {
            (0..c)
                .map(|j| crate::model::fold_comparator(block.bias[i], block.bias[j], n))
                .collect()
        })
        .collect();
    encode_folded_output(
        b,
        &block.weights,
        &comparators,
        input_lits,
        outputs,
        comparator_vars,
        &EncodeOptions::default(),
    );
    Ok(())
}

/// Compiles a network into CNF plus the map of where everything lives.
///
/// For every complete input assignment the formula has at least one model,
/// and all models agree on hidden and output variables.
pub fn encode_bnn(model: &BnnModel) -> Result<(CnfFormula, VariableMap)> {
    encode_bnn_with(model, &EncodeOptions::default())
}

pub fn encode_bnn_with(
    model: &BnnModel,
    options: &EncodeOptions,
) -> Result<(CnfFormula, VariableMap)> {
    let folded = FoldedModel::new(model)?;
    let n_in = model.input_width() as u32;
    let c = model.classes() as u32;

    let input_vars = VarRange {
        first: 1,
        count: n_in,
    };
    let output_range = VarRange {
        first: n_in + 1,
        count: c,
    };
    let mut next = output_range.end();
    let hidden_vars: Vec<VarRange> = model.arch[1..model.arch.len() - 1]
        .iter()
        .map(|&w| {
            let r = VarRange {
                first: next,
                count: w as u32,
            };
            next = r.end();
            r
        })
        .collect();
    let mut comparator_vars = Vec::with_capacity((c * c.saturating_sub(1)) as usize);
    for i in 0..c as usize {
        for j in 0..c as usize {
            if i != j {
                comparator_vars.push(ComparatorVar { i, j, var: next });
                next += 1;
            }
        }
    }
    let reserved = next - 1;

    let mut b = ClauseBuilder::new(reserved);
    let link = options.link();
    let mut current: Vec<Lit> = input_vars.ids().map(Lit::pos).collect();
    for (k, layer) in folded.layers.iter().enumerate() {
        let outs: Vec<Lit> = hidden_vars[k].ids().map(Lit::pos).collect();
        let shift = match options.fault {
            Some(Fault::ThresholdShift {
                block,
                neuron,
                delta,
            }) if block == k => Some((neuron, delta)),
            _ => None,
        };
        encode_folded_layer(&mut b, layer, &current, &outs, link, shift);
        current = outs;
    }
    let outputs: Vec<Lit> = output_range.ids().map(Lit::pos).collect();
    encode_folded_output(
        &mut b,
        &folded.output_weights,
        &folded.comparators,
        &current,
        &outputs,
        &comparator_vars,
        options,
    );

    let formula = b.into_formula();
    let aux_vars = VarRange {
        first: reserved + 1,
        count: formula.num_vars - reserved,
    };
    let varmap = VariableMap {
        num_vars: formula.num_vars,
        image: model.image_shape(),
        input_vars,
        output_vars: output_range
            .ids()
            .enumerate()
            .map(|(class, var)| OutputVar { class, var })
            .collect(),
        hidden_vars,
        comparator_vars,
        aux_vars,
        cnf_sha256: None,
    };
    debug_assert!(varmap.validate().is_ok());
    Ok((formula, varmap))
}

/// DIMACS text for a formula.
pub fn emit_dimacs(formula: &CnfFormula) -> String {
    formula.to_dimacs()
}
