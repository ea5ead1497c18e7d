use serde::{Deserialize, Serialize};

use crate::cnf::Lit;
use crate::error::{Error, Result};
use crate::model::ImageShape;

/// A contiguous block of variable ids `first .. first + count`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VarRange {
    pub first: u32,
    pub count: u32,
}

impl VarRange {
    pub fn ids(&self) -> impl Iterator<Item = u32> {
        self.first..self.first + self.count
    }

    pub fn get(&self, i: usize) -> u32 {
        assert!(i < self.count as usize, "index {i} outside range");
        self.first + i as u32
    }

    pub fn end(&self) -> u32 {
        self.first + self.count
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputVar {
    pub class: usize,
    pub var: u32,
}

/// Comparator `b_ij <-> l_i >= l_j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComparatorVar {
    pub i: usize,
    pub j: usize,
    pub var: u32,
}

/// Where each part of the network lives in the formula's variable space.
///
/// Serialised as the manifest that accompanies a DIMACS file, so solver
/// models can be interpreted without the original network.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariableMap {
    pub num_vars: u32,
    pub image: ImageShape,
    pub input_vars: VarRange,
    pub output_vars: Vec<OutputVar>,
    pub hidden_vars: Vec<VarRange>,
    pub comparator_vars: Vec<ComparatorVar>,
    pub aux_vars: VarRange,
    /// SHA-256 of the DIMACS text this manifest was written with.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cnf_sha256: Option<String>,
}

impl VariableMap {
    pub fn input_width(&self) -> usize {
        self.input_vars.count as usize
    }

    pub fn classes(&self) -> usize {
        self.output_vars.len()
    }

    pub fn input_lits(&self) -> Vec<Lit> {
        self.input_vars.ids().map(Lit::pos).collect()
    }

    pub fn output_lit(&self, class: usize) -> Option<Lit> {
        self.output_vars
            .iter()
            .find(|o| o.class == class)
            .map(|o| Lit::pos(o.var))
    }

    /// Assumptions fixing every input variable (`true` iff `+1`).
    pub fn input_assumptions(&self, x: &[i8]) -> Vec<Lit> {
        self.input_vars
            .ids()
            .zip(x)
            .map(|(v, &s)| Lit::with_value(v, s > 0))
            .collect()
    }

    /// Projection of a full model onto the inputs, as a bipolar vector.
    pub fn project_inputs(&self, model: &[bool]) -> Vec<i8> {
        self.input_vars
            .ids()
            .map(|v| if model[v as usize - 1] { 1 } else { -1 })
            .collect()
    }

    /// Classes whose indicator is true in `model`.
    pub fn true_outputs(&self, model: &[bool]) -> Vec<usize> {
        self.output_vars
            .iter()
            .filter(|o| model[o.var as usize - 1])
            .map(|o| o.class)
            .collect()
    }

    /// Checks the layout: inputs are `1..=n_in`, outputs follow in class
    /// order, and all groups are disjoint and cover `1..=num_vars`.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidInput(format!("manifest: {m}")));
        let n_in = self.input_vars.count;
        if self.input_vars.first != 1 {
            return bad("input variables must start at 1".into());
        }
        if self.image.width * self.image.height != n_in as usize {
            return bad(format!(
                "image {}x{} does not cover {} inputs",
                self.image.width, self.image.height, n_in
            ));
        }
        for (c, o) in self.output_vars.iter().enumerate() {
            if o.class != c || o.var != n_in + 1 + c as u32 {
                return bad(format!("output variable for class {c} out of place"));
            }
        }
        let mut seen = vec![false; self.num_vars as usize + 1];
        let mut mark = |v: u32| -> Result<()> {
            if v == 0 || v > self.num_vars || std::mem::replace(&mut seen[v as usize], true) {
                return bad(format!("variable {v} duplicated or out of range"));
            }
            Ok(())
        };
        self.input_vars.ids().try_for_each(&mut mark)?;
        self.output_vars.iter().try_for_each(|o| mark(o.var))?;
        for r in &self.hidden_vars {
            r.ids().try_for_each(&mut mark)?;
        }
        self.comparator_vars.iter().try_for_each(|c| mark(c.var))?;
        self.aux_vars.ids().try_for_each(&mut mark)?;
        if seen[1..].iter().any(|s| !s) {
            return bad("variable groups do not cover every id".into());
        }
        Ok(())
    }

    /// Manifest JSON text.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serialises");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<VariableMap> {
        let map: VariableMap = serde_json::from_str(text)?;
        map.validate()?;
        Ok(map)
    }
}

/// Manifest JSON for a variable map.
pub fn emit_manifest(varmap: &VariableMap) -> String {
    varmap.to_json()
}
