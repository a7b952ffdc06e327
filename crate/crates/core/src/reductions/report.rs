use crate::instance::Instance;
use serde::Serialize;

/// Parameters of a linear-variable reduction.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct LvParams {
    /// Block width of the interpretation.
    pub d: usize,
    /// Bound variables of the constraint formula.
    pub k1: usize,
    /// Bound variables of the carrier formula.
    pub k2: usize,
    /// Largest variable degree inside either formula.
    #[serde(rename = "L")]
    pub l: usize,
    /// `|V|d + 2|V|k1 + k2`.
    pub bound_stated: usize,
    /// `|V|(d + k2) + 2|V|k1`, which also charges the carrier's bound
    /// variables once per block.
    pub bound_corrected: usize,
    pub max_degree_out: usize,
    /// Both formulas are free of equality atoms.
    pub efpp: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ReductionReport {
    pub step: String,
    pub vars_in: usize,
    pub vars_out: usize,
    pub constraints_in: usize,
    pub constraints_out: usize,
    /// Declared additive constant `c` with `|V'| <= |V| + c`.
    pub cv_constant: Option<i64>,
    pub lv: Option<LvParams>,
    pub notes: Vec<String>,
}

impl ReductionReport {
    pub(crate) fn new(step: &str, input: &Instance, output: &Instance, notes: Vec<String>) -> Self {
        ReductionReport {
            step: step.to_string(),
            vars_in: input.num_vars(),
            vars_out: output.num_vars(),
            constraints_in: input.constraints().len(),
            constraints_out: output.constraints().len(),
            cv_constant: Some(0),
            lv: None,
            notes,
        }
    }

    /// `|V'| - |V|`.
    pub fn var_delta(&self) -> i64 {
        self.vars_out as i64 - self.vars_in as i64
    }
}

/// An output instance with its report.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Reduction {
    pub instance: Instance,
    pub report: ReductionReport,
}

impl Reduction {
    pub(crate) fn new(step: &str, input: &Instance, output: Instance, notes: Vec<String>) -> Self {
        let report = ReductionReport::new(step, input, &output, notes);
        Reduction { instance: output, report }
    }

    /// The instance unchanged.
    pub fn identity(inst: &Instance) -> Reduction {
        Reduction::new("identity", inst, inst.clone(), Vec::new())
    }

    /// Chains `next` after `self`, keeping the first input's counts.
    pub(crate) fn then(mut self, next: Reduction) -> Reduction {
        self.report.vars_out = next.report.vars_out;
        self.report.constraints_out = next.report.constraints_out;
        self.report.notes.extend(next.report.notes.into_iter().map(|n| format!("{}: {n}", next.report.step)));
        self.instance = next.instance;
        self
    }
}
