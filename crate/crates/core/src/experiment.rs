//! Random perturbations of a linear model and frequency tables of a chosen
//! diagnostic over independent Gaussian draws.

use serde::{Deserialize, Serialize};

use crate::contact::{contact_measure, fit_beta, jet_contact_gap, CurveJet};
use crate::curves::JetCurve;
use crate::error::{Error, Result};
use crate::fields::{derive_seed, sample_vector_field};
use crate::lyapunov::{transversality_ratio, ExponentQuadruple};
use crate::models::{
    check_hyperbolicity, Endomorphism, HyperbolicityBudget, LinearMap, PerturbedLinear,
};
use crate::torus::{Lattice, TorusPoint};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Diagnostic {
    /// Satisfied when the ratio stays below `threshold`.
    TransversalityRatio {
        chi: ExponentQuadruple,
        eps: f64,
        k: f64,
        n: usize,
        h: f64,
        points: Vec<TorusPoint>,
        threshold: f64,
    },
    /// Satisfied when the gap exceeds `threshold`.
    JetContactGap {
        jets: Vec<CurveJet>,
        n: usize,
        threshold: f64,
    },
    /// Satisfied when the fitted exponent is at least `threshold`.
    ContactBeta {
        curve: JetCurve,
        n: usize,
        ladder: Vec<f64>,
        samples: usize,
        threshold: f64,
    },
}

impl Diagnostic {
    fn evaluate(&self, f: &dyn Endomorphism) -> Result<(f64, bool)> {
        match self {
            Diagnostic::TransversalityRatio {
                chi,
                eps,
                k,
                n,
                h,
                points,
                threshold,
            } => {
                let rows =
                    transversality_ratio(f, chi, *eps, *k, &[*n], points, *h, &f.default_cones())?;
                let ratio = rows[0].ratio;
                Ok((ratio, ratio < *threshold))
            }
            Diagnostic::JetContactGap { jets, n, threshold } => {
                let gap = jet_contact_gap(f, jets, *n)?.gap;
                Ok((gap, gap > *threshold))
            }
            Diagnostic::ContactBeta {
                curve,
                n,
                ladder,
                samples,
                threshold,
            } => {
                let rows = contact_measure(f, curve, *n, ladder, *samples)?;
                let pts: Vec<(f64, f64)> = rows.iter().map(|r| (r.eps, r.measure)).collect();
                let beta = fit_beta(&pts)?.beta;
                Ok((beta, beta >= *threshold))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub base: [[i64; 2]; 2],
    pub amplitude: f64,
    pub smoothness: u32,
    pub n_max: usize,
    pub order: usize,
    pub trials: usize,
    pub seed: u64,
    pub budget: HyperbolicityBudget,
    /// Lattice points per axis for the per-trial hyperbolicity check.
    pub check_grid: usize,
    pub check_iterates: usize,
    pub diagnostic: Diagnostic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub index: usize,
    pub seed: u64,
    pub hyperbolic: bool,
    pub value: Option<f64>,
    pub satisfied: Option<bool>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyTable {
    pub trials: Vec<TrialResult>,
    pub hyperbolicity_failures: usize,
    pub diagnostic_errors: usize,
    pub evaluated: usize,
    pub satisfied: usize,
    /// `satisfied / evaluated`, `None` when nothing was evaluated.
    pub frequency: Option<f64>,
}

pub fn genericity_experiment(spec: &ExperimentSpec) -> Result<FrequencyTable> {
    if spec.trials == 0 {
        return Err(Error::Parameter("need at least one trial".into()));
    }
    if !(spec.amplitude >= 0.0) {
        return Err(Error::Parameter("amplitude must be nonnegative".into()));
    }
    let base = LinearMap::new(spec.base).with_order(spec.order);
    let grid = Lattice::with_points_per_axis(spec.check_grid)?;
    let mut trials = Vec::with_capacity(spec.trials);
    for index in 0..spec.trials {
        let seed = derive_seed(spec.seed, index as u64);
        let field = sample_vector_field(spec.smoothness, spec.n_max, seed)?;
        let model = PerturbedLinear::new(base.clone(), spec.amplitude, field, spec.order)?;
        let report = check_hyperbolicity(
            &model,
            &model.default_cones(),
            &spec.budget,
            spec.check_iterates,
            &grid,
            5,
        )?;
        let mut trial = TrialResult {
            index,
            seed,
            hyperbolic: report.pass,
            value: None,
            satisfied: None,
            error: None,
        };
        if report.pass {
            match spec.diagnostic.evaluate(&model) {
                Ok((v, ok)) => {
                    trial.value = Some(v);
                    trial.satisfied = Some(ok);
                }
                Err(e) => trial.error = Some(e.to_string()),
            }
        }
        trials.push(trial);
    }
    let hyperbolicity_failures = trials.iter().filter(|t| !t.hyperbolic).count();
    let diagnostic_errors = trials.iter().filter(|t| t.error.is_some()).count();
    let evaluated = trials.iter().filter(|t| t.satisfied.is_some()).count();
    let satisfied = trials.iter().filter(|t| t.satisfied == Some(true)).count();
    Ok(FrequencyTable {
        trials,
        hyperbolicity_failures,
        diagnostic_errors,
        evaluated,
        satisfied,
        frequency: (evaluated > 0).then(|| satisfied as f64 / evaluated as f64),
    })
}
