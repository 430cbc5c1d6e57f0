use phlab::fields::sample_vector_field;
use phlab::models::{Endomorphism, LinearMap, PerturbedLinear, PolynomialMap, VianaMap};
use phlab::{Error, Result};

use crate::config::Config;

/// Builds the model described by the `model.*` keys.
pub fn build_model(cfg: &Config, seed: u64) -> Result<Box<dyn Endomorphism>> {
    let kind = cfg.string("model.kind", "cat");
    let r: usize = cfg.get("model.r", 5)?;
    Ok(match kind.as_str() {
        "cat" => Box::new(LinearMap::cat().with_order(r)),
        "linear" => {
            Box::new(LinearMap::new(cfg.matrix("model.matrix", [[2, 1], [1, 1]])?).with_order(r))
        }
        "perturbed" => {
            let base = LinearMap::new(cfg.matrix("model.matrix", [[2, 1], [1, 1]])?).with_order(r);
            let amplitude: f64 = cfg.get("model.amplitude", 0.01)?;
            let s: u32 = cfg.get("model.s", (r + 2) as u32)?;
            let n_max: usize = cfg.get("model.n_max", 8)?;
            let field_seed: u64 = cfg.get("model.field_seed", seed)?;
            let field = sample_vector_field(s, n_max, field_seed)?;
            Box::new(PerturbedLinear::new(base, amplitude, field, r)?)
        }
        "viana" => {
            let d: u32 = cfg.get("model.d", 2)?;
            let a0: f64 = cfg.get("model.a0", 1.0)?;
            let eps: f64 = cfg.get("model.eps", 0.1)?;
            Box::new(VianaMap::new(d, a0, eps)?.with_order(r))
        }
        "fold" => Box::new(PolynomialMap::fold()),
        "bowl" => Box::new(PolynomialMap::bowl()),
        other => return Err(Error::Config(format!("unknown model.kind {other:?}"))),
    })
}
