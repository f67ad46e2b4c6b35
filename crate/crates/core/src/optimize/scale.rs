//! Largest load multiplier that keeps every layer below its allowable stress.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fe::{layer_stress_peaks, DisplacementField, LoadCase, MaterialStressPeak};
use crate::model::Model;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaledLoads {
    /// Multiplier applied to every amplitude.
    pub lambda: f64,
    pub loads: LoadCase,
    /// Material whose allowable is reached first.
    pub governing_material: String,
    /// Peaks under the unscaled loads.
    pub peaks: Vec<MaterialStressPeak>,
}

/// `disp` must be the solution for `loads`; stresses are linear in the loads,
/// so the multiplier is `min(allowable / peak)` over materials with an
/// allowable stress.
pub fn scale_to_allowable(model: &Model, disp: &DisplacementField, loads: &LoadCase) -> Result<ScaledLoads> {
    let peaks = layer_stress_peaks(model, disp);
    let mut governing: Option<(f64, String)> = None;
    let mut any_allowable = false;
    for p in &peaks {
        let Some(allowable) = model.material(&p.material).allowable_stress else {
            continue;
        };
        any_allowable = true;
        if p.max_stress > 0.0 {
            let lambda = allowable / p.max_stress;
            if governing.as_ref().is_none_or(|(l, _)| lambda < *l) {
                governing = Some((lambda, p.material.clone()));
            }
        }
    }
    if !any_allowable {
        return Err(Error::Precondition(
            "no material used by the model has an allowable stress".into(),
        ));
    }
    let (lambda, governing_material) =
        governing.ok_or_else(|| Error::Precondition("the load case produces no stress to scale".into()))?;
    let mut scaled = loads.scaled(lambda);
    scaled.description = format!("loads scaled by {lambda} to reach the allowable stress of {governing_material}");
    Ok(ScaledLoads {
        lambda,
        loads: scaled,
        governing_material,
        peaks,
    })
}
