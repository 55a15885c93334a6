//! Closed-form momentum step, used to check iterated momentum updates.

use crate::error::{Error, Result};
use crate::network::GradientSet;

/// Parameter delta at the last step `t` of a momentum run, written without
/// the velocity recursion:
///
/// `ΔW_t = -η_t Σ_{l=1}^{t} w_l g_l`, where `w_t = 1` and
/// `w_l = Π_{l'=l+1}^{t} ρ_{l'}` for `l < t`.
///
/// The three sequences are indexed by step, starting at step 1.
pub fn sgdm_unfold(rhos: &[f64], grads: &[GradientSet], etas: &[f64]) -> Result<GradientSet> {
    let t = grads.len();
    if rhos.len() != t || etas.len() != t {
        return Err(Error::Shape(format!(
            "sequence lengths differ: rho {}, gradients {t}, eta {}",
            rhos.len(),
            etas.len()
        )));
    }
    let Some(last) = grads.last() else {
        return Err(Error::Shape("empty gradient sequence".into()));
    };
    let mut total = last.zeros_like();
    let mut weight = 1.0;
    for l in (0..t).rev() {
        grads[l].check_congruent(last, "unfold gradient")?;
        total.add_scaled_assign(&grads[l], weight);
        weight *= rhos[l];
    }
    Ok(total.scaled(-etas[t - 1]))
}
