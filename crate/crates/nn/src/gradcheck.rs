//! Central finite-difference verification of tape gradients.

use crate::{NnError, ParamSet, Tape, Var};

/// Compares analytic parameter gradients of a scalar function against central
/// differences and returns the largest relative error
/// `|g_a - g_fd| / max(1, |g_a| + |g_fd|)` over every parameter entry.
pub fn grad_check<F>(f: F, params: &mut ParamSet, epsilon: f64) -> Result<f64, NnError>
where
    F: for<'a> Fn(&mut Tape<'a>) -> Result<Var, NnError>,
{
    let analytic = {
        let mut tape = Tape::new(params);
        let out = f(&mut tape)?;
        if tape.value(out).len() != 1 {
            return Err(NnError::NotScalar(tape.value(out).shape()));
        }
        tape.backward(out)
    };

    let eval = |params: &ParamSet| -> Result<f64, NnError> {
        let mut tape = Tape::new(params);
        let out = f(&mut tape)?;
        Ok(tape.value(out).item())
    };

    let mut worst: f64 = 0.0;
    let ids: Vec<_> = params.iter().enumerate().map(|(i, _)| i).collect();
    for i in ids {
        let id = crate::ParamId(i);
        let len = params.get(id).value.len();
        for k in 0..len {
            let original = params.get(id).value.data()[k];
            params.get_mut(id).value.data_mut()[k] = original + epsilon;
            let plus = eval(params)?;
            params.get_mut(id).value.data_mut()[k] = original - epsilon;
            let minus = eval(params)?;
            params.get_mut(id).value.data_mut()[k] = original;

            let numeric = (plus - minus) / (2.0 * epsilon);
            let exact = analytic.get(id).map_or(0.0, |g| g.data()[k]);
            let err = (exact - numeric).abs() / (exact.abs() + numeric.abs()).max(1.0);
            worst = worst.max(err);
        }
    }
    Ok(worst)
}
