//! Central finite-difference gradient checking.

use crate::autodiff::{Matrix, Tape, Var};
use crate::error::{Error, Result};

pub const DEFAULT_EPS: f64 = 1e-5;

#[derive(Clone, Debug)]
pub struct GradCheck {
    pub max_relative_error: f64,
    pub analytic: Vec<Matrix>,
    pub numeric: Vec<Matrix>,
}

/// Denominator floor. Central differences of an O(1) objective carry about
/// `1e-16 / eps` of rounding noise, so exactly-zero gradients would otherwise
/// report large relative errors.
pub const RELATIVE_FLOOR: f64 = 1e-6;

/// `|g − ĝ| / max(RELATIVE_FLOOR, |g| + |ĝ|)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(RELATIVE_FLOOR)
}

pub fn max_relative_error(analytic: &[Matrix], numeric: &[Matrix]) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .flat_map(|(a, n)| a.as_slice().iter().zip(n.as_slice()))
        .map(|(&a, &n)| relative_error(a, n))
        .fold(0.0, f64::max)
}

fn evaluate<F>(f: &F, params: &[Matrix]) -> Result<f64>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    let mut tape = Tape::new();
    let vars: Vec<Var> = params.iter().map(|p| tape.param(p.clone())).collect();
    let out = f(&mut tape, &vars)?;
    let shape = tape.value(out).shape();
    if shape != (1, 1) {
        return Err(Error::shape(
            "grad_check",
            format!("function must return a scalar, got {shape:?}"),
        ));
    }
    Ok(tape.value(out).item())
}

/// Compares reverse-mode gradients of `f` with central differences at every
/// coordinate of every parameter.
pub fn grad_check<F>(f: F, params: &[Matrix], eps: f64) -> Result<GradCheck>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    let mut tape = Tape::new();
    let vars: Vec<Var> = params.iter().map(|p| tape.param(p.clone())).collect();
    let out = f(&mut tape, &vars)?;
    tape.backward(out)?;
    let analytic: Vec<Matrix> = vars
        .iter()
        .zip(params)
        .map(|(&v, p)| {
            tape.grad(v)
                .cloned()
                .unwrap_or_else(|| Matrix::zeros(p.rows(), p.cols()))
        })
        .collect();

    let mut work: Vec<Matrix> = params.to_vec();
    let mut numeric = Vec::with_capacity(params.len());
    for pi in 0..params.len() {
        let mut g = Matrix::zeros(params[pi].rows(), params[pi].cols());
        for k in 0..params[pi].as_slice().len() {
            let orig = work[pi].as_slice()[k];
            work[pi].as_mut_slice()[k] = orig + eps;
            let plus = evaluate(&f, &work)?;
            work[pi].as_mut_slice()[k] = orig - eps;
            let minus = evaluate(&f, &work)?;
            work[pi].as_mut_slice()[k] = orig;
            g.as_mut_slice()[k] = (plus - minus) / (2.0 * eps);
        }
        numeric.push(g);
    }
    Ok(GradCheck {
        max_relative_error: max_relative_error(&analytic, &numeric),
        analytic,
        numeric,
    })
}
