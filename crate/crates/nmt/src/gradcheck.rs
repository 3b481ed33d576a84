//! Central finite-difference check of tape gradients.

use crate::tensor::{Graph, ParamId, Params, Var};
use crate::NmtError;

/// Gradients smaller than this are compared in absolute terms. Central
/// differences at `epsilon = 1e-5` carry roughly `1e-10` of rounding noise,
/// which would otherwise dominate entries whose true gradient is zero.
pub const REL_FLOOR: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheck {
    pub max_rel_error: f64,
    /// Parameter name and flat index of the worst entry.
    pub worst: Option<(String, usize)>,
    /// Worst error per checked parameter.
    pub per_param: Vec<(String, f64)>,
    pub scalars: usize,
}

pub fn rel_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

fn eval<F: Fn(&mut Graph) -> Var>(params: &Params, f: &F) -> f64 {
    let mut g = Graph::new(params);
    let out = f(&mut g);
    g.scalar(out)
}

/// Compares `backward` against `(f(x+e) - f(x-e)) / 2e` for every scalar of
/// every trainable parameter. `f` must build a 1x1 loss.
pub fn grad_check<F>(params: &Params, epsilon: f64, f: F) -> Result<GradCheck, NmtError>
where
    F: Fn(&mut Graph) -> Var,
{
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(NmtError::GradCheck(format!("epsilon must be positive and finite, got {epsilon}")));
    }
    let grads = {
        let mut g = Graph::new(params);
        let out = f(&mut g);
        if g.shape(out) != (1, 1) {
            return Err(NmtError::GradCheck(format!("loss has shape {:?}, expected 1x1", g.shape(out))));
        }
        g.backward(out)
    };
    let mut work = params.clone();
    let mut report = GradCheck { max_rel_error: 0.0, worst: None, per_param: Vec::new(), scalars: 0 };
    let ids: Vec<ParamId> = params.ids().collect();
    for id in ids {
        let p = params.param(id);
        if !p.trainable {
            continue;
        }
        let n = p.value.len();
        let analytic_all: Vec<f64> = match grads.get(id) {
            Some(g) => g.iter().copied().collect(),
            None => vec![0.0; n],
        };
        let mut worst = 0.0f64;
        for k in 0..n {
            let orig = flat(&work, id)[k];
            flat_mut(&mut work, id)[k] = orig + epsilon;
            let up = eval(&work, &f);
            flat_mut(&mut work, id)[k] = orig - epsilon;
            let down = eval(&work, &f);
            flat_mut(&mut work, id)[k] = orig;
            let numeric = (up - down) / (2.0 * epsilon);
            let analytic = analytic_all[k];
            let e = rel_error(analytic, numeric);
            if e > worst {
                worst = e;
            }
            if report.worst.is_none() || e > report.max_rel_error {
                report.max_rel_error = e;
                report.worst = Some((p.name.clone(), k));
            }
        }
        report.scalars += n;
        report.per_param.push((p.name.clone(), worst));
    }
    Ok(report)
}

fn flat(p: &Params, id: ParamId) -> &[f64] {
    p.get(id).as_slice().expect("parameters are contiguous")
}

fn flat_mut(p: &mut Params, id: ParamId) -> &mut [f64] {
    p.get_mut(id).as_slice_mut().expect("parameters are contiguous")
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn square_loss() -> (Params, ParamId) {
        let mut p = Params::new();
        let w = p.add("w", array![[0.5, -1.5], [2.0, 0.25]]);
        (p, w)
    }

    #[test]
    fn zero_epsilon_is_an_error() {
        let (p, w) = square_loss();
        let r = grad_check(&p, 0.0, |g| {
            let v = g.param(w);
            let s = g.mul(v, v);
            g.sum_all(s)
        });
        assert!(matches!(r, Err(NmtError::GradCheck(_))));
    }

    #[test]
    fn quadratic_is_exact() {
        let (p, w) = square_loss();
        let r = grad_check(&p, 1e-4, |g| {
            let v = g.param(w);
            let s = g.mul(v, v);
            g.sum_all(s)
        })
        .unwrap();
        assert_eq!(r.scalars, 4);
        assert!(r.max_rel_error < 1e-9, "{r:?}");
    }

    #[test]
    fn wrong_gradient_is_detected() {
        // relu's kink at 0 makes finite differences disagree with the subgradient
        let mut p = Params::new();
        let w = p.add("w", array![[0.0]]);
        let r = grad_check(&p, 1e-3, |g| {
            let v = g.param(w);
            let r = g.relu(v);
            g.sum_all(r)
        })
        .unwrap();
        assert!(r.max_rel_error > 0.1);
    }
}
