//! Central-difference gradient verification against the reverse-mode pass.

use crate::error::{Error, Result};
use crate::params::{ParamStore, Precision};

#[derive(Debug, Clone)]
pub struct FdReport {
    pub max_rel_err: f64,
    pub worst_param: String,
    pub worst_index: usize,
    pub n_coords: usize,
}

/// Compares analytic gradients against central differences
/// (f(θ+ε)−f(θ−ε))/2ε for every trainable coordinate. `loss` must evaluate
/// the scalar objective from the store without touching gradients; `grad`
/// must populate the store's gradient buffers (it is given a freshly zeroed
/// store). Relative error uses denominator max(|analytic|, |numeric|, 1e-8).
///
/// Requires 64-bit precision; 32-bit roundoff would swamp the differences.
pub fn finite_diff_check(
    store: &mut ParamStore,
    eps: f64,
    loss: &mut dyn FnMut(&ParamStore) -> f64,
    grad: &mut dyn FnMut(&mut ParamStore),
) -> Result<FdReport> {
    if eps <= 0.0 {
        return Err(Error::Invalid(format!("eps must be positive, got {eps}")));
    }
    if store.precision != Precision::Double {
        return Err(Error::Invalid(
            "finite_diff_check requires 64-bit precision".into(),
        ));
    }

    store.zero_grad();
    grad(store);
    let analytic: Vec<(String, Vec<f64>)> = store
        .iter()
        .filter(|(_, p)| p.trainable)
        .map(|(_, p)| (p.name.clone(), p.grad.clone()))
        .collect();

    let mut report = FdReport {
        max_rel_err: 0.0,
        worst_param: String::new(),
        worst_index: 0,
        n_coords: 0,
    };

    let ids: Vec<_> = store
        .iter()
        .filter(|(_, p)| p.trainable)
        .map(|(id, _)| id)
        .collect();
    for (k, &pid) in ids.iter().enumerate() {
        let n = store.get(pid).data.len();
        for i in 0..n {
            let orig = store.get(pid).data[i];
            store.get_mut(pid).data[i] = orig + eps;
            let fp = loss(store);
            store.get_mut(pid).data[i] = orig - eps;
            let fm = loss(store);
            store.get_mut(pid).data[i] = orig;
            if !fp.is_finite() || !fm.is_finite() {
                return Err(Error::NonFinite(format!(
                    "loss at perturbed {}[{}]",
                    analytic[k].0, i
                )));
            }
            let numeric = (fp - fm) / (2.0 * eps);
            let a = analytic[k].1[i];
            let denom = a.abs().max(numeric.abs()).max(1e-8);
            let rel = (a - numeric).abs() / denom;
            report.n_coords += 1;
            if rel > report.max_rel_err {
                report.max_rel_err = rel;
                report.worst_param = analytic[k].0.clone();
                report.worst_index = i;
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Graph;
    use crate::params::{ParamStore, Precision};

    #[test]
    fn quadratic_is_exact_under_central_differences() {
        let mut store = ParamStore::new(Precision::Double);
        let pid = store.register("theta", vec![1, 3], vec![0.5, -1.25, 2.0]);
        let mut loss = |s: &ParamStore| {
            let mut g = Graph::new(Precision::Double);
            let th = g.param(s, pid);
            let sq = g.mul(th, th);
            let l = g.sum_all(sq);
            g.data(l)[0]
        };
        let mut grad = |s: &mut ParamStore| {
            let mut g = Graph::new(Precision::Double);
            let th = g.param(s, pid);
            let sq = g.mul(th, th);
            let l = g.sum_all(sq);
            g.backward(l);
            g.accumulate_param_grads(s);
        };
        let rep = finite_diff_check(&mut store, 1e-5, &mut loss, &mut grad).unwrap();
        assert!(rep.max_rel_err < 1e-8, "rel err {}", rep.max_rel_err);
        assert_eq!(rep.n_coords, 3);
    }

    #[test]
    fn linear_is_exact() {
        let mut store = ParamStore::new(Precision::Double);
        let pid = store.register("theta", vec![1, 4], vec![1.0, 2.0, 3.0, 4.0]);
        let mut loss = |s: &ParamStore| {
            let mut g = Graph::new(Precision::Double);
            let th = g.param(s, pid);
            let scaled = g.affine(th, 2.5, 0.0);
            let l = g.sum_all(scaled);
            g.data(l)[0]
        };
        let mut grad = |s: &mut ParamStore| {
            let mut g = Graph::new(Precision::Double);
            let th = g.param(s, pid);
            let scaled = g.affine(th, 2.5, 0.0);
            let l = g.sum_all(scaled);
            g.backward(l);
            g.accumulate_param_grads(s);
        };
        let rep = finite_diff_check(&mut store, 1e-5, &mut loss, &mut grad).unwrap();
        assert!(rep.max_rel_err < 1e-10, "rel err {}", rep.max_rel_err);
    }

    #[test]
    fn rejects_bad_eps_and_f32() {
        let mut store = ParamStore::new(Precision::Double);
        store.register("p", vec![1], vec![1.0]);
        let r = finite_diff_check(&mut store, 0.0, &mut |_| 0.0, &mut |_| {});
        assert!(r.is_err());
        let mut s32 = ParamStore::new(Precision::Single);
        s32.register("p", vec![1], vec![1.0]);
        let r2 = finite_diff_check(&mut s32, 1e-5, &mut |_| 0.0, &mut |_| {});
        assert!(r2.is_err());
    }
}
