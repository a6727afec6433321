use rand::seq::index::sample;

use super::{AutodiffError, Gradients, ParamStore, Tape, Var};
use crate::rng;

/// Magnitude floor for the relative-error denominator, so coordinates with
/// near-zero gradients are compared absolutely.
pub const REL_ERR_FLOOR: f64 = 1e-4;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_ERR_FLOOR)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupReport {
    pub group: String,
    pub checked: usize,
    pub max_rel_err: f64,
    /// `(parameter, flat index, analytic, numeric)` at the worst coordinate.
    pub worst: Option<(String, usize, f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradReport {
    pub tol: f64,
    pub groups: Vec<GroupReport>,
}

impl GradReport {
    pub fn passed(&self) -> bool {
        self.groups.iter().all(|g| g.max_rel_err <= self.tol)
    }

    pub fn max_rel_err(&self) -> f64 {
        self.groups.iter().map(|g| g.max_rel_err).fold(0.0, f64::max)
    }
}

/// Compare backward-pass gradients of `f` with central differences. Groups
/// with more than `samples` coordinates are checked on a seeded sample.
pub fn grad_check<F>(
    mut f: F,
    store: &mut ParamStore,
    eps: f64,
    tol: f64,
    samples: usize,
    seed: u64,
) -> Result<GradReport, AutodiffError>
where
    F: FnMut(&mut Tape, &ParamStore) -> Result<Var, AutodiffError>,
{
    let mut tape = Tape::new();
    let root = f(&mut tape, store)?;
    let mut grads = Gradients::zeros_like(store);
    tape.backward_into(root, &mut grads)?;
    let mut eval = |store: &ParamStore| -> Result<f64, AutodiffError> {
        let mut t = Tape::new();
        let r = f(&mut t, store)?;
        Ok(t.value(r).item())
    };

    let mut groups = Vec::new();
    for group in store.groups() {
        let coords: Vec<(usize, usize)> = (0..store.len())
            .filter(|&i| store.get(i).group == group)
            .flat_map(|i| (0..store.get(i).value.len()).map(move |k| (i, k)))
            .collect();
        let chosen: Vec<(usize, usize)> = if coords.len() > samples {
            let mut r = rng::stream(seed, &format!("gradcheck.{group}"));
            let mut picked: Vec<usize> = sample(&mut r, coords.len(), samples).into_vec();
            picked.sort_unstable();
            picked.into_iter().map(|i| coords[i]).collect()
        } else {
            coords
        };
        let mut report = GroupReport { group: group.clone(), checked: 0, max_rel_err: 0.0, worst: None };
        for (pid, k) in chosen {
            let orig = store.get(pid).value.data[k];
            store.get_mut(pid).value.data[k] = orig + eps;
            let plus = eval(store);
            store.get_mut(pid).value.data[k] = orig - eps;
            let minus = eval(store);
            store.get_mut(pid).value.data[k] = orig;
            let numeric = (plus? - minus?) / (2.0 * eps);
            let analytic = grads.grads[pid].data[k];
            let err = relative_error(analytic, numeric);
            report.checked += 1;
            if err > report.max_rel_err || report.worst.is_none() {
                report.max_rel_err = report.max_rel_err.max(err);
                report.worst = Some((store.get(pid).name.clone(), k, analytic, numeric));
            }
        }
        groups.push(report);
    }
    Ok(GradReport { tol, groups })
}
