use super::params::{Grads, ParamStore};

/// Worst disagreement between analytic and central-difference gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct GradReport {
    pub max_rel_error: f64,
    pub worst_param: String,
    pub worst_index: usize,
    pub checked: usize,
    /// Coordinates left out because the loss has a kink within the step
    /// (the central difference changes with the step size).
    pub kinks: usize,
}

/// `|a − n| / max(|a|, |n|, floor)`.
pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

pub const REL_FLOOR: f64 = 1e-6;

const KINK_SUSPECT: f64 = 1e-6;
const KINK_SPREAD: f64 = 1e-3;

struct ParamIdx(super::params::ParamId, usize);

fn central<F>(probe: &mut ParamStore<f64>, loss: &mut F, at: ParamIdx, orig: f64, h: f64) -> f64
where
    F: FnMut(&ParamStore<f64>) -> f64,
{
    let ParamIdx(id, k) = at;
    probe.value_mut(id)[k] = orig + h;
    let up = loss(probe);
    probe.value_mut(id)[k] = orig - h;
    let down = loss(probe);
    probe.value_mut(id)[k] = orig;
    (up - down) / (2.0 * h)
}

/// Compares `grads` with central differences of `loss` for every scalar of
/// `store`.
pub fn check_gradients<F>(store: &ParamStore<f64>, grads: &Grads<f64>, h: f64, mut loss: F) -> GradReport
where
    F: FnMut(&ParamStore<f64>) -> f64,
{
    let mut probe = store.clone();
    let mut report = GradReport {
        max_rel_error: 0.0,
        worst_param: String::new(),
        worst_index: 0,
        checked: 0,
        kinks: 0,
    };
    let names: Vec<String> = store.iter().map(|p| p.name.clone()).collect();
    for (pi, name) in names.iter().enumerate() {
        let id = super::params::ParamId(pi);
        for k in 0..store.value(id).len() {
            let orig = store.value(id)[k];
            probe.value_mut(id)[k] = orig + h;
            let numeric = central(&mut probe, &mut loss, ParamIdx(id, k), orig, h);
            let analytic = grads.get(id)[k];
            let err = relative_error(analytic, numeric, REL_FLOOR);
            if err > KINK_SUSPECT {
                let fine = central(&mut probe, &mut loss, ParamIdx(id, k), orig, h / 10.0);
                if relative_error(numeric, fine, REL_FLOOR) > KINK_SPREAD {
                    report.kinks += 1;
                    continue;
                }
            }
            report.checked += 1;
            if err > report.max_rel_error {
                report.max_rel_error = err;
                report.worst_param = name.clone();
                report.worst_index = k;
            }
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    fn store(values: &[f64]) -> ParamStore<f64> {
        let mut s = ParamStore::new();
        s.constant("x", 1, values.len(), 0.0);
        s.value_mut(super::super::params::ParamId(0)).copy_from_slice(values);
        s
    }

    fn grads_of(s: &ParamStore<f64>, g: &[f64]) -> Grads<f64> {
        let mut gr = s.grads();
        gr.get_mut(super::super::params::ParamId(0)).copy_from_slice(g);
        gr
    }

    #[test]
    fn correct_gradient_passes() {
        let s = store(&[0.3, -1.2]);
        let g = grads_of(&s, &[2.0 * 0.3, 3.0 * 1.44]);
        let rep = check_gradients(&s, &g, 1e-5, |st| {
            let v = st.value(super::super::params::ParamId(0));
            v[0] * v[0] + v[1].powi(3)
        });
        assert!(rep.max_rel_error < 1e-8, "{rep:?}");
        assert_eq!((rep.checked, rep.kinks), (2, 0));
    }

    #[test]
    fn wrong_gradient_fails() {
        let s = store(&[0.3, -1.2]);
        let g = grads_of(&s, &[0.6, 1.0]);
        let rep = check_gradients(&s, &g, 1e-5, |st| {
            let v = st.value(super::super::params::ParamId(0));
            v[0] * v[0] + v[1].powi(3)
        });
        assert!(rep.max_rel_error > 0.5);
        assert_eq!(rep.worst_index, 1);
        assert_eq!(rep.kinks, 0);
    }

    #[test]
    fn kink_inside_the_step_is_set_aside() {
        // relu(x) with x just below zero: analytic 0, wide difference sees the kink
        let s = store(&[-3e-6, 0.5]);
        let g = grads_of(&s, &[0.0, 1.0]);
        let rep = check_gradients(&s, &g, 1e-5, |st| {
            let v = st.value(super::super::params::ParamId(0));
            v[0].max(0.0) + v[1]
        });
        assert_eq!((rep.checked, rep.kinks), (1, 1));
        assert!(rep.max_rel_error < 1e-8);
    }
}
