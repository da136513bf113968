//! Nelder–Mead simplex minimisation.

#[derive(Clone, Debug)]
pub struct NelderMeadConfig {
    /// Initial simplex edge length along each axis.
    pub step: Vec<f64>,
    /// Stop once every vertex lies within this distance of the best one.
    pub tolerance: f64,
    pub max_evaluations: usize,
}

#[derive(Clone, Debug)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    pub converged: bool,
}

const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;

pub fn nelder_mead<F>(mut f: F, start: &[f64], config: &NelderMeadConfig) -> Minimum
where
    F: FnMut(&[f64]) -> f64,
{
    let dim = start.len();
    let mut evaluations = 0usize;
    let mut eval = |x: &[f64], count: &mut usize| {
        *count += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(dim + 1);
    simplex.push((start.to_vec(), eval(start, &mut evaluations)));
    for i in 0..dim {
        let mut x = start.to_vec();
        x[i] += config.step[i];
        let v = eval(&x, &mut evaluations);
        simplex.push((x, v));
    }

    let mut converged = false;
    while evaluations < config.max_evaluations {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let spread = simplex[1..]
            .iter()
            .map(|(x, _)| distance(x, &simplex[0].0))
            .fold(0.0, f64::max);
        if spread < config.tolerance {
            converged = true;
            break;
        }

        let centroid: Vec<f64> = (0..dim)
            .map(|j| simplex[..dim].iter().map(|(x, _)| x[j]).sum::<f64>() / dim as f64)
            .collect();
        let worst = simplex[dim].clone();
        let along = |t: f64| -> Vec<f64> { centroid.iter().zip(&worst.0).map(|(c, w)| c + t * (c - w)).collect() };

        let reflected = along(REFLECT);
        let fr = eval(&reflected, &mut evaluations);
        if fr < simplex[0].1 {
            let expanded = along(EXPAND);
            let fe = eval(&expanded, &mut evaluations);
            simplex[dim] = if fe < fr { (expanded, fe) } else { (reflected, fr) };
        } else if fr < simplex[dim - 1].1 {
            simplex[dim] = (reflected, fr);
        } else {
            let (contracted, fc) = if fr < worst.1 {
                let x = along(CONTRACT * REFLECT);
                let v = eval(&x, &mut evaluations);
                (x, v)
            } else {
                let x = along(-CONTRACT);
                let v = eval(&x, &mut evaluations);
                (x, v)
            };
            if fc < worst.1.min(fr) {
                simplex[dim] = (contracted, fc);
            } else {
                let best = simplex[0].0.clone();
                for vertex in simplex.iter_mut().skip(1) {
                    let x: Vec<f64> = best.iter().zip(&vertex.0).map(|(b, v)| b + SHRINK * (v - b)).collect();
                    let v = eval(&x, &mut evaluations);
                    *vertex = (x, v);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, value) = simplex.swap_remove(0);
    Minimum {
        x,
        value,
        evaluations,
        converged,
    }
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}
