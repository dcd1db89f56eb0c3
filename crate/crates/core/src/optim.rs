//! Deterministic derivative-free minimization (Nelder-Mead polytope).
//!
//! The objective may return `f64::INFINITY` to mark infeasible points; the
//! search simply treats them as arbitrarily bad. No randomness is involved,
//! so results are reproducible bit for bit.

/// Standard reflection/expansion/contraction/shrink coefficients.
const ALPHA: f64 = 1.0;
const GAMMA: f64 = 2.0;
const RHO: f64 = 0.5;
const SIGMA: f64 = 0.5;

#[derive(Debug, Clone)]
pub struct NelderMead {
    /// Hard cap on objective evaluations (including the initial simplex).
    pub max_evals: usize,
    /// Stop once the simplex function spread is this small relative to the
    /// value scale. Scale-free: multiplying the objective by a positive
    /// constant does not change the trajectory or the stopping point.
    pub rel_tol: f64,
    /// Initial simplex displacement along each coordinate.
    pub initial_step: f64,
    /// Extra descents restarted from the incumbent with a fresh simplex.
    pub restarts: usize,
}

impl Default for NelderMead {
    fn default() -> Self {
        NelderMead {
            max_evals: 500,
            rel_tol: 1e-8,
            initial_step: 0.5,
            restarts: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct NmResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub evals: usize,
    /// False when the evaluation budget ran out before the spread test.
    pub converged: bool,
}

struct Budget<'a, F> {
    f: &'a mut F,
    used: usize,
    cap: usize,
}

impl<F: FnMut(&[f64]) -> f64> Budget<'_, F> {
    fn call(&mut self, x: &[f64]) -> Option<f64> {
        if self.used >= self.cap {
            return None;
        }
        self.used += 1;
        Some((self.f)(x))
    }
}

impl NelderMead {
    /// Minimize `f` starting from `x0`. The returned point is always the
    /// best ever evaluated; it never regresses below the start.
    pub fn minimize<F: FnMut(&[f64]) -> f64>(&self, mut f: F, x0: &[f64]) -> NmResult {
        let mut budget = Budget {
            f: &mut f,
            used: 0,
            cap: self.max_evals.max(1),
        };
        let f0 = budget.call(x0).unwrap_or(f64::INFINITY);
        let mut best = NmResult {
            x: x0.to_vec(),
            value: f0,
            evals: 0,
            converged: false,
        };
        for _ in 0..=self.restarts {
            let start = best.x.clone();
            let start_val = best.value;
            let (x, value, converged) = self.descend(&mut budget, &start, start_val);
            if value < best.value {
                best.x = x;
                best.value = value;
            }
            best.converged = converged;
            if budget.used >= budget.cap {
                best.converged = false;
                break;
            }
        }
        best.evals = budget.used;
        best
    }

    fn descend<F: FnMut(&[f64]) -> f64>(
        &self,
        budget: &mut Budget<'_, F>,
        x0: &[f64],
        f0: f64,
    ) -> (Vec<f64>, f64, bool) {
        let dim = x0.len();
        let mut simplex: Vec<(f64, Vec<f64>)> = Vec::with_capacity(dim + 1);
        simplex.push((f0, x0.to_vec()));
        for i in 0..dim {
            let mut v = x0.to_vec();
            v[i] += self.initial_step;
            let Some(fv) = budget.call(&v) else {
                return finish(simplex, false);
            };
            simplex.push((fv, v));
        }
        order(&mut simplex);

        loop {
            let spread = simplex[dim].0 - simplex[0].0;
            let scale = 0.5 * (simplex[dim].0.abs() + simplex[0].0.abs());
            if spread.is_finite() && spread <= self.rel_tol * scale {
                return finish(simplex, true);
            }

            let centroid: Vec<f64> = (0..dim)
                .map(|j| simplex[..dim].iter().map(|(_, v)| v[j]).sum::<f64>() / dim as f64)
                .collect();
            let worst = simplex[dim].clone();
            let reflected: Vec<f64> = centroid
                .iter()
                .zip(&worst.1)
                .map(|(c, w)| c + ALPHA * (c - w))
                .collect();
            let Some(f_r) = budget.call(&reflected) else {
                return finish(simplex, false);
            };

            if f_r < simplex[0].0 {
                let expanded: Vec<f64> = centroid
                    .iter()
                    .zip(&reflected)
                    .map(|(c, r)| c + GAMMA * (r - c))
                    .collect();
                let Some(f_e) = budget.call(&expanded) else {
                    replace_worst(&mut simplex, f_r, reflected);
                    return finish(simplex, false);
                };
                if f_e < f_r {
                    replace_worst(&mut simplex, f_e, expanded);
                } else {
                    replace_worst(&mut simplex, f_r, reflected);
                }
            } else if f_r < simplex[dim - 1].0 {
                replace_worst(&mut simplex, f_r, reflected);
            } else {
                // Contract toward the centroid, outside or inside depending
                // on whether the reflection improved on the worst vertex.
                let anchor = if f_r < worst.0 { &reflected } else { &worst.1 };
                let contracted: Vec<f64> = centroid
                    .iter()
                    .zip(anchor)
                    .map(|(c, a)| c + RHO * (a - c))
                    .collect();
                let Some(f_c) = budget.call(&contracted) else {
                    return finish(simplex, false);
                };
                if f_c < worst.0.min(f_r) {
                    replace_worst(&mut simplex, f_c, contracted);
                } else {
                    // Shrink everything toward the best vertex.
                    let best_x = simplex[0].1.clone();
                    for k in 1..=dim {
                        let v: Vec<f64> = simplex[k]
                            .1
                            .iter()
                            .zip(&best_x)
                            .map(|(xi, bi)| bi + SIGMA * (xi - bi))
                            .collect();
                        let Some(fv) = budget.call(&v) else {
                            return finish(simplex, false);
                        };
                        simplex[k] = (fv, v);
                    }
                    order(&mut simplex);
                }
            }
        }
    }
}

fn order(simplex: &mut [(f64, Vec<f64>)]) {
    simplex.sort_by(|a, b| a.0.total_cmp(&b.0));
}

fn replace_worst(simplex: &mut [(f64, Vec<f64>)], value: f64, x: Vec<f64>) {
    let last = simplex.len() - 1;
    simplex[last] = (value, x);
    order(simplex);
}

fn finish(mut simplex: Vec<(f64, Vec<f64>)>, converged: bool) -> (Vec<f64>, f64, bool) {
    order(&mut simplex);
    let (value, x) = simplex.swap_remove(0);
    (x, value, converged)
}
