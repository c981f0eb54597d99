//! Sequential minimal optimization of the soft-margin dual.
//!
//! Working pairs follow the simplified heuristic: sweep for the first KKT
//! violator, partner it with the sample maximizing |E1 - E2|, then fall back
//! to deterministic cyclic scans. Full sweeps over all samples alternate with
//! sweeps over the non-bound subset. Everything is deterministic: no random
//! starts, ties broken by lowest index, so a fixed input yields a fixed model.

use super::{FEATURE_DIM, SampleSet, SvmModel, TrainConfig, kernel};
use crate::error::{Error, Result};

/// Near-zero threshold for treating an update as progress.
const STEP_EPS: f64 = 1e-12;

struct Solver<'a> {
    x: &'a [[f64; FEATURE_DIM]],
    y: Vec<f64>,
    alpha: Vec<f64>,
    errors: Vec<f64>,
    bias: f64,
    c: f64,
    gamma: f64,
    tol: f64,
}

impl<'a> Solver<'a> {
    fn new(samples: &'a SampleSet, cfg: &TrainConfig) -> Solver<'a> {
        let n = samples.len();
        let y: Vec<f64> = samples.labels.iter().map(|&l| l as f64).collect();
        // With all alphas zero, f(x) = 0 and E_i = -y_i.
        let errors = y.iter().map(|&yi| -yi).collect();
        Solver {
            x: &samples.features,
            y,
            alpha: vec![0.0; n],
            errors,
            bias: 0.0,
            c: cfg.c,
            gamma: cfg.gamma,
            tol: cfg.tol,
        }
    }

    fn k(&self, i: usize, j: usize) -> f64 {
        kernel(self.gamma, &self.x[i], &self.x[j])
    }

    fn non_bound(&self, i: usize) -> bool {
        self.alpha[i] > 0.0 && self.alpha[i] < self.c
    }

    fn violates_kkt(&self, i: usize) -> bool {
        let r = self.errors[i] * self.y[i];
        (r < -self.tol && self.alpha[i] < self.c) || (r > self.tol && self.alpha[i] > 0.0)
    }

    /// Try to make progress with `j` as the second multiplier.
    fn examine(&mut self, j: usize) -> bool {
        if !self.violates_kkt(j) {
            return false;
        }
        let n = self.x.len();

        // Heuristic partner: largest |E_j - E_i|, non-bound candidates first.
        let mut best: Option<(usize, f64)> = None;
        let mut any_non_bound = false;
        for i in 0..n {
            if i != j && self.non_bound(i) {
                any_non_bound = true;
                let gap = (self.errors[j] - self.errors[i]).abs();
                if best.map(|(_, g)| gap > g).unwrap_or(true) {
                    best = Some((i, gap));
                }
            }
        }
        if !any_non_bound {
            for i in 0..n {
                if i != j {
                    let gap = (self.errors[j] - self.errors[i]).abs();
                    if best.map(|(_, g)| gap > g).unwrap_or(true) {
                        best = Some((i, gap));
                    }
                }
            }
        }
        if let Some((i, _)) = best
            && self.step(i, j) {
                return true;
            }

        // Fallback scans, cyclic from j+1 for determinism.
        for off in 1..n {
            let i = (j + off) % n;
            if self.non_bound(i) && self.step(i, j) {
                return true;
            }
        }
        for off in 1..n {
            let i = (j + off) % n;
            if !self.non_bound(i) && self.step(i, j) {
                return true;
            }
        }
        false
    }

    /// Jointly optimize the pair (i, j). Returns true when alphas moved.
    fn step(&mut self, i: usize, j: usize) -> bool {
        if i == j {
            return false;
        }
        let (a_i, a_j) = (self.alpha[i], self.alpha[j]);
        let (y_i, y_j) = (self.y[i], self.y[j]);
        let (e_i, e_j) = (self.errors[i], self.errors[j]);
        let s = y_i * y_j;

        let (lo, hi) = if (y_i - y_j).abs() > 0.5 {
            ((a_j - a_i).max(0.0), (self.c + a_j - a_i).min(self.c))
        } else {
            ((a_i + a_j - self.c).max(0.0), (a_i + a_j).min(self.c))
        };
        if lo >= hi {
            return false;
        }

        let k_ii = self.k(i, i);
        let k_jj = self.k(j, j);
        let k_ij = self.k(i, j);
        let eta = k_ii + k_jj - 2.0 * k_ij;

        let a_j_new = if eta > 0.0 {
            (a_j + y_j * (e_i - e_j) / eta).clamp(lo, hi)
        } else {
            // Flat or degenerate direction: compare the objective at the ends.
            let f_i = y_i * (e_i + self.bias) - a_i * k_ii - s * a_j * k_ij;
            let f_j = y_j * (e_j + self.bias) - s * a_i * k_ij - a_j * k_jj;
            let l_i = a_i + s * (a_j - lo);
            let h_i = a_i + s * (a_j - hi);
            let obj_lo = l_i * f_i + lo * f_j
                + 0.5 * l_i * l_i * k_ii
                + 0.5 * lo * lo * k_jj
                + s * lo * l_i * k_ij;
            let obj_hi = h_i * f_i + hi * f_j
                + 0.5 * h_i * h_i * k_ii
                + 0.5 * hi * hi * k_jj
                + s * hi * h_i * k_ij;
            if obj_lo < obj_hi - STEP_EPS {
                lo
            } else if obj_lo > obj_hi + STEP_EPS {
                hi
            } else {
                return false;
            }
        };

        if (a_j_new - a_j).abs() < STEP_EPS * (a_j_new + a_j + STEP_EPS) {
            return false;
        }
        let a_i_new = (a_i + s * (a_j - a_j_new)).clamp(0.0, self.c);

        let d_i = (a_i_new - a_i) * y_i;
        let d_j = (a_j_new - a_j) * y_j;
        let b_old = self.bias;
        let b_i = b_old - e_i - d_i * k_ii - d_j * k_ij;
        let b_j = b_old - e_j - d_i * k_ij - d_j * k_jj;
        self.bias = if a_i_new > 0.0 && a_i_new < self.c {
            b_i
        } else if a_j_new > 0.0 && a_j_new < self.c {
            b_j
        } else {
            0.5 * (b_i + b_j)
        };

        self.alpha[i] = a_i_new;
        self.alpha[j] = a_j_new;

        let db = self.bias - b_old;
        for t in 0..self.x.len() {
            self.errors[t] += d_i * self.k(i, t) + d_j * self.k(j, t) + db;
        }
        true
    }
}

/// Train a Gaussian-kernel SVM on the given samples.
pub fn train_svm(samples: &SampleSet, cfg: &TrainConfig) -> Result<SvmModel> {
    cfg.validate()?;
    if samples.len() < 2 {
        return Err(Error::InvalidParameter {
            name: "samples",
            msg: "at least two samples required".into(),
        });
    }

    let mut solver = Solver::new(samples, cfg);
    let n = samples.len();
    let max_passes = cfg.max_passes.max(1);

    let mut quiet_sweeps = 0u32;
    let mut examine_all = true;
    let mut sweeps = 0usize;
    let sweep_cap = 200 * n + 10_000;
    while quiet_sweeps < max_passes {
        let mut changed = 0usize;
        for j in 0..n {
            if (examine_all || solver.non_bound(j))
                && solver.examine(j) {
                    changed += 1;
                }
        }
        sweeps += 1;
        if sweeps > sweep_cap {
            return Err(Error::Numeric(format!(
                "SMO did not converge within {sweep_cap} sweeps"
            )));
        }
        if changed == 0 {
            quiet_sweeps += 1;
        } else {
            quiet_sweeps = 0;
        }
        if examine_all {
            examine_all = false;
        } else if changed == 0 {
            examine_all = true;
        }
    }

    // Dual feasibility must survive training.
    let balance: f64 = solver
        .alpha
        .iter()
        .zip(&solver.y)
        .map(|(a, y)| a * y)
        .sum();
    if balance.abs() > cfg.tol {
        return Err(Error::Internal(format!(
            "dual constraint drifted to {balance}"
        )));
    }
    if !solver.bias.is_finite() || solver.alpha.iter().any(|a| !a.is_finite()) {
        return Err(Error::Numeric("non-finite SMO state".into()));
    }

    let mut support_vectors = Vec::new();
    let mut dual_coefs = Vec::new();
    for i in 0..n {
        if solver.alpha[i] > 0.0 {
            support_vectors.push(samples.features[i]);
            dual_coefs.push(solver.alpha[i] * solver.y[i]);
        }
    }
    Ok(SvmModel {
        support_vectors,
        dual_coefs,
        bias: solver.bias,
        gamma: cfg.gamma,
    })
}
