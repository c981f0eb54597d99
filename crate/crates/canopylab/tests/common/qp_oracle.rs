//! Brute-force reference for the SVM dual: grid-search the alphas over
//! [0, C]^(n-1) with step C/steps, the last alpha eliminated through the
//! equality constraint sum(alpha_i * y_i) = 0. Maximizes
//! W(alpha) = sum(alpha) - 1/2 * sum_ij alpha_i alpha_j y_i y_j k(x_i, x_j).
//!
//! Enumeration keeps running sums (linear term, quadratic term, constraint
//! balance, and per-variable cross terms) so each grid node costs O(n).
//! The top-level branch fans out across threads.

use canopylab::svm::FEATURE_DIM;

const MAX_N: usize = 8;

pub struct QpProblem {
    pub features: Vec<[f64; FEATURE_DIM]>,
    pub labels: Vec<i8>,
    pub c: f64,
    pub gamma: f64,
}

struct Grid {
    q: Vec<Vec<f64>>,
    y: Vec<f64>,
    n: usize,
    c: f64,
    levels: Vec<f64>,
}

pub fn grid_search_max(problem: &QpProblem, steps: usize) -> f64 {
    let n = problem.features.len();
    assert!((2..=MAX_N).contains(&n), "oracle sized for tiny problems");
    let y: Vec<f64> = problem.labels.iter().map(|&l| l as f64).collect();
    let mut q = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            let mut d2 = 0.0;
            for k in 0..FEATURE_DIM {
                let d = problem.features[i][k] - problem.features[j][k];
                d2 += d * d;
            }
            q[i][j] = y[i] * y[j] * (-problem.gamma * d2).exp();
        }
    }
    let levels: Vec<f64> = (0..=steps)
        .map(|t| problem.c * t as f64 / steps as f64)
        .collect();
    let grid = Grid {
        q,
        y,
        n,
        c: problem.c,
        levels,
    };

    // The oracle itself may always fan out; a max-reduction is order-free, so
    // this changes nothing about what the enumeration computes.
    use rayon::prelude::*;
    grid.levels
        .par_iter()
        .map(|&a0| {
            let state = State::fresh().advanced(&grid, 0, a0);
            descend(&grid, 1, &state)
        })
        .fold(|| f64::NEG_INFINITY, f64::max)
        .reduce(|| f64::NEG_INFINITY, f64::max)
}

#[derive(Clone, Copy)]
struct State {
    lin: f64,
    quad: f64,
    balance: f64,
    cross: [f64; MAX_N],
}

impl State {
    fn fresh() -> State {
        State {
            lin: 0.0,
            quad: 0.0,
            balance: 0.0,
            cross: [0.0; MAX_N],
        }
    }

    fn advanced(mut self, grid: &Grid, depth: usize, a: f64) -> State {
        self.lin += a;
        self.quad += 2.0 * a * self.cross[depth] + a * a * grid.q[depth][depth];
        self.balance += a * grid.y[depth];
        for k in depth + 1..grid.n {
            self.cross[k] += a * grid.q[depth][k];
        }
        self
    }
}

/// Enumerate variables `depth..n-1`; the last variable is implied.
fn descend(grid: &Grid, depth: usize, state: &State) -> f64 {
    let last = grid.n - 1;
    if depth == last {
        let a_last = -grid.y[last] * state.balance;
        if !(-1e-9..=grid.c + 1e-9).contains(&a_last) {
            return f64::NEG_INFINITY;
        }
        let a_last = a_last.clamp(0.0, grid.c);
        let lin = state.lin + a_last;
        let quad =
            state.quad + 2.0 * a_last * state.cross[last] + a_last * a_last * grid.q[last][last];
        return lin - 0.5 * quad;
    }
    let mut best = f64::NEG_INFINITY;
    for &a in &grid.levels {
        let next = state.advanced(grid, depth, a);
        let w = descend(grid, depth + 1, &next);
        if w > best {
            best = w;
        }
    }
    best
}
