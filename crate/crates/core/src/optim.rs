//! Derivative-free maximization over box, sum-capped, and simplex-normalized
//! parameter groups with exhaustively enumerated discrete branches.
//!
//! The search is a deterministic sequence: structured and coarse-grid starts
//! first, then fixed-size local refinements (Nelder-Mead) of the best starts,
//! then seeded random restarts. Truncating the sequence at a smaller budget
//! always yields a prefix of the same evaluations, so enlarging the budget
//! can never return a worse best point.

use crate::error::Error;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Constraint attached to a group of parameter dimensions. Box bounds apply
/// to every dimension individually.
#[derive(Debug, Clone)]
pub enum ConstraintGroup {
    /// Nonnegative weights renormalized to sum to one (degenerate vertices
    /// stay reachable exactly).
    Simplex { dims: Vec<usize> },
    /// Nonnegative entries scaled down proportionally if their sum exceeds
    /// the cap.
    SumCap { dims: Vec<usize>, cap: f64 },
}

/// Search specification: bounds, constraint groups, discrete branches,
/// budget, and seed.
#[derive(Debug, Clone)]
pub struct SearchSpec {
    pub bounds: Vec<(f64, f64)>,
    pub groups: Vec<ConstraintGroup>,
    /// Number of discrete branches; the objective receives the branch index.
    pub branches: usize,
    /// Maximum number of objective evaluations across all branches.
    pub budget: usize,
    pub seed: u64,
    /// Additional start points, each tied to one branch.
    pub extra_starts: Vec<(usize, Vec<f64>)>,
}

impl SearchSpec {
    pub fn validate(&self) -> Result<(), Error> {
        if self.budget == 0 {
            return Err(Error::Domain("optimizer budget must be positive".into()));
        }
        if self.branches == 0 {
            return Err(Error::Domain(
                "at least one discrete branch is required".into(),
            ));
        }
        if self
            .bounds
            .iter()
            .any(|(lo, hi)| !lo.is_finite() || !hi.is_finite() || lo > hi)
        {
            return Err(Error::Domain(
                "parameter bounds must be finite and ordered".into(),
            ));
        }
        for g in &self.groups {
            let dims = match g {
                ConstraintGroup::Simplex { dims } => dims,
                ConstraintGroup::SumCap { dims, cap } => {
                    if !(*cap > 0.0) {
                        return Err(Error::Domain("sum cap must be positive".into()));
                    }
                    dims
                }
            };
            if dims.iter().any(|d| *d >= self.bounds.len()) {
                return Err(Error::Domain(
                    "constraint group references unknown dimension".into(),
                ));
            }
        }
        Ok(())
    }

    /// Clamps to the box and applies every group constraint.
    pub fn project(&self, x: &mut [f64]) {
        for (v, (lo, hi)) in x.iter_mut().zip(&self.bounds) {
            if !v.is_finite() {
                *v = *lo;
            }
            *v = v.clamp(*lo, *hi);
        }
        for g in &self.groups {
            match g {
                ConstraintGroup::Simplex { dims } => {
                    let sum: f64 = dims.iter().map(|&d| x[d].max(0.0)).sum();
                    if sum <= 1e-15 {
                        let u = 1.0 / dims.len() as f64;
                        for &d in dims {
                            x[d] = u;
                        }
                    } else {
                        for &d in dims {
                            x[d] = x[d].max(0.0) / sum;
                        }
                    }
                }
                ConstraintGroup::SumCap { dims, cap } => {
                    let sum: f64 = dims.iter().map(|&d| x[d].max(0.0)).sum();
                    if sum > *cap {
                        let scale = cap / sum;
                        for &d in dims {
                            x[d] = x[d].max(0.0) * scale;
                        }
                    }
                }
            }
        }
    }
}

/// Outcome of a search: best value, the feasible parameters achieving it,
/// the branch they belong to, and the number of objective evaluations spent.
#[derive(Debug, Clone)]
pub struct OptimizeResult {
    pub best_value: f64,
    pub best_params: Vec<f64>,
    pub best_branch: usize,
    pub evals: usize,
}

/// Lexicographic tie-break so parallel or reordered merges stay
/// deterministic: higher value wins, then lower branch, then the
/// lexicographically smaller parameter vector.
fn better(
    value: f64,
    branch: usize,
    params: &[f64],
    best: f64,
    best_branch: usize,
    best_params: &[f64],
) -> bool {
    if value != best {
        return value > best;
    }
    if branch != best_branch {
        return branch < best_branch;
    }
    for (a, b) in params.iter().zip(best_params) {
        match a.total_cmp(b) {
            std::cmp::Ordering::Less => return true,
            std::cmp::Ordering::Greater => return false,
            std::cmp::Ordering::Equal => {}
        }
    }
    false
}

/// Maximizes `objective(branch, params)` over the search space. The
/// objective must be pure; infeasible points may return `NEG_INFINITY`.
/// Deterministic given the spec (seed and budget included).
pub fn optimize_rate(
    spec: &SearchSpec,
    objective: impl Fn(usize, &[f64]) -> f64,
) -> Result<OptimizeResult, Error> {
    spec.validate()?;
    let budget_per_branch = (spec.budget / spec.branches).max(1);

    let mut best_value = f64::NEG_INFINITY;
    let mut best_params: Vec<f64> = vec![];
    let mut best_branch = 0usize;
    let mut total_evals = 0usize;
    let mut found = false;

    for branch in 0..spec.branches {
        let mut run = BranchRun {
            spec,
            branch,
            objective: &objective,
            evals: 0,
            cap: budget_per_branch,
            best_value: f64::NEG_INFINITY,
            best_params: vec![],
            found: false,
        };
        run.execute();
        total_evals += run.evals;
        if run.found
            && (!found
                || better(
                    run.best_value,
                    branch,
                    &run.best_params,
                    best_value,
                    best_branch,
                    &best_params,
                ))
        {
            best_value = run.best_value;
            best_params = run.best_params;
            best_branch = branch;
            found = true;
        }
    }

    if !found {
        return Err(Error::Infeasible(
            "no feasible point found within the budget".into(),
        ));
    }
    Ok(OptimizeResult {
        best_value,
        best_params,
        best_branch,
        evals: total_evals,
    })
}

struct BranchRun<'a, F: Fn(usize, &[f64]) -> f64> {
    spec: &'a SearchSpec,
    branch: usize,
    objective: &'a F,
    evals: usize,
    cap: usize,
    best_value: f64,
    best_params: Vec<f64>,
    found: bool,
}

impl<F: Fn(usize, &[f64]) -> f64> BranchRun<'_, F> {
    fn eval(&mut self, x: &[f64]) -> Option<f64> {
        if self.evals >= self.cap {
            return None;
        }
        let mut p = x.to_vec();
        self.spec.project(&mut p);
        let v = (self.objective)(self.branch, &p);
        self.evals += 1;
        if v.is_finite()
            && (!self.found
                || better(
                    v,
                    self.branch,
                    &p,
                    self.best_value,
                    self.branch,
                    &self.best_params,
                ))
        {
            self.best_value = v;
            self.best_params = p;
            self.found = true;
        }
        Some(v)
    }

    fn execute(&mut self) {
        let dim = self.spec.bounds.len();
        if dim == 0 {
            let _ = self.eval(&[]);
            return;
        }
        debug_assert!(dim < 40, "search dimension unreasonably large");
        let mid: Vec<f64> = self
            .spec
            .bounds
            .iter()
            .map(|(lo, hi)| 0.5 * (lo + hi))
            .collect();
        let lo: Vec<f64> = self.spec.bounds.iter().map(|b| b.0).collect();
        let hi: Vec<f64> = self.spec.bounds.iter().map(|b| b.1).collect();

        // Phase A: structured starts, caller-provided starts, and a coarse
        // grid (or seeded uniform starts when the grid would be too large).
        let mut starts: Vec<Vec<f64>> = vec![mid.clone(), lo.clone(), hi.clone()];
        for (b, x) in &self.spec.extra_starts {
            if *b == self.branch && x.len() == dim {
                starts.push(x.clone());
            }
        }
        let grid_size = 3usize.checked_pow(dim as u32).unwrap_or(usize::MAX);
        let max_starts = 243usize;
        if grid_size <= max_starts {
            for idx in 0..grid_size {
                let mut x = Vec::with_capacity(dim);
                let mut rest = idx;
                for d in 0..dim {
                    let level = rest % 3;
                    rest /= 3;
                    let (l, h) = self.spec.bounds[d];
                    x.push(l + (h - l) * level as f64 / 2.0);
                }
                starts.push(x);
            }
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(self.spec.seed ^ 0x9e37_79b9_7f4a_7c15);
            for _ in 0..max_starts {
                let x: Vec<f64> = (0..dim)
                    .map(|d| {
                        let (l, h) = self.spec.bounds[d];
                        l + (h - l) * rng.random::<f64>()
                    })
                    .collect();
                starts.push(x);
            }
        }

        let mut scored: Vec<(f64, usize)> = Vec::with_capacity(starts.len());
        for (i, s) in starts.iter().enumerate() {
            match self.eval(s) {
                Some(v) => scored.push((v, i)),
                None => return,
            }
        }

        // Phase B: fixed-size local refinements of the most promising
        // starts, then seeded restarts until the budget runs out. Unit sizes
        // do not depend on the budget, so a larger budget only appends units.
        scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        let unit = 60 * (dim + 1);
        let top: Vec<Vec<f64>> = scored
            .iter()
            .take(4)
            .map(|(_, i)| starts[*i].clone())
            .collect();
        for s in &top {
            if self.nelder_mead(s, unit).is_none() {
                return;
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.spec.seed ^ 0x51ed_270b_8d04_2fd5);
        loop {
            let x: Vec<f64> = (0..dim)
                .map(|d| {
                    let (l, h) = self.spec.bounds[d];
                    l + (h - l) * rng.random::<f64>()
                })
                .collect();
            if self.nelder_mead(&x, unit).is_none() {
                return;
            }
        }
    }

    /// Bounded Nelder-Mead from `x0` with an evaluation allowance of `unit`.
    /// Returns `None` when the branch budget is exhausted.
    fn nelder_mead(&mut self, x0: &[f64], unit: usize) -> Option<()> {
        let dim = x0.len();
        let stop_at = (self.evals + unit).min(self.cap);
        let mut simplex: Vec<(f64, Vec<f64>)> = Vec::with_capacity(dim + 1);
        let f0 = self.eval(x0)?;
        simplex.push((f0, x0.to_vec()));
        for d in 0..dim {
            let (l, h) = self.spec.bounds[d];
            let step = 0.12 * (h - l).max(1e-9);
            let mut x = x0.to_vec();
            x[d] = if x[d] + step <= h {
                x[d] + step
            } else {
                x[d] - step
            };
            if self.evals >= stop_at {
                return Some(());
            }
            let fx = self.eval(&x)?;
            simplex.push((fx, x));
        }

        while self.evals < stop_at {
            // Maximization: order best first.
            simplex.sort_by(|a, b| b.0.total_cmp(&a.0));
            let spread = simplex[0].0 - simplex[dim].0;
            if spread.abs() < 1e-13 * (1.0 + simplex[0].0.abs()) {
                break;
            }
            let centroid: Vec<f64> = (0..dim)
                .map(|d| simplex[..dim].iter().map(|(_, x)| x[d]).sum::<f64>() / dim as f64)
                .collect();
            let worst = simplex[dim].clone();
            let reflect: Vec<f64> = (0..dim).map(|d| 2.0 * centroid[d] - worst.1[d]).collect();
            let fr = match self.eval(&reflect) {
                Some(v) => v,
                None => return None,
            };
            if fr > simplex[0].0 {
                let expand: Vec<f64> = (0..dim)
                    .map(|d| centroid[d] + 2.0 * (reflect[d] - centroid[d]))
                    .collect();
                if self.evals < stop_at {
                    if let Some(fe) = self.eval(&expand) {
                        if fe > fr {
                            simplex[dim] = (fe, expand);
                            continue;
                        }
                    } else {
                        return None;
                    }
                }
                simplex[dim] = (fr, reflect);
            } else if fr > simplex[dim - 1].0 {
                simplex[dim] = (fr, reflect);
            } else {
                let contract: Vec<f64> = (0..dim)
                    .map(|d| centroid[d] + 0.5 * (worst.1[d] - centroid[d]))
                    .collect();
                let fc = match self.eval(&contract) {
                    Some(v) => v,
                    None => return None,
                };
                if fc > worst.0 {
                    simplex[dim] = (fc, contract);
                } else {
                    // Shrink toward the best vertex.
                    let best = simplex[0].1.clone();
                    for k in 1..=dim {
                        let x: Vec<f64> = (0..dim)
                            .map(|d| best[d] + 0.5 * (simplex[k].1[d] - best[d]))
                            .collect();
                        if self.evals >= stop_at {
                            return Some(());
                        }
                        match self.eval(&x) {
                            Some(v) => simplex[k] = (v, x),
                            None => return None,
                        }
                    }
                }
            }
        }
        Some(())
    }
}

/// SplitMix64 step, used to derive independent deterministic seeds.
pub fn split_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
