//! Dense-tableau primal simplex for `max cᵀx  s.t.  Ax ≤ b, x ≥ 0` with
//! `b ≥ 0`, so the all-slack basis is feasible and no phase one is needed.
//!
//! Pricing is Dantzig's largest-coefficient rule; after a run of degenerate
//! pivots the solver switches to Bland's rule for the rest of the solve,
//! which rules out cycling.

const EPS: f64 = 1e-9;
const DEGENERATE_STREAK: usize = 32;

#[derive(Debug, Clone, Default)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    /// Sparse rows `(coefficients, rhs)`.
    pub rows: Vec<(Vec<(usize, f64)>, f64)>,
}

impl LinearProgram {
    pub fn new(vars: usize) -> Self {
        LinearProgram { objective: vec![0.0; vars], rows: Vec::new() }
    }

    pub fn vars(&self) -> usize {
        self.objective.len()
    }

    pub fn add_row(&mut self, coeffs: Vec<(usize, f64)>, rhs: f64) {
        self.rows.push((coeffs, rhs));
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub value: f64,
    pub x: Vec<f64>,
    pub pivots: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LpError {
    NegativeRhs(usize),
    Unbounded,
}

pub fn maximize(lp: &LinearProgram) -> Result<LpSolution, LpError> {
    let n = lp.vars();
    let m = lp.rows.len();
    let width = n + m + 1;
    let rhs_col = n + m;
    let mut t = vec![0.0f64; (m + 1) * width];
    let mut basis: Vec<usize> = (n..n + m).collect();

    for (i, (coeffs, rhs)) in lp.rows.iter().enumerate() {
        if *rhs < -EPS {
            return Err(LpError::NegativeRhs(i));
        }
        let row = &mut t[i * width..(i + 1) * width];
        for &(j, a) in coeffs {
            row[j] += a;
        }
        row[n + i] = 1.0;
        row[rhs_col] = rhs.max(0.0);
    }
    // Objective row holds reduced costs `-c`; optimal once all are >= 0.
    let obj = m * width;
    for (j, &c) in lp.objective.iter().enumerate() {
        t[obj + j] = -c;
    }

    let mut pivots = 0usize;
    let mut degenerate = 0usize;
    let mut bland = false;
    let mut nz: Vec<usize> = Vec::with_capacity(width);
    loop {
        let entering = if bland {
            (0..n + m).find(|&j| t[obj + j] < -EPS)
        } else {
            let mut best = None;
            let mut best_val = -EPS;
            for j in 0..n + m {
                if t[obj + j] < best_val {
                    best_val = t[obj + j];
                    best = Some(j);
                }
            }
            best
        };
        let Some(col) = entering else { break };

        let mut leave: Option<(usize, f64)> = None;
        for i in 0..m {
            let a = t[i * width + col];
            if a > EPS {
                let ratio = t[i * width + rhs_col] / a;
                leave = match leave {
                    None => Some((i, ratio)),
                    Some((r, best)) => {
                        if ratio < best - EPS || (ratio <= best + EPS && basis[i] < basis[r]) {
                            Some((i, ratio))
                        } else {
                            Some((r, best))
                        }
                    }
                };
            }
        }
        let Some((row, ratio)) = leave else { return Err(LpError::Unbounded) };

        if ratio <= EPS {
            degenerate += 1;
            if degenerate >= DEGENERATE_STREAK {
                bland = true;
            }
        } else {
            degenerate = 0;
        }

        let p = t[row * width + col];
        {
            let r = &mut t[row * width..(row + 1) * width];
            for v in r.iter_mut() {
                *v /= p;
            }
            r[col] = 1.0;
        }
        nz.clear();
        nz.extend((0..width).filter(|&j| t[row * width + j] != 0.0));
        for i in 0..=m {
            if i == row {
                continue;
            }
            let f = t[i * width + col];
            if f == 0.0 {
                continue;
            }
            for &j in &nz {
                let v = t[row * width + j];
                t[i * width + j] -= f * v;
            }
            t[i * width + col] = 0.0;
        }
        basis[row] = col;
        pivots += 1;
    }

    let mut x = vec![0.0; n];
    for (i, &b) in basis.iter().enumerate() {
        if b < n {
            x[b] = t[i * width + rhs_col];
        }
    }
    let value = lp.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
    Ok(LpSolution { value, x, pivots })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn textbook_problem() {
        // max 3x + 5y, x <= 4, 2y <= 12, 3x + 2y <= 18 -> 36 at (2, 6)
        let mut lp = LinearProgram::new(2);
        lp.objective = vec![3.0, 5.0];
        lp.add_row(vec![(0, 1.0)], 4.0);
        lp.add_row(vec![(1, 2.0)], 12.0);
        lp.add_row(vec![(0, 3.0), (1, 2.0)], 18.0);
        let s = maximize(&lp).unwrap();
        assert!((s.value - 36.0).abs() < 1e-9);
        assert!((s.x[0] - 2.0).abs() < 1e-9 && (s.x[1] - 6.0).abs() < 1e-9);
    }

    #[test]
    fn shared_cell_fractional_bound() {
        // Two unit candidates sharing a cell that fits 1.5 of them.
        let mut lp = LinearProgram::new(2);
        lp.objective = vec![1.0, 1.0];
        lp.add_row(vec![(0, 1.0)], 1.0);
        lp.add_row(vec![(1, 1.0)], 1.0);
        lp.add_row(vec![(0, 1.0), (1, 1.0)], 1.5);
        assert!((maximize(&lp).unwrap().value - 1.5).abs() < 1e-9);
    }

    #[test]
    fn unbounded_and_negative_rhs() {
        let mut lp = LinearProgram::new(2);
        lp.objective = vec![1.0, 0.0];
        lp.add_row(vec![(1, 1.0)], 1.0);
        assert_eq!(maximize(&lp), Err(LpError::Unbounded));
        let mut lp = LinearProgram::new(1);
        lp.objective = vec![1.0];
        lp.add_row(vec![(0, 1.0)], -1.0);
        assert_eq!(maximize(&lp), Err(LpError::NegativeRhs(0)));
    }

    #[test]
    fn degenerate_problem_terminates() {
        // Beale's classic cycling example under Dantzig pricing.
        let mut lp = LinearProgram::new(4);
        lp.objective = vec![0.75, -150.0, 0.02, -6.0];
        lp.add_row(vec![(0, 0.25), (1, -60.0), (2, -0.04), (3, 9.0)], 0.0);
        lp.add_row(vec![(0, 0.5), (1, -90.0), (2, -0.02), (3, 3.0)], 0.0);
        lp.add_row(vec![(2, 1.0)], 1.0);
        let s = maximize(&lp).unwrap();
        assert!((s.value - 0.05).abs() < 1e-9);
    }
}
