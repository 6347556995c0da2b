//! Phase-one simplex for small dense feasibility problems.

/// Constraint `normal · x ≤ bound`.
#[derive(Clone, Debug)]
pub(crate) struct Row {
    pub normal: Vec<f64>,
    pub bound: f64,
}

const PIVOT_TOLERANCE: f64 = 1e-12;

/// Finds `x` with `lo ≤ x ≤ hi` and every row satisfied, or `None`.
///
/// Substitutes `y = x - lo ≥ 0`, turns the upper bounds into rows, and runs
/// phase one with Bland's rule (no cycling) on the dense tableau.
pub(crate) fn find_feasible_point(rows: &[Row], lo: &[f64], hi: &[f64]) -> Option<Vec<f64>> {
    let n = lo.len();
    let mut constraints: Vec<(Vec<f64>, f64)> = rows
        .iter()
        .map(|r| {
            let shift: f64 = r.normal.iter().zip(lo).map(|(a, l)| a * l).sum();
            (r.normal.clone(), r.bound - shift)
        })
        .collect();
    for i in 0..n {
        let mut e = vec![0.0; n];
        e[i] = 1.0;
        constraints.push((e, hi[i] - lo[i]));
    }
    let m = constraints.len();
    let scale = 1.0 + constraints.iter().fold(0.0_f64, |s, (_, b)| s.max(b.abs()));

    let artificial: Vec<usize> = (0..m).filter(|&i| constraints[i].1 < 0.0).collect();
    let cols = n + m + artificial.len();
    let rhs = cols;
    let mut tab = vec![vec![0.0; cols + 1]; m];
    let mut basis = vec![0usize; m];
    let mut next_art = n + m;
    for (i, (a, b)) in constraints.iter().enumerate() {
        let sign = if *b < 0.0 { -1.0 } else { 1.0 };
        for j in 0..n {
            tab[i][j] = sign * a[j];
        }
        tab[i][n + i] = sign;
        tab[i][rhs] = sign * b;
        if sign < 0.0 {
            tab[i][next_art] = 1.0;
            basis[i] = next_art;
            next_art += 1;
        } else {
            basis[i] = n + i;
        }
    }
    if artificial.is_empty() {
        return Some(extract(&tab, &basis, n, lo));
    }

    // Reduced costs of minimizing the sum of artificials.
    let mut obj = vec![0.0; cols + 1];
    for &i in &artificial {
        for j in 0..=cols {
            if j < n + m || j == rhs {
                obj[j] -= tab[i][j];
            }
        }
    }

    let max_iterations = 50 * (m + cols);
    for _ in 0..max_iterations {
        let Some(enter) = (0..cols).find(|&j| obj[j] < -PIVOT_TOLERANCE) else {
            break;
        };
        let mut leave: Option<usize> = None;
        let mut best = f64::INFINITY;
        for i in 0..m {
            let a = tab[i][enter];
            if a > PIVOT_TOLERANCE {
                let ratio = tab[i][rhs] / a;
                let better = match leave {
                    None => true,
                    Some(l) => ratio < best - 1e-15 || (ratio <= best + 1e-15 && basis[i] < basis[l]),
                };
                if better {
                    best = ratio;
                    leave = Some(i);
                }
            }
        }
        let Some(leave) = leave else {
            // Phase one is bounded below by zero; an unbounded ray means the
            // entering column only has nonpositive entries, which cannot reduce
            // the objective. Treat as converged.
            break;
        };
        pivot(&mut tab, &mut obj, leave, enter);
        basis[leave] = enter;
    }

    let infeasibility = -obj[rhs];
    (infeasibility <= 1e-9 * scale).then(|| extract(&tab, &basis, n, lo))
}

fn pivot(tab: &mut [Vec<f64>], obj: &mut [f64], row: usize, col: usize) {
    let p = tab[row][col];
    for v in tab[row].iter_mut() {
        *v /= p;
    }
    let pivot_row = tab[row].clone();
    for (i, r) in tab.iter_mut().enumerate() {
        if i != row {
            let f = r[col];
            if f != 0.0 {
                for (v, pv) in r.iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
            }
        }
    }
    let f = obj[col];
    if f != 0.0 {
        for (v, pv) in obj.iter_mut().zip(&pivot_row) {
            *v -= f * pv;
        }
    }
}

fn extract(tab: &[Vec<f64>], basis: &[usize], n: usize, lo: &[f64]) -> Vec<f64> {
    let rhs = tab[0].len() - 1;
    let mut x = lo.to_vec();
    for (i, &b) in basis.iter().enumerate() {
        if b < n {
            x[b] += tab[i][rhs];
        }
    }
    x
}
