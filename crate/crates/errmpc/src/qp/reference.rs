//! Exhaustive reference solver for small box-constrained problems.
//!
//! Intended purely as a test oracle: it enumerates every active-set pattern
//! over the box `lo <= y <= hi`, so it is exponential in the dimension and
//! only usable for roughly a dozen variables.

use nalgebra::{DMatrix, DVector};

/// Solves `min 1/2 y'Hy + f'y` over `lo <= y <= hi` by enumerating, for every
/// variable, the three cases free / pinned-at-lower / pinned-at-upper, and
/// keeping the best candidate that satisfies the box and the sign conditions
/// on the gradient at pinned variables.
///
/// Returns the minimiser and its objective, or `None` when no enumeration
/// pattern yields a valid candidate (which for a positive-definite `h` and a
/// non-empty box indicates a numerical failure rather than infeasibility).
pub fn brute_force_box_solve(
    h: &DMatrix<f64>,
    f: &DVector<f64>,
    lo: &DVector<f64>,
    hi: &DVector<f64>,
) -> Option<(DVector<f64>, f64)> {
    let d = h.nrows();
    assert_eq!(h.ncols(), d);
    assert_eq!(f.len(), d);
    assert_eq!(lo.len(), d);
    assert_eq!(hi.len(), d);

    const TOL: f64 = 1e-7;
    let mut best: Option<(DVector<f64>, f64)> = None;

    // Ternary counter over patterns: 0 = free, 1 = at lower, 2 = at upper.
    let total = 3usize.pow(d as u32);
    let mut pattern = vec![0u8; d];
    for code in 0..total {
        let mut c = code;
        for slot in pattern.iter_mut() {
            *slot = (c % 3) as u8;
            c /= 3;
        }

        // Patterns pinning a variable at an infinite bound are meaningless.
        if pattern
            .iter()
            .enumerate()
            .any(|(i, &p)| (p == 1 && lo[i].is_infinite()) || (p == 2 && hi[i].is_infinite()))
        {
            continue;
        }

        let free: Vec<usize> = (0..d).filter(|&i| pattern[i] == 0).collect();
        let mut y = DVector::zeros(d);
        for i in 0..d {
            match pattern[i] {
                1 => y[i] = lo[i],
                2 => y[i] = hi[i],
                _ => {}
            }
        }

        if !free.is_empty() {
            // Solve the unconstrained problem in the free coordinates with
            // the pinned ones substituted in.
            let mut h_ff = DMatrix::zeros(free.len(), free.len());
            let mut rhs = DVector::zeros(free.len());
            for (a, &i) in free.iter().enumerate() {
                rhs[a] = -f[i];
                for (b, &j) in free.iter().enumerate() {
                    h_ff[(a, b)] = h[(i, j)];
                }
                for j in 0..d {
                    if pattern[j] != 0 {
                        rhs[a] -= h[(i, j)] * y[j];
                    }
                }
            }
            let sol = h_ff.lu().solve(&rhs)?;
            for (a, &i) in free.iter().enumerate() {
                y[i] = sol[a];
            }
        }

        // Candidate must sit inside the box ...
        let mut ok = true;
        for i in 0..d {
            let span = 1.0 + y[i].abs();
            if y[i] < lo[i] - TOL * span || y[i] > hi[i] + TOL * span {
                ok = false;
                break;
            }
        }
        if !ok {
            continue;
        }

        // ... and the gradient must push into the bound at pinned variables.
        let grad = h * &y + f;
        for i in 0..d {
            let slack = TOL * (1.0 + grad[i].abs());
            match pattern[i] {
                1 if grad[i] < -slack => ok = false,
                2 if grad[i] > slack => ok = false,
                _ => {}
            }
            if !ok {
                break;
            }
        }
        if !ok {
            continue;
        }

        let obj = 0.5 * (h * &y).dot(&y) + f.dot(&y);
        if best.as_ref().map_or(true, |(_, b)| obj < *b) {
            best = Some((y, obj));
        }
    }
    best
}
