//! Primal active-set iteration with null-space equality elimination.
//!
//! Pipeline: eliminate equalities through an SVD null-space substitution,
//! rewrite two-sided inequalities as normalised one-sided rows, reach a
//! feasible point (directly, or through an elastic phase-1 solve), then run
//! the textbook working-set iteration with Schur-complement subproblem
//! solves. Everything is dense and deterministic; ties break on the lowest
//! row index.

use super::{QpProblem, QpSolution, QpStatus, FEAS_TOL, MAX_ITERATIONS, OPT_TOL};
use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

/// One-sided constraint `cᵀw <= u` in the reduced space. `scale` is the
/// normalisation factor applied to the original row, needed to map duals
/// back out.
struct Row {
    c: DVector<f64>,
    u: f64,
    scale: f64,
    source: RowSource,
}

#[derive(Clone, Copy)]
enum RowSource {
    /// Upper side of original inequality row i.
    Upper(usize),
    /// Lower side of original inequality row i (sign-flipped).
    Lower(usize),
    /// Phase-1 auxiliary rows.
    Auxiliary,
}

pub(super) fn solve_impl(problem: &QpProblem, warm_start: Option<&DVector<f64>>) -> QpSolution {
    let d = problem.dim();
    let zero_solution = |y: DVector<f64>, status: QpStatus, iterations: usize| {
        let kkt_residual = problem.violation(&y);
        QpSolution {
            y,
            status,
            kkt_residual,
            iterations,
            ineq_duals: DVector::zeros(problem.a_ineq.nrows()),
            eq_duals: DVector::zeros(problem.a_eq.nrows()),
        }
    };

    // Contradictory bounds make the problem infeasible before any algebra.
    for i in 0..problem.a_ineq.nrows() {
        if problem.lo[i] > problem.hi[i] + FEAS_TOL {
            let y = warm_start.cloned().unwrap_or_else(|| DVector::zeros(d));
            return zero_solution(y, QpStatus::Infeasible, 0);
        }
    }

    // Equality elimination: y = y_part + Z w with Z an orthonormal basis of
    // the null space of a_eq.
    let n_eq = problem.a_eq.nrows();
    let (y_part, null_basis) = if n_eq > 0 {
        let svd = problem.a_eq.clone().svd(true, true);
        let max_sv = svd.singular_values.iter().cloned().fold(0.0_f64, f64::max);
        let tol = (max_sv * 1e-12).max(1e-300);
        let y_part = match svd.solve(&problem.b_eq, tol) {
            Ok(sol) => sol,
            Err(_) => return zero_solution(DVector::zeros(d), QpStatus::Infeasible, 0),
        };
        let residual = (&problem.a_eq * &y_part - &problem.b_eq).amax();
        if residual > FEAS_TOL * (1.0 + problem.b_eq.amax()) {
            return zero_solution(y_part, QpStatus::Infeasible, 0);
        }
        let rank = svd.rank(tol);
        // The thin SVD only returns row-space directions; build the null
        // space as the orthonormal complement of those directions, sweeping
        // the identity with twice-applied Gram-Schmidt.
        let v_t = svd.v_t.as_ref().expect("svd computed with v_t");
        let mut dirs: Vec<DVector<f64>> = (0..rank).map(|r| v_t.row(r).transpose()).collect();
        let mut basis = DMatrix::zeros(d, d - rank);
        let mut col = 0;
        for i in 0..d {
            if col == d - rank {
                break;
            }
            let mut v = DVector::zeros(d);
            v[i] = 1.0;
            for _ in 0..2 {
                for q in &dirs {
                    let proj = q.dot(&v);
                    v -= q * proj;
                }
            }
            let norm = v.norm();
            if norm > 1e-8 {
                v /= norm;
                basis.column_mut(col).copy_from(&v);
                dirs.push(v);
                col += 1;
            }
        }
        assert_eq!(col, d - rank, "null-space sweep must complete");
        (y_part, basis)
    } else {
        (DVector::zeros(d), DMatrix::identity(d, d))
    };
    let d_free = null_basis.ncols();

    // Reduced objective.
    let h_red = null_basis.transpose() * &problem.h * &null_basis;
    let f_red = null_basis.transpose() * (&problem.h * &y_part + &problem.f);

    // Reduced, normalised one-sided rows. Rows that the equalities make
    // constant either always hold (drop them) or never hold (infeasible).
    let mut rows: Vec<Row> = Vec::new();
    for i in 0..problem.a_ineq.nrows() {
        let c_full = problem.a_ineq.row(i).transpose();
        let c_red = null_basis.transpose() * &c_full;
        let shift = c_full.dot(&y_part);
        let norm = c_red.norm();
        if norm <= 1e-13 * (1.0 + c_full.norm()) {
            if shift > problem.hi[i] + FEAS_TOL || shift < problem.lo[i] - FEAS_TOL {
                return zero_solution(y_part, QpStatus::Infeasible, 0);
            }
            continue;
        }
        if problem.hi[i].is_finite() {
            rows.push(Row {
                c: &c_red / norm,
                u: (problem.hi[i] - shift) / norm,
                scale: norm,
                source: RowSource::Upper(i),
            });
        }
        if problem.lo[i].is_finite() {
            rows.push(Row {
                c: -&c_red / norm,
                u: (shift - problem.lo[i]) / norm,
                scale: norm,
                source: RowSource::Lower(i),
            });
        }
    }

    if d_free == 0 {
        // Equalities pin the point entirely.
        let mut sol = finish(problem, &y_part, &[], &[], &[], 0);
        if problem.violation(&y_part) > FEAS_TOL {
            sol.status = QpStatus::Infeasible;
        }
        return sol;
    }

    // Starting point: projected warm start or the particular solution.
    let w_start = match warm_start {
        Some(y_w) => null_basis.transpose() * (y_w - &y_part),
        None => DVector::zeros(d_free),
    };

    let start_violation = rows
        .iter()
        .map(|r| r.c.dot(&w_start) - r.u)
        .fold(0.0_f64, f64::max);

    let mut total_iterations = 0;
    let mut relaxed: Vec<f64> = Vec::new();
    let w_feasible = if start_violation <= FEAS_TOL {
        w_start
    } else {
        // Elastic phase 1: minimise M t + 1/2 |w - w0|^2 + 1/2 t^2 subject to
        // cᵀw - t <= u and t >= 0, started strictly feasible by construction.
        // Whenever the true region is nonempty and the multipliers of the
        // projection of w0 onto it sum below M, the optimum pins t = 0 and
        // returns exactly that projection; a residual t above the feasibility
        // tolerance therefore certifies infeasibility. M is kept moderate on
        // purpose: a much larger weight amplifies rounding in the
        // Schur-complement steps past the step-size tolerances.
        const M_WEIGHT: f64 = 1e4;
        let aug = d_free + 1;
        let h1 = DMatrix::identity(aug, aug);
        let mut f1 = DVector::zeros(aug);
        for i in 0..d_free {
            f1[i] = -w_start[i];
        }
        f1[d_free] = M_WEIGHT;
        let mut rows1: Vec<Row> = rows
            .iter()
            .map(|r| {
                let mut c = DVector::zeros(aug);
                c.rows_mut(0, d_free).copy_from(&r.c);
                c[d_free] = -1.0;
                Row { c, u: r.u, scale: 1.0, source: RowSource::Auxiliary }
            })
            .collect();
        let mut t_row = DVector::zeros(aug);
        t_row[d_free] = -1.0;
        rows1.push(Row { c: t_row, u: 0.0, scale: 1.0, source: RowSource::Auxiliary });

        let mut w1 = DVector::zeros(aug);
        w1.rows_mut(0, d_free).copy_from(&w_start);
        w1[d_free] = start_violation * (1.0 + 1e-9) + 1e-9;

        let phase1 = iterate(&h1, &f1, &rows1, w1, Vec::new(), MAX_ITERATIONS);
        total_iterations += phase1.iterations;
        let t_star = phase1.w[d_free];
        let w_found = phase1.w.rows(0, d_free).into_owned();
        if t_star > FEAS_TOL || phase1.hit_cap {
            let y = &y_part + &null_basis * &w_found;
            let status = if phase1.hit_cap { QpStatus::MaxIterations } else { QpStatus::Infeasible };
            return zero_solution(y, status, total_iterations);
        }
        // Violations up to t_star remain; absorb them so phase 2 starts
        // feasible with respect to the rows it sees. The final KKT report
        // measures violation against the original bounds.
        relaxed = rows
            .iter()
            .map(|r| (r.c.dot(&w_found) - r.u).max(0.0))
            .collect();
        w_found
    };
    for (row, extra) in rows.iter_mut().zip(relaxed.iter()) {
        row.u += extra;
    }

    // Seed the working set from constraints active at the starting point.
    let seed = seed_active_set(&h_red, &rows, &w_feasible, d_free);

    let phase2 = iterate(
        &h_red,
        &f_red,
        &rows,
        w_feasible,
        seed,
        MAX_ITERATIONS.saturating_sub(total_iterations).max(1),
    );
    total_iterations += phase2.iterations;

    let y = &y_part + &null_basis * &phase2.w;
    let mut solution = finish(
        problem,
        &y,
        &rows,
        &phase2.active,
        &phase2.duals,
        total_iterations,
    );
    if phase2.hit_cap && solution.kkt_residual > OPT_TOL.max(FEAS_TOL) {
        solution.status = QpStatus::MaxIterations;
    }
    solution
}

/// Factors `h + ridge I`, escalating the ridge until the factorisation
/// succeeds. The first escalation step is the pinned PSD regularisation
/// (1e-9 trace/dim); later steps only trigger on pathological inputs.
fn robust_cholesky(h: &DMatrix<f64>) -> (Cholesky<f64, Dyn>, f64) {
    let d = h.nrows();
    if let Some(c) = Cholesky::new(h.clone()) {
        return (c, 0.0);
    }
    let base = (1e-9 * h.trace().abs() / d as f64).max(1e-12);
    for boost in [1.0, 1e3, 1e6] {
        let ridge = base * boost;
        let mut hr = h.clone();
        for i in 0..d {
            hr[(i, i)] += ridge;
        }
        if let Some(c) = Cholesky::new(hr) {
            return (c, ridge);
        }
    }
    let ridge = h.norm() + 1.0;
    let mut hr = h.clone();
    for i in 0..d {
        hr[(i, i)] += ridge;
    }
    (Cholesky::new(hr).expect("diagonally dominated matrix factors"), ridge)
}

struct IterateResult {
    w: DVector<f64>,
    active: Vec<usize>,
    /// Multipliers for the active rows, aligned with `active`.
    duals: Vec<f64>,
    iterations: usize,
    hit_cap: bool,
}

/// Working-set iteration from a feasible starting point.
fn iterate(
    h: &DMatrix<f64>,
    f: &DVector<f64>,
    rows: &[Row],
    mut w: DVector<f64>,
    seed: Vec<usize>,
    cap: usize,
) -> IterateResult {
    let (chol, ridge) = robust_cholesky(h);
    let mut active: Vec<usize> = seed;
    let mut duals: Vec<f64> = vec![0.0; active.len()];
    let mut iterations = 0;
    let mut hit_cap = true;

    while iterations < cap {
        iterations += 1;
        let mut grad = h * &w + f;
        if ridge > 0.0 {
            grad += ridge * &w;
        }

        // Equality-constrained subproblem on the working set.
        let (p, lambda) = if active.is_empty() {
            (-chol.solve(&grad), Vec::new())
        } else {
            let na = active.len();
            let mut c_mat = DMatrix::zeros(na, w.len());
            for (k, &j) in active.iter().enumerate() {
                c_mat.row_mut(k).copy_from(&rows[j].c.transpose());
            }
            let hinv_ct = chol.solve(&c_mat.transpose());
            let schur = &c_mat * &hinv_ct;
            let hinv_g = chol.solve(&grad);
            let rhs = -(&c_mat * &hinv_g);
            let lambda_vec = match Cholesky::new(schur.clone()) {
                Some(sc) => sc.solve(&rhs),
                None => {
                    // Dependent working set: consistent least-squares duals.
                    let svd = schur.svd(true, true);
                    let max_sv = svd.singular_values.iter().cloned().fold(0.0_f64, f64::max);
                    svd.solve(&rhs, (max_sv * 1e-12).max(1e-300))
                        .unwrap_or_else(|_| DVector::zeros(na))
                }
            };
            let p = -(&hinv_g + &hinv_ct * &lambda_vec);
            (p, lambda_vec.iter().cloned().collect())
        };

        let p_small = p.amax() <= 1e-11 * (1.0 + w.amax());
        if p_small {
            if active.is_empty() {
                duals = Vec::new();
                hit_cap = false;
                break;
            }
            // Most negative multiplier leaves; lowest index wins ties.
            let mut worst: Option<(usize, f64)> = None;
            for (k, &l) in lambda.iter().enumerate() {
                if l < -1e-10 && worst.map_or(true, |(_, lv)| l < lv) {
                    worst = Some((k, l));
                }
            }
            match worst {
                None => {
                    duals = lambda;
                    hit_cap = false;
                    break;
                }
                Some((k, _)) => {
                    active.remove(k);
                }
            }
            continue;
        }

        // Ratio test against rows outside the working set.
        let mut alpha = 1.0_f64;
        let mut blocker: Option<usize> = None;
        for (j, row) in rows.iter().enumerate() {
            if active.contains(&j) {
                continue;
            }
            let cp = row.c.dot(&p);
            if cp > 1e-12 {
                let slack = (row.u - row.c.dot(&w)).max(0.0);
                let a = slack / cp;
                if a < alpha {
                    alpha = a;
                    blocker = Some(j);
                }
            }
        }
        w += &p * alpha;
        if let Some(j) = blocker {
            active.push(j);
        }
        duals = lambda;
    }

    IterateResult { w, active, duals, iterations, hit_cap }
}

/// Rows exactly at their bound at the starting point, added in index order
/// while the working set stays independent (the Schur complement factors).
fn seed_active_set(
    h: &DMatrix<f64>,
    rows: &[Row],
    w: &DVector<f64>,
    d_free: usize,
) -> Vec<usize> {
    let (chol, _) = robust_cholesky(h);
    let mut active: Vec<usize> = Vec::new();
    for (j, row) in rows.iter().enumerate() {
        if active.len() >= d_free {
            break;
        }
        let slack = row.u - row.c.dot(w);
        if slack.abs() <= 1e-8 * (1.0 + row.u.abs()) {
            let mut candidate = active.clone();
            candidate.push(j);
            let na = candidate.len();
            let mut c_mat = DMatrix::zeros(na, d_free);
            for (k, &jj) in candidate.iter().enumerate() {
                c_mat.row_mut(k).copy_from(&rows[jj].c.transpose());
            }
            let schur = &c_mat * chol.solve(&c_mat.transpose());
            if Cholesky::new(schur).is_some() {
                active = candidate;
            }
        }
    }
    active
}

/// Maps the reduced-space result back to the original problem, recovers
/// duals and evaluates every KKT quantity.
fn finish(
    problem: &QpProblem,
    y: &DVector<f64>,
    rows: &[Row],
    active: &[usize],
    duals: &[f64],
    iterations: usize,
) -> QpSolution {
    let n_ineq = problem.a_ineq.nrows();
    let mut ineq_duals = DVector::zeros(n_ineq);
    let mut dual_negativity = 0.0_f64;
    for (&j, &l) in active.iter().zip(duals.iter()) {
        dual_negativity = dual_negativity.max(-l);
        let l = l.max(0.0);
        match rows[j].source {
            RowSource::Upper(i) => ineq_duals[i] += l / rows[j].scale,
            RowSource::Lower(i) => ineq_duals[i] -= l / rows[j].scale,
            RowSource::Auxiliary => {}
        }
    }

    // Stationarity: H y + f + A_ineqᵀ mu + A_eqᵀ nu = 0; nu by least squares.
    let mut residual = &problem.h * y + &problem.f;
    if n_ineq > 0 {
        residual += problem.a_ineq.transpose() * &ineq_duals;
    }
    let eq_duals = if problem.a_eq.nrows() > 0 {
        let at = problem.a_eq.transpose();
        let svd = at.clone().svd(true, true);
        let max_sv = svd.singular_values.iter().cloned().fold(0.0_f64, f64::max);
        let nu = svd
            .solve(&(-&residual), (max_sv * 1e-12).max(1e-300))
            .unwrap_or_else(|_| DVector::zeros(problem.a_eq.nrows()));
        residual += &at * &nu;
        nu
    } else {
        DVector::zeros(0)
    };
    let stationarity = residual.amax();

    // Complementary slackness on the original two-sided rows.
    let mut complementarity = 0.0_f64;
    if n_ineq > 0 {
        let g = &problem.a_ineq * y;
        for i in 0..n_ineq {
            let mu = ineq_duals[i];
            if mu > 0.0 {
                complementarity = complementarity.max(mu * (problem.hi[i] - g[i]).abs());
            } else if mu < 0.0 {
                complementarity = complementarity.max(-mu * (g[i] - problem.lo[i]).abs());
            }
        }
    }

    let violation = problem.violation(y);
    let kkt_residual = violation
        .max(stationarity)
        .max(complementarity)
        .max(dual_negativity);
    let status = if kkt_residual <= FEAS_TOL.max(OPT_TOL) {
        QpStatus::Solved
    } else {
        QpStatus::MaxIterations
    };
    QpSolution {
        y: y.clone(),
        status,
        kkt_residual,
        iterations,
        ineq_duals,
        eq_duals,
    }
}
