//! Infeasible primal-dual path following with Nesterov–Todd scaling and
//! Mehrotra's predictor-corrector.
//!
//! Internally every program is a minimization
//! `min ⟨C, X⟩ s.t. A(X) = b, X ⪰ 0` with dual `max b·y s.t. C - A*(y) = S ⪰ 0`.
//! Maximization is handled by negating `C` on the way in and `y` on the way
//! out.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::presolve::{presolve, PresolveOutcome, Reduction};
use crate::{BlockKind, BlockSpec, ConicProgram, SdpError, Sense};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Relative duality gap `|p - d| / (1 + |p| + |d|)`.
    pub gap_tol: f64,
    /// Relative primal and dual residual norms.
    pub feas_tol: f64,
    pub max_iterations: usize,
    /// Fraction of the distance to the cone boundary taken per step.
    pub step_fraction: f64,
    pub presolve: bool,
    pub verbose: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            gap_tol: 1e-9,
            feas_tol: 1e-9,
            max_iterations: 120,
            step_fraction: 0.98,
            presolve: true,
            verbose: false,
        }
    }
}

impl SolverOptions {
    /// Default options with both gap and feasibility tolerance set to `tol`.
    pub fn with_tol(tol: f64) -> Self {
        SolverOptions { gap_tol: tol, feas_tol: tol, ..Default::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SdpStatus {
    Optimal,
    Infeasible,
    /// Progress stalled before the tolerances were met; the best iterate is
    /// returned together with its gap and residuals.
    NumericalLimit,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SdpSolution {
    pub status: SdpStatus,
    /// `⟨C, X⟩` in the program's own sense.
    pub primal_value: f64,
    /// `b·y` in the program's own sense.
    pub dual_value: f64,
    /// Relative duality gap.
    pub gap: f64,
    pub primal_infeasibility: f64,
    pub dual_infeasibility: f64,
    pub iterations: usize,
    /// Primal blocks; diagonal blocks are returned as diagonal matrices.
    pub x: Vec<DMatrix<f64>>,
    /// Dual multipliers, one per constraint.
    pub y: Vec<f64>,
    /// Dual slack recomputed from `y` (see [`ConicProgram::dual_slack`]).
    pub s: Vec<DMatrix<f64>>,
}

impl SdpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == SdpStatus::Optimal
    }

    /// Smallest eigenvalue over all primal blocks.
    pub fn min_primal_eigenvalue(&self) -> f64 {
        min_eigenvalue(&self.x)
    }

    /// Smallest eigenvalue over all dual slack blocks.
    pub fn min_dual_slack_eigenvalue(&self) -> f64 {
        min_eigenvalue(&self.s)
    }
}

fn min_eigenvalue(blocks: &[DMatrix<f64>]) -> f64 {
    blocks
        .iter()
        .filter(|b| b.nrows() > 0)
        .map(|b| {
            let sym = (b + b.transpose()) * 0.5;
            sym.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
        })
        .fold(f64::INFINITY, f64::min)
}

/// Solves `p`. Errors only for malformed input; numerical trouble is reported
/// through [`SdpStatus`].
pub fn solve(p: &ConicProgram, opts: &SolverOptions) -> Result<SdpSolution, SdpError> {
    p.validate()?;
    if !opts.presolve {
        let raw = Problem::new(p).run(opts);
        return Ok(finish(p, raw, None));
    }
    match presolve(p) {
        PresolveOutcome::Inconsistent { constraint, residual } => {
            if opts.verbose {
                eprintln!("presolve: constraint {constraint} contradicts the others (residual {residual:.3e})");
            }
            Ok(SdpSolution {
                status: SdpStatus::Infeasible,
                primal_value: f64::NAN,
                dual_value: f64::NAN,
                gap: f64::NAN,
                primal_infeasibility: residual.abs(),
                dual_infeasibility: f64::NAN,
                iterations: 0,
                x: p.blocks.iter().map(|b| DMatrix::zeros(b.size, b.size)).collect(),
                y: vec![0.0; p.num_constraints()],
                s: p.dual_slack(&vec![0.0; p.num_constraints()]),
            })
        }
        PresolveOutcome::Reduced(reduction) => {
            if opts.verbose {
                let before: Vec<usize> = p.blocks.iter().map(|b| b.size).collect();
                let after: Vec<usize> = reduction.program.blocks.iter().map(|b| b.size).collect();
                eprintln!(
                    "presolve: blocks {before:?} -> {after:?}, constraints {} -> {}",
                    p.num_constraints(),
                    reduction.program.num_constraints()
                );
            }
            let raw = Problem::new(&reduction.program).run(opts);
            Ok(finish(p, raw, Some(&reduction)))
        }
    }
}

/// Raw result in the internal (minimization) convention.
struct RawResult {
    status: SdpStatus,
    x: Vec<Blk>,
    y: DVector<f64>,
    gap: f64,
    dinf: f64,
    iterations: usize,
}

fn finish(p: &ConicProgram, raw: RawResult, reduction: Option<&Reduction>) -> SdpSolution {
    let sign = match p.sense {
        Sense::Minimize => 1.0,
        Sense::Maximize => -1.0,
    };
    let mut x: Vec<DMatrix<f64>> = Vec::with_capacity(p.blocks.len());
    let mut y = vec![0.0; p.num_constraints()];
    match reduction {
        None => {
            x.extend(raw.x.iter().map(Blk::to_dense));
            for (k, v) in raw.y.iter().enumerate() {
                y[k] = sign * v;
            }
        }
        Some(r) => {
            for (blk, spec) in p.blocks.iter().enumerate() {
                let Some(rb) = r.block_map[blk] else {
                    x.push(DMatrix::zeros(spec.size, spec.size));
                    continue;
                };
                let reduced = raw.x[rb].to_dense();
                match &r.kept_indices[blk] {
                    None => x.push(reduced),
                    Some(keep) => {
                        let mut full = DMatrix::zeros(spec.size, spec.size);
                        for (a, &ia) in keep.iter().enumerate() {
                            for (b, &ib) in keep.iter().enumerate() {
                                full[(ia, ib)] = reduced[(a, b)];
                            }
                        }
                        x.push(full);
                    }
                }
            }
            for (k, &orig) in r.kept_constraints.iter().enumerate() {
                y[orig] = sign * raw.y[k];
            }
        }
    }
    let b = p.rhs();
    let values = p.constraint_values(&x);
    let rp: f64 = b.iter().zip(&values).map(|(bi, v)| (bi - v).powi(2)).sum::<f64>().sqrt();
    let b_norm: f64 = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    SdpSolution {
        status: raw.status,
        primal_value: p.objective_value(&x),
        dual_value: b.iter().zip(&y).map(|(bi, yi)| bi * yi).sum(),
        gap: raw.gap,
        primal_infeasibility: rp / (1.0 + b_norm),
        dual_infeasibility: raw.dinf,
        iterations: raw.iterations,
        s: p.dual_slack(&y),
        x,
        y,
    }
}

/// Block value: dense symmetric matrix or the diagonal of an LP block.
#[derive(Clone, Debug)]
enum Blk {
    Dense(DMatrix<f64>),
    Diag(DVector<f64>),
}

impl Blk {
    fn zeros(spec: &BlockSpec) -> Blk {
        match spec.kind {
            BlockKind::Psd => Blk::Dense(DMatrix::zeros(spec.size, spec.size)),
            BlockKind::Diagonal => Blk::Diag(DVector::zeros(spec.size)),
        }
    }

    fn scaled_identity(spec: &BlockSpec, v: f64) -> Blk {
        match spec.kind {
            BlockKind::Psd => Blk::Dense(DMatrix::identity(spec.size, spec.size) * v),
            BlockKind::Diagonal => Blk::Diag(DVector::from_element(spec.size, v)),
        }
    }

    fn to_dense(&self) -> DMatrix<f64> {
        match self {
            Blk::Dense(m) => m.clone(),
            Blk::Diag(v) => DMatrix::from_diagonal(v),
        }
    }

    fn dot(&self, other: &Blk) -> f64 {
        match (self, other) {
            (Blk::Dense(a), Blk::Dense(b)) => a.dot(b),
            (Blk::Diag(a), Blk::Diag(b)) => a.dot(b),
            _ => unreachable!("block kinds always match"),
        }
    }

    fn norm_sq(&self) -> f64 {
        self.dot(self)
    }

    /// `self += a * other`
    fn axpy(&mut self, a: f64, other: &Blk) {
        match (self, other) {
            (Blk::Dense(s), Blk::Dense(o)) => s.zip_apply(o, |v, w| *v += a * w),
            (Blk::Diag(s), Blk::Diag(o)) => s.zip_apply(o, |v, w| *v += a * w),
            _ => unreachable!("block kinds always match"),
        }
    }

    fn sub(&self, other: &Blk) -> Blk {
        let mut out = self.clone();
        out.axpy(-1.0, other);
        out
    }

    /// `⟨A, self⟩` for `A` given by upper-triangular entries.
    fn symmetrize(mut self) -> Blk {
        if let Blk::Dense(m) = &mut self {
            let n = m.nrows();
            for j in 0..n {
                for i in 0..j {
                    let v = 0.5 * (m[(i, j)] + m[(j, i)]);
                    m[(i, j)] = v;
                    m[(j, i)] = v;
                }
            }
        }
        self
    }

    fn dot_entries(&self, entries: &[(usize, usize, f64)]) -> f64 {
        match self {
            Blk::Dense(m) => dense_dot_entries(m, entries),
            Blk::Diag(v) => entries.iter().map(|&(i, _, a)| a * v[i]).sum(),
        }
    }

    /// `self += a * A`
    fn add_entries(&mut self, a: f64, entries: &[(usize, usize, f64)]) {
        match self {
            Blk::Dense(m) => {
                for &(i, j, v) in entries {
                    m[(i, j)] += a * v;
                    if i != j {
                        m[(j, i)] += a * v;
                    }
                }
            }
            Blk::Diag(d) => {
                for &(i, _, v) in entries {
                    d[i] += a * v;
                }
            }
        }
    }
}

fn dense_dot_entries(m: &DMatrix<f64>, entries: &[(usize, usize, f64)]) -> f64 {
    entries
        .iter()
        .map(|&(i, j, v)| if i == j { v * m[(i, i)] } else { v * (m[(i, j)] + m[(j, i)]) })
        .sum()
}

/// Nesterov–Todd scaling of one block. For PSD blocks `G` satisfies
/// `Gᵀ S G = G⁻¹ X G⁻ᵀ = D` (diagonal) and `W = G Gᵀ` maps `S` to `X`.
enum Scaling {
    Dense { lx: DMatrix<f64>, ls: DMatrix<f64>, g: DMatrix<f64>, ginv: DMatrix<f64>, w: DMatrix<f64>, d: DVector<f64> },
    Diag { x_over_s: DVector<f64> },
}

impl Scaling {
    fn new(x: &Blk, s: &Blk) -> Option<Scaling> {
        match (x, s) {
            (Blk::Dense(x), Blk::Dense(s)) => {
                let lx = Cholesky::new(x.clone())?.unpack();
                let ls = Cholesky::new(s.clone())?.unpack();
                let svd = (ls.transpose() * &lx).svd(true, true);
                let d = svd.singular_values.clone();
                if d.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
                    return None;
                }
                let v = svd.v_t?.transpose();
                let n = d.len();
                let mut g = &lx * &v;
                for k in 0..n {
                    let f = d[k].sqrt().recip();
                    g.column_mut(k).scale_mut(f);
                }
                let lx_inv = lx.solve_lower_triangular(&DMatrix::identity(n, n))?;
                let mut ginv = v.transpose() * lx_inv;
                for k in 0..n {
                    let f = d[k].sqrt();
                    ginv.row_mut(k).scale_mut(f);
                }
                let w = &g * g.transpose();
                Some(Scaling::Dense { lx, ls, g, ginv, w, d })
            }
            (Blk::Diag(x), Blk::Diag(s)) => {
                if x.iter().chain(s.iter()).any(|v| !(*v > 0.0)) {
                    return None;
                }
                Some(Scaling::Diag { x_over_s: x.component_div(s) })
            }
            _ => unreachable!("block kinds always match"),
        }
    }

    /// `W M W`
    fn wmw(&self, m: &Blk) -> Blk {
        match (self, m) {
            (Scaling::Dense { w, .. }, Blk::Dense(m)) => Blk::Dense(w * m * w),
            (Scaling::Diag { x_over_s }, Blk::Diag(m)) => Blk::Diag(x_over_s.component_mul(m)),
            _ => unreachable!("block kinds always match"),
        }
    }
}

struct Touch {
    con: usize,
    entries: Vec<(usize, usize, f64)>,
}

struct Problem {
    specs: Vec<BlockSpec>,
    c: Vec<Blk>,
    b: DVector<f64>,
    /// Constraints with a nonzero term on each block, in increasing order.
    touch: Vec<Vec<Touch>>,
    /// For diagonal blocks: `(constraint, coefficient)` at every diagonal index.
    diag_lists: Vec<Vec<Vec<(usize, f64)>>>,
    m: usize,
    nu: f64,
}

impl Problem {
    fn new(p: &ConicProgram) -> Problem {
        let c_sign = match p.sense {
            Sense::Minimize => 1.0,
            Sense::Maximize => -1.0,
        };
        let specs = p.blocks.clone();
        let c = specs
            .iter()
            .zip(&p.objective)
            .map(|(spec, cm)| {
                let mut blk = Blk::zeros(spec);
                blk.add_entries(c_sign, cm.entries());
                blk
            })
            .collect();
        let mut touch: Vec<Vec<Touch>> = specs.iter().map(|_| Vec::new()).collect();
        for (i, con) in p.constraints.iter().enumerate() {
            for (blk, a) in &con.terms {
                touch[*blk].push(Touch { con: i, entries: a.entries().to_vec() });
            }
        }
        let diag_lists = specs
            .iter()
            .enumerate()
            .map(|(blk, spec)| {
                if spec.kind != BlockKind::Diagonal {
                    return Vec::new();
                }
                let mut lists = vec![Vec::new(); spec.size];
                for t in &touch[blk] {
                    for &(i, _, v) in &t.entries {
                        lists[i].push((t.con, v));
                    }
                }
                lists
            })
            .collect();
        let nu = specs.iter().map(|s| s.size as f64).sum::<f64>().max(1.0);
        Problem {
            b: DVector::from_vec(p.rhs()),
            m: p.num_constraints(),
            specs,
            c,
            touch,
            diag_lists,
            nu,
        }
    }

    fn apply_a(&self, x: &[Blk]) -> DVector<f64> {
        let mut out = DVector::zeros(self.m);
        for (blk, list) in self.touch.iter().enumerate() {
            for t in list {
                out[t.con] += x[blk].dot_entries(&t.entries);
            }
        }
        out
    }

    fn apply_at(&self, y: &DVector<f64>) -> Vec<Blk> {
        let mut out: Vec<Blk> = self.specs.iter().map(Blk::zeros).collect();
        for (blk, list) in self.touch.iter().enumerate() {
            for t in list {
                if y[t.con] != 0.0 {
                    out[blk].add_entries(y[t.con], &t.entries);
                }
            }
        }
        out
    }

    fn initial_point(&self) -> (Vec<Blk>, DVector<f64>, Vec<Blk>) {
        let mut x = Vec::with_capacity(self.specs.len());
        let mut s = Vec::with_capacity(self.specs.len());
        for (blk, spec) in self.specs.iter().enumerate() {
            let n = spec.size as f64;
            let mut xi: f64 = 10.0_f64.max(n.sqrt());
            let mut eta: f64 = 10.0_f64.max(n.sqrt()).max(self.c[blk].norm_sq().sqrt());
            for t in &self.touch[blk] {
                let norm_a = entries_norm(&t.entries);
                xi = xi.max(n * (1.0 + self.b[t.con].abs()) / (1.0 + norm_a));
                eta = eta.max(norm_a);
            }
            x.push(Blk::scaled_identity(spec, xi));
            s.push(Blk::scaled_identity(spec, eta));
        }
        (x, DVector::zeros(self.m), s)
    }

    fn schur(&self, scalings: &[Scaling]) -> DMatrix<f64> {
        let m = self.m;
        let mut h = DMatrix::<f64>::zeros(m, m);
        for (blk, list) in self.touch.iter().enumerate() {
            match &scalings[blk] {
                Scaling::Dense { w, .. } => schur_dense_block(&mut h, list, w),
                Scaling::Diag { x_over_s } => {
                    for (k, entries) in self.diag_lists[blk].iter().enumerate() {
                        let wk = x_over_s[k];
                        for (a, &(ci, u)) in entries.iter().enumerate() {
                            for &(cj, v) in &entries[a..] {
                                let (i, j) = if ci <= cj { (ci, cj) } else { (cj, ci) };
                                h[(i, j)] += u * v * wk;
                            }
                        }
                    }
                }
            }
        }
        for j in 0..m {
            for i in 0..j {
                h[(j, i)] = h[(i, j)];
            }
        }
        h
    }

    /// Solves the Newton system for a given complementarity right-hand side.
    fn direction(
        &self,
        scalings: &[Scaling],
        factor: &Cholesky<f64, Dyn>,
        rp: &DVector<f64>,
        rd: &[Blk],
        rc: &[Blk],
    ) -> (Vec<Blk>, DVector<f64>, Vec<Blk>) {
        let t: Vec<Blk> = rc.iter().zip(rd).zip(scalings).map(|((c, d), sc)| c.sub(&sc.wmw(d))).collect();
        let rhs = rp - self.apply_a(&t);
        let mut dy = factor.solve(&rhs);
        // Iterative refinement against the unfactored operator keeps A dx = rp
        // accurate when W is badly conditioned near the optimum.
        for _ in 0..2 {
            let wm: Vec<Blk> = self.apply_at(&dy).iter().zip(scalings).map(|(a, sc)| sc.wmw(a)).collect();
            let res = &rhs - self.apply_a(&wm);
            dy += factor.solve(&res);
        }
        let aty = self.apply_at(&dy);
        let ds: Vec<Blk> = rd.iter().zip(&aty).map(|(d, a)| d.sub(a).symmetrize()).collect();
        let dx: Vec<Blk> =
            rc.iter().zip(&ds).zip(scalings).map(|((c, s), sc)| c.sub(&sc.wmw(s)).symmetrize()).collect();
        (dx, dy, ds)
    }

    fn run(&self, opts: &SolverOptions) -> RawResult {
        let (mut x, mut y, mut s) = self.initial_point();
        let b_norm = self.b.norm();
        let c_norm = self.c.iter().map(Blk::norm_sq).sum::<f64>().sqrt();

        let mut best: Option<(f64, Vec<Blk>, DVector<f64>, f64, f64)> = None;
        // last iteration that improved the merit by at least 10%
        let mut progress_iter = 0;
        let mut progress_merit = f64::INFINITY;
        let mut stalled_steps = 0;
        let mut status = SdpStatus::NumericalLimit;
        let mut iterations = 0;

        for iter in 0..=opts.max_iterations {
            iterations = iter;
            let ax = self.apply_a(&x);
            let rp = &self.b - &ax;
            let aty = self.apply_at(&y);
            let rd: Vec<Blk> = self
                .c
                .iter()
                .zip(&aty)
                .zip(&s)
                .map(|((c, a), sb)| {
                    let mut r = c.sub(a);
                    r.axpy(-1.0, sb);
                    r
                })
                .collect();
            let pobj: f64 = self.c.iter().zip(&x).map(|(c, xb)| c.dot(xb)).sum();
            let dobj = self.b.dot(&y);
            let pinf = rp.norm() / (1.0 + b_norm);
            let dinf = rd.iter().map(Blk::norm_sq).sum::<f64>().sqrt() / (1.0 + c_norm);
            let gap = (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs());
            let merit = (gap / opts.gap_tol).max(pinf / opts.feas_tol).max(dinf / opts.feas_tol);
            let xs: f64 = x.iter().zip(&s).map(|(a, b)| a.dot(b)).sum();
            let mu = xs / self.nu;

            if opts.verbose {
                eprintln!(
                    "{iter:3} pobj {pobj:+.10e} dobj {dobj:+.10e} gap {gap:.2e} pinf {pinf:.2e} dinf {dinf:.2e} mu {mu:.2e}"
                );
            }
            if best.as_ref().is_none_or(|b| merit < b.0) {
                best = Some((merit, x.clone(), y.clone(), gap, dinf));
            }
            if merit < 0.9 * progress_merit {
                progress_merit = merit;
                progress_iter = iter;
            }
            if merit <= 1.0 {
                status = SdpStatus::Optimal;
                break;
            }
            if iter == opts.max_iterations || iter > progress_iter + 30 {
                break;
            }

            // Divergence along an infeasibility certificate.
            if dobj > 1e8 * (1.0 + c_norm) && rd.iter().map(Blk::norm_sq).sum::<f64>().sqrt() < 1e-6 * dobj {
                status = SdpStatus::Infeasible;
                break;
            }
            let x_norm = x.iter().map(Blk::norm_sq).sum::<f64>().sqrt();
            if -pobj > 1e8 * (1.0 + b_norm) && ax.norm() < 1e-6 * (-pobj) && x_norm > 1e8 {
                status = SdpStatus::Infeasible;
                break;
            }

            let Some(scalings) = x.iter().zip(&s).map(|(a, b)| Scaling::new(a, b)).collect::<Option<Vec<_>>>()
            else {
                if opts.verbose {
                    eprintln!("  scaling failed");
                }
                break;
            };
            let Some(factor) = factor_schur(self.schur(&scalings)) else {
                if opts.verbose {
                    eprintln!("  schur factorization failed");
                }
                break;
            };

            // Predictor: target the central path at mu = 0.
            let rc_aff: Vec<Blk> = x.iter().map(|xb| {
                let mut r = xb.clone();
                match &mut r {
                    Blk::Dense(m) => m.neg_mut(),
                    Blk::Diag(v) => v.neg_mut(),
                }
                r
            }).collect();
            let (dx_a, _, ds_a) = self.direction(&scalings, &factor, &rp, &rd, &rc_aff);
            let ap_a = max_step(&x, &dx_a, &scalings, true).min(1.0);
            let ad_a = max_step(&s, &ds_a, &scalings, false).min(1.0);
            let mut mu_aff = 0.0;
            for k in 0..x.len() {
                let mut xa = x[k].clone();
                xa.axpy(ap_a, &dx_a[k]);
                let mut sa = s[k].clone();
                sa.axpy(ad_a, &ds_a[k]);
                mu_aff += xa.dot(&sa);
            }
            mu_aff /= self.nu;
            let sigma = if mu > 0.0 { (mu_aff / mu).max(0.0).powi(3).min(1.0) } else { 0.0 };

            // Corrector with second-order term.
            let rc: Vec<Blk> = (0..x.len())
                .map(|k| corrector_rhs(&scalings[k], &x[k], &s[k], &dx_a[k], &ds_a[k], sigma * mu))
                .collect();
            let (dx, dy, ds) = self.direction(&scalings, &factor, &rp, &rd, &rc);
            let ap = (opts.step_fraction * max_step(&x, &dx, &scalings, true)).min(1.0);
            let ad = (opts.step_fraction * max_step(&s, &ds, &scalings, false)).min(1.0);
            if !(ap.is_finite() && ad.is_finite()) {
                break;
            }
            for k in 0..x.len() {
                x[k].axpy(ap, &dx[k]);
                s[k].axpy(ad, &ds[k]);
            }
            y.axpy(ad, &dy, 1.0);

            if ap < 1e-10 && ad < 1e-10 {
                stalled_steps += 1;
                if stalled_steps >= 3 {
                    break;
                }
            } else {
                stalled_steps = 0;
            }
        }

        let (x_out, y_out, gap, dinf) = match (status, best) {
            (SdpStatus::Infeasible, _) | (_, None) => {
                let pobj: f64 = self.c.iter().zip(&x).map(|(c, xb)| c.dot(xb)).sum();
                let dobj = self.b.dot(&y);
                (x, y, (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs()), f64::NAN)
            }
            (_, Some((_, bx, by, bgap, bdinf))) => (bx, by, bgap, bdinf),
        };
        RawResult { status, x: x_out, y: y_out, gap, dinf, iterations }
    }
}

fn entries_norm(entries: &[(usize, usize, f64)]) -> f64 {
    entries.iter().map(|&(i, j, v)| if i == j { v * v } else { 2.0 * v * v }).sum::<f64>().sqrt()
}

/// Adds `⟨A_i, W A_j W⟩` for all constraint pairs `i <= j` on one dense block
/// into the upper triangle of `h`.
fn schur_dense_block(h: &mut DMatrix<f64>, list: &[Touch], w: &DMatrix<f64>) {
    let n = w.nrows();
    let mut prefix_nnz = 0usize;
    for (bj, tj) in list.iter().enumerate() {
        let nnz_j = tj.entries.len();
        prefix_nnz += nnz_j;
        let sparse_cost = 4 * nnz_j * prefix_nnz;
        let form_cost = if 2 * nnz_j < n { 2 * nnz_j * n * n } else { 2 * n * n * n };
        let dense_cost = form_cost + 2 * prefix_nnz;
        let j = tj.con;
        if sparse_cost <= dense_cost {
            for ti in &list[..=bj] {
                h[(ti.con, j)] += sparse_pair(&ti.entries, &tj.entries, w);
            }
        } else {
            let b = if 2 * nnz_j < n {
                let mut b = DMatrix::<f64>::zeros(n, n);
                for &(k, l, v) in &tj.entries {
                    let wk = w.column(k);
                    if k == l {
                        b.ger(v, &wk, &wk, 1.0);
                    } else {
                        let wl = w.column(l);
                        b.ger(v, &wk, &wl, 1.0);
                        b.ger(v, &wl, &wk, 1.0);
                    }
                }
                b
            } else {
                let mut a = DMatrix::<f64>::zeros(n, n);
                for &(k, l, v) in &tj.entries {
                    a[(k, l)] = v;
                    a[(l, k)] = v;
                }
                w * a * w
            };
            for ti in &list[..=bj] {
                h[(ti.con, j)] += dense_dot_entries(&b, &ti.entries);
            }
        }
    }
}

/// `⟨A_i, W A_j W⟩` from the sparse entries of both matrices.
fn sparse_pair(ai: &[(usize, usize, f64)], aj: &[(usize, usize, f64)], w: &DMatrix<f64>) -> f64 {
    let mut acc = 0.0;
    for &(p, q, u) in ai {
        let mult = if p == q { u } else { 2.0 * u };
        let mut inner = 0.0;
        for &(k, l, v) in aj {
            inner += if k == l {
                v * w[(p, k)] * w[(k, q)]
            } else {
                v * (w[(p, k)] * w[(l, q)] + w[(p, l)] * w[(k, q)])
            };
        }
        acc += mult * inner;
    }
    acc
}

/// Cholesky of the Schur complement, with growing diagonal regularization if
/// the matrix is numerically singular.
fn factor_schur(h: DMatrix<f64>) -> Option<Cholesky<f64, Dyn>> {
    if h.nrows() == 0 {
        return Cholesky::new(h);
    }
    let max_diag = h.diagonal().iter().fold(0.0_f64, |a, &b| a.max(b.abs())).max(1e-300);
    if let Some(c) = Cholesky::new(h.clone()) {
        return Some(c);
    }
    let mut reg = 1e-14 * max_diag;
    for _ in 0..6 {
        let mut hr = h.clone();
        for i in 0..hr.nrows() {
            hr[(i, i)] += reg;
        }
        if let Some(c) = Cholesky::new(hr) {
            return Some(c);
        }
        reg *= 100.0;
    }
    None
}

/// Largest `α` with `V + α ΔV ⪰ 0` over all blocks (infinite if unbounded).
fn max_step(v: &[Blk], dv: &[Blk], scalings: &[Scaling], primal: bool) -> f64 {
    let mut alpha = f64::INFINITY;
    for k in 0..v.len() {
        let a = match (&v[k], &dv[k], &scalings[k]) {
            (Blk::Dense(_), Blk::Dense(d), Scaling::Dense { lx, ls, .. }) => {
                let l = if primal { lx } else { ls };
                let Some(t1) = l.solve_lower_triangular(d) else {
                    return 0.0;
                };
                let Some(t2) = l.solve_lower_triangular(&t1.transpose()) else {
                    return 0.0;
                };
                let sym = (&t2 + t2.transpose()) * 0.5;
                let lmin = sym.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min);
                if lmin < 0.0 {
                    -1.0 / lmin
                } else {
                    f64::INFINITY
                }
            }
            (Blk::Diag(val), Blk::Diag(d), _) => val
                .iter()
                .zip(d.iter())
                .filter(|(_, &dd)| dd < 0.0)
                .map(|(&vv, &dd)| -vv / dd)
                .fold(f64::INFINITY, f64::min),
            _ => unreachable!("block kinds always match"),
        };
        alpha = alpha.min(a);
    }
    alpha
}

/// Mehrotra corrector right-hand side for `ΔX + W ΔS W`.
fn corrector_rhs(sc: &Scaling, x: &Blk, s: &Blk, dx_a: &Blk, ds_a: &Blk, target: f64) -> Blk {
    match (sc, x, s, dx_a, ds_a) {
        (Scaling::Dense { g, ginv, d, .. }, _, _, Blk::Dense(dxa), Blk::Dense(dsa)) => {
            let dxh = ginv * dxa * ginv.transpose();
            let dsh = g.transpose() * dsa * g;
            let hm = &dxh * &dsh + &dsh * &dxh;
            let n = d.len();
            let rch = DMatrix::from_fn(n, n, |i, j| {
                let base = -hm[(i, j)] / (d[i] + d[j]);
                if i == j {
                    base + target / d[i] - d[i]
                } else {
                    base
                }
            });
            Blk::Dense(g * rch * g.transpose())
        }
        (Scaling::Diag { .. }, Blk::Diag(xv), Blk::Diag(sv), Blk::Diag(dxa), Blk::Diag(dsa)) => {
            Blk::Diag(DVector::from_fn(xv.len(), |i, _| (target - xv[i] * sv[i] - dxa[i] * dsa[i]) / sv[i]))
        }
        _ => unreachable!("block kinds always match"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::SparseSym;

    #[test]
    fn nt_scaling_identities() {
        let x = DMatrix::from_row_slice(3, 3, &[2.0, 0.3, 0.1, 0.3, 1.5, -0.2, 0.1, -0.2, 1.0]);
        let s = DMatrix::from_row_slice(3, 3, &[1.0, -0.1, 0.0, -0.1, 0.7, 0.2, 0.0, 0.2, 2.0]);
        let Some(Scaling::Dense { g, ginv, w, d, .. }) = Scaling::new(&Blk::Dense(x.clone()), &Blk::Dense(s.clone()))
        else {
            panic!("scaling failed")
        };
        let dm = DMatrix::from_diagonal(&d);
        assert!((g.transpose() * &s * &g - &dm).abs().max() < 1e-12);
        assert!((&ginv * &x * ginv.transpose() - &dm).abs().max() < 1e-12);
        assert!((&w * &s * &w - &x).abs().max() < 1e-12);
    }

    #[test]
    fn schur_routes_agree() {
        let w = DMatrix::from_row_slice(3, 3, &[2.0, 0.3, 0.1, 0.3, 1.5, -0.2, 0.1, -0.2, 1.0]);
        let a = SparseSym::from_triplets([(0, 1, 1.0), (2, 2, -0.5)]);
        let b = SparseSym::from_triplets([(0, 0, 0.7), (1, 2, 2.0)]);
        let sparse = sparse_pair(a.entries(), b.entries(), &w);
        let dense = dense_dot_entries(&(&w * b.to_dense(3) * &w), a.entries());
        assert!((sparse - dense).abs() < 1e-13);
    }
}
