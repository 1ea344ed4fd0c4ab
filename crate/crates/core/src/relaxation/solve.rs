//! The reduced relaxation as a linear matrix inequality.
//!
//! With `q(0|z) = 1 − Σ_{c̃≥1} q(c̃|z)` substituted, the minor is
//! `Ḡ(v) = F₀ + Σ_k v_k F_k` over `d² + 1` free unknowns and the objective is
//! `1 − Σ_k r_k v_k`. This is the dual side of the conic program
//! `min ⟨F₀, Y⟩ s.t. ⟨F_k, Y⟩ = r_k, Y ⪰ 0`, whose optimal `Y` is the
//! certificate.

use boundent_sdp::{solve, BlockSpec, ConicProgram, Sense, SolverOptions, SparseSym};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::blocks::{block_diagonalize_family, BlockDiagonalizer, BlockInfo};
use super::certificate::{derive_nu, evaluate_certificate, DualCertificate};
use super::reduced::{Assignment, ReducedMomentModel, Symbol};
use crate::error::check_solution;
use crate::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelaxationOptions {
    /// Split the minor into blocks before solving.
    pub use_blocks: bool,
    /// Seed of the random combinations used for block diagonalization.
    pub seed: u64,
    pub solver_tol: f64,
}

impl RelaxationOptions {
    /// Blocks for `d ≥ 5`; the `d = 3` minor is solved whole.
    pub fn for_dimension(d: usize) -> Self {
        RelaxationOptions { use_blocks: d > 3, seed: 0, solver_tol: 1e-10 }
    }
}

/// Unknowns left after eliminating `q(0|z)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FreeVar {
    Q { miss: usize, z: usize },
    DeltaRho,
    DeltaSigma,
}

/// Structure matrices of every symbol, block by block.
#[derive(Debug, Clone)]
pub struct TransformedModel {
    pub model: ReducedMomentModel,
    pub blocks: BlockDiagonalizer,
    /// `mats[s][l] = T_lᵀ X_s T_l`.
    pub mats: Vec<Vec<DMatrix<f64>>>,
}

impl TransformedModel {
    pub fn new(model: ReducedMomentModel, blocks: BlockDiagonalizer) -> Self {
        let mats = model.structure.iter().map(|x| blocks.transform_blocks(x)).collect();
        TransformedModel { model, blocks, mats }
    }

    pub fn symbol(&self, s: Symbol) -> &[DMatrix<f64>] {
        let k = self.model.symbols.iter().position(|&t| t == s).expect("symbol present in model");
        &self.mats[k]
    }

    /// `Σ_s coef_s · X̃_s` in block `l`.
    fn combine(&self, l: usize, terms: &[(Symbol, f64)]) -> DMatrix<f64> {
        let b = self.blocks.block_sizes[l];
        let mut m = DMatrix::zeros(b, b);
        for &(s, coef) in terms {
            m += &self.symbol(s)[l] * coef;
        }
        m
    }

    /// Constant part `d X_d + X_1 + X_{1/d}/d` of the dual objective.
    pub fn constant_terms(&self) -> Vec<(Symbol, f64)> {
        let d = self.model.d as f64;
        vec![(Symbol::D, d), (Symbol::One, 1.0), (Symbol::OneOverD, 1.0 / d)]
    }
}

pub struct ReducedProgram {
    pub transformed: TransformedModel,
    pub vars: Vec<FreeVar>,
    pub program: ConicProgram,
}

/// Builds the conic program, block diagonalized when requested.
pub fn reduced_program(d: usize, opts: &RelaxationOptions) -> Result<ReducedProgram> {
    let model = ReducedMomentModel::new(d)?;
    let blocks = if opts.use_blocks {
        block_diagonalize_family(&model.structure, model.size, opts.seed)
    } else {
        BlockDiagonalizer::identity(model.size)
    };
    Ok(program_for(TransformedModel::new(model, blocks)))
}

pub(crate) fn program_for(t: TransformedModel) -> ReducedProgram {
    let d = t.model.d;
    let df = d as f64;
    let nblocks = t.blocks.block_sizes.len();
    let mut vars = Vec::new();
    for z in 0..=d {
        for miss in 1..d {
            vars.push(FreeVar::Q { miss, z });
        }
    }
    vars.push(FreeVar::DeltaRho);
    vars.push(FreeVar::DeltaSigma);

    let mut f0_terms = t.constant_terms();
    f0_terms.extend((0..=d).map(|z| (Symbol::Q { miss: 0, z }, 1.0)));
    let sparse = |m: DMatrix<f64>| SparseSym::from_dense(&m, 1e-13);

    let mut p = ConicProgram::new(Sense::Minimize, t.blocks.block_sizes.iter().map(|&b| BlockSpec::psd(b)).collect());
    for l in 0..nblocks {
        p.set_objective(l, sparse(t.combine(l, &f0_terms)));
    }
    for v in &vars {
        let (terms, rhs) = match *v {
            FreeVar::Q { miss, z } => {
                (vec![(Symbol::Q { miss, z }, 1.0), (Symbol::Q { miss: 0, z }, -1.0)], 1.0 / (df + 1.0))
            }
            FreeVar::DeltaRho => (vec![(Symbol::DeltaRho, 1.0), (Symbol::DeltaRhoOverD, 1.0 / df)], 0.0),
            FreeVar::DeltaSigma => (vec![(Symbol::DDeltaSigma, df)], 0.0),
        };
        let blocks: Vec<(usize, SparseSym)> = (0..nblocks)
            .map(|l| (l, sparse(t.combine(l, &terms))))
            .filter(|(_, m)| !m.is_empty())
            .collect();
        p.add_constraint(blocks, rhs);
    }
    ReducedProgram { transformed: t, vars, program: p }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PrimalSolution {
    pub d: usize,
    /// `(1/(d+1)) Σ_z q(0|z)` of the returned assignment.
    pub value: f64,
    pub assignment: Assignment,
    /// Smallest eigenvalue of the assembled minor `Ḡ`.
    pub min_eigenvalue: f64,
    pub gap: f64,
    pub primal_infeasibility: f64,
    pub dual_infeasibility: f64,
    pub iterations: usize,
    pub solver_tol: f64,
    pub blocks: BlockInfo,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReducedSolution {
    pub primal: PrimalSolution,
    pub certificate: DualCertificate,
}

/// Solves the reduced relaxation once and returns both the optimizing
/// assignment and the dual certificate.
pub fn solve_reduced(d: usize, opts: &RelaxationOptions) -> Result<ReducedSolution> {
    let rp = reduced_program(d, opts)?;
    let sol = solve(&rp.program, &SolverOptions::with_tol(opts.solver_tol))?;
    check_solution(&sol, opts.solver_tol, "reduced relaxation")?;
    let t = &rp.transformed;

    let mut assignment = Assignment { delta_rho: 0.0, delta_sigma: 0.0, q: vec![vec![0.0; d]; d + 1] };
    for (v, &y) in rp.vars.iter().zip(&sol.y) {
        match *v {
            FreeVar::Q { miss, z } => assignment.q[z][miss] = -y,
            FreeVar::DeltaRho => assignment.delta_rho = -y,
            FreeVar::DeltaSigma => assignment.delta_sigma = -y,
        }
    }
    for row in &mut assignment.q {
        row[0] = 1.0 - row[1..].iter().sum::<f64>();
    }
    let g = t.model.assemble(&assignment);
    let min_eigenvalue = g.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min);
    let info = t.blocks.info(opts.use_blocks);

    let primal = PrimalSolution {
        d,
        value: assignment.winning_average(),
        assignment,
        min_eigenvalue,
        gap: sol.gap,
        primal_infeasibility: sol.primal_infeasibility,
        dual_infeasibility: sol.dual_infeasibility,
        iterations: sol.iterations,
        solver_tol: opts.solver_tol,
        blocks: info.clone(),
    };

    let blocks: Vec<Vec<Vec<f64>>> =
        sol.x.iter().map(|y| y.row_iter().map(|r| r.iter().copied().collect()).collect()).collect();
    let mut cert = DualCertificate {
        d,
        symmetrized: true,
        seed: info.seed,
        block_sizes: info.block_sizes.clone(),
        blocks,
        nu: Vec::new(),
        objective: 0.0,
        residuals: Default::default(),
    };
    cert.nu = derive_nu(&cert, t)?;
    let ev = evaluate_certificate(&cert, t)?;
    cert.objective = ev.objective;
    cert.residuals = ev.residuals;
    Ok(ReducedSolution { primal, certificate: cert })
}

/// Optimal value and assignment of the reduced relaxation.
pub fn solve_primal(d: usize, use_blocks: bool) -> Result<PrimalSolution> {
    let opts = RelaxationOptions { use_blocks, ..RelaxationOptions::for_dimension(d) };
    Ok(solve_reduced(d, &opts)?.primal)
}

/// Dual certificate of the reduced relaxation.
pub fn solve_dual(d: usize) -> Result<DualCertificate> {
    Ok(solve_reduced(d, &RelaxationOptions::for_dimension(d))?.certificate)
}
