//! States, unitaries and measurements used by the game.

use std::f64::consts::PI;

use boundent_linalg::{eigh, kron, partial_trace, Complex64, ComplexMatrix, Ket, Subsystem};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Hermiticity and trace tolerance for states.
pub const STATE_TOL: f64 = 1e-12;
/// Smallest eigenvalue accepted for states and effects.
pub const PSD_TOL: f64 = 1e-10;
/// Completeness tolerance for POVMs.
pub const COMPLETENESS_TOL: f64 = 1e-10;

/// Canonical representative of `a mod d` in `[0, d)`.
pub fn modd(a: i64, d: usize) -> usize {
    a.rem_euclid(d as i64) as usize
}

pub fn is_prime(d: usize) -> bool {
    d >= 2 && (2..).take_while(|k| k * k <= d).all(|k| d % k != 0)
}

fn cis(phase: f64) -> Complex64 {
    Complex64::from_polar(1.0, phase)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", tag = "kind", rename = "density-matrix")]
pub struct DensityMatrix {
    pub dim_a: usize,
    pub dim_b: usize,
    pub matrix: ComplexMatrix,
}

impl DensityMatrix {
    /// Validates Hermiticity, unit trace and positivity.
    pub fn new(matrix: ComplexMatrix, dim_a: usize, dim_b: usize) -> Result<Self> {
        let n = dim_a * dim_b;
        if matrix.rows() != n || matrix.cols() != n {
            return Err(Error::InvalidState(format!(
                "{}x{} matrix for a {dim_a}x{dim_b} system",
                matrix.rows(),
                matrix.cols()
            )));
        }
        let dev = matrix.hermitian_deviation();
        if dev > STATE_TOL {
            return Err(Error::InvalidState(format!("not Hermitian (deviation {dev:.2e})")));
        }
        let tr = matrix.trace();
        if (tr.re - 1.0).abs() > STATE_TOL || tr.im.abs() > STATE_TOL {
            return Err(Error::InvalidState(format!("trace {tr} is not 1")));
        }
        let min = eigh(&matrix)?.min();
        if min < -PSD_TOL {
            return Err(Error::InvalidState(format!("negative eigenvalue {min:.3e}")));
        }
        Ok(DensityMatrix { dim_a, dim_b, matrix })
    }

    /// Turns an approximately positive operator (for instance a solver
    /// output) into a state: Hermitian part, eigenvalues below zero lifted by
    /// mixing in the identity, then unit trace.
    pub fn from_approximate(matrix: &ComplexMatrix, dim_a: usize, dim_b: usize) -> Result<Self> {
        let mut h = matrix.hermitian_part();
        let min = eigh(&h)?.min();
        if min < 0.0 {
            h = &h + &ComplexMatrix::identity(h.rows()).scale(-min);
        }
        let tr = h.trace().re;
        if !(tr > 0.0) {
            return Err(Error::InvalidState("operator has no positive part".into()));
        }
        Self::new(h.scale(1.0 / tr).hermitian_part(), dim_a, dim_b)
    }

    pub fn maximally_mixed(dim_a: usize, dim_b: usize) -> Self {
        let n = dim_a * dim_b;
        DensityMatrix { dim_a, dim_b, matrix: ComplexMatrix::identity(n).scale(1.0 / n as f64) }
    }

    pub fn pure(v: &Ket, dim_a: usize, dim_b: usize) -> Result<Self> {
        let norm = v.norm();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidState(format!("vector norm {norm} is not 1")));
        }
        Self::new(ComplexMatrix::projector(v).hermitian_part(), dim_a, dim_b)
    }

    pub fn dim(&self) -> usize {
        self.dim_a * self.dim_b
    }
}

/// One measurement: an effect per outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", tag = "kind", rename = "povm")]
pub struct Povm {
    pub input: usize,
    pub effects: Vec<ComplexMatrix>,
}

impl Povm {
    pub fn new(input: usize, effects: Vec<ComplexMatrix>) -> Result<Self> {
        let Some(first) = effects.first() else {
            return Err(Error::InvalidPovm("no effects".into()));
        };
        let n = first.rows();
        let mut sum = ComplexMatrix::zeros(n, n);
        for (c, e) in effects.iter().enumerate() {
            if e.rows() != n || e.cols() != n {
                return Err(Error::InvalidPovm(format!("effect {c} has shape {}x{}", e.rows(), e.cols())));
            }
            let min = eigh(e).map_err(|_| Error::InvalidPovm(format!("effect {c} is not Hermitian")))?.min();
            if min < -PSD_TOL {
                return Err(Error::InvalidPovm(format!("effect {c} has eigenvalue {min:.3e}")));
            }
            sum += e;
        }
        let dev = (&sum - &ComplexMatrix::identity(n)).max_abs();
        if dev > COMPLETENESS_TOL {
            return Err(Error::InvalidPovm(format!("effects sum to identity only up to {dev:.3e}")));
        }
        Ok(Povm { input, effects })
    }

    /// Builds a measurement from approximately complete positive operators:
    /// negative eigenvalues are clipped and the effects are renormalized as
    /// `S^{-1/2} M_c S^{-1/2}` with `S = Σ_c M_c`.
    pub fn from_approximate(input: usize, effects: &[ComplexMatrix]) -> Result<Self> {
        let clipped: Vec<ComplexMatrix> = effects
            .iter()
            .map(|e| {
                let spec = eigh(&e.hermitian_part())?;
                let vals: Vec<f64> = spec.eigenvalues.iter().map(|v| v.max(0.0)).collect();
                Ok(spec.eigenvectors.as_inner() * ComplexMatrix::from_real_diagonal(&vals).as_inner()
                    * spec.eigenvectors.adjoint().as_inner())
            })
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .map(ComplexMatrix::from)
            .collect();
        let n = clipped.first().map(ComplexMatrix::rows).unwrap_or(0);
        let mut sum = ComplexMatrix::zeros(n, n);
        for e in &clipped {
            sum += e;
        }
        let spec = eigh(&sum.hermitian_part())?;
        if spec.min() <= 0.0 {
            return Err(Error::InvalidPovm("effects do not sum to a positive definite operator".into()));
        }
        let inv_sqrt: Vec<f64> = spec.eigenvalues.iter().map(|v| v.sqrt().recip()).collect();
        let s = ComplexMatrix::from(
            spec.eigenvectors.as_inner()
                * ComplexMatrix::from_real_diagonal(&inv_sqrt).as_inner()
                * spec.eigenvectors.adjoint().as_inner(),
        );
        let normalized = clipped.iter().map(|e| (&(&s * e) * &s).hermitian_part()).collect();
        Povm::new(input, normalized)
    }

    pub fn outcomes(&self) -> usize {
        self.effects.len()
    }

    pub fn dim(&self) -> usize {
        self.effects[0].rows()
    }
}

/// Unitaries indexed by input pairs `(x₀, x₁)`, stored at `x₀·d + x₁`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitaryFamily {
    pub d: usize,
    pub unitaries: Vec<ComplexMatrix>,
}

impl UnitaryFamily {
    pub fn new(d: usize, unitaries: Vec<ComplexMatrix>) -> Result<Self> {
        if unitaries.len() != d * d {
            return Err(Error::InvalidArgument(format!("expected {} unitaries, got {}", d * d, unitaries.len())));
        }
        for (k, u) in unitaries.iter().enumerate() {
            if u.rows() != d || u.cols() != d {
                return Err(Error::InvalidArgument(format!("unitary {k} is not {d}x{d}")));
            }
            let dev = (&(u * &u.adjoint()) - &ComplexMatrix::identity(d)).max_abs();
            if dev > 1e-12 {
                return Err(Error::InvalidArgument(format!("member {k} is not unitary (deviation {dev:.2e})")));
            }
        }
        Ok(UnitaryFamily { d, unitaries })
    }

    pub fn get(&self, x0: usize, x1: usize) -> &ComplexMatrix {
        &self.unitaries[x0 * self.d + x1]
    }

    pub fn len(&self) -> usize {
        self.unitaries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.unitaries.is_empty()
    }
}

/// Shift `X = Σ|k+1⟩⟨k|` and clock `Z = Σ ω^k |k⟩⟨k|`, `ω = e^{2πi/d}`.
pub fn weyl_operators(d: usize) -> (ComplexMatrix, ComplexMatrix) {
    let one = Complex64::new(1.0, 0.0);
    let zero = Complex64::new(0.0, 0.0);
    let x = ComplexMatrix::from_fn(d, d, |i, j| if i == (j + 1) % d { one } else { zero });
    let z = ComplexMatrix::from_fn(d, d, |i, j| if i == j { cis(2.0 * PI * i as f64 / d as f64) } else { zero });
    (x, z)
}

/// `X^a Z^b`, built entrywise so the phases are exact to rounding.
pub fn weyl_unitary(d: usize, a: usize, b: usize) -> ComplexMatrix {
    // X^a Z^b |k⟩ = ω^{bk} |k + a⟩
    ComplexMatrix::from_fn(d, d, |i, k| {
        if i == (k + a) % d {
            cis(2.0 * PI * ((b * k) % d) as f64 / d as f64)
        } else {
            Complex64::new(0.0, 0.0)
        }
    })
}

/// The `d²` encodings `U_x = X^{x₀} Z^{x₁}`.
pub fn encoding_unitaries(d: usize) -> UnitaryFamily {
    let unitaries = (0..d).flat_map(|a| (0..d).map(move |b| weyl_unitary(d, a, b))).collect();
    UnitaryFamily { d, unitaries }
}

/// Vector `l` of basis `j` in the complete set of mutually unbiased bases:
/// `(1/√d) Σ_k ω^{kl + jk²} |k⟩` for `j < d` and `|l⟩` for `j = d`.
pub fn mub_vector(d: usize, j: usize, l: usize) -> Result<Ket> {
    if !is_prime(d) {
        return Err(Error::Unsupported { d, reason: "mutually unbiased bases need prime d".into() });
    }
    if j > d || l >= d {
        return Err(Error::InvalidArgument(format!("basis {j}, vector {l} out of range for d = {d}")));
    }
    if j == d {
        let mut v = Ket::zeros(d);
        v[l] = Complex64::new(1.0, 0.0);
        return Ok(v);
    }
    let norm = (d as f64).sqrt().recip();
    Ok(Ket::from_fn(d, |k, _| {
        let e = (k * l + j * k * k) % d;
        cis(2.0 * PI * e as f64 / d as f64) * norm
    }))
}

pub fn mub_projector(d: usize, j: usize, l: usize) -> Result<ComplexMatrix> {
    Ok(ComplexMatrix::projector(&mub_vector(d, j, l)?))
}

/// The 3⊗3 Bell-diagonal PPT entangled state.
pub fn bound_entangled_state() -> DensityMatrix {
    let s3 = 3f64.sqrt();
    let c = Complex64::new;
    let a1 = c((4.0 - s3) / 27.0, 0.0);
    let a2 = c((1.0 - s3) / 27.0, -1.0 / (9.0 * s3));
    let a3 = c((1.0 + 2.0 * s3) / 27.0, 0.0);
    let a4 = c((5.0 - 2.0 * s3) / 54.0, (5.0 * s3 - 12.0) / 54.0);
    let a5 = c((s3 - 4.0) / 54.0, 1.0 / 18.0);
    let o = c(0.0, 0.0);
    let (b2, b4, b5) = (a2.conj(), a4.conj(), a5.conj());
    #[rustfmt::skip]
    let entries = [
        a1, o,  o,  o,  a2, o,  o,  o,  b2,
        o,  a3, o,  o,  o,  a4, b4, o,  o,
        o,  o,  a1, a5, o,  o,  o,  b5, o,
        o,  o,  b5, a1, o,  o,  o,  a5, o,
        b2, o,  o,  o,  a1, o,  o,  o,  a2,
        o,  b4, o,  o,  o,  a3, a4, o,  o,
        o,  a4, o,  o,  o,  b4, a3, o,  o,
        o,  o,  a5, b5, o,  o,  o,  a1, o,
        a2, o,  o,  o,  b2, o,  o,  o,  a1,
    ];
    let matrix = ComplexMatrix::from_row_slice(9, 9, &entries).expect("9x9 entries");
    DensityMatrix { dim_a: 3, dim_b: 3, matrix }
}

/// `ν I/(d_A d_B) + (1 − ν) ρ`.
pub fn isotropic_mix(rho: &DensityMatrix, nu: f64) -> Result<DensityMatrix> {
    if !(0.0..=1.0).contains(&nu) {
        return Err(Error::InvalidArgument(format!("mixing weight {nu} outside [0, 1]")));
    }
    let n = rho.dim();
    let mixed = &ComplexMatrix::identity(n).scale(nu / n as f64) + &rho.matrix.scale(1.0 - nu);
    Ok(DensityMatrix { dim_a: rho.dim_a, dim_b: rho.dim_b, matrix: mixed })
}

/// Where the Weyl unitaries act when generating a Bell basis from
/// `|Φ⁺⟩ = (1/√d) Σ_k |kk⟩`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BellConvention {
    /// `(I ⊗ X^j Z^k)|Φ⁺⟩`
    SecondFactor,
    /// `(X^j Z^k ⊗ I)|Φ⁺⟩`
    FirstFactor,
    /// `(I ⊗ (X^j Z^k)*)|Φ⁺⟩`
    SecondFactorConjugate,
    /// `((X^j Z^k)* ⊗ I)|Φ⁺⟩`
    FirstFactorConjugate,
}

impl BellConvention {
    pub const ALL: [BellConvention; 4] = [
        BellConvention::SecondFactor,
        BellConvention::FirstFactor,
        BellConvention::SecondFactorConjugate,
        BellConvention::FirstFactorConjugate,
    ];
}

pub fn maximally_entangled(d: usize) -> Ket {
    let mut v = Ket::zeros(d * d);
    let amp = Complex64::new((d as f64).sqrt().recip(), 0.0);
    for k in 0..d {
        v[k * d + k] = amp;
    }
    v
}

/// Bell basis in the default convention, indexed `j·d + k` for `X^j Z^k`.
pub fn bell_basis(d: usize) -> Vec<Ket> {
    bell_basis_with(d, BellConvention::SecondFactor)
}

pub fn bell_basis_with(d: usize, convention: BellConvention) -> Vec<Ket> {
    let phi = maximally_entangled(d);
    let id = ComplexMatrix::identity(d);
    let mut out = Vec::with_capacity(d * d);
    for j in 0..d {
        for k in 0..d {
            let u = weyl_unitary(d, j, k);
            let op = match convention {
                BellConvention::SecondFactor => kron(&id, &u),
                BellConvention::FirstFactor => kron(&u, &id),
                BellConvention::SecondFactorConjugate => kron(&id, &u.conj()),
                BellConvention::FirstFactorConjugate => kron(&u.conj(), &id),
            };
            out.push(op.apply(&phi));
        }
    }
    out
}

/// Result of writing a state in a Bell basis.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BellDecomposition {
    pub convention: BellConvention,
    /// Every convention in which the state is diagonal.
    pub diagonalizing: Vec<BellConvention>,
    /// `⟨ψ_k|ρ|ψ_k⟩` in basis order.
    pub weights: Vec<f64>,
    /// Largest off-diagonal magnitude in the chosen basis.
    pub off_diagonal: f64,
    #[serde(skip)]
    pub vectors: Vec<Ket>,
}

/// Finds a Bell basis in which `rho` is diagonal to `tol`. The conventions are
/// tried in the order of [`BellConvention::ALL`]; the first that works is
/// used and all that work are recorded.
pub fn bell_decomposition(rho: &DensityMatrix, tol: f64) -> Result<BellDecomposition> {
    if rho.dim_a != rho.dim_b {
        return Err(Error::InvalidArgument("Bell bases need equal local dimensions".into()));
    }
    let d = rho.dim_a;
    let mut found: Option<(BellConvention, Vec<Ket>, Vec<f64>, f64)> = None;
    let mut diagonalizing = Vec::new();
    let mut best_off = f64::INFINITY;
    for conv in BellConvention::ALL {
        let vecs = bell_basis_with(d, conv);
        let images: Vec<Ket> = vecs.iter().map(|v| rho.matrix.apply(v)).collect();
        let mut off = 0.0_f64;
        let mut weights = Vec::with_capacity(vecs.len());
        for (a, va) in vecs.iter().enumerate() {
            for (b, img) in images.iter().enumerate() {
                let z = va.dotc(img);
                if a == b {
                    weights.push(z.re);
                } else {
                    off = off.max(z.norm());
                }
            }
        }
        best_off = best_off.min(off);
        if off <= tol {
            diagonalizing.push(conv);
            if found.is_none() {
                found = Some((conv, vecs, weights, off));
            }
        }
    }
    let Some((convention, vectors, weights, off_diagonal)) = found else {
        return Err(Error::InvalidState(format!(
            "not Bell-diagonal in any convention (smallest off-diagonal {best_off:.3e})"
        )));
    };
    Ok(BellDecomposition { convention, diagonalizing, weights, off_diagonal, vectors })
}

/// Product measurement `M_c = Σ_b P_b ⊗ Q_{b−c}` from two orthonormal bases.
pub fn product_measurement(input: usize, first: &[Ket], second: &[Ket]) -> Result<Povm> {
    let d = first.len();
    if second.len() != d {
        return Err(Error::InvalidArgument("bases of different size".into()));
    }
    let p: Vec<ComplexMatrix> = first.iter().map(ComplexMatrix::projector).collect();
    let q: Vec<ComplexMatrix> = second.iter().map(ComplexMatrix::projector).collect();
    let effects = (0..d)
        .map(|c| {
            let mut m = ComplexMatrix::zeros(d * d, d * d);
            for b in 0..d {
                m += &kron(&p[b], &q[(b + d - c) % d]);
            }
            m
        })
        .collect();
    Povm::new(input, effects)
}

/// Second-factor bases `(Ẽ₀, Ẽ₁, Ẽ₂)` as `(l, j)` labels of `E_{l|j}`.
const RELABELED_D3: [[(usize, usize); 3]; 4] = [
    [(1, 0), (0, 0), (2, 0)],
    [(0, 2), (2, 2), (1, 2)],
    [(1, 1), (0, 1), (2, 1)],
    [(1, 3), (2, 3), (0, 3)],
];

/// Charlie's four product measurements for `d = 3`.
pub fn paper_measurements_d3() -> Vec<Povm> {
    (0..4)
        .map(|z| {
            let first: Vec<Ket> = (0..3).map(|b| mub_vector(3, z, b).expect("valid MUB index")).collect();
            let second: Vec<Ket> =
                RELABELED_D3[z].iter().map(|&(l, j)| mub_vector(3, j, l).expect("valid MUB index")).collect();
            product_measurement(z, &first, &second).expect("complete product measurement")
        })
        .collect()
}

/// Reduced state on one factor.
pub fn reduced_state(rho: &DensityMatrix, keep: Subsystem) -> Result<ComplexMatrix> {
    let traced = match keep {
        Subsystem::A => Subsystem::B,
        Subsystem::B => Subsystem::A,
    };
    Ok(partial_trace(&rho.matrix, rho.dim_a, rho.dim_b, traced)?)
}
