//! Coherent-state teleportation with a two-mode squeezed vacuum resource
//! under constant losses.
//!
//! Characteristic functions use the convention
//! `C(β) = exp{-¼ v† V v}` with `v = (β_A, β_A*, β_B, β_B*)ᵀ`, so the vacuum
//! has `V = 1`. The 2×2 blocks of `V` are stored in that complex-amplitude
//! basis; [`CovarianceBlocks::quadrature_basis`] converts them to real
//! quadratures where the determinant fidelity formula applies.

use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum TeleportError {
    #[error("squeezing parameter must be finite and >= 0, got {0}")]
    Squeezing(f64),
    #[error("transmission must lie in [0, 1], got {0}")]
    Transmission(f64),
    #[error("optimal squeezing is undefined when both transmissions vanish")]
    NoTransmission,
    #[error("quadrature needs at least {min} grid points per axis, got {got}")]
    TooFewPoints { min: usize, got: usize },
    #[error("integrand at the grid boundary is {0:e}; widen the grid")]
    BoundaryNotNegligible(f64),
}

pub(crate) fn check_squeezing(r: f64) -> Result<f64, TeleportError> {
    if r.is_finite() && r >= 0.0 {
        Ok(r)
    } else {
        Err(TeleportError::Squeezing(r))
    }
}

pub(crate) fn check_transmission(t: f64) -> Result<f64, TeleportError> {
    if (0.0..=1.0).contains(&t) {
        Ok(t)
    } else {
        Err(TeleportError::Transmission(t))
    }
}

/// Squeezing `r` and amplitude transmissions of the two entangled modes.
///
/// Intensity loss of mode X is `1 - t_x²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TeleportParams {
    r: f64,
    t_a: f64,
    t_b: f64,
}

impl TeleportParams {
    pub fn new(r: f64, t_a: f64, t_b: f64) -> Result<Self, TeleportError> {
        Ok(Self {
            r: check_squeezing(r)?,
            t_a: check_transmission(t_a)?,
            t_b: check_transmission(t_b)?,
        })
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn t_a(&self) -> f64 {
        self.t_a
    }

    pub fn t_b(&self) -> f64 {
        self.t_b
    }
}

/// Result of an optimization over `r` that may have no finite maximizer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Squeezing {
    Finite(f64),
    /// Fidelity is monotone in `r`; there is no finite optimum.
    Unbounded,
}

impl Squeezing {
    pub fn finite(self) -> Option<f64> {
        match self {
            Squeezing::Finite(r) => Some(r),
            Squeezing::Unbounded => None,
        }
    }
}

impl std::fmt::Display for Squeezing {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Squeezing::Finite(r) => write!(f, "{r}"),
            Squeezing::Unbounded => f.write_str("monotone (no finite optimum)"),
        }
    }
}

pub type Mat2 = [[f64; 2]; 2];
type CMat2 = [[Complex64; 2]; 2];

const IDENTITY: Mat2 = [[1.0, 0.0], [0.0, 1.0]];
const SWAP: Mat2 = [[0.0, 1.0], [1.0, 0.0]];
const REFLECT: Mat2 = [[1.0, 0.0], [0.0, -1.0]];

fn scale(m: Mat2, s: f64) -> Mat2 {
    [[m[0][0] * s, m[0][1] * s], [m[1][0] * s, m[1][1] * s]]
}

fn mul(a: Mat2, b: Mat2) -> Mat2 {
    let mut out = [[0.0; 2]; 2];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

fn add(a: Mat2, b: Mat2) -> Mat2 {
    [[a[0][0] + b[0][0], a[0][1] + b[0][1]], [a[1][0] + b[1][0], a[1][1] + b[1][1]]]
}

fn transpose(a: Mat2) -> Mat2 {
    [[a[0][0], a[1][0]], [a[0][1], a[1][1]]]
}

fn det2(a: Mat2) -> f64 {
    a[0][0] * a[1][1] - a[0][1] * a[1][0]
}

/// 4×4 real symmetric covariance matrix in the `(β_A, β_A*, β_B, β_B*)` basis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Covariance4 {
    pub m: [[f64; 4]; 4],
}

impl Covariance4 {
    pub fn is_symmetric(&self, tol: f64) -> bool {
        (0..4).all(|i| (0..4).all(|j| (self.m[i][j] - self.m[j][i]).abs() <= tol))
    }

    /// Determinant by Gaussian elimination with partial pivoting.
    pub fn determinant(&self) -> f64 {
        let mut a = self.m;
        let mut det = 1.0;
        for col in 0..4 {
            let pivot = (col..4)
                .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
                .unwrap();
            if a[pivot][col] == 0.0 {
                return 0.0;
            }
            if pivot != col {
                a.swap(pivot, col);
                det = -det;
            }
            det *= a[col][col];
            let pivot_row = a[col];
            for row in a.iter_mut().skip(col + 1) {
                let f = row[col] / pivot_row[col];
                for (x, p) in row.iter_mut().zip(&pivot_row).skip(col) {
                    *x -= f * p;
                }
            }
        }
        det
    }
}

/// Covariance of the two-mode squeezed vacuum.
pub fn epr_covariance(r: f64) -> Covariance4 {
    let c = (2.0 * r).cosh();
    let s = -(2.0 * r).sinh();
    Covariance4 {
        m: [
            [c, 0.0, 0.0, s],
            [0.0, c, s, 0.0],
            [0.0, s, c, 0.0],
            [s, 0.0, 0.0, c],
        ],
    }
}

/// The 2×2 blocks `A`, `B`, `C` of the lossy two-mode covariance
/// `V = [[A, C], [C†, B]]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovarianceBlocks {
    pub a_block: Mat2,
    pub b_block: Mat2,
    pub c_block: Mat2,
}

impl CovarianceBlocks {
    pub fn to_covariance4(&self) -> Covariance4 {
        let c_dag = transpose(self.c_block);
        let mut m = [[0.0; 4]; 4];
        for i in 0..2 {
            for j in 0..2 {
                m[i][j] = self.a_block[i][j];
                m[i][j + 2] = self.c_block[i][j];
                m[i + 2][j] = c_dag[i][j];
                m[i + 2][j + 2] = self.b_block[i][j];
            }
        }
        Covariance4 { m }
    }

    /// Blocks expressed in real quadratures `(q, p)` instead of `(β, β*)`.
    ///
    /// With `β = (q + i p)/√2` each block transforms as `U† M U`,
    /// `U = [[1, i], [1, -i]]/√2`; the amplitude-basis swap matrix becomes
    /// `diag(1, -1)`.
    pub fn quadrature_basis(&self) -> CovarianceBlocks {
        CovarianceBlocks {
            a_block: to_quadratures(self.a_block),
            b_block: to_quadratures(self.b_block),
            c_block: to_quadratures(self.c_block),
        }
    }
}

fn to_quadratures(m: Mat2) -> Mat2 {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let i = Complex64::i();
    let u: CMat2 = [
        [Complex64::new(s, 0.0), i * s],
        [Complex64::new(s, 0.0), -i * s],
    ];
    let mut out = [[0.0; 2]; 2];
    for (a, row) in out.iter_mut().enumerate() {
        for (b, v) in row.iter_mut().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for k in 0..2 {
                for l in 0..2 {
                    acc += u[k][a].conj() * m[k][l] * u[l][b];
                }
            }
            *v = acc.re;
        }
    }
    out
}

pub fn output_covariance_blocks(p: &TeleportParams) -> CovarianceBlocks {
    let ch = (2.0 * p.r).cosh();
    let sh = (2.0 * p.r).sinh();
    let ta2 = p.t_a * p.t_a;
    let tb2 = p.t_b * p.t_b;
    CovarianceBlocks {
        a_block: scale(IDENTITY, ta2 * ch + (1.0 - ta2)),
        b_block: scale(IDENTITY, tb2 * ch + (1.0 - tb2)),
        c_block: scale(SWAP, -p.t_a * p.t_b * sh),
    }
}

/// Fidelity `2/√det E` with `E = 2I + RAR + CᵀR + RC + B`, evaluated in the
/// real quadrature basis.
pub fn fidelity_det_form(p: &TeleportParams) -> f64 {
    let q = output_covariance_blocks(p).quadrature_basis();
    let e = [
        scale(IDENTITY, 2.0),
        mul(mul(REFLECT, q.a_block), REFLECT),
        mul(transpose(q.c_block), REFLECT),
        mul(REFLECT, q.c_block),
        q.b_block,
    ]
    .into_iter()
    .fold([[0.0; 2]; 2], add);
    2.0 / det2(e).sqrt()
}

/// Closed-form coherent-state teleportation fidelity with losses.
///
/// The denominator `4 + (t_a² + t_b²)(cosh 2r − 1) − 2 t_a t_b sinh 2r` is
/// rearranged to `4 + 2(t_a − t_b)² sinh² r + 2 t_a t_b (e^{−2r} − 1)`, which
/// stays accurate where the hyperbolic terms cancel.
pub fn fidelity_closed_form(p: &TeleportParams) -> f64 {
    let sh = p.r.sinh();
    let d = p.t_a - p.t_b;
    let denom = 4.0 + 2.0 * d * d * sh * sh + 2.0 * p.t_a * p.t_b * (-2.0 * p.r).exp_m1();
    2.0 / denom
}

/// Zero-mean-or-displaced Gaussian characteristic function
/// `C(β₁..βₙ) = exp{-¼ v† V v + Σ_j (β_j α_j* − β_j* α_j)}`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianCharacteristic {
    /// Row-major `2n × 2n` covariance in the `(β_j, β_j*)` basis.
    pub covariance: Vec<f64>,
    pub displacement: Vec<Complex64>,
}

impl GaussianCharacteristic {
    pub fn coherent(alpha: Complex64) -> Self {
        Self { covariance: vec![1.0, 0.0, 0.0, 1.0], displacement: vec![alpha] }
    }

    pub fn two_mode(cov: &Covariance4) -> Self {
        Self {
            covariance: cov.m.iter().flatten().copied().collect(),
            displacement: vec![Complex64::new(0.0, 0.0); 2],
        }
    }

    pub fn modes(&self) -> usize {
        self.displacement.len()
    }

    pub fn eval(&self, betas: &[Complex64]) -> Complex64 {
        let n = 2 * self.modes();
        assert_eq!(betas.len(), self.modes(), "one argument per mode");
        let v: Vec<Complex64> = betas.iter().flat_map(|b| [*b, b.conj()]).collect();
        let mut quad = Complex64::new(0.0, 0.0);
        for i in 0..n {
            let row: Complex64 =
                self.covariance[i * n..(i + 1) * n].iter().zip(&v).map(|(c, x)| *c * x).sum();
            quad += v[i].conj() * row;
        }
        let phase: Complex64 = betas
            .iter()
            .zip(&self.displacement)
            .map(|(b, a)| b * a.conj() - b.conj() * a)
            .sum();
        (-0.25 * quad + phase).exp()
    }
}

pub const ORACLE_MIN_POINTS: usize = 64;
const ORACLE_BOUNDARY_TOL: f64 = 1e-12;

/// Fidelity by direct 2-D trapezoidal quadrature of
/// `(1/π) ∫ d²β C_I(β) C_O(−β)` for a vacuum input state.
pub fn fidelity_numerical_oracle(
    p: &TeleportParams,
    grid_half_width: f64,
    grid_points: usize,
) -> Result<f64, TeleportError> {
    fidelity_numerical_oracle_with_amplitude(p, grid_half_width, grid_points, Complex64::new(0.0, 0.0))
}

/// As [`fidelity_numerical_oracle`] for the coherent input `|alpha⟩`.
pub fn fidelity_numerical_oracle_with_amplitude(
    p: &TeleportParams,
    grid_half_width: f64,
    grid_points: usize,
    alpha: Complex64,
) -> Result<f64, TeleportError> {
    if grid_points < ORACLE_MIN_POINTS {
        return Err(TeleportError::TooFewPoints { min: ORACLE_MIN_POINTS, got: grid_points });
    }
    let input = GaussianCharacteristic::coherent(alpha);
    let noise = GaussianCharacteristic::two_mode(&output_covariance_blocks(p).to_covariance4());
    // C_O(β) = C_I(β) C_G(β*, β)
    let integrand = |beta: Complex64| {
        let out = input.eval(&[-beta]) * noise.eval(&[(-beta).conj(), -beta]);
        input.eval(&[beta]) * out
    };

    let h = 2.0 * grid_half_width / (grid_points - 1) as f64;
    let coord = |i: usize| -grid_half_width + h * i as f64;
    let last = grid_points - 1;
    let mut boundary = 0.0f64;
    let mut total = Complex64::new(0.0, 0.0);
    for i in 0..grid_points {
        let wx = if i == 0 || i == last { 0.5 } else { 1.0 };
        let mut row = Complex64::new(0.0, 0.0);
        for j in 0..grid_points {
            let wy = if j == 0 || j == last { 0.5 } else { 1.0 };
            let v = integrand(Complex64::new(coord(i), coord(j)));
            if i == 0 || i == last || j == 0 || j == last {
                boundary = boundary.max(v.norm());
            }
            row += wy * v;
        }
        total += wx * row;
    }
    if boundary >= ORACLE_BOUNDARY_TOL {
        return Err(TeleportError::BoundaryNotNegligible(boundary));
    }
    Ok(total.re * h * h / std::f64::consts::PI)
}

/// Squeezing that maximizes the fidelity at fixed transmissions.
pub fn optimal_squeezing(t_a: f64, t_b: f64) -> Result<Squeezing, TeleportError> {
    check_transmission(t_a)?;
    check_transmission(t_b)?;
    if t_a == 0.0 && t_b == 0.0 {
        return Err(TeleportError::NoTransmission);
    }
    if t_a == t_b {
        return Ok(Squeezing::Unbounded);
    }
    let arg = 2.0 * t_a * t_b / (t_a * t_a + t_b * t_b);
    Ok(Squeezing::Finite(0.5 * arg.atanh()))
}

/// Fidelity when mode A is attenuated to match mode B (`t_a = t_b = t`).
pub fn adaptive_fidelity(r: f64, t: f64) -> f64 {
    1.0 / (2.0 + t * t * (-2.0 * r).exp_m1())
}

/// Large-squeezing limit of [`adaptive_fidelity`].
pub fn adaptive_asymptote(t: f64) -> f64 {
    1.0 / (2.0 - t * t)
}

/// Squeezing above which the adaptive scheme beats the direct one
/// (`t_a = 1`) at transmission `t_b`.
pub fn crossover_squeezing(t_b: f64) -> Result<Squeezing, TeleportError> {
    check_transmission(t_b)?;
    if t_b == 1.0 {
        return Ok(Squeezing::Unbounded);
    }
    Ok(Squeezing::Finite((2.0 * t_b / (1.0 + t_b)).atanh()))
}
