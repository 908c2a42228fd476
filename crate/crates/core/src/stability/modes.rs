use nalgebra::{DMatrix, Schur};
use num_complex::Complex64;

use super::StabilityError;

/// Eigenvalues with modulus below this are the angle-reference mode.
pub const ZERO_MODE_TOL: f64 = 1e-8;

const SCHUR_MAX_ITER: usize = 10_000;

/// All eigenvalues of a real square matrix via real Schur decomposition.
///
/// Output is sorted by real part, then imaginary part.
pub fn eigenvalues(a: &DMatrix<f64>) -> Result<Vec<Complex64>, StabilityError> {
    if a.iter().any(|v| !v.is_finite()) {
        return Err(StabilityError::EigenNonConvergence);
    }
    let schur = Schur::try_new(a.clone(), f64::EPSILON, SCHUR_MAX_ITER)
        .ok_or(StabilityError::EigenNonConvergence)?;
    let mut eigs: Vec<Complex64> = schur.complex_eigenvalues().iter().copied().collect();
    eigs.sort_by(|x, y| x.re.total_cmp(&y.re).then(x.im.total_cmp(&y.im)));
    Ok(eigs)
}

/// Oscillatory modes and their damping ratios, plus the real-mode check.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeSet {
    pub eigenvalues: Vec<Complex64>,
    /// One representative (positive imaginary part) per conjugate pair.
    pub oscillatory: Vec<Complex64>,
    /// `-sigma / |lambda|`, aligned with `oscillatory`.
    pub damping: Vec<f64>,
    /// Largest real part among non-oscillatory, non-reference modes.
    pub max_real_mode: Option<f64>,
}

impl ModeSet {
    pub fn min_damping(&self) -> Option<f64> {
        self.damping.iter().copied().reduce(f64::min)
    }

    pub fn has_unstable_real_mode(&self) -> bool {
        self.max_real_mode.is_some_and(|s| s > ZERO_MODE_TOL)
    }
}

pub fn damping_ratio(lambda: Complex64) -> f64 {
    -lambda.re / lambda.norm()
}

pub fn damping_ratios(eigs: &[Complex64]) -> ModeSet {
    let mut oscillatory = Vec::new();
    let mut max_real_mode: Option<f64> = None;
    for &l in eigs {
        if l.norm() < ZERO_MODE_TOL {
            continue;
        }
        if l.im > 0.0 {
            oscillatory.push(l);
        } else if l.im == 0.0 {
            max_real_mode = Some(max_real_mode.map_or(l.re, |m| m.max(l.re)));
        }
    }
    let damping = oscillatory.iter().map(|&l| damping_ratio(l)).collect();
    ModeSet {
        eigenvalues: eigs.to_vec(),
        oscillatory,
        damping,
        max_real_mode,
    }
}
