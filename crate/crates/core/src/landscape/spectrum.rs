use nalgebra::DMatrix;

use crate::codesign::ParameterSpace;
use crate::error::{check_len, Error, Result};

/// Eigenvalues in `[-NEGATIVE_TOLERANCE, 0)` are rounding noise and clamp to 0.
pub const NEGATIVE_TOLERANCE: f64 = 1e-10;

/// Column matrix of sampled gradients scaled by `1/√N`.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientMatrix {
    /// `m × N`
    pub g: DMatrix<f64>,
    pub n: usize,
    pub mean: Vec<f64>,
    pub sigma: f64,
}

impl GradientMatrix {
    pub fn new(gradients: &[Vec<f64>], mean: Vec<f64>, sigma: f64) -> Result<Self> {
        let n = gradients.len();
        if n == 0 {
            return Err(Error::InvalidArgument("need at least one gradient".into()));
        }
        let m = gradients[0].len();
        for g in gradients {
            check_len(m, g.len())?;
            if g.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidArgument("gradient has non-finite entries".into()));
            }
        }
        let scale = 1.0 / (n as f64).sqrt();
        let g = DMatrix::from_fn(m, n, |i, k| gradients[k][i] * scale);
        Ok(Self { g, n, mean, sigma })
    }

    pub fn dim(&self) -> usize {
        self.g.nrows()
    }
}

/// Uncentered covariance `G Gᵀ`, symmetrized against rounding.
pub fn covariance(gm: &GradientMatrix) -> DMatrix<f64> {
    let c = &gm.g * gm.g.transpose();
    (&c + c.transpose()) * 0.5
}

/// Symmetric eigendecomposition with eigenvalues sorted in descending order
/// and each eigenvector's largest-magnitude entry made positive. Tiny
/// negative eigenvalues are clamped to zero.
pub fn eigendecompose(c: &DMatrix<f64>) -> Result<(DMatrix<f64>, Vec<f64>)> {
    if !c.is_square() {
        return Err(Error::InvalidArgument("covariance must be square".into()));
    }
    let scale = c.amax().max(1.0);
    let asym = (c - c.transpose()).amax();
    if asym > 1e-8 * scale {
        return Err(Error::InvalidArgument(format!("matrix is not symmetric (max asymmetry {asym:e})")));
    }
    let m = c.nrows();
    let eig = c.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let mut values = Vec::with_capacity(m);
    let mut v = DMatrix::zeros(m, m);
    for (col, &k) in order.iter().enumerate() {
        let mut lambda = eig.eigenvalues[k];
        if lambda < 0.0 {
            if lambda < -NEGATIVE_TOLERANCE * scale {
                return Err(Error::DegenerateSpectrum(format!("negative eigenvalue {lambda:e}")));
            }
            lambda = 0.0;
        }
        values.push(lambda);
        let vec = eig.eigenvectors.column(k);
        let pivot = vec.iter().copied().fold(0.0f64, |best, x| if x.abs() > best.abs() { x } else { best });
        let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
        v.set_column(col, &(vec * sign));
    }
    Ok((v, values))
}

/// Prefix sums of the spectrum over its total. An all-zero spectrum gives
/// all ones and `true` for the degenerate flag.
pub fn cumulative_explained_variance(lambda: &[f64]) -> (Vec<f64>, bool) {
    let total: f64 = lambda.iter().sum();
    if !(total > 0.0) {
        return (vec![1.0; lambda.len()], true);
    }
    let mut acc = 0.0;
    let mut out: Vec<f64> = lambda
        .iter()
        .map(|l| {
            acc += l;
            (acc / total).min(1.0)
        })
        .collect();
    if let Some(last) = out.last_mut() {
        *last = 1.0;
    }
    (out, false)
}

/// `exp(−Σ pᵢ ln pᵢ)` of the normalized spectrum.
pub fn effective_dimensionality(lambda: &[f64]) -> Result<f64> {
    let total: f64 = lambda.iter().sum();
    if !(total > 0.0) {
        return Err(Error::DegenerateSpectrum("all eigenvalues are zero".into()));
    }
    let entropy: f64 = lambda
        .iter()
        .filter(|&&l| l > 0.0)
        .map(|&l| {
            let p = l / total;
            -p * p.ln()
        })
        .sum();
    Ok(entropy.exp())
}

/// Average dimension-normalized gradient norm of the morphology and control
/// parts, normalized to sum to one: `(align_m, align_c)`.
pub fn alignment_ratio(gradients: &[Vec<f64>], space: &ParameterSpace) -> Result<(f64, f64)> {
    if gradients.is_empty() {
        return Err(Error::InvalidArgument("need at least one gradient".into()));
    }
    let norm = |v: &[f64], dim: usize| {
        if dim == 0 {
            0.0
        } else {
            v.iter().map(|x| x * x).sum::<f64>().sqrt() / (dim as f64).sqrt()
        }
    };
    let (mut sm, mut sc) = (0.0, 0.0);
    for g in gradients {
        let (morph, ctrl) = space.split(g)?;
        sm += norm(&morph, space.m_morph);
        sc += norm(&ctrl, space.m_ctrl);
    }
    let total = sm + sc;
    if !(total > 0.0) {
        return Err(Error::DegenerateSpectrum("all gradients are zero".into()));
    }
    let align_m = sm / total;
    Ok((align_m, 1.0 - align_m))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codesign::ParamKind;

    #[test]
    fn single_unit_gradient() {
        let gm = GradientMatrix::new(&[vec![1.0, 0.0, 0.0]], vec![0.0; 3], 0.1).unwrap();
        let c = covariance(&gm);
        assert_eq!(c, DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]));
    }

    #[test]
    fn orthogonal_pair() {
        let r2 = 2f64.sqrt();
        let gm = GradientMatrix::new(&[vec![r2, 0.0, 0.0, 0.0], vec![0.0, r2, 0.0, 0.0]], vec![0.0; 4], 0.1).unwrap();
        let c = covariance(&gm);
        let expected = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 1.0, 0.0, 0.0]));
        assert!((c - expected).amax() < 1e-15);
    }

    #[test]
    fn identity_and_diagonal_spectra() {
        let (_, l) = eigendecompose(&DMatrix::identity(3, 3)).unwrap();
        assert!(l.iter().all(|&x| (x - 1.0).abs() < 1e-14));
        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 4.0, 0.0]));
        let (v, l) = eigendecompose(&d).unwrap();
        assert!((l[0] - 4.0).abs() < 1e-14 && (l[1] - 1.0).abs() < 1e-14 && l[2].abs() < 1e-14);
        // signed permutation with the sign convention making it a plain permutation
        assert!((v[(1, 0)] - 1.0).abs() < 1e-14 && (v[(0, 1)] - 1.0).abs() < 1e-14 && (v[(2, 2)] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn rejects_asymmetric() {
        let c = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(matches!(eigendecompose(&c), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn rejects_clearly_negative_eigenvalue() {
        let c = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1e-3]);
        assert!(matches!(eigendecompose(&c), Err(Error::DegenerateSpectrum(_))));
        let (_, l) = eigendecompose(&DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1e-12])).unwrap();
        assert_eq!(l[1], 0.0);
    }

    #[test]
    fn explained_variance_examples() {
        assert_eq!(cumulative_explained_variance(&[1.0, 0.0, 0.0]).0, vec![1.0, 1.0, 1.0]);
        assert_eq!(cumulative_explained_variance(&[2.0, 1.0, 1.0]).0, vec![0.5, 0.75, 1.0]);
        assert_eq!(cumulative_explained_variance(&[0.0, 0.0]), (vec![1.0, 1.0], true));
    }

    #[test]
    fn effective_dimensionality_examples() {
        assert!((effective_dimensionality(&[1.0; 4]).unwrap() - 4.0).abs() < 1e-12);
        assert!((effective_dimensionality(&[1.0, 0.0, 0.0, 0.0]).unwrap() - 1.0).abs() < 1e-12);
        let p: [f64; 2] = [0.75, 0.25];
        let h = -(p[0] * p[0].ln() + p[1] * p[1].ln());
        assert!((effective_dimensionality(&[3.0, 1.0]).unwrap() - h.exp()).abs() < 1e-12);
        assert!((effective_dimensionality(&[3.0, 1.0]).unwrap() - 1.7548).abs() < 1e-4);
        assert!(effective_dimensionality(&[0.0, 0.0]).is_err());
    }

    fn loc84_like() -> ParameterSpace {
        let labels = (0..84).map(|i| if i < 72 { ParamKind::Morphology } else { ParamKind::Control }).collect();
        ParameterSpace::new(vec![0.0; 84], vec![1.0; 84], vec![0.5; 84], labels).unwrap()
    }

    #[test]
    fn alignment_examples() {
        let space = loc84_like();
        let mut ctrl_only = vec![0.0; 84];
        ctrl_only[80] = 3.0;
        assert_eq!(alignment_ratio(&[ctrl_only.clone()], &space).unwrap(), (0.0, 1.0));
        let (am, ac) = alignment_ratio(&[vec![1.0; 84]], &space).unwrap();
        assert!((am - 0.5).abs() < 1e-15 && (ac - 0.5).abs() < 1e-15);
        // equal normalized norms: √72·a/√72 = a and b·√12/√12 = b
        let morph_only: Vec<f64> = (0..84).map(|i| if i < 72 { 1.0 } else { 0.0 }).collect();
        let ctrl_all: Vec<f64> = (0..84).map(|i| if i < 72 { 0.0 } else { 1.0 }).collect();
        let (am, ac) = alignment_ratio(&[morph_only, ctrl_all], &space).unwrap();
        assert!((am - 0.5).abs() < 1e-15 && (am + ac - 1.0).abs() == 0.0);
        assert!(alignment_ratio(&[vec![0.0; 84]], &space).is_err());
    }
}
