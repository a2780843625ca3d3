use nalgebra::DMatrix;

use crate::error::CertificateError;
use crate::rigid_body::Mat6;

/// Solves `P·A + Aᵀ·P + Q = 0` for a Hurwitz `A` through the vectorized
/// 36×36 Kronecker system `(Aᵀ⊗I + I⊗Aᵀ)·vec(P) = −vec(Q)`.
pub fn solve_lyapunov(a: &Mat6, q: &Mat6) -> Result<Mat6, CertificateError> {
    let scale = a.norm().max(1.0);
    if let Some(worst) = a
        .complex_eigenvalues()
        .iter()
        .copied()
        .max_by(|x, y| x.re.total_cmp(&y.re))
    {
        if worst.re >= -1e-10 * scale {
            return Err(CertificateError::NotHurwitz {
                re: worst.re,
                im: worst.im,
            });
        }
    }
    let q_sym = (q + q.transpose()) * 0.5;
    let q_min = q_sym.symmetric_eigenvalues().min();
    if !(q_min > 0.0) {
        return Err(CertificateError::QNotPositiveDefinite(q_min));
    }

    let at = DMatrix::from_fn(6, 6, |i, j| a[(j, i)]);
    let eye = DMatrix::<f64>::identity(6, 6);
    let system = at.kronecker(&eye) + eye.kronecker(&at);
    let rhs = DMatrix::from_fn(36, 1, |k, _| -q[(k % 6, k / 6)]);
    let sol = system.lu().solve(&rhs).ok_or(CertificateError::Singular)?;
    let p = Mat6::from_fn(|i, j| sol[(i + 6 * j, 0)]);
    let p = (p + p.transpose()) * 0.5;
    let p_min = p.symmetric_eigenvalues().min();
    if !(p_min > 0.0) {
        return Err(CertificateError::PNotPositiveDefinite(p_min));
    }
    Ok(p)
}

/// `‖P·A + Aᵀ·P + Q‖_F`.
pub fn lyapunov_residual(p: &Mat6, a: &Mat6, q: &Mat6) -> f64 {
    (p * a + a.transpose() * p + q).norm()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::controller::{system_matrices, GainParams};

    #[test]
    fn scalar_decay_gives_half_q() {
        let p = solve_lyapunov(&(-Mat6::identity()), &(Mat6::identity() * 2.0)).unwrap();
        assert!((p - Mat6::identity()).norm() < 1e-14);
    }

    #[test]
    fn open_loop_is_rejected() {
        let (a, _) = system_matrices(1.0);
        match solve_lyapunov(&a, &Mat6::identity()) {
            Err(CertificateError::NotHurwitz { re, .. }) => assert!(re.abs() < 1e-6),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn reference_gain_certificate() {
        let (a, b) = system_matrices(1.0);
        let g0 = GainParams::default().g0;
        let acl = a - b * g0;
        let q = Mat6::identity();
        let p = solve_lyapunov(&acl, &q).unwrap();
        assert!(lyapunov_residual(&p, &acl, &q) <= 1e-9 * q.norm());
        assert!(p.symmetric_eigenvalues().min() > 0.0);
    }

    #[test]
    fn indefinite_q_is_rejected() {
        let mut q = Mat6::identity();
        q[(0, 0)] = -1.0;
        assert!(matches!(
            solve_lyapunov(&(-Mat6::identity()), &q),
            Err(CertificateError::QNotPositiveDefinite(_))
        ));
    }
}
