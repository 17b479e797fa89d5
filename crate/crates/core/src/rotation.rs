//! Logarithms and geodesic interpolation in SO(n). A rotation is decomposed
//! into orthonormal invariant planes with principal-branch angles; powers
//! Q_t rotate each plane by t times its angle. Rotations by pi have
//! non-unique geodesics; the plane pairing follows the order produced by the
//! Schur form, which fixes the branch.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct PlaneRotation {
    pub u: DVector<f64>,
    pub v: DVector<f64>,
    pub angle: f64,
}

/// Principal logarithm of a special orthogonal matrix, as invariant planes.
#[derive(Debug, Clone)]
pub struct RotationLog {
    pub n: usize,
    pub planes: Vec<PlaneRotation>,
}

/// Validate orthogonality and orientation of a candidate rotation matrix.
pub fn validate_special_orthogonal(q: &DMatrix<f64>, tol: f64) -> Result<()> {
    if !q.is_square() {
        return Err(Error::InvalidInput("rotation matrix must be square".into()));
    }
    let n = q.nrows();
    let gram = q.transpose() * q;
    let defect = (&gram - DMatrix::<f64>::identity(n, n)).abs().max();
    if defect > tol {
        return Err(Error::InvalidInput(format!("not orthogonal: |Q^T Q - I| = {defect}")));
    }
    let det = q.determinant();
    if (det - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidInput(format!("not special orthogonal: det = {det}")));
    }
    Ok(())
}

impl RotationLog {
    pub fn from_matrix(q: &DMatrix<f64>) -> Result<Self> {
        validate_special_orthogonal(q, 1e-12)?;
        let n = q.nrows();
        let schur = q.clone().schur();
        let (basis, t) = schur.unpack();
        let mut planes = Vec::new();
        let mut lone_reflections = Vec::new();
        let mut i = 0;
        while i < n {
            if i + 1 < n && t[(i + 1, i)].abs() > 1e-8 {
                let (c, s) = (t[(i, i)], t[(i + 1, i)]);
                planes.push(PlaneRotation {
                    u: basis.column(i).into_owned(),
                    v: basis.column(i + 1).into_owned(),
                    angle: s.atan2(c),
                });
                i += 2;
            } else {
                if t[(i, i)] < 0.0 {
                    lone_reflections.push(i);
                }
                i += 1;
            }
        }
        if lone_reflections.len() % 2 != 0 {
            return Err(Error::InvalidInput("odd number of -1 eigenvalues: determinant -1".into()));
        }
        for pair in lone_reflections.chunks(2) {
            planes.push(PlaneRotation {
                u: basis.column(pair[0]).into_owned(),
                v: basis.column(pair[1]).into_owned(),
                angle: std::f64::consts::PI,
            });
        }
        let log = RotationLog { n, planes };
        let rebuilt = log.interpolate(1.0);
        let defect = (&rebuilt - q).abs().max();
        if defect > 1e-9 {
            return Err(Error::InvalidInput(format!("rotation log failed to reproduce the matrix: {defect}")));
        }
        Ok(log)
    }

    pub fn is_identity(&self) -> bool {
        self.planes.iter().all(|p| p.angle.abs() < 1e-14)
    }

    /// Apply Q_t = exp(t log Q) to a vector.
    pub fn apply(&self, t: f64, x: &[f64]) -> Vec<f64> {
        let mut y: Vec<f64> = x.to_vec();
        for p in &self.planes {
            let a: f64 = x.iter().zip(p.u.iter()).map(|(xi, ui)| xi * ui).sum();
            let b: f64 = x.iter().zip(p.v.iter()).map(|(xi, vi)| xi * vi).sum();
            let (s, c) = (t * p.angle).sin_cos();
            let da = a * c - b * s - a;
            let db = a * s + b * c - b;
            for k in 0..self.n {
                y[k] += da * p.u[k] + db * p.v[k];
            }
        }
        y
    }

    pub fn interpolate(&self, t: f64) -> DMatrix<f64> {
        let n = self.n;
        let mut m = DMatrix::zeros(n, n);
        for col in 0..n {
            let mut e = vec![0.0; n];
            e[col] = 1.0;
            let y = self.apply(t, &e);
            for row in 0..n {
                m[(row, col)] = y[row];
            }
        }
        m
    }

    /// Generator action: (log Q) x.
    pub fn apply_generator(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for p in &self.planes {
            let a: f64 = x.iter().zip(p.u.iter()).map(|(xi, ui)| xi * ui).sum();
            let b: f64 = x.iter().zip(p.v.iter()).map(|(xi, vi)| xi * vi).sum();
            for k in 0..self.n {
                y[k] += p.angle * (a * p.v[k] - b * p.u[k]);
            }
        }
        y
    }
}

/// Planar rotation by an angle, embedded in dimension n acting on the first
/// two coordinates.
pub fn plane_rotation(n: usize, angle: f64) -> DMatrix<f64> {
    let mut q = DMatrix::identity(n, n);
    q[(0, 0)] = angle.cos();
    q[(0, 1)] = -angle.sin();
    q[(1, 0)] = angle.sin();
    q[(1, 1)] = angle.cos();
    q
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn quarter_turn_log() {
        let q = plane_rotation(2, PI / 2.0);
        let log = RotationLog::from_matrix(&q).unwrap();
        assert_eq!(log.planes.len(), 1);
        assert!((log.planes[0].angle.abs() - PI / 2.0).abs() < 1e-12);
        let half = log.interpolate(0.5);
        let expect = plane_rotation(2, PI / 4.0);
        assert!((half - expect).abs().max() < 1e-12);
    }

    #[test]
    fn endpoints_match() {
        let q = plane_rotation(3, 1.1);
        let log = RotationLog::from_matrix(&q).unwrap();
        assert!((log.interpolate(0.0) - DMatrix::<f64>::identity(3, 3)).abs().max() < 1e-12);
        assert!((log.interpolate(1.0) - q).abs().max() < 1e-10);
    }

    #[test]
    fn interpolants_are_orthogonal() {
        let q = plane_rotation(4, 2.2) * plane_rotation(4, 0.0); // embed in 4d
        let log = RotationLog::from_matrix(&q).unwrap();
        for t in [0.17, 0.5, 0.93] {
            let m = log.interpolate(t);
            assert!(validate_special_orthogonal(&m, 1e-10).is_ok());
        }
    }

    #[test]
    fn half_turn_pairs_reflections() {
        // rotation by pi: -I in 2d
        let q = plane_rotation(2, PI);
        let log = RotationLog::from_matrix(&q).unwrap();
        assert_eq!(log.planes.len(), 1);
        assert!((log.planes[0].angle - PI).abs() < 1e-12);
        assert!((log.interpolate(1.0) - q).abs().max() < 1e-10);
    }

    #[test]
    fn generic_so4() {
        // product of rotations in two planes
        let mut q = DMatrix::identity(4, 4);
        let block = |m: &mut DMatrix<f64>, i: usize, a: f64| {
            m[(i, i)] = a.cos();
            m[(i, i + 1)] = -a.sin();
            m[(i + 1, i)] = a.sin();
            m[(i + 1, i + 1)] = a.cos();
        };
        block(&mut q, 0, 0.8);
        block(&mut q, 2, -1.9);
        let log = RotationLog::from_matrix(&q).unwrap();
        assert_eq!(log.planes.len(), 2);
        assert!((log.interpolate(1.0) - &q).abs().max() < 1e-10);
    }

    #[test]
    fn rejects_reflection() {
        let mut q = DMatrix::identity(3, 3);
        q[(2, 2)] = -1.0;
        assert!(RotationLog::from_matrix(&q).is_err());
    }

    #[test]
    fn generator_is_skew() {
        let q = plane_rotation(3, 0.7);
        let log = RotationLog::from_matrix(&q).unwrap();
        let x = [0.3, -0.5, 0.9];
        let sx = log.apply_generator(&x);
        let dot: f64 = x.iter().zip(&sx).map(|(a, b)| a * b).sum();
        assert!(dot.abs() < 1e-12);
    }
}
