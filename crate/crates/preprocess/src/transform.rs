//! Six-degree-of-freedom rigid transforms in world millimetres.

use std::path::Path;

use strokeseg_volume::linalg::{self, Mat4};

use crate::error::{PreprocessError, Result};

/// Tolerance on orthogonality and on the determinant.
pub const RIGID_TOL: f64 = 1e-4;

/// Maps native world coordinates to reference world coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    matrix: Mat4,
}

impl RigidTransform {
    pub fn new(matrix: Mat4) -> Result<Self> {
        if matrix.iter().flatten().any(|v| !v.is_finite()) {
            return Err(PreprocessError::NotRigid("non-finite entry".into()));
        }
        if matrix[3] != [0.0, 0.0, 0.0, 1.0] {
            return Err(PreprocessError::NotRigid(format!("bottom row {:?}", matrix[3])));
        }
        for i in 0..3 {
            for j in 0..3 {
                let dot: f64 = (0..3).map(|k| matrix[k][i] * matrix[k][j]).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                if (dot - want).abs() > RIGID_TOL {
                    return Err(PreprocessError::NotRigid(format!("columns {i} and {j} have inner product {dot}")));
                }
            }
        }
        let det = linalg::det3(&matrix);
        if (det - 1.0).abs() > RIGID_TOL {
            return Err(PreprocessError::NotRigid(format!("determinant {det}")));
        }
        Ok(Self { matrix })
    }

    pub fn identity() -> Self {
        Self { matrix: linalg::identity() }
    }

    pub fn translation(t: [f64; 3]) -> Self {
        Self { matrix: linalg::translation(t) }
    }

    pub fn matrix(&self) -> &Mat4 {
        &self.matrix
    }

    pub fn inverse(&self) -> Self {
        // R^T, -R^T t
        let m = &self.matrix;
        let mut inv = linalg::identity();
        for i in 0..3 {
            for j in 0..3 {
                inv[i][j] = m[j][i];
            }
            inv[i][3] = -(0..3).map(|k| m[k][i] * m[k][3]).sum::<f64>();
        }
        Self { matrix: inv }
    }

    pub fn apply(&self, p: [f64; 3]) -> [f64; 3] {
        linalg::apply(&self.matrix, p)
    }

    /// Four whitespace-separated rows, row-major.
    pub fn to_text(&self) -> String {
        self.matrix.iter().map(|r| r.iter().map(|v| format!("{v:?}")).collect::<Vec<_>>().join(" ") + "\n").collect()
    }

    /// Parses the text form and validates rigidity.
    pub fn from_text(text: &str) -> Result<Self> {
        let m = parse_matrix(text).map_err(|reason| PreprocessError::MatrixFormat { path: "<text>".into(), reason })?;
        Self::new(m)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| PreprocessError::Io { path: path.into(), source })?;
        let m = parse_matrix(&text).map_err(|reason| PreprocessError::MatrixFormat { path: path.into(), reason })?;
        Self::new(m)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|source| PreprocessError::Io { path: path.into(), source })
    }
}

/// Sixteen whitespace-separated numbers, row-major.
pub fn parse_matrix(text: &str) -> std::result::Result<Mat4, String> {
    let v: Vec<f64> = text.split_whitespace().map(|t| t.parse::<f64>().map_err(|e| format!("{t:?}: {e}"))).collect::<std::result::Result<_, _>>()?;
    if v.len() != 16 {
        return Err(format!("expected 16 numbers, found {}", v.len()));
    }
    Ok(std::array::from_fn(|i| std::array::from_fn(|j| v[4 * i + j])))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        let r = linalg::mul(&linalg::translation([1.0, 2.0, 3.0]), &linalg::rotation_z(0.4));
        let t = RigidTransform::new(r).unwrap();
        let back = linalg::mul(t.matrix(), t.inverse().matrix());
        assert!(linalg::max_abs_diff(&back, &linalg::identity()) < 1e-12);
        assert!(RigidTransform::new(linalg::diag([1.0, 1.0, 1.01])).is_err());
        assert!(RigidTransform::new(linalg::diag([1.0, 1.0, -1.0])).is_err());
        let mut shear = linalg::identity();
        shear[0][1] = 0.01;
        assert!(RigidTransform::new(shear).is_err());
    }

    #[test]
    fn text_round_trip() {
        let t = RigidTransform::new(linalg::mul(&linalg::translation([5.0, -0.25, 1e-3]), &linalg::rotation_z(1.1))).unwrap();
        assert_eq!(RigidTransform::from_text(&t.to_text()).unwrap(), t);
        assert!(RigidTransform::from_text("1 0 0").is_err());
    }
}
