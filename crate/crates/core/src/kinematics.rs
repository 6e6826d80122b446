//! Serial-chain kinematics for a 7-DoF revolute manipulator.
//!
//! A chain is a base pose, seven revolute joints (each a fixed link
//! transform followed by a rotation about a fixed local axis) and a tool
//! offset. Frames compose as
//!
//! ```text
//! tip = base · L1 · R1(q1) · L2 · R2(q2) · … · L7 · R7(q7) · tool
//! ```
//!
//! Orientations are stored as unit quaternions throughout ([`Isometry3`]).
//! The position Jacobian maps joint velocities to the Cartesian velocity of
//! the tool point; its null space is the degrees of freedom the hitting
//! optimizer is allowed to spend on secondary objectives.

use nalgebra::{
    DMatrix, Isometry3, Matrix3, SMatrix, SVector, Unit, UnitQuaternion, Vector3,
};
use thiserror::Error;

/// Joint-space vector (positions or velocities).
pub type JointVec = SVector<f64, 7>;
/// Position Jacobian of the tool point.
pub type PosJacobian = SMatrix<f64, 3, 7>;
/// Full spatial Jacobian: rows 0..3 linear, rows 3..6 angular.
pub type SpatialJacobian = SMatrix<f64, 6, 7>;
/// Orthonormal basis of the position-Jacobian null space (columns).
pub type NullBasis = SMatrix<f64, 7, 4>;

/// Singular values below this are treated as rank deficiency.
pub const SINGULARITY_TOL: f64 = 1e-8;

#[derive(Debug, Error, PartialEq)]
pub enum KinematicsError {
    #[error("joint axis has near-zero norm {0:.3e}")]
    DegenerateAxis(f64),
    #[error("joint {index}: lower limit {lo} is not below upper limit {hi}")]
    EmptyLimitInterval { index: usize, lo: f64, hi: f64 },
    #[error("joint {index}: velocity limit {0} must be positive", .limit)]
    NonPositiveVelocityLimit { index: usize, limit: f64 },
    #[error("configuration is singular (smallest singular value {0:.3e})")]
    SingularConfiguration(f64),
}

/// One revolute joint: the fixed transform from the previous frame to the
/// joint frame, and the rotation axis expressed in the joint frame.
#[derive(Debug, Clone)]
pub struct Joint {
    pub link: Isometry3<f64>,
    pub axis: Unit<Vector3<f64>>,
}

impl Joint {
    pub fn new(link: Isometry3<f64>, axis: Vector3<f64>) -> Result<Joint, KinematicsError> {
        let n = axis.norm();
        if n < 1e-9 {
            return Err(KinematicsError::DegenerateAxis(n));
        }
        Ok(Joint {
            link,
            axis: Unit::new_normalize(axis),
        })
    }
}

/// A validated 7-DoF revolute chain with joint limits.
#[derive(Debug, Clone)]
pub struct KinematicChain {
    base: Isometry3<f64>,
    tool: Isometry3<f64>,
    joints: [Joint; 7],
    q_min: JointVec,
    q_max: JointVec,
    qd_max: JointVec,
}

/// World-frame origin and rotation axis of one joint at a configuration.
#[derive(Debug, Clone, Copy)]
pub struct JointFrame {
    pub origin: Vector3<f64>,
    pub axis: Unit<Vector3<f64>>,
}

impl KinematicChain {
    pub fn new(
        base: Isometry3<f64>,
        tool: Isometry3<f64>,
        joints: [Joint; 7],
        q_min: JointVec,
        q_max: JointVec,
        qd_max: JointVec,
    ) -> Result<KinematicChain, KinematicsError> {
        for i in 0..7 {
            if !(q_min[i] < q_max[i]) {
                return Err(KinematicsError::EmptyLimitInterval {
                    index: i,
                    lo: q_min[i],
                    hi: q_max[i],
                });
            }
            if !(qd_max[i] > 0.0) {
                return Err(KinematicsError::NonPositiveVelocityLimit {
                    index: i,
                    limit: qd_max[i],
                });
            }
        }
        Ok(KinematicChain {
            base,
            tool,
            joints,
            q_min,
            q_max,
            qd_max,
        })
    }

    pub fn base(&self) -> &Isometry3<f64> {
        &self.base
    }

    pub fn tool(&self) -> &Isometry3<f64> {
        &self.tool
    }

    pub fn joints(&self) -> &[Joint; 7] {
        &self.joints
    }

    pub fn q_min(&self) -> &JointVec {
        &self.q_min
    }

    pub fn q_max(&self) -> &JointVec {
        &self.q_max
    }

    pub fn qd_max(&self) -> &JointVec {
        &self.qd_max
    }

    /// Pose of the tool frame at configuration `q`.
    pub fn forward_kinematics(&self, q: &JointVec) -> Isometry3<f64> {
        let mut pose = self.base;
        for (i, joint) in self.joints.iter().enumerate() {
            pose *= joint.link;
            pose *= UnitQuaternion::from_axis_angle(&joint.axis, q[i]);
        }
        pose * self.tool
    }

    /// Position of the tool point at configuration `q`.
    pub fn tool_position(&self, q: &JointVec) -> Vector3<f64> {
        self.forward_kinematics(q).translation.vector
    }

    /// World-frame joint frames plus the tool pose, in one pass.
    pub fn joint_frames(&self, q: &JointVec) -> ([JointFrame; 7], Isometry3<f64>) {
        let mut pose = self.base;
        let mut frames = [JointFrame {
            origin: Vector3::zeros(),
            axis: Vector3::z_axis(),
        }; 7];
        for (i, joint) in self.joints.iter().enumerate() {
            pose *= joint.link;
            frames[i] = JointFrame {
                origin: pose.translation.vector,
                axis: Unit::new_unchecked(pose.rotation * joint.axis.into_inner()),
            };
            pose *= UnitQuaternion::from_axis_angle(&joint.axis, q[i]);
        }
        (frames, pose * self.tool)
    }

    /// Position Jacobian of the tool point: column `i` is
    /// `axis_i × (p_tool − p_i)` in world coordinates.
    pub fn position_jacobian(&self, q: &JointVec) -> PosJacobian {
        let (frames, tip) = self.joint_frames(q);
        let p = tip.translation.vector;
        let mut j = PosJacobian::zeros();
        for (i, f) in frames.iter().enumerate() {
            j.set_column(i, &f.axis.cross(&(p - f.origin)));
        }
        j
    }

    /// Full spatial Jacobian (linear rows on top, angular rows below).
    pub fn spatial_jacobian(&self, q: &JointVec) -> SpatialJacobian {
        let (frames, tip) = self.joint_frames(q);
        let p = tip.translation.vector;
        let mut j = SpatialJacobian::zeros();
        for (i, f) in frames.iter().enumerate() {
            let lin = f.axis.cross(&(p - f.origin));
            let ang = f.axis.into_inner();
            for r in 0..3 {
                j[(r, i)] = lin[r];
                j[(r + 3, i)] = ang[r];
            }
        }
        j
    }

    /// True if `q` is inside the position limits, within `tol`.
    pub fn within_position_limits(&self, q: &JointVec, tol: f64) -> bool {
        (0..7).all(|i| q[i] >= self.q_min[i] - tol && q[i] <= self.q_max[i] + tol)
    }

    /// True if `qd` is inside the velocity limits, within `tol`.
    pub fn within_velocity_limits(&self, qd: &JointVec, tol: f64) -> bool {
        (0..7).all(|i| qd[i].abs() <= self.qd_max[i] + tol)
    }

    /// Clamp a configuration into the position limits.
    pub fn clamp_to_limits(&self, q: &JointVec) -> JointVec {
        let mut out = *q;
        for i in 0..7 {
            out[i] = out[i].clamp(self.q_min[i], self.q_max[i]);
        }
        out
    }
}

/// Moore–Penrose pseudoinverse `Jᵀ(JJᵀ)⁻¹` of a full-row-rank position
/// Jacobian, computed through the SVD for numerical stability.
pub fn pseudoinverse(j: &PosJacobian) -> Result<SMatrix<f64, 7, 3>, KinematicsError> {
    let svd = j.svd(true, true);
    let smin = svd.singular_values.min();
    if smin < SINGULARITY_TOL {
        return Err(KinematicsError::SingularConfiguration(smin));
    }
    let u = svd.u.as_ref().expect("svd requested u");
    let v_t = svd.v_t.as_ref().expect("svd requested v_t");
    // pinv = V Σ⁻¹ Uᵀ
    let mut sinv = Matrix3::zeros();
    for i in 0..3 {
        sinv[(i, i)] = 1.0 / svd.singular_values[i];
    }
    Ok(v_t.transpose() * sinv * u.transpose())
}

/// Orthonormal basis of the null space of an `m×7` matrix with full row
/// rank `m`, as the columns of a `7×(7−m)` matrix.
///
/// Computed from the symmetric eigendecomposition of the null-space
/// projector `I − A⁺A`, whose eigenvalues split cleanly into 0 and 1.
fn null_space_dyn(a: &DMatrix<f64>) -> Result<DMatrix<f64>, KinematicsError> {
    let m = a.nrows();
    let n = a.ncols();
    debug_assert!(m < n);
    let svd = a.clone().svd(true, true);
    let smin = svd
        .singular_values
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    if smin < SINGULARITY_TOL {
        return Err(KinematicsError::SingularConfiguration(smin));
    }
    let pinv = svd.pseudo_inverse(SINGULARITY_TOL).expect("rank checked");
    let mut proj = DMatrix::<f64>::identity(n, n) - pinv * a;
    // Symmetrize before the eigendecomposition to keep it well posed.
    let projt = proj.transpose();
    proj = (proj + projt) * 0.5;
    let eig = proj.clone().symmetric_eigen();
    let mut cols: Vec<usize> = (0..n).filter(|&i| eig.eigenvalues[i] > 0.5).collect();
    cols.sort_by(|&i, &j| {
        eig.eigenvalues[j]
            .partial_cmp(&eig.eigenvalues[i])
            .expect("eigenvalues are finite")
    });
    let mut basis = DMatrix::<f64>::zeros(n, cols.len());
    for (k, &i) in cols.iter().enumerate() {
        basis.set_column(k, &eig.eigenvectors.column(i));
    }
    // The eigensolver can hand back inaccurate vectors inside the
    // degenerate eigenvalue-1 cluster. One pass through the (numerically
    // exact) projector strips any row-space contamination, and a thin QR
    // restores orthonormality.
    let polished = proj * basis;
    let q = polished.qr().q();
    debug_assert!((a * &q).amax() < 1e-9, "null basis leaks into the row space");
    Ok(q)
}

/// Orthonormal basis (7×4) of the position-Jacobian null space.
pub fn null_space_basis(j: &PosJacobian) -> Result<NullBasis, KinematicsError> {
    let dynamic = DMatrix::from_fn(3, 7, |r, c| j[(r, c)]);
    let b = null_space_dyn(&dynamic)?;
    debug_assert_eq!(b.ncols(), 4);
    Ok(NullBasis::from_fn(|r, c| b[(r, c)]))
}

/// Orthonormal basis (7×1) of the full spatial-Jacobian null space.
pub fn null_space_full(j: &SpatialJacobian) -> Result<SVector<f64, 7>, KinematicsError> {
    let dynamic = DMatrix::from_fn(6, 7, |r, c| j[(r, c)]);
    let b = null_space_dyn(&dynamic)?;
    debug_assert_eq!(b.ncols(), 1);
    Ok(SVector::<f64, 7>::from_fn(|r, _| b[(r, 0)]))
}

/// Orthonormal basis (7×5) of the null space of a 2×7 matrix; used by the
/// max-velocity linear program to parameterize motions that keep the
/// Cartesian velocity on a given line.
pub fn null_space_2x7(a: &SMatrix<f64, 2, 7>) -> Result<SMatrix<f64, 7, 5>, KinematicsError> {
    let dynamic = DMatrix::from_fn(2, 7, |r, c| a[(r, c)]);
    let b = null_space_dyn(&dynamic)?;
    debug_assert_eq!(b.ncols(), 5);
    Ok(SMatrix::<f64, 7, 5>::from_fn(|r, c| b[(r, c)]))
}

/// Manipulability `sqrt(det(J Jᵀ))` of a position Jacobian; 0 at (or
/// numerically past) a singularity.
pub fn manipulability(j: &PosJacobian) -> f64 {
    let g = j * j.transpose();
    let det = g.determinant();
    if det > 0.0 {
        det.sqrt()
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::Translation3;

    /// A planar two-link arm with unit links embedded in a 7-joint chain:
    /// joints 3..7 carry zero-length links and rotate about axes that do not
    /// move the tool point at zero angle.
    fn planar_two_link() -> KinematicChain {
        let zlink = Isometry3::identity();
        let xlink = Isometry3::from_parts(Translation3::new(1.0, 0.0, 0.0), UnitQuaternion::identity());
        let joints = [
            Joint::new(zlink, Vector3::z()).unwrap(),
            Joint::new(xlink, Vector3::z()).unwrap(),
            Joint::new(zlink, Vector3::z()).unwrap(),
            Joint::new(zlink, Vector3::z()).unwrap(),
            Joint::new(zlink, Vector3::z()).unwrap(),
            Joint::new(zlink, Vector3::z()).unwrap(),
            Joint::new(zlink, Vector3::z()).unwrap(),
        ];
        let lim = JointVec::repeat(3.0);
        KinematicChain::new(
            Isometry3::identity(),
            xlink,
            joints,
            -lim,
            lim,
            JointVec::repeat(2.0),
        )
        .unwrap()
    }

    #[test]
    fn planar_two_link_elbow_straight_up() {
        let chain = planar_two_link();
        let mut q = JointVec::zeros();
        q[0] = std::f64::consts::FRAC_PI_2;
        let p = chain.tool_position(&q);
        assert_relative_eq!(p, Vector3::new(0.0, 2.0, 0.0), epsilon = 1e-12);
    }

    #[test]
    fn planar_jacobian_first_column_is_lever_arm() {
        let chain = planar_two_link();
        let mut q = JointVec::zeros();
        q[0] = std::f64::consts::FRAC_PI_2;
        let j = chain.position_jacobian(&q);
        // Tool at (0, 2, 0), joint 1 at the origin about z: column is
        // z × (0,2,0) = (-2, 0, 0).
        assert_relative_eq!(
            Vector3::from(j.column(0)),
            Vector3::new(-2.0, 0.0, 0.0),
            epsilon = 1e-12
        );
    }

    #[test]
    fn null_space_is_orthonormal_and_annihilated() {
        let chain = crate::config::default_chain();
        let q = JointVec::from_row_slice(&[0.3, 0.7, -0.4, -1.2, 0.5, 0.9, -0.2]);
        let j = chain.position_jacobian(&q);
        let e = null_space_basis(&j).unwrap();
        let gram = e.transpose() * e;
        assert_relative_eq!(gram, SMatrix::<f64, 4, 4>::identity(), epsilon = 1e-10);
        assert!(
            (j * e).abs().max() < 1e-10,
            "J·E must vanish, got max {:.3e}",
            (j * e).abs().max()
        );
    }

    #[test]
    fn pseudoinverse_satisfies_penrose_identities() {
        let chain = crate::config::default_chain();
        let q = JointVec::from_row_slice(&[0.1, 0.8, 0.2, -1.0, -0.3, 1.1, 0.4]);
        let j = chain.position_jacobian(&q);
        let pinv = pseudoinverse(&j).unwrap();
        assert_relative_eq!(j * pinv * j, j, epsilon = 1e-10);
        assert_relative_eq!(pinv * j * pinv, pinv, epsilon = 1e-10);
        assert_relative_eq!(j * pinv, Matrix3::identity(), epsilon = 1e-10);
    }

    #[test]
    fn straightened_planar_arm_is_singular() {
        // All joints at zero: the planar arm is fully stretched along x and
        // every z-axis column is parallel to y, so the Jacobian has rank 2.
        let chain = planar_two_link();
        let q = JointVec::zeros();
        let j = chain.position_jacobian(&q);
        match pseudoinverse(&j) {
            Err(KinematicsError::SingularConfiguration(s)) => {
                assert!(s < SINGULARITY_TOL)
            }
            other => panic!("expected singular configuration, got {other:?}"),
        }
    }

    #[test]
    fn spatial_null_space_is_one_dimensional() {
        let chain = crate::config::default_chain();
        let q = JointVec::from_row_slice(&[0.3, 0.7, -0.4, -1.2, 0.5, 0.9, -0.2]);
        let j = chain.spatial_jacobian(&q);
        let e = null_space_full(&j).unwrap();
        assert_relative_eq!(e.norm(), 1.0, epsilon = 1e-10);
        assert!((j * e).abs().max() < 1e-10);
    }

    #[test]
    fn manipulability_is_zero_when_singular() {
        // A planar chain never spans z, so its 3-row position Jacobian is
        // rank-deficient at every configuration.
        let chain = planar_two_link();
        assert_eq!(manipulability(&chain.position_jacobian(&JointVec::zeros())), 0.0);
        let mut q = JointVec::zeros();
        q[1] = 0.8;
        assert_eq!(manipulability(&chain.position_jacobian(&q)), 0.0);
        // A spatial chain scores positive away from its stretched pose.
        let chain = crate::config::default_chain();
        assert!(manipulability(&chain.position_jacobian(&JointVec::zeros())) < 1e-6);
        q[3] = -1.2;
        assert!(manipulability(&chain.position_jacobian(&q)) > 1e-3);
    }

    #[test]
    fn limit_validation_rejects_bad_intervals() {
        let chain = planar_two_link();
        let mut q_min = *chain.q_min();
        q_min[3] = 5.0;
        let err = KinematicChain::new(
            *chain.base(),
            *chain.tool(),
            chain.joints().clone(),
            q_min,
            *chain.q_max(),
            *chain.qd_max(),
        )
        .unwrap_err();
        assert!(matches!(err, KinematicsError::EmptyLimitInterval { index: 3, .. }));
    }
}
