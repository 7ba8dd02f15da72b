//! Rigid transforms and small vector helpers.

use nalgebra::{Matrix3, Point3, Unit, UnitQuaternion, Vector3};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::scalar::Real;

/// Rotation + translation mapping local coordinates into a parent frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform<T: Real> {
    pub rotation: Matrix3<T>,
    pub translation: Vector3<T>,
}

/// Tolerance for orthonormality checks, widened for single precision.
pub fn rigidity_tolerance<T: Real>() -> T {
    let eps = T::default_epsilon() * T::lit(64.0);
    if eps > T::lit(1e-9) {
        eps
    } else {
        T::lit(1e-9)
    }
}

impl<T: Real> RigidTransform<T> {
    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn new(rotation: Matrix3<T>, translation: Vector3<T>) -> Self {
        Self {
            rotation,
            translation,
        }
    }

    pub fn from_translation(t: Vector3<T>) -> Self {
        Self::new(Matrix3::identity(), t)
    }

    /// Rotation of `angle` radians about `axis`, then translation.
    pub fn from_axis_angle(axis: Vector3<T>, angle: T, translation: Vector3<T>) -> Self {
        let q = UnitQuaternion::from_axis_angle(&Unit::new_normalize(axis), angle);
        Self::new(q.to_rotation_matrix().into_inner(), translation)
    }

    /// Camera-to-world pose for a camera at `eye` looking at `target`
    /// (x right, y down, z forward).
    pub fn look_at(eye: Vector3<T>, target: Vector3<T>, world_up: Vector3<T>) -> Self {
        let forward = (target - eye).normalize();
        let right = forward.cross(&world_up).normalize();
        let down = forward.cross(&right);
        Self::new(Matrix3::from_columns(&[right, down, forward]), eye)
    }

    /// True if the rotation is orthonormal with determinant +1 within
    /// [`rigidity_tolerance`].
    pub fn is_rigid(&self) -> bool {
        is_rotation(&self.rotation)
    }

    #[inline]
    pub fn apply(&self, p: &Vector3<T>) -> Vector3<T> {
        self.rotation * p + self.translation
    }

    #[inline]
    pub fn apply_point(&self, p: &Point3<T>) -> Point3<T> {
        Point3::from(self.apply(&p.coords))
    }

    #[inline]
    pub fn rotate(&self, v: &Vector3<T>) -> Vector3<T> {
        self.rotation * v
    }

    /// Maps parent-frame coordinates back into the local frame.
    #[inline]
    pub fn apply_inverse(&self, p: &Vector3<T>) -> Vector3<T> {
        self.rotation.tr_mul(&(p - self.translation))
    }

    #[inline]
    pub fn rotate_inverse(&self, v: &Vector3<T>) -> Vector3<T> {
        self.rotation.tr_mul(v)
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        Self::new(rt, -(rt * self.translation))
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &Self) -> Self {
        Self::new(
            self.rotation * other.rotation,
            self.rotation * other.translation + self.translation,
        )
    }

    pub fn cast<U: Real>(&self) -> RigidTransform<U> {
        RigidTransform {
            rotation: self.rotation.map(|v| U::lit(v.as_f64())),
            translation: self.translation.map(|v| U::lit(v.as_f64())),
        }
    }
}

pub fn is_rotation<T: Real>(r: &Matrix3<T>) -> bool {
    let tol = rigidity_tolerance::<T>();
    let gram = r.transpose() * r - Matrix3::identity();
    gram.iter().all(|v| v.abs() <= tol) && (r.determinant() - T::one()).abs() <= tol
}

/// Any unit vector orthogonal to `v`.
pub fn any_orthogonal<T: Real>(v: &Vector3<T>) -> Vector3<T> {
    let candidate = if v.x.abs() < T::lit(0.9) {
        Vector3::x()
    } else {
        Vector3::y()
    };
    (candidate - v * v.dot(&candidate)).normalize()
}

#[derive(Serialize, Deserialize)]
struct TransformRepr<T> {
    /// Column-major 3×3.
    rotation: [T; 9],
    translation: [T; 3],
}

impl<T: Real> Serialize for RigidTransform<T> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut rotation = [T::zero(); 9];
        rotation.copy_from_slice(self.rotation.as_slice());
        TransformRepr {
            rotation,
            translation: [self.translation.x, self.translation.y, self.translation.z],
        }
        .serialize(s)
    }
}

impl<'de, T: Real> Deserialize<'de> for RigidTransform<T> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let repr = TransformRepr::<T>::deserialize(d)?;
        Ok(Self::new(
            Matrix3::from_column_slice(&repr.rotation),
            Vector3::from_column_slice(&repr.translation),
        ))
    }
}
