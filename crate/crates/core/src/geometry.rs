//! Points, plane-rotation orientations and oriented hyperboxes.
//!
//! Boxes are closed: a point on the boundary is contained. All containment
//! and orthogonality checks use the absolute tolerance [`GEOM_TOL`].

use crate::error::{Error, Result};

/// Largest dimension the fixed-size scratch buffers can hold.
pub const HARD_MAX_DIM: usize = 8;

/// Absolute tolerance for containment and orthogonality checks.
pub const GEOM_TOL: f64 = 1e-9;

/// A location in d-dimensional Euclidean space.
#[derive(Clone, Debug, PartialEq)]
pub struct Point(Vec<f64>);

impl Point {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::ZeroDimension);
        }
        if coords.len() > HARD_MAX_DIM {
            return Err(Error::DimensionTooLarge {
                dim: coords.len(),
                max: HARD_MAX_DIM,
            });
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("point coordinates"));
        }
        Ok(Point(coords))
    }

    pub fn origin(dim: usize) -> Result<Self> {
        Point::new(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.0
    }

    pub fn dist2(&self, other: &Point) -> f64 {
        dist2(&self.0, &other.0)
    }
}

impl std::ops::Index<usize> for Point {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

pub(crate) fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Builds `G(1,2)(θ1) · G(2,3)(θ2) · … · G(d-1,d)(θ_{d-1})` as a row-major
/// `d × d` matrix. Each factor rotates its coordinate plane by `θ`, so a
/// single quarter turn in the plane (1,2) maps `e1` onto `e2`.
pub fn rotation_matrix(dim: usize, angles: &[f64]) -> Result<Vec<f64>> {
    if dim == 0 {
        return Err(Error::ZeroDimension);
    }
    if angles.len() + 1 != dim {
        return Err(Error::DimensionMismatch {
            expected: dim - 1,
            got: angles.len(),
        });
    }
    if angles.iter().any(|a| !a.is_finite()) {
        return Err(Error::NonFinite("rotation angles"));
    }
    let mut m = vec![0.0; dim * dim];
    for i in 0..dim {
        m[i * dim + i] = 1.0;
    }
    for (j, &theta) in angles.iter().enumerate() {
        if theta == 0.0 {
            continue;
        }
        let (s, c) = theta.sin_cos();
        for r in 0..dim {
            let a = m[r * dim + j];
            let b = m[r * dim + j + 1];
            m[r * dim + j] = a * c + b * s;
            m[r * dim + j + 1] = b * c - a * s;
        }
    }
    Ok(m)
}

/// An orientation of the coordinate frame, parameterized by `d - 1` plane
/// angles composed as consecutive Givens rotations.
#[derive(Clone, Debug, PartialEq)]
pub struct Rotation {
    angles: Vec<f64>,
    matrix: Vec<f64>,
    identity: bool,
}

impl Rotation {
    pub fn identity(dim: usize) -> Self {
        Rotation::from_angles(dim, &vec![0.0; dim.saturating_sub(1)])
            .expect("identity rotation is always valid")
    }

    pub fn from_angles(dim: usize, angles: &[f64]) -> Result<Self> {
        let matrix = rotation_matrix(dim, angles)?;
        Ok(Rotation {
            angles: angles.to_vec(),
            matrix,
            identity: angles.iter().all(|&a| a == 0.0),
        })
    }

    pub fn dim(&self) -> usize {
        self.angles.len() + 1
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    /// Row-major matrix entries.
    pub fn matrix(&self) -> &[f64] {
        &self.matrix
    }

    pub fn is_identity(&self) -> bool {
        self.identity
    }

    /// `out = R · x`
    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        let d = self.dim();
        if self.identity {
            out[..d].copy_from_slice(&x[..d]);
            return;
        }
        for (r, o) in out.iter_mut().enumerate().take(d) {
            *o = dot(&self.matrix[r * d..(r + 1) * d], &x[..d]);
        }
    }

    /// `out = Rᵀ · x`
    pub fn apply_transpose(&self, x: &[f64], out: &mut [f64]) {
        let d = self.dim();
        if self.identity {
            out[..d].copy_from_slice(&x[..d]);
            return;
        }
        for (c, o) in out.iter_mut().enumerate().take(d) {
            *o = (0..d).map(|r| self.matrix[r * d + c] * x[r]).sum();
        }
    }
}

/// A hyperbox given by a center, local half side lengths and an orientation.
/// A point `x` lies in the box iff `|Rᵀ(x − center)|_i ≤ half_extents[i]`.
#[derive(Clone, Debug, PartialEq)]
pub struct OrientedBox {
    center: Point,
    half_extents: Vec<f64>,
    rotation: Rotation,
}

impl OrientedBox {
    pub fn new(center: Point, half_extents: Vec<f64>, rotation: Rotation) -> Result<Self> {
        let d = center.dim();
        if half_extents.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: half_extents.len(),
            });
        }
        if rotation.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: rotation.dim(),
            });
        }
        if half_extents.iter().any(|h| !h.is_finite()) {
            return Err(Error::NonFinite("half extents"));
        }
        if half_extents.iter().any(|&h| h <= 0.0) {
            return Err(Error::InvalidParameter {
                name: "half_extents",
                reason: "must be positive".into(),
            });
        }
        Ok(OrientedBox {
            center,
            half_extents,
            rotation,
        })
    }

    pub fn axis_aligned(center: Point, half_extents: Vec<f64>) -> Result<Self> {
        let d = center.dim();
        OrientedBox::new(center, half_extents, Rotation::identity(d))
    }

    pub fn dim(&self) -> usize {
        self.center.dim()
    }

    pub fn center(&self) -> &Point {
        &self.center
    }

    pub fn half_extents(&self) -> &[f64] {
        &self.half_extents
    }

    pub fn rotation(&self) -> &Rotation {
        &self.rotation
    }

    pub fn volume(&self) -> f64 {
        self.half_extents.iter().map(|h| 2.0 * h).product()
    }

    /// Length of the main diagonal.
    pub fn diagonal(&self) -> f64 {
        2.0 * norm(&self.half_extents)
    }

    /// Coordinates of `x` in the box frame, relative to its center.
    pub fn local_coords(&self, x: &[f64], out: &mut [f64]) {
        let d = self.dim();
        let mut rel = [0.0; HARD_MAX_DIM];
        for i in 0..d {
            rel[i] = x[i] - self.center[i];
        }
        self.rotation.apply_transpose(&rel[..d], out);
    }

    /// World coordinates of a point given in the box frame.
    pub fn world_coords(&self, local: &[f64], out: &mut [f64]) {
        let d = self.dim();
        self.rotation.apply(local, out);
        for i in 0..d {
            out[i] += self.center[i];
        }
    }

    pub fn contains(&self, x: &Point) -> Result<bool> {
        if x.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.dim(),
            });
        }
        Ok(self.contains_coords(x.coords()))
    }

    pub(crate) fn contains_coords(&self, x: &[f64]) -> bool {
        let d = self.dim();
        let mut y = [0.0; HARD_MAX_DIM];
        self.local_coords(x, &mut y);
        (0..d).all(|i| y[i].abs() <= self.half_extents[i] + GEOM_TOL)
    }

    /// Same center and orientation, half extents multiplied by `s`.
    pub fn scale(&self, s: f64) -> Result<Self> {
        if !(s > 0.0) || !s.is_finite() {
            return Err(Error::InvalidParameter {
                name: "scale",
                reason: format!("must be positive and finite, got {s}"),
            });
        }
        Ok(OrientedBox {
            center: self.center.clone(),
            half_extents: self.half_extents.iter().map(|h| h * s).collect(),
            rotation: self.rotation.clone(),
        })
    }

    /// Same center and extents under a different orientation.
    pub fn with_rotation(&self, rotation: Rotation) -> Result<Self> {
        OrientedBox::new(self.center.clone(), self.half_extents.clone(), rotation)
    }

    /// The `2^d` children obtained by bisecting every local axis. Child `c`
    /// lies on the upper side of axis `j` iff bit `j` of `c` is set.
    pub fn subdivide(&self) -> Vec<OrientedBox> {
        let d = self.dim();
        let half: Vec<f64> = self.half_extents.iter().map(|h| h / 2.0).collect();
        (0..1usize << d)
            .map(|c| {
                let local: Vec<f64> = (0..d)
                    .map(|j| if c >> j & 1 == 1 { half[j] } else { -half[j] })
                    .collect();
                let mut world = vec![0.0; d];
                self.world_coords(&local, &mut world);
                OrientedBox {
                    center: Point(world),
                    half_extents: half.clone(),
                    rotation: self.rotation.clone(),
                }
            })
            .collect()
    }

    /// Index of the child holding `x` under the half-open convention: along
    /// each local axis the lower child is `[-h, 0)` and the upper `[0, h]`.
    pub fn child_index(&self, x: &[f64]) -> usize {
        let d = self.dim();
        let mut y = [0.0; HARD_MAX_DIM];
        self.local_coords(x, &mut y);
        (0..d).filter(|&j| y[j] >= 0.0).map(|j| 1 << j).sum()
    }

    /// All `2^d` corners in world coordinates.
    pub fn corners(&self) -> Vec<Point> {
        let d = self.dim();
        (0..1usize << d)
            .map(|c| {
                let local: Vec<f64> = (0..d)
                    .map(|j| {
                        if c >> j & 1 == 1 {
                            self.half_extents[j]
                        } else {
                            -self.half_extents[j]
                        }
                    })
                    .collect();
                let mut world = vec![0.0; d];
                self.world_coords(&local, &mut world);
                Point(world)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn pt(c: &[f64]) -> Point {
        Point::new(c.to_vec()).unwrap()
    }

    fn mat_mul_t(m: &[f64], d: usize) -> Vec<f64> {
        // Mᵀ M
        let mut out = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                out[i * d + j] = (0..d).map(|k| m[k * d + i] * m[k * d + j]).sum();
            }
        }
        out
    }

    fn det(m: &[f64], d: usize) -> f64 {
        let mut a = m.to_vec();
        let mut det = 1.0;
        for col in 0..d {
            let piv = (col..d)
                .max_by(|&x, &y| a[x * d + col].abs().total_cmp(&a[y * d + col].abs()))
                .unwrap();
            if a[piv * d + col] == 0.0 {
                return 0.0;
            }
            if piv != col {
                for k in 0..d {
                    a.swap(piv * d + k, col * d + k);
                }
                det = -det;
            }
            det *= a[col * d + col];
            for r in col + 1..d {
                let f = a[r * d + col] / a[col * d + col];
                for k in col..d {
                    a[r * d + k] -= f * a[col * d + k];
                }
            }
        }
        det
    }

    #[test]
    fn zero_angles_give_exact_identity() {
        let m = rotation_matrix(2, &[0.0]).unwrap();
        assert_eq!(m, vec![1.0, 0.0, 0.0, 1.0]);
        let r = Rotation::identity(4);
        assert!(r.is_identity());
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(r.matrix()[i * 4 + j], if i == j { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn quarter_turn_maps_e1_to_e2() {
        let r = Rotation::from_angles(2, &[FRAC_PI_2]).unwrap();
        let mut out = [0.0; 2];
        r.apply(&[1.0, 0.0], &mut out);
        assert!((out[0]).abs() < 1e-12 && (out[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn three_d_first_plane_only() {
        let r = Rotation::from_angles(3, &[FRAC_PI_2, 0.0]).unwrap();
        let mut out = [0.0; 3];
        r.apply(&[1.0, 0.0, 0.0], &mut out);
        assert!(out[0].abs() < 1e-12 && (out[1] - 1.0).abs() < 1e-12 && out[2].abs() < 1e-12);
        r.apply(&[0.0, 0.0, 1.0], &mut out);
        assert_eq!(out, [0.0, 0.0, 1.0]);
    }

    #[test]
    fn wrong_angle_count_is_rejected() {
        assert!(matches!(
            rotation_matrix(3, &[0.1]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn containment_examples() {
        let unit = OrientedBox::axis_aligned(pt(&[0.0, 0.0]), vec![1.0, 1.0]).unwrap();
        assert!(unit.contains(&pt(&[0.0, 0.0])).unwrap());
        assert!(unit.contains(&pt(&[1.0, 1.0])).unwrap());
        assert!(!unit.contains(&pt(&[1.1, 0.0])).unwrap());
        assert!(unit.contains(&pt(&[0.0, 0.0, 0.0])).is_err());

        let thin = OrientedBox::new(
            pt(&[0.0, 0.0]),
            vec![1.0, 0.1],
            Rotation::from_angles(2, &[FRAC_PI_2]).unwrap(),
        )
        .unwrap();
        assert!(!thin.contains(&pt(&[0.5, 0.0])).unwrap());
        assert!(thin.contains(&pt(&[0.0, 0.5])).unwrap());
    }

    #[test]
    fn scale_and_volume() {
        let b = OrientedBox::axis_aligned(pt(&[0.3, 0.2]), vec![0.5, 0.5]).unwrap();
        assert_eq!(b.scale(1.0).unwrap(), b);
        let b2 = b.scale(2.0).unwrap();
        assert_eq!(b2.half_extents(), &[1.0, 1.0]);
        assert_eq!(b2.volume(), 4.0 * b.volume());
        assert!(b.scale(0.0).is_err());
        assert!(b.scale(-1.0).is_err());

        let cube = OrientedBox::axis_aligned(pt(&[0.0; 3]), vec![0.5; 3]).unwrap();
        assert_eq!(cube.volume(), 1.0);
        let rect = OrientedBox::axis_aligned(pt(&[0.0; 2]), vec![1.0, 0.5]).unwrap();
        assert_eq!(rect.volume(), 2.0);
        let turned = rect
            .with_rotation(Rotation::from_angles(2, &[0.7]).unwrap())
            .unwrap();
        assert_eq!(turned.volume(), 2.0);
    }

    #[test]
    fn subdivide_one_d() {
        let b = OrientedBox::axis_aligned(pt(&[1.0]), vec![1.0]).unwrap();
        let kids = b.subdivide();
        assert_eq!(kids.len(), 2);
        assert_eq!(kids[0].center().coords(), &[0.5]);
        assert_eq!(kids[1].center().coords(), &[1.5]);
        assert_eq!(kids[0].half_extents(), &[0.5]);
        // [0,2] split at 1: 0.5 goes left, 1.0 goes right.
        assert_eq!(b.child_index(&[0.5]), 0);
        assert_eq!(b.child_index(&[1.0]), 1);
        assert_eq!(b.child_index(&[2.0]), 1);
    }

    #[test]
    fn subdivide_unit_square() {
        let b = OrientedBox::axis_aligned(pt(&[0.5, 0.5]), vec![0.5, 0.5]).unwrap();
        let kids = b.subdivide();
        assert_eq!(kids.len(), 4);
        for k in &kids {
            assert_eq!(k.volume(), 0.25);
        }
        assert_eq!(kids[3].center().coords(), &[0.75, 0.75]);
    }

    fn arb_rotated_box(d: usize) -> impl Strategy<Value = OrientedBox> {
        (
            prop::collection::vec(-5.0..5.0f64, d),
            prop::collection::vec(0.05..3.0f64, d),
            prop::collection::vec(0.0..PI, d - 1),
        )
            .prop_map(move |(c, h, a)| {
                OrientedBox::new(
                    Point::new(c).unwrap(),
                    h,
                    Rotation::from_angles(d, &a).unwrap(),
                )
                .unwrap()
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn rotation_is_orthogonal_with_unit_det(
            angles in prop::collection::vec(0.0..PI, 1..6usize)
        ) {
            let d = angles.len() + 1;
            let m = rotation_matrix(d, &angles).unwrap();
            let mtm = mat_mul_t(&m, d);
            for i in 0..d {
                for j in 0..d {
                    let want = if i == j { 1.0 } else { 0.0 };
                    prop_assert!((mtm[i * d + j] - want).abs() < 1e-9);
                }
            }
            prop_assert!((det(&m, d) - 1.0).abs() < 1e-9);
        }

        #[test]
        fn rotation_is_an_isometry(
            angles in prop::collection::vec(0.0..PI, 1..6usize),
            seed in prop::collection::vec(-10.0..10.0f64, 7),
        ) {
            let d = angles.len() + 1;
            let r = Rotation::from_angles(d, &angles).unwrap();
            let x = &seed[..d];
            let mut y = vec![0.0; d];
            r.apply(x, &mut y);
            prop_assert!((norm(x) - norm(&y)).abs() < 1e-9);
        }

        #[test]
        fn children_volumes_sum_to_parent(b in arb_rotated_box(3)) {
            let total: f64 = b.subdivide().iter().map(|c| c.volume()).sum();
            prop_assert!((total - b.volume()).abs() < 1e-9 * b.volume().max(1.0));
        }

        #[test]
        fn sample_points_land_in_exactly_one_child(
            b in arb_rotated_box(3),
            u in prop::collection::vec(-1.0..1.0f64, 3),
        ) {
            let local: Vec<f64> = u.iter().zip(b.half_extents()).map(|(t, h)| t * h).collect();
            let mut x = vec![0.0; 3];
            b.world_coords(&local, &mut x);
            let kids = b.subdivide();
            let idx = b.child_index(&x);
            prop_assert!(kids[idx].contains_coords(&x));
            // Strict interiors of the other children exclude x.
            let strict = kids.iter().enumerate().filter(|(i, k)| {
                let mut y = [0.0; HARD_MAX_DIM];
                k.local_coords(&x, &mut y);
                *i != idx && (0..3).all(|j| y[j].abs() < k.half_extents()[j] - 1e-9)
            }).count();
            prop_assert_eq!(strict, 0);
        }

        #[test]
        fn scaling_up_preserves_containment(
            b in arb_rotated_box(2),
            u in prop::collection::vec(-1.0..1.0f64, 2),
            s in 1.0..4.0f64,
        ) {
            let local: Vec<f64> = u.iter().zip(b.half_extents()).map(|(t, h)| t * h).collect();
            let mut x = vec![0.0; 2];
            b.world_coords(&local, &mut x);
            prop_assert!(b.contains_coords(&x));
            prop_assert!(b.scale(s).unwrap().contains_coords(&x));
            prop_assert!(b.scale(s + 0.5).unwrap().contains_coords(&x));
        }
    }
}
