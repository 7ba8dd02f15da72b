//! Part-labeled tabletop objects built from primitives, and standard layouts.
//!
//! World frame: z up, table top at z = 0. Objects are placed by table
//! position `(x, y)` and yaw about world z.

use std::f64::consts::FRAC_PI_2;

use nalgebra::{Matrix3, Vector3};

use super::shape::Shape;
use super::types::{CameraSetup, PartPrimitive, SceneDescription, SceneObject};
use super::CameraIntrinsics;
use crate::geometry::RigidTransform;
use crate::scalar::Real;

pub const TABLE_COLOR: [u8; 3] = [150, 120, 90];
pub const WALL_COLOR: [u8; 3] = [200, 200, 195];

fn v<T: Real>(x: f64, y: f64, z: f64) -> Vector3<T> {
    Vector3::new(T::lit(x), T::lit(y), T::lit(z))
}

/// Local pose that lays a cylinder's axis along local x.
fn lying<T: Real>(x: f64, y: f64, z: f64) -> RigidTransform<T> {
    RigidTransform::from_axis_angle(Vector3::y(), T::lit(FRAC_PI_2), v(x, y, z))
}

fn upright<T: Real>(x: f64, y: f64, z: f64) -> RigidTransform<T> {
    RigidTransform::from_translation(v(x, y, z))
}

fn part<T: Real>(name: &str, shape: Shape<T>, pose: RigidTransform<T>, color: [u8; 3]) -> PartPrimitive<T> {
    PartPrimitive {
        part_name: name.to_string(),
        shape,
        pose,
        color,
    }
}

fn cyl<T: Real>(radius: f64, height: f64) -> Shape<T> {
    Shape::Cylinder {
        radius: T::lit(radius),
        height: T::lit(height),
    }
}

fn cuboid<T: Real>(hx: f64, hy: f64, hz: f64) -> Shape<T> {
    Shape::Box {
        half_extents: [T::lit(hx), T::lit(hy), T::lit(hz)],
    }
}

/// Object kinds the catalog can build.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Hammer,
    Pen,
    Cup,
    Mug,
    Screwdriver,
    Bottle,
    Block,
    Ball,
    Knife,
}

impl Kind {
    pub const ALL: [Kind; 9] = [
        Kind::Hammer,
        Kind::Pen,
        Kind::Cup,
        Kind::Mug,
        Kind::Screwdriver,
        Kind::Bottle,
        Kind::Block,
        Kind::Ball,
        Kind::Knife,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Kind::Hammer => "hammer",
            Kind::Pen => "pen",
            Kind::Cup => "cup",
            Kind::Mug => "mug",
            Kind::Screwdriver => "screwdriver",
            Kind::Bottle => "bottle",
            Kind::Block => "block",
            Kind::Ball => "ball",
            Kind::Knife => "knife",
        }
    }

    /// Parts in their local object frame (origin on the table below the object center).
    pub fn parts<T: Real>(self) -> Vec<PartPrimitive<T>> {
        match self {
            Kind::Hammer => vec![
                part("handle", cyl(0.012, 0.22), lying(0.0, 0.0, 0.012), [200, 160, 60]),
                part("head", cyl(0.016, 0.1), RigidTransform::from_axis_angle(Vector3::x(), T::lit(FRAC_PI_2), v(0.125, 0.0, 0.016)), [90, 90, 100]),
            ],
            Kind::Pen => vec![part("body", cyl(0.0075, 0.14), lying(0.0, 0.0, 0.0075), [30, 60, 200])],
            Kind::Cup => vec![
                part("body", cyl(0.035, 0.09), upright(0.0, 0.0, 0.045), [230, 230, 240]),
                part("handle", cuboid(0.009, 0.005, 0.025), upright(0.044, 0.0, 0.05), [210, 80, 80]),
            ],
            Kind::Mug => vec![
                part("body", cyl(0.04, 0.1), upright(0.0, 0.0, 0.05), [60, 160, 90]),
                part("handle", cuboid(0.011, 0.006, 0.03), upright(0.051, 0.0, 0.055), [40, 120, 60]),
            ],
            Kind::Screwdriver => vec![
                part("handle", cyl(0.014, 0.1), lying(-0.05, 0.0, 0.014), [220, 50, 40]),
                part("shaft", cyl(0.003, 0.09), lying(0.045, 0.0, 0.014), [170, 170, 180]),
            ],
            Kind::Bottle => vec![
                part("body", cyl(0.03, 0.18), upright(0.0, 0.0, 0.09), [80, 180, 220]),
                part("cap", cyl(0.013, 0.025), upright(0.0, 0.0, 0.1925), [250, 250, 250]),
            ],
            Kind::Block => vec![part("body", cuboid(0.025, 0.025, 0.025), upright(0.0, 0.0, 0.025), [240, 200, 40])],
            Kind::Ball => vec![part(
                "body",
                Shape::Sphere { radius: T::lit(0.03) },
                upright(0.0, 0.0, 0.03),
                [240, 120, 30],
            )],
            Kind::Knife => vec![
                part("handle", cuboid(0.05, 0.011, 0.009), upright(-0.05, 0.0, 0.009), [50, 30, 20]),
                part("blade", cuboid(0.06, 0.012, 0.002), upright(0.06, 0.0, 0.009), [190, 190, 200]),
            ],
        }
    }

    /// Nominal footprint radius on the table, for layout spacing.
    pub fn footprint(self) -> f64 {
        match self {
            Kind::Hammer => 0.15,
            Kind::Pen => 0.075,
            Kind::Cup => 0.055,
            Kind::Mug => 0.065,
            Kind::Screwdriver => 0.1,
            Kind::Bottle => 0.035,
            Kind::Block => 0.04,
            Kind::Ball => 0.035,
            Kind::Knife => 0.12,
        }
    }
}

/// Places an object on the table at `(x, y)` rotated by `yaw` radians.
pub fn place<T: Real>(kind: Kind, name: &str, x: f64, y: f64, yaw: f64) -> SceneObject<T> {
    let world = RigidTransform::from_axis_angle(Vector3::z(), T::lit(yaw), v(x, y, 0.0));
    SceneObject {
        name: name.to_string(),
        parts: kind
            .parts()
            .into_iter()
            .map(|mut p| {
                p.pose = world.compose(&p.pose);
                p
            })
            .collect(),
    }
}

/// Table plane at z = 0.
pub fn table<T: Real>(half_x: f64, half_y: f64) -> PartPrimitive<T> {
    part(
        "table",
        Shape::Plane {
            half_extents: [T::lit(half_x), T::lit(half_y)],
        },
        RigidTransform::identity(),
        TABLE_COLOR,
    )
}

/// Vertical wall in the plane `y = y0`, standing on the table.
pub fn wall<T: Real>(y0: f64, half_width: f64, height: f64) -> PartPrimitive<T> {
    // local z -> world -y, local x -> world x, local y -> world z
    let rot = Matrix3::from_columns(&[Vector3::x(), Vector3::z(), -Vector3::y()]);
    part(
        "wall",
        Shape::Plane {
            half_extents: [T::lit(half_width), T::lit(height / 2.0)],
        },
        RigidTransform::new(rot, v(0.0, y0, height / 2.0)),
        WALL_COLOR,
    )
}

/// Camera at `eye` looking at `target`, with default desk intrinsics.
pub fn camera<T: Real>(eye: [f64; 3], target: [f64; 3]) -> CameraSetup<T> {
    CameraSetup {
        intrinsics: CameraIntrinsics::desk_default(),
        pose: RigidTransform::look_at(
            v(eye[0], eye[1], eye[2]),
            v(target[0], target[1], target[2]),
            Vector3::z(),
        ),
    }
}

/// Standard desk camera: 0.55 m above the table, looking down and forward.
pub fn desk_camera<T: Real>() -> CameraSetup<T> {
    camera([0.0, -0.35, 0.55], [0.0, 0.05, 0.0])
}

/// Tabletop with a hammer, pen, cup, screwdriver and mug in front of a wall.
pub fn desktop_scene<T: Real>() -> SceneDescription<T> {
    SceneDescription {
        camera: desk_camera(),
        objects: vec![
            place(Kind::Hammer, "hammer", -0.12, 0.02, 0.3),
            place(Kind::Pen, "pen", 0.12, -0.08, -0.4),
            place(Kind::Cup, "cup", 0.14, 0.12, 0.0),
            place(Kind::Screwdriver, "screwdriver", -0.1, -0.12, -0.2),
            place(Kind::Mug, "mug", 0.0, 0.2, 2.2),
        ],
        background: vec![table(0.6, 0.5), wall(0.3, 0.6, 0.4)],
        seed: 7,
    }
}
