//! TOML scene files.
//!
//! ```toml
//! [camera]
//! position = [0.0, 0.0, 0.0]
//! look_at = [0.0, 0.0, 1.0]
//! up = [0.0, 1.0, 0.0]        # optional, default +Y
//! fov_degrees = 60.0
//!
//! [materials.shell]
//! diffuse = [0.5, 0.5, 0.5]
//! specular = [0.0, 0.0, 0.0]  # optional
//! roughness = 1.0             # optional
//! emission = [1.0, 1.0, 1.0]  # optional
//!
//! [[objects]]
//! type = "sphere"             # sphere | quad | mesh
//! name = "enclosure"          # optional, needed as an animation target
//! material = "shell"
//! center = [0.0, 0.0, 0.0]
//! radius = 1.0
//! inward = true
//!
//! [[animations]]
//! name = "pulse"
//! target = "enclosure"
//! keyframes = [
//!   { time = 0.0, emission_scale = 1.0 },
//!   { time = 2.0, translation = [0.0, 0.1, 0.0], rotation_degrees = [0.0, 45.0, 0.0], emission_scale = 0.0 },
//! ]
//! ```
//!
//! Quads take `origin`, `edge_u`, `edge_v` and `flip`; meshes take
//! `vertices`, `triangles` (index triples) and `flip`. Emitters radiate
//! towards `edge_u × edge_v` (quads), counter-clockwise front faces
//! (meshes) or outwards (spheres, unless `inward`); `flip` reverses this.
//! Keyframes are interpolated linearly and held outside their time range;
//! rotations are XYZ Euler angles applied about the origin before the
//! translation.

use std::collections::BTreeMap;
use std::path::Path;

use glam::{DMat3, DVec3, EulerRot};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::math::Rgb;
use crate::tracer::{Camera, Material, Primitive, Scene, SceneError, Shape};

type V3 = [f64; 3];

fn default_up() -> V3 {
    [0.0, 1.0, 0.0]
}

fn one() -> f64 {
    1.0
}

fn is_false(b: &bool) -> bool {
    !*b
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraDesc {
    pub position: V3,
    pub look_at: V3,
    #[serde(default = "default_up")]
    pub up: V3,
    pub fov_degrees: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialDesc {
    pub diffuse: V3,
    #[serde(default)]
    pub specular: V3,
    #[serde(default = "one")]
    pub roughness: f64,
    #[serde(default)]
    pub emission: V3,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum ObjectDesc {
    Sphere {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        name: Option<String>,
        material: String,
        center: V3,
        radius: f64,
        #[serde(default, skip_serializing_if = "is_false")]
        inward: bool,
    },
    Quad {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        name: Option<String>,
        material: String,
        origin: V3,
        edge_u: V3,
        edge_v: V3,
        #[serde(default, skip_serializing_if = "is_false")]
        flip: bool,
    },
    Mesh {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        name: Option<String>,
        material: String,
        vertices: Vec<V3>,
        triangles: Vec<[usize; 3]>,
        #[serde(default, skip_serializing_if = "is_false")]
        flip: bool,
    },
}

impl ObjectDesc {
    pub fn name(&self) -> Option<&str> {
        match self {
            ObjectDesc::Sphere { name, .. } | ObjectDesc::Quad { name, .. } | ObjectDesc::Mesh { name, .. } => {
                name.as_deref()
            }
        }
    }

    pub fn material(&self) -> &str {
        match self {
            ObjectDesc::Sphere { material, .. }
            | ObjectDesc::Quad { material, .. }
            | ObjectDesc::Mesh { material, .. } => material,
        }
    }

    fn shapes(&self, index: usize) -> Result<Vec<Shape>, SceneFileError> {
        let v = DVec3::from_array;
        Ok(match self {
            ObjectDesc::Sphere {
                center, radius, inward, ..
            } => vec![Shape::Sphere {
                center: v(*center),
                radius: *radius,
                inward: *inward,
            }],
            ObjectDesc::Quad {
                origin,
                edge_u,
                edge_v,
                flip,
                ..
            } => vec![Shape::Quad {
                origin: v(*origin),
                edge_u: v(*edge_u),
                edge_v: v(*edge_v),
                flip: *flip,
            }],
            ObjectDesc::Mesh {
                vertices,
                triangles,
                flip,
                ..
            } => {
                if triangles.is_empty() {
                    return Err(SceneFileError::Mesh(index, "no triangles".into()));
                }
                triangles
                    .iter()
                    .map(|t| {
                        let get = |i: usize| {
                            vertices
                                .get(i)
                                .map(|p| v(*p))
                                .ok_or_else(|| SceneFileError::Mesh(index, format!("vertex index {i} out of range")))
                        };
                        Ok::<_, SceneFileError>(Shape::Triangle {
                            a: get(t[0])?,
                            b: get(t[1])?,
                            c: get(t[2])?,
                            flip: *flip,
                        })
                    })
                    .collect::<Result<Vec<_>, _>>()?
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Keyframe {
    pub time: f64,
    #[serde(default)]
    pub translation: V3,
    #[serde(default)]
    pub rotation_degrees: V3,
    #[serde(default = "one")]
    pub emission_scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnimationDesc {
    pub name: String,
    pub target: String,
    pub keyframes: Vec<Keyframe>,
}

impl AnimationDesc {
    /// Interpolated `(rotation, translation, emission scale)` at `time`.
    fn sample(&self, time: f64) -> (DMat3, DVec3, f64) {
        let k = &self.keyframes;
        let idx = k.partition_point(|f| f.time <= time);
        let (a, b, s) = if idx == 0 {
            (&k[0], &k[0], 0.0)
        } else if idx == k.len() {
            (&k[idx - 1], &k[idx - 1], 0.0)
        } else {
            let (a, b) = (&k[idx - 1], &k[idx]);
            (a, b, (time - a.time) / (b.time - a.time))
        };
        let lerp = |x: V3, y: V3| DVec3::from_array(x).lerp(DVec3::from_array(y), s);
        let r = lerp(a.rotation_degrees, b.rotation_degrees);
        let rotation = DMat3::from_euler(EulerRot::XYZ, r.x.to_radians(), r.y.to_radians(), r.z.to_radians());
        let translation = lerp(a.translation, b.translation);
        let emission = a.emission_scale + (b.emission_scale - a.emission_scale) * s;
        (rotation, translation, emission)
    }
}

/// Parsed scene file; [`build`](Self::build) produces the renderable scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneDescription {
    pub camera: CameraDesc,
    pub materials: BTreeMap<String, MaterialDesc>,
    pub objects: Vec<ObjectDesc>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub animations: Vec<AnimationDesc>,
}

#[derive(Debug, Error)]
pub enum SceneFileError {
    #[error("cannot read scene file: {0}")]
    Io(#[from] std::io::Error),
    #[error("scene file: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("cannot serialize scene: {0}")]
    Serialize(#[from] toml::ser::Error),
    #[error("object {0} uses unknown material `{1}`")]
    UnknownMaterial(usize, String),
    #[error("material `{0}`: {1}")]
    Material(String, SceneError),
    #[error("object {0}: {1}")]
    Mesh(usize, String),
    #[error("animation `{0}` targets unknown object `{1}`")]
    UnknownTarget(String, String),
    #[error("animation `{0}`: keyframes must be non-empty with finite, increasing times")]
    Keyframes(String),
    #[error(transparent)]
    Scene(#[from] SceneError),
}

impl SceneDescription {
    pub fn parse(text: &str) -> Result<Self, SceneFileError> {
        let desc: SceneDescription = toml::from_str(text)?;
        desc.validate()?;
        Ok(desc)
    }

    pub fn to_toml(&self) -> Result<String, SceneFileError> {
        Ok(toml::to_string(self)?)
    }

    pub fn is_animated(&self) -> bool {
        !self.animations.is_empty()
    }

    fn validate(&self) -> Result<(), SceneFileError> {
        for (name, m) in &self.materials {
            to_material(m)
                .validate()
                .map_err(|e| SceneFileError::Material(name.clone(), e))?;
        }
        for (i, o) in self.objects.iter().enumerate() {
            if !self.materials.contains_key(o.material()) {
                return Err(SceneFileError::UnknownMaterial(i, o.material().to_owned()));
            }
        }
        for a in &self.animations {
            if !self.objects.iter().any(|o| o.name() == Some(a.target.as_str())) {
                return Err(SceneFileError::UnknownTarget(a.name.clone(), a.target.clone()));
            }
            let times_ok = a.keyframes.iter().all(|k| k.time.is_finite())
                && a.keyframes.windows(2).all(|w| w[0].time < w[1].time);
            if a.keyframes.is_empty() || !times_ok {
                return Err(SceneFileError::Keyframes(a.name.clone()));
            }
        }
        Ok(())
    }

    /// The scene at time 0.
    pub fn build(&self) -> Result<Scene, SceneFileError> {
        self.at_time(0.0)
    }

    /// The scene with every animation evaluated at `time`.
    pub fn at_time(&self, time: f64) -> Result<Scene, SceneFileError> {
        self.validate()?;
        let names: Vec<&String> = self.materials.keys().collect();
        let materials: Vec<Material> = self.materials.values().map(to_material).collect();
        let mut primitives = Vec::new();
        for (i, o) in self.objects.iter().enumerate() {
            let material = names.iter().position(|n| n.as_str() == o.material()).unwrap();
            let mut rotation = DMat3::IDENTITY;
            let mut translation = DVec3::ZERO;
            let mut emission_scale = 1.0;
            for a in self.animations.iter().filter(|a| Some(a.target.as_str()) == o.name()) {
                let (r, t, e) = a.sample(time);
                rotation = r * rotation;
                translation = r * translation + t;
                emission_scale *= e;
            }
            for shape in o.shapes(i)? {
                primitives.push(Primitive {
                    shape: shape.transformed(rotation, translation),
                    material,
                    emission_scale,
                });
            }
        }
        let c = &self.camera;
        let camera = Camera {
            position: DVec3::from_array(c.position),
            look_at: DVec3::from_array(c.look_at),
            up: DVec3::from_array(c.up),
            fov_degrees: c.fov_degrees,
        };
        Ok(Scene::new(materials, primitives, camera)?)
    }
}

fn to_material(m: &MaterialDesc) -> Material {
    Material {
        diffuse: Rgb::from_array(m.diffuse),
        specular: Rgb::from_array(m.specular),
        roughness: m.roughness,
        emission: Rgb::from_array(m.emission),
    }
}

pub fn load_scene(path: &Path) -> Result<SceneDescription, SceneFileError> {
    SceneDescription::parse(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    const FURNACE: &str = r#"
[camera]
position = [0.0, 0.0, 0.0]
look_at = [0.0, 0.0, 1.0]
fov_degrees = 60.0

[materials.shell]
diffuse = [0.5, 0.5, 0.5]
emission = [1.0, 1.0, 1.0]

[[objects]]
type = "sphere"
name = "enclosure"
material = "shell"
center = [0.0, 0.0, 0.0]
radius = 1.0
inward = true
"#;

    #[test]
    fn minimal_furnace() {
        let desc = SceneDescription::parse(FURNACE).unwrap();
        assert_eq!(desc.objects.len(), 1);
        let scene = desc.build().unwrap();
        assert_eq!(scene.primitives.len(), 1);
        assert_eq!(scene.camera.up, DVec3::Y);
        assert_eq!(scene, crate::scenes::furnace(0.5, 1.0).unwrap());
    }

    #[test]
    fn energy_conservation_is_checked() {
        let bad = FURNACE.replace("diffuse = [0.5, 0.5, 0.5]", "diffuse = [0.5, 0.5, 0.5]\nspecular = [0.6, 0.0, 0.0]");
        assert!(matches!(
            SceneDescription::parse(&bad),
            Err(SceneFileError::Material(_, SceneError::EnergyConservation(_)))
        ));
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let bad = FURNACE.replace("radius = 1.0", "radius = 1.0\nradii = 2.0");
        let err = SceneDescription::parse(&bad).unwrap_err().to_string();
        assert!(err.contains("radii"), "{err}");
        assert!(err.contains("line"), "{err}");
        let bad = FURNACE.replace("type = \"sphere\"", "type = \"torus\"");
        assert!(SceneDescription::parse(&bad).is_err());
        let bad = FURNACE.replace("fov_degrees", "fov");
        assert!(SceneDescription::parse(&bad).is_err());
    }

    #[test]
    fn unknown_references() {
        let bad = FURNACE.replace("material = \"shell\"", "material = \"metal\"");
        assert!(matches!(SceneDescription::parse(&bad), Err(SceneFileError::UnknownMaterial(0, _))));
        let anim = format!("{FURNACE}\n[[animations]]\nname = \"a\"\ntarget = \"nothing\"\nkeyframes = [{{ time = 0.0 }}]\n");
        assert!(matches!(SceneDescription::parse(&anim), Err(SceneFileError::UnknownTarget(..))));
    }

    fn animated() -> SceneDescription {
        let text = format!(
            "{FURNACE}
[materials.panel]
diffuse = [0.2, 0.3, 0.4]
specular = [0.1, 0.1, 0.1]
roughness = 0.3

[[objects]]
type = \"quad\"
name = \"door\"
material = \"panel\"
origin = [0.0, 0.0, 0.5]
edge_u = [0.2, 0.0, 0.0]
edge_v = [0.0, 0.2, 0.0]

[[objects]]
type = \"mesh\"
material = \"panel\"
vertices = [[0.0, 0.0, 0.8], [0.1, 0.0, 0.8], [0.0, 0.1, 0.8], [0.1, 0.1, 0.8]]
triangles = [[0, 1, 2], [1, 3, 2]]
flip = true

[[animations]]
name = \"slide\"
target = \"door\"
keyframes = [
  {{ time = 0.0 }},
  {{ time = 2.0, translation = [0.2, 0.0, 0.0], rotation_degrees = [0.0, 0.0, 90.0] }},
]

[[animations]]
name = \"dim\"
target = \"enclosure\"
keyframes = [{{ time = 1.0, emission_scale = 1.0 }}, {{ time = 3.0, emission_scale = 0.0 }}]
"
        );
        SceneDescription::parse(&text).unwrap()
    }

    #[test]
    fn roundtrip() {
        let desc = animated();
        let text = desc.to_toml().unwrap();
        let back = SceneDescription::parse(&text).unwrap();
        assert_eq!(back, desc);
        assert_eq!(back.build().unwrap(), desc.build().unwrap());
        let furnace = SceneDescription::parse(FURNACE).unwrap();
        assert_eq!(SceneDescription::parse(&furnace.to_toml().unwrap()).unwrap(), furnace);
    }

    #[test]
    fn keyframes_interpolate_and_hold() {
        let desc = animated();
        let scene = desc.build().unwrap();
        assert_eq!(scene.primitives.len(), 4);
        let door = |s: &Scene| match s.primitives[1].shape {
            Shape::Quad { origin, edge_u, .. } => (origin, edge_u),
            _ => unreachable!(),
        };
        let (o0, u0) = door(&scene);
        assert!((o0 - DVec3::new(0.0, 0.0, 0.5)).length() < 1e-12);
        assert!((u0 - DVec3::new(0.2, 0.0, 0.0)).length() < 1e-12);
        let (o2, u2) = door(&desc.at_time(2.0).unwrap());
        assert!((o2 - DVec3::new(0.2, 0.0, 0.5)).length() < 1e-12);
        assert!((u2 - DVec3::new(0.0, 0.2, 0.0)).length() < 1e-12);
        assert_eq!(door(&desc.at_time(10.0).unwrap()), (o2, u2));
        let (o1, _) = door(&desc.at_time(1.0).unwrap());
        assert!((o1.x - 0.1).abs() < 1e-12);

        assert_eq!(desc.at_time(0.5).unwrap().primitives[0].emission_scale, 1.0);
        assert!((desc.at_time(2.0).unwrap().primitives[0].emission_scale - 0.5).abs() < 1e-12);
        assert_eq!(desc.at_time(5.0).unwrap().primitives[0].emission_scale, 0.0);
    }

    #[test]
    fn mesh_indices_are_checked() {
        let mut desc = animated();
        if let ObjectDesc::Mesh { triangles, .. } = &mut desc.objects[2] {
            triangles.push([0, 1, 9]);
        }
        assert!(matches!(desc.build(), Err(SceneFileError::Mesh(2, _))));
    }
}
