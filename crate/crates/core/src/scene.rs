//! Synthetic scenes of fronto-parallel textured planes with exact depth and
//! pose, rendered in the second view by per-plane homographies.

use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fog::{synthesize_haze, transmission_from_depth, FogParams};
use crate::image::{CameraIntrinsics, DepthMap, ImageBuffer, TransmissionMap};
use crate::se3::PoseSE3;

/// Seeded multi-octave value noise.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TextureSpec {
    pub seed: u64,
    pub octaves: u32,
    /// Peak deviation from mid-gray, in `[0, 1]`.
    pub contrast: f64,
    /// Lattice spacing of the coarsest octave, in view-1 pixels.
    pub cell: f64,
}

impl Default for TextureSpec {
    fn default() -> Self {
        Self {
            seed: 0,
            octaves: 3,
            contrast: 0.8,
            cell: 16.0,
        }
    }
}

/// Axis-aligned rectangle `[x0, x1) x [y0, y1)` in view-1 pixels.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Region {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Region {
    pub fn contains(&self, u: f64, v: f64) -> bool {
        u >= self.x0 && u < self.x1 && v >= self.y0 && v < self.y1
    }
}

/// A fronto-parallel plane at `depth` meters in view 1. Without a region the
/// plane is unbounded.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlaneSpec {
    pub depth: f64,
    #[serde(default)]
    pub texture: TextureSpec,
    #[serde(default)]
    pub region: Option<Region>,
}

/// Smooth multiplicative field in `[1 - amplitude, 1 + amplitude]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LocalField {
    pub seed: u64,
    /// Lattice spacing in pixels.
    pub scale: f64,
    pub amplitude: f64,
}

impl Default for LocalField {
    fn default() -> Self {
        Self {
            seed: 0,
            scale: 32.0,
            amplitude: 0.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IlluminationSpec {
    pub global_gain: f64,
    pub global_bias: f64,
    pub local_field: Option<LocalField>,
}

impl Default for IlluminationSpec {
    fn default() -> Self {
        Self {
            global_gain: 1.0,
            global_bias: 0.0,
            local_field: None,
        }
    }
}

impl IlluminationSpec {
    pub fn validate(&self) -> Result<()> {
        let field_ok = self.local_field.is_none_or(|f| f.scale.is_finite() && f.scale > 0.0 && (0.0..1.0).contains(&f.amplitude));
        if !(self.global_gain.is_finite() && self.global_gain > 0.0 && self.global_bias.is_finite() && field_ok) {
            return Err(Error::InvalidSpec(format!("illumination {self:?}")));
        }
        Ok(())
    }
}

/// Rotation vector (radians) and translation (meters).
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PoseSpec {
    pub rotation: [f64; 3],
    pub translation: [f64; 3],
}

impl PoseSpec {
    pub fn to_pose(&self) -> PoseSE3 {
        PoseSE3::from_axis_angle(self.rotation, self.translation)
    }
}

/// A two-view scene. The first plane is the background and must be
/// unbounded; `relative_pose` maps view-1 coordinates to view-2
/// coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSpec {
    pub width: usize,
    pub height: usize,
    /// Defaults to a centered camera with focal length `0.8 * width`.
    #[serde(default)]
    pub intrinsics: Option<CameraIntrinsics>,
    pub planes: Vec<PlaneSpec>,
    #[serde(default)]
    pub relative_pose: PoseSpec,
    /// Applied to the second image only.
    #[serde(default)]
    pub illumination: Option<IlluminationSpec>,
    #[serde(default)]
    pub fog: Option<FogParams>,
}

pub const DEFAULT_FOCAL_FACTOR: f64 = 0.8;

impl SceneSpec {
    pub fn intrinsics(&self) -> CameraIntrinsics {
        self.intrinsics
            .unwrap_or_else(|| CameraIntrinsics::centered(self.width, self.height, DEFAULT_FOCAL_FACTOR))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidSpec(m));
        if self.width < 2 || self.height < 2 {
            return bad(format!("size {}x{}", self.width, self.height));
        }
        self.intrinsics().validate().map_err(|e| Error::InvalidSpec(e.to_string()))?;
        match self.planes.first() {
            None => return bad("no planes".into()),
            Some(p) if p.region.is_some() => return bad("the first (background) plane must not have a region".into()),
            _ => {}
        }
        for p in &self.planes {
            let t = &p.texture;
            if !(p.depth.is_finite() && p.depth > 0.0) {
                return bad(format!("plane depth {}", p.depth));
            }
            if !(0.0..=1.0).contains(&t.contrast) || !(t.cell.is_finite() && t.cell > 0.0) || t.octaves == 0 {
                return bad(format!("texture {t:?}"));
            }
            if let Some(r) = p.region {
                if !(r.x0 < r.x1 && r.y0 < r.y1) {
                    return bad(format!("empty region {r:?}"));
                }
            }
        }
        let pose = &self.relative_pose;
        if pose.rotation.iter().chain(&pose.translation).any(|v| !v.is_finite()) {
            return bad(format!("pose {pose:?}"));
        }
        if let Some(i) = &self.illumination {
            i.validate()?;
        }
        if let Some(f) = &self.fog {
            f.validate().map_err(|e| Error::InvalidSpec(e.to_string()))?;
        }
        Ok(())
    }

    /// A seeded test scene: a background plane at 8 to 15 m, optionally a
    /// nearer rectangle at 35 to 60 % of that depth, translation of 0.1
    /// times the background depth in a random direction and a rotation of
    /// at most 2 degrees about a random axis.
    pub fn random(seed: u64, width: usize, height: usize, two_plane: bool) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let far = rng.gen_range(8.0..15.0);
        let texture = |rng: &mut ChaCha8Rng| TextureSpec {
            seed: rng.gen(),
            ..TextureSpec::default()
        };
        let mut planes = vec![PlaneSpec {
            depth: far,
            texture: texture(&mut rng),
            region: None,
        }];
        if two_plane {
            let (w, h) = (width as f64, height as f64);
            let x0 = rng.gen_range(0.15..0.4) * w;
            let y0 = rng.gen_range(0.15..0.4) * h;
            planes.push(PlaneSpec {
                depth: far * rng.gen_range(0.35..0.6),
                texture: texture(&mut rng),
                region: Some(Region {
                    x0,
                    y0,
                    x1: x0 + rng.gen_range(0.3..0.45) * w,
                    y1: y0 + rng.gen_range(0.3..0.45) * h,
                }),
            });
        }
        let dir = unit(&mut rng);
        let axis = unit(&mut rng);
        let angle = rng.gen_range(0.0..2.0f64).to_radians();
        Self {
            width,
            height,
            intrinsics: None,
            planes,
            relative_pose: PoseSpec {
                rotation: axis.map(|a| a * angle),
                translation: dir.map(|d| d * 0.1 * far),
            },
            illumination: None,
            fog: None,
        }
    }
}

fn unit(rng: &mut ChaCha8Rng) -> [f64; 3] {
    loop {
        let v: [f64; 3] = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 0.1 && n <= 1.0 {
            return v.map(|x| x / n);
        }
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn lattice(seed: u64, ix: i64, iy: i64) -> f64 {
    let h = splitmix(seed ^ splitmix((ix as u64).wrapping_mul(0x1_0000_0001) ^ splitmix(iy as u64)));
    (h >> 11) as f64 / (1u64 << 53) as f64
}

fn quintic(t: f64) -> f64 {
    t * t * t * (t * (t * 6.0 - 15.0) + 10.0)
}

/// Smoothly interpolated lattice noise in `[0, 1]`.
pub fn value_noise(seed: u64, x: f64, y: f64, cell: f64) -> f64 {
    let (gx, gy) = (x / cell, y / cell);
    let (fx0, fy0) = (gx.floor(), gy.floor());
    let (ix, iy) = (fx0 as i64, fy0 as i64);
    let (sx, sy) = (quintic(gx - fx0), quintic(gy - fy0));
    let top = lattice(seed, ix, iy) * (1.0 - sx) + lattice(seed, ix + 1, iy) * sx;
    let bottom = lattice(seed, ix, iy + 1) * (1.0 - sx) + lattice(seed, ix + 1, iy + 1) * sx;
    top * (1.0 - sy) + bottom * sy
}

/// Texture value of channel `c` at view-1 position `(u, v)`.
pub fn texture_value(t: &TextureSpec, c: usize, u: f64, v: f64) -> f64 {
    let (mut sum, mut norm, mut amp, mut cell) = (0.0, 0.0, 1.0, t.cell);
    for o in 0..t.octaves {
        let seed = splitmix(t.seed ^ splitmix(((c as u64) << 32) | o as u64));
        sum += amp * value_noise(seed, u, v, cell);
        norm += amp;
        amp *= 0.5;
        cell *= 0.5;
    }
    0.5 + t.contrast * (sum / norm - 0.5)
}

/// Both views of a scene with their depths and the exact relative pose.
#[derive(Clone, Debug, PartialEq)]
pub struct ScenePair {
    pub image1: ImageBuffer,
    pub image2: ImageBuffer,
    pub depth1: DepthMap,
    pub depth2: DepthMap,
    /// Maps view-1 coordinates to view-2 coordinates.
    pub pose_gt: PoseSE3,
    pub intrinsics: CameraIntrinsics,
    /// View-1 pixels whose scene point is seen in view 2.
    pub covisible: Vec<bool>,
}

/// Render both views. View 1 evaluates each plane's texture directly; view
/// 2 maps every pixel back onto each plane through the plane-induced
/// homography and keeps the nearest hit. Illumination and fog in the spec
/// are not applied here.
pub fn render_scene_pair(spec: &SceneSpec) -> Result<ScenePair> {
    spec.validate()?;
    let k = spec.intrinsics();
    let pose = spec.relative_pose.to_pose();
    let (w, h) = (spec.width, spec.height);
    let (image1, depth1, plane1) = render_view(spec, &k, &Matrix3::identity(), &Vector3::zeros());
    let (image2, depth2) = if spec.relative_pose == PoseSpec::default() {
        (image1.clone(), depth1.clone())
    } else {
        // view-1 point: X1 = R^T (X2 - t)
        let rt = pose.rotation().transpose();
        let rt_t = rt * pose.translation();
        let (img, d, _) = render_view(spec, &k, &rt, &rt_t);
        (img, d)
    };
    let covisible = covisibility(spec, &k, &pose, &depth1, &plane1);
    Ok(ScenePair {
        covisible,
        image1,
        image2,
        depth1: DepthMap::new(w, h, depth1)?,
        depth2: DepthMap::new(w, h, depth2)?,
        pose_gt: pose,
        intrinsics: k,
    })
}

/// Nearest plane hit by the view ray `ray`, whose view-1 points are
/// `rt (s ray) - rt_t`: `(s, plane, u1, v1)`.
fn nearest_hit(spec: &SceneSpec, k: &CameraIntrinsics, rt: &Matrix3<f64>, rt_t: &Vector3<f64>, ray: Vector3<f64>) -> Option<(f64, usize, f64, f64)> {
    let r1 = rt * ray;
    if r1.z <= 0.0 {
        return None;
    }
    let mut best: Option<(f64, usize, f64, f64)> = None;
    for (i, p) in spec.planes.iter().enumerate() {
        let s = (p.depth + rt_t.z) / r1.z;
        if s <= 0.0 {
            continue;
        }
        let x1 = r1 * s - rt_t;
        let (u, v) = k.project([x1.x, x1.y, x1.z]);
        if p.region.is_some_and(|r| !r.contains(u, v)) {
            continue;
        }
        if best.is_none_or(|b| s < b.0) {
            best = Some((s, i, u, v));
        }
    }
    best
}

/// Render a view whose rays `r` reach view-1 points `rt (s r) - rt_t`.
/// Returns the image, the depth and the plane seen at each pixel.
fn render_view(spec: &SceneSpec, k: &CameraIntrinsics, rt: &Matrix3<f64>, rt_t: &Vector3<f64>) -> (ImageBuffer, Vec<f64>, Vec<usize>) {
    let (w, h) = (spec.width, spec.height);
    let identity = rt.is_identity(0.0) && rt_t.iter().all(|v| *v == 0.0);
    let mut data = vec![0.0; w * h * 3];
    let mut depth = vec![0.0; w * h];
    let mut plane = vec![0; w * h];
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let (s, p, u, v) = if identity {
                // view 1 sees each plane at its own depth and position exactly
                let (x, y) = (x as f64, y as f64);
                spec.planes
                    .iter()
                    .enumerate()
                    .filter(|(_, p)| p.region.is_none_or(|r| r.contains(x, y)))
                    .map(|(j, p)| (p.depth, j, x, y))
                    .fold((f64::INFINITY, 0, x, y), |a, b| if b.0 < a.0 { b } else { a })
            } else {
                let ray = Vector3::from(k.backproject(x as f64, y as f64));
                // the unbounded background is behind the camera only for
                // rotations far beyond any supported scene
                nearest_hit(spec, k, rt, rt_t, ray).unwrap_or((f64::INFINITY, 0, x as f64, y as f64))
            };
            depth[i] = s;
            plane[i] = p;
            for c in 0..3 {
                data[i * 3 + c] = texture_value(&spec.planes[p].texture, c, u, v).clamp(0.0, 1.0);
            }
        }
    }
    (ImageBuffer::new(w, h, 3, data).expect("sized buffer"), depth, plane)
}

/// For each view-1 pixel, whether its scene point projects inside view 2
/// and is not hidden there by a nearer plane.
fn covisibility(spec: &SceneSpec, k: &CameraIntrinsics, pose: &PoseSE3, depth1: &[f64], plane1: &[usize]) -> Vec<bool> {
    let (w, h) = (spec.width, spec.height);
    let rt = pose.rotation().transpose();
    let rt_t = rt * pose.translation();
    (0..w * h)
        .map(|i| {
            let ray = k.backproject((i % w) as f64, (i / w) as f64);
            let x2 = pose.transform_point(ray.map(|r| r * depth1[i]));
            if x2[2] <= 1e-3 {
                return false;
            }
            let (u, v) = k.project(x2);
            if !(u >= 0.0 && u <= (w - 1) as f64 && v >= 0.0 && v <= (h - 1) as f64) {
                return false;
            }
            let ray2 = Vector3::new(x2[0] / x2[2], x2[1] / x2[2], 1.0);
            nearest_hit(spec, k, &rt, &rt_t, ray2).is_some_and(|hit| hit.1 == plane1[i])
        })
        .collect()
}

/// `clamp(gain * I * field + bias)`, with `field` the seeded smooth local
/// gain. Fails when more than half of the values would clamp.
pub fn apply_illumination(image: &ImageBuffer, spec: &IlluminationSpec) -> Result<ImageBuffer> {
    spec.validate()?;
    let field = |x: usize, y: usize| match spec.local_field {
        Some(f) if f.amplitude > 0.0 => 1.0 + f.amplitude * (2.0 * value_noise(f.seed, x as f64, y as f64, f.scale) - 1.0),
        _ => 1.0,
    };
    let mut clamped = 0usize;
    let out = ImageBuffer::from_fn(image.width(), image.height(), image.channels(), |x, y, c| {
        let v = spec.global_gain * image.get(x, y, c) * field(x, y) + spec.global_bias;
        if !(0.0..=1.0).contains(&v) {
            clamped += 1;
        }
        v.clamp(0.0, 1.0)
    });
    if 2 * clamped > image.data().len() {
        return Err(Error::InvalidSpec(format!(
            "illumination clamps {clamped} of {} values",
            image.data().len()
        )));
    }
    Ok(out)
}

/// A scene pair after fog synthesis, with the true transmission of each
/// view.
#[derive(Clone, Debug, PartialEq)]
pub struct FoggyPair {
    pub clear: ScenePair,
    pub foggy1: ImageBuffer,
    pub foggy2: ImageBuffer,
    pub t1: TransmissionMap,
    pub t2: TransmissionMap,
    pub fog: FogParams,
}

/// Render, then fog both views with `spec.fog` (no fog when absent).
/// Illumination, if any, is applied to the second clear view first.
pub fn make_foggy_pair(spec: &SceneSpec) -> Result<FoggyPair> {
    let mut clear = render_scene_pair(spec)?;
    if let Some(ill) = &spec.illumination {
        clear.image2 = apply_illumination(&clear.image2, ill)?;
    }
    let fog = spec.fog.unwrap_or(FogParams {
        airlight: [1.0; 3],
        beta: 0.0,
    });
    let t1 = transmission_from_depth(&clear.depth1, fog.beta)?;
    let t2 = transmission_from_depth(&clear.depth2, fog.beta)?;
    let (foggy1, foggy2) = if fog.beta == 0.0 {
        (clear.image1.clone(), clear.image2.clone())
    } else {
        (synthesize_haze(&clear.image1, &t1, &fog)?, synthesize_haze(&clear.image2, &t2, &fog)?)
    };
    Ok(FoggyPair {
        clear,
        foggy1,
        foggy2,
        t1,
        t2,
        fog,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::warp::reconstruct_view;

    fn single(depth: f64, pose: PoseSpec) -> SceneSpec {
        SceneSpec {
            width: 64,
            height: 48,
            intrinsics: None,
            planes: vec![PlaneSpec {
                depth,
                texture: TextureSpec::default(),
                region: None,
            }],
            relative_pose: pose,
            illumination: None,
            fog: None,
        }
    }

    #[test]
    fn identity_pose_copies_view() {
        let p = render_scene_pair(&SceneSpec::random(3, 48, 40, true)).unwrap();
        let mut spec = SceneSpec::random(3, 48, 40, true);
        spec.relative_pose = PoseSpec::default();
        let q = render_scene_pair(&spec).unwrap();
        assert_eq!(q.image1, q.image2);
        assert_eq!(p.image1, q.image1);
    }

    #[test]
    fn z_translation_is_central_scaling() {
        // moving 1 m toward a plane at 10 m magnifies by 10/9 about the center
        let spec = single(10.0, PoseSpec {
            rotation: [0.0; 3],
            translation: [0.0, 0.0, -1.0],
        });
        let pair = render_scene_pair(&spec).unwrap();
        let k = pair.intrinsics;
        let t = &spec.planes[0].texture;
        for (x, y) in [(5usize, 7usize), (40, 30), (60, 2)] {
            let u = k.cx + (x as f64 - k.cx) * 0.9;
            let v = k.cy + (y as f64 - k.cy) * 0.9;
            for c in 0..3 {
                assert!((pair.image2.get(x, y, c) - texture_value(t, c, u, v)).abs() < 1e-12);
            }
            assert!((pair.depth2.get(x, y) - 9.0).abs() < 1e-12);
        }
    }

    #[test]
    fn renderer_agrees_with_warp() {
        for seed in 0..6 {
            let spec = SceneSpec::random(seed, 64, 48, seed % 2 == 1);
            let pair = render_scene_pair(&spec).unwrap();
            let view = reconstruct_view(&pair.image2, &pair.depth1, &pair.pose_gt, &pair.intrinsics).unwrap();
            let (mut sum, mut n) = (0.0, 0);
            for (i, ok) in view.valid.iter().enumerate() {
                if *ok && pair.covisible[i] {
                    for c in 0..3 {
                        sum += (view.image.data()[i * 3 + c] - pair.image1.data()[i * 3 + c]).abs();
                        n += 1;
                    }
                }
            }
            assert!(sum / (n as f64) < 0.01, "seed {seed}: {}", sum / n as f64);
        }
    }

    #[test]
    fn near_plane_parallax_is_four_times_far() {
        let near = Region {
            x0: 20.0,
            y0: 16.0,
            x1: 44.0,
            y1: 32.0,
        };
        let mut spec = single(20.0, PoseSpec {
            rotation: [0.0; 3],
            translation: [0.2, 0.0, 0.0],
        });
        spec.planes.push(PlaneSpec {
            depth: 5.0,
            texture: TextureSpec {
                seed: 9,
                ..TextureSpec::default()
            },
            region: Some(near),
        });
        let pair = render_scene_pair(&spec).unwrap();
        let f = pair.intrinsics.fx;
        // view-2 depth equals view-1 depth under lateral motion; shifts are
        // f t / Z pixels
        assert_eq!(pair.depth1.get(30, 20), 5.0);
        assert_eq!(pair.depth1.get(2, 2), 20.0);
        let (far_shift, near_shift) = (f * 0.2 / 20.0, f * 0.2 / 5.0);
        assert!((near_shift / far_shift - 4.0).abs() < 1e-12);
        // a far pixel moves by far_shift: sampling view 1 texture there
        let t = &spec.planes[0].texture;
        let x2 = 4usize;
        let u1 = x2 as f64 - far_shift;
        assert!((pair.image2.get(x2, 40, 0) - texture_value(t, 0, u1, 40.0)).abs() < 1e-12);
        let tn = &spec.planes[1].texture;
        let x2 = 30usize;
        let u1 = x2 as f64 - near_shift;
        assert!((pair.image2.get(x2, 24, 1) - texture_value(tn, 1, u1, 24.0)).abs() < 1e-12);
    }

    #[test]
    fn illumination_arithmetic() {
        let img = ImageBuffer::filled(8, 8, 3, 0.5);
        let same = apply_illumination(&img, &IlluminationSpec::default()).unwrap();
        assert_eq!(same, img);
        let brighter = apply_illumination(
            &img,
            &IlluminationSpec {
                global_gain: 1.2,
                ..IlluminationSpec::default()
            },
        )
        .unwrap();
        assert!(brighter.data().iter().all(|v| (v - 0.6).abs() < 1e-15));
        let washed = IlluminationSpec {
            global_gain: 3.0,
            ..IlluminationSpec::default()
        };
        assert!(matches!(apply_illumination(&img, &washed), Err(Error::InvalidSpec(_))));
    }

    #[test]
    fn local_field_bounds() {
        let f = LocalField {
            seed: 4,
            scale: 10.0,
            amplitude: 0.3,
        };
        for i in 0..500 {
            let v = 1.0 + f.amplitude * (2.0 * value_noise(f.seed, i as f64 * 0.37, i as f64 * 0.91, f.scale) - 1.0);
            assert!((0.7..=1.3).contains(&v));
        }
    }

    #[test]
    fn fog_on_scene() {
        let mut spec = single(20.0, PoseSpec::default());
        spec.planes.push(PlaneSpec {
            depth: 4.0,
            texture: TextureSpec {
                seed: 1,
                ..TextureSpec::default()
            },
            region: Some(Region {
                x0: 0.0,
                y0: 0.0,
                x1: 32.0,
                y1: 48.0,
            }),
        });
        let none = make_foggy_pair(&spec).unwrap();
        assert_eq!(none.foggy1, none.clear.image1);
        spec.fog = Some(FogParams::gray(1.0, 0.05).unwrap());
        let p = make_foggy_pair(&spec).unwrap();
        assert!((p.t1.get(50, 10) - (-1.0f64).exp()).abs() < 1e-15);
        // contrast: spread of intensities on each plane
        let spread = |x0: usize, x1: usize| {
            let v: Vec<f64> = (x0..x1).flat_map(|x| (0..48).map(move |y| (x, y))).map(|(x, y)| p.foggy1.get(x, y, 0)).collect();
            let m = v.iter().sum::<f64>() / v.len() as f64;
            (v.iter().map(|a| (a - m).powi(2)).sum::<f64>() / v.len() as f64).sqrt()
        };
        let clear_spread = |x0: usize, x1: usize| {
            let v: Vec<f64> = (x0..x1).flat_map(|x| (0..48).map(move |y| (x, y))).map(|(x, y)| p.clear.image1.get(x, y, 0)).collect();
            let m = v.iter().sum::<f64>() / v.len() as f64;
            (v.iter().map(|a| (a - m).powi(2)).sum::<f64>() / v.len() as f64).sqrt()
        };
        assert!(spread(32, 64) / clear_spread(32, 64) < spread(0, 32) / clear_spread(0, 32));
    }

    #[test]
    fn invalid_specs() {
        let mut s = single(10.0, PoseSpec::default());
        s.planes[0].region = Some(Region {
            x0: 0.0,
            y0: 0.0,
            x1: 1.0,
            y1: 1.0,
        });
        assert!(matches!(render_scene_pair(&s), Err(Error::InvalidSpec(_))));
        let mut s = single(-1.0, PoseSpec::default());
        assert!(render_scene_pair(&s).is_err());
        s.planes.clear();
        assert!(render_scene_pair(&s).is_err());
    }
}
