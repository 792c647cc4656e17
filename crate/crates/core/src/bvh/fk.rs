//! Forward kinematics: joint-angle animation to global 3D joint positions.

use super::{Channel, ChannelFrames, PoseSequence, Skeleton};
use crate::{parallel, Tensor2};

/// Rigid transform: rotation matrix plus translation.
#[derive(Debug, Clone, Copy)]
struct Affine {
    rot: [[f64; 3]; 3],
    trans: [f64; 3],
}

impl Affine {
    fn identity() -> Self {
        Affine {
            rot: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            trans: [0.0, 0.0, 0.0],
        }
    }

    fn translation(t: [f64; 3]) -> Self {
        Affine {
            rot: Affine::identity().rot,
            trans: t,
        }
    }

    fn rotation(rot: [[f64; 3]; 3]) -> Self {
        Affine {
            rot,
            trans: [0.0, 0.0, 0.0],
        }
    }

    /// self ∘ other: apply `other` first in the local frame of `self`.
    fn compose(&self, other: &Affine) -> Affine {
        let mut rot = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                rot[i][j] = self.rot[i][0] * other.rot[0][j]
                    + self.rot[i][1] * other.rot[1][j]
                    + self.rot[i][2] * other.rot[2][j];
            }
        }
        let trans = [
            self.rot[0][0] * other.trans[0]
                + self.rot[0][1] * other.trans[1]
                + self.rot[0][2] * other.trans[2]
                + self.trans[0],
            self.rot[1][0] * other.trans[0]
                + self.rot[1][1] * other.trans[1]
                + self.rot[1][2] * other.trans[2]
                + self.trans[1],
            self.rot[2][0] * other.trans[0]
                + self.rot[2][1] * other.trans[1]
                + self.rot[2][2] * other.trans[2]
                + self.trans[2],
        ];
        Affine { rot, trans }
    }
}

fn rot_x(rad: f64) -> [[f64; 3]; 3] {
    let (s, c) = rad.sin_cos();
    [[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]]
}

fn rot_y(rad: f64) -> [[f64; 3]; 3] {
    let (s, c) = rad.sin_cos();
    [[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]]
}

fn rot_z(rad: f64) -> [[f64; 3]; 3] {
    let (s, c) = rad.sin_cos();
    [[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]]
}

fn channel_transform(channel: Channel, value: f64) -> Affine {
    match channel {
        Channel::Xposition => Affine::translation([value, 0.0, 0.0]),
        Channel::Yposition => Affine::translation([0.0, value, 0.0]),
        Channel::Zposition => Affine::translation([0.0, 0.0, value]),
        Channel::Xrotation => Affine::rotation(rot_x(value.to_radians())),
        Channel::Yrotation => Affine::rotation(rot_y(value.to_radians())),
        Channel::Zrotation => Affine::rotation(rot_z(value.to_radians())),
    }
}

/// Global joint positions for every frame.
///
/// Per joint, the local transform is the fixed offset translation followed by
/// the joint's channel transforms in their declared order (intrinsic
/// composition); the global transform chains through the parent. Rotations
/// are converted from degrees inside this function; `frames` keeps raw file
/// values. Positions stay in file units; `unit_scale_to_cm` is carried as
/// metadata.
pub fn forward_kinematics(
    skeleton: &Skeleton,
    frames: &ChannelFrames,
    unit_scale_to_cm: f64,
) -> PoseSequence {
    let n = skeleton.joint_count();
    let frame_count = frames.frame_count();
    let dims = 3 * n;
    let mut positions = Tensor2::zeros(frame_count, dims);
    let work = frame_count * n * 50;
    let values = &frames.values;
    parallel::for_each_chunk_mut(positions.data_mut(), dims, work, |f, row| {
        let frame = values.row(f);
        let mut globals: Vec<Affine> = Vec::with_capacity(n);
        let mut at = 0usize;
        for joint in skeleton.joints() {
            let mut local = Affine::translation(joint.offset);
            for &ch in &joint.channels {
                local = local.compose(&channel_transform(ch, frame[at]));
                at += 1;
            }
            let global = match joint.parent {
                Some(p) => globals[p].compose(&local),
                None => local,
            };
            globals.push(global);
        }
        for (j, g) in globals.iter().enumerate() {
            row[3 * j] = g.trans[0];
            row[3 * j + 1] = g.trans[1];
            row[3 * j + 2] = g.trans[2];
        }
    });
    PoseSequence {
        marker_names: skeleton.marker_names(),
        frame_rate: 1.0 / frames.frame_time,
        unit_scale_to_cm,
        positions,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bvh::parse_bvh;

    fn doc(channels_root: &str, child_offset: &str, motion: &str, frames: usize) -> String {
        format!(
            "HIERARCHY\nROOT Root\n{{\n OFFSET 0 0 0\n CHANNELS 6 {channels_root}\n JOINT Child\n {{\n  OFFSET {child_offset}\n  CHANNELS 3 Zrotation Xrotation Yrotation\n  JOINT Leaf\n  {{\n   OFFSET 0 2 0\n   CHANNELS 3 Zrotation Xrotation Yrotation\n  }}\n }}\n}}\nMOTION\nFrames: {frames}\nFrame Time: 0.01\n{motion}"
        )
    }

    #[test]
    fn zero_rotations_stack_offsets() {
        let text = doc(
            "Xposition Yposition Zposition Zrotation Xrotation Yrotation",
            "1 0 0",
            "0 0 0 0 0 0 0 0 0 0 0 0\n",
            1,
        );
        let (skel, frames) = parse_bvh(&text).unwrap();
        let poses = forward_kinematics(&skel, &frames, 1.0);
        assert_eq!(poses.marker(0, 0), [0.0, 0.0, 0.0]);
        assert_eq!(poses.marker(0, 1), [1.0, 0.0, 0.0]);
        assert_eq!(poses.marker(0, 2), [1.0, 2.0, 0.0]);
    }

    #[test]
    fn root_z_rotation_rotates_child() {
        // Root fixed at origin, child offset (1,0,0), root Zrotation = 90°.
        let text = doc(
            "Xposition Yposition Zposition Zrotation Xrotation Yrotation",
            "1 0 0",
            "0 0 0 90 0 0 0 0 0 0 0 0\n",
            1,
        );
        let (skel, frames) = parse_bvh(&text).unwrap();
        let poses = forward_kinematics(&skel, &frames, 1.0);
        // Independent oracle: explicit rotation matrix applied to the offset.
        let theta = 90f64.to_radians();
        let want = [
            theta.cos() * 1.0 - theta.sin() * 0.0,
            theta.sin() * 1.0 + theta.cos() * 0.0,
            0.0,
        ];
        let got = poses.marker(0, 1);
        for k in 0..3 {
            assert!((got[k] - want[k]).abs() < 1e-9, "axis {k}: {got:?} vs {want:?}");
        }
        assert!((got[0]).abs() < 1e-9 && (got[1] - 1.0).abs() < 1e-9);
    }

    /// Independent 4×4 homogeneous-matrix oracle for a two-level chain.
    fn homogeneous_oracle(
        root_z_deg: f64,
        child_offset: [f64; 3],
        child_z_deg: f64,
        leaf_offset: [f64; 3],
    ) -> [f64; 3] {
        fn matmul4(a: [[f64; 4]; 4], b: [[f64; 4]; 4]) -> [[f64; 4]; 4] {
            let mut out = [[0.0; 4]; 4];
            for i in 0..4 {
                for j in 0..4 {
                    for k in 0..4 {
                        out[i][j] += a[i][k] * b[k][j];
                    }
                }
            }
            out
        }
        fn trans4(t: [f64; 3]) -> [[f64; 4]; 4] {
            [
                [1.0, 0.0, 0.0, t[0]],
                [0.0, 1.0, 0.0, t[1]],
                [0.0, 0.0, 1.0, t[2]],
                [0.0, 0.0, 0.0, 1.0],
            ]
        }
        fn rotz4(deg: f64) -> [[f64; 4]; 4] {
            let r = deg.to_radians();
            [
                [r.cos(), -r.sin(), 0.0, 0.0],
                [r.sin(), r.cos(), 0.0, 0.0],
                [0.0, 0.0, 1.0, 0.0],
                [0.0, 0.0, 0.0, 1.0],
            ]
        }
        let m = matmul4(
            matmul4(matmul4(rotz4(root_z_deg), trans4(child_offset)), rotz4(child_z_deg)),
            trans4(leaf_offset),
        );
        [m[0][3], m[1][3], m[2][3]]
    }

    #[test]
    fn nested_rotations_match_homogeneous_oracle() {
        let text = doc(
            "Xposition Yposition Zposition Zrotation Xrotation Yrotation",
            "1 0 0",
            "0 0 0 90 0 0 90 0 0 0 0 0\n",
            1,
        );
        let (skel, frames) = parse_bvh(&text).unwrap();
        let poses = forward_kinematics(&skel, &frames, 1.0);
        let want = homogeneous_oracle(90.0, [1.0, 0.0, 0.0], 90.0, [0.0, 2.0, 0.0]);
        let got = poses.marker(0, 2);
        for k in 0..3 {
            assert!((got[k] - want[k]).abs() < 1e-9, "{got:?} vs {want:?}");
        }
    }

    #[test]
    fn fk_preserves_bone_lengths() {
        // Rigidity: child with rotation-only channels stays |offset| from parent.
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let mut motion = String::new();
        for _ in 0..20 {
            let vals: Vec<String> = (0..12)
                .map(|_| format!("{:.4}", rng.gen_range(-180.0..180.0)))
                .collect();
            motion.push_str(&vals.join(" "));
            motion.push('\n');
        }
        let text = doc(
            "Xposition Yposition Zposition Zrotation Xrotation Yrotation",
            "1 2 3",
            &motion,
            20,
        );
        let (skel, frames) = parse_bvh(&text).unwrap();
        let poses = forward_kinematics(&skel, &frames, 1.0);
        let bone1 = (1.0f64 + 4.0 + 9.0).sqrt();
        let bone2 = 2.0f64;
        for f in 0..20 {
            let p0 = poses.marker(f, 0);
            let p1 = poses.marker(f, 1);
            let p2 = poses.marker(f, 2);
            let d1 = ((p1[0] - p0[0]).powi(2) + (p1[1] - p0[1]).powi(2) + (p1[2] - p0[2]).powi(2))
                .sqrt();
            let d2 = ((p2[0] - p1[0]).powi(2) + (p2[1] - p1[1]).powi(2) + (p2[2] - p1[2]).powi(2))
                .sqrt();
            assert!((d1 - bone1).abs() < 1e-9);
            assert!((d2 - bone2).abs() < 1e-9);
        }
    }
}
