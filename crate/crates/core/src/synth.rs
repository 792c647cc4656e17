//! Deterministic synthetic mocap dataset generator.
//!
//! Produces BVH files for a 41-joint human-like skeleton driven by sums of
//! sinusoidal joint-angle trajectories, at human scale and 120 Hz. Motion
//! archetypes (walk, run, basketball, boxing, jump_turn, dance, stretch)
//! share the same generative family with different tempo/amplitude ranges,
//! so models trained on one subset generalize to the others. Used by the
//! test suites, benches and the `gen_dataset` example; real BVH data drops
//! in through the same catalog format.

use crate::bvh::{serialize_bvh, Channel, ChannelFrames, Joint, Skeleton};
use crate::Tensor2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::path::{Path, PathBuf};

/// File units per centimeter for generated data (1 unit = 2 cm).
pub const UNIT_SCALE_TO_CM: f64 = 2.0;

/// Default capture rate.
pub const FRAME_RATE: f64 = 120.0;

/// Overall motion-energy multiplier. Calibrated so that linear interpolation
/// over short Gaussian gaps (mean 10 frames) lands near published magnitudes
/// on the basketball archetype.
const ENERGY: f64 = 0.65;

fn joint(name: &str, parent: Option<usize>, offset_cm: [f64; 3]) -> Joint {
    Joint {
        name: name.to_string(),
        parent,
        offset: offset_cm,
        channels: if parent.is_none() {
            vec![
                Channel::Xposition,
                Channel::Yposition,
                Channel::Zposition,
                Channel::Zrotation,
                Channel::Xrotation,
                Channel::Yrotation,
            ]
        } else {
            vec![Channel::Zrotation, Channel::Xrotation, Channel::Yrotation]
        },
        end_site: None,
    }
}

/// 41-joint skeleton (pose dimensionality 123), offsets in centimeters.
pub fn human_skeleton() -> Skeleton {
    let mut joints: Vec<Joint> = Vec::with_capacity(41);
    let mut add = |j: Joint| -> usize {
        joints.push(j);
        joints.len() - 1
    };

    let hips = add(joint("Hips", None, [0.0, 0.0, 0.0]));
    let lower_back = add(joint("LowerBack", Some(hips), [0.0, 7.0, -1.0]));
    let spine = add(joint("Spine", Some(lower_back), [0.0, 10.0, 0.0]));
    let spine1 = add(joint("Spine1", Some(spine), [0.0, 10.0, 0.0]));
    let chest = add(joint("Chest", Some(spine1), [0.0, 9.0, 1.0]));
    let neck = add(joint("Neck", Some(chest), [0.0, 8.0, 0.0]));
    let neck1 = add(joint("Neck1", Some(neck), [0.0, 5.0, 0.0]));
    let head = add(joint("Head", Some(neck1), [0.0, 6.0, 1.0]));
    let mut head_end = joint("HeadEnd", Some(head), [0.0, 9.0, 0.0]);
    head_end.end_site = Some([0.0, 3.0, 0.0]);
    add(head_end);

    for (side, sx) in [("Left", 1.0f64), ("Right", -1.0f64)] {
        let shoulder = add(joint(&format!("{side}Shoulder"), Some(chest), [sx * 4.0, 6.0, 0.0]));
        let arm = add(joint(&format!("{side}Arm"), Some(shoulder), [sx * 17.0, 0.0, 0.0]));
        let forearm = add(joint(&format!("{side}ForeArm"), Some(arm), [sx * 28.0, 0.0, 0.0]));
        let hand = add(joint(&format!("{side}Hand"), Some(forearm), [sx * 25.0, 0.0, 0.0]));
        let finger_base = add(joint(
            &format!("{side}FingerBase"),
            Some(hand),
            [sx * 9.0, 0.0, 0.0],
        ));
        let index1 = add(joint(
            &format!("{side}HandIndex1"),
            Some(finger_base),
            [sx * 4.0, 0.0, 0.5],
        ));
        let mut index2 = joint(&format!("{side}HandIndex2"), Some(index1), [sx * 3.0, 0.0, 0.0]);
        index2.end_site = Some([sx * 2.0, 0.0, 0.0]);
        add(index2);
        let thumb1 = add(joint(&format!("{side}Thumb1"), Some(hand), [sx * 3.0, -2.0, 3.0]));
        let mut thumb2 = joint(&format!("{side}Thumb2"), Some(thumb1), [sx * 3.0, 0.0, 2.0]);
        thumb2.end_site = Some([sx * 2.0, 0.0, 1.0]);
        add(thumb2);
        let mut hand_end = joint(&format!("{side}HandEnd"), Some(hand), [sx * 7.0, 1.5, 0.0]);
        hand_end.end_site = Some([sx * 2.0, 0.0, 0.0]);
        add(hand_end);
    }

    for (side, sx) in [("Left", 1.0f64), ("Right", -1.0f64)] {
        let hip_joint = add(joint(&format!("{side}HipJoint"), Some(hips), [sx * 9.5, -3.0, 0.0]));
        let up_leg = add(joint(&format!("{side}UpLeg"), Some(hip_joint), [sx * 1.0, -8.0, 0.0]));
        let leg = add(joint(&format!("{side}Leg"), Some(up_leg), [0.0, -44.0, 0.0]));
        let foot = add(joint(&format!("{side}Foot"), Some(leg), [0.0, -42.0, 0.0]));
        let toe = add(joint(&format!("{side}ToeBase"), Some(foot), [0.0, -7.0, 13.0]));
        let mut toe_end = joint(&format!("{side}ToeEnd"), Some(toe), [0.0, -1.0, 7.0]);
        toe_end.end_site = Some([0.0, 0.0, 2.0]);
        add(toe_end);
    }

    assert_eq!(joints.len(), 41);
    Skeleton::new(joints)
}

/// Amplitude/tempo profile of a motion archetype (angles in degrees).
struct MotionProfile {
    tempo: f64,
    arm_amp: f64,
    leg_amp: f64,
    spine_amp: f64,
    bounce_cm: f64,
    bounce_hz: f64,
    yaw_amp: f64,
    yaw_hz: f64,
    wander_cm: f64,
}

fn profile(motion: &str) -> MotionProfile {
    match motion {
        "basketball" => MotionProfile {
            tempo: 1.1,
            arm_amp: 28.0,
            leg_amp: 18.0,
            spine_amp: 7.0,
            bounce_cm: 5.0,
            bounce_hz: 1.4,
            yaw_amp: 35.0,
            yaw_hz: 0.25,
            wander_cm: 45.0,
        },
        "boxing" => MotionProfile {
            tempo: 1.35,
            arm_amp: 34.0,
            leg_amp: 10.0,
            spine_amp: 8.0,
            bounce_cm: 3.0,
            bounce_hz: 1.9,
            yaw_amp: 25.0,
            yaw_hz: 0.35,
            wander_cm: 18.0,
        },
        "jump_turn" => MotionProfile {
            tempo: 0.95,
            arm_amp: 22.0,
            leg_amp: 26.0,
            spine_amp: 6.0,
            bounce_cm: 14.0,
            bounce_hz: 1.05,
            yaw_amp: 170.0,
            yaw_hz: 0.18,
            wander_cm: 25.0,
        },
        "run" => MotionProfile {
            tempo: 1.3,
            arm_amp: 25.0,
            leg_amp: 34.0,
            spine_amp: 5.0,
            bounce_cm: 6.0,
            bounce_hz: 2.4,
            yaw_amp: 12.0,
            yaw_hz: 0.1,
            wander_cm: 60.0,
        },
        "dance" => MotionProfile {
            tempo: 1.0,
            arm_amp: 30.0,
            leg_amp: 22.0,
            spine_amp: 12.0,
            bounce_cm: 7.0,
            bounce_hz: 1.0,
            yaw_amp: 60.0,
            yaw_hz: 0.2,
            wander_cm: 35.0,
        },
        "stretch" => MotionProfile {
            tempo: 0.4,
            arm_amp: 38.0,
            leg_amp: 14.0,
            spine_amp: 14.0,
            bounce_cm: 4.0,
            bounce_hz: 0.5,
            yaw_amp: 15.0,
            yaw_hz: 0.08,
            wander_cm: 8.0,
        },
        // "walk" and anything unrecognized.
        _ => MotionProfile {
            tempo: 0.8,
            arm_amp: 17.0,
            leg_amp: 26.0,
            spine_amp: 4.0,
            bounce_cm: 3.0,
            bounce_hz: 1.7,
            yaw_amp: 20.0,
            yaw_hz: 0.12,
            wander_cm: 70.0,
        },
    }
}

struct Oscillator {
    base: f64,
    comps: Vec<(f64, f64, f64)>, // (amplitude, hz, phase)
}

impl Oscillator {
    fn sample(&self, t: f64) -> f64 {
        let mut v = self.base;
        for &(a, hz, ph) in &self.comps {
            v += a * (std::f64::consts::TAU * hz * t + ph).sin();
        }
        v
    }
}

fn angle_oscillator<R: Rng>(amp_deg: f64, tempo: f64, rng: &mut R) -> Oscillator {
    let a1 = amp_deg * rng.gen_range(0.55..1.0) * ENERGY;
    let f1 = tempo * rng.gen_range(0.35..1.0);
    let a2 = a1 * rng.gen_range(0.15..0.4);
    let f2 = tempo * rng.gen_range(1.0..2.1);
    Oscillator {
        base: rng.gen_range(-6.0..6.0),
        comps: vec![
            (a1, f1, rng.gen_range(0.0..std::f64::consts::TAU)),
            (a2, f2, rng.gen_range(0.0..std::f64::consts::TAU)),
        ],
    }
}

/// Joint-group amplitude for one rotation channel.
fn group_amp(joint_name: &str, p: &MotionProfile) -> f64 {
    let n = joint_name;
    if n.contains("UpLeg") || n.contains("Leg") {
        p.leg_amp
    } else if n.contains("Foot") || n.contains("Toe") {
        p.leg_amp * 0.5
    } else if n.contains("Arm") || n.contains("Hand") && !n.contains("Index") && !n.contains("Thumb")
    {
        p.arm_amp
    } else if n.contains("Index") || n.contains("Thumb") || n.contains("Finger") {
        p.arm_amp * 0.25
    } else if n.contains("Shoulder") || n.contains("HipJoint") {
        p.arm_amp * 0.2
    } else if n.contains("Neck") || n.contains("Head") {
        p.spine_amp * 0.8
    } else {
        p.spine_amp
    }
}

/// Generate one animated sequence of the standard skeleton.
///
/// `subject_scale` scales bone lengths (body size); the RNG seed drives all
/// *per-sequence* variation. Offsets and root translations are emitted in
/// file units ([`UNIT_SCALE_TO_CM`] cm per unit).
pub fn generate_sequence(
    motion: &str,
    subject_scale: f64,
    seed: u64,
    frames: usize,
    frame_rate: f64,
) -> (Skeleton, ChannelFrames) {
    let base = human_skeleton();
    let scale = subject_scale / UNIT_SCALE_TO_CM;
    let joints: Vec<Joint> = base
        .joints()
        .iter()
        .map(|j| Joint {
            offset: [j.offset[0] * scale, j.offset[1] * scale, j.offset[2] * scale],
            end_site: j.end_site.map(|e| [e[0] * scale, e[1] * scale, e[2] * scale]),
            ..j.clone()
        })
        .collect();
    let skeleton = Skeleton::new(joints);

    let p = profile(motion);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tempo = p.tempo * rng.gen_range(0.9..1.1);

    // One oscillator per channel, in skeleton channel order.
    let mut drivers: Vec<Oscillator> = Vec::with_capacity(skeleton.total_channels());
    let hip_height = 92.0 * scale;
    for joint in skeleton.joints() {
        for &ch in &joint.channels {
            let osc = match ch {
                Channel::Xposition | Channel::Zposition => Oscillator {
                    base: 0.0,
                    comps: vec![
                        (
                            p.wander_cm / UNIT_SCALE_TO_CM * ENERGY,
                            tempo * rng.gen_range(0.05..0.18),
                            rng.gen_range(0.0..std::f64::consts::TAU),
                        ),
                        (
                            2.0 / UNIT_SCALE_TO_CM,
                            p.bounce_hz * rng.gen_range(0.8..1.2),
                            rng.gen_range(0.0..std::f64::consts::TAU),
                        ),
                    ],
                },
                Channel::Yposition => Oscillator {
                    base: hip_height,
                    comps: vec![(
                        p.bounce_cm / UNIT_SCALE_TO_CM * ENERGY,
                        p.bounce_hz * rng.gen_range(0.9..1.1),
                        rng.gen_range(0.0..std::f64::consts::TAU),
                    )],
                },
                Channel::Yrotation if joint.parent.is_none() => Oscillator {
                    base: rng.gen_range(-180.0..180.0),
                    comps: vec![(
                        p.yaw_amp,
                        p.yaw_hz * rng.gen_range(0.8..1.2),
                        rng.gen_range(0.0..std::f64::consts::TAU),
                    )],
                },
                Channel::Zrotation | Channel::Xrotation if joint.parent.is_none() => {
                    // Small whole-body tilt.
                    angle_oscillator(6.0, tempo * 0.6, &mut rng)
                }
                _ => angle_oscillator(group_amp(&joint.name, &p), tempo, &mut rng),
            };
            drivers.push(osc);
        }
    }

    let channels = skeleton.total_channels();
    let mut values = Tensor2::zeros(frames, channels);
    for f in 0..frames {
        let t = f as f64 / frame_rate;
        let row = values.row_mut(f);
        for (c, d) in drivers.iter().enumerate() {
            row[c] = d.sample(t);
        }
    }
    (
        skeleton,
        ChannelFrames {
            frame_time: 1.0 / frame_rate,
            values,
        },
    )
}

/// One catalog row of the generated dataset.
pub struct SynthEntry {
    pub id: &'static str,
    pub subject: &'static str,
    pub motion: &'static str,
    pub split: &'static str, // train | validation | test
}

/// The standard desk-scale dataset: 3 test motions, 2 validation sequences,
/// 11 training sequences across 5 subjects and 7 motion types.
pub fn default_entries() -> Vec<SynthEntry> {
    let e = |id, subject, motion, split| SynthEntry {
        id,
        subject,
        motion,
        split,
    };
    vec![
        e("basketball_t", "S02", "basketball", "test"),
        e("boxing_t", "S03", "boxing", "test"),
        e("jumpturn_t", "S04", "jump_turn", "test"),
        e("walk_v", "S01", "walk", "validation"),
        e("dance_v", "S05", "dance", "validation"),
        e("basketball_a", "S01", "basketball", "train"),
        e("basketball_b", "S05", "basketball", "train"),
        e("boxing_a", "S01", "boxing", "train"),
        e("boxing_b", "S04", "boxing", "train"),
        e("jumpturn_a", "S05", "jump_turn", "train"),
        e("walk_a", "S02", "walk", "train"),
        e("walk_b", "S03", "walk", "train"),
        e("run_a", "S04", "run", "train"),
        e("run_b", "S02", "run", "train"),
        e("dance_a", "S03", "dance", "train"),
        e("stretch_a", "S01", "stretch", "train"),
    ]
}

fn subject_scale(subject: &str) -> f64 {
    match subject {
        "S01" => 0.94,
        "S02" => 1.0,
        "S03" => 1.05,
        "S04" => 0.98,
        "S05" => 1.08,
        _ => 1.0,
    }
}

/// Paths produced by [`write_dataset`].
pub struct DatasetPaths {
    pub dir: PathBuf,
    pub catalog: PathBuf,
    pub split: PathBuf,
}

/// Write the default synthetic dataset (BVH files, catalog.toml, split.toml)
/// under `dir`. Deterministic for a given seed/duration.
pub fn write_dataset(dir: &Path, seed: u64, duration_s: f64) -> std::io::Result<DatasetPaths> {
    std::fs::create_dir_all(dir)?;
    let frames = (duration_s * FRAME_RATE).round() as usize;
    let entries = default_entries();
    let mut catalog = format!(
        "unit_scale_to_cm = {UNIT_SCALE_TO_CM}\nhip_marker = \"Hips\"\n"
    );
    let mut split = (String::new(), String::new(), String::new());
    for (i, e) in entries.iter().enumerate() {
        let seq_seed = seed
            .wrapping_mul(0x9e3779b97f4a7c15)
            .wrapping_add(i as u64 + 1);
        let (skeleton, channel_frames) = generate_sequence(
            e.motion,
            subject_scale(e.subject),
            seq_seed,
            frames,
            FRAME_RATE,
        );
        let file = format!("{}.bvh", e.id);
        std::fs::write(dir.join(&file), serialize_bvh(&skeleton, &channel_frames))?;
        catalog.push_str(&format!(
            "\n[[sequences]]\nid = \"{}\"\npath = \"{}\"\nsubject = \"{}\"\nmotion = \"{}\"\n",
            e.id, file, e.subject, e.motion
        ));
        let target = match e.split {
            "train" => &mut split.0,
            "validation" => &mut split.1,
            _ => &mut split.2,
        };
        if !target.is_empty() {
            target.push_str(", ");
        }
        target.push_str(&format!("\"{}\"", e.id));
    }
    let catalog_path = dir.join("catalog.toml");
    std::fs::write(&catalog_path, catalog)?;
    let split_path = dir.join("split.toml");
    std::fs::write(
        &split_path,
        format!(
            "train = [{}]\nvalidation = [{}]\ntest = [{}]\n",
            split.0, split.1, split.2
        ),
    )?;
    Ok(DatasetPaths {
        dir: dir.to_path_buf(),
        catalog: catalog_path,
        split: split_path,
    })
}
