//! BVH serialization. The output parses back to value-identical data.

use super::{ChannelFrames, Skeleton};
use std::fmt::Write as _;

/// Format a float with at least 6 significant digits, widening to the
/// shortest representation that round-trips exactly when more are needed.
pub(crate) fn format_value(v: f64) -> String {
    let s = format!("{v}");
    if v == 0.0 {
        return "0.000000".to_string();
    }
    let digits = s
        .chars()
        .filter(|c| c.is_ascii_digit())
        .skip_while(|&c| c == '0')
        .count();
    if digits >= 6 {
        s
    } else if s.contains('.') {
        let mut out = s;
        for _ in digits..6 {
            out.push('0');
        }
        out
    } else {
        let mut out = s;
        out.push('.');
        for _ in digits..6 {
            out.push('0');
        }
        out
    }
}

/// Render a skeleton and motion block as BVH text.
pub fn serialize_bvh(skeleton: &Skeleton, frames: &ChannelFrames) -> String {
    let mut out = String::new();
    out.push_str("HIERARCHY\n");
    let children = skeleton.children();
    write_joint(&mut out, skeleton, &children, 0, 0);
    out.push_str("MOTION\n");
    let _ = writeln!(out, "Frames: {}", frames.frame_count());
    let _ = writeln!(out, "Frame Time: {}", format_value(frames.frame_time));
    for f in 0..frames.frame_count() {
        let row = frames.values.row(f);
        let mut first = true;
        for &v in row {
            if !first {
                out.push(' ');
            }
            out.push_str(&format_value(v));
            first = false;
        }
        out.push('\n');
    }
    out
}

fn write_joint(
    out: &mut String,
    skeleton: &Skeleton,
    children: &[Vec<usize>],
    index: usize,
    depth: usize,
) {
    let joint = &skeleton.joints()[index];
    let pad = "  ".repeat(depth);
    let keyword = if joint.parent.is_none() { "ROOT" } else { "JOINT" };
    let _ = writeln!(out, "{pad}{keyword} {}", joint.name);
    let _ = writeln!(out, "{pad}{{");
    let inner = "  ".repeat(depth + 1);
    let _ = writeln!(
        out,
        "{inner}OFFSET {} {} {}",
        format_value(joint.offset[0]),
        format_value(joint.offset[1]),
        format_value(joint.offset[2])
    );
    let names: Vec<&str> = joint.channels.iter().map(|c| c.keyword()).collect();
    let _ = writeln!(
        out,
        "{inner}CHANNELS {} {}",
        joint.channels.len(),
        names.join(" ")
    );
    for &c in &children[index] {
        write_joint(out, skeleton, children, c, depth + 1);
    }
    if let Some(end) = joint.end_site {
        let _ = writeln!(out, "{inner}End Site");
        let _ = writeln!(out, "{inner}{{");
        let _ = writeln!(
            out,
            "{inner}  OFFSET {} {} {}",
            format_value(end[0]),
            format_value(end[1]),
            format_value(end[2])
        );
        let _ = writeln!(out, "{inner}}}");
    }
    let _ = writeln!(out, "{pad}}}");
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bvh::parse_bvh;
    use proptest::prelude::*;

    #[test]
    fn format_value_has_six_significant_digits_minimum() {
        assert_eq!(format_value(0.0), "0.000000");
        assert_eq!(format_value(0.1), "0.100000");
        assert_eq!(format_value(90.0), "90.0000");
        assert_eq!(format_value(-1.5), "-1.50000");
        assert_eq!(format_value(12.3456), "12.3456");
        // Needs more than 6 digits to round-trip; kept exact.
        let v = 1.0 / 120.0;
        assert_eq!(format_value(v).parse::<f64>().unwrap(), v);
    }

    #[test]
    fn one_joint_document_round_trips() {
        let text = "HIERARCHY\nROOT Hips\n{\n  OFFSET 0 0 0\n  CHANNELS 6 Xposition Yposition Zposition Zrotation Xrotation Yrotation\n  End Site\n  {\n    OFFSET 0 5 0\n  }\n}\nMOTION\nFrames: 2\nFrame Time: 0.0083333\n1 2 3 10.5 -20.25 30\n4 5 6 40 50 60\n";
        let (skel, frames) = parse_bvh(text).unwrap();
        let rendered = serialize_bvh(&skel, &frames);
        let (skel2, frames2) = parse_bvh(&rendered).unwrap();
        assert_eq!(skel, skel2);
        assert_eq!(frames, frames2);
    }

    #[test]
    fn multi_joint_round_trip_is_value_exact() {
        // Values chosen to need full f64 precision.
        let text = format!(
            "HIERARCHY\nROOT A\n{{\n OFFSET {} {} {}\n CHANNELS 6 Xposition Yposition Zposition Zrotation Xrotation Yrotation\n JOINT B\n {{\n  OFFSET 1 0 0\n  CHANNELS 3 Zrotation Xrotation Yrotation\n }}\n JOINT C\n {{\n  OFFSET 0 1 0\n  CHANNELS 3 Yrotation Xrotation Zrotation\n }}\n}}\nMOTION\nFrames: 1\nFrame Time: {}\n{} {} {} {} {} {} 0 0 0 1 2 3\n",
            1.0f64 / 3.0,
            2.0f64 / 7.0,
            -9.81f64,
            1.0f64 / 120.0,
            0.1f64,
            -0.2f64,
            1e-7f64,
            123.456789012f64,
            std::f64::consts::PI,
            -1e9f64,
        );
        let (skel, frames) = parse_bvh(&text).unwrap();
        let rendered = serialize_bvh(&skel, &frames);
        let (skel2, frames2) = parse_bvh(&rendered).unwrap();
        assert_eq!(skel, skel2);
        let max_diff = frames
            .values
            .data()
            .iter()
            .zip(frames2.values.data())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        assert_eq!(max_diff, 0.0);
        assert_eq!(frames.frame_time.to_bits(), frames2.frame_time.to_bits());
    }

    proptest! {
        #[test]
        fn round_trip_identity_on_arbitrary_values(
            offsets in proptest::collection::vec(-1e6f64..1e6, 9),
            motion in proptest::collection::vec(-360f64..360.0, 24),
            frame_time in 1e-4f64..0.1,
        ) {
            let text = format!(
                "HIERARCHY\nROOT R\n{{\n OFFSET {} {} {}\n CHANNELS 6 Xposition Yposition Zposition Zrotation Xrotation Yrotation\n JOINT J\n {{\n  OFFSET {} {} {}\n  CHANNELS 3 Zrotation Xrotation Yrotation\n  JOINT K\n  {{\n   OFFSET {} {} {}\n   CHANNELS 3 Xrotation Yrotation Zrotation\n  }}\n }}\n}}\nMOTION\nFrames: 2\nFrame Time: {}\n{}\n{}\n",
                offsets[0], offsets[1], offsets[2],
                offsets[3], offsets[4], offsets[5],
                offsets[6], offsets[7], offsets[8],
                frame_time,
                motion[..12].iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" "),
                motion[12..].iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" "),
            );
            let (skel, frames) = parse_bvh(&text).unwrap();
            let rendered = serialize_bvh(&skel, &frames);
            let (skel2, frames2) = parse_bvh(&rendered).unwrap();
            prop_assert_eq!(skel, skel2);
            prop_assert_eq!(frames, frames2);
        }
    }
}
