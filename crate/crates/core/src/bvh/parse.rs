//! Recursive-descent parser for BVH documents.

use super::{BvhError, Channel, ChannelFrames, Joint, Skeleton};
use crate::Tensor2;

struct Tokens<'a> {
    items: Vec<(&'a str, usize)>, // (token, 1-based line)
    pos: usize,
}

impl<'a> Tokens<'a> {
    fn new(text: &'a str) -> Self {
        let mut items = Vec::new();
        for (i, line) in text.lines().enumerate() {
            for tok in line.split_whitespace() {
                items.push((tok, i + 1));
            }
        }
        Tokens { items, pos: 0 }
    }

    fn peek(&self) -> Option<(&'a str, usize)> {
        self.items.get(self.pos).copied()
    }

    fn next(&mut self) -> Option<(&'a str, usize)> {
        let t = self.items.get(self.pos).copied();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn last_line(&self) -> usize {
        self.items.last().map_or(1, |&(_, l)| l)
    }

    fn expect(&mut self, keyword: &str) -> Result<usize, BvhError> {
        match self.next() {
            Some((tok, line)) if tok == keyword => Ok(line),
            Some((tok, line)) => Err(syntax(line, format!("expected `{keyword}`, found `{tok}`"))),
            None => Err(syntax(
                self.last_line(),
                format!("unexpected end of file, expected `{keyword}`"),
            )),
        }
    }

    fn next_or_eof(&mut self, what: &str) -> Result<(&'a str, usize), BvhError> {
        self.next().ok_or_else(|| {
            syntax(
                self.last_line(),
                format!("unexpected end of file, expected {what}"),
            )
        })
    }

    fn float(&mut self, what: &str) -> Result<f64, BvhError> {
        let (tok, line) = self.next_or_eof(what)?;
        tok.parse::<f64>()
            .map_err(|_| syntax(line, format!("expected {what}, found `{tok}`")))
    }

    fn integer(&mut self, what: &str) -> Result<usize, BvhError> {
        let (tok, line) = self.next_or_eof(what)?;
        tok.parse::<usize>()
            .map_err(|_| syntax(line, format!("expected {what}, found `{tok}`")))
    }
}

fn syntax(line: usize, message: String) -> BvhError {
    BvhError::Syntax { line, message }
}

/// Parse a complete BVH document into its skeleton and raw motion channels.
pub fn parse_bvh(text: &str) -> Result<(Skeleton, ChannelFrames), BvhError> {
    let mut toks = Tokens::new(text);
    toks.expect("HIERARCHY")?;
    toks.expect("ROOT")?;
    let mut joints = Vec::new();
    parse_joint(&mut toks, None, &mut joints)?;
    let skeleton = Skeleton::new(joints);

    toks.expect("MOTION")?;
    toks.expect("Frames:")?;
    let declared_frames = toks.integer("frame count")?;
    toks.expect("Frame")?;
    toks.expect("Time:")?;
    let frame_time = toks.float("frame time")?;
    if declared_frames == 0 {
        return Err(BvhError::EmptyMotion);
    }
    if !(frame_time > 0.0) || !frame_time.is_finite() {
        return Err(syntax(
            toks.last_line(),
            format!("frame time must be positive, got {frame_time}"),
        ));
    }

    // Motion values, validated per line against the channel count.
    let channels = skeleton.total_channels();
    let mut values = Vec::with_capacity(declared_frames * channels);
    let mut frames = 0usize;
    while let Some((_, line)) = toks.peek() {
        let mut count = 0usize;
        while let Some((tok, l)) = toks.peek() {
            if l != line {
                break;
            }
            let v = tok
                .parse::<f64>()
                .map_err(|_| syntax(l, format!("expected motion value, found `{tok}`")))?;
            values.push(v);
            count += 1;
            toks.next();
        }
        if count != channels {
            return Err(BvhError::ChannelMismatch {
                what: "values per frame",
                declared: channels,
                actual: count,
            });
        }
        frames += 1;
    }
    if frames != declared_frames {
        return Err(BvhError::ChannelMismatch {
            what: "frame count",
            declared: declared_frames,
            actual: frames,
        });
    }

    Ok((
        skeleton,
        ChannelFrames {
            frame_time,
            values: Tensor2::from_vec(frames, channels, values),
        },
    ))
}

fn parse_offset(toks: &mut Tokens) -> Result<[f64; 3], BvhError> {
    toks.expect("OFFSET")?;
    Ok([
        toks.float("offset x")?,
        toks.float("offset y")?,
        toks.float("offset z")?,
    ])
}

fn parse_joint(
    toks: &mut Tokens,
    parent: Option<usize>,
    joints: &mut Vec<Joint>,
) -> Result<(), BvhError> {
    let (name, _) = toks.next_or_eof("joint name")?;
    let name = name.to_string();
    toks.expect("{")?;
    let offset = parse_offset(toks)?;
    toks.expect("CHANNELS")?;
    let count = toks.integer("channel count")?;
    if count != 3 && count != 6 {
        return Err(syntax(
            toks.last_line(),
            format!("joint `{name}` declares {count} channels; expected 3 or 6"),
        ));
    }
    let mut channels = Vec::with_capacity(count);
    for _ in 0..count {
        let (tok, line) = toks.next_or_eof("channel name")?;
        let ch = Channel::from_keyword(tok)
            .ok_or_else(|| syntax(line, format!("unknown channel `{tok}`")))?;
        channels.push(ch);
    }

    let index = joints.len();
    joints.push(Joint {
        name,
        parent,
        offset,
        channels,
        end_site: None,
    });

    loop {
        match toks.next_or_eof("`JOINT`, `End Site` or `}`")? {
            ("JOINT", _) => parse_joint(toks, Some(index), joints)?,
            ("End", _) => {
                toks.expect("Site")?;
                toks.expect("{")?;
                let off = parse_offset(toks)?;
                toks.expect("}")?;
                joints[index].end_site = Some(off);
            }
            ("}", _) => return Ok(()),
            (tok, line) => {
                return Err(syntax(
                    line,
                    format!("unexpected token `{tok}` inside joint body"),
                ))
            }
        }
    }
}
