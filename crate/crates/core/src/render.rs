//! Trajectory dumps and SVG playback frames.
//!
//! A dump is JSON lines: one [`TrajectoryHeader`], then one [`Frame`] per
//! recorded step. Frames are drawn as the convex outline of each box
//! projected onto the chosen view plane.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::io::{BufRead, Write};

use nalgebra::{Quaternion, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{convex_hull, Point2};
use crate::physics::{Frame, TrajectoryHeader};
use crate::scene::BoxId;

/// Pixels per metre.
const SCALE: f64 = 500.0;
const PAD: f64 = 20.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum View {
    /// Looking into the shelf: x right, y up.
    Front,
    /// From above: x right, z down the page toward the open front.
    Top,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Palette {
    pub target: String,
    pub removed: String,
    pub collapsed: String,
    pub resting: String,
}

impl Default for Palette {
    fn default() -> Self {
        Palette {
            target: "#2f6fd6".into(),
            removed: "#bbbbbb".into(),
            collapsed: "#d62f2f".into(),
            resting: "#c8a46e".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RenderSpec {
    pub view: View,
    /// Recorded steps per emitted frame.
    pub frame_stride: usize,
    pub palette: Palette,
    /// Net displacement from the first frame beyond which a box is drawn
    /// as collapsed, m.
    pub collapse_displacement: f64,
}

impl Default for RenderSpec {
    fn default() -> Self {
        RenderSpec { view: View::Front, frame_stride: 24, palette: Palette::default(), collapse_displacement: 0.02 }
    }
}

impl RenderSpec {
    pub fn validate(&self) -> Result<()> {
        if self.frame_stride == 0 {
            return Err(Error::InvalidInput("frame_stride must be at least 1".into()));
        }
        if !(self.collapse_displacement.is_finite() && self.collapse_displacement > 0.0) {
            return Err(Error::InvalidInput(format!(
                "collapse displacement must be positive, got {}",
                self.collapse_displacement
            )));
        }
        Ok(())
    }
}

pub struct TrajectoryWriter<W: Write> {
    out: W,
}

impl<W: Write> TrajectoryWriter<W> {
    pub fn new(mut out: W, header: &TrajectoryHeader) -> Result<Self> {
        serde_json::to_writer(&mut out, header)?;
        out.write_all(b"\n")?;
        Ok(TrajectoryWriter { out })
    }

    pub fn push(&mut self, frame: &Frame) -> Result<()> {
        serde_json::to_writer(&mut self.out, frame)?;
        self.out.write_all(b"\n")?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<W> {
        self.out.flush()?;
        Ok(self.out)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub header: TrajectoryHeader,
    pub frames: Vec<Frame>,
    /// Set when reading stopped at an unparsable line.
    pub truncated: bool,
}

/// Reads a dump. A bad header is an error; a bad frame line ends the read
/// with whatever came before it, since a crashed writer leaves a partial
/// last line.
pub fn read_trajectory(input: impl BufRead) -> Result<Trajectory> {
    let mut lines = input.lines();
    let header_line = lines.next().ok_or_else(|| Error::InvalidInput("trajectory is empty".into()))??;
    let header: TrajectoryHeader =
        serde_json::from_str(&header_line).map_err(|e| Error::InvalidInput(format!("trajectory header: {e}")))?;
    let mut frames = Vec::new();
    let mut truncated = false;
    for line in lines {
        let Ok(line) = line else {
            truncated = true;
            break;
        };
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<Frame>(&line) {
            Ok(f) => frames.push(f),
            Err(_) => {
                truncated = true;
                break;
            }
        }
    }
    Ok(Trajectory { header, frames, truncated })
}

fn outline(position: &Vector3<f64>, orientation: &[f64; 4], half: &Vector3<f64>, view: View) -> Vec<Point2> {
    let [w, x, y, z] = *orientation;
    let q = UnitQuaternion::from_quaternion(Quaternion::new(w, x, y, z));
    let mut pts = Vec::with_capacity(8);
    for sx in [-1.0, 1.0] {
        for sy in [-1.0, 1.0] {
            for sz in [-1.0, 1.0] {
                let v = position + q * Vector3::new(sx * half.x, sy * half.y, sz * half.z);
                pts.push(match view {
                    View::Front => Point2::new(v.x, v.y),
                    View::Top => Point2::new(v.x, v.z),
                });
            }
        }
    }
    convex_hull(&pts)
}

/// Boxes whose centroid has travelled more than `threshold` from where
/// it was in `first`.
pub fn displaced(first: &Frame, frame: &Frame, threshold: f64) -> BTreeSet<BoxId> {
    let start: BTreeMap<&BoxId, &Vector3<f64>> = first.boxes.iter().map(|b| (&b.id, &b.position)).collect();
    frame
        .boxes
        .iter()
        .filter(|b| !b.removed && frame.driven.as_ref() != Some(&b.id))
        .filter(|b| start.get(&b.id).is_some_and(|p0| (b.position - **p0).norm() > threshold))
        .map(|b| b.id.clone())
        .collect()
}

/// One SVG document for `frame`. `collapsed` boxes take the collapse
/// colour; the driven box takes the target colour.
pub fn render_frame(
    header: &TrajectoryHeader,
    frame: &Frame,
    collapsed: &BTreeSet<BoxId>,
    spec: &RenderSpec,
) -> String {
    let shelf = &header.shelf;
    let (span_x, span_y) = match spec.view {
        View::Front => (shelf.width, shelf.height),
        View::Top => (shelf.width, shelf.depth),
    };
    let width = span_x * SCALE + 2.0 * PAD;
    let height = span_y * SCALE + 2.0 * PAD;
    // Front view flips y so the floor sits at the bottom of the page.
    let map = |p: &Point2| -> (f64, f64) {
        match spec.view {
            View::Front => (PAD + p.x * SCALE, PAD + (span_y - p.y) * SCALE),
            View::Top => (PAD + p.x * SCALE, PAD + p.y * SCALE),
        }
    };

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.1} {height:.1}">"#
    );
    let _ = writeln!(svg, r##"<rect x="0" y="0" width="{width:.1}" height="{height:.1}" fill="#ffffff"/>"##);
    let _ = writeln!(
        svg,
        r##"<rect x="{PAD:.1}" y="{PAD:.1}" width="{:.1}" height="{:.1}" fill="none" stroke="#444444" stroke-width="2"/>"##,
        span_x * SCALE,
        span_y * SCALE
    );
    let _ = writeln!(
        svg,
        r##"<text x="{PAD:.1}" y="{:.1}" font-family="monospace" font-size="12" fill="#444444">t={:.3}s step {}</text>"##,
        PAD - 6.0,
        frame.elapsed,
        frame.step
    );

    for b in &frame.boxes {
        let Some(half) = header.half_extents.get(&b.id) else {
            continue;
        };
        let driven = frame.driven.as_ref() == Some(&b.id);
        let (fill, dash) = if b.removed {
            (&spec.palette.removed, r#" stroke-dasharray="4 3" fill-opacity="0.3""#)
        } else if driven {
            (&spec.palette.target, "")
        } else if collapsed.contains(&b.id) {
            (&spec.palette.collapsed, "")
        } else {
            (&spec.palette.resting, "")
        };
        let poly = outline(&b.position, &b.orientation, half, spec.view);
        let points: Vec<String> = poly
            .iter()
            .map(|p| {
                let (x, y) = map(p);
                format!("{x:.1},{y:.1}")
            })
            .collect();
        let _ = writeln!(
            svg,
            r##"<polygon data-id="{}" points="{}" fill="{fill}" stroke="#222222" stroke-width="1"{dash}/>"##,
            b.id,
            points.join(" ")
        );
        let c = map(&match spec.view {
            View::Front => Point2::new(b.position.x, b.position.y),
            View::Top => Point2::new(b.position.x, b.position.z),
        });
        let _ = writeln!(
            svg,
            r##"<text x="{:.1}" y="{:.1}" font-family="monospace" font-size="11" text-anchor="middle" fill="#111111">{}</text>"##,
            c.0,
            c.1 + 4.0,
            b.id
        );
    }
    svg.push_str("</svg>\n");
    svg
}

/// Every `frame_stride`-th frame plus the last one, each with the boxes
/// displaced so far highlighted. Returns `(file name, svg)` pairs.
pub fn render_trajectory(traj: &Trajectory, spec: &RenderSpec) -> Result<Vec<(String, String)>> {
    spec.validate()?;
    let Some(first) = traj.frames.first() else {
        return Ok(Vec::new());
    };
    let last = traj.frames.len() - 1;
    let mut out = Vec::new();
    let mut seen: BTreeSet<BoxId> = BTreeSet::new();
    for (i, frame) in traj.frames.iter().enumerate() {
        seen.extend(displaced(first, frame, spec.collapse_displacement));
        if i % spec.frame_stride != 0 && i != last {
            continue;
        }
        let name = format!("frame_{:05}.svg", out.len());
        out.push((name, render_frame(&traj.header, frame, &seen, spec)));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::physics::{SimConfig, World};
    use crate::scene::{RigidBox, Scene, Shelf};

    fn column() -> World {
        let scene = Scene::new(
            Shelf::default(),
            vec![
                RigidBox::from_corner("bottom", [0.2, 0.2, 0.2], [0.4, 0.0, 0.0]),
                RigidBox::from_corner("top", [0.2, 0.2, 0.2], [0.4, 0.2, 0.0]),
            ],
        );
        World::new(&scene, SimConfig::default()).unwrap()
    }

    fn dump(steps: usize) -> Vec<u8> {
        let mut w = column();
        let mut out = TrajectoryWriter::new(Vec::new(), &w.trajectory_header()).unwrap();
        out.push(&w.frame()).unwrap();
        for _ in 0..steps {
            w.step().unwrap();
            out.push(&w.frame()).unwrap();
        }
        out.finish().unwrap()
    }

    #[test]
    fn stride_picks_frames_and_keeps_last() {
        let traj = read_trajectory(dump(50).as_slice()).unwrap();
        assert_eq!(traj.frames.len(), 51);
        let spec = RenderSpec { frame_stride: 24, ..RenderSpec::default() };
        let frames = render_trajectory(&traj, &spec).unwrap();
        // Frames 0, 24, 48 and the final one, 50.
        assert_eq!(frames.len(), 4);
        assert_eq!(frames[3].0, "frame_00003.svg");
        assert!(frames[0].1.contains(r#"data-id="top""#));
    }

    #[test]
    fn truncated_dump_keeps_complete_frames() {
        let mut bytes = dump(10);
        bytes.truncate(bytes.len() - 40);
        let traj = read_trajectory(bytes.as_slice()).unwrap();
        assert!(traj.truncated);
        assert_eq!(traj.frames.len(), 10);
        assert!(!render_trajectory(&traj, &RenderSpec::default()).unwrap().is_empty());
    }

    #[test]
    fn empty_dump_is_an_error() {
        assert!(read_trajectory(&b""[..]).is_err());
    }

    #[test]
    fn front_outline_of_cube_is_its_face() {
        let p = Vector3::new(0.5, 0.1, 0.1);
        let h = Vector3::new(0.1, 0.1, 0.1);
        let poly = outline(&p, &[1.0, 0.0, 0.0, 0.0], &h, View::Front);
        assert_eq!(poly.len(), 4);
        assert!((crate::geom::area(&poly) - 0.04).abs() < 1e-12);
    }

    #[test]
    fn zero_stride_rejected() {
        let spec = RenderSpec { frame_stride: 0, ..RenderSpec::default() };
        assert!(spec.validate().is_err());
    }
}
