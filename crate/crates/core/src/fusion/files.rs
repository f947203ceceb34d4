//! Text formats for camera calibrations and tray regions.
//!
//! Calibration (`.calib`):
//!
//! ```text
//! asmon-calibration 1
//! camera cam0
//!   image 960 720
//!   fx 630
//!   fy 630
//!   cx 480
//!   cy 360
//!   extrinsic r00 r01 r02 tx r10 r11 r12 ty r20 r21 r22 tz 0 0 0 1
//!   depth_scale 0.001
//! end
//! ```
//!
//! Tray regions (`.trays`), one polygon per (camera, tray):
//!
//! ```text
//! asmon-trays 1
//! region cam0 T_in 100 80 300 80 300 240 100 240
//! ```
//!
//! `#` starts a comment anywhere on a line.

use std::collections::HashSet;
use std::fmt::Write;

use super::geometry::{CameraCalibration, RigidTransform};
use super::trays::TrayRegion;
use super::FusionError;

pub const CALIBRATION_HEADER: &str = "asmon-calibration 1";
pub const TRAYS_HEADER: &str = "asmon-trays 1";

fn content_lines(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines().enumerate().filter_map(|(i, l)| {
        let l = l.split('#').next().unwrap_or("");
        let words: Vec<&str> = l.split_whitespace().collect();
        (!words.is_empty()).then_some((i + 1, words))
    })
}

fn format_err(line: usize, msg: impl Into<String>) -> FusionError {
    FusionError::Format {
        line,
        message: msg.into(),
    }
}

fn numbers(line: usize, words: &[&str]) -> Result<Vec<f64>, FusionError> {
    words
        .iter()
        .map(|w| {
            w.parse::<f64>()
                .map_err(|_| format_err(line, format!("`{w}` is not a number")))
        })
        .collect()
}

fn check_header(first: Option<(usize, Vec<&str>)>, header: &str) -> Result<(), FusionError> {
    match first {
        Some((_, words)) if words.join(" ") == header => Ok(()),
        Some((line, words)) => Err(format_err(
            line,
            format!("expected header `{header}`, found `{}`", words.join(" ")),
        )),
        None => Err(format_err(1, format!("missing header `{header}`"))),
    }
}

pub fn parse_calibrations(text: &str) -> Result<Vec<CameraCalibration>, FusionError> {
    let mut lines = content_lines(text);
    check_header(lines.next(), CALIBRATION_HEADER)?;

    let mut out = Vec::new();
    let mut ids = HashSet::new();
    while let Some((line, words)) = lines.next() {
        if words[0] != "camera" || words.len() != 2 {
            return Err(format_err(line, "expected `camera <id>`"));
        }
        let id = words[1].to_string();
        if !ids.insert(id.clone()) {
            return Err(format_err(line, format!("duplicate camera `{id}`")));
        }
        let mut image = None;
        let (mut fx, mut fy, mut cx, mut cy, mut scale) = (None, None, None, None, None);
        let mut extrinsic = None;
        loop {
            let Some((l, w)) = lines.next() else {
                return Err(format_err(line, format!("camera `{id}` block is missing `end`")));
            };
            let key = w[0];
            let vals = numbers(l, &w[1..])?;
            let single = |v: &[f64]| {
                if v.len() == 1 {
                    Ok(v[0])
                } else {
                    Err(format_err(l, format!("`{key}` takes one value")))
                }
            };
            match key {
                "end" if vals.is_empty() => break,
                "image" if vals.len() == 2 => {
                    if vals
                        .iter()
                        .any(|v| v.fract() != 0.0 || *v < 1.0 || *v > u32::MAX as f64)
                    {
                        return Err(format_err(l, "image size must be positive integers"));
                    }
                    image = Some((vals[0] as u32, vals[1] as u32));
                }
                "fx" => fx = Some(single(&vals)?),
                "fy" => fy = Some(single(&vals)?),
                "cx" => cx = Some(single(&vals)?),
                "cy" => cy = Some(single(&vals)?),
                "depth_scale" => scale = Some(single(&vals)?),
                "extrinsic" if vals.len() == 16 => {
                    let m: [f64; 16] = vals.try_into().expect("length checked");
                    extrinsic = Some(RigidTransform::from_row_major(&m).map_err(|e| format_err(l, e.to_string()))?);
                }
                _ => return Err(format_err(l, format!("unexpected `{}`", w.join(" ")))),
            }
        }
        let missing = |name: &str| format_err(line, format!("camera `{id}` is missing `{name}`"));
        let (width, height) = image.ok_or_else(|| missing("image"))?;
        let cal = CameraCalibration {
            camera_id: id.clone(),
            width,
            height,
            fx: fx.ok_or_else(|| missing("fx"))?,
            fy: fy.ok_or_else(|| missing("fy"))?,
            cx: cx.ok_or_else(|| missing("cx"))?,
            cy: cy.ok_or_else(|| missing("cy"))?,
            extrinsic: extrinsic.ok_or_else(|| missing("extrinsic"))?,
            depth_scale: scale.ok_or_else(|| missing("depth_scale"))?,
        };
        cal.validate().map_err(|e| format_err(line, e.to_string()))?;
        out.push(cal);
    }
    Ok(out)
}

pub fn write_calibrations(cals: &[CameraCalibration]) -> String {
    let mut out = format!("{CALIBRATION_HEADER}\n");
    for c in cals {
        let m: Vec<String> = c.extrinsic.to_row_major().iter().map(|v| format!("{v:?}")).collect();
        let _ = write!(
            out,
            "camera {}\n  image {} {}\n  fx {:?}\n  fy {:?}\n  cx {:?}\n  cy {:?}\n  extrinsic {}\n  depth_scale {:?}\nend\n",
            c.camera_id,
            c.width,
            c.height,
            c.fx,
            c.fy,
            c.cx,
            c.cy,
            m.join(" "),
            c.depth_scale
        );
    }
    out
}

pub fn parse_tray_regions(text: &str) -> Result<Vec<TrayRegion>, FusionError> {
    let mut lines = content_lines(text);
    check_header(lines.next(), TRAYS_HEADER)?;
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (line, words) in lines {
        if words[0] != "region" || words.len() < 3 {
            return Err(format_err(line, "expected `region <camera> <tray> x y ...`"));
        }
        let coords = numbers(line, &words[3..])?;
        if coords.len() % 2 != 0 {
            return Err(format_err(line, "odd number of coordinates"));
        }
        let region = TrayRegion {
            camera_id: words[1].to_string(),
            tray_name: words[2].to_string(),
            polygon: coords.chunks(2).map(|c| [c[0], c[1]]).collect(),
        };
        region.validate().map_err(|e| format_err(line, e.to_string()))?;
        if !seen.insert((region.camera_id.clone(), region.tray_name.clone())) {
            return Err(format_err(
                line,
                format!(
                    "second region for camera `{}` tray `{}`",
                    region.camera_id, region.tray_name
                ),
            ));
        }
        out.push(region);
    }
    Ok(out)
}

pub fn write_tray_regions(regions: &[TrayRegion]) -> String {
    let mut out = format!("{TRAYS_HEADER}\n");
    for r in regions {
        let coords: Vec<String> = r
            .polygon
            .iter()
            .flat_map(|p| [format!("{:?}", p[0]), format!("{:?}", p[1])])
            .collect();
        let _ = writeln!(out, "region {} {} {}", r.camera_id, r.tray_name, coords.join(" "));
    }
    out
}
