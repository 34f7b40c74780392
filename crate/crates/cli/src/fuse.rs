use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};

use anyhow::{anyhow, Context, Result};
use cabs_core::boxfusion::{wbf, DetectionSet, FusedDetection, RescaleMode, WbfConfig};
use cabs_core::{BoundingBox, ConceptId};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::manifest::RunManifest;
use crate::{FuseArgs, ModeArg};

#[derive(Debug, Deserialize)]
struct ImageIn {
    id: String,
    /// Pixel size; when present, boxes are in pixels and get normalized.
    #[serde(default)]
    width: Option<f64>,
    #[serde(default)]
    height: Option<f64>,
    detections: Vec<DetectionIn>,
}

#[derive(Debug, Deserialize)]
struct DetectionIn {
    res: i64,
    #[serde(rename = "box")]
    bbox: [f64; 4],
    class: String,
    score: f64,
}

#[derive(Debug, Serialize)]
struct ImageOut<'a> {
    id: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    width: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    height: Option<f64>,
    detections: Vec<DetectionOut<'a>>,
}

#[derive(Debug, Serialize)]
struct DetectionOut<'a> {
    #[serde(rename = "box")]
    bbox: [f64; 4],
    class: &'a str,
    score: f64,
    cluster_size: usize,
    n_resolutions: usize,
}

impl From<ModeArg> for RescaleMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Clip => RescaleMode::Clip,
            ModeArg::Linear => RescaleMode::Linear,
        }
    }
}

/// Fuses one image record into its output line (no trailing newline).
fn fuse_line(line: &str, config: &WbfConfig) -> Result<String> {
    let image: ImageIn = serde_json::from_str(line)?;
    let (sx, sy) = match (image.width, image.height) {
        (Some(w), Some(h)) if w > 0.0 && h > 0.0 => (w, h),
        (None, None) => (1.0, 1.0),
        _ => return Err(anyhow!("width and height must both be positive when given")),
    };

    // Class names are interned per image; ids only need to be consistent here.
    let mut classes: Vec<&str> = Vec::new();
    let mut by_res: BTreeMap<i64, Vec<BoundingBox>> = BTreeMap::new();
    for (k, d) in image.detections.iter().enumerate() {
        let class = match classes.iter().position(|&c| c == d.class) {
            Some(i) => i,
            None => {
                classes.push(&d.class);
                classes.len() - 1
            }
        };
        let [x1, y1, x2, y2] = d.bbox;
        let b = BoundingBox::new([x1 / sx, y1 / sy, x2 / sx, y2 / sy], ConceptId(class as u32), d.score)
            .ok_or_else(|| anyhow!("detection {k}: invalid box {:?} or score {}", d.bbox, d.score))?;
        by_res.entry(d.res).or_default().push(b);
    }
    let sets: Vec<DetectionSet> = by_res.into_iter().map(|(res, boxes)| DetectionSet::new(res, boxes)).collect();
    let fused = wbf(&sets, config)?;

    let out = ImageOut {
        id: &image.id,
        width: image.width,
        height: image.height,
        detections: fused
            .iter()
            .map(|d: &FusedDetection| {
                let b = &d.bbox;
                let bbox = if (sx, sy) == (1.0, 1.0) {
                    b.coords()
                } else {
                    [b.x1 * sx, b.y1 * sy, b.x2 * sx, b.y2 * sy]
                };
                DetectionOut {
                    bbox,
                    class: classes[b.concept.index()],
                    score: b.score,
                    cluster_size: d.cluster_size,
                    n_resolutions: d.n_resolutions,
                }
            })
            .collect(),
    };
    Ok(serde_json::to_string(&out)?)
}

pub fn cmd_fuse(args: &FuseArgs, command_line: &str) -> Result<()> {
    let config = WbfConfig {
        iou_threshold: args.iou_threshold,
        post_threshold: args.post_threshold,
        rescale_mode: args.mode.into(),
        n_sources: args.n_sources,
    };
    config.validate().context("invalid fusion flags")?;

    let input = File::open(&args.input).with_context(|| format!("opening {}", args.input.display()))?;
    let lines: Vec<(usize, String)> = BufReader::new(input)
        .lines()
        .enumerate()
        .map(|(i, l)| l.map(|l| (i + 1, l)))
        .collect::<std::io::Result<_>>()
        .with_context(|| format!("reading {}", args.input.display()))?;
    let fused: Vec<String> = lines
        .par_iter()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, l)| fuse_line(l, &config).with_context(|| format!("{}:{n}", args.input.display())))
        .collect::<Result<_>>()?;

    let mut out = BufWriter::new(File::create(&args.out).with_context(|| format!("creating {}", args.out.display()))?);
    for line in &fused {
        out.write_all(line.as_bytes())?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    log::info!("fused {} images", fused.len());

    let mut manifest = RunManifest::new(command_line, args)?;
    manifest.input(&args.input)?.output(&args.out);
    manifest.write_beside(&args.out)?;
    Ok(())
}
