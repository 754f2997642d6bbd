//! Histogram specification and spatially correlated recoloring of images.

use std::collections::BTreeMap;

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cost::CostParams;
use crate::distance::{measure_ot, tlp_transport, SolverSettings};
use crate::error::{invalid, Result, TlpError};
use crate::measure::{HistogramGrid, ImageRaster, Signal};

/// Recolor `source` with the palette of `exemplar`.
#[derive(Clone, Debug)]
pub struct RecolorJob {
    pub source: ImageRaster,
    pub exemplar: ImageRaster,
    pub params: CostParams,
    pub solver: SolverSettings,
    /// Largest side length of the transport instance; `None` solves at full
    /// resolution.
    pub subsample: Option<usize>,
}

impl RecolorJob {
    pub fn new(source: ImageRaster, exemplar: ImageRaster, params: CostParams) -> Self {
        RecolorJob {
            source,
            exemplar,
            params,
            solver: SolverSettings::exact(),
            subsample: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.source.channels() != self.exemplar.channels() {
            return invalid(format!(
                "source has {} channels, exemplar {}",
                self.source.channels(),
                self.exemplar.channels()
            ));
        }
        if let Some(s) = self.subsample {
            if s < 8 {
                return invalid(format!("subsample must be at least 8, got {s}"));
            }
        }
        self.params.finite_lambda().map(|_| ())
    }
}

/// Source pixel index to exemplar pixel index.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PixelMap {
    pub assignment: Vec<usize>,
    pub is_permutation: bool,
    pub source_size: (usize, usize),
    pub target_size: (usize, usize),
}

impl PixelMap {
    pub fn identity(width: usize, height: usize) -> Self {
        PixelMap {
            assignment: (0..width * height).collect(),
            is_permutation: true,
            source_size: (width, height),
            target_size: (width, height),
        }
    }

    /// Mean `|x - T(x)|` with both images scaled to the unit square.
    pub fn mean_displacement(&self) -> f64 {
        let centre = |i: usize, (w, h): (usize, usize)| {
            (
                ((i % w) as f64 + 0.5) / w as f64,
                ((i / w) as f64 + 0.5) / h as f64,
            )
        };
        let total: f64 = self
            .assignment
            .iter()
            .enumerate()
            .map(|(s, &t)| {
                let (a, b) = (centre(s, self.source_size), centre(t, self.target_size));
                ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt()
            })
            .sum();
        total / self.assignment.len() as f64
    }
}

fn is_bijection(a: &[usize], targets: usize) -> bool {
    if a.len() != targets {
        return false;
    }
    let mut seen = vec![false; targets];
    a.iter()
        .all(|&t| t < targets && !std::mem::replace(&mut seen[t], true))
}

/// Monge-type pixel map from the TL^p coupling of (position, colour) pairs.
///
/// Permutation plans give a bijection; other plans send each source pixel to
/// the exemplar pixel receiving most of its mass.
pub fn spatially_correlated_map(job: &RecolorJob) -> Result<PixelMap> {
    job.validate()?;
    if let Some(s) = job.subsample {
        let reduced = subsample_and_lift(job, s)?;
        let small = RecolorJob {
            source: reduced.source.clone(),
            exemplar: reduced.exemplar.clone(),
            subsample: None,
            ..job.clone()
        };
        return reduced.lift(&spatially_correlated_map(&small)?);
    }
    let f = job.source.to_signal()?;
    let g = job.exemplar.to_signal()?;
    let t = tlp_transport(&f, &g, &job.params, &job.solver)?;
    let assignment = match t.plan.permutation() {
        Some(p) => p,
        None => t
            .plan
            .argmax_targets()
            .into_iter()
            .enumerate()
            .map(|(i, t)| {
                t.ok_or_else(|| {
                    TlpError::InvalidArgument(format!("source pixel {i} received no mass"))
                })
            })
            .collect::<Result<_>>()?,
    };
    Ok(PixelMap {
        is_permutation: is_bijection(&assignment, job.exemplar.len()),
        assignment,
        source_size: (job.source.width(), job.source.height()),
        target_size: (job.exemplar.width(), job.exemplar.height()),
    })
}

/// `f^(x) = g(T(x))`.
pub fn recolor(
    source: &ImageRaster,
    exemplar: &ImageRaster,
    map: &PixelMap,
) -> Result<ImageRaster> {
    if map.assignment.len() != source.len() {
        return invalid(format!(
            "map covers {} of {} source pixels",
            map.assignment.len(),
            source.len()
        ));
    }
    if let Some(&t) = map.assignment.iter().find(|&&t| t >= exemplar.len()) {
        return invalid(format!(
            "map points at exemplar pixel {t} of {}",
            exemplar.len()
        ));
    }
    let pixels: Vec<f64> = map
        .assignment
        .iter()
        .flat_map(|&t| exemplar.pixel_at(t).iter().copied())
        .collect();
    ImageRaster::new(source.width(), source.height(), exemplar.channels(), pixels)
}

/// Colour map defined bin by bin on a histogram grid.
#[derive(Clone, Debug)]
pub struct ValueMap {
    pub grid: HistogramGrid,
    /// Bin index (one per channel) to its image colour.
    pub bins: BTreeMap<Vec<usize>, Vec<f64>>,
    /// Whether some source bin had its mass split over several target bins.
    pub split: bool,
}

impl ValueMap {
    fn key(&self, v: &[f64]) -> Vec<usize> {
        v.iter()
            .enumerate()
            .map(|(c, &x)| self.grid.bin_of(c, x))
            .collect()
    }

    pub fn map(&self, v: &[f64]) -> Option<&[f64]> {
        self.bins.get(&self.key(v)).map(|c| c.as_slice())
    }

    pub fn apply(&self, image: &ImageRaster) -> Result<ImageRaster> {
        let m = image.channels();
        let mut out = Vec::with_capacity(image.pixels().len());
        for i in 0..image.len() {
            let v = image.pixel_at(i);
            match self.map(v) {
                Some(c) => out.extend(c.iter().map(|x| x.clamp(0.0, 1.0))),
                None => return invalid(format!("pixel {i} falls in a bin with no image")),
            }
        }
        ImageRaster::new(image.width(), image.height(), m, out)
    }
}

/// OT histogram specification: each source colour bin goes to the barycentre
/// of the exemplar colours its mass is sent to.
pub fn ot_histogram_map(
    source: &ImageRaster,
    exemplar: &ImageRaster,
    bins: usize,
    p: f64,
) -> Result<ValueMap> {
    if source.channels() != exemplar.channels() {
        return invalid("source and exemplar have different channel counts");
    }
    let m = source.channels();
    let grid = HistogramGrid::new(bins, vec![(0.0, 1.0); m])?;
    let hs = histogram_with_keys(&source.to_signal()?, &grid)?;
    let he = histogram_with_keys(&exemplar.to_signal()?, &grid)?;
    let (plan, _) = measure_ot(&hs.0, &he.0, p)?;
    let mut acc: Vec<(f64, Vec<f64>, usize)> = vec![(0.0, vec![0.0; m], 0); hs.1.len()];
    for e in plan.entries() {
        if e.mass <= 0.0 {
            continue;
        }
        let slot = &mut acc[e.source];
        slot.0 += e.mass;
        slot.2 += 1;
        for (c, y) in he.0.points().point(e.target).iter().enumerate() {
            slot.1[c] += e.mass * y;
        }
    }
    let split = acc.iter().any(|a| a.2 > 1);
    if split {
        warn!("no transport map between the colour histograms; using plan barycentres");
    }
    let bins =
        hs.1.into_iter()
            .zip(acc)
            .map(|(key, (mass, sum, _))| (key, sum.into_iter().map(|s| s / mass).collect()))
            .collect();
    Ok(ValueMap { grid, bins, split })
}

/// Histogram on grid nodes together with the bin key of every atom.
fn histogram_with_keys(
    signal: &Signal,
    grid: &HistogramGrid,
) -> Result<(crate::measure::DiscreteMeasure, Vec<Vec<usize>>)> {
    let h = crate::measure::value_histogram(signal, grid)?;
    let keys = h
        .points()
        .iter()
        .map(|v| {
            v.iter()
                .enumerate()
                .map(|(c, &x)| grid.bin_of(c, x))
                .collect()
        })
        .collect();
    Ok((h, keys))
}

/// A transport instance on strided subsamples of both images.
#[derive(Clone, Debug)]
pub struct Subsampled {
    pub source: ImageRaster,
    pub exemplar: ImageRaster,
    pub source_stride: (usize, usize),
    pub exemplar_stride: (usize, usize),
    full_source: (usize, usize),
    full_exemplar: (usize, usize),
}

fn strided(image: &ImageRaster, limit: usize) -> Result<(ImageRaster, (usize, usize))> {
    let sx = image.width().div_ceil(limit);
    let sy = image.height().div_ceil(limit);
    if sx == 1 && sy == 1 {
        return Ok((image.clone(), (1, 1)));
    }
    let (w, h) = (image.width().div_ceil(sx), image.height().div_ceil(sy));
    let mut px = Vec::with_capacity(w * h * image.channels());
    for j in 0..h {
        for i in 0..w {
            px.extend_from_slice(image.pixel(i * sx, j * sy));
        }
    }
    Ok((ImageRaster::new(w, h, image.channels(), px)?, (sx, sy)))
}

/// Strided subsampling of both images to at most `limit` pixels per side.
pub fn subsample_and_lift(job: &RecolorJob, limit: usize) -> Result<Subsampled> {
    if limit < 8 {
        return invalid(format!("subsample must be at least 8, got {limit}"));
    }
    let (source, source_stride) = strided(&job.source, limit)?;
    let (exemplar, exemplar_stride) = strided(&job.exemplar, limit)?;
    Ok(Subsampled {
        source,
        exemplar,
        source_stride,
        exemplar_stride,
        full_source: (job.source.width(), job.source.height()),
        full_exemplar: (job.exemplar.width(), job.exemplar.height()),
    })
}

impl Subsampled {
    /// Full-resolution map: each pixel follows its nearest subsampled pixel
    /// and keeps its offset from it, rescaled to the exemplar stride.
    pub fn lift(&self, map: &PixelMap) -> Result<PixelMap> {
        let (sw, sh) = (self.source.width(), self.source.height());
        if map.assignment.len() != sw * sh {
            return invalid("map does not match the subsampled source");
        }
        let (fw, fh) = self.full_source;
        let (ew, eh) = self.full_exemplar;
        let (ssx, ssy) = self.source_stride;
        let (esx, esy) = self.exemplar_stride;
        let tw = self.exemplar.width();
        let near = |x: usize, s: usize, n: usize| ((x + s / 2) / s).min(n - 1);
        let place = |t: usize, off: isize, s_src: usize, s_ex: usize, n: usize| {
            let scaled = (off as f64 * s_ex as f64 / s_src as f64).round() as isize;
            (t as isize * s_ex as isize + scaled).clamp(0, n as isize - 1) as usize
        };
        let assignment: Vec<usize> = (0..fw * fh)
            .into_par_iter()
            .map(|k| {
                let (x, y) = (k % fw, k / fw);
                let (i, j) = (near(x, ssx, sw), near(y, ssy, sh));
                let t = map.assignment[j * sw + i];
                let (ti, tj) = (t % tw, t / tw);
                let tx = place(ti, x as isize - (i * ssx) as isize, ssx, esx, ew);
                let ty = place(tj, y as isize - (j * ssy) as isize, ssy, esy, eh);
                ty * ew + tx
            })
            .collect();
        Ok(PixelMap {
            is_permutation: is_bijection(&assignment, ew * eh),
            assignment,
            source_size: (fw, fh),
            target_size: (ew, eh),
        })
    }
}
