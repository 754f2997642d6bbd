//! Synthetic signal generators: 1-D hump/chirp classes, 2-D Gaussian classes
//! and canonical example pairs.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::analysis::LabeledDataset;
use crate::error::{invalid, Result, TlpError};
use crate::measure::Signal;

/// Cell averages over `n` uniform cells of `[0,1]` of the indicator of a
/// union of intervals.
pub fn cell_average(intervals: &[(f64, f64)], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n];
    let h = 1.0 / n as f64;
    for &(a, b) in intervals {
        let (a, b) = (a.max(0.0), b.min(1.0));
        if b <= a {
            continue;
        }
        let first = ((a / h).floor() as usize).min(n - 1);
        let last = ((b / h).ceil() as usize).min(n);
        for (i, v) in out.iter_mut().enumerate().take(last).skip(first) {
            let (lo, hi) = (i as f64 * h, (i + 1) as f64 * h);
            let overlap = hi.min(b) - lo.max(a);
            if overlap > 0.0 {
                *v += overlap / h;
            }
        }
    }
    out
}

/// On-intervals of a square wave of wavelength `wavelength` on `[start, end)`;
/// each period starts with its on half.
pub fn square_wave_intervals(start: f64, end: f64, wavelength: f64) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    let mut s = start;
    while s < end {
        out.push((s, (s + 0.5 * wavelength).min(end)));
        s += wavelength;
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum OneDClass {
    /// One hump of width `alpha` at `ell`.
    Hump,
    /// Humps at `ell` and `ell + beta`.
    TwoHumps,
    /// As `TwoHumps`, with the first half of the second hump replaced by a
    /// square wave of wavelength `gamma`.
    HumpChirp,
}

impl OneDClass {
    pub const ALL: [OneDClass; 3] = [OneDClass::Hump, OneDClass::TwoHumps, OneDClass::HumpChirp];

    pub fn from_id(id: u8) -> Result<Self> {
        match id {
            1 => Ok(OneDClass::Hump),
            2 => Ok(OneDClass::TwoHumps),
            3 => Ok(OneDClass::HumpChirp),
            _ => invalid(format!("1-D class id must be 1, 2 or 3, got {id}")),
        }
    }

    pub fn id(self) -> u8 {
        match self {
            OneDClass::Hump => 1,
            OneDClass::TwoHumps => 2,
            OneDClass::HumpChirp => 3,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OneDClassSpec {
    pub class: OneDClass,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub ell_range: (f64, f64),
    pub n: usize,
}

impl OneDClassSpec {
    pub fn new(class: OneDClass) -> Self {
        OneDClassSpec {
            class,
            alpha: 0.15,
            beta: 0.2,
            gamma: 0.02,
            ell_range: (0.05, 0.65),
            n: 256,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (a, b, g) = (self.alpha, self.beta, self.gamma);
        if !(0.0 < g && g < a && a < b && b < 1.0) {
            return invalid(format!(
                "need 0 < gamma < alpha < beta < 1, got ({g}, {a}, {b})"
            ));
        }
        let (lo, hi) = self.ell_range;
        if !(0.0 <= lo && lo <= hi) {
            return invalid(format!("bad placement range [{lo}, {hi}]"));
        }
        let reach = match self.class {
            OneDClass::Hump => a,
            _ => b + a,
        };
        if hi + reach > 1.0 {
            return invalid(format!("humps at ell = {hi} leave [0, 1]"));
        }
        if self.n < 2 {
            return invalid("resolution must be at least 2");
        }
        Ok(())
    }

    /// The member of the class at placement `ell`.
    pub fn signal_at(&self, ell: f64) -> Result<Signal> {
        let (a, b) = (self.alpha, self.beta);
        let intervals = match self.class {
            OneDClass::Hump => vec![(ell, ell + a)],
            OneDClass::TwoHumps => vec![(ell, ell + a), (ell + b, ell + b + a)],
            OneDClass::HumpChirp => {
                let mid = ell + b + 0.5 * a;
                let mut v = vec![(ell, ell + a)];
                v.extend(square_wave_intervals(ell + b, mid, self.gamma));
                v.push((mid, ell + b + a));
                v
            }
        };
        Signal::from_samples(cell_average(&intervals, self.n))
    }
}

/// `count` class members with placements uniform in `ell_range`.
pub fn gen_1d_class(spec: &OneDClassSpec, count: usize, seed: u64) -> Result<Vec<Signal>> {
    spec.validate()?;
    if count == 0 {
        return invalid("need at least one signal");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = spec.ell_range;
    (0..count)
        .map(|_| {
            spec.signal_at(if hi > lo {
                rng.random_range(lo..hi)
            } else {
                lo
            })
        })
        .collect()
}

/// `count` members of each of the three 1-D classes, labelled `C1`..`C3`.
pub fn dataset_1d(base: &OneDClassSpec, count: usize, seed: u64) -> Result<LabeledDataset> {
    let mut signals = Vec::new();
    let mut labels = Vec::new();
    for class in OneDClass::ALL {
        let spec = OneDClassSpec { class, ..*base };
        signals.extend(gen_1d_class(
            &spec,
            count,
            seed.wrapping_mul(3).wrapping_add(class.id() as u64),
        )?);
        labels.extend(std::iter::repeat_n(format!("C{}", class.id()), count));
    }
    LabeledDataset::new(signals, labels)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TwoDClass {
    /// `alpha * phi(x | gamma, s Id)`.
    P,
    /// `alpha * (phi(x | gamma1, s Id) - phi(x | gamma2, s Id))`.
    Q,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwoDClassSpec {
    pub class: TwoDClass,
    pub sigma_scale: f64,
    pub alpha_range: (f64, f64),
    pub width: usize,
    pub height: usize,
}

impl TwoDClassSpec {
    pub fn new(class: TwoDClass) -> Self {
        TwoDClassSpec {
            class,
            sigma_scale: 0.01,
            alpha_range: (0.5, 1.0),
            width: 32,
            height: 32,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_scale > 0.0) {
            return invalid("sigma_scale must be positive");
        }
        let (lo, hi) = self.alpha_range;
        if !(lo <= hi && lo.is_finite() && hi.is_finite()) {
            return invalid(format!("bad amplitude range [{lo}, {hi}]"));
        }
        if self.width == 0 || self.height == 0 {
            return invalid("grid must be nonempty");
        }
        Ok(())
    }

    /// Isotropic normal density with covariance `sigma_scale * Id` at cell centers.
    fn gaussian(&self, mean: (f64, f64)) -> Vec<f64> {
        let s = self.sigma_scale;
        let mut v = Vec::with_capacity(self.width * self.height);
        for r in 0..self.height {
            for c in 0..self.width {
                let x = (c as f64 + 0.5) / self.width as f64 - mean.0;
                let y = (r as f64 + 0.5) / self.height as f64 - mean.1;
                v.push((-(x * x + y * y) / (2.0 * s)).exp() / (2.0 * PI * s));
            }
        }
        v
    }

    pub fn p_signal(&self, alpha: f64, gamma: (f64, f64)) -> Result<Signal> {
        let v = self
            .gaussian(gamma)
            .into_iter()
            .map(|g| alpha * g)
            .collect();
        Signal::on_grid(&[self.width, self.height], 1, v)
    }

    pub fn q_signal(&self, alpha: f64, gamma1: (f64, f64), gamma2: (f64, f64)) -> Result<Signal> {
        let (a, b) = (self.gaussian(gamma1), self.gaussian(gamma2));
        let v = a
            .iter()
            .zip(&b)
            .map(|(x, y)| alpha * x - alpha * y)
            .collect();
        Signal::on_grid(&[self.width, self.height], 1, v)
    }
}

pub fn gen_2d_class(spec: &TwoDClassSpec, count: usize, seed: u64) -> Result<Vec<Signal>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = spec.alpha_range;
    (0..count)
        .map(|_| {
            let alpha = if hi > lo {
                rng.random_range(lo..hi)
            } else {
                lo
            };
            let mut point = || (rng.random::<f64>(), rng.random::<f64>());
            match spec.class {
                TwoDClass::P => spec.p_signal(alpha, point()),
                TwoDClass::Q => {
                    let g1 = point();
                    spec.q_signal(alpha, g1, point())
                }
            }
        })
        .collect()
}

/// `count` members of each 2-D class, labelled `P` and `Q`.
pub fn dataset_2d(count: usize, width: usize, height: usize, seed: u64) -> Result<LabeledDataset> {
    let mut signals = Vec::new();
    let mut labels = Vec::new();
    for (k, class) in [TwoDClass::P, TwoDClass::Q].into_iter().enumerate() {
        let spec = TwoDClassSpec {
            width,
            height,
            ..TwoDClassSpec::new(class)
        };
        signals.extend(gen_2d_class(
            &spec,
            count,
            seed.wrapping_mul(2).wrapping_add(k as u64),
        )?);
        labels.extend(std::iter::repeat_n(format!("{class:?}"), count));
    }
    LabeledDataset::new(signals, labels)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ExampleKind {
    /// A bump and its translate, both lifted by `offset` and renormalized to
    /// unit mass.
    ShiftRenorm,
    /// `f = A phi` and `g = f + A xi` with `xi` a square wave of wavelength
    /// `wavelength`.
    HighFreq,
    /// `A chi_[x0, x0 + w]` and its translate by `shift * w`.
    TranslatedBump,
}

impl fmt::Display for ExampleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ExampleKind::ShiftRenorm => "SHIFT_RENORM",
            ExampleKind::HighFreq => "HIGH_FREQ",
            ExampleKind::TranslatedBump => "TRANSLATED_BUMP",
        })
    }
}

impl FromStr for ExampleKind {
    type Err = TlpError;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().replace('-', "_").as_str() {
            "SHIFT_RENORM" => Ok(ExampleKind::ShiftRenorm),
            "HIGH_FREQ" => Ok(ExampleKind::HighFreq),
            "TRANSLATED_BUMP" => Ok(ExampleKind::TranslatedBump),
            _ => invalid(format!("unknown example kind '{s}'")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExampleParams {
    pub amplitude: f64,
    /// Translation in units of the bump width.
    pub shift: f64,
    pub offset: f64,
    pub wavelength: f64,
    pub width: f64,
    pub start: f64,
    pub n: usize,
}

impl Default for ExampleParams {
    fn default() -> Self {
        ExampleParams {
            amplitude: 1.0,
            shift: 0.5,
            offset: 1.0,
            wavelength: 1.0 / 16.0,
            width: 0.1,
            start: 0.05,
            n: 256,
        }
    }
}

fn bump_pair(params: &ExampleParams) -> Result<(Vec<f64>, Vec<f64>)> {
    let (x0, w, l) = (params.start, params.width, params.shift);
    if !(x0 >= 0.0 && w > 0.0 && l >= 0.0 && x0 + (l + 1.0) * w <= 1.0 + 1e-12) {
        return invalid(format!(
            "bump at {x0} of width {w} shifted by {l} widths leaves [0, 1]"
        ));
    }
    let f = cell_average(&[(x0, x0 + w)], params.n);
    let g = cell_average(&[(x0 + l * w, x0 + (l + 1.0) * w)], params.n);
    let a = params.amplitude;
    Ok((
        f.into_iter().map(|v| a * v).collect(),
        g.into_iter().map(|v| a * v).collect(),
    ))
}

pub fn gen_example_pair(kind: ExampleKind, params: &ExampleParams) -> Result<(Signal, Signal)> {
    if params.n < 2 {
        return invalid("resolution must be at least 2");
    }
    let n = params.n;
    let (f, g) = match kind {
        ExampleKind::TranslatedBump => bump_pair(params)?,
        ExampleKind::ShiftRenorm => {
            if !(params.offset > 0.0) {
                return invalid("offset must be positive");
            }
            let (f, g) = bump_pair(params)?;
            let lift = |v: Vec<f64>| {
                let mass: f64 = v.iter().map(|x| (x + params.offset) / n as f64).sum();
                v.into_iter()
                    .map(|x| (x + params.offset) / mass)
                    .collect::<Vec<f64>>()
            };
            (lift(f), lift(g))
        }
        ExampleKind::HighFreq => {
            if !(params.wavelength > 0.0 && params.wavelength <= 1.0) {
                return invalid("wavelength must lie in (0, 1]");
            }
            let a = params.amplitude;
            let on = cell_average(&square_wave_intervals(0.0, 1.0, params.wavelength), n);
            let base: Vec<f64> = (0..n)
                .map(|i| a * (1.0 + 0.5 * (2.0 * PI * (i as f64 + 0.5) / n as f64).sin()))
                .collect();
            let g = base
                .iter()
                .zip(&on)
                .map(|(b, s)| b + a * 0.5 * (2.0 * s - 1.0))
                .collect();
            (base, g)
        }
    };
    Ok((Signal::from_samples(f)?, Signal::from_samples(g)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distance::{ot_distance, SolverSettings};

    #[test]
    fn cell_average_is_exact_on_aligned_and_partial_cells() {
        assert_eq!(cell_average(&[(0.25, 0.5)], 4), vec![0.0, 1.0, 0.0, 0.0]);
        let v = cell_average(&[(0.1, 0.3)], 4);
        assert!((v[0] - 0.6).abs() < 1e-12 && (v[1] - 0.2).abs() < 1e-12);
        assert!((v.iter().sum::<f64>() / 4.0 - 0.2).abs() < 1e-12);
    }

    #[test]
    fn one_d_generation_is_deterministic() {
        let spec = OneDClassSpec::new(OneDClass::HumpChirp);
        assert_eq!(
            gen_1d_class(&spec, 1, 9).unwrap()[0].values(),
            gen_1d_class(&spec, 1, 9).unwrap()[0].values()
        );
        assert_eq!(gen_1d_class(&spec, 4, 9).unwrap().len(), 4);
    }

    #[test]
    fn hump_integrates_to_width() {
        let spec = OneDClassSpec::new(OneDClass::Hump);
        for s in gen_1d_class(&spec, 5, 3).unwrap() {
            assert!((s.integral().unwrap() - spec.alpha).abs() < 1.0 / spec.n as f64);
        }
        let two = OneDClassSpec::new(OneDClass::TwoHumps);
        let chirp = OneDClassSpec::new(OneDClass::HumpChirp);
        let m2 = two.signal_at(0.2).unwrap().integral().unwrap();
        let m3 = chirp.signal_at(0.2).unwrap().integral().unwrap();
        assert!((m2 - 2.0 * spec.alpha).abs() < 1e-9);
        assert!((m3 - 1.75 * spec.alpha).abs() < 2.0 / spec.n as f64);
    }

    #[test]
    fn placement_is_validated() {
        let mut spec = OneDClassSpec::new(OneDClass::TwoHumps);
        spec.ell_range = (0.1, 0.7);
        assert!(gen_1d_class(&spec, 2, 0).is_err());
        spec = OneDClassSpec {
            gamma: 0.5,
            ..OneDClassSpec::new(OneDClass::Hump)
        };
        assert!(spec.validate().is_err());
    }

    #[test]
    fn p_mode_is_near_mean() {
        let spec = TwoDClassSpec::new(TwoDClass::P);
        let gamma = (0.37, 0.71);
        let s = spec.p_signal(0.8, gamma).unwrap();
        let (i, _) = s
            .values()
            .iter()
            .enumerate()
            .fold((0, f64::MIN), |b, (i, &v)| if v > b.1 { (i, v) } else { b });
        let (c, r) = (i % spec.width, i / spec.width);
        assert!(((c as f64 + 0.5) / 32.0 - gamma.0).abs() <= 1.0 / 32.0);
        assert!(((r as f64 + 0.5) / 32.0 - gamma.1).abs() <= 1.0 / 32.0);
        let x = s.measure().points().point(i);
        assert!(
            (x[0] - (c as f64 + 0.5) / 32.0).abs() < 1e-12
                && (x[1] - (r as f64 + 0.5) / 32.0).abs() < 1e-12
        );
    }

    #[test]
    fn q_cancels_and_has_zero_mean_interior() {
        let spec = TwoDClassSpec::new(TwoDClass::Q);
        let z = spec.q_signal(0.9, (0.4, 0.6), (0.4, 0.6)).unwrap();
        assert!(z.values().iter().all(|&v| v == 0.0));
        let q = spec.q_signal(0.9, (0.4, 0.6), (0.6, 0.3)).unwrap();
        let p_in = |s: &Signal| s.integral().unwrap() / 0.9;
        let lost = 2.0
            - p_in(&spec.p_signal(0.9, (0.4, 0.6)).unwrap())
            - p_in(&spec.p_signal(0.9, (0.6, 0.3)).unwrap());
        assert!(
            q.integral().unwrap().abs() <= 0.9 * lost.abs() + 1e-9,
            "{} vs {lost}",
            q.integral().unwrap()
        );
        assert!(q.values().iter().any(|&v| v < 0.0));
    }

    #[test]
    fn two_d_generation_is_deterministic() {
        let a = dataset_2d(3, 8, 8, 5).unwrap();
        let b = dataset_2d(3, 8, 8, 5).unwrap();
        for (x, y) in a.signals().iter().zip(b.signals()) {
            assert_eq!(x.values(), y.values());
        }
        assert_eq!(a.labels(), &["P", "P", "P", "Q", "Q", "Q"]);
    }

    #[test]
    fn example_degenerate_cases() {
        let p = ExampleParams {
            shift: 0.0,
            ..Default::default()
        };
        let (f, g) = gen_example_pair(ExampleKind::TranslatedBump, &p).unwrap();
        assert_eq!(f.values(), g.values());
        let p = ExampleParams {
            amplitude: 0.0,
            ..Default::default()
        };
        let (f, g) = gen_example_pair(ExampleKind::HighFreq, &p).unwrap();
        assert_eq!(f.values(), g.values());
        assert!("WIGGLE".parse::<ExampleKind>().is_err());
        assert_eq!(
            "high_freq".parse::<ExampleKind>().unwrap(),
            ExampleKind::HighFreq
        );
    }

    #[test]
    fn shift_renorm_pairs_have_unit_mass_and_shrinking_ot() {
        let mut prev = f64::INFINITY;
        for offset in [1.0, 2.0, 4.0] {
            let p = ExampleParams {
                offset,
                amplitude: 0.25,
                ..Default::default()
            };
            let (f, g) = gen_example_pair(ExampleKind::ShiftRenorm, &p).unwrap();
            assert!((f.integral().unwrap() - 1.0).abs() < 1e-12);
            let d = ot_distance(&f, &g, 2.0, &SolverSettings::exact()).unwrap();
            assert!(d < prev);
            prev = d;
        }
    }

    #[test]
    fn high_freq_perturbation_has_zero_mean() {
        let (f, g) = gen_example_pair(ExampleKind::HighFreq, &ExampleParams::default()).unwrap();
        assert!((f.integral().unwrap() - g.integral().unwrap()).abs() < 1e-12);
        assert!(g.values().iter().all(|&v| v >= 0.0));
    }
}
