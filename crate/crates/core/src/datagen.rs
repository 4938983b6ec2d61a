//! Synthetic spectrum-like datasets.
//!
//! Every class shares the same set of Gaussian peaks; class `c` has them
//! shifted right by `c · peak_shift` feature indices. Samples are the class
//! template plus i.i.d. Gaussian noise. `peak_shift` controls how far apart
//! the classes are and `noise_std` how much they blur together.
//!
//! Peaks pushed past the last feature are cut off, so separation only grows
//! with `peak_shift` while `(C − 1) · peak_shift` stays well below `dim`.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::rng::RngStream;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenSpec {
    pub class_counts: Vec<usize>,
    pub dim: usize,
    pub peaks_per_class: usize,
    /// Per-class peak displacement, in feature-index units.
    pub peak_shift: f64,
    pub noise_std: f64,
    /// Peak standard deviation, in feature-index units.
    pub peak_width: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Profile {
    PlasmaLike,
    PathogenLike,
    Blobs,
}

impl Profile {
    pub const ALL: [Profile; 3] = [Profile::PlasmaLike, Profile::PathogenLike, Profile::Blobs];

    pub fn name(self) -> &'static str {
        match self {
            Profile::PlasmaLike => "plasma-like",
            Profile::PathogenLike => "pathogen-like",
            Profile::Blobs => "blobs",
        }
    }

    /// Layout and default separability of each profile.
    ///
    /// `plasma-like`: 4 classes of 27/27/30/30 samples, 1868 features. It
    /// clusters well but a linear model needs many labels to separate it.
    /// `pathogen-like`: 4 × 40 samples, 744 features, poorly clustered.
    /// `blobs`: 4 × 40 samples, 64 features, trivially separable.
    pub fn spec(self, seed: u64) -> GenSpec {
        match self {
            Profile::PlasmaLike => GenSpec {
                class_counts: vec![27, 27, 30, 30],
                dim: 1868,
                peaks_per_class: 6,
                peak_shift: 18.0,
                noise_std: 0.7,
                peak_width: 30.0,
                seed,
            },
            Profile::PathogenLike => GenSpec {
                class_counts: vec![40, 40, 40, 40],
                dim: 744,
                peaks_per_class: 4,
                peak_shift: 4.0,
                noise_std: 0.5,
                peak_width: 12.0,
                seed,
            },
            Profile::Blobs => GenSpec {
                class_counts: vec![40, 40, 40, 40],
                dim: 64,
                peaks_per_class: 2,
                peak_shift: 6.0,
                noise_std: 0.15,
                peak_width: 3.0,
                seed,
            },
        }
    }
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Profile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Profile::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::config(format!("unknown profile `{s}`")))
    }
}

impl GenSpec {
    pub fn num_classes(&self) -> usize {
        self.class_counts.len()
    }

    pub fn num_samples(&self) -> usize {
        self.class_counts.iter().sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_classes() < 2 {
            return Err(Error::config("need at least two classes"));
        }
        if self.class_counts.contains(&0) {
            return Err(Error::config("every class needs at least one sample"));
        }
        if self.peaks_per_class == 0 {
            return Err(Error::config("peaks_per_class must be >= 1"));
        }
        if self.dim < 2 * self.peaks_per_class {
            return Err(Error::config(format!(
                "dim {} must be at least 2 × peaks_per_class = {}",
                self.dim,
                2 * self.peaks_per_class
            )));
        }
        if !(self.peak_shift >= 0.0 && self.peak_shift.is_finite()) {
            return Err(Error::config("peak_shift must be >= 0"));
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return Err(Error::config("noise_std must be >= 0"));
        }
        if !(self.peak_width > 0.0 && self.peak_width.is_finite()) {
            return Err(Error::config("peak_width must be > 0"));
        }
        Ok(())
    }

    /// Noise-free spectrum of class `class`.
    pub fn template(&self, class: usize) -> Vec<f64> {
        let stream = RngStream::new(self.seed).derive("template", 0);
        let mut r = stream.rng();
        let peaks: Vec<(f64, f64)> = (0..self.peaks_per_class)
            .map(|_| (r.gen_range(0.0..self.dim as f64), r.gen_range(0.5..1.5)))
            .collect();
        let offset = class as f64 * self.peak_shift;
        let denom = 2.0 * self.peak_width * self.peak_width;
        (0..self.dim)
            .map(|i| {
                peaks
                    .iter()
                    .map(|&(pos, amp)| {
                        let t = i as f64 - pos - offset;
                        amp * (-t * t / denom).exp()
                    })
                    .sum()
            })
            .collect()
    }
}

/// Draws a fully labeled dataset; rows are grouped by class.
pub fn generate(spec: &GenSpec) -> Result<Dataset> {
    spec.validate()?;
    let templates: Vec<Vec<f64>> = (0..spec.num_classes()).map(|c| spec.template(c)).collect();
    let mut noise_rng = RngStream::new(spec.seed).derive("noise", 0).rng();
    let noise = Normal::new(0.0, spec.noise_std).map_err(|e| Error::config(e.to_string()))?;
    let mut features = Vec::with_capacity(spec.num_samples() * spec.dim);
    let mut labels = Vec::with_capacity(spec.num_samples());
    for (class, &count) in spec.class_counts.iter().enumerate() {
        for _ in 0..count {
            features.extend(templates[class].iter().map(|t| t + noise.sample(&mut noise_rng)));
            labels.push(Some(class));
        }
    }
    Dataset::new(features, spec.dim, labels, spec.num_classes())
}
