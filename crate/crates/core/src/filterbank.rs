//! Multi-subband resampling: each subband applies its own graph filter,
//! derives an optimal distribution and draws `⌈αN⌉` samples.

use std::collections::BTreeMap;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::cloud::{spectral_norm, PointCloud};
use crate::error::{bad_params, Result};
use crate::filters::{haar_highpass, haar_lowpass, ideal_lowpass};
use crate::graph::{shift_operator, IsolatedPolicy, ShiftKind, ShiftOperator, SparseGraph};
use crate::resampling::{
    dist_allpass, dist_haar_lowpass, dist_highpass, dist_ideal_lowpass, sample, ResampleResult, ResamplingDistribution,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SubbandFilter {
    AllPass,
    HaarHighpass,
    HaarLowpass,
    IdealLowpass { bandwidth: usize },
}

impl SubbandFilter {
    pub fn name(self) -> &'static str {
        match self {
            SubbandFilter::AllPass => "allpass",
            SubbandFilter::HaarHighpass => "haar-highpass",
            SubbandFilter::HaarLowpass => "haar-lowpass",
            SubbandFilter::IdealLowpass { .. } => "ideal-lowpass",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubbandSpec {
    pub filter: SubbandFilter,
    /// Sampling ratio in `(0, 1]`; the subband draws `⌈αN⌉` points.
    pub alpha: f64,
    /// Emit filtered coordinates `h(A)X` instead of the original ones.
    pub use_filtered_points: bool,
}

impl SubbandSpec {
    pub fn new(filter: SubbandFilter, alpha: f64) -> Self {
        Self {
            filter,
            alpha,
            use_filtered_points: false,
        }
    }

    pub fn sample_count(&self, n: usize) -> usize {
        (self.alpha * n as f64).ceil() as usize
    }
}

#[derive(Debug, Clone)]
pub struct SubbandResult {
    pub spec: SubbandSpec,
    pub distribution: ResamplingDistribution,
    pub result: ResampleResult,
    /// Coordinates the samples refer to: original or filtered.
    pub points: DMatrix<f64>,
}

/// One merged slot, tagged with the subband that drew it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MergedSample {
    pub index: usize,
    pub weight: f64,
    pub subband: usize,
}

#[derive(Debug, Clone)]
pub struct BankResult {
    pub subbands: Vec<SubbandResult>,
    /// All slots in subband order; duplicates across subbands are kept.
    pub merged: Vec<MergedSample>,
}

impl BankResult {
    pub fn len(&self) -> usize {
        self.merged.len()
    }

    pub fn is_empty(&self) -> bool {
        self.merged.is_empty()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("slot,index,weight,subband\n");
        for (j, s) in self.merged.iter().enumerate() {
            out.push_str(&format!("{j},{},{:.16e},{}\n", s.index, s.weight, s.subband));
        }
        out
    }
}

/// Independent seed for subband `i`, derived from the bank seed.
fn subband_seed(seed: u64, i: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(i as u64 + 1);
    rng.next_u64()
}

fn run_subband(
    cloud: &PointCloud,
    shift: &ShiftOperator,
    c: f64,
    spec: &SubbandSpec,
    seed: u64,
) -> Result<SubbandResult> {
    let x = cloud.coords();
    let (distribution, filtered) = match spec.filter {
        SubbandFilter::AllPass => (dist_allpass(cloud, c)?, x.clone()),
        SubbandFilter::HaarHighpass => (dist_highpass(shift, cloud, 2)?, haar_highpass(shift)?.apply(x)?),
        SubbandFilter::HaarLowpass => (
            dist_haar_lowpass(shift, cloud, c)?,
            haar_lowpass(shift)?.apply(x)? * 0.5,
        ),
        SubbandFilter::IdealLowpass { bandwidth } => {
            let basis = ideal_lowpass(shift, bandwidth)?;
            (dist_ideal_lowpass(&basis, cloud, c)?, basis.project(x)?)
        }
    };
    let result = sample(&distribution, spec.sample_count(cloud.len()), seed)?;
    Ok(SubbandResult {
        spec: *spec,
        distribution,
        result,
        points: if spec.use_filtered_points { filtered } else { x.clone() },
    })
}

/// Runs every subband on a transition shift built from `graph`.
/// `c` in the rotation-variant distributions is the spectral norm of the coordinates.
pub fn run_bank(cloud: &PointCloud, graph: &SparseGraph, specs: &[SubbandSpec], seed: u64) -> Result<BankResult> {
    if specs.is_empty() {
        return Err(bad_params("filter bank needs at least one subband"));
    }
    for s in specs {
        if !(s.alpha > 0.0 && s.alpha <= 1.0) {
            return Err(bad_params(format!("subband ratio must lie in (0, 1], got {}", s.alpha)));
        }
    }
    let shift = shift_operator(graph, ShiftKind::Transition, IsolatedPolicy::SelfLoop)?;
    let c = spectral_norm(cloud.coords())?;
    let subbands = specs
        .par_iter()
        .enumerate()
        .map(|(i, spec)| run_subband(cloud, &shift, c, spec, subband_seed(seed, i)))
        .collect::<Result<Vec<_>>>()?;
    let merged = subbands
        .iter()
        .enumerate()
        .flat_map(|(b, s)| {
            s.result
                .indices
                .iter()
                .zip(&s.result.weights)
                .map(move |(&index, &weight)| MergedSample {
                    index,
                    weight,
                    subband: b,
                })
        })
        .collect();
    Ok(BankResult { subbands, merged })
}

/// Deduplicated union of the sampled points with a trailing attribute
/// column holding the summed slot weights. Points are keyed by index and,
/// for subbands emitting filtered coordinates, by subband.
pub fn passthrough_synthesis(bank: &BankResult, cloud: &PointCloud) -> Result<PointCloud> {
    let mut union: BTreeMap<(Option<usize>, usize), f64> = BTreeMap::new();
    for s in &bank.merged {
        let source = bank.subbands[s.subband].spec.use_filtered_points.then_some(s.subband);
        *union.entry((source, s.index)).or_insert(0.0) += s.weight;
    }
    let m = cloud.attr_dim();
    let mut coords = DMatrix::zeros(union.len(), 3);
    let mut attrs = DMatrix::zeros(union.len(), m + 1);
    for (row, (&(source, i), &w)) in union.iter().enumerate() {
        let points = match source {
            Some(b) => &bank.subbands[b].points,
            None => cloud.coords(),
        };
        coords.row_mut(row).copy_from(&points.row(i));
        for k in 0..m {
            attrs[(row, k)] = cloud.attrs()[(i, k)];
        }
        attrs[(row, m)] = w;
    }
    PointCloud::new(coords, attrs)
}

impl FromStr for SubbandFilter {
    type Err = crate::error::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "allpass" => Ok(SubbandFilter::AllPass),
            "haar-highpass" | "highpass" => Ok(SubbandFilter::HaarHighpass),
            "haar-lowpass" => Ok(SubbandFilter::HaarLowpass),
            "ideal-lowpass" => Ok(SubbandFilter::IdealLowpass { bandwidth: 0 }),
            other => Err(bad_params(format!("unknown subband filter `{other}`"))),
        }
    }
}

#[derive(Default)]
struct PartialSpec {
    filter: Option<SubbandFilter>,
    alpha: Option<f64>,
    bandwidth: Option<usize>,
    use_filtered: bool,
}

/// Parses `subband.<i>.<key> = value` lines (`filter`, `alpha`,
/// `bandwidth`, `use_filtered`); `#` starts a comment. Subbands are
/// returned in ascending `i`.
pub fn parse_bank_config(text: &str) -> Result<Vec<SubbandSpec>> {
    let mut parts: BTreeMap<usize, PartialSpec> = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |msg: &str| bad_params(format!("bank config line {}: {msg}", lineno + 1));
        let (key, value) = line.split_once('=').ok_or_else(|| err("expected key = value"))?;
        let (key, value) = (key.trim(), value.trim());
        let mut path = key.split('.');
        let (Some("subband"), Some(index), Some(field), None) = (path.next(), path.next(), path.next(), path.next())
        else {
            return Err(err("expected subband.<i>.<key>"));
        };
        let index: usize = index.parse().map_err(|_| err("subband index must be an integer"))?;
        let entry = parts.entry(index).or_default();
        match field {
            "filter" => entry.filter = Some(value.parse().map_err(|_| err("unknown filter"))?),
            "alpha" => entry.alpha = Some(value.parse().map_err(|_| err("alpha must be a number"))?),
            "bandwidth" => entry.bandwidth = Some(value.parse().map_err(|_| err("bandwidth must be an integer"))?),
            "use_filtered" => {
                entry.use_filtered = value.parse().map_err(|_| err("use_filtered must be true or false"))?
            }
            other => return Err(err(&format!("unknown key `{other}`"))),
        }
    }
    if parts.is_empty() {
        return Err(bad_params("bank config defines no subbands"));
    }
    parts
        .into_iter()
        .map(|(i, p)| {
            let mut filter = p
                .filter
                .ok_or_else(|| bad_params(format!("subband {i} has no filter")))?;
            if let SubbandFilter::IdealLowpass { bandwidth } = &mut filter {
                *bandwidth = p
                    .bandwidth
                    .ok_or_else(|| bad_params(format!("subband {i} needs a bandwidth")))?;
            }
            Ok(SubbandSpec {
                filter,
                alpha: p.alpha.ok_or_else(|| bad_params(format!("subband {i} has no alpha")))?,
                use_filtered_points: p.use_filtered,
            })
        })
        .collect()
}
