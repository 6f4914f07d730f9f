//! Observables and error metrics over trajectory ensembles: coverage,
//! weak/strong errors between hierarchy levels, exit-time statistics,
//! histogram PDFs, relative entropy and the mean-field equilibrium curve.

use crate::error::AnalysisError;
use crate::kmc::TrajectorySample;
use crate::lattice::{CoarseConfig, MicroConfig, PotentialModel};

/// Fraction of occupied sites.
pub fn coverage_micro(sigma: &MicroConfig) -> f64 {
    sigma.n_particles() as f64 / sigma.len() as f64
}

/// Fraction of occupied sites seen through block occupancies.
pub fn coverage_coarse(eta: &CoarseConfig, q: usize) -> f64 {
    eta.n_particles() as f64 / (q * eta.len()) as f64
}

/// Histogram over a scalar observable: `n_bins + 1` strictly increasing
/// edges and normalized bin probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalDistribution {
    pub bin_edges: Vec<f64>,
    pub probs: Vec<f64>,
    pub n_samples: usize,
}

impl EmpiricalDistribution {
    pub fn n_bins(&self) -> usize {
        self.probs.len()
    }
}

/// Equal-width histogram over `[min, max]` (or the given range; samples
/// outside a supplied range are clipped into the edge bins).
pub fn histogram(
    samples: &[f64],
    n_bins: usize,
    range: Option<(f64, f64)>,
) -> Result<EmpiricalDistribution, AnalysisError> {
    if n_bins == 0 {
        return Err(AnalysisError::NoBins);
    }
    if samples.is_empty() {
        return Err(AnalysisError::NoSamples);
    }
    let (mut lo, mut hi) = range.unwrap_or_else(|| {
        samples.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &s| {
            (lo.min(s), hi.max(s))
        })
    });
    if lo == hi {
        lo -= 0.5;
        hi += 0.5;
    }
    let width = (hi - lo) / n_bins as f64;
    let bin_edges: Vec<f64> = (0..=n_bins)
        .map(|i| if i == n_bins { hi } else { lo + i as f64 * width })
        .collect();
    let mut counts = vec![0usize; n_bins];
    for &s in samples {
        let idx = ((s - lo) / width).floor() as isize;
        let idx = idx.clamp(0, n_bins as isize - 1) as usize;
        counts[idx] += 1;
    }
    let n = samples.len();
    let probs = counts.iter().map(|&c| c as f64 / n as f64).collect();
    Ok(EmpiricalDistribution {
        bin_edges,
        probs,
        n_samples: n,
    })
}

/// Two histograms on shared edges spanning the union range of both
/// sample sets — the layout relative-entropy comparisons require.
pub fn histogram_pair(
    a: &[f64],
    b: &[f64],
    n_bins: usize,
) -> Result<(EmpiricalDistribution, EmpiricalDistribution), AnalysisError> {
    if a.is_empty() || b.is_empty() {
        return Err(AnalysisError::NoSamples);
    }
    let lo = a.iter().chain(b).fold(f64::INFINITY, |m, &s| m.min(s));
    let hi = a.iter().chain(b).fold(f64::NEG_INFINITY, |m, &s| m.max(s));
    let ha = histogram(a, n_bins, Some((lo, hi)))?;
    let hb = histogram(b, n_bins, Some((lo, hi)))?;
    Ok((ha, hb))
}

/// Relative entropy `D(p‖r) = Σ p ln(p/r)` in nats over shared bins.
///
/// Bins where `r = 0 < p` make the divergence infinite; that is reported
/// as `f64::INFINITY` rather than smoothed away.
pub fn relative_entropy(
    p: &EmpiricalDistribution,
    r: &EmpiricalDistribution,
) -> Result<f64, AnalysisError> {
    if p.bin_edges != r.bin_edges {
        return Err(AnalysisError::EdgeMismatch);
    }
    Ok(relative_entropy_probs(&p.probs, &r.probs))
}

/// Relative entropy between two probability vectors on the same support.
pub fn relative_entropy_probs(p: &[f64], r: &[f64]) -> f64 {
    debug_assert_eq!(p.len(), r.len());
    let mut sum = 0.0;
    for (&pi, &ri) in p.iter().zip(r) {
        if pi > 0.0 {
            if ri <= 0.0 {
                return f64::INFINITY;
            }
            sum += pi * (pi / ri).ln();
        }
    }
    // Gibbs' inequality guarantees non-negativity; rounding may leave a
    // tiny negative residue for near-identical inputs.
    sum.max(0.0)
}

/// Merge `merge_factor` adjacent bins — the histogram analogue of a
/// block projection acting on distributions.
pub fn coarsen_histogram(
    p: &EmpiricalDistribution,
    merge_factor: usize,
) -> Result<EmpiricalDistribution, AnalysisError> {
    let bins = p.n_bins();
    if merge_factor == 0 || bins % merge_factor != 0 {
        return Err(AnalysisError::BadMergeFactor {
            factor: merge_factor,
            bins,
        });
    }
    let merged = bins / merge_factor;
    let probs = (0..merged)
        .map(|i| p.probs[i * merge_factor..(i + 1) * merge_factor].iter().sum())
        .collect();
    let bin_edges = (0..=merged).map(|i| p.bin_edges[i * merge_factor]).collect();
    Ok(EmpiricalDistribution {
        bin_edges,
        probs,
        n_samples: p.n_samples,
    })
}

/// Time-integrated weak and strong errors between a reference ensemble
/// and a seed-paired coarse ensemble, plus the same numbers relative to
/// the time-integrated reference mean coverage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorReport {
    pub weak: f64,
    pub strong: f64,
    pub weak_relative: f64,
    pub strong_relative: f64,
}

/// Weak error: time integral of `|E c_t - E c^q_t|`. Strong error: time
/// integral of `E|c_t - c^q_t|` over realization-index-paired
/// trajectories. Both use piecewise-constant quadrature on the shared
/// sampling grid.
pub fn weak_strong_errors(
    ensemble_ref: &[Vec<TrajectorySample>],
    ensemble_cg: &[Vec<TrajectorySample>],
) -> Result<ErrorReport, AnalysisError> {
    let n_real = ensemble_ref.len();
    if n_real == 0 || ensemble_cg.len() != n_real {
        return Err(AnalysisError::EnsembleMismatch);
    }
    let grid: Vec<f64> = ensemble_ref[0].iter().map(|s| s.t).collect();
    if grid.len() < 2 {
        return Err(AnalysisError::EnsembleMismatch);
    }
    for traj in ensemble_ref.iter().chain(ensemble_cg) {
        if traj.len() != grid.len() || traj.iter().zip(&grid).any(|(s, &t)| s.t != t) {
            return Err(AnalysisError::EnsembleMismatch);
        }
    }

    let n_pts = grid.len();
    let inv_r = 1.0 / n_real as f64;
    let mut weak = 0.0;
    let mut strong = 0.0;
    let mut ref_mass = 0.0;
    for i in 0..n_pts - 1 {
        let dt = grid[i + 1] - grid[i];
        let mut mean_ref = 0.0;
        let mut mean_cg = 0.0;
        let mut mean_abs = 0.0;
        for r in 0..n_real {
            let a = ensemble_ref[r][i].coverage;
            let b = ensemble_cg[r][i].coverage;
            mean_ref += a;
            mean_cg += b;
            mean_abs += (a - b).abs();
        }
        mean_ref *= inv_r;
        mean_cg *= inv_r;
        mean_abs *= inv_r;
        weak += (mean_ref - mean_cg).abs() * dt;
        strong += mean_abs * dt;
        ref_mass += mean_ref * dt;
    }
    let weak_relative = weak / ref_mass;
    let strong_relative = strong / ref_mass;
    Ok(ErrorReport {
        weak,
        strong,
        weak_relative,
        strong_relative,
    })
}

/// First sample time at which coverage reaches the threshold, or `None`
/// if the trajectory never gets there.
pub fn exit_time(
    trajectory: &[TrajectorySample],
    c_plus: f64,
) -> Result<Option<f64>, AnalysisError> {
    if !(c_plus > 0.0 && c_plus <= 1.0) {
        return Err(AnalysisError::BadThreshold(c_plus));
    }
    Ok(trajectory
        .iter()
        .find(|s| s.coverage >= c_plus)
        .map(|s| s.t))
}

/// Mean and censored fraction of an ensemble of exit times.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExitTimeStats {
    pub mean: f64,
    pub n_crossed: usize,
    pub censored_fraction: f64,
}

/// Average the crossing times, excluding censored runs (which are
/// reported as a fraction instead of being imputed).
pub fn exit_time_stats(times: &[Option<f64>]) -> Result<ExitTimeStats, AnalysisError> {
    if times.is_empty() {
        return Err(AnalysisError::NoSamples);
    }
    let crossed: Vec<f64> = times.iter().filter_map(|&t| t).collect();
    let n_crossed = crossed.len();
    let mean = if n_crossed == 0 {
        f64::NAN
    } else {
        crossed.iter().sum::<f64>() / n_crossed as f64
    };
    Ok(ExitTimeStats {
        mean,
        n_crossed,
        censored_fraction: (times.len() - n_crossed) as f64 / times.len() as f64,
    })
}

/// Equilibrium coverages at one external-field value.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanFieldRoots {
    pub h: f64,
    pub roots: Vec<f64>,
    /// Set when an even root count was found (a tangency).
    pub degenerate: bool,
}

const MEAN_FIELD_MESH: usize = 10_000;

/// Roots in `[0,1]` of the mean-field balance
/// `d0(1-c) = d0·c·exp(-β(J0·c - h))`, located by sign-change bisection
/// on a fixed mesh and refined to 1e-10.
pub fn mean_field_equilibria(model: &PotentialModel, h_range: &[f64]) -> Vec<MeanFieldRoots> {
    h_range
        .iter()
        .map(|&h| {
            let f = |c: f64| (1.0 - c) - c * (-model.beta * (model.j0 * c - h)).exp();
            let mut roots = Vec::new();
            let mut prev_c = 0.0;
            let mut prev_f = f(0.0);
            if prev_f == 0.0 {
                roots.push(0.0);
            }
            for i in 1..=MEAN_FIELD_MESH {
                let c = i as f64 / MEAN_FIELD_MESH as f64;
                let fc = f(c);
                if fc == 0.0 {
                    roots.push(c);
                } else if prev_f != 0.0 && prev_f.signum() != fc.signum() {
                    roots.push(bisect(&f, prev_c, c));
                }
                prev_c = c;
                prev_f = fc;
            }
            let degenerate = roots.len() % 2 == 0;
            MeanFieldRoots {
                h,
                roots,
                degenerate,
            }
        })
        .collect()
}

fn bisect(f: &impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let mut flo = f(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if hi - lo < 1e-10 {
            return mid;
        }
        let fmid = f(mid);
        if fmid == 0.0 {
            return mid;
        }
        if flo.signum() != fmid.signum() {
            hi = mid;
        } else {
            lo = mid;
            flo = fmid;
        }
    }
    0.5 * (lo + hi)
}

/// Least-squares slope of `ln y` against `ln x` with a 2-sigma
/// half-width from the residual spread. Requires positive data.
pub fn fit_loglog_slope(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    assert_eq!(xs.len(), ys.len());
    assert!(xs.len() >= 2, "need at least two points to fit a slope");
    let lx: Vec<f64> = xs.iter().map(|&x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|&y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    if lx.len() == 2 {
        return (slope, 0.0);
    }
    let ss_res: f64 = lx
        .iter()
        .zip(&ly)
        .map(|(x, y)| {
            let e = y - (intercept + slope * x);
            e * e
        })
        .sum();
    let stderr = (ss_res / (n - 2.0) / sxx).sqrt();
    (slope, 2.0 * stderr)
}
