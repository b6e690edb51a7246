//! Entropy and mutual-information kernels, capacity / secrecy-capacity
//! search over input distributions, and Gaussian wiretap closed forms.
//!
//! All logarithms are base 2; rates are in bits per channel use.

use serde::{Deserialize, Serialize};

use crate::channel::ChannelModel;
use crate::error::{Error, Result};
use crate::scalar::Real;

pub const DEFAULT_GRID_STEPS: usize = 201;
pub const DEFAULT_REFINE_ITERS: usize = 60;

/// Rates at or below this are treated as zero secrecy.
pub const MIN_SECRECY_RATE: f64 = 1e-12;
/// `C / R_s` within this distance of an integer counts as integer.
pub const INTEGER_RATIO_TOL: f64 = 1e-9;
// Objective differences below this are ties during grid search.
const TIE_TOL: f64 = 1e-14;

/// `x log2 x` with `0 log 0 = 0`.
fn xlog2x<T: Real>(x: T) -> T {
    if x > T::zero() {
        x * x.log2()
    } else {
        T::zero()
    }
}

/// Shannon entropy in bits.
pub fn entropy<T: Real>(probs: &[T]) -> T {
    -probs.iter().map(|&p| xlog2x(p)).sum::<T>()
}

/// Binary entropy function `h2(p)`.
pub fn binary_entropy<T: Real>(p: T) -> T {
    entropy(&[p, T::one() - p])
}

fn validate_joint<T: Real>(data: &[T]) -> Result<()> {
    if let Some((i, p)) = data
        .iter()
        .enumerate()
        .find(|(_, p)| !(**p >= T::zero()) || !p.is_finite())
    {
        return Err(Error::Validation(format!(
            "joint entry {i} is {p}, expected a finite nonnegative probability"
        )));
    }
    let mass: T = data.iter().copied().sum();
    if (mass - T::one()).abs() > T::mass_tolerance() {
        return Err(Error::Validation(format!("joint has total mass {mass}")));
    }
    Ok(())
}

/// `I(A;B|C)` of a dense `[a][b][c]` table, without validation. Entries
/// need not be normalized as long as the caller's scale is a probability.
pub(crate) fn cmi_unchecked<T: Real>(data: &[T], na: usize, nb: usize, nc: usize) -> T {
    debug_assert_eq!(data.len(), na * nb * nc);
    let mut p_c = vec![T::zero(); nc];
    let mut p_ac = vec![T::zero(); na * nc];
    let mut p_bc = vec![T::zero(); nb * nc];
    for a in 0..na {
        for b in 0..nb {
            let row = &data[(a * nb + b) * nc..(a * nb + b + 1) * nc];
            for (c, &p) in row.iter().enumerate() {
                p_c[c] = p_c[c] + p;
                p_ac[a * nc + c] = p_ac[a * nc + c] + p;
                p_bc[b * nc + c] = p_bc[b * nc + c] + p;
            }
        }
    }
    // I(A;B|C) = H(A,C) + H(B,C) - H(C) - H(A,B,C), term by term to keep
    // the cancellation local.
    let mut acc = T::zero();
    for a in 0..na {
        for b in 0..nb {
            for c in 0..nc {
                let p = data[(a * nb + b) * nc + c];
                if p > T::zero() {
                    let ratio = (p * p_c[c]) / (p_ac[a * nc + c] * p_bc[b * nc + c]);
                    acc = acc + p * ratio.log2();
                }
            }
        }
    }
    acc.max(T::zero())
}

/// `I(A;B)` in bits for a joint table `joint[a][b]`.
pub fn mutual_information<T: Real>(joint: &[Vec<T>]) -> Result<T> {
    let (flat, rows, cols) = flatten_matrix(joint)?;
    mutual_information_flat(&flat, rows, cols)
}

/// `I(A;B)` for a row-major `rows x cols` table.
pub fn mutual_information_flat<T: Real>(data: &[T], rows: usize, cols: usize) -> Result<T> {
    conditional_mi_flat(data, rows, cols, 1)
}

/// `I(A;B|C)` in bits for a joint tensor `joint[a][b][c]`.
pub fn conditional_mi<T: Real>(joint: &[Vec<Vec<T>>]) -> Result<T> {
    let na = joint.len();
    let nb = joint.first().map_or(0, Vec::len);
    let nc = joint.first().and_then(|p| p.first()).map_or(0, Vec::len);
    let mut flat = Vec::with_capacity(na * nb * nc);
    for plane in joint {
        if plane.len() != nb {
            return Err(Error::Validation("ragged joint tensor".into()));
        }
        for row in plane {
            if row.len() != nc {
                return Err(Error::Validation("ragged joint tensor".into()));
            }
            flat.extend_from_slice(row);
        }
    }
    conditional_mi_flat(&flat, na, nb, nc)
}

/// `I(A;B|C)` for a row-major `[a][b][c]` table.
pub fn conditional_mi_flat<T: Real>(data: &[T], na: usize, nb: usize, nc: usize) -> Result<T> {
    if na * nb * nc == 0 || data.len() != na * nb * nc {
        return Err(Error::Validation(format!(
            "joint of length {} does not match shape {na}x{nb}x{nc}",
            data.len()
        )));
    }
    validate_joint(data)?;
    Ok(cmi_unchecked(data, na, nb, nc))
}

fn flatten_matrix<T: Real>(joint: &[Vec<T>]) -> Result<(Vec<T>, usize, usize)> {
    let rows = joint.len();
    let cols = joint.first().map_or(0, Vec::len);
    if joint.iter().any(|r| r.len() != cols) {
        return Err(Error::Validation("ragged joint matrix".into()));
    }
    Ok((joint.concat(), rows, cols))
}

/// A probability vector over the channel input alphabet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct InputDistribution<T>(Vec<T>);

impl<T: Real> InputDistribution<T> {
    pub fn new(probs: Vec<T>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::Validation("empty input distribution".into()));
        }
        validate_joint(&probs)?;
        Ok(InputDistribution(probs))
    }

    pub fn uniform(size: usize) -> Self {
        let p = T::one() / T::from_usize(size).unwrap();
        InputDistribution(vec![p; size])
    }

    pub fn probs(&self) -> &[T] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.0.iter().map(|p| p.to_f64().unwrap()).collect()
    }
}

/// `I(X;Out)` for input law `px` and a row-major kernel `p(out|x)`.
fn input_output_mi<T: Real>(px: &[T], kernel: &[T], out_size: usize) -> T {
    let mut joint = Vec::with_capacity(kernel.len());
    for (x, &p) in px.iter().enumerate() {
        joint.extend(kernel[x * out_size..(x + 1) * out_size].iter().map(|&k| p * k));
    }
    cmi_unchecked(&joint, px.len(), out_size, 1)
}

/// `I(X;Y)` for Bob under the given input law.
pub fn bob_information<T: Real>(model: &ChannelModel<T>, px: &InputDistribution<T>) -> T {
    input_output_mi(px.probs(), &model.bob_matrix().concat(), model.y_size())
}

/// `I(X;Z)` for Eve under the given input law.
pub fn eve_information<T: Real>(model: &ChannelModel<T>, px: &InputDistribution<T>) -> T {
    input_output_mi(px.probs(), &model.eve_matrix().concat(), model.z_size())
}

/// `C`, `R_s`, `lambda` and the maximizing input laws of a channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateProfile<T> {
    pub main_capacity: T,
    pub secrecy_capacity: T,
    pub lambda: u64,
    pub ratio_is_integer: bool,
    /// `None` for the Gaussian closed forms.
    pub optimizer_c: Option<InputDistribution<T>>,
    pub optimizer_rs: Option<InputDistribution<T>>,
    /// Number of grid points tied with the selected maximizer; the
    /// lowest-index one is kept.
    pub grid_ties_c: usize,
    pub grid_ties_rs: usize,
}

impl<T: Real> RateProfile<T> {
    /// Derives `lambda` from `C` and `R_s`.
    pub fn from_rates(main_capacity: T, secrecy_capacity: T) -> Result<Self> {
        if !(secrecy_capacity > T::lit(MIN_SECRECY_RATE)) {
            return Err(Error::NoSecrecy {
                secrecy_capacity: secrecy_capacity.to_f64().unwrap_or(f64::NAN),
            });
        }
        if secrecy_capacity > main_capacity + T::lit(INTEGER_RATIO_TOL) {
            return Err(Error::Validation(format!(
                "secrecy capacity {secrecy_capacity} exceeds main capacity {main_capacity}"
            )));
        }
        let ratio = (main_capacity / secrecy_capacity).to_f64().unwrap();
        let ratio_is_integer = (ratio - ratio.round()).abs() < INTEGER_RATIO_TOL;
        let lambda = if ratio_is_integer {
            ratio.round()
        } else {
            ratio.floor()
        }
        .max(1.0) as u64;
        Ok(RateProfile {
            main_capacity,
            secrecy_capacity,
            lambda,
            ratio_is_integer,
            optimizer_c: None,
            optimizer_rs: None,
            grid_ties_c: 0,
            grid_ties_rs: 0,
        })
    }

    pub fn ratio(&self) -> T {
        self.main_capacity / self.secrecy_capacity
    }

    /// Steady-state keyed rate `lambda * R_s`.
    pub fn steady_rate(&self) -> T {
        T::from_u64(self.lambda).unwrap() * self.secrecy_capacity
    }
}

/// Lexicographic walk over integer compositions of `total` into `parts`.
struct SimplexGrid {
    counts: Vec<usize>,
    total: usize,
    done: bool,
}

impl SimplexGrid {
    fn new(parts: usize, total: usize) -> Self {
        let mut counts = vec![0; parts];
        counts[parts - 1] = total;
        SimplexGrid {
            counts,
            total,
            done: false,
        }
    }

    fn advance(&mut self) {
        // Find the rightmost position (before the last) that can be
        // incremented, then push the remainder into the last slot.
        let k = self.counts.len();
        if k == 1 {
            self.done = true;
            return;
        }
        let mut i = k - 1;
        loop {
            if i == 0 {
                self.done = true;
                return;
            }
            i -= 1;
            let used: usize = self.counts[..=i].iter().sum();
            if used < self.total {
                self.counts[i] += 1;
                for c in &mut self.counts[i + 1..] {
                    *c = 0;
                }
                let used: usize = self.counts[..k - 1].iter().sum();
                self.counts[k - 1] = self.total - used;
                return;
            }
        }
    }
}

impl Iterator for SimplexGrid {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        if self.done {
            return None;
        }
        let out = self.counts.clone();
        self.advance();
        Some(out)
    }
}

struct SearchResult<T> {
    value: T,
    point: Vec<T>,
    ties: usize,
}

fn maximize_over_simplex<T: Real, F>(
    size: usize,
    grid_steps: usize,
    refine_iters: usize,
    objective: F,
) -> SearchResult<T>
where
    F: Fn(&[T]) -> T,
{
    let total = grid_steps - 1;
    let scale = T::from_usize(total).unwrap();
    let tie = T::lit(TIE_TOL);
    let mut best: Option<(T, Vec<T>)> = None;
    let mut values = Vec::new();
    for counts in SimplexGrid::new(size, total) {
        let point: Vec<T> = counts
            .iter()
            .map(|&c| T::from_usize(c).unwrap() / scale)
            .collect();
        let v = objective(&point);
        values.push(v);
        match &best {
            Some((bv, _)) if v <= *bv + tie => {}
            _ => best = Some((v, point)),
        }
    }
    let (mut value, mut point) = best.expect("grid has at least one point");
    let ties = values.iter().filter(|&&v| (v - value).abs() <= tie).count();

    // Pairwise golden-section refinement inside one grid cell.
    let step = T::one() / scale;
    let phi = T::lit((5f64.sqrt() - 1.0) / 2.0);
    let rounds = if size == 2 { 1 } else { 3 };
    for _ in 0..rounds {
        for i in 0..size {
            for j in i + 1..size {
                let lo = (-step).max(-point[i]).max(point[j] - T::one());
                let hi = step.min(point[j]).min(T::one() - point[i]);
                if hi <= lo {
                    continue;
                }
                let along = |t: T| {
                    let mut p = point.clone();
                    p[i] = (p[i] + t).max(T::zero());
                    p[j] = (p[j] - t).max(T::zero());
                    p
                };
                let (mut a, mut b) = (lo, hi);
                let mut c = b - phi * (b - a);
                let mut d = a + phi * (b - a);
                let mut fc = objective(&along(c));
                let mut fd = objective(&along(d));
                for _ in 0..refine_iters {
                    if fc >= fd {
                        b = d;
                        d = c;
                        fd = fc;
                        c = b - phi * (b - a);
                        fc = objective(&along(c));
                    } else {
                        a = c;
                        c = d;
                        fc = fd;
                        d = a + phi * (b - a);
                        fd = objective(&along(d));
                    }
                }
                let t = (a + b) / T::lit(2.0);
                let candidate = along(t);
                let v = objective(&candidate);
                if v > value + tie {
                    value = v;
                    point = candidate;
                }
            }
        }
    }
    SearchResult { value, point, ties }
}

/// `C = max I(X;Y)` and `R_s = max [I(X;Y) - I(X;Z)]` by grid search over
/// the input simplex followed by golden-section refinement.
pub fn rate_profile<T: Real>(
    model: &ChannelModel<T>,
    grid_steps: usize,
    refine_iters: usize,
) -> Result<RateProfile<T>> {
    if grid_steps < 2 {
        return Err(Error::Input(format!("grid_steps = {grid_steps}, need >= 2")));
    }
    let bob = model.bob_matrix().concat();
    let eve = model.eve_matrix().concat();
    let (ny, nz) = (model.y_size(), model.z_size());
    let c = maximize_over_simplex(model.x_size(), grid_steps, refine_iters, |px| {
        input_output_mi(px, &bob, ny)
    });
    let rs = maximize_over_simplex(model.x_size(), grid_steps, refine_iters, |px| {
        input_output_mi(px, &bob, ny) - input_output_mi(px, &eve, nz)
    });
    let mut profile = RateProfile::from_rates(c.value, rs.value)?;
    profile.optimizer_c = Some(InputDistribution(c.point));
    profile.optimizer_rs = Some(InputDistribution(rs.point));
    profile.grid_ties_c = c.ties;
    profile.grid_ties_rs = rs.ties;
    Ok(profile)
}

/// Power constraint and noise variances of a Gaussian wiretap channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianWiretapParams<T> {
    pub power: T,
    pub sigma_b_sq: T,
    pub sigma_e_sq: T,
}

/// Closed-form `C`, `R_s` and `lambda` with Gaussian codebooks.
pub fn gaussian_rates<T: Real>(params: &GaussianWiretapParams<T>) -> Result<RateProfile<T>> {
    let GaussianWiretapParams {
        power,
        sigma_b_sq,
        sigma_e_sq,
    } = *params;
    for (name, v) in [
        ("power", power),
        ("sigma_b_sq", sigma_b_sq),
        ("sigma_e_sq", sigma_e_sq),
    ] {
        if !(v > T::zero()) || !v.is_finite() {
            return Err(Error::Validation(format!("{name} = {v} must be positive")));
        }
    }
    let half = T::lit(0.5);
    let main = half * (T::one() + power / sigma_b_sq).log2();
    let eve = half * (T::one() + power / sigma_e_sq).log2();
    if sigma_b_sq >= sigma_e_sq {
        return Err(Error::NoSecrecy {
            secrecy_capacity: (main - eve).to_f64().unwrap_or(0.0),
        });
    }
    RateProfile::from_rates(main, main - eve)
}
