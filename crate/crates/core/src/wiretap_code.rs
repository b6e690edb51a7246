//! Small-blocklength random codes: a random-binning wiretap code and a
//! plain random channel code for keyed transmission.
//!
//! Codeword tables are drawn i.i.d. from an input distribution with a
//! seeded ChaCha stream, so `(seed, dimensions, input law)` fully determine
//! a codebook. Decoding is maximum likelihood over Bob's marginal with ties
//! going to the lowest codeword index.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::channel::ChannelModel;
use crate::error::{Error, Result};
use crate::infotheory::{eve_information, InputDistribution};
use crate::scalar::Real;

pub const DEFAULT_MAX_BLOCKLENGTH: usize = 16;
pub const DEFAULT_LEAKAGE_STATE_CAP: u128 = 1 << 24;
// Codebook rows are indexed by u64.
const MAX_TABLE_BITS: usize = 40;

/// Size limits for codebook construction and exact leakage enumeration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodeLimits {
    pub max_blocklength: usize,
    /// Cap on `|Z|^n * M * M'` for [`exact_block_leakage`].
    pub leakage_state_cap: u128,
}

impl Default for CodeLimits {
    fn default() -> Self {
        CodeLimits {
            max_blocklength: DEFAULT_MAX_BLOCKLENGTH,
            leakage_state_cap: DEFAULT_LEAKAGE_STATE_CAP,
        }
    }
}

fn check_dimensions(
    n: usize,
    table_bits: usize,
    x_size: usize,
    limits: &CodeLimits,
) -> Result<()> {
    if n == 0 {
        return Err(Error::Input("blocklength must be positive".into()));
    }
    if n > limits.max_blocklength {
        return Err(Error::BlocklengthCap {
            n,
            cap: limits.max_blocklength,
        });
    }
    let capacity = n as f64 * (x_size as f64).log2();
    if table_bits as f64 > capacity + 1e-12 || table_bits > MAX_TABLE_BITS {
        return Err(Error::RateExceedsAlphabet {
            bits: table_bits,
            n,
            alphabet: x_size,
        });
    }
    Ok(())
}

fn draw_table(rows: usize, n: usize, input_dist: &[f64], seed: u64) -> Result<Vec<usize>> {
    let sampler = WeightedIndex::new(input_dist)
        .map_err(|e| Error::Validation(format!("input distribution: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..rows * n).map(|_| sampler.sample(&mut rng)).collect())
}

/// Index of the most likely row; the lowest index wins ties.
fn ml_row<T: Real>(table: &[usize], n: usize, y_block: &[usize], model: &ChannelModel<T>) -> usize {
    let mut best = 0;
    let mut best_ll = T::neg_infinity();
    for (row, cw) in table.chunks(n).enumerate() {
        let ll = model.bob_log_likelihood_unchecked(cw, y_block);
        if ll > best_ll {
            best_ll = ll;
            best = row;
        }
    }
    best
}

fn check_output<T: Real>(n: usize, y_block: &[usize], model: &ChannelModel<T>, x_size: usize) -> Result<()> {
    if y_block.len() != n {
        return Err(Error::Input(format!(
            "received block has length {}, expected {n}",
            y_block.len()
        )));
    }
    if model.x_size() != x_size {
        return Err(Error::Input(format!(
            "codebook alphabet {x_size} does not match channel input alphabet {}",
            model.x_size()
        )));
    }
    if let Some(&y) = y_block.iter().find(|&&y| y >= model.y_size()) {
        return Err(Error::Input(format!("output symbol {y} out of range")));
    }
    Ok(())
}

/// Random-binning wiretap code: `2^rate_bits` bins of `2^bin_bits`
/// codewords each.
#[derive(Debug, Clone, PartialEq)]
pub struct WiretapCodebook {
    n: usize,
    rate_bits: usize,
    bin_bits: usize,
    x_size: usize,
    input_dist: Vec<f64>,
    seed: u64,
    /// Row `w * bin_size + j` holds codeword `j` of bin `w`.
    codewords: Vec<usize>,
}

pub fn build_wiretap<T: Real>(
    n: usize,
    rate_bits: usize,
    bin_bits: usize,
    input_dist: &InputDistribution<T>,
    seed: u64,
    limits: &CodeLimits,
) -> Result<WiretapCodebook> {
    let x_size = input_dist.len();
    check_dimensions(n, rate_bits + bin_bits, x_size, limits)?;
    let input_dist = input_dist.to_f64();
    let rows = 1usize << (rate_bits + bin_bits);
    let codewords = draw_table(rows, n, &input_dist, seed)?;
    Ok(WiretapCodebook {
        n,
        rate_bits,
        bin_bits,
        x_size,
        input_dist,
        seed,
        codewords,
    })
}

impl WiretapCodebook {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn rate_bits(&self) -> usize {
        self.rate_bits
    }

    pub fn bin_bits(&self) -> usize {
        self.bin_bits
    }

    pub fn x_size(&self) -> usize {
        self.x_size
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn num_bins(&self) -> usize {
        1 << self.rate_bits
    }

    pub fn bin_size(&self) -> usize {
        1 << self.bin_bits
    }

    pub fn num_rows(&self) -> usize {
        self.num_bins() * self.bin_size()
    }

    pub fn codeword(&self, bin: usize, j: usize) -> &[usize] {
        let row = bin * self.bin_size() + j;
        &self.codewords[row * self.n..(row + 1) * self.n]
    }

    pub fn bin(&self, bin: usize) -> impl Iterator<Item = &[usize]> {
        (0..self.bin_size()).map(move |j| self.codeword(bin, j))
    }

    /// Stochastic encoder: a uniformly chosen codeword of bin `w`.
    pub fn encode<R: Rng + ?Sized>(&self, w: usize, rng: &mut R) -> Result<Vec<usize>> {
        if w >= self.num_bins() {
            return Err(Error::Input(format!(
                "message {w} out of range for {} bins",
                self.num_bins()
            )));
        }
        let j = rng.random_range(0..self.bin_size());
        Ok(self.codeword(w, j).to_vec())
    }

    /// Bin of the maximum-likelihood codeword under Bob's marginal.
    pub fn decode<T: Real>(&self, y_block: &[usize], model: &ChannelModel<T>) -> Result<usize> {
        check_output(self.n, y_block, model, self.x_size)?;
        Ok(ml_row(&self.codewords, self.n, y_block, model) / self.bin_size())
    }

    /// Reorders codewords inside each bin; used to check invariances.
    pub fn permute_within_bins(&self, perm: &[usize]) -> Result<Self> {
        let mut sorted = perm.to_vec();
        sorted.sort_unstable();
        if sorted != (0..self.bin_size()).collect::<Vec<_>>() {
            return Err(Error::Input("not a permutation of the bin".into()));
        }
        let mut out = self.clone();
        for w in 0..self.num_bins() {
            for (j, &src) in perm.iter().enumerate() {
                let dst = (w * self.bin_size() + j) * self.n;
                out.codewords[dst..dst + self.n].copy_from_slice(self.codeword(w, src));
            }
        }
        Ok(out)
    }

    pub fn spec(&self) -> CodebookSpec {
        CodebookSpec::Wiretap {
            n: self.n,
            rate_bits: self.rate_bits,
            bin_bits: self.bin_bits,
            input_dist: self.input_dist.clone(),
            seed: self.seed,
        }
    }
}

/// Plain random channel code used after one-time-pad encryption.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelCodebook {
    n: usize,
    num_codewords: usize,
    x_size: usize,
    input_dist: Vec<f64>,
    seed: u64,
    codewords: Vec<usize>,
}

pub fn build_channel<T: Real>(
    n: usize,
    num_codewords: usize,
    input_dist: &InputDistribution<T>,
    seed: u64,
    limits: &CodeLimits,
) -> Result<ChannelCodebook> {
    if num_codewords == 0 {
        return Err(Error::Input("a channel code needs at least one codeword".into()));
    }
    let x_size = input_dist.len();
    let table_bits = usize::BITS as usize - (num_codewords - 1).leading_zeros() as usize;
    check_dimensions(n, table_bits, x_size, limits)?;
    let input_dist = input_dist.to_f64();
    let codewords = draw_table(num_codewords, n, &input_dist, seed)?;
    Ok(ChannelCodebook {
        n,
        num_codewords,
        x_size,
        input_dist,
        seed,
        codewords,
    })
}

impl ChannelCodebook {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn num_codewords(&self) -> usize {
        self.num_codewords
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn codeword(&self, index: usize) -> &[usize] {
        &self.codewords[index * self.n..(index + 1) * self.n]
    }

    pub fn encode(&self, index: usize) -> Result<Vec<usize>> {
        if index >= self.num_codewords {
            return Err(Error::Input(format!(
                "message {index} out of range for {} codewords",
                self.num_codewords
            )));
        }
        Ok(self.codeword(index).to_vec())
    }

    pub fn decode<T: Real>(&self, y_block: &[usize], model: &ChannelModel<T>) -> Result<usize> {
        check_output(self.n, y_block, model, self.x_size)?;
        Ok(ml_row(&self.codewords, self.n, y_block, model))
    }

    pub fn spec(&self) -> CodebookSpec {
        CodebookSpec::Channel {
            n: self.n,
            num_codewords: self.num_codewords,
            input_dist: self.input_dist.clone(),
            seed: self.seed,
        }
    }
}

/// Serializable codebook description; tables are regenerated on restore.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CodebookSpec {
    Wiretap {
        n: usize,
        rate_bits: usize,
        bin_bits: usize,
        input_dist: Vec<f64>,
        seed: u64,
    },
    Channel {
        n: usize,
        num_codewords: usize,
        input_dist: Vec<f64>,
        seed: u64,
    },
}

/// A restored codebook of either kind.
#[derive(Debug, Clone, PartialEq)]
pub enum Codebook {
    Wiretap(WiretapCodebook),
    Channel(ChannelCodebook),
}

impl CodebookSpec {
    pub fn restore(&self, limits: &CodeLimits) -> Result<Codebook> {
        match self {
            CodebookSpec::Wiretap {
                n,
                rate_bits,
                bin_bits,
                input_dist,
                seed,
            } => {
                let dist = InputDistribution::new(input_dist.clone())?;
                build_wiretap(*n, *rate_bits, *bin_bits, &dist, *seed, limits).map(Codebook::Wiretap)
            }
            CodebookSpec::Channel {
                n,
                num_codewords,
                input_dist,
                seed,
            } => {
                let dist = InputDistribution::new(input_dist.clone())?;
                build_channel(*n, *num_codewords, &dist, *seed, limits).map(Codebook::Channel)
            }
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Exact `I(W; Z^n)` in bits (not normalized) for uniform `W` and a uniform
/// codeword choice inside each bin, by enumerating every `z^n`.
pub fn exact_block_leakage<T: Real>(
    book: &WiretapCodebook,
    model: &ChannelModel<T>,
    limits: &CodeLimits,
) -> Result<T> {
    if model.x_size() != book.x_size {
        return Err(Error::Input("codebook and channel alphabets differ".into()));
    }
    let zs = model.z_size() as u128;
    let outputs = zs
        .checked_pow(book.n as u32)
        .ok_or(Error::EnumerationCap {
            states: u128::MAX,
            cap: limits.leakage_state_cap,
        })?;
    let states = outputs.saturating_mul(book.num_rows() as u128);
    if states > limits.leakage_state_cap {
        return Err(Error::EnumerationCap {
            states,
            cap: limits.leakage_state_cap,
        });
    }
    let m = book.num_bins();
    let p_w = T::one() / T::from_usize(m).unwrap();
    let p_j = T::one() / T::from_usize(book.bin_size()).unwrap();
    let mut z = vec![0usize; book.n];
    let mut column = vec![T::zero(); m];
    let mut acc = T::zero();
    for z_index in 0..outputs as u64 {
        let mut rest = z_index;
        for slot in z.iter_mut().rev() {
            *slot = (rest % zs as u64) as usize;
            rest /= zs as u64;
        }
        for (w, cell) in column.iter_mut().enumerate() {
            let mixture: T = book
                .bin(w)
                .map(|cw| {
                    cw.iter()
                        .zip(&z)
                        .fold(T::one(), |p, (&x, &zi)| p * model.eve(x, zi))
                })
                .sum();
            *cell = p_w * p_j * mixture;
        }
        let p_z: T = column.iter().copied().sum();
        for &p in &column {
            if p > T::zero() {
                acc = acc + p * (p / (p_w * p_z)).log2();
            }
        }
    }
    Ok(acc.max(T::zero()))
}

/// Randomization bits targeting `n * I(X;Z)` under the given input law,
/// clipped so that the code still fits the input alphabet.
pub fn default_bin_bits<T: Real>(
    model: &ChannelModel<T>,
    input_dist: &InputDistribution<T>,
    n: usize,
    rate_bits: usize,
) -> usize {
    let target = (T::from_usize(n).unwrap() * eve_information(model, input_dist))
        .to_f64()
        .unwrap()
        .round() as usize;
    let room = (n as f64 * (model.x_size() as f64).log2()).floor() as usize;
    target.min(room.saturating_sub(rate_bits))
}
