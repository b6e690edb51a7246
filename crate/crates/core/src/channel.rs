//! Discrete memoryless wiretap channels `p(y, z | x)`.
//!
//! A [`ChannelModel`] is normally built as a degraded cascade `X -> Y -> Z`
//! from a forward matrix `p(y|x)` and a degrading matrix `p(z|y)`. Direct
//! tensors are accepted too, but their degradedness is not checked and the
//! protocol layer refuses them unless explicitly allowed.

use std::fs;
use std::path::Path;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// How the degradedness `X -> Y -> Z` of a model is known.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Degradedness {
    /// Built from a cascade, so the Markov chain holds by construction.
    Cascade,
    /// Built from an explicit tensor; degradedness unverified.
    Unverified,
}

/// Forward and degrading stochastic matrices of a cascade.
#[derive(Debug, Clone, PartialEq)]
pub struct CascadeSpec<T> {
    /// `forward[x][y] = p(y|x)`
    pub forward: Vec<Vec<T>>,
    /// `degrade[y][z] = p(z|y)`
    pub degrade: Vec<Vec<T>>,
}

impl<T: Real> CascadeSpec<T> {
    pub fn new(forward: Vec<Vec<T>>, degrade: Vec<Vec<T>>) -> Self {
        CascadeSpec { forward, degrade }
    }

    /// Binary symmetric Bob channel with crossover `p`, followed by a
    /// binary symmetric degradation with crossover `q`.
    pub fn bsc_pair(p: T, q: T) -> Self {
        CascadeSpec {
            forward: bsc_matrix(p),
            degrade: bsc_matrix(q),
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_stochastic("forward", &self.forward, None)?;
        let y_size = self.forward[0].len();
        if self.degrade.len() != y_size {
            return Err(Error::Validation(format!(
                "degrade matrix has {} rows, expected |Y| = {}",
                self.degrade.len(),
                y_size
            )));
        }
        check_stochastic("degrade", &self.degrade, None)
    }
}

/// 2x2 binary symmetric channel matrix.
pub fn bsc_matrix<T: Real>(crossover: T) -> Vec<Vec<T>> {
    let keep = T::one() - crossover;
    vec![vec![keep, crossover], vec![crossover, keep]]
}

fn check_stochastic<T: Real>(name: &str, rows: &[Vec<T>], width: Option<usize>) -> Result<()> {
    if rows.is_empty() {
        return Err(Error::Validation(format!("{name} matrix has no rows")));
    }
    let width = width.unwrap_or(rows[0].len());
    if width == 0 {
        return Err(Error::Validation(format!("{name} matrix has empty rows")));
    }
    for (i, row) in rows.iter().enumerate() {
        if row.len() != width {
            return Err(Error::Validation(format!(
                "{name} row {i} has {} entries, expected {width}",
                row.len()
            )));
        }
        if let Some(bad) = row.iter().find(|p| !(**p >= T::zero() && **p <= T::one())) {
            return Err(Error::Validation(format!(
                "{name} row {i} has entry {bad} outside [0, 1]"
            )));
        }
        let sum: T = row.iter().copied().sum();
        if (sum - T::one()).abs() > T::row_tolerance() {
            return Err(Error::Validation(format!("{name} row {i} sums to {sum}")));
        }
    }
    Ok(())
}

/// Finite-alphabet wiretap channel. Immutable once built.
#[derive(Debug, Clone)]
pub struct ChannelModel<T> {
    x_size: usize,
    y_size: usize,
    z_size: usize,
    /// Row-major `[x][y][z]`.
    transition: Vec<T>,
    /// `[x][y]` marginal.
    bob: Vec<T>,
    /// `[x][z]` marginal.
    eve: Vec<T>,
    bob_ln: Vec<T>,
    eve_ln: Vec<T>,
    joint_ln: Vec<T>,
    samplers: Vec<WeightedIndex<f64>>,
    degradedness: Degradedness,
}

impl<T: Real> ChannelModel<T> {
    pub fn from_cascade(spec: &CascadeSpec<T>) -> Result<Self> {
        spec.validate()?;
        let x_size = spec.forward.len();
        let y_size = spec.degrade.len();
        let z_size = spec.degrade[0].len();
        let mut transition = Vec::with_capacity(x_size * y_size * z_size);
        for x in 0..x_size {
            for y in 0..y_size {
                for z in 0..z_size {
                    transition.push(spec.forward[x][y] * spec.degrade[y][z]);
                }
            }
        }
        Self::assemble(x_size, y_size, z_size, transition, Degradedness::Cascade)
    }

    /// Builds a model from an explicit `[x][y][z]` tensor. The result is
    /// flagged [`Degradedness::Unverified`].
    pub fn from_tensor(tensor: &[Vec<Vec<T>>]) -> Result<Self> {
        if tensor.is_empty() || tensor[0].is_empty() || tensor[0][0].is_empty() {
            return Err(Error::Validation("transition tensor is empty".into()));
        }
        let x_size = tensor.len();
        let y_size = tensor[0].len();
        let z_size = tensor[0][0].len();
        let mut transition = Vec::with_capacity(x_size * y_size * z_size);
        for (x, plane) in tensor.iter().enumerate() {
            if plane.len() != y_size {
                return Err(Error::Validation(format!(
                    "transition[{x}] has {} rows, expected |Y| = {y_size}",
                    plane.len()
                )));
            }
            for (y, row) in plane.iter().enumerate() {
                if row.len() != z_size {
                    return Err(Error::Validation(format!(
                        "transition[{x}][{y}] has {} entries, expected |Z| = {z_size}",
                        row.len()
                    )));
                }
                transition.extend_from_slice(row);
            }
        }
        for (x, slab) in transition.chunks(y_size * z_size).enumerate() {
            if let Some(bad) = slab.iter().find(|p| !(**p >= T::zero() && **p <= T::one())) {
                return Err(Error::Validation(format!(
                    "transition row x={x} has entry {bad} outside [0, 1]"
                )));
            }
            let sum: T = slab.iter().copied().sum();
            if (sum - T::one()).abs() > T::row_tolerance() {
                return Err(Error::Validation(format!(
                    "transition row x={x} sums to {sum}"
                )));
            }
        }
        Self::assemble(x_size, y_size, z_size, transition, Degradedness::Unverified)
    }

    pub fn bsc_pair(p: T, q: T) -> Result<Self> {
        Self::from_cascade(&CascadeSpec::bsc_pair(p, q))
    }

    fn assemble(
        x_size: usize,
        y_size: usize,
        z_size: usize,
        transition: Vec<T>,
        degradedness: Degradedness,
    ) -> Result<Self> {
        let mut bob = vec![T::zero(); x_size * y_size];
        let mut eve = vec![T::zero(); x_size * z_size];
        for x in 0..x_size {
            for y in 0..y_size {
                for z in 0..z_size {
                    let p = transition[(x * y_size + y) * z_size + z];
                    bob[x * y_size + y] = bob[x * y_size + y] + p;
                    eve[x * z_size + z] = eve[x * z_size + z] + p;
                }
            }
        }
        let samplers = transition
            .chunks(y_size * z_size)
            .map(|slab| {
                let weights: Vec<f64> = slab.iter().map(|p| p.to_f64().unwrap()).collect();
                WeightedIndex::new(weights)
                    .map_err(|e| Error::Validation(format!("unsamplable transition row: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        let ln = |v: &[T]| v.iter().map(|p| p.ln()).collect::<Vec<_>>();
        Ok(ChannelModel {
            x_size,
            y_size,
            z_size,
            bob_ln: ln(&bob),
            eve_ln: ln(&eve),
            joint_ln: ln(&transition),
            transition,
            bob,
            eve,
            samplers,
            degradedness,
        })
    }

    pub fn x_size(&self) -> usize {
        self.x_size
    }

    pub fn y_size(&self) -> usize {
        self.y_size
    }

    pub fn z_size(&self) -> usize {
        self.z_size
    }

    pub fn degradedness(&self) -> Degradedness {
        self.degradedness
    }

    pub fn transition(&self, x: usize, y: usize, z: usize) -> T {
        self.transition[(x * self.y_size + y) * self.z_size + z]
    }

    /// `p(y|x)`
    pub fn bob(&self, x: usize, y: usize) -> T {
        self.bob[x * self.y_size + y]
    }

    /// `p(z|x)`
    pub fn eve(&self, x: usize, z: usize) -> T {
        self.eve[x * self.z_size + z]
    }

    pub fn bob_matrix(&self) -> Vec<Vec<T>> {
        self.bob.chunks(self.y_size).map(<[T]>::to_vec).collect()
    }

    pub fn eve_matrix(&self) -> Vec<Vec<T>> {
        self.eve.chunks(self.z_size).map(<[T]>::to_vec).collect()
    }

    fn check_symbols(&self, block: &[usize], size: usize, what: &str) -> Result<()> {
        match block.iter().position(|&s| s >= size) {
            Some(i) => Err(Error::Input(format!(
                "{what} symbol {} at position {i} is outside alphabet of size {size}",
                block[i]
            ))),
            None => Ok(()),
        }
    }

    /// Passes `x_block` through `n` independent channel uses.
    pub fn sample_block<R: Rng + ?Sized>(
        &self,
        x_block: &[usize],
        rng: &mut R,
    ) -> Result<(Vec<usize>, Vec<usize>)> {
        self.check_symbols(x_block, self.x_size, "input")?;
        let mut y = Vec::with_capacity(x_block.len());
        let mut z = Vec::with_capacity(x_block.len());
        for &x in x_block {
            let yz = self.samplers[x].sample(rng);
            y.push(yz / self.z_size);
            z.push(yz % self.z_size);
        }
        Ok((y, z))
    }

    fn check_pair(&self, x_block: &[usize], out: &[usize], size: usize, what: &str) -> Result<()> {
        if x_block.len() != out.len() {
            return Err(Error::Input(format!(
                "block length mismatch: {} inputs, {} {what} outputs",
                x_block.len(),
                out.len()
            )));
        }
        self.check_symbols(x_block, self.x_size, "input")?;
        self.check_symbols(out, size, what)
    }

    /// Natural-log likelihood `ln prod_i p(y_i | x_i)`; `-inf` when impossible.
    pub fn bob_log_likelihood(&self, x_block: &[usize], y_block: &[usize]) -> Result<T> {
        self.check_pair(x_block, y_block, self.y_size, "Bob")?;
        Ok(self.bob_log_likelihood_unchecked(x_block, y_block))
    }

    pub(crate) fn bob_log_likelihood_unchecked(&self, x_block: &[usize], y_block: &[usize]) -> T {
        x_block
            .iter()
            .zip(y_block)
            .map(|(&x, &y)| self.bob_ln[x * self.y_size + y])
            .sum()
    }

    /// `prod_i p(y_i | x_i)` over Bob's marginal.
    pub fn block_likelihood(&self, x_block: &[usize], y_block: &[usize]) -> Result<T> {
        self.bob_log_likelihood(x_block, y_block).map(T::exp)
    }

    /// `prod_i p(z_i | x_i)` over Eve's marginal.
    pub fn eve_block_likelihood(&self, x_block: &[usize], z_block: &[usize]) -> Result<T> {
        self.check_pair(x_block, z_block, self.z_size, "Eve")?;
        let ln: T = x_block
            .iter()
            .zip(z_block)
            .map(|(&x, &z)| self.eve_ln[x * self.z_size + z])
            .sum();
        Ok(ln.exp())
    }

    /// `prod_i p(y_i, z_i | x_i)`.
    pub fn joint_block_likelihood(
        &self,
        x_block: &[usize],
        y_block: &[usize],
        z_block: &[usize],
    ) -> Result<T> {
        self.check_pair(x_block, y_block, self.y_size, "Bob")?;
        self.check_pair(x_block, z_block, self.z_size, "Eve")?;
        let ln: T = (0..x_block.len())
            .map(|i| {
                self.joint_ln[(x_block[i] * self.y_size + y_block[i]) * self.z_size + z_block[i]]
            })
            .sum();
        Ok(ln.exp())
    }

    /// Law of Eve's whole block `Z^n` given the input block, indexed with
    /// the first symbol most significant.
    pub fn eve_block_law(&self, x_block: &[usize]) -> Vec<T> {
        let mut law = vec![T::one()];
        for &x in x_block {
            let row = &self.eve[x * self.z_size..(x + 1) * self.z_size];
            law = law
                .iter()
                .flat_map(|&p| row.iter().map(move |&q| p * q))
                .collect();
        }
        law
    }
}

/// On-disk channel description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ChannelConfig {
    Cascade {
        cascade: CascadeConfig,
    },
    Tensor {
        x_size: usize,
        y_size: usize,
        z_size: usize,
        transition: Vec<Vec<Vec<f64>>>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CascadeConfig {
    pub forward: Vec<Vec<f64>>,
    pub degrade: Vec<Vec<f64>>,
}

impl ChannelConfig {
    pub fn bsc_pair(p: f64, q: f64) -> Self {
        ChannelConfig::Cascade {
            cascade: CascadeConfig {
                forward: bsc_matrix(p),
                degrade: bsc_matrix(q),
            },
        }
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn build<T: Real>(&self) -> Result<ChannelModel<T>> {
        let conv = |rows: &[Vec<f64>]| -> Vec<Vec<T>> {
            rows.iter()
                .map(|r| r.iter().map(|&v| T::lit(v)).collect())
                .collect()
        };
        match self {
            ChannelConfig::Cascade { cascade } => ChannelModel::from_cascade(&CascadeSpec::new(
                conv(&cascade.forward),
                conv(&cascade.degrade),
            )),
            ChannelConfig::Tensor {
                x_size,
                y_size,
                z_size,
                transition,
            } => {
                let dims_ok = transition.len() == *x_size
                    && transition.iter().all(|p| p.len() == *y_size)
                    && transition.iter().flatten().all(|r| r.len() == *z_size);
                if !dims_ok {
                    return Err(Error::Validation(format!(
                        "transition tensor does not match declared sizes {x_size}x{y_size}x{z_size}"
                    )));
                }
                let tensor: Vec<Vec<Vec<T>>> = transition.iter().map(|p| conv(p)).collect();
                ChannelModel::from_tensor(&tensor)
            }
        }
    }
}
