//! Reproducible random pure states inside subspaces.

use faer::{Mat, MatRef};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use crate::ensembles::MicrocanonicalSubspace;
use crate::C64;

/// Random stream identified by `(master_seed, stream_index)`.
#[derive(Debug, Clone)]
pub struct SeededSampler {
    master_seed: u64,
    stream_index: u64,
    rng: ChaCha20Rng,
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Stream index for a tuple of labels such as `(n, model, sample)`.
pub fn stream_for(labels: &[u64]) -> u64 {
    labels.iter().fold(0x5151_c0de_u64, |h, &l| splitmix64(h ^ splitmix64(l)))
}

impl SeededSampler {
    pub fn new(master_seed: u64, stream_index: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(master_seed);
        rng.set_stream(stream_index);
        Self { master_seed, stream_index, rng }
    }

    /// Sampler for the labelled sub-task, independent of draw order.
    pub fn for_labels(master_seed: u64, labels: &[u64]) -> Self {
        Self::new(master_seed, stream_for(labels))
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn stream_index(&self) -> u64 {
        self.stream_index
    }

    pub fn rng(&mut self) -> &mut ChaCha20Rng {
        &mut self.rng
    }

    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    pub fn normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    /// Complex normal with unit variance per real component.
    pub fn complex_normal(&mut self) -> C64 {
        let re = self.normal();
        C64::new(re, self.normal())
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.random::<u64>()
    }
}

fn embed(basis: MatRef<'_, C64>, coeffs: &[C64]) -> Vec<C64> {
    (0..basis.nrows())
        .map(|i| coeffs.iter().enumerate().map(|(k, c)| basis[(i, k)] * c).sum())
        .collect()
}

/// Unitarily invariant random unit vector in `C^dim`.
pub fn haar_coefficients(dim: usize, sampler: &mut SeededSampler) -> Vec<C64> {
    let mut c: Vec<C64> = (0..dim).map(|_| sampler.complex_normal()).collect();
    let norm = c.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    c.iter_mut().for_each(|z| *z /= norm);
    c
}

/// Haar-random unit vector in the span of the columns of `basis`.
pub fn haar_state_in_span(basis: MatRef<'_, C64>, sampler: &mut SeededSampler) -> Vec<C64> {
    embed(basis, &haar_coefficients(basis.ncols(), sampler))
}

pub fn haar_state_in_subspace(sub: &MicrocanonicalSubspace, sampler: &mut SeededSampler) -> Vec<C64> {
    haar_state_in_span(sub.basis.as_ref(), sampler)
}

/// Haar-random element of U(2), via Gram-Schmidt on a Ginibre matrix.
fn haar_u2(sampler: &mut SeededSampler) -> [[C64; 2]; 2] {
    let a = [sampler.complex_normal(), sampler.complex_normal()];
    let na = (a[0].norm_sqr() + a[1].norm_sqr()).sqrt();
    let u = [a[0] / na, a[1] / na];
    let b = [sampler.complex_normal(), sampler.complex_normal()];
    let proj = u[0].conj() * b[0] + u[1].conj() * b[1];
    let w = [b[0] - u[0] * proj, b[1] - u[1] * proj];
    let nw = (w[0].norm_sqr() + w[1].norm_sqr()).sqrt();
    let v = [w[0] / nw, w[1] / nw];
    [[u[0], v[0]], [u[1], v[1]]]
}

/// Coefficients after `depth` brickwork layers of random two-level rotations
/// on neighbouring coordinates, applied to the first basis vector.
pub fn design_coefficients(dim: usize, depth: usize, sampler: &mut SeededSampler) -> Vec<C64> {
    let mut c = vec![C64::new(0.0, 0.0); dim];
    if dim == 0 {
        return c;
    }
    c[0] = C64::new(1.0, 0.0);
    for _ in 0..depth {
        for parity in 0..2 {
            let mut k = parity;
            while k + 1 < dim {
                let g = haar_u2(sampler);
                let (x, y) = (c[k], c[k + 1]);
                c[k] = g[0][0] * x + g[0][1] * y;
                c[k + 1] = g[1][0] * x + g[1][1] * y;
                k += 2;
            }
        }
    }
    c
}

pub fn design_state_in_span(basis: MatRef<'_, C64>, depth: usize, sampler: &mut SeededSampler) -> Vec<C64> {
    embed(basis, &design_coefficients(basis.ncols(), depth, sampler))
}

pub fn design_state_in_subspace(
    sub: &MicrocanonicalSubspace,
    depth: usize,
    sampler: &mut SeededSampler,
) -> Vec<C64> {
    design_state_in_span(sub.basis.as_ref(), depth, sampler)
}

/// `‖(𝟙 − BB†)ψ‖` for orthonormal columns `B`.
pub fn subspace_residual(basis: MatRef<'_, C64>, psi: &[C64]) -> f64 {
    let coeffs: Vec<C64> = (0..basis.ncols())
        .map(|k| (0..basis.nrows()).map(|i| basis[(i, k)].conj() * psi[i]).sum())
        .collect();
    let back = embed(basis, &coeffs);
    psi.iter().zip(&back).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt()
}

/// Orthonormal basis given by the first `k` columns of the identity.
pub fn coordinate_basis(dim: usize, k: usize) -> Mat<C64> {
    Mat::from_fn(dim, k, |i, j| if i == j { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) })
}
