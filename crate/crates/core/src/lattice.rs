//! Integer-box geometry.
//!
//! A [`Region`] is a box `[λ_1, μ_1] × … × [λ_ν, μ_ν]` in `Z^ν` with a local
//! Hilbert space of dimension `d` on every site. Sites are enumerated
//! row-major with the first axis slowest, and site `k` is the `k`-th tensor
//! factor counted from the most significant digit of a basis index. Every
//! other module relies on this convention.

use faer::Mat;

use crate::linalg::HermitianOp;
use crate::{Error, Result, C64};

/// Largest Hilbert space dimension any dense operator may have.
pub const MAX_DIM: usize = 1 << 14;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Region {
    intervals: Vec<(i64, i64)>,
    local_dim: usize,
}

/// Build the box `[0, L_1-1] × … × [0, L_ν-1]`.
pub fn make_region(nu: usize, side_lengths: &[usize], local_dim: usize) -> Result<Region> {
    if nu == 0 || side_lengths.len() != nu {
        return Err(Error::InvalidRegion(format!(
            "expected {nu} side lengths, got {}",
            side_lengths.len()
        )));
    }
    if side_lengths.iter().any(|&l| l == 0) {
        return Err(Error::InvalidRegion("side lengths must be positive".into()));
    }
    let intervals = side_lengths.iter().map(|&l| (0, l as i64 - 1)).collect();
    Region::from_intervals(intervals, local_dim)
}

impl Region {
    pub fn from_intervals(intervals: Vec<(i64, i64)>, local_dim: usize) -> Result<Self> {
        if intervals.is_empty() {
            return Err(Error::InvalidRegion("lattice dimension must be at least 1".into()));
        }
        if local_dim < 2 {
            return Err(Error::InvalidRegion(format!("local dimension {local_dim} < 2")));
        }
        if let Some(&(lo, hi)) = intervals.iter().find(|(lo, hi)| lo > hi) {
            return Err(Error::InvalidRegion(format!("empty interval [{lo}, {hi}]")));
        }
        let region = Self { intervals, local_dim };
        let dim = region.hilbert_dim_u128();
        if dim > MAX_DIM as u128 {
            return Err(Error::Infeasible { dim });
        }
        Ok(region)
    }

    pub fn nu(&self) -> usize {
        self.intervals.len()
    }

    pub fn intervals(&self) -> &[(i64, i64)] {
        &self.intervals
    }

    pub fn local_dim(&self) -> usize {
        self.local_dim
    }

    pub fn sides(&self) -> Vec<usize> {
        self.intervals.iter().map(|(lo, hi)| (hi - lo + 1) as usize).collect()
    }

    /// Number of sites `|Λ|`.
    pub fn size(&self) -> usize {
        self.sides().iter().product()
    }

    pub fn hilbert_dim(&self) -> usize {
        self.hilbert_dim_u128() as usize
    }

    fn hilbert_dim_u128(&self) -> u128 {
        let mut dim: u128 = 1;
        for _ in 0..self.size() {
            dim = dim.saturating_mul(self.local_dim as u128);
        }
        dim
    }

    /// Lattice coordinates of site `k`.
    pub fn coord(&self, k: usize) -> Vec<i64> {
        let sides = self.sides();
        let mut rem = k;
        let mut out = vec![0; self.nu()];
        for axis in (0..self.nu()).rev() {
            out[axis] = self.intervals[axis].0 + (rem % sides[axis]) as i64;
            rem /= sides[axis];
        }
        out
    }

    /// Site index of a coordinate, or `None` if it lies outside the box.
    pub fn index(&self, coord: &[i64]) -> Option<usize> {
        if coord.len() != self.nu() {
            return None;
        }
        let mut k = 0usize;
        for (&c, &(lo, hi)) in coord.iter().zip(&self.intervals) {
            if c < lo || c > hi {
                return None;
            }
            k = k * (hi - lo + 1) as usize + (c - lo) as usize;
        }
        Some(k)
    }

    pub fn contains(&self, coord: &[i64]) -> bool {
        self.index(coord).is_some()
    }

    /// Wrap a coordinate onto the torus obtained by identifying opposite faces.
    pub fn wrap(&self, coord: &[i64]) -> Vec<i64> {
        coord
            .iter()
            .zip(&self.intervals)
            .map(|(&c, &(lo, hi))| lo + (c - lo).rem_euclid(hi - lo + 1))
            .collect()
    }

    /// Sup-distance `max_i |x_i - y_i|` between two sites.
    pub fn distance(&self, a: usize, b: usize) -> i64 {
        sup_distance(&self.coord(a), &self.coord(b))
    }

    /// Sup-distance on the torus.
    pub fn torus_distance(&self, a: usize, b: usize) -> i64 {
        let (ca, cb) = (self.coord(a), self.coord(b));
        ca.iter()
            .zip(&cb)
            .zip(self.sides())
            .map(|((&x, &y), side)| {
                let d = (x - y).abs();
                d.min(side as i64 - d)
            })
            .max()
            .unwrap_or(0)
    }

    /// Index bookkeeping for splitting the tensor product into the factors on
    /// `sites` (in the given order) and the remaining sites (ascending).
    pub fn split(&self, sites: &[usize]) -> Result<SiteSplit> {
        let n = self.size();
        let mut seen = vec![false; n];
        for &s in sites {
            if s >= n {
                return Err(Error::InvalidSites(format!("site {s} outside region of size {n}")));
            }
            if seen[s] {
                return Err(Error::InvalidSites(format!("site {s} listed twice")));
            }
            seen[s] = true;
        }
        let d = self.local_dim;
        let weight = |site: usize| d.pow((n - 1 - site) as u32);
        let rest: Vec<usize> = (0..n).filter(|&s| !seen[s]).collect();
        let offsets = |group: &[usize]| -> Vec<usize> {
            let dim = d.pow(group.len() as u32);
            (0..dim)
                .map(|mut a| {
                    let mut full = 0;
                    for &site in group.iter().rev() {
                        full += (a % d) * weight(site);
                        a /= d;
                    }
                    full
                })
                .collect()
        };
        Ok(SiteSplit {
            keep_offsets: offsets(sites),
            rest_offsets: offsets(&rest),
        })
    }
}

/// Full basis index = `keep_offsets[a] + rest_offsets[r]`.
#[derive(Debug, Clone)]
pub struct SiteSplit {
    pub keep_offsets: Vec<usize>,
    pub rest_offsets: Vec<usize>,
}

impl SiteSplit {
    pub fn keep_dim(&self) -> usize {
        self.keep_offsets.len()
    }

    pub fn rest_dim(&self) -> usize {
        self.rest_offsets.len()
    }
}

pub fn sup_distance(a: &[i64], b: &[i64]) -> i64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).max().unwrap_or(0)
}

/// A periodic translation `T_α` of a region regarded as a torus.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Translation<'a> {
    vector: Vec<i64>,
    region: &'a Region,
}

impl<'a> Translation<'a> {
    pub fn new(region: &'a Region, vector: Vec<i64>) -> Result<Self> {
        if vector.len() != region.nu() {
            return Err(Error::InvalidArgument(format!(
                "translation has {} components, region has dimension {}",
                vector.len(),
                region.nu()
            )));
        }
        let vector = vector
            .iter()
            .zip(region.sides())
            .map(|(&a, side)| a.rem_euclid(side as i64))
            .collect();
        Ok(Self { vector, region })
    }

    pub fn identity(region: &'a Region) -> Self {
        Self { vector: vec![0; region.nu()], region }
    }

    pub fn vector(&self) -> &[i64] {
        &self.vector
    }

    pub fn apply(&self, site: usize) -> usize {
        let shifted: Vec<i64> = self
            .region
            .coord(site)
            .iter()
            .zip(&self.vector)
            .map(|(c, a)| c + a)
            .collect();
        self.region
            .index(&self.region.wrap(&shifted))
            .expect("wrapped coordinate lies in the region")
    }

    pub fn inverse(&self) -> Self {
        let neg = self.vector.iter().map(|a| -a).collect();
        Self::new(self.region, neg).expect("same dimension")
    }

    pub fn compose(&self, other: &Self) -> Self {
        let sum = self.vector.iter().zip(&other.vector).map(|(a, b)| a + b).collect();
        Self::new(self.region, sum).expect("same dimension")
    }

    pub fn is_identity(&self) -> bool {
        self.vector.iter().all(|&a| a == 0)
    }

    /// `perm[x]` is the image of site `x`.
    pub fn site_permutation(&self) -> Vec<usize> {
        (0..self.region.size()).map(|x| self.apply(x)).collect()
    }

    /// Permutation of basis indices implementing the unitary `T` that moves the
    /// tensor factor on site `x` to site `T(x)`.
    pub fn basis_permutation(&self) -> Vec<usize> {
        basis_permutation(self.region, &self.site_permutation())
    }
}

/// All `|Λ|` periodic translations, in row-major order of the shift vector.
pub fn periodic_translations(region: &Region) -> Vec<Translation<'_>> {
    let sides = region.sides();
    let total: usize = sides.iter().product();
    (0..total)
        .map(|k| {
            let mut rem = k;
            let mut v = vec![0i64; sides.len()];
            for axis in (0..sides.len()).rev() {
                v[axis] = (rem % sides[axis]) as i64;
                rem /= sides[axis];
            }
            Translation { vector: v, region }
        })
        .collect()
}

/// Unit shifts along each axis; they generate the translation group.
pub fn translation_generators(region: &Region) -> Vec<Translation<'_>> {
    (0..region.nu())
        .map(|axis| {
            let mut v = vec![0; region.nu()];
            v[axis] = 1;
            Translation::new(region, v).expect("matching dimension")
        })
        .collect()
}

/// Sites of `∂Λ`: those within sup-distance 1 of a point outside the box.
pub fn boundary_sites(region: &Region) -> Vec<usize> {
    (0..region.size())
        .filter(|&k| {
            region
                .coord(k)
                .iter()
                .zip(region.intervals())
                .any(|(&c, &(lo, hi))| c == lo || c == hi)
        })
        .collect()
}

/// Basis permutation for a site permutation: the returned `p` satisfies
/// `(U ψ)[p[i]] = ψ[i]` where `U` carries site `x` to `site_perm[x]`.
pub fn basis_permutation(region: &Region, site_perm: &[usize]) -> Vec<usize> {
    let n = region.size();
    let d = region.local_dim();
    let dim = region.hilbert_dim();
    let weights: Vec<usize> = (0..n).map(|x| d.pow((n - 1 - x) as u32)).collect();
    (0..dim)
        .map(|i| {
            let mut out = 0;
            for x in 0..n {
                let digit = (i / weights[x]) % d;
                out += digit * weights[site_perm[x]];
            }
            out
        })
        .collect()
}

/// Embed an operator acting on `sites` (tensor factors in the given order) as
/// `A' ⊗ 𝟙` on the whole region.
pub fn embed_on_sites(op: &Mat<C64>, sites: &[usize], region: &Region) -> Result<Mat<C64>> {
    let split = region.split(sites)?;
    if op.nrows() != split.keep_dim() || op.ncols() != split.keep_dim() {
        return Err(Error::DimensionMismatch { expected: split.keep_dim(), got: op.nrows() });
    }
    let dim = region.hilbert_dim();
    let mut out = Mat::<C64>::zeros(dim, dim);
    add_embedded(&mut out, op, &split, C64::new(1.0, 0.0));
    Ok(out)
}

/// `target += scale · (op ⊗ 𝟙)` using a precomputed split.
pub(crate) fn add_embedded(target: &mut Mat<C64>, op: &Mat<C64>, split: &SiteSplit, scale: C64) {
    let k = split.keep_dim();
    for b in 0..k {
        for a in 0..k {
            let v = op[(a, b)] * scale;
            if v == C64::new(0.0, 0.0) {
                continue;
            }
            let (ka, kb) = (split.keep_offsets[a], split.keep_offsets[b]);
            for &r in &split.rest_offsets {
                target[(ka + r, kb + r)] += v;
            }
        }
    }
}

/// Embed an operator defined on the sub-box `sub` after translating it by
/// `offset`. With `periodic`, sites leaving the region wrap around the torus.
pub fn embed_operator(
    op: &HermitianOp,
    sub: &Region,
    region: &Region,
    offset: &[i64],
    periodic: bool,
) -> Result<HermitianOp> {
    if sub.nu() != region.nu() || offset.len() != region.nu() {
        return Err(Error::InvalidArgument("lattice dimensions disagree".into()));
    }
    if sub.local_dim() != region.local_dim() {
        return Err(Error::InvalidArgument("local dimensions disagree".into()));
    }
    let mut sites = Vec::with_capacity(sub.size());
    for k in 0..sub.size() {
        let c: Vec<i64> = sub.coord(k).iter().zip(offset).map(|(c, o)| c + o).collect();
        let c = match (region.contains(&c), periodic) {
            (true, _) => c,
            (false, true) => region.wrap(&c),
            (false, false) => {
                return Err(Error::InvalidSites(format!(
                    "translated site {c:?} leaves the region"
                )))
            }
        };
        sites.push(region.index(&c).expect("inside after wrapping"));
    }
    let full = embed_on_sites(op.matrix(), &sites, region)?;
    Ok(HermitianOp::new(full))
}
