//! Exact simulation of stationary Gaussian fields on regular grids by
//! circulant embedding.
//!
//! The covariance on the grid is embedded in a circulant (d=1) or
//! block-circulant (d=2) matrix on a torus of side `m >= 2(n-1)`, whose
//! eigenvalues are one FFT of the first row. A sample is the real part of
//! one FFT of `sqrt(lambda/M) Z` with complex white noise `Z`.
//!
//! Every replicate draws from its own ChaCha stream keyed by
//! `(seed, replicate_index)`, so results do not depend on scheduling.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::{Arc, Mutex, OnceLock};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::covariance::CovarianceModel;
use crate::error::{Error, Result};

/// Default cap on the number of grid points.
pub const DEFAULT_MAX_POINTS: usize = 1 << 26;

/// Negative eigenvalues above `-PSD_REL_TOL * max_eig` count as round-off.
pub const PSD_REL_TOL: f64 = 1e-10;

/// Times the torus is doubled before giving up on a negative spectrum.
pub const MAX_PADDINGS: u32 = 3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub d: usize,
    pub t: f64,
    pub h: f64,
    pub n: usize,
}

impl GridSpec {
    pub fn new(d: usize, t: f64, h: f64) -> Result<Self> {
        Self::with_cap(d, t, h, DEFAULT_MAX_POINTS)
    }

    pub fn with_cap(d: usize, t: f64, h: f64, max_points: usize) -> Result<Self> {
        if d != 1 && d != 2 {
            return Err(Error::InvalidArgument(format!("dimension must be 1 or 2, got {d}")));
        }
        if !(t > 0.0 && t.is_finite() && h > 0.0 && h <= t) {
            return Err(Error::InvalidArgument(format!("need 0 < h <= T, got T={t}, h={h}")));
        }
        let n = (t / h).round() as usize + 1;
        let points = n.checked_pow(d as u32).unwrap_or(usize::MAX);
        if points > max_points {
            return Err(Error::GridTooLarge { points, cap: max_points });
        }
        Ok(GridSpec { d, t, h, n })
    }

    pub fn points(&self) -> usize {
        self.n.pow(self.d as u32)
    }

    /// Edge length actually covered by the grid, `h (n - 1)`.
    pub fn t_grid(&self) -> f64 {
        self.h * (self.n - 1) as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldSample {
    pub grid: GridSpec,
    /// Row-major for `d = 2`.
    pub values: Vec<f64>,
    pub seed: u64,
    pub replicate_index: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    /// Torus side.
    pub m: usize,
    /// Row-major `m^d` eigenvalues.
    pub eigenvalues: Vec<f64>,
    pub min_eig: f64,
    pub max_eig: f64,
    /// How many times the minimal torus was doubled.
    pub paddings: u32,
}

fn fft_in_place(buf: &mut [Complex<f64>], m: usize, d: usize, plan: &dyn Fft<f64>) {
    // rustfft transforms each length-m chunk, i.e. every row.
    plan.process(buf);
    if d == 2 {
        transpose(buf, m);
        plan.process(buf);
        transpose(buf, m);
    }
}

fn transpose(buf: &mut [Complex<f64>], m: usize) {
    for i in 0..m {
        for j in i + 1..m {
            buf.swap(i * m + j, j * m + i);
        }
    }
}

fn torus_lag(k: usize, m: usize) -> f64 {
    k.min(m - k) as f64
}

fn spectrum_on_torus(model: &CovarianceModel, grid: &GridSpec, m: usize, plan: &dyn Fft<f64>) -> Vec<f64> {
    let mut buf: Vec<Complex<f64>> = if grid.d == 1 {
        (0..m)
            .map(|k| Complex::new(model.rho_radial(grid.h * torus_lag(k, m)), 0.0))
            .collect()
    } else {
        (0..m * m)
            .map(|idx| {
                let (a, b) = (torus_lag(idx / m, m), torus_lag(idx % m, m));
                Complex::new(model.rho_radial(grid.h * a.hypot(b)), 0.0)
            })
            .collect()
    };
    fft_in_place(&mut buf, m, grid.d, plan);
    buf.into_iter().map(|c| c.re).collect()
}

/// Embedding spectrum, doubling the torus up to [`MAX_PADDINGS`] times.
pub fn circulant_spectrum(model: &CovarianceModel, grid: &GridSpec) -> Result<Spectrum> {
    FieldSampler::new(model, grid).map(|s| s.spectrum)
}

/// Precomputed embedding for one `(model, grid)` pair.
pub struct FieldSampler {
    grid: GridSpec,
    spectrum: Spectrum,
    /// `sqrt(lambda / M)`.
    weights: Vec<f64>,
    plan: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for FieldSampler {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FieldSampler")
            .field("grid", &self.grid)
            .field("m", &self.spectrum.m)
            .field("paddings", &self.spectrum.paddings)
            .finish()
    }
}

impl FieldSampler {
    pub fn new(model: &CovarianceModel, grid: &GridSpec) -> Result<Self> {
        if model.dim() != grid.d {
            return Err(Error::GridMismatch(format!(
                "model is {}-dimensional, grid is {}-dimensional",
                model.dim(),
                grid.d
            )));
        }
        let mut planner = FftPlanner::new();
        let base = 2 * (grid.n - 1);
        let mut last = (0.0, 0.0);
        for paddings in 0..=MAX_PADDINGS {
            let m = base << paddings;
            let plan = planner.plan_fft_forward(m);
            let eig = spectrum_on_torus(model, grid, m, plan.as_ref());
            let min_eig = eig.iter().copied().fold(f64::INFINITY, f64::min);
            let max_eig = eig.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            last = (min_eig, max_eig);
            if min_eig >= -PSD_REL_TOL * max_eig {
                let total = eig.len() as f64;
                // Entries in [-tol, 0) are round-off of a zero eigenvalue.
                let weights = eig.iter().map(|&l| (l.max(0.0) / total).sqrt()).collect();
                return Ok(FieldSampler {
                    grid: *grid,
                    spectrum: Spectrum {
                        m,
                        eigenvalues: eig,
                        min_eig,
                        max_eig,
                        paddings,
                    },
                    weights,
                    plan,
                });
            }
        }
        Err(Error::NotPsd {
            min_eig: last.0,
            max_eig: last.1,
            paddings: MAX_PADDINGS,
        })
    }

    /// Shared sampler for `(model, grid)`, built once per process.
    pub fn cached(model: &CovarianceModel, grid: &GridSpec) -> Result<Arc<Self>> {
        static CACHE: OnceLock<Mutex<HashMap<String, Arc<FieldSampler>>>> = OnceLock::new();
        let key = format!("{model:?}|{grid:?}");
        let cache = CACHE.get_or_init(Default::default);
        if let Some(s) = cache.lock().expect("cache poisoned").get(&key) {
            return Ok(Arc::clone(s));
        }
        let s = Arc::new(FieldSampler::new(model, grid)?);
        cache.lock().expect("cache poisoned").insert(key, Arc::clone(&s));
        Ok(s)
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn spectrum(&self) -> &Spectrum {
        &self.spectrum
    }

    /// Covariance between grid points `lag` apart implied by the embedding
    /// weights, i.e. what the sampler actually produces.
    pub fn implied_covariance(&self, lag: &[usize]) -> f64 {
        let m = self.spectrum.m;
        let phase = |l: usize, k: usize| 2.0 * std::f64::consts::PI * ((l * k) % m) as f64 / m as f64;
        match *lag {
            [k] => self
                .weights
                .iter()
                .enumerate()
                .map(|(l, w)| w * w * phase(l, k).cos())
                .sum(),
            [k1, k2] => self
                .weights
                .iter()
                .enumerate()
                .map(|(idx, w)| w * w * (phase(idx / m, k1) + phase(idx % m, k2)).cos())
                .sum(),
            _ => f64::NAN,
        }
    }

    /// Fill `out` with one replicate; `scratch` must hold `m^d` entries.
    fn sample_into(&self, seed: u64, replicate_index: u64, scratch: &mut Vec<Complex<f64>>, out: &mut Vec<f64>) {
        let mut rng = replicate_rng(seed, replicate_index);
        scratch.clear();
        scratch.extend(self.weights.iter().map(|&w| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            Complex::new(w * re, w * im)
        }));
        let m = self.spectrum.m;
        fft_in_place(scratch, m, self.grid.d, self.plan.as_ref());
        let n = self.grid.n;
        out.clear();
        if self.grid.d == 1 {
            out.extend(scratch[..n].iter().map(|c| c.re));
        } else {
            for i in 0..n {
                out.extend(scratch[i * m..i * m + n].iter().map(|c| c.re));
            }
        }
    }

    pub fn sample(&self, seed: u64, replicate_index: u64) -> FieldSample {
        let mut scratch = Vec::with_capacity(self.weights.len());
        let mut values = Vec::with_capacity(self.grid.points());
        self.sample_into(seed, replicate_index, &mut scratch, &mut values);
        FieldSample {
            grid: self.grid,
            values,
            seed,
            replicate_index,
        }
    }

    /// Apply `f` to replicate `replicate_index` without keeping the field.
    pub fn with_sample<R>(&self, seed: u64, replicate_index: u64, f: impl FnOnce(&[f64]) -> R) -> R {
        thread_local! {
            static BUFFERS: std::cell::RefCell<(Vec<Complex<f64>>, Vec<f64>)> =
                const { std::cell::RefCell::new((Vec::new(), Vec::new())) };
        }
        BUFFERS.with(|cell| {
            let (scratch, out) = &mut *cell.borrow_mut();
            self.sample_into(seed, replicate_index, scratch, out);
            f(out)
        })
    }
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Child seed for an independent family of streams, e.g. one per window size.
pub fn derive_seed(master_seed: u64, domain: u64) -> u64 {
    let mut s = master_seed ^ domain.wrapping_mul(0xD1B5_4A32_D192_ED03);
    splitmix64(&mut s)
}

/// ChaCha stream `replicate_index` under the key expanded from `seed`.
pub fn replicate_rng(seed: u64, replicate_index: u64) -> ChaCha8Rng {
    let mut state = seed;
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(replicate_index);
    rng
}

/// One exact sample; the embedding is built once per `(model, grid)`.
pub fn sample_field(
    model: &CovarianceModel,
    grid: &GridSpec,
    master_seed: u64,
    replicate_index: u64,
) -> Result<FieldSample> {
    Ok(FieldSampler::cached(model, grid)?.sample(master_seed, replicate_index))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovarianceEstimate {
    pub estimate: f64,
    pub stderr: f64,
}

/// Average of `X(t) X(t + lag)` over each field, then across replicates.
/// `lag` is in grid steps, one entry per axis.
pub fn empirical_covariance(samples: &[FieldSample], lag: &[isize]) -> Result<CovarianceEstimate> {
    let Some(first) = samples.first() else {
        return Err(Error::InvalidArgument("need at least 2 samples".into()));
    };
    if samples.len() < 2 {
        return Err(Error::InvalidArgument("need at least 2 samples".into()));
    }
    let grid = first.grid;
    if samples.iter().any(|s| s.grid != grid) {
        return Err(Error::GridMismatch("samples live on different grids".into()));
    }
    if lag.len() != grid.d {
        return Err(Error::GridMismatch(format!("lag has {} axes, grid has {}", lag.len(), grid.d)));
    }
    let n = grid.n as isize;
    if lag.iter().any(|l| l.abs() >= n) {
        return Err(Error::InvalidArgument(format!("lag {lag:?} reaches outside the grid")));
    }
    // lag and -lag describe the same pairs; folding onto one canonical sign
    // makes the two estimates bit-identical.
    let flip = lag.iter().find(|&&l| l != 0).is_some_and(|&l| l < 0);
    let c: Vec<isize> = lag.iter().map(|&l| if flip { -l } else { l }).collect();
    let span = |l: isize| (0.max(-l) as usize)..((n - 0.max(l)) as usize);
    let per_field: Vec<f64> = samples
        .iter()
        .map(|s| {
            let v = &s.values;
            let (mut sum, mut count) = (0.0, 0usize);
            if grid.d == 1 {
                for i in span(c[0]) {
                    sum += v[i] * v[(i as isize + c[0]) as usize];
                    count += 1;
                }
            } else {
                let n = grid.n;
                for i in span(c[0]) {
                    let qi = (i as isize + c[0]) as usize;
                    for j in span(c[1]) {
                        let qj = (j as isize + c[1]) as usize;
                        sum += v[i * n + j] * v[qi * n + qj];
                        count += 1;
                    }
                }
            }
            sum / count as f64
        })
        .collect();
    let r = per_field.len() as f64;
    let mean = per_field.iter().sum::<f64>() / r;
    let var = per_field.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (r - 1.0);
    Ok(CovarianceEstimate {
        estimate: mean,
        stderr: (var / r).sqrt(),
    })
}

pub const DUMP_MAGIC: &[u8; 4] = b"SJRN";
pub const DUMP_VERSION: u32 = 1;
pub const DUMP_HEADER_LEN: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DumpHeader {
    pub version: u32,
    pub d: u32,
    pub n: u64,
    pub h: f64,
    pub t: f64,
    pub seed: u64,
    pub replicates: u64,
}

impl DumpHeader {
    fn to_bytes(self) -> [u8; DUMP_HEADER_LEN] {
        let mut b = [0u8; DUMP_HEADER_LEN];
        b[0..4].copy_from_slice(DUMP_MAGIC);
        b[4..8].copy_from_slice(&self.version.to_le_bytes());
        b[8..12].copy_from_slice(&self.d.to_le_bytes());
        // 12..16 reserved
        b[16..24].copy_from_slice(&self.n.to_le_bytes());
        b[24..32].copy_from_slice(&self.h.to_le_bytes());
        b[32..40].copy_from_slice(&self.t.to_le_bytes());
        b[40..48].copy_from_slice(&self.seed.to_le_bytes());
        b[48..56].copy_from_slice(&self.replicates.to_le_bytes());
        // 56..64 reserved
        b
    }

    fn from_bytes(b: &[u8; DUMP_HEADER_LEN]) -> Result<Self> {
        if &b[0..4] != DUMP_MAGIC {
            return Err(Error::Format("bad magic, not a field dump".into()));
        }
        let u32_at = |i: usize| u32::from_le_bytes(b[i..i + 4].try_into().expect("4 bytes"));
        let u64_at = |i: usize| u64::from_le_bytes(b[i..i + 8].try_into().expect("8 bytes"));
        let header = DumpHeader {
            version: u32_at(4),
            d: u32_at(8),
            n: u64_at(16),
            h: f64::from_bits(u64_at(24)),
            t: f64::from_bits(u64_at(32)),
            seed: u64_at(40),
            replicates: u64_at(48),
        };
        if header.version != DUMP_VERSION {
            return Err(Error::Format(format!("unsupported dump version {}", header.version)));
        }
        Ok(header)
    }

    pub fn values_per_field(&self) -> usize {
        (self.n as usize).pow(self.d)
    }
}

/// Write fields sharing one grid and seed as a flat little-endian dump.
pub fn write_dump(path: &Path, samples: &[FieldSample]) -> Result<()> {
    let Some(first) = samples.first() else {
        return Err(Error::InvalidArgument("no fields to write".into()));
    };
    if samples.iter().any(|s| s.grid != first.grid || s.seed != first.seed) {
        return Err(Error::GridMismatch("dump fields must share grid and seed".into()));
    }
    let header = DumpHeader {
        version: DUMP_VERSION,
        d: first.grid.d as u32,
        n: first.grid.n as u64,
        h: first.grid.h,
        t: first.grid.t,
        seed: first.seed,
        replicates: samples.len() as u64,
    };
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    w.write_all(&header.to_bytes()).map_err(|e| Error::io(path, e))?;
    for s in samples {
        for v in &s.values {
            w.write_all(&v.to_le_bytes()).map_err(|e| Error::io(path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_dump(path: &Path) -> Result<(DumpHeader, Vec<Vec<f64>>)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = BufReader::new(file);
    let mut hb = [0u8; DUMP_HEADER_LEN];
    r.read_exact(&mut hb).map_err(|e| Error::io(path, e))?;
    let header = DumpHeader::from_bytes(&hb)?;
    let per = header.values_per_field();
    let mut fields = Vec::with_capacity(header.replicates as usize);
    let mut buf = [0u8; 8];
    for _ in 0..header.replicates {
        let mut values = Vec::with_capacity(per);
        for _ in 0..per {
            r.read_exact(&mut buf).map_err(|e| Error::io(path, e))?;
            values.push(f64::from_le_bytes(buf));
        }
        fields.push(values);
    }
    let mut rest = Vec::new();
    r.read_to_end(&mut rest).map_err(|e| Error::io(path, e))?;
    if !rest.is_empty() {
        return Err(Error::Format(format!("{} trailing bytes after the last field", rest.len())));
    }
    Ok((header, fields))
}
