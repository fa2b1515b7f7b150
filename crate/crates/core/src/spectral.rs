//! Real scalar fields on the 2-torus in Fourier and collocation form.
//!
//! The torus is the 2π-periodic square `[0, 2π)²` with the normalized measure
//! `dx / (2π)²`, so the characters `e^{i n·x}` are orthonormal and every
//! integral over the torus is a plain average over grid nodes.
//!
//! A [`SpectralField`] stores Hermitian-symmetric coefficients on the square
//! `|n_i| <= n_max`, but only lattice points inside the Euclidean ball
//! `|n| <= n_max` are ever non-zero. A [`GridField`] holds the values of the
//! same field at the nodes `x_j = 2π j / M`.

use std::cell::RefCell;
use std::collections::HashMap;
use std::io::{BufRead, Read, Write};
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// A lattice point of `Z²`.
pub type Mode = (i32, i32);

#[inline]
pub fn norm_sq(n: Mode) -> i64 {
    let (a, b) = (n.0 as i64, n.1 as i64);
    a * a + b * b
}

#[inline]
pub fn in_ball(n: Mode, cutoff: usize) -> bool {
    norm_sq(n) <= (cutoff as i64) * (cutoff as i64)
}

/// Lexicographic half-space: `n1 > 0`, or `n1 == 0` and `n2 > 0`.
#[inline]
pub fn in_half_space(n: Mode) -> bool {
    n.0 > 0 || (n.0 == 0 && n.1 > 0)
}

/// Lattice points with `|n| <= cutoff` in lexicographic order.
pub fn ball_modes(cutoff: usize) -> impl Iterator<Item = Mode> {
    let c = cutoff as i32;
    (-c..=c).flat_map(move |a| (-c..=c).map(move |b| (a, b)).filter(move |&n| in_ball(n, cutoff)))
}

/// Mass-independent Sobolev bracket `sqrt(1 + |n|²)`.
#[inline]
pub fn bracket(n: Mode) -> f64 {
    (1.0 + norm_sq(n) as f64).sqrt()
}

/// Massive bracket `sqrt(ρ + |n|²)` used by the dynamics and the covariances.
#[inline]
pub fn bracket_rho(n: Mode, rho: f64) -> f64 {
    (rho + norm_sq(n) as f64).sqrt()
}

/// Smallest power of two `M` with `M > (degree + 1) * cutoff`.
///
/// On such a grid the product of `degree` fields with cutoff `cutoff` has
/// exact (alias-free) coefficients for every `|n| <= cutoff`.
pub fn grid_size_for_degree(cutoff: usize, degree: usize) -> usize {
    let bound = (degree + 1) * cutoff;
    let mut m = 1;
    while m <= bound {
        m *= 2;
    }
    m
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpectralField {
    n_max: usize,
    coeffs: Vec<Complex64>,
}

impl SpectralField {
    pub fn zeros(n_max: usize) -> Self {
        let side = 2 * n_max + 1;
        SpectralField {
            n_max,
            coeffs: vec![Complex64::new(0.0, 0.0); side * side],
        }
    }

    /// The constant field `c` (only the zero mode).
    pub fn constant(n_max: usize, c: f64) -> Self {
        let mut f = Self::zeros(n_max);
        f.set((0, 0), Complex64::new(c, 0.0));
        f
    }

    /// Builds a field from `(mode, coefficient)` pairs; each pair is mirrored
    /// to `-n` with the conjugate coefficient. Later pairs overwrite earlier ones.
    pub fn from_modes<I>(n_max: usize, modes: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Mode, Complex64)>,
    {
        let mut f = Self::zeros(n_max);
        for (n, c) in modes {
            if !in_ball(n, n_max) {
                return Err(Error::invalid(
                    "mode",
                    format!("{n:?} lies outside the ball of radius {n_max}"),
                ));
            }
            f.set(n, c);
        }
        Ok(f)
    }

    /// Raw coefficients on the square `|n_i| <= n_max`, row `n1`, column `n2`.
    pub(crate) fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub(crate) fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    #[inline]
    fn index(&self, n: Mode) -> usize {
        let side = 2 * self.n_max + 1;
        let a = (n.0 + self.n_max as i32) as usize;
        let b = (n.1 + self.n_max as i32) as usize;
        a * side + b
    }

    /// Coefficient at `n`; zero outside the stored ball.
    #[inline]
    pub fn get(&self, n: Mode) -> Complex64 {
        if in_ball(n, self.n_max) {
            self.coeffs[self.index(n)]
        } else {
            Complex64::new(0.0, 0.0)
        }
    }

    /// Sets the coefficient at `n` and its mirror at `-n`. The zero mode keeps
    /// only the real part.
    ///
    /// # Panics
    /// If `n` is outside the ball `|n| <= n_max`.
    pub fn set(&mut self, n: Mode, c: Complex64) {
        assert!(in_ball(n, self.n_max), "mode {n:?} outside cutoff {}", self.n_max);
        if n == (0, 0) {
            let i = self.index(n);
            self.coeffs[i] = Complex64::new(c.re, 0.0);
        } else {
            let i = self.index(n);
            let j = self.index((-n.0, -n.1));
            self.coeffs[i] = c;
            self.coeffs[j] = c.conj();
        }
    }

    /// Iterates `(mode, coefficient)` over the ball in lexicographic order.
    pub fn modes(&self) -> impl Iterator<Item = (Mode, Complex64)> + '_ {
        ball_modes(self.n_max).map(move |n| (n, self.coeffs[self.index(n)]))
    }

    /// Applies a per-mode map that must respect Hermitian symmetry,
    /// i.e. `map(-n, conj c) == conj map(n, c)`.
    pub fn map_modes(&self, mut map: impl FnMut(Mode, Complex64) -> Complex64) -> Self {
        let mut out = Self::zeros(self.n_max);
        for n in ball_modes(self.n_max) {
            let i = self.index(n);
            out.coeffs[i] = map(n, self.coeffs[i]);
        }
        out
    }

    /// Zero-pads to a larger cutoff.
    pub fn embed(&self, n_max: usize) -> Self {
        if n_max <= self.n_max {
            return project(self, n_max);
        }
        let mut out = Self::zeros(n_max);
        for (n, c) in self.modes() {
            let i = out.index(n);
            out.coeffs[i] = c;
        }
        out
    }

    pub fn scale(&self, a: f64) -> Self {
        SpectralField {
            n_max: self.n_max,
            coeffs: self.coeffs.iter().map(|c| c * a).collect(),
        }
    }

    /// `self + a * other`, at the larger of the two cutoffs.
    pub fn axpy(&self, a: f64, other: &SpectralField) -> Self {
        let n_max = self.n_max.max(other.n_max);
        let mut out = self.embed(n_max);
        for (n, c) in other.modes() {
            let i = out.index(n);
            out.coeffs[i] += c * a;
        }
        out
    }

    /// `Σ |f̂(n)|²`, the squared L² norm under the normalized measure.
    pub fn l2_norm_sq(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum()
    }

    /// Coefficient inner product `Σ f̂(n) conj(ĥ(n))`.
    pub fn inner(&self, other: &SpectralField) -> Complex64 {
        self.modes().map(|(n, c)| c * other.get(n).conj()).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }

    /// Largest violation of `f̂(-n) = conj f̂(n)` (and of `f̂(0)` being real).
    pub fn hermitian_defect(&self) -> f64 {
        self.modes()
            .map(|(n, c)| (c - self.get((-n.0, -n.1)).conj()).norm())
            .fold(self.get((0, 0)).im.abs(), f64::max)
    }

    /// Direct evaluation `Σ f̂(n) e^{i n·x}` at an arbitrary point.
    pub fn eval_at(&self, x: [f64; 2]) -> f64 {
        let mut acc = self.get((0, 0)).re;
        for (n, c) in self.modes().filter(|&(n, _)| in_half_space(n)) {
            let phase = n.0 as f64 * x[0] + n.1 as f64 * x[1];
            acc += 2.0 * (c.re * phase.cos() - c.im * phase.sin());
        }
        acc
    }

    /// Writes `n1,n2,re,im` rows for every mode in the ball, lexicographic order.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "n1,n2,re,im")?;
        for (n, c) in self.modes() {
            writeln!(w, "{},{},{:e},{:e}", n.0, n.1, c.re, c.im)?;
        }
        Ok(())
    }

    /// Reads the CSV layout written by [`write_csv`](Self::write_csv). The
    /// cutoff is the smallest one containing every listed mode.
    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut entries = Vec::new();
        for (lineno, line) in r.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || (lineno == 0 && line.starts_with("n1")) {
                continue;
            }
            let parts: Vec<&str> = line.split(',').map(str::trim).collect();
            if parts.len() != 4 {
                return Err(Error::Parse(format!("line {}: expected 4 columns", lineno + 1)));
            }
            let bad = |what: &str| Error::Parse(format!("line {}: bad {what}", lineno + 1));
            let n1: i32 = parts[0].parse().map_err(|_| bad("n1"))?;
            let n2: i32 = parts[1].parse().map_err(|_| bad("n2"))?;
            let re: f64 = parts[2].parse().map_err(|_| bad("re"))?;
            let im: f64 = parts[3].parse().map_err(|_| bad("im"))?;
            entries.push(((n1, n2), Complex64::new(re, im)));
        }
        Self::from_entries(entries)
    }

    /// Binary layout, little-endian: `u32` cutoff, `u32` mode count, then per
    /// mode `i32 n1, i32 n2, f64 re, f64 im` in lexicographic order.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        let count = ball_modes(self.n_max).count() as u32;
        w.write_all(&(self.n_max as u32).to_le_bytes())?;
        w.write_all(&count.to_le_bytes())?;
        for (n, c) in self.modes() {
            w.write_all(&n.0.to_le_bytes())?;
            w.write_all(&n.1.to_le_bytes())?;
            w.write_all(&c.re.to_le_bytes())?;
            w.write_all(&c.im.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut b4 = [0u8; 4];
        let mut b8 = [0u8; 8];
        r.read_exact(&mut b4)?;
        let n_max = u32::from_le_bytes(b4) as usize;
        r.read_exact(&mut b4)?;
        let count = u32::from_le_bytes(b4) as usize;
        let mut f = Self::zeros(n_max);
        for _ in 0..count {
            r.read_exact(&mut b4)?;
            let n1 = i32::from_le_bytes(b4);
            r.read_exact(&mut b4)?;
            let n2 = i32::from_le_bytes(b4);
            r.read_exact(&mut b8)?;
            let re = f64::from_le_bytes(b8);
            r.read_exact(&mut b8)?;
            let im = f64::from_le_bytes(b8);
            if !in_ball((n1, n2), n_max) {
                return Err(Error::Parse(format!("mode ({n1},{n2}) outside cutoff {n_max}")));
            }
            let i = f.index((n1, n2));
            f.coeffs[i] = Complex64::new(re, im);
        }
        Ok(f)
    }

    fn from_entries(entries: Vec<(Mode, Complex64)>) -> Result<Self> {
        let n_max = entries
            .iter()
            .map(|(n, _)| (norm_sq(*n) as f64).sqrt().ceil() as usize)
            .max()
            .unwrap_or(0);
        let mut f = Self::zeros(n_max);
        for (n, c) in entries {
            let i = f.index(n);
            f.coeffs[i] = c;
        }
        Ok(f)
    }
}

impl Add for &SpectralField {
    type Output = SpectralField;
    fn add(self, rhs: &SpectralField) -> SpectralField {
        self.axpy(1.0, rhs)
    }
}

impl Sub for &SpectralField {
    type Output = SpectralField;
    fn sub(self, rhs: &SpectralField) -> SpectralField {
        self.axpy(-1.0, rhs)
    }
}

impl Neg for &SpectralField {
    type Output = SpectralField;
    fn neg(self) -> SpectralField {
        self.scale(-1.0)
    }
}

impl Mul<f64> for &SpectralField {
    type Output = SpectralField;
    fn mul(self, a: f64) -> SpectralField {
        self.scale(a)
    }
}

/// Values of a real field on the `M × M` grid, row-major in `(j1, j2)`.
#[derive(Clone, Debug, PartialEq)]
pub struct GridField {
    m_grid: usize,
    values: Vec<f64>,
}

impl GridField {
    pub fn zeros(m_grid: usize) -> Self {
        GridField {
            m_grid,
            values: vec![0.0; m_grid * m_grid],
        }
    }

    pub fn from_values(m_grid: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != m_grid * m_grid {
            return Err(Error::invalid(
                "values",
                format!("expected {} values, got {}", m_grid * m_grid, values.len()),
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("values", "grid values must be finite"));
        }
        Ok(GridField { m_grid, values })
    }

    /// Samples `f(x1, x2)` at the grid nodes.
    pub fn from_fn(m_grid: usize, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let h = std::f64::consts::TAU / m_grid as f64;
        let mut values = Vec::with_capacity(m_grid * m_grid);
        for j1 in 0..m_grid {
            for j2 in 0..m_grid {
                values.push(f(j1 as f64 * h, j2 as f64 * h));
            }
        }
        Self::from_values(m_grid, values)
    }

    pub fn m_grid(&self) -> usize {
        self.m_grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, j1: usize, j2: usize) -> f64 {
        self.values[j1 * self.m_grid + j2]
    }

    /// Normalized integral over the torus.
    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        GridField {
            m_grid: self.m_grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Pointwise combination of two grids of equal size.
    pub fn zip_with(&self, other: &GridField, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if self.m_grid != other.m_grid {
            return Err(Error::invalid(
                "grid",
                format!("size mismatch {} vs {}", self.m_grid, other.m_grid),
            ));
        }
        Ok(GridField {
            m_grid: self.m_grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }
}

/// Sobolev-type norm `‖⟨∇⟩^s f‖_{L^r}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SobolevNormSpec {
    pub s: f64,
    pub r: f64,
    pub rho: f64,
}

impl SobolevNormSpec {
    pub fn new(s: f64, r: f64, rho: f64) -> Result<Self> {
        if !(r >= 2.0) || !r.is_finite() {
            return Err(Error::invalid("r", format!("need 2 <= r < inf, got {r}")));
        }
        if !(rho > 0.0) {
            return Err(Error::invalid("rho", format!("need rho > 0, got {rho}")));
        }
        Ok(SobolevNormSpec { s, r, rho })
    }

    /// The Hilbert norm `H^s`.
    pub fn h(s: f64) -> Self {
        SobolevNormSpec { s, r: 2.0, rho: 1.0 }
    }
}

/// Sharp Fourier projection onto `|n| <= cutoff`.
pub fn project(f: &SpectralField, cutoff: usize) -> SpectralField {
    let n_max = cutoff.min(f.n_max);
    let mut out = SpectralField::zeros(n_max);
    for n in ball_modes(n_max) {
        let i = out.index(n);
        out.coeffs[i] = f.get(n);
    }
    out
}

struct Plans {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

type PlanCache = (FftPlanner<f64>, HashMap<usize, Arc<Plans>>);

thread_local! {
    static PLANNER: RefCell<PlanCache> =
        RefCell::new((FftPlanner::new(), HashMap::new()));
}

fn plans(m: usize) -> Arc<Plans> {
    PLANNER.with(|cell| {
        let mut guard = cell.borrow_mut();
        let (planner, cache) = &mut *guard;
        if let Some(p) = cache.get(&m) {
            return p.clone();
        }
        let p = Arc::new(Plans {
            forward: planner.plan_fft_forward(m),
            inverse: planner.plan_fft_inverse(m),
        });
        cache.insert(m, p.clone());
        p
    })
}

#[inline]
fn wrap(k: i32, m: usize) -> usize {
    k.rem_euclid(m as i32) as usize
}

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// Synthesis `Σ f̂(n) e^{i n·x_j}` on the `M × M` grid.
pub fn to_grid(f: &SpectralField, m_grid: usize) -> Result<GridField> {
    if m_grid <= 2 * f.n_max {
        return Err(Error::Aliasing {
            grid: m_grid,
            cutoff: f.n_max,
            degree: 1,
            required: 2 * f.n_max,
        });
    }
    Ok(GridField {
        m_grid,
        values: synthesize(f, m_grid),
    })
}

/// Real values on the grid, laid out `[j1 * m + j2]`.
///
/// The first pass transforms over `n1` only the columns `|n2| <= n_max`.
/// Every row of the result is the spectrum of a real signal, so the second
/// pass packs two grid rows into one complex transform over `n2`.
fn synthesize(f: &SpectralField, m: usize) -> Vec<f64> {
    let p = plans(m);
    let c = f.n_max as i32;
    let cols = 2 * f.n_max + 1;
    let side = cols;
    let mut scratch = vec![ZERO; p.inverse.get_inplace_scratch_len()];
    // stage[(n2 + c) * m + j1]
    let mut stage = vec![ZERO; cols * m];
    for (r, chunk) in stage.chunks_exact_mut(m).enumerate() {
        for n1 in -c..=c {
            chunk[wrap(n1, m)] = f.coeffs[(n1 + c) as usize * side + r];
        }
        p.inverse.process_with_scratch(chunk, &mut scratch);
    }
    let slots: Vec<usize> = (-c..=c).map(|n2| wrap(n2, m)).collect();
    let mut values = Vec::with_capacity(m * m);
    let mut row = vec![ZERO; m];
    for j1 in (0..m).step_by(2) {
        let pair = j1 + 1 < m;
        row.fill(ZERO);
        for (r, &slot) in slots.iter().enumerate() {
            let a = stage[r * m + j1];
            let b = if pair { stage[r * m + j1 + 1] } else { ZERO };
            row[slot] = a + I * b;
        }
        p.inverse.process_with_scratch(&mut row, &mut scratch);
        values.extend(row.iter().map(|z| z.re));
        if pair {
            values.extend(row.iter().map(|z| z.im));
        }
    }
    values
}

/// Analysis with the normalized inner product, truncated to `|n| <= cutoff`.
///
/// Two real grid rows share one complex transform over `j2`. Only the
/// retained `|n2| <= cutoff` are unpacked and then transformed over `j1`.
pub fn from_grid(g: &GridField, cutoff: usize) -> Result<SpectralField> {
    let m = g.m_grid;
    if m <= 2 * cutoff {
        return Err(Error::Aliasing {
            grid: m,
            cutoff,
            degree: 1,
            required: 2 * cutoff,
        });
    }
    let p = plans(m);
    let c = cutoff as i32;
    let rows = 2 * cutoff + 1;
    let mut scratch = vec![ZERO; p.forward.get_inplace_scratch_len()];
    // stage[(n2 + c) * m + j1]
    let mut stage = vec![ZERO; rows * m];
    let mut row = vec![ZERO; m];
    for j1 in (0..m).step_by(2) {
        let pair = j1 + 1 < m;
        for (j2, z) in row.iter_mut().enumerate() {
            let b = if pair { g.values[(j1 + 1) * m + j2] } else { 0.0 };
            *z = Complex64::new(g.values[j1 * m + j2], b);
        }
        p.forward.process_with_scratch(&mut row, &mut scratch);
        for n2 in -c..=c {
            let z = row[wrap(n2, m)];
            let zc = row[wrap(-n2, m)].conj();
            let r = (n2 + c) as usize * m;
            stage[r + j1] = (z + zc) * 0.5;
            if pair {
                stage[r + j1 + 1] = (z - zc) * Complex64::new(0.0, -0.5);
            }
        }
    }
    for r in 0..rows {
        p.forward.process_with_scratch(&mut stage[r * m..(r + 1) * m], &mut scratch);
    }
    let norm = 1.0 / (m * m) as f64;
    let mut out = SpectralField::zeros(cutoff);
    for n in ball_modes(cutoff) {
        let i = out.index(n);
        out.coeffs[i] = stage[(n.1 + c) as usize * m + wrap(n.0, m)] * norm;
    }
    // enforce exact symmetry against rounding
    for n in ball_modes(cutoff).filter(|&n| in_half_space(n)) {
        let c = 0.5 * (out.get(n) + out.get((-n.0, -n.1)).conj());
        out.set(n, c);
    }
    let c0 = out.get((0, 0));
    out.set((0, 0), c0);
    Ok(out)
}

/// `‖⟨∇⟩^s f‖_{L^r}` with the plain bracket `⟨n⟩ = sqrt(1 + |n|²)`.
///
/// For `r = 2` this is computed exactly through Parseval. For `r > 2` the
/// weighted field is sampled on a grid with `M > max(2, ⌈r⌉) · n_max`, which
/// integrates `|·|^r` exactly when `r` is an even integer.
pub fn sobolev_norm(f: &SpectralField, spec: &SobolevNormSpec) -> f64 {
    let weighted = f.map_modes(|n, c| c * bracket(n).powf(spec.s));
    if spec.r == 2.0 {
        return weighted.l2_norm_sq().sqrt();
    }
    let degree = (spec.r.ceil() as usize).max(2);
    let m = grid_size_for_degree(f.n_max, degree - 1);
    let g = to_grid(&weighted, m).expect("grid size chosen alias-free");
    let mean = g.values.iter().map(|v| v.abs().powf(spec.r)).sum::<f64>() / g.values.len() as f64;
    mean.powf(1.0 / spec.r)
}
