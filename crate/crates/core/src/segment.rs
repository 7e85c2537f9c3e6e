//! Discretized Delfour–Mitter space: `(v, φ) ∈ ℝᵈ × L²([-r,0], ℝᵈ)` on a uniform grid.
//!
//! A segment stores the `n_r` history samples at `{-r, -r+h, …, -h}` followed by the
//! present value at `0`, so it has exactly the memory layout of a window of a
//! [`Path`]. That lets the solver hand out segments as borrowed views without copying.

use std::fmt;

use crate::error::{Error, Result};
use crate::scalar::{dot, Real};

/// Relative tolerance for "lies on the grid" checks.
const GRID_TOL: f64 = 1e-9;

fn grid_count(name: &str, len: f64, h: f64) -> Result<usize> {
    let ratio = len / h;
    let n = ratio.round();
    if !ratio.is_finite() || (ratio - n).abs() > GRID_TOL * n.max(1.0) {
        return Err(Error::InvalidGrid(format!(
            "h = {h} does not divide {name} = {len}"
        )));
    }
    Ok(n as usize)
}

/// Uniform time grid over `[-r, T]` with `r = n_r·h` and `T = n_T·h`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid<T> {
    h: T,
    n_r: usize,
    n_t: usize,
}

impl<T: Real> Grid<T> {
    pub fn new(delay: T, horizon: T, h: T) -> Result<Self> {
        let (hf, rf, tf) = (h.as_f64(), delay.as_f64(), horizon.as_f64());
        if !(hf > 0.0) || !hf.is_finite() {
            return Err(Error::InvalidGrid(format!("step h = {hf} must be positive")));
        }
        if !(rf >= 0.0) {
            return Err(Error::InvalidGrid(format!("delay r = {rf} must be non-negative")));
        }
        if !(tf > 0.0) {
            return Err(Error::InvalidGrid(format!("horizon T = {tf} must be positive")));
        }
        let n_r = grid_count("r", rf, hf)?;
        let n_t = grid_count("T", tf, hf)?;
        Ok(Self { h, n_r, n_t })
    }

    /// Grid from step counts; always valid.
    pub fn from_counts(h: T, n_r: usize, n_t: usize) -> Self {
        assert!(h > T::zero() && n_t > 0);
        Self { h, n_r, n_t }
    }

    #[inline]
    pub fn step(&self) -> T {
        self.h
    }
    #[inline]
    pub fn n_delay(&self) -> usize {
        self.n_r
    }
    #[inline]
    pub fn n_steps(&self) -> usize {
        self.n_t
    }
    pub fn delay(&self) -> T {
        T::from_usize_lossy(self.n_r) * self.h
    }
    pub fn horizon(&self) -> T {
        T::from_usize_lossy(self.n_t) * self.h
    }
    /// Time of step `k`, i.e. `t_k = k·h`.
    #[inline]
    pub fn time(&self, k: usize) -> T {
        T::from_usize_lossy(k) * self.h
    }

    /// Step index of a time in `[0, T]`; errors when `t` is off the grid.
    pub fn step_index(&self, t: T) -> Result<usize> {
        let (tf, hf) = (t.as_f64(), self.h.as_f64());
        let ratio = tf / hf;
        let k = ratio.round();
        if !(ratio >= -GRID_TOL) || (ratio - k).abs() > GRID_TOL * k.max(1.0) || k as usize > self.n_t {
            return Err(Error::OffGrid { u: tf, h: hf, r: self.delay().as_f64() });
        }
        Ok(k as usize)
    }

    /// Same grid with a different horizon (used by restarts and sweeps).
    pub fn with_steps(&self, n_t: usize) -> Self {
        Self { h: self.h, n_r: self.n_r, n_t }
    }

    /// Grid whose step is `factor` times coarser.
    pub fn coarsen(&self, factor: usize) -> Result<Self> {
        if factor == 0 || self.n_r % factor != 0 || self.n_t % factor != 0 {
            return Err(Error::InvalidGrid(format!("cannot coarsen by {factor}")));
        }
        Ok(Self { h: self.h * T::from_usize_lossy(factor), n_r: self.n_r / factor, n_t: self.n_t / factor })
    }
}

/// Borrowed segment `(v, φ)`; `data` holds `n_r + 1` points of dimension `d`,
/// history first and the present value last.
#[derive(Clone, Copy)]
pub struct SegmentView<'a, T> {
    data: &'a [T],
    d: usize,
    n_r: usize,
    h: T,
}

impl<'a, T: Real> SegmentView<'a, T> {
    pub fn new(data: &'a [T], d: usize, n_r: usize, h: T) -> Self {
        debug_assert_eq!(data.len(), (n_r + 1) * d);
        Self { data, d, n_r, h }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.d
    }
    #[inline]
    pub fn n_delay(&self) -> usize {
        self.n_r
    }
    #[inline]
    pub fn step(&self) -> T {
        self.h
    }
    #[inline]
    pub fn data(&self) -> &'a [T] {
        self.data
    }

    /// Present value `v = ρ_0(seg)`.
    #[inline]
    pub fn v(&self) -> &'a [T] {
        &self.data[self.n_r * self.d..]
    }

    /// History sample `φ(-r + k·h)`, `k < n_r`.
    #[inline]
    pub fn phi(&self, k: usize) -> &'a [T] {
        debug_assert!(k < self.n_r);
        &self.data[k * self.d..(k + 1) * self.d]
    }

    /// Value `lag` steps in the past; `lagged(0)` is `v`.
    #[inline]
    pub fn lagged(&self, lag: usize) -> &'a [T] {
        let k = self.n_r - lag;
        &self.data[k * self.d..(k + 1) * self.d]
    }

    /// Lag in steps of a time offset `s ∈ [0, r]`, assumed on the grid.
    #[inline]
    pub fn lag_steps(&self, s: T) -> usize {
        (s / self.h).round().to_usize().unwrap_or(0).min(self.n_r)
    }

    /// Evaluation operator `ρ_u`. No interpolation: `u` must be a grid point.
    pub fn rho(&self, u: T) -> Result<&'a [T]> {
        let (uf, hf) = (u.as_f64(), self.h.as_f64());
        let rf = self.n_r as f64 * hf;
        let idx = (uf + rf) / hf;
        let k = idx.round();
        if !(uf <= GRID_TOL * hf && uf >= -rf - GRID_TOL * hf) || (idx - k).abs() > GRID_TOL * k.max(1.0) {
            return Err(Error::OffGrid { u: uf, h: hf, r: rf });
        }
        let k = k as usize;
        Ok(&self.data[k * self.d..(k + 1) * self.d])
    }

    pub fn to_owned(&self) -> Segment<T> {
        Segment { data: self.data.to_vec(), d: self.d, n_r: self.n_r, h: self.h }
    }

    fn check_compatible(&self, other: &SegmentView<'_, T>) -> Result<()> {
        if self.d != other.d || self.n_r != other.n_r || (self.h - other.h).abs() > self.h * T::lit(GRID_TOL) {
            return Err(Error::GridMismatch(format!(
                "segments (d={}, n_r={}, h={}) and (d={}, n_r={}, h={})",
                self.d, self.n_r, self.h, other.d, other.n_r, other.h
            )));
        }
        Ok(())
    }
}

/// Owned segment, the element of the discretized `M₂`.
#[derive(Clone, PartialEq)]
pub struct Segment<T> {
    data: Vec<T>,
    d: usize,
    n_r: usize,
    h: T,
}

impl<T: fmt::Debug> fmt::Debug for Segment<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Segment")
            .field("d", &self.d)
            .field("n_r", &self.n_r)
            .field("h", &self.h)
            .field("v", &&self.data[self.n_r * self.d..])
            .finish()
    }
}

impl<T: Real> Segment<T> {
    /// Segment from a present value and `n_r` history points (each of length `d`).
    pub fn new(v: Vec<T>, phi: Vec<Vec<T>>, h: T) -> Result<Self> {
        let d = v.len();
        if d == 0 {
            return Err(Error::GridMismatch("segment dimension must be positive".into()));
        }
        let n_r = phi.len();
        let mut data = Vec::with_capacity((n_r + 1) * d);
        for p in &phi {
            if p.len() != d {
                return Err(Error::GridMismatch(format!("history point of length {} in a {d}-dimensional segment", p.len())));
            }
            data.extend_from_slice(p);
        }
        data.extend_from_slice(&v);
        Ok(Self { data, d, n_r, h })
    }

    pub fn zeros(d: usize, n_r: usize, h: T) -> Self {
        Self { data: vec![T::zero(); (n_r + 1) * d], d, n_r, h }
    }

    /// Segment of shape `grid` filled from `f(u)` for `u ∈ {-r, …, -h, 0}`.
    pub fn from_fn(grid: &Grid<T>, d: usize, mut f: impl FnMut(T) -> Vec<T>) -> Self {
        let n_r = grid.n_delay();
        let h = grid.step();
        let mut data = Vec::with_capacity((n_r + 1) * d);
        for k in 0..=n_r {
            let u = -T::from_usize_lossy(n_r - k) * h;
            let x = f(u);
            assert_eq!(x.len(), d);
            data.extend_from_slice(&x);
        }
        Self { data, d, n_r, h }
    }

    /// Scalar segment from a closed form.
    pub fn scalar_fn(grid: &Grid<T>, mut f: impl FnMut(T) -> T) -> Self {
        Self::from_fn(grid, 1, |u| vec![f(u)])
    }

    pub(crate) fn from_raw(data: Vec<T>, d: usize, n_r: usize, h: T) -> Self {
        debug_assert_eq!(data.len(), (n_r + 1) * d);
        Self { data, d, n_r, h }
    }

    #[inline]
    pub fn view(&self) -> SegmentView<'_, T> {
        SegmentView { data: &self.data, d: self.d, n_r: self.n_r, h: self.h }
    }
    pub fn dim(&self) -> usize {
        self.d
    }
    pub fn n_delay(&self) -> usize {
        self.n_r
    }
    pub fn step(&self) -> T {
        self.h
    }
    pub fn delay(&self) -> T {
        T::from_usize_lossy(self.n_r) * self.h
    }
    pub fn v(&self) -> &[T] {
        &self.data[self.n_r * self.d..]
    }
    pub fn v_mut(&mut self) -> &mut [T] {
        let off = self.n_r * self.d;
        &mut self.data[off..]
    }
    pub fn phi(&self, k: usize) -> &[T] {
        self.view().phi(k)
    }
    pub fn phi_mut(&mut self, k: usize) -> &mut [T] {
        assert!(k < self.n_r);
        &mut self.data[k * self.d..(k + 1) * self.d]
    }
    pub fn data(&self) -> &[T] {
        &self.data
    }
    pub fn rho(&self, u: T) -> Result<&[T]> {
        self.view().rho(u)
    }

    pub fn same_shape(&self, other: &Segment<T>) -> bool {
        self.view().check_compatible(&other.view()).is_ok()
    }

    /// `self + eps·other`.
    pub fn add_scaled(&self, other: &Segment<T>, eps: T) -> Result<Segment<T>> {
        self.view().check_compatible(&other.view())?;
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| a + eps * b).collect();
        Ok(Segment { data, d: self.d, n_r: self.n_r, h: self.h })
    }

    pub fn scaled(&self, c: T) -> Segment<T> {
        Segment { data: self.data.iter().map(|&a| a * c).collect(), d: self.d, n_r: self.n_r, h: self.h }
    }

    /// `self / m2_norm(self)`; the zero segment is returned unchanged.
    pub fn normalized(&self) -> Segment<T> {
        let n = m2_norm(&self.view());
        if n > T::zero() {
            self.scaled(T::one() / n)
        } else {
            self.clone()
        }
    }
}

/// `⟨a, b⟩ = a.v·b.v + h Σ_k a.φ_k·b.φ_k` (left-endpoint quadrature).
pub fn m2_inner<T: Real>(a: &SegmentView<'_, T>, b: &SegmentView<'_, T>) -> Result<T> {
    a.check_compatible(b)?;
    let split = a.n_r * a.d;
    let hist = dot(&a.data[..split], &b.data[..split]);
    Ok(dot(a.v(), b.v()) + a.h * hist)
}

pub fn m2_norm<T: Real>(a: &SegmentView<'_, T>) -> T {
    m2_inner(a, a).expect("segment compatible with itself").sqrt()
}

/// Trajectory on the grid over `[s - r, T]` (`s = 0` for a fresh solve).
#[derive(Clone, Debug, PartialEq)]
pub struct Path<T> {
    grid: Grid<T>,
    d: usize,
    start: usize,
    values: Vec<T>,
}

impl<T: Real> Path<T> {
    /// Path starting at step `start` whose first window is `initial`.
    pub fn with_initial(grid: Grid<T>, start: usize, initial: &SegmentView<'_, T>) -> Result<Self> {
        if initial.n_r != grid.n_delay() || (initial.h - grid.step()).abs() > grid.step() * T::lit(GRID_TOL) {
            return Err(Error::GridMismatch(format!(
                "initial segment (n_r={}, h={}) does not match grid (n_r={}, h={})",
                initial.n_r,
                initial.h,
                grid.n_delay(),
                grid.step()
            )));
        }
        if start > grid.n_steps() {
            return Err(Error::InvalidGrid(format!("start step {start} beyond horizon")));
        }
        let d = initial.d;
        let len = grid.n_delay() + grid.n_steps() - start + 1;
        let mut values = vec![T::zero(); len * d];
        values[..initial.data.len()].copy_from_slice(initial.data);
        Ok(Self { grid, d, start, values })
    }

    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }
    pub fn dim(&self) -> usize {
        self.d
    }
    /// First step covered by the path (the restart time index).
    pub fn start(&self) -> usize {
        self.start
    }
    pub fn values(&self) -> &[T] {
        &self.values
    }
    /// Number of stored points.
    pub fn len(&self) -> usize {
        self.values.len() / self.d
    }
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    #[inline]
    fn offset(&self, k: usize) -> usize {
        debug_assert!(k >= self.start && k <= self.grid.n_steps());
        (k - self.start + self.grid.n_delay()) * self.d
    }

    /// Value at step `k` (time `k·h`).
    #[inline]
    pub fn at(&self, k: usize) -> &[T] {
        let o = self.offset(k);
        &self.values[o..o + self.d]
    }
    #[inline]
    pub(crate) fn at_mut(&mut self, k: usize) -> &mut [T] {
        let o = self.offset(k);
        let d = self.d;
        &mut self.values[o..o + d]
    }

    /// Value at grid time `t ∈ [start·h - r, T]`.
    pub fn value_at(&self, t: T) -> Result<&[T]> {
        let hf = self.grid.step().as_f64();
        let idx = t.as_f64() / hf + (self.grid.n_delay() as f64) - self.start as f64;
        let i = idx.round();
        if !(i >= 0.0) || (idx - i).abs() > GRID_TOL * i.max(1.0) || i as usize >= self.len() {
            return Err(Error::OffGrid { u: t.as_f64(), h: hf, r: self.grid.delay().as_f64() });
        }
        let i = i as usize;
        Ok(&self.values[i * self.d..(i + 1) * self.d])
    }

    /// Segment `x_{t_k}` as a view into the path.
    #[inline]
    pub fn segment(&self, k: usize) -> SegmentView<'_, T> {
        let n_r = self.grid.n_delay();
        let lo = (k - self.start) * self.d;
        SegmentView { data: &self.values[lo..lo + (n_r + 1) * self.d], d: self.d, n_r, h: self.grid.step() }
    }

    /// Overwrite the window ending at step `k` with `seg`.
    pub fn write_segment(&mut self, k: usize, seg: &SegmentView<'_, T>) -> Result<()> {
        if seg.d != self.d || seg.n_r != self.grid.n_delay() || k < self.start || k > self.grid.n_steps() {
            return Err(Error::GridMismatch("segment does not fit the path at this step".into()));
        }
        let lo = (k - self.start) * self.d;
        self.values[lo..lo + seg.data.len()].copy_from_slice(seg.data);
        Ok(())
    }

    /// Component `i` of the path as a plain vector over all stored points.
    pub fn component(&self, i: usize) -> Vec<T> {
        self.values.iter().skip(i).step_by(self.d).copied().collect()
    }
}

/// `segment_of_path(path, t)`: owned copy of `x_t` for a grid time `t`.
pub fn segment_of_path<T: Real>(path: &Path<T>, t: T) -> Result<Segment<T>> {
    let k = path.grid.step_index(t)?;
    if k < path.start {
        return Err(Error::OffGrid { u: t.as_f64(), h: path.grid.step().as_f64(), r: path.grid.delay().as_f64() });
    }
    Ok(path.segment(k).to_owned())
}

/// Families of unit directions used to probe the delta functional.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DirectionKind {
    /// Point direction `(e_i, 0)` plus one normalized single-bin indicator per history slot.
    GridBasis,
    /// Point, constant and linear-ramp directions per dimension.
    Canonical,
    /// Point direction plus constant, cosine and sine history modes.
    Fourier { modes: usize },
}

/// A named unit direction `ψ ∈ M₂`.
#[derive(Clone, Debug)]
pub struct Direction<T> {
    pub id: String,
    pub segment: Segment<T>,
}

fn unit<T: Real>(d: usize, i: usize) -> Vec<T> {
    let mut e = vec![T::zero(); d];
    e[i] = T::one();
    e
}

/// Unit-norm directions on the segment shape `(d, n_r, h)`.
pub fn direction_dictionary<T: Real>(kind: DirectionKind, d: usize, n_r: usize, h: T) -> Vec<Direction<T>> {
    let suffix = |i: usize| if d == 1 { String::new() } else { format!("_{i}") };
    let mut out = Vec::new();
    let point = |i: usize| {
        let mut s = Segment::zeros(d, n_r, h);
        s.v_mut()[i] = T::one();
        s
    };
    let history = |i: usize, f: &dyn Fn(usize) -> T, v: T| {
        let mut s = Segment::zeros(d, n_r, h);
        for k in 0..n_r {
            s.phi_mut(k)[i] = f(k);
        }
        s.v_mut()[i] = v;
        s.normalized()
    };
    match kind {
        DirectionKind::GridBasis => {
            for i in 0..d {
                out.push(Direction { id: format!("point{}", suffix(i)), segment: point(i) });
            }
            for k in 0..n_r {
                for i in 0..d {
                    let mut s = Segment::zeros(d, n_r, h);
                    s.phi_mut(k).copy_from_slice(&unit::<T>(d, i));
                    out.push(Direction { id: format!("bin{k}{}", suffix(i)), segment: s.normalized() });
                }
            }
        }
        DirectionKind::Canonical => {
            for i in 0..d {
                out.push(Direction { id: format!("point{}", suffix(i)), segment: point(i) });
                if n_r > 0 {
                    out.push(Direction { id: format!("constant{}", suffix(i)), segment: history(i, &|_| T::one(), T::one()) });
                    let nr = T::from_usize_lossy(n_r);
                    out.push(Direction {
                        id: format!("ramp{}", suffix(i)),
                        segment: history(i, &|k| T::from_usize_lossy(k) / nr, T::one()),
                    });
                }
            }
        }
        DirectionKind::Fourier { modes } => {
            let nr = T::from_usize_lossy(n_r.max(1));
            let two_pi = T::PI() + T::PI();
            for i in 0..d {
                out.push(Direction { id: format!("point{}", suffix(i)), segment: point(i) });
                if n_r == 0 {
                    continue;
                }
                out.push(Direction { id: format!("mode0{}", suffix(i)), segment: history(i, &|_| T::one(), T::zero()) });
                for m in 1..=modes {
                    let w = two_pi * T::from_usize_lossy(m) / nr;
                    out.push(Direction {
                        id: format!("cos{m}{}", suffix(i)),
                        segment: history(i, &|k| (w * T::from_usize_lossy(k)).cos(), T::zero()),
                    });
                    out.push(Direction {
                        id: format!("sin{m}{}", suffix(i)),
                        segment: history(i, &|k| (w * T::from_usize_lossy(k)).sin(), T::zero()),
                    });
                }
            }
        }
    }
    out
}

/// Checks pairwise orthonormality of a direction family within `tol`.
pub fn check_orthonormal<T: Real>(dirs: &[Direction<T>], tol: f64) -> Result<()> {
    for (a, da) in dirs.iter().enumerate() {
        for db in dirs.iter().skip(a) {
            let ip = m2_inner(&da.segment.view(), &db.segment.view())?.as_f64();
            let target = if std::ptr::eq(da, db) { 1.0 } else { 0.0 };
            if (ip - target).abs() > tol {
                return Err(Error::NotOrthonormal(format!("<{}, {}> = {ip}", da.id, db.id)));
            }
        }
    }
    Ok(())
}

/// Named closed forms for scalar initial segments.
#[derive(Clone, Debug, PartialEq)]
pub enum InitialShape {
    /// `η(u) = c`.
    Constant(f64),
    /// `η(u) = at_zero + slope·u`.
    Linear { at_zero: f64, slope: f64 },
    /// `η(u) = level + amplitude·sin(2π·frequency·u)`.
    Sine { level: f64, amplitude: f64, frequency: f64 },
}

impl InitialShape {
    pub fn eval(&self, u: f64) -> f64 {
        match *self {
            InitialShape::Constant(c) => c,
            InitialShape::Linear { at_zero, slope } => at_zero + slope * u,
            InitialShape::Sine { level, amplitude, frequency } => {
                level + amplitude * (2.0 * std::f64::consts::PI * frequency * u).sin()
            }
        }
    }

    pub fn sample<T: Real>(&self, grid: &Grid<T>) -> Segment<T> {
        Segment::scalar_fn(grid, |u| T::lit(self.eval(u.as_f64())))
    }
}

/// Parses a whitespace-separated table `time value_1 … value_d` covering
/// `{-r, …, 0}` on the grid. Blank lines and `#` comments are skipped.
pub fn parse_segment_table<T: Real>(text: &str, d: usize, grid: &Grid<T>) -> Result<Segment<T>> {
    let n_r = grid.n_delay();
    let hf = grid.step().as_f64();
    let mut data = Vec::with_capacity((n_r + 1) * d);
    let mut row = 0usize;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let cols: Vec<f64> = line
            .split_whitespace()
            .map(|c| c.parse::<f64>().map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1))))
            .collect::<Result<_>>()?;
        if cols.len() != d + 1 {
            return Err(Error::Parse(format!("line {}: expected {} columns, found {}", lineno + 1, d + 1, cols.len())));
        }
        if row > n_r {
            return Err(Error::Parse(format!("line {}: more rows than grid points on [-r, 0]", lineno + 1)));
        }
        let expected = -((n_r - row) as f64) * hf;
        if (cols[0] - expected).abs() > GRID_TOL.max(1e-9 * hf) + 1e-9 * hf {
            return Err(Error::Parse(format!("line {}: time {} is not grid point {expected}", lineno + 1, cols[0])));
        }
        data.extend(cols[1..].iter().map(|&x| T::lit(x)));
        row += 1;
    }
    if row != n_r + 1 {
        return Err(Error::Parse(format!("expected {} rows covering [-r, 0], found {row}", n_r + 1)));
    }
    Ok(Segment::from_raw(data, d, n_r, grid.step()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid(r: f64, t: f64, h: f64) -> Grid<f64> {
        Grid::new(r, t, h).unwrap()
    }

    #[test]
    fn grid_rejects_non_dividing_step() {
        assert!(Grid::<f64>::new(0.5, 1.0, 0.3).is_err());
        assert!(Grid::<f64>::new(0.5, 1.0, 0.0).is_err());
        let g = grid(0.5, 1.0, 1.0 / 256.0);
        assert_eq!((g.n_delay(), g.n_steps()), (128, 256));
    }

    #[test]
    fn point_mass_inner_product() {
        let g = grid(1.0, 1.0, 0.125);
        let mut a = Segment::zeros(1, g.n_delay(), g.step());
        a.v_mut()[0] = 1.0;
        assert_eq!(m2_inner(&a.view(), &a.view()).unwrap(), 1.0);
    }

    #[test]
    fn constant_segment_norm() {
        let g = grid(1.0, 1.0, 1.0 / 64.0);
        let c = 3.0;
        let a = Segment::scalar_fn(&g, |_| c);
        let want = (c * c + c * c * 64.0 * g.step()).sqrt();
        assert!((m2_norm(&a.view()) - want).abs() < 1e-12);
        assert!((want - c * 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn ramp_norm_converges_at_first_order() {
        // ∫_{-1}^0 u² du = 1/3; left Riemann sum overshoots by ~h/2.
        let mut prev_err = f64::INFINITY;
        for p in [6, 8, 10] {
            let h = 2f64.powi(-p);
            let g = grid(1.0, 1.0, h);
            let mut a = Segment::scalar_fn(&g, |u| u);
            a.v_mut()[0] = 0.0;
            let err = (m2_inner(&a.view(), &a.view()).unwrap() - 1.0 / 3.0).abs();
            assert!(err < 2.0 * h, "h={h} err={err}");
            assert!(err < prev_err);
            prev_err = err;
        }
    }

    #[test]
    fn mismatched_grids_are_rejected() {
        let a = Segment::<f64>::zeros(1, 4, 0.25);
        let b = Segment::<f64>::zeros(1, 8, 0.125);
        assert!(matches!(m2_inner(&a.view(), &b.view()), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn rho_evaluation() {
        let g = grid(1.0, 1.0, 0.25);
        let mut s = Segment::from_fn(&g, 1, |u| vec![(u / 0.25) + 4.0]);
        s.v_mut()[0] = 5.0;
        assert_eq!(s.rho(0.0).unwrap(), &[5.0]);
        assert_eq!(s.rho(-1.0).unwrap(), &[0.0]);
        assert_eq!(s.rho(-0.5).unwrap(), &[2.0]);
        assert!(matches!(s.rho(-0.25 / 3.0), Err(Error::OffGrid { .. })));
        assert!(s.rho(-1.25).is_err());
        assert!(s.rho(0.1).is_err());
    }

    #[test]
    fn segment_of_path_indexing() {
        let g = grid(0.5, 1.0, 0.125);
        let eta = Segment::scalar_fn(&g, |u| u);
        let mut path = Path::with_initial(g, 0, &eta.view()).unwrap();
        for k in 1..=g.n_steps() {
            path.at_mut(k)[0] = g.time(k);
        }
        // x_0 = η
        assert_eq!(segment_of_path(&path, 0.0).unwrap(), eta);
        let seg = segment_of_path(&path, 1.0).unwrap();
        assert_eq!(seg.v(), &[1.0]);
        // naive second indexer: value at time T - r + k h
        for k in 0..g.n_delay() {
            let t = 1.0 - 0.5 + k as f64 * 0.125;
            assert_eq!(seg.phi(k)[0], t);
            assert_eq!(path.value_at(t).unwrap()[0], t);
        }
        assert!(segment_of_path(&path, 0.3).is_err());
    }

    #[test]
    fn constant_path_gives_constant_segment() {
        let g = grid(0.5, 1.0, 0.125);
        let eta = Segment::scalar_fn(&g, |_| 7.0);
        let mut path = Path::with_initial(g, 0, &eta.view()).unwrap();
        for k in 1..=g.n_steps() {
            path.at_mut(k)[0] = 7.0;
        }
        let seg = segment_of_path(&path, 0.625).unwrap();
        assert!(seg.data().iter().all(|&x| x == 7.0));
    }

    #[test]
    fn write_then_read_segment_round_trips() {
        let g = grid(0.5, 1.0, 0.125);
        let eta = Segment::scalar_fn(&g, |_| 0.0);
        let mut path = Path::with_initial(g, 0, &eta.view()).unwrap();
        let s = Segment::scalar_fn(&g, |u| u.sin() + 2.0);
        path.write_segment(5, &s.view()).unwrap();
        assert_eq!(path.segment(5).to_owned(), s);
    }

    #[test]
    fn grid_basis_is_orthonormal() {
        let dirs = direction_dictionary::<f64>(DirectionKind::GridBasis, 1, 4, 0.25);
        assert_eq!(dirs.len(), 5);
        check_orthonormal(&dirs, 1e-12).unwrap();
    }

    #[test]
    fn dictionaries_are_unit_norm() {
        for kind in [DirectionKind::GridBasis, DirectionKind::Canonical, DirectionKind::Fourier { modes: 3 }] {
            for d in [1, 2] {
                for dir in direction_dictionary::<f64>(kind, d, 16, 1.0 / 32.0) {
                    assert!((m2_norm(&dir.segment.view()) - 1.0).abs() < 1e-12, "{kind:?} {}", dir.id);
                }
            }
        }
        check_orthonormal(&direction_dictionary::<f64>(DirectionKind::Fourier { modes: 3 }, 1, 16, 1.0 / 32.0), 1e-12)
            .unwrap();
    }

    #[test]
    fn canonical_constant_direction_scaling() {
        let h = 1.0 / 1024.0;
        let dirs = direction_dictionary::<f64>(DirectionKind::Canonical, 1, 1024, h);
        let c = &dirs[1];
        assert_eq!(c.id, "constant");
        // unnormalized (1, 1≡) has norm sqrt(1 + n_r h) = sqrt(2)
        let scale = 1.0 / 2f64.sqrt();
        assert!((c.segment.v()[0] - scale).abs() < 1e-12);
        assert!((c.segment.phi(17)[0] - scale).abs() < 1e-12);
    }

    #[test]
    fn segment_table_parsing() {
        let g = grid(0.5, 1.0, 0.25);
        let text = "# t value\n-0.5 1.0\n-0.25 2.0\n\n0.0 3.0\n";
        let s = parse_segment_table::<f64>(text, 1, &g).unwrap();
        assert_eq!(s.data(), &[1.0, 2.0, 3.0]);
        assert!(parse_segment_table::<f64>("-0.5 1\n-0.3 2\n0 3\n", 1, &g).is_err());
        assert!(parse_segment_table::<f64>("-0.5 1\n0 3\n", 1, &g).is_err());
    }

    #[test]
    fn closed_form_shapes() {
        let g = grid(1.0, 1.0, 0.5);
        let s = InitialShape::Linear { at_zero: 2.0, slope: 1.0 }.sample(&g);
        assert_eq!(s.data(), &[1.0, 1.5, 2.0]);
        let s = InitialShape::Sine { level: 1.0, amplitude: 1.0, frequency: 0.25 }.sample(&g);
        assert!((s.rho(-1.0).unwrap()[0] - 0.0).abs() < 1e-12);
    }

    #[test]
    fn works_in_single_precision() {
        let g = Grid::<f32>::new(0.5, 1.0, 0.125).unwrap();
        let a = Segment::scalar_fn(&g, |_| 2.0f32);
        assert!((m2_norm(&a.view()) - (4.0f32 + 4.0 * 0.5).sqrt()).abs() < 1e-6);
    }

    fn arb_segment(n_r: usize) -> impl Strategy<Value = Segment<f64>> {
        proptest::collection::vec(-10.0f64..10.0, n_r + 1)
            .prop_map(move |v| Segment::from_raw(v, 1, n_r, 1.0 / n_r as f64))
    }

    proptest! {
        #[test]
        fn inner_product_is_bilinear_symmetric(a in arb_segment(8), b in arb_segment(8), c in arb_segment(8),
                                               s in -3.0f64..3.0, t in -3.0f64..3.0) {
            let ab = m2_inner(&a.view(), &b.view()).unwrap();
            let ba = m2_inner(&b.view(), &a.view()).unwrap();
            prop_assert!((ab - ba).abs() < 1e-12 * (1.0 + ab.abs()));
            let comb = a.scaled(s).add_scaled(&b, t).unwrap();
            let lhs = m2_inner(&comb.view(), &c.view()).unwrap();
            let rhs = s * m2_inner(&a.view(), &c.view()).unwrap() + t * m2_inner(&b.view(), &c.view()).unwrap();
            prop_assert!((lhs - rhs).abs() < 1e-9 * (1.0 + lhs.abs()));
            prop_assert!(ab.abs() <= m2_norm(&a.view()) * m2_norm(&b.view()) * (1.0 + 1e-12));
        }

        #[test]
        fn rho_zero_projects_onto_v(a in arb_segment(8)) {
            prop_assert_eq!(a.rho(0.0).unwrap(), a.v());
        }
    }
}
