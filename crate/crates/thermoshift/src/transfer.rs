//! Transfer operators for the Gauss map on a Chebyshev-Lobatto grid.
//!
//! (Lf)(t) = sum over digits d of mult(d) (d+t)^-2 f(1/(d+t)), the digit
//! range and the treatment of the infinite tail being configurable. Iterates
//! of analytic functions stay analytic, so barycentric interpolation on a
//! modest grid carries them with near machine precision; the growth-rate
//! certificates below come from Collatz-Wielandt ratio sweeps, not from an
//! eigensolver.

use std::f64::consts::PI;

use crate::error::{Error, Result};

const LN2: f64 = std::f64::consts::LN_2;

/// Chebyshev-Lobatto grid on [0, 1], nodes decreasing from 1 to 0, with
/// barycentric interpolation weights and Clenshaw-Curtis quadrature.
#[derive(Debug, Clone)]
pub struct ChebGrid {
    degree: usize,
    nodes: Vec<f64>,
    bary: Vec<f64>,
    quad: Vec<f64>,
}

impl ChebGrid {
    pub fn new(degree: usize) -> Result<Self> {
        if degree < 2 {
            return Err(Error::InvalidInput("grid degree must be at least 2".into()));
        }
        let n = degree;
        let nodes: Vec<f64> = (0..=n)
            .map(|j| 0.5 * (1.0 + (PI * j as f64 / n as f64).cos()))
            .collect();
        let bary: Vec<f64> = (0..=n)
            .map(|j| {
                let w = if j % 2 == 0 { 1.0 } else { -1.0 };
                if j == 0 || j == n {
                    0.5 * w
                } else {
                    w
                }
            })
            .collect();
        // Clenshaw-Curtis weights for the Lobatto angles, scaled to [0, 1].
        let mut quad = vec![0.0; n + 1];
        for (j, q) in quad.iter_mut().enumerate() {
            let theta = PI * j as f64 / n as f64;
            let mut s = 1.0;
            for k in 1..=(n / 2) {
                let b = if 2 * k == n { 1.0 } else { 2.0 };
                s -= b / ((4 * k * k - 1) as f64) * (2.0 * k as f64 * theta).cos();
            }
            let c = if j == 0 || j == n { 1.0 } else { 2.0 };
            *q = 0.5 * c * s / n as f64;
        }
        Ok(ChebGrid {
            degree: n,
            nodes,
            bary,
            quad,
        })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn len(&self) -> usize {
        self.degree + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Barycentric evaluation of the interpolant through (nodes, values).
    pub fn eval(&self, values: &[f64], t: f64) -> f64 {
        debug_assert_eq!(values.len(), self.nodes.len());
        let mut num = 0.0;
        let mut den = 0.0;
        for j in 0..self.nodes.len() {
            let d = t - self.nodes[j];
            if d == 0.0 {
                return values[j];
            }
            let c = self.bary[j] / d;
            num += c * values[j];
            den += c;
        }
        num / den
    }

    /// Cardinal-function row: l_j(t) for all j, so dot(row, values) = eval.
    pub fn cardinal_row(&self, t: f64) -> Vec<f64> {
        let mut row = vec![0.0; self.nodes.len()];
        let mut den = 0.0;
        for j in 0..self.nodes.len() {
            let d = t - self.nodes[j];
            if d == 0.0 {
                row.iter_mut().for_each(|x| *x = 0.0);
                row[j] = 1.0;
                return row;
            }
            row[j] = self.bary[j] / d;
            den += row[j];
        }
        row.iter_mut().for_each(|x| *x /= den);
        row
    }

    /// Clenshaw-Curtis integral of the interpolant over [0, 1].
    pub fn integrate(&self, values: &[f64]) -> f64 {
        values.iter().zip(&self.quad).map(|(v, w)| v * w).sum()
    }

    /// (min, max) of the interpolant sampled on Chebyshev points of [a, b].
    fn extrema_on(&self, values: &[f64], a: f64, b: f64) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        let samples = 48;
        for i in 0..=samples {
            let x = a + (b - a) * 0.5 * (1.0 + (PI * i as f64 / samples as f64).cos());
            let v = self.eval(values, x);
            lo = lo.min(v);
            hi = hi.max(v);
        }
        (lo, hi)
    }
}

/// What happens to digits beyond the truncation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TailMode {
    /// Digits 1..=m only: the operator of the truncated system.
    None,
    /// One-sided lump from below: tail kernel sum replaced by its integral
    /// lower bound 1/(m+1+t) times the iterate's minimum near 0.
    LumpedLower,
    /// One-sided lump from above: 1/(m+t) times the iterate's maximum near 0.
    LumpedUpper,
    /// The given number of extra digits summed explicitly, then the exact
    /// trigamma remainder at a representative point. Accurate rather than
    /// one-sided; stays linear in f, so it collocates.
    Extended(usize),
}

/// Node values of the starting function for operator iterations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitFunction {
    One,
    /// The Gauss density 1/((1+t) ln 2), the exact fixed function of the
    /// untruncated operator.
    GaussDensity,
}

impl InitFunction {
    pub fn values(&self, grid: &ChebGrid) -> Vec<f64> {
        match self {
            InitFunction::One => vec![1.0; grid.len()],
            InitFunction::GaussDensity => grid
                .nodes()
                .iter()
                .map(|&t| 1.0 / ((1.0 + t) * LN2))
                .collect(),
        }
    }
}

/// psi_1(z) = sum_{j >= 0} (z + j)^-2, asymptotic form for large z.
fn trigamma(z: f64) -> f64 {
    let zi = 1.0 / z;
    let z2 = zi * zi;
    zi + 0.5 * z2 + z2 * zi / 6.0 - z2 * z2 * zi / 30.0 + z2 * z2 * z2 * zi / 42.0
}

/// A Gauss-map transfer operator with per-digit multipliers (for tilting by
/// digit indicators) and a tail treatment.
#[derive(Debug, Clone)]
pub struct GaussOperator<'g> {
    grid: &'g ChebGrid,
    m: usize,
    tail: TailMode,
    multipliers: Vec<(u64, f64)>,
}

impl<'g> GaussOperator<'g> {
    pub fn new(grid: &'g ChebGrid, m: usize, tail: TailMode) -> Result<Self> {
        if m < 1 {
            return Err(Error::InvalidInput(
                "digit truncation must be at least 1".into(),
            ));
        }
        Ok(GaussOperator {
            grid,
            m,
            tail,
            multipliers: Vec::new(),
        })
    }

    /// Multiply the branch of the given digit by a positive factor
    /// (composing with any factor already present).
    pub fn multiply_digit(mut self, digit: u64, factor: f64) -> Result<Self> {
        if digit < 1 || digit > self.m as u64 {
            return Err(Error::InvalidInput(format!(
                "digit {} outside truncation 1..={}",
                digit, self.m
            )));
        }
        if !(factor > 0.0) || !factor.is_finite() {
            return Err(Error::InvalidInput(
                "multiplier must be positive and finite".into(),
            ));
        }
        if let Some(e) = self.multipliers.iter_mut().find(|(d, _)| *d == digit) {
            e.1 *= factor;
        } else {
            self.multipliers.push((digit, factor));
        }
        Ok(self)
    }

    fn mult_of(&self, d: u64) -> f64 {
        self.multipliers
            .iter()
            .find(|(dd, _)| *dd == d)
            .map(|(_, f)| *f)
            .unwrap_or(1.0)
    }

    fn tail_extrema(&self, f: &[f64]) -> (f64, f64) {
        match self.tail {
            TailMode::LumpedLower | TailMode::LumpedUpper => {
                self.grid.extrema_on(f, 0.0, 1.0 / self.m as f64)
            }
            _ => (0.0, 0.0),
        }
    }

    /// (Lf)(t) for one point, given precomputed tail extrema of f.
    fn apply_at(&self, f: &[f64], fmin: f64, fmax: f64, t: f64) -> f64 {
        let mut acc = 0.0;
        for d in 1..=self.m as u64 {
            let dt = d as f64 + t;
            acc += self.mult_of(d) * self.grid.eval(f, 1.0 / dt) / (dt * dt);
        }
        match self.tail {
            TailMode::None => {}
            TailMode::LumpedLower => acc += fmin / (self.m as f64 + 1.0 + t),
            TailMode::LumpedUpper => acc += fmax / (self.m as f64 + t),
            TailMode::Extended(extra) => {
                for d in (self.m + 1)..=(self.m + extra) {
                    let dt = d as f64 + t;
                    acc += self.grid.eval(f, 1.0 / dt) / (dt * dt);
                }
                let z = (self.m + extra) as f64 + 1.0 + t;
                acc += trigamma(z) * self.grid.eval(f, 1.0 / z);
            }
        }
        acc
    }

    /// Node values of Lf from node values of f.
    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        let (fmin, fmax) = self.tail_extrema(f);
        self.grid
            .nodes()
            .iter()
            .map(|&t| self.apply_at(f, fmin, fmax, t))
            .collect()
    }

    /// Collocation matrix C with (Lf)(x_i) = sum_j C[i,j] f(x_j). Only the
    /// linear tail modes collocate; the lumped ones take min/max of f.
    pub fn collocation(&self) -> Result<Vec<f64>> {
        if matches!(self.tail, TailMode::LumpedLower | TailMode::LumpedUpper) {
            return Err(Error::InvalidInput(
                "lumped tails are not linear in f; use apply or an extended tail".into(),
            ));
        }
        let k = self.grid.len();
        let mut c = vec![0.0; k * k];
        for (i, &t) in self.grid.nodes().iter().enumerate() {
            let row = &mut c[i * k..(i + 1) * k];
            let mut add = |point: f64, weight: f64| {
                let cr = self.grid.cardinal_row(point);
                for (r, l) in row.iter_mut().zip(&cr) {
                    *r += weight * l;
                }
            };
            for d in 1..=self.m as u64 {
                let dt = d as f64 + t;
                add(1.0 / dt, self.mult_of(d) / (dt * dt));
            }
            if let TailMode::Extended(extra) = self.tail {
                for d in (self.m + 1)..=(self.m + extra) {
                    let dt = d as f64 + t;
                    add(1.0 / dt, 1.0 / (dt * dt));
                }
                let z = (self.m + extra) as f64 + 1.0 + t;
                add(1.0 / z, trigamma(z));
            }
        }
        Ok(c)
    }
}

/// Matrix-vector product for row-major square matrices.
pub fn matvec(n: usize, m: &[f64], v: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; n];
    for i in 0..n {
        let row = &m[i * n..(i + 1) * n];
        out[i] = row.iter().zip(v).map(|(a, b)| a * b).sum();
    }
    out
}

pub fn matmul(n: usize, a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for k in 0..n {
            let aik = a[i * n + k];
            if aik == 0.0 {
                continue;
            }
            for j in 0..n {
                out[i * n + j] += aik * b[k * n + j];
            }
        }
    }
    out
}

/// Trace of the n-th matrix power.
pub fn trace_power(size: usize, m: &[f64], n: usize) -> f64 {
    assert!(n >= 1);
    let mut p = m.to_vec();
    for _ in 1..n {
        p = matmul(size, &p, m);
    }
    (0..size).map(|i| p[i * size + i]).sum()
}

/// A certified enclosure of the logarithmic growth rate of an operator
/// family, from Collatz-Wielandt ratio sweeps.
#[derive(Debug, Clone, Copy)]
pub struct GrowthBracket {
    pub log_lo: f64,
    pub log_hi: f64,
    pub iterations: usize,
}

impl GrowthBracket {
    pub fn width(&self) -> f64 {
        self.log_hi - self.log_lo
    }

    pub fn mid(&self) -> f64 {
        0.5 * (self.log_lo + self.log_hi)
    }
}

/// Iterate the operator from 1 and sweep (Lf)/f over a dense sample,
/// returning (inf ratio, sup ratio). Both are genuine bounds on the leading
/// eigenvalue of this operator up to the sampling of a smooth ratio.
fn cw_extremes(op: &GaussOperator<'_>, iters: usize) -> Result<(f64, f64)> {
    let mut f = vec![1.0; op.grid.len()];
    for _ in 0..iters {
        let g = op.apply(&f);
        let mx = g.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if !mx.is_finite() || mx <= 0.0 {
            return Err(Error::DivergedInterpolation {
                spread: f64::INFINITY,
                tolerance: 0.0,
            });
        }
        f = g.iter().map(|x| x / mx).collect();
        if f.iter().any(|x| !(*x > 0.0)) {
            return Err(Error::DivergedInterpolation {
                spread: f64::INFINITY,
                tolerance: 0.0,
            });
        }
    }
    let (fmin, fmax) = op.tail_extrema(&f);
    let samples = 1024;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..=samples {
        let t = i as f64 / samples as f64;
        let ft = op.grid.eval(&f, t);
        if !(ft > 0.0) {
            return Err(Error::DivergedInterpolation {
                spread: f64::INFINITY,
                tolerance: 0.0,
            });
        }
        let r = op.apply_at(&f, fmin, fmax, t) / ft;
        lo = lo.min(r);
        hi = hi.max(r);
    }
    Ok((lo, hi))
}

/// Growth bracket for the truncated operator (digits 1..=m, no tail).
pub fn growth_bracket_truncated(
    grid: &ChebGrid,
    m: usize,
    multipliers: &[(u64, f64)],
    iters: usize,
    tolerance: f64,
) -> Result<GrowthBracket> {
    let mut op = GaussOperator::new(grid, m, TailMode::None)?;
    for &(d, f) in multipliers {
        op = op.multiply_digit(d, f)?;
    }
    let (rlo, rhi) = cw_extremes(&op, iters)?;
    let bracket = GrowthBracket {
        log_lo: rlo.ln(),
        log_hi: rhi.ln(),
        iterations: iters,
    };
    if bracket.width() > tolerance {
        return Err(Error::DivergedInterpolation {
            spread: bracket.width(),
            tolerance,
        });
    }
    Ok(bracket)
}

/// Growth bracket for the full (countable-alphabet) operator: the tail is
/// lumped from below for the lower certificate and from above for the upper
/// one, so the true growth rate sits between the two sweeps.
pub fn growth_bracket_full(
    grid: &ChebGrid,
    m: usize,
    multipliers: &[(u64, f64)],
    iters: usize,
    tolerance: f64,
) -> Result<GrowthBracket> {
    let mut lower = GaussOperator::new(grid, m, TailMode::LumpedLower)?;
    let mut upper = GaussOperator::new(grid, m, TailMode::LumpedUpper)?;
    for &(d, f) in multipliers {
        lower = lower.multiply_digit(d, f)?;
        upper = upper.multiply_digit(d, f)?;
    }
    let (rlo, _) = cw_extremes(&lower, iters)?;
    let (_, rhi) = cw_extremes(&upper, iters)?;
    let bracket = GrowthBracket {
        log_lo: rlo.ln(),
        log_hi: rhi.ln(),
        iterations: iters,
    };
    if bracket.width() > tolerance {
        return Err(Error::DivergedInterpolation {
            spread: bracket.width(),
            tolerance,
        });
    }
    Ok(bracket)
}

/// Growth bracket for the countable-alphabet operator realized with an
/// explicit extended tail: digits m+1..=m+extra kept exactly, then the
/// polygamma remainder. Unlike the lumped pair this is one operator, so
/// the envelope tightens toward machine precision with iterations. The
/// remainder's asymptotic-series error (far below 1e-12 once m + extra
/// exceeds a couple hundred) is not certified by the sweep.
pub fn growth_bracket_extended(
    grid: &ChebGrid,
    m: usize,
    extra: usize,
    multipliers: &[(u64, f64)],
    iters: usize,
    tolerance: f64,
) -> Result<GrowthBracket> {
    let mut op = GaussOperator::new(grid, m, TailMode::Extended(extra))?;
    for &(d, f) in multipliers {
        op = op.multiply_digit(d, f)?;
    }
    let (rlo, rhi) = cw_extremes(&op, iters)?;
    let bracket = GrowthBracket {
        log_lo: rlo.ln(),
        log_hi: rhi.ln(),
        iterations: iters,
    };
    if bracket.width() > tolerance {
        return Err(Error::DivergedInterpolation {
            spread: bracket.width(),
            tolerance,
        });
    }
    Ok(bracket)
}

/// Count-marked operator power: class vector f_m after n applications,
/// where applying a marked-digit branch bumps the class index. Class m at
/// step n collects exactly the length-n digit words using the marked digit
/// m times. Tail digits are never the marked one, so they stay in class.
pub fn marked_power(
    grid: &ChebGrid,
    m: usize,
    marked_digit: u64,
    n: usize,
    init: InitFunction,
    tail: TailMode,
) -> Result<Vec<Vec<f64>>> {
    if marked_digit < 1 || marked_digit > m as u64 {
        return Err(Error::InvalidInput(format!(
            "marked digit {} outside truncation 1..={}",
            marked_digit, m
        )));
    }
    let k = grid.len();
    let c_all = GaussOperator::new(grid, m, tail)?.collocation()?;
    // The marked branch alone: kernel of a single digit.
    let mut c_marked = vec![0.0; k * k];
    for (i, &t) in grid.nodes().iter().enumerate() {
        let dt = marked_digit as f64 + t;
        let row = grid.cardinal_row(1.0 / dt);
        for j in 0..k {
            c_marked[i * k + j] = row[j] / (dt * dt);
        }
    }
    let c_unmarked: Vec<f64> = c_all.iter().zip(&c_marked).map(|(a, b)| a - b).collect();
    let mut classes = vec![vec![0.0; k]; n + 1];
    classes[0] = init.values(grid);
    for _ in 0..n {
        let mut next = vec![vec![0.0; k]; n + 1];
        for mm in 0..=n {
            let mut v = matvec(k, &c_unmarked, &classes[mm]);
            if mm > 0 {
                let w = matvec(k, &c_marked, &classes[mm - 1]);
                for (a, b) in v.iter_mut().zip(&w) {
                    *a += b;
                }
            }
            next[mm] = v;
        }
        classes = next;
    }
    Ok(classes)
}

/// Class traces of the count-marked operator power. Entry m approximates
/// the sum of periodic-point weights (q_n + x q_{n-1})^-2 over length-n
/// digit words that use the marked digit exactly m times, x the word's own
/// fixed point. The collocation trace carries Fredholm factors
/// 1/(1 - Phi_w'(x_w)) with |Phi_w'| <= 4^-n, so that part of the error is
/// O(4^-n) relative. The digit-1 branch maps onto [1/2, 1], touching the
/// domain boundary, and its collocation matrix picks up one spurious
/// eigenvalue of size ~3e-2 at degree 24 (shrinking only algebraically
/// with degree); it enters class traces as spurious^n, so traces are
/// contaminated at the 1e-3 level for n <= 3 and are clean for longer
/// words. Exact short-word sums should use enumeration instead.
pub fn marked_trace(
    grid: &ChebGrid,
    m: usize,
    marked_digit: u64,
    n: usize,
    tail: TailMode,
) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::InvalidInput("trace needs n >= 1".into()));
    }
    if marked_digit < 1 || marked_digit > m as u64 {
        return Err(Error::InvalidInput(format!(
            "marked digit {} outside truncation 1..={}",
            marked_digit, m
        )));
    }
    let k = grid.len();
    let c_all = GaussOperator::new(grid, m, tail)?.collocation()?;
    let mut c_marked = vec![0.0; k * k];
    for (i, &t) in grid.nodes().iter().enumerate() {
        let dt = marked_digit as f64 + t;
        let row = grid.cardinal_row(1.0 / dt);
        for j in 0..k {
            c_marked[i * k + j] = row[j] / (dt * dt);
        }
    }
    let c_unmarked: Vec<f64> = c_all.iter().zip(&c_marked).map(|(a, b)| a - b).collect();
    let mut eye = vec![0.0; k * k];
    for i in 0..k {
        eye[i * k + i] = 1.0;
    }
    let mut classes: Vec<Vec<f64>> = vec![vec![0.0; k * k]; n + 1];
    classes[0] = eye;
    for _ in 0..n {
        let mut next = vec![vec![0.0; k * k]; n + 1];
        for mm in 0..=n {
            let mut p = matmul(k, &c_unmarked, &classes[mm]);
            if mm > 0 {
                let q = matmul(k, &c_marked, &classes[mm - 1]);
                for (a, b) in p.iter_mut().zip(&q) {
                    *a += b;
                }
            }
            next[mm] = p;
        }
        classes = next;
    }
    Ok(classes
        .iter()
        .map(|c| (0..k).map(|i| c[i * k + i]).sum())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gauss::LogContinuants;

    #[test]
    fn quadrature_weights_small_case() {
        let g = ChebGrid::new(2).unwrap();
        // Degree-2 Clenshaw-Curtis on [0,1] is Simpson: 1/6, 2/3, 1/6.
        assert!((g.quad[0] - 1.0 / 6.0).abs() < 1e-15);
        assert!((g.quad[1] - 2.0 / 3.0).abs() < 1e-15);
        assert!((g.quad[2] - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn quadrature_integrates_smooth_functions() {
        let g = ChebGrid::new(8).unwrap();
        let cubes: Vec<f64> = g.nodes().iter().map(|t| t * t * t).collect();
        assert!((g.integrate(&cubes) - 0.25).abs() < 1e-14);

        let g = ChebGrid::new(32).unwrap();
        let inv: Vec<f64> = g.nodes().iter().map(|t| 1.0 / (1.0 + t)).collect();
        assert!((g.integrate(&inv) - LN2).abs() < 1e-14);

        let h = InitFunction::GaussDensity.values(&g);
        assert!((g.integrate(&h) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn barycentric_eval_hits_smooth_targets() {
        let g = ChebGrid::new(16).unwrap();
        let vals: Vec<f64> = g.nodes().iter().map(|t| (2.0 * t).cos()).collect();
        for i in 0..50 {
            let t = i as f64 / 49.0;
            assert!((g.eval(&vals, t) - (2.0 * t).cos()).abs() < 1e-12);
        }
        // Node hit returns the node value exactly.
        assert_eq!(g.eval(&vals, g.nodes()[3]), vals[3]);
        let row = g.cardinal_row(0.37);
        let dot: f64 = row.iter().zip(&vals).map(|(a, b)| a * b).sum();
        assert!((dot - g.eval(&vals, 0.37)).abs() < 1e-13);
    }

    #[test]
    fn gauss_density_is_fixed_by_the_full_operator() {
        let g = ChebGrid::new(64).unwrap();
        let op = GaussOperator::new(&g, 64, TailMode::Extended(512)).unwrap();
        let h = InitFunction::GaussDensity.values(&g);
        let lh = op.apply(&h);
        let err = h
            .iter()
            .zip(&lh)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        assert!(err < 1e-5, "invariance residual {}", err);
    }

    #[test]
    fn full_growth_bracket_encloses_zero() {
        let g = ChebGrid::new(64).unwrap();
        let b = growth_bracket_full(&g, 100, &[], 40, 0.01).unwrap();
        assert!(
            b.log_lo <= 0.0 && 0.0 <= b.log_hi,
            "bracket [{}, {}]",
            b.log_lo,
            b.log_hi
        );
        assert!(b.width() < 0.01);
    }

    #[test]
    fn truncated_growth_matches_perturbation_estimate() {
        let g = ChebGrid::new(64).unwrap();
        let b = growth_bracket_truncated(&g, 100, &[], 40, 1e-6).unwrap();
        // Removing digits > M costs the operator about the Gauss mass of
        // {a1 > M}: lambda ~ 1 - log2((M+2)/(M+1)).
        let est = (1.0 - (102.0f64 / 101.0).ln() / LN2).ln();
        assert!(b.width() < 1e-6);
        assert!((b.mid() - est).abs() < 1e-3, "mid {} vs {}", b.mid(), est);
    }

    #[test]
    fn collocation_agrees_with_apply() {
        let g = ChebGrid::new(24).unwrap();
        let op = GaussOperator::new(&g, 7, TailMode::None)
            .unwrap()
            .multiply_digit(2, 1.7)
            .unwrap();
        let c = op.collocation().unwrap();
        let f: Vec<f64> = g.nodes().iter().map(|t| 1.0 + t * t).collect();
        let via_matrix = matvec(g.len(), &c, &f);
        let direct = op.apply(&f);
        for (a, b) in via_matrix.iter().zip(&direct) {
            assert!((a - b).abs() < 1e-12);
        }
        let lumped = GaussOperator::new(&g, 7, TailMode::LumpedUpper).unwrap();
        assert!(lumped.collocation().is_err());
    }

    #[test]
    fn marked_power_matches_word_enumeration() {
        // Digits 1..3, length 4, marking digit 1: class m at node t must be
        // sum over words with m ones of (q + t q_prev)^-2.
        let g = ChebGrid::new(24).unwrap();
        let n = 4;
        let classes = marked_power(&g, 3, 1, n, InitFunction::One, TailMode::None).unwrap();
        let mut brute = vec![vec![0.0; g.len()]; n + 1];
        for i0 in 1..=3u64 {
            for i1 in 1..=3u64 {
                for i2 in 1..=3u64 {
                    for i3 in 1..=3u64 {
                        let word = [i0, i1, i2, i3];
                        let m = word.iter().filter(|&&d| d == 1).count();
                        let lc = LogContinuants::from_digits(&word);
                        for (j, &t) in g.nodes().iter().enumerate() {
                            brute[m][j] += (-2.0 * lc.log_q_shifted(t)).exp();
                        }
                    }
                }
            }
        }
        for m in 0..=n {
            for j in 0..g.len() {
                let a = classes[m][j];
                let b = brute[m][j];
                assert!(
                    (a - b).abs() < 1e-10 * (1.0 + b.abs()),
                    "class {} node {}: {} vs {}",
                    m,
                    j,
                    a,
                    b
                );
            }
        }
    }

    #[test]
    fn marked_classes_sum_to_unmarked_power() {
        let g = ChebGrid::new(16).unwrap();
        let n = 6;
        let classes =
            marked_power(&g, 5, 2, n, InitFunction::GaussDensity, TailMode::None).unwrap();
        let c = GaussOperator::new(&g, 5, TailMode::None)
            .unwrap()
            .collocation()
            .unwrap();
        let mut f = InitFunction::GaussDensity.values(&g);
        for _ in 0..n {
            f = matvec(g.len(), &c, &f);
        }
        for j in 0..g.len() {
            let total: f64 = (0..=n).map(|m| classes[m][j]).sum();
            assert!((total - f[j]).abs() < 1e-12 * (1.0 + f[j].abs()));
        }
    }

    #[test]
    fn marked_trace_matches_fixed_point_sums() {
        // Digits {1,2}, length 2, marking digit 1. The nuclear trace of a
        // branch is w/(1 - mult) with w = (q2 + x q1)^-2 at the word's own
        // fixed point x and mult = 1/(q2 + x q1)^2 for even length.
        let g = ChebGrid::new(24).unwrap();
        let t = marked_trace(&g, 2, 1, 2, TailMode::None).unwrap();
        let entry = |qx: f64| {
            let w = qx.powi(-2);
            w / (1.0 - w)
        };
        // (2,2): q2 + x q1 = 3 + 2 sqrt(2) - 2 + 2 = (1 + sqrt(2))^2.
        let c0 = entry(3.0 + 2.0 * 2.0f64.sqrt());
        // (1,2) and (2,1) share q2 + x q1 = 2 + sqrt(3).
        let c1 = 2.0 * entry(2.0 + 3.0f64.sqrt());
        // (1,1): q2 + x q1 = 2 + 1/phi = phi^2.
        let c2 = entry((3.0 + 5.0f64.sqrt()) / 2.0);
        assert!((t[0] - c0).abs() < 1e-12, "{} vs {}", t[0], c0);
        assert!((t[1] - c1).abs() < 1e-12, "{} vs {}", t[1], c1);
        // The pure digit-1 class at n = 2 sees the square of the spurious
        // boundary eigenvalue (~9e-4 at degree 24); see the doc comment.
        assert!((t[2] - c2).abs() < 2e-3, "{} vs {}", t[2], c2);
        assert!((t[2] - c2).abs() > 1e-5, "artifact gone; tighten this test");

        // Class sum equals the plain collocation trace.
        let c = GaussOperator::new(&g, 2, TailMode::None)
            .unwrap()
            .collocation()
            .unwrap();
        let total: f64 = t.iter().sum();
        assert!((total - trace_power(g.len(), &c, 2)).abs() < 1e-12);
    }

    #[test]
    fn marked_trace_approximates_periodic_sums_at_moderate_length() {
        // At n = 12 the Fredholm factors are within 4^-12 of 1, so class
        // traces match naive periodic sums to ~1e-7 relative.
        let g = ChebGrid::new(24).unwrap();
        let n = 12;
        let t = marked_trace(&g, 2, 1, n, TailMode::None).unwrap();
        let mut brute = vec![0.0; n + 1];
        for code in 0..(1u32 << n) {
            let word: Vec<u64> = (0..n).map(|i| 1 + ((code >> i) & 1) as u64).collect();
            let m = word.iter().filter(|&&d| d == 1).count();
            let (_, log_w) = crate::gauss::periodic_point(&word).unwrap();
            brute[m] += log_w.exp();
        }
        for m in 0..=n {
            assert!(
                (t[m] - brute[m]).abs() < 1e-6 * (1.0 + brute[m]),
                "class {}: {} vs {}",
                m,
                t[m],
                brute[m]
            );
        }
    }

    #[test]
    fn trace_power_consistency_and_full_trace_near_one() {
        let m = vec![1.0, 2.0, 3.0, 4.0];
        assert!((trace_power(2, &m, 1) - 5.0).abs() < 1e-15);
        // [[1,2],[3,4]]^2 = [[7,10],[15,22]].
        assert!((trace_power(2, &m, 2) - 29.0).abs() < 1e-15);

        // tr L^n of the full operator tends to 1 (second eigenvalue ~0.3).
        let g = ChebGrid::new(48).unwrap();
        let c = GaussOperator::new(&g, 48, TailMode::Extended(464))
            .unwrap()
            .collocation()
            .unwrap();
        let t12 = trace_power(g.len(), &c, 12);
        assert!((t12 - 1.0).abs() < 1e-3, "tr L^12 = {}", t12);
    }
}
