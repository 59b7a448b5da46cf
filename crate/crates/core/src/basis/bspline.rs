use nalgebra::{DMatrix, DVector, SVD};

use super::{BasisKind, BasisSpec};
use crate::dataset::{LineWindow, Segment};
use crate::error::{Error, Result};
use crate::linalg::reciprocal_condition;

/// Cubic splines.
pub const BSPLINE_ORDER: usize = 4;
const DEGREE: usize = BSPLINE_ORDER - 1;
const RANK_TOL: f64 = 1e-10;

/// Clamped knot vector for `size` cubic B-splines with equally spaced interior knots.
pub fn bspline_knots(window: &LineWindow, size: usize) -> Vec<f64> {
    let pieces = size - DEGREE;
    let mut knots = Vec::with_capacity(size + BSPLINE_ORDER);
    knots.extend(std::iter::repeat_n(window.lower, DEGREE));
    for i in 0..=pieces {
        knots.push(window.lower + window.width() * i as f64 / pieces as f64);
    }
    *knots.last_mut().expect("non-empty") = window.upper;
    knots.extend(std::iter::repeat_n(window.upper, DEGREE));
    knots
}

fn find_span(knots: &[f64], size: usize, t: f64) -> usize {
    if t >= knots[size] {
        return size - 1;
    }
    // Last index i in [DEGREE, size) with knots[i] <= t.
    let upper = knots[DEGREE..size].partition_point(|&k| k <= t);
    (DEGREE + upper).saturating_sub(1).max(DEGREE)
}

/// The four nonzero basis values at `t` and the index of the first one.
fn nonzero_basis(knots: &[f64], size: usize, t: f64) -> (usize, [f64; BSPLINE_ORDER]) {
    let span = find_span(knots, size, t);
    let mut values = [0.0; BSPLINE_ORDER];
    let mut left = [0.0; BSPLINE_ORDER];
    let mut right = [0.0; BSPLINE_ORDER];
    values[0] = 1.0;
    for j in 1..=DEGREE {
        left[j] = t - knots[span + 1 - j];
        right[j] = knots[span + j] - t;
        let mut saved = 0.0;
        for r in 0..j {
            let temp = values[r] / (right[r + 1] + left[j - r]);
            values[r] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        values[j] = saved;
    }
    (span - DEGREE, values)
}

/// All `size` cubic B-spline basis values at `t` on the window.
pub fn bspline_basis_eval(spec: &BasisSpec, window: &LineWindow, t: f64) -> Result<Vec<f64>> {
    if spec.kind != BasisKind::BSpline {
        return Err(Error::InvalidBasis("expected a B-spline basis".into()));
    }
    spec.validate()?;
    if !window.contains(t) {
        return Err(Error::InvalidArgument(format!(
            "t = {t} outside [{}, {}]",
            window.lower, window.upper
        )));
    }
    let knots = bspline_knots(window, spec.size);
    let (first, values) = nonzero_basis(&knots, spec.size, t);
    let mut out = vec![0.0; spec.size];
    out[first..first + BSPLINE_ORDER].copy_from_slice(&values);
    Ok(out)
}

/// Least-squares cubic B-spline coefficients of the segment's samples.
pub fn project_bspline(segment: &Segment, spec: &BasisSpec) -> Result<Vec<f64>> {
    if spec.kind != BasisKind::BSpline {
        return Err(Error::InvalidBasis("expected a B-spline basis".into()));
    }
    spec.validate()?;
    let n = segment.len();
    let p = spec.size;
    if n < p {
        return Err(Error::TooFewSamples { needed: p, got: n });
    }
    let knots = bspline_knots(&segment.window, p);
    let mut design = DMatrix::zeros(n, p);
    for (i, &t) in segment.wavelengths.iter().enumerate() {
        if !segment.window.contains(t) {
            return Err(Error::InvalidArgument(format!(
                "sample {t} outside window [{}, {}]",
                segment.window.lower, segment.window.upper
            )));
        }
        let (first, values) = nonzero_basis(&knots, p, t);
        for (c, v) in values.iter().enumerate() {
            design[(i, first + c)] = *v;
        }
    }
    let svd = SVD::new(design, true, true);
    let rcond = reciprocal_condition(&svd.singular_values);
    if rcond < RANK_TOL {
        return Err(Error::RankDeficient { rcond });
    }
    let rhs = DVector::from_column_slice(&segment.flux);
    let coef = svd
        .solve(&rhs, 0.0)
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    Ok(coef.iter().copied().collect())
}
