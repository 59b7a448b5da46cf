use std::f64::consts::PI;

use super::{BasisKind, BasisSpec};
use crate::dataset::{LineWindow, Segment};
use crate::error::{Error, Result};
use crate::linalg::trapezoid;

/// Orthonormal Fourier basis on `[a, b]` evaluated at `t`.
///
/// With `T = b - a` and `u = t - a`: `ρ₁ = 1/√T`, `ρ₂ₖ = √(2/T) sin(2πku/T)`,
/// `ρ₂ₖ₊₁ = √(2/T) cos(2πku/T)`.
pub fn fourier_basis_eval(spec: &BasisSpec, window: &LineWindow, t: f64) -> Result<Vec<f64>> {
    if spec.kind != BasisKind::Fourier {
        return Err(Error::InvalidBasis("expected a Fourier basis".into()));
    }
    spec.validate()?;
    if !window.contains(t) {
        return Err(Error::InvalidArgument(format!(
            "t = {t} outside [{}, {}]",
            window.lower, window.upper
        )));
    }
    let mut out = vec![0.0; spec.size];
    fill_fourier(&mut out, window, t);
    Ok(out)
}

fn fill_fourier(out: &mut [f64], window: &LineWindow, t: f64) {
    let period = window.width();
    let u = t - window.lower;
    out[0] = 1.0 / period.sqrt();
    let amp = (2.0 / period).sqrt();
    for k in 1..=(out.len() - 1) / 2 {
        let arg = 2.0 * PI * k as f64 * u / period;
        out[2 * k - 1] = amp * arg.sin();
        out[2 * k] = amp * arg.cos();
    }
}

/// Inner products `∫ X(t) ρ_k(t) dt` by the trapezoidal rule on the segment's own grid.
pub fn project_fourier(segment: &Segment, spec: &BasisSpec) -> Result<Vec<f64>> {
    if spec.kind != BasisKind::Fourier {
        return Err(Error::InvalidBasis("expected a Fourier basis".into()));
    }
    spec.validate()?;
    let n = segment.len();
    if n < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: n });
    }
    let p = spec.size;
    let mut weighted = vec![vec![0.0; n]; p];
    let mut row = vec![0.0; p];
    for (i, (&t, &f)) in segment.wavelengths.iter().zip(&segment.flux).enumerate() {
        fill_fourier(&mut row, &segment.window, t);
        for k in 0..p {
            weighted[k][i] = f * row[k];
        }
    }
    Ok(weighted.iter().map(|w| trapezoid(&segment.wavelengths, w)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit() -> LineWindow {
        LineWindow::new(0.0, 1.0).unwrap()
    }

    fn grid(window: &LineWindow, n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| window.lower + window.width() * i as f64 / (n - 1) as f64)
            .collect()
    }

    fn segment_from(window: LineWindow, n: usize, f: impl Fn(f64) -> f64) -> Segment {
        let wavelengths = grid(&window, n);
        let flux = wavelengths.iter().map(|&t| f(t)).collect();
        Segment {
            window,
            wavelengths,
            flux,
        }
    }

    #[test]
    fn constant_basis() {
        let spec = BasisSpec::fourier(1).unwrap();
        for t in [0.0, 0.3, 1.0] {
            assert_eq!(fourier_basis_eval(&spec, &unit(), t).unwrap(), vec![1.0]);
        }
    }

    #[test]
    fn three_terms_at_origin() {
        let spec = BasisSpec::fourier(3).unwrap();
        let v = fourier_basis_eval(&spec, &unit(), 0.0).unwrap();
        assert_eq!(v[0], 1.0);
        assert_eq!(v[1], 0.0);
        assert!((v[2] - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn rejects_even_size_and_outside_domain() {
        assert!(BasisSpec::fourier(4).is_err());
        let spec = BasisSpec::fourier(3).unwrap();
        assert!(fourier_basis_eval(&spec, &unit(), 1.5).is_err());
    }

    #[test]
    fn sine_cosine_orthogonal() {
        // Simpson's rule on a dense grid, independent of the trapezoid path.
        let window = LineWindow::new(4300.0, 4360.0).unwrap();
        let spec = BasisSpec::fourier(3).unwrap();
        let n = 20_001;
        let h = window.width() / (n - 1) as f64;
        let mut acc = 0.0;
        for i in 0..n {
            let t = window.lower + h * i as f64;
            let v = fourier_basis_eval(&spec, &window, t).unwrap();
            let w = if i == 0 || i == n - 1 {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            acc += w * v[1] * v[2];
        }
        assert!((acc * h / 3.0).abs() < 1e-8);
    }

    #[test]
    fn constant_flux_projects_onto_first_function() {
        let window = LineWindow::new(4460.0, 4485.0).unwrap();
        let c = 0.8;
        let seg = segment_from(window, 250, |_| c);
        let coef = project_fourier(&seg, &BasisSpec::fourier(9).unwrap()).unwrap();
        assert!((coef[0] - c * window.width().sqrt()).abs() < 1e-6 * c);
        for x in &coef[1..] {
            assert!(x.abs() < 1e-6 * c);
        }
    }

    #[test]
    fn pure_basis_function_and_linearity() {
        let window = LineWindow::new(6500.0, 6600.0).unwrap();
        let spec = BasisSpec::fourier(7).unwrap();
        let eval = |t: f64| fourier_basis_eval(&spec, &window, t).unwrap();
        let seg = segment_from(window, 1000, |t| eval(t)[1]);
        let coef = project_fourier(&seg, &spec).unwrap();
        for (k, x) in coef.iter().enumerate() {
            let expected = if k == 1 { 1.0 } else { 0.0 };
            assert!((x - expected).abs() < 1e-4, "k={k}: {x}");
        }
        let seg = segment_from(window, 1000, |t| 2.0 * eval(t)[0] + 3.0 * eval(t)[2]);
        let coef = project_fourier(&seg, &spec).unwrap();
        let expected = [2.0, 0.0, 3.0, 0.0, 0.0, 0.0, 0.0];
        for (x, e) in coef.iter().zip(expected) {
            assert!((x - e).abs() < 1e-4);
        }
    }

    #[test]
    fn second_order_convergence() {
        let window = LineWindow::new(0.0, 2.0).unwrap();
        let spec = BasisSpec::fourier(5).unwrap();
        let f = |t: f64| (0.7 * t).exp();
        let reference = project_fourier(&segment_from(window, 100_001, f), &spec).unwrap();
        let err = |n: usize| {
            let c = project_fourier(&segment_from(window, n, f), &spec).unwrap();
            c.iter().zip(&reference).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
        };
        let e1 = err(101);
        let e2 = err(201);
        let e3 = err(401);
        for ratio in [e1 / e2, e2 / e3] {
            assert!((ratio - 4.0).abs() < 0.3, "refinement ratio {ratio}");
        }
    }

    #[test]
    fn too_few_samples() {
        let seg = segment_from(unit(), 2, |_| 1.0);
        assert!(project_fourier(&seg, &BasisSpec::fourier(3).unwrap()).is_ok());
        let seg = Segment {
            window: unit(),
            wavelengths: vec![0.5],
            flux: vec![1.0],
        };
        assert!(matches!(
            project_fourier(&seg, &BasisSpec::fourier(3).unwrap()),
            Err(Error::TooFewSamples { .. })
        ));
    }
}
