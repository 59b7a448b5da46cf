//! Projection of windowed curves onto a finite basis and design-matrix assembly.

mod bspline;
mod design;
mod fourier;

use serde::{Deserialize, Serialize};

pub use bspline::{bspline_basis_eval, bspline_knots, project_bspline, BSPLINE_ORDER};
pub use design::{build_design_matrix, ColumnMeta, DesignMatrix};
pub use fourier::{fourier_basis_eval, project_fourier};

use crate::dataset::Segment;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BasisKind {
    Fourier,
    #[serde(alias = "spline")]
    BSpline,
}

impl std::fmt::Display for BasisKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BasisKind::Fourier => f.write_str("fourier"),
            BasisKind::BSpline => f.write_str("bspline"),
        }
    }
}

impl std::str::FromStr for BasisKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fourier" => Ok(BasisKind::Fourier),
            "bspline" | "spline" => Ok(BasisKind::BSpline),
            other => Err(Error::InvalidArgument(format!("unknown basis {other:?}"))),
        }
    }
}

/// Basis family and size `p`. The domain of each window's basis is the window itself.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BasisSpec {
    pub kind: BasisKind,
    pub size: usize,
}

impl BasisSpec {
    pub fn new(kind: BasisKind, size: usize) -> Result<Self> {
        let spec = BasisSpec { kind, size };
        spec.validate()?;
        Ok(spec)
    }

    pub fn fourier(size: usize) -> Result<Self> {
        Self::new(BasisKind::Fourier, size)
    }

    pub fn bspline(size: usize) -> Result<Self> {
        Self::new(BasisKind::BSpline, size)
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            BasisKind::Fourier if self.size == 0 || self.size.is_multiple_of(2) => Err(Error::InvalidBasis(format!(
                "Fourier basis size must be odd and positive, got {}",
                self.size
            ))),
            BasisKind::BSpline if self.size < BSPLINE_ORDER => Err(Error::InvalidBasis(format!(
                "cubic B-spline basis needs at least {BSPLINE_ORDER} functions, got {}",
                self.size
            ))),
            _ => Ok(()),
        }
    }

    /// Coefficients of one segment on this basis over the segment's window.
    pub fn project(&self, segment: &Segment) -> Result<Vec<f64>> {
        match self.kind {
            BasisKind::Fourier => project_fourier(segment, self),
            BasisKind::BSpline => project_bspline(segment, self),
        }
    }
}
