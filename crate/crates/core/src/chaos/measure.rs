use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::field::{Dim, FieldSample, GridSpec};
use crate::scalar::{Point2, Real};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Flavor {
    /// Planar chaos `exp(γX - γ²σ²/2)dx`, γ < 2.
    Bulk,
    /// Chaos on the line `exp(γX/2 - γ²σ²/8)dx`, γ < 2√2.
    Boundary,
    /// Critical chaos on the line, γ = 2√2.
    CriticalBoundary,
}

impl Flavor {
    pub fn name(self) -> &'static str {
        match self {
            Flavor::Bulk => "bulk",
            Flavor::Boundary => "boundary",
            Flavor::CriticalBoundary => "critical_boundary",
        }
    }

    pub(crate) fn code(self) -> u32 {
        match self {
            Flavor::Bulk => 0,
            Flavor::Boundary => 1,
            Flavor::CriticalBoundary => 2,
        }
    }

    pub(crate) fn from_code(c: u32) -> Result<Self> {
        match c {
            0 => Ok(Flavor::Bulk),
            1 => Ok(Flavor::Boundary),
            2 => Ok(Flavor::CriticalBoundary),
            _ => Err(Error::Format(format!("unknown flavor code {c}"))),
        }
    }
}

/// Cell masses of a chaos measure on a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChaosMeasure<T> {
    pub grid: GridSpec<T>,
    /// Cell masses; the critical prelimit may contain negative cells.
    pub masses: Vec<T>,
    pub gamma: T,
    pub flavor: Flavor,
    pub eps: T,
}

impl<T: Real> ChaosMeasure<T> {
    /// Sum in fixed cell order.
    pub fn total(&self) -> T {
        self.masses.iter().copied().sum()
    }

    /// Mass of the cells whose centers lie in `[lo, hi]` (per axis).
    pub fn mass_in_box(&self, lo: Point2<T>, hi: Point2<T>) -> T {
        let inside = |p: Point2<T>| match self.grid.dim {
            Dim::One => p[0] >= lo[0] && p[0] <= hi[0],
            Dim::Two => p[0] >= lo[0] && p[0] <= hi[0] && p[1] >= lo[1] && p[1] <= hi[1],
        };
        (0..self.masses.len()).filter(|&i| inside(self.grid.cell_center(i))).map(|i| self.masses[i]).sum()
    }

    /// Mass of an arbitrary set of cells.
    pub fn mass_of(&self, cells: impl IntoIterator<Item = usize>) -> T {
        cells.into_iter().map(|i| self.masses[i]).sum()
    }

    /// CSV `cell_index,x,y,mass` with a header row.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "cell_index,x,y,mass")?;
        for (i, m) in self.masses.iter().enumerate() {
            let c = self.grid.cell_center(i);
            writeln!(w, "{},{},{},{}", i, c[0].as_f64(), c[1].as_f64(), m.as_f64())?;
        }
        Ok(())
    }
}

fn cutoff_of<T: Real>(field: &FieldSample<T>) -> T {
    field.spec.cutoff
}

/// Subcritical chaos measure: cell mass `exp(aX - a²σ²/2)·|cell|` with `a = γ`
/// (bulk) or `a = γ/2` (boundary).
pub fn gmc_measure<T: Real>(field: &FieldSample<T>, gamma: T, flavor: Flavor) -> Result<ChaosMeasure<T>> {
    if !gamma.is_finite() || gamma < T::zero() {
        return Err(invalid("gamma", format!("γ = {gamma} must be finite and ≥ 0")));
    }
    let a = match flavor {
        Flavor::Bulk => {
            if field.grid.dim != Dim::Two {
                return Err(invalid("flavor", "bulk chaos needs a two-dimensional field"));
            }
            if gamma >= T::lit(2.0) {
                return Err(Error::Supercritical { flavor: "bulk", gamma: gamma.as_f64(), requirement: "γ < 2 required" });
            }
            gamma
        }
        Flavor::Boundary => {
            if field.grid.dim != Dim::One {
                return Err(invalid("flavor", "boundary chaos needs a one-dimensional field"));
            }
            if gamma >= T::lit(2.0) * T::SQRT_2() {
                return Err(Error::Supercritical {
                    flavor: "boundary",
                    gamma: gamma.as_f64(),
                    requirement: "γ < 2√2 required",
                });
            }
            gamma / T::lit(2.0)
        }
        Flavor::CriticalBoundary => {
            return Err(invalid("flavor", "use critical_boundary_measure for the critical flavor"));
        }
    };
    let vol = field.grid.cell_volume();
    let shift = T::lit(0.5) * a * a * field.sigma2;
    let masses = if gamma == T::zero() {
        vec![vol; field.values.len()]
    } else {
        field.values.iter().map(|&x| (a * x - shift).exp() * vol).collect()
    };
    Ok(ChaosMeasure { grid: field.grid, masses, gamma, flavor, eps: cutoff_of(field) })
}

/// The two normalizations of critical boundary chaos at a fixed cutoff.
#[derive(Debug, Clone, PartialEq)]
pub struct CriticalMeasures<T> {
    /// `√(2/π)(√2σ² - X)exp(√2X - σ²)·Δx` (signed).
    pub derivative: ChaosMeasure<T>,
    /// `√(-ln ε)·exp(√2X - σ²)·Δx`.
    pub seneta_heyde: ChaosMeasure<T>,
}

pub fn critical_boundary_measure<T: Real>(field: &FieldSample<T>) -> Result<CriticalMeasures<T>> {
    if field.grid.dim != Dim::One {
        return Err(invalid("flavor", "critical boundary chaos needs a one-dimensional field"));
    }
    let eps = cutoff_of(field);
    if !(eps > T::zero() && eps < (-T::one()).exp()) {
        return Err(invalid("cutoff", format!("ε = {eps} must lie in (0, e^-1) so that -ln ε > 1")));
    }
    let sqrt2 = T::SQRT_2();
    let s2 = field.sigma2;
    let dx = field.grid.cell_volume();
    let pref = (T::lit(2.0) / T::PI()).sqrt();
    let norm = (-eps.ln()).sqrt();
    let gamma = T::lit(2.0) * sqrt2;
    let (mut derivative, mut seneta_heyde) = (Vec::with_capacity(field.values.len()), Vec::with_capacity(field.values.len()));
    for &x in &field.values {
        let e = (sqrt2 * x - s2).exp();
        derivative.push(pref * (sqrt2 * s2 - x) * e * dx);
        seneta_heyde.push(norm * e * dx);
    }
    let make = |masses| ChaosMeasure { grid: field.grid, masses, gamma, flavor: Flavor::CriticalBoundary, eps };
    Ok(CriticalMeasures { derivative: make(derivative), seneta_heyde: make(seneta_heyde) })
}
