//! Sojourn times on the grid and their normalisations.

use crate::error::{Error, Result};
use crate::field_sampler::{FieldSample, GridSpec};
use crate::normal;
use crate::stein_bounds::Mode;

/// Variances below this cannot be used as a denominator.
pub const MIN_VARIANCE: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SojournStatistic {
    pub t: f64,
    pub u: f64,
    pub raw: f64,
    pub centered_normalized: f64,
}

/// `h^d` times the number of cells whose lower-left corner is at or above
/// `u`. Cells are anchored at their lower corner, so the last grid index on
/// each axis only closes the window and is not counted; the full volume is
/// then exactly `(h (n - 1))^d`.
pub fn sojourn_from_values(values: &[f64], grid: &GridSpec, u: f64) -> f64 {
    let n = grid.n;
    let cells = match grid.d {
        1 => values[..n - 1].iter().filter(|&&x| x >= u).count(),
        _ => (0..n - 1)
            .map(|i| values[i * n..i * n + n - 1].iter().filter(|&&x| x >= u).count())
            .sum(),
    };
    cells as f64 * grid.h.powi(grid.d as i32)
}

pub fn sojourn_time(field: &FieldSample, u: f64) -> f64 {
    sojourn_from_values(&field.values, &field.grid, u)
}

/// What normalisation needs from the theory side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheoryContext {
    pub d: usize,
    /// `Var(S_T)`; required in moving mode.
    pub variance: Option<f64>,
}

/// Fixed: `(S - T^d Phi_bar(u)) / sqrt(T^d)`. Moving: `(S - T^d Phi_bar(u)) / sqrt(Var S)`.
pub fn normalize(raw: f64, t: f64, u: f64, mode: Mode, ctx: &TheoryContext) -> Result<SojournStatistic> {
    let volume = t.powi(ctx.d as i32);
    let centred = raw - volume * normal::tail(u);
    let scale = match mode {
        Mode::Fixed => volume,
        Mode::Moving => {
            let v = ctx.variance.ok_or_else(|| {
                Error::Precondition("moving normalisation needs Var(S_T)".into())
            })?;
            if !(v >= MIN_VARIANCE) {
                return Err(Error::ZeroVariance(v));
            }
            v
        }
    };
    Ok(SojournStatistic {
        t,
        u,
        raw,
        centered_normalized: centred / scale.sqrt(),
    })
}
