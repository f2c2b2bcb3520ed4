use crate::error::{Error, Result};

use super::ScanPoint;

#[derive(Debug, Clone, PartialEq)]
pub struct Refined {
    pub value: f64,
    pub objective: f64,
    /// Every evaluated point, grid first.
    pub points: Vec<ScanPoint>,
}

/// Vertex of the parabola through `(-h, fm), (0, f0), (h, fp)`, relative to the middle
/// point and clamped to the bracket.
pub(crate) fn parabola_vertex(fm: f64, f0: f64, fp: f64, h: f64) -> f64 {
    let curvature = fp - 2.0 * f0 + fm;
    if curvature <= 0.0 || !curvature.is_finite() {
        return 0.0;
    }
    (-0.5 * h * (fp - fm) / curvature).clamp(-h, h)
}

/// Grid of `2 half_width + 1` points spaced `step` around `center`, walked until the
/// minimum is interior (at most `half_width` extra shifts) or it hits `lower`; then
/// `rounds` three-point parabolic refinements with the spacing halved each round.
/// The result is the best point evaluated, so the objective never exceeds the grid
/// minimum and the value stays inside the scanned range.
pub fn refine_1d(
    f: &dyn Fn(f64) -> Result<f64>,
    center: f64,
    step: f64,
    half_width: usize,
    rounds: usize,
    lower: Option<f64>,
) -> Result<Refined> {
    if !(step > 0.0 && step.is_finite() && center.is_finite()) {
        return Err(Error::input("refinement needs a finite center and positive step"));
    }
    let clamp = |x: f64| lower.map_or(x, |l| x.max(l));
    let mut points: Vec<ScanPoint> = Vec::new();
    let eval = |x: f64, points: &mut Vec<ScanPoint>| -> Result<f64> {
        if let Some(p) = points.iter().find(|p| p.values[0] == x) {
            return Ok(p.objective);
        }
        let v = f(x)?;
        if !v.is_finite() {
            return Err(Error::Calibration {
                stage: "refine".into(),
                reason: format!("objective is not finite at {x}"),
            });
        }
        points.push(ScanPoint {
            values: vec![x],
            objective: v,
        });
        Ok(v)
    };
    let hw = half_width.max(1) as i64;
    let mut c = clamp(center);
    let mut best = (c, f64::INFINITY);
    for _ in 0..=half_width {
        let mut grid = Vec::new();
        for k in -hw..=hw {
            let x = clamp(c + k as f64 * step);
            if grid.last().is_none_or(|g: &(f64, f64)| g.0 != x) {
                grid.push((x, eval(x, &mut points)?));
            }
        }
        let (m, &(xm, fm)) = grid
            .iter()
            .enumerate()
            .min_by(|a, b| a.1 .1.total_cmp(&b.1 .1))
            .expect("non-empty grid");
        best = (xm, fm);
        let at_lower = lower.is_some_and(|l| xm <= l);
        if m > 0 && m + 1 < grid.len() || at_lower {
            break;
        }
        c = xm;
    }
    let mut h = step;
    for _ in 0..rounds {
        let x0 = best.0;
        let lo = clamp(x0 - h);
        if lo == x0 {
            // pinned at the lower bound
            break;
        }
        let fm = eval(lo, &mut points)?;
        let fp = eval(x0 + h, &mut points)?;
        let x = clamp(x0 + parabola_vertex(fm, best.1, fp, h));
        let v = eval(x, &mut points)?;
        for (x, v) in [(x, v), (lo, fm), (x0 + h, fp)] {
            if v < best.1 {
                best = (x, v);
            }
        }
        h /= 2.0;
    }
    Ok(Refined {
        value: best.0,
        objective: best.1,
        points,
    })
}
