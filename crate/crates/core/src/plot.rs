//! SVG figures: state components, entropy, energy deviation, phase portraits
//! and singular-value decay.

use std::path::{Path, PathBuf};

use plotters::prelude::*;

use crate::error::{Error, Result};
use crate::integrator::Trajectory;
use crate::report::Method;
use crate::rom::RomVariant;
use crate::system::MetriplecticSystem;

/// A full-dimensional trajectory (ROM output already lifted) with its legend.
#[derive(Clone, Debug)]
pub struct LabeledTrajectory {
    pub label: String,
    pub method: Method,
    pub trajectory: Trajectory,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Quantity {
    StateComponent(usize),
    Entropy,
    EnergyDeviation,
    PhasePortrait(usize, usize),
}

impl Quantity {
    fn file_stem(self) -> String {
        match self {
            Quantity::StateComponent(i) => format!("state_{i}"),
            Quantity::Entropy => "entropy".into(),
            Quantity::EnergyDeviation => "energy_deviation".into(),
            Quantity::PhasePortrait(i, j) => format!("phase_{i}_{j}"),
        }
    }
}

fn plot_err<E: std::fmt::Display>(e: E) -> Error {
    Error::Plot(e.to_string())
}

fn color(method: Method) -> RGBColor {
    match method {
        Method::Fom => BLACK,
        Method::Rom(RomVariant::StructurePreserving) => RGBColor(31, 119, 180),
        Method::Rom(RomVariant::Symmetric) => RGBColor(214, 39, 40),
        Method::Rom(RomVariant::Galerkin) => RGBColor(44, 160, 44),
    }
}

struct Curve {
    label: String,
    method: Method,
    points: Vec<(f64, f64)>,
}

fn bounds(curves: &[Curve]) -> (std::ops::Range<f64>, std::ops::Range<f64>) {
    let mut xs = (f64::INFINITY, f64::NEG_INFINITY);
    let mut ys = (f64::INFINITY, f64::NEG_INFINITY);
    for (x, y) in curves.iter().flat_map(|c| c.points.iter()) {
        xs = (xs.0.min(*x), xs.1.max(*x));
        ys = (ys.0.min(*y), ys.1.max(*y));
    }
    let pad = |(lo, hi): (f64, f64)| {
        if !lo.is_finite() || !hi.is_finite() {
            return 0.0..1.0;
        }
        let span = hi - lo;
        let margin = if span > 0.0 {
            0.05 * span
        } else {
            1e-3 * lo.abs().max(1e-12)
        };
        (lo - margin)..(hi + margin)
    };
    (pad(xs), pad(ys))
}

fn draw(path: &Path, title: &str, x_desc: &str, y_desc: &str, curves: &[Curve]) -> Result<()> {
    let (xr, yr) = bounds(curves);
    let root = SVGBackend::new(path, (900, 560)).into_drawing_area();
    root.fill(&WHITE).map_err(plot_err)?;
    let mut chart = ChartBuilder::on(&root)
        .caption(title, ("sans-serif", 22))
        .margin(12)
        .x_label_area_size(42)
        .y_label_area_size(80)
        .build_cartesian_2d(xr, yr)
        .map_err(plot_err)?;
    chart
        .configure_mesh()
        .x_desc(x_desc)
        .y_desc(y_desc)
        .draw()
        .map_err(plot_err)?;
    for c in curves {
        let col = color(c.method);
        let style = col.stroke_width(2);
        let pts = c.points.clone();
        let anno = match c.method {
            Method::Fom => chart.draw_series(LineSeries::new(pts, style)),
            Method::Rom(RomVariant::StructurePreserving) => {
                chart.draw_series(DashedLineSeries::new(pts, 10, 4, style))
            }
            Method::Rom(RomVariant::Symmetric) => {
                chart.draw_series(DashedLineSeries::new(pts, 6, 6, style))
            }
            Method::Rom(RomVariant::Galerkin) => {
                chart.draw_series(DashedLineSeries::new(pts, 2, 4, style))
            }
        }
        .map_err(plot_err)?;
        anno.label(c.label.as_str())
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 24, y)], col.stroke_width(2)));
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.85))
        .border_style(BLACK)
        .draw()
        .map_err(plot_err)?;
    root.present().map_err(plot_err)?;
    Ok(())
}

fn finite(points: impl Iterator<Item = (f64, f64)>) -> Vec<(f64, f64)> {
    points.filter(|(x, y)| x.is_finite() && y.is_finite()).collect()
}

fn curves_for(
    quantity: Quantity,
    series: &[LabeledTrajectory],
    system: &dyn MetriplecticSystem,
) -> Result<Vec<Curve>> {
    series
        .iter()
        .map(|s| {
            let t = &s.trajectory;
            let points = match quantity {
                Quantity::StateComponent(i) => {
                    if i >= t.dim() {
                        return Err(Error::DimensionMismatch {
                            expected: t.dim(),
                            found: i,
                        });
                    }
                    finite(t.times.iter().zip(&t.states).map(|(&tt, x)| (tt, x[i])))
                }
                Quantity::PhasePortrait(i, j) => {
                    if i.max(j) >= t.dim() {
                        return Err(Error::DimensionMismatch {
                            expected: t.dim(),
                            found: i.max(j),
                        });
                    }
                    finite(t.states.iter().map(|x| (x[i], x[j])))
                }
                Quantity::Entropy => {
                    let mut v = Vec::with_capacity(t.len());
                    for (&tt, x) in t.times.iter().zip(&t.states) {
                        v.push((tt, system.entropy(x)?));
                    }
                    finite(v.into_iter())
                }
                Quantity::EnergyDeviation => {
                    let e0 = system.energy(&t.states[0])?;
                    let mut v = Vec::with_capacity(t.len());
                    for (&tt, x) in t.times.iter().zip(&t.states) {
                        v.push((tt, system.energy(x)? - e0));
                    }
                    finite(v.into_iter())
                }
            };
            Ok(Curve {
                label: s.label.clone(),
                method: s.method,
                points,
            })
        })
        .collect()
}

/// Write one SVG per quantity into `dir`, named `<prefix>_<quantity>.svg`.
pub fn emit_plots(
    series: &[LabeledTrajectory],
    system: &dyn MetriplecticSystem,
    quantities: &[Quantity],
    dir: &Path,
    prefix: &str,
) -> Result<Vec<PathBuf>> {
    if series.is_empty() {
        return Err(Error::Invalid("no trajectories to plot".into()));
    }
    if series.iter().any(|s| s.trajectory.is_empty()) {
        return Err(Error::Invalid("empty trajectory in plot input".into()));
    }
    let mut written = Vec::new();
    for &q in quantities {
        let curves = curves_for(q, series, system)?;
        let (title, x_desc, y_desc) = match q {
            Quantity::StateComponent(i) => (format!("state component {i}"), "t".into(), format!("x[{i}]")),
            Quantity::Entropy => ("entropy".into(), "t".into(), "S".into()),
            Quantity::EnergyDeviation => ("energy deviation".into(), "t".into(), "E - E0".into()),
            Quantity::PhasePortrait(i, j) => ("phase portrait".into(), format!("x[{i}]"), format!("x[{j}]")),
        };
        let path = dir.join(format!("{prefix}_{}.svg", q.file_stem()));
        draw(&path, &title, &x_desc, &y_desc, &curves)?;
        written.push(path);
    }
    Ok(written)
}

/// Squared singular values as a percentage of their total, first `count` shown.
pub fn plot_singular_values(sigma: &[f64], count: usize, path: &Path) -> Result<()> {
    let total: f64 = sigma.iter().map(|s| s * s).sum();
    if sigma.is_empty() || total <= 0.0 {
        return Err(Error::Invalid("no singular values to plot".into()));
    }
    let points = finite(
        sigma
            .iter()
            .take(count.max(1))
            .enumerate()
            .map(|(j, s)| ((j + 1) as f64, 100.0 * s * s / total)),
    );
    let curve = Curve {
        label: "sigma_j^2 / sum (%)".into(),
        method: Method::Fom,
        points,
    };
    draw(path, "singular value decay", "j", "% of total", &[curve])
}
