//! Standalone SVG figures. Paths and clearances are recomputed from the
//! trajectory table; the visibility score comes from the report because it
//! depends on the model that was live during the run.

use c2f_core::planner::TrajectoryTable;
use plotters::prelude::*;

use crate::audit::state_clearance;
use crate::config::ScenarioConfig;
use crate::report::RunReport;
use crate::HarnessError;

pub struct Series<'a> {
    pub name: &'a str,
    pub points: Vec<(f64, f64)>,
    pub color: RGBColor,
}

fn plot_err<E: std::fmt::Debug>(e: E) -> HarnessError {
    HarnessError::Plot(format!("{e:?}"))
}

fn range(values: impl Iterator<Item = f64>, pad: f64) -> (f64, f64) {
    let (lo, hi) = values.filter(|v| v.is_finite()).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    let span = (hi - lo).max(1e-6);
    (lo - pad * span, hi + pad * span)
}

/// Line chart of several series with optional horizontal reference lines.
pub fn line_chart(title: &str, x_label: &str, y_label: &str, series: &[Series], refs: &[(f64, &str)]) -> Result<String, HarnessError> {
    let mut svg = String::new();
    {
        let root = SVGBackend::with_string(&mut svg, (720, 420)).into_drawing_area();
        root.fill(&WHITE).map_err(plot_err)?;
        let xs = range(series.iter().flat_map(|s| s.points.iter().map(|p| p.0)), 0.0);
        let ys = range(series.iter().flat_map(|s| s.points.iter().map(|p| p.1)).chain(refs.iter().map(|r| r.0)), 0.05);
        let mut chart = ChartBuilder::on(&root)
            .caption(title, ("sans-serif", 18))
            .margin(12)
            .x_label_area_size(36)
            .y_label_area_size(60)
            .build_cartesian_2d(xs.0..xs.1, ys.0..ys.1)
            .map_err(plot_err)?;
        chart.configure_mesh().x_desc(x_label).y_desc(y_label).draw().map_err(plot_err)?;
        for s in series {
            let color = s.color;
            chart
                .draw_series(LineSeries::new(s.points.iter().copied().filter(|p| p.1.is_finite()), color.stroke_width(2)))
                .map_err(plot_err)?
                .label(s.name)
                .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 18, y)], color.stroke_width(2)));
        }
        for (value, name) in refs {
            let line = vec![(xs.0, *value), (xs.1, *value)];
            chart
                .draw_series(LineSeries::new(line, BLACK.mix(0.5).stroke_width(1)))
                .map_err(plot_err)?
                .label(*name)
                .legend(|(x, y)| PathElement::new(vec![(x, y), (x + 18, y)], BLACK.mix(0.5)));
        }
        chart.configure_series_labels().background_style(WHITE.mix(0.8)).border_style(BLACK).draw().map_err(plot_err)?;
        root.present().map_err(plot_err)?;
    }
    Ok(svg)
}

/// Object position along the table projected on two world axes.
pub fn path_points(table: &TrajectoryTable, axes: (usize, usize)) -> Vec<(f64, f64)> {
    let o = table.joints[0] + table.joints[1];
    table.rows.iter().map(|r| (r.z[o + axes.0], r.z[o + axes.1])).collect()
}

/// Ground-truth clearance of each row to the world at that row's time.
pub fn clearance_points(table: &TrajectoryTable, cfg: &ScenarioConfig) -> Result<Vec<(f64, f64)>, HarnessError> {
    let system = cfg.system()?;
    let n = table.joints;
    table
        .rows
        .iter()
        .map(|r| {
            let q = [r.z.rows(0, n[0]).into_owned(), r.z.rows(n[0], n[1]).into_owned()];
            Ok((r.time, state_clearance(&system, &cfg.geometric_world_at(r.time), &q)?))
        })
        .collect()
}

/// The four run figures as `(file name, svg)`.
pub fn run_figures(report: &RunReport, table: &TrajectoryTable, cfg: &ScenarioConfig) -> Result<Vec<(String, String)>, HarnessError> {
    let vis: Vec<(f64, f64)> = report.records.iter().filter_map(|r| r.visibility.map(|v| (r.time, v))).collect();
    let eps: Vec<(f64, f64)> = report.records.iter().map(|r| (r.time, r.eps_position)).collect();
    let visibility = line_chart(
        "Visibility score over time",
        "time [s]",
        "normalized score",
        &[
            Series { name: "visibility", points: vis, color: BLUE },
            Series { name: "goal slack bound [m]", points: eps, color: RED },
        ],
        &[(cfg.planner.mpc.visibility_threshold, "threshold")],
    )?;
    let distance = line_chart(
        "Distance to obstacles over time",
        "time [s]",
        "clearance [m]",
        &[Series { name: "min sphere clearance", points: clearance_points(table, cfg)?, color: BLUE }],
        &[(cfg.planner.mpc.d_safe, "d_safe")],
    )?;
    let xy = line_chart("Object path, xy view", "x [m]", "y [m]", &[Series { name: "object", points: path_points(table, (0, 1)), color: BLUE }], &[])?;
    let yz = line_chart("Object path, yz view", "y [m]", "z [m]", &[Series { name: "object", points: path_points(table, (1, 2)), color: BLUE }], &[])?;
    Ok(vec![
        ("visibility.svg".into(), visibility),
        ("distance.svg".into(), distance),
        ("path_xy.svg".into(), xy),
        ("path_yz.svg".into(), yz),
    ])
}
