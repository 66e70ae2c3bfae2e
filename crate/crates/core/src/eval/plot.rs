use std::path::Path;

use plotters::prelude::*;

use super::EvalError;

fn plot_err(e: impl std::fmt::Display) -> EvalError {
    EvalError::Plot(e.to_string())
}

/// A named numeric column pulled from a CSV file.
struct Series {
    label: String,
    points: Vec<(f64, f64)>,
}

fn read_table(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>), EvalError> {
    let mut r = csv::Reader::from_path(path)?;
    let header = r.headers()?.iter().map(str::to_string).collect();
    let rows = r.records().map(|rec| rec.map(|r| r.iter().map(str::to_string).collect())).collect::<Result<_, _>>()?;
    Ok((header, rows))
}

fn column(header: &[String], name: &str, path: &Path) -> Result<usize, EvalError> {
    header
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| EvalError::Config(format!("{} has no column {name}", path.display())))
}

fn parse(s: &str) -> f64 {
    s.parse().unwrap_or(f64::NAN)
}

fn draw(series: &[Series], title: &str, x_label: &str, y_label: &str, out: &Path) -> Result<(), EvalError> {
    let pts = series.iter().flat_map(|s| s.points.iter()).filter(|(x, y)| x.is_finite() && y.is_finite());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        return Err(EvalError::Config("nothing to plot".into()));
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    let pad = ((y1 - y0) * 0.05).max(1e-9);
    let root = SVGBackend::new(out, (900, 540)).into_drawing_area();
    root.fill(&WHITE).map_err(plot_err)?;
    let mut chart = ChartBuilder::on(&root)
        .caption(title, ("sans-serif", 22))
        .margin(12)
        .x_label_area_size(40)
        .y_label_area_size(60)
        .build_cartesian_2d(x0..x1, (y0 - pad)..(y1 + pad))
        .map_err(plot_err)?;
    chart.configure_mesh().x_desc(x_label).y_desc(y_label).draw().map_err(plot_err)?;
    for (k, s) in series.iter().enumerate() {
        let color = Palette99::pick(k).to_rgba();
        let pts = s.points.iter().copied().filter(|(x, y)| x.is_finite() && y.is_finite());
        chart
            .draw_series(LineSeries::new(pts, color.stroke_width(2)))
            .map_err(plot_err)?
            .label(s.label.clone())
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 18, y)], color));
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .draw()
        .map_err(plot_err)?;
    root.present().map_err(plot_err)?;
    Ok(())
}

/// Mean return and success rate against environment steps from a training log.
pub fn plot_learning_curve(log_csv: &Path, out: &Path) -> Result<(), EvalError> {
    let (h, rows) = read_table(log_csv)?;
    let (s, r, k) = (column(&h, "step", log_csv)?, column(&h, "meanReturn", log_csv)?, column(&h, "successRate", log_csv)?);
    let pick = |c: usize, label: &str| Series {
        label: label.into(),
        points: rows.iter().map(|row| (parse(&row[s]), parse(&row[c]))).collect(),
    };
    draw(&[pick(r, "mean return"), pick(k, "success rate")], "Training progress", "environment steps", "value", out)
}

/// Per-trial correctness error of one or more evaluation reports.
pub fn plot_reports(reports: &[&Path], out: &Path) -> Result<(), EvalError> {
    let mut series = Vec::new();
    for path in reports {
        let (h, rows) = read_table(path)?;
        let (t, c, e) = (column(&h, "trial", path)?, column(&h, "controller", path)?, column(&h, "errorC", path)?);
        let label = rows.first().map(|r| r[c].clone()).unwrap_or_default();
        let points = rows.iter().filter(|r| r[t] != "summary").map(|r| (parse(&r[t]), parse(&r[e]))).collect();
        series.push(Series { label, points });
    }
    draw(&series, "Orientation error per trial", "trial", "error (deg)", out)
}

/// Dispatch on the CSV header: evaluation reports or a training log.
pub fn plot_csvs(inputs: &[&Path], out: &Path) -> Result<(), EvalError> {
    let first = inputs.first().ok_or_else(|| EvalError::Config("no input CSVs".into()))?;
    let (h, _) = read_table(first)?;
    if h.iter().any(|c| c == "errorC") {
        plot_reports(inputs, out)
    } else {
        plot_learning_curve(first, out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_both_chart_kinds() {
        let dir = tempfile::tempdir().unwrap();
        let log = dir.path().join("log.csv");
        std::fs::write(&log, "step,meanReturn,successRate,policyLoss,valueLoss,entropy,lr,eps\n128,-3,0.1,0,0,0,0,0\n256,-1,0.5,0,0,0,0,0\n").unwrap();
        let rep = dir.path().join("rep.csv");
        std::fs::write(&rep, "trial,controller,errorC\n0,fdat,1.5\n1,fdat,0.5\nsummary,fdat,1.0\n").unwrap();
        for (input, name) in [(&log, "a.svg"), (&rep, "b.svg")] {
            let out = dir.path().join(name);
            plot_csvs(&[input.as_path()], &out).unwrap();
            assert!(std::fs::read_to_string(&out).unwrap().contains("<svg"));
        }
    }

    #[test]
    fn missing_column_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.csv");
        std::fs::write(&p, "a,b\n1,2\n").unwrap();
        assert!(plot_csvs(&[p.as_path()], &dir.path().join("o.svg")).is_err());
    }
}
