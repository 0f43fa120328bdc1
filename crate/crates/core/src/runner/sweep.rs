//! Shot-size sweep: run the pipeline for each n in a range, fit a quadratic
//! to the (n, F1) points, and emit a CSV plus a static SVG chart with the
//! fitted curve and its extremum.

use serde::Serialize;

/// One sweep measurement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepPoint {
    pub n_shots: usize,
    pub p: f64,
    pub r: f64,
    pub f1: f64,
}

/// Least-squares quadratic `y = a*x^2 + b*x + c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuadFit {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    /// Interior maximum `(x*, y*)`; present only for a concave fit (a < 0).
    pub extremum: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub points: Vec<SweepPoint>,
    /// Absent when fewer than 3 points were measured or the fit degenerated.
    pub fit: Option<QuadFit>,
}

/// Treat |a| below this as a flat (non-concave) fit.
const CONCAVITY_EPS: f64 = 1e-9;

/// Fits a quadratic by the normal equations. Returns `None` for fewer than
/// 3 points or a singular system.
pub fn quad_fit(points: &[(f64, f64)]) -> Option<QuadFit> {
    if points.len() < 3 {
        return None;
    }
    let mut s = [0.0f64; 5]; // sums of x^0 .. x^4
    let mut t = [0.0f64; 3]; // sums of y, x*y, x^2*y
    for &(x, y) in points {
        let mut xp = 1.0;
        for sum in s.iter_mut() {
            *sum += xp;
            xp *= x;
        }
        t[0] += y;
        t[1] += x * y;
        t[2] += x * x * y;
    }
    // Rows ordered for unknowns [a, b, c].
    let matrix = [
        [s[4], s[3], s[2], t[2]],
        [s[3], s[2], s[1], t[1]],
        [s[2], s[1], s[0], t[0]],
    ];
    let [a, b, c] = solve3(matrix)?;
    let extremum = if a < -CONCAVITY_EPS {
        let x = -b / (2.0 * a);
        let y = c - b * b / (4.0 * a);
        Some((x, y))
    } else {
        None
    };
    Some(QuadFit { a, b, c, extremum })
}

/// Gaussian elimination with partial pivoting on a 3x4 augmented matrix.
fn solve3(mut m: [[f64; 4]; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let pivot = (col..3).max_by(|&i, &j| {
            m[i][col]
                .abs()
                .partial_cmp(&m[j][col].abs())
                .unwrap_or(std::cmp::Ordering::Equal)
        })?;
        if m[pivot][col].abs() < 1e-12 {
            return None;
        }
        m.swap(col, pivot);
        let pivot_row = m[col];
        for (row, row_values) in m.iter_mut().enumerate() {
            if row == col {
                continue;
            }
            let factor = row_values[col] / pivot_row[col];
            for (k, cell) in row_values.iter_mut().enumerate().skip(col) {
                *cell -= factor * pivot_row[k];
            }
        }
    }
    Some([m[0][3] / m[0][0], m[1][3] / m[1][1], m[2][3] / m[2][2]])
}

/// CSV with a header and one row per sweep point.
pub fn sweep_csv(result: &SweepResult) -> String {
    let mut out = String::from("n_shots,p,r,f1\n");
    for point in &result.points {
        out.push_str(&format!(
            "{},{:.2},{:.2},{:.2}\n",
            point.n_shots, point.p, point.r, point.f1
        ));
    }
    out
}

/// A small static line chart: measured F1 points, the fitted curve, and a
/// dashed marker at the fitted extremum.
pub fn sweep_svg(result: &SweepResult, title: &str) -> String {
    const W: f64 = 640.0;
    const H: f64 = 400.0;
    const ML: f64 = 56.0; // left margin
    const MR: f64 = 20.0;
    const MT: f64 = 36.0;
    const MB: f64 = 44.0;

    let xs: Vec<f64> = result.points.iter().map(|p| p.n_shots as f64).collect();
    let x_min = xs.iter().copied().fold(f64::INFINITY, f64::min).min(1.0);
    let x_max = xs.iter().copied().fold(1.0, f64::max);
    let x_span = (x_max - x_min).max(1.0);
    let sx = move |x: f64| ML + (x - x_min) / x_span * (W - ML - MR);
    let sy = move |y: f64| H - MB - (y.clamp(0.0, 100.0) / 100.0) * (H - MT - MB);

    let mut svg = String::new();
    svg.push_str(&format!(
        "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">\n"
    ));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"22\" font-family=\"sans-serif\" font-size=\"14\" text-anchor=\"middle\">{}</text>\n",
        W / 2.0,
        xml_escape(title)
    ));
    // axes
    svg.push_str(&format!(
        "<line x1=\"{ML}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n",
        H - MB,
        W - MR,
        H - MB
    ));
    svg.push_str(&format!(
        "<line x1=\"{ML}\" y1=\"{MT}\" x2=\"{ML}\" y2=\"{}\" stroke=\"black\"/>\n",
        H - MB
    ));
    // y ticks every 20 points
    for tick in (0..=5).map(|i| i as f64 * 20.0) {
        let y = sy(tick);
        svg.push_str(&format!(
            "<line x1=\"{}\" y1=\"{y}\" x2=\"{ML}\" y2=\"{y}\" stroke=\"black\"/>\n",
            ML - 4.0
        ));
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">{tick}</text>\n",
            ML - 8.0,
            y + 4.0
        ));
    }
    // x ticks at every measured n
    for point in &result.points {
        let x = sx(point.n_shots as f64);
        svg.push_str(&format!(
            "<line x1=\"{x}\" y1=\"{}\" x2=\"{x}\" y2=\"{}\" stroke=\"black\"/>\n",
            H - MB,
            H - MB + 4.0
        ));
        svg.push_str(&format!(
            "<text x=\"{x}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">{}</text>\n",
            H - MB + 16.0,
            point.n_shots
        ));
    }
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">shots (n)</text>\n",
        (ML + W - MR) / 2.0,
        H - 10.0
    ));
    svg.push_str(&format!(
        "<text x=\"14\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 14 {})\">F1 (%)</text>\n",
        (MT + H - MB) / 2.0,
        (MT + H - MB) / 2.0
    ));

    // measured polyline + markers
    if !result.points.is_empty() {
        let path: Vec<String> = result
            .points
            .iter()
            .map(|p| format!("{:.2},{:.2}", sx(p.n_shots as f64), sy(p.f1)))
            .collect();
        svg.push_str(&format!(
            "<polyline points=\"{}\" fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"2\"/>\n",
            path.join(" ")
        ));
        for p in &result.points {
            svg.push_str(&format!(
                "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"#1f77b4\"/>\n",
                sx(p.n_shots as f64),
                sy(p.f1)
            ));
        }
    }

    // fitted curve + extremum marker
    if let Some(fit) = &result.fit {
        let mut samples = Vec::new();
        let steps = 100;
        for i in 0..=steps {
            let x = x_min + x_span * i as f64 / steps as f64;
            let y = fit.a * x * x + fit.b * x + fit.c;
            samples.push(format!("{:.2},{:.2}", sx(x), sy(y)));
        }
        svg.push_str(&format!(
            "<polyline points=\"{}\" fill=\"none\" stroke=\"#d62728\" stroke-width=\"1.5\" stroke-dasharray=\"6 3\"/>\n",
            samples.join(" ")
        ));
        if let Some((ex, ey)) = fit.extremum {
            if ex >= x_min && ex <= x_max {
                svg.push_str(&format!(
                    "<line x1=\"{:.2}\" y1=\"{MT}\" x2=\"{:.2}\" y2=\"{}\" stroke=\"#2ca02c\" stroke-dasharray=\"4 4\"/>\n",
                    sx(ex),
                    sx(ex),
                    H - MB
                ));
                svg.push_str(&format!(
                    "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"4\" fill=\"none\" stroke=\"#2ca02c\" stroke-width=\"2\"/>\n",
                    sx(ex),
                    sy(ey)
                ));
                svg.push_str(&format!(
                    "<text x=\"{:.2}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"11\" fill=\"#2ca02c\">n*={ex:.2}, F1={ey:.2}</text>\n",
                    sx(ex) + 6.0,
                    sy(ey) - 6.0
                ));
            }
        }
    }

    svg.push_str("</svg>\n");
    svg
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_parabola_is_recovered() {
        // y = -(x - 15)^2 + 90 = -x^2 + 30x - 135
        let points: Vec<(f64, f64)> = (1..=20)
            .map(|n| {
                let x = n as f64;
                (x, -(x - 15.0) * (x - 15.0) + 90.0)
            })
            .collect();
        let fit = quad_fit(&points).unwrap();
        assert!((fit.a - (-1.0)).abs() < 1e-6, "a = {}", fit.a);
        assert!((fit.b - 30.0).abs() < 1e-6, "b = {}", fit.b);
        assert!((fit.c - (-135.0)).abs() < 1e-6, "c = {}", fit.c);
        let (x, y) = fit.extremum.unwrap();
        assert!((x - 15.0).abs() < 1e-6);
        assert!((y - 90.0).abs() < 1e-6);
    }

    #[test]
    fn two_points_produce_no_fit() {
        assert!(quad_fit(&[(1.0, 2.0), (2.0, 3.0)]).is_none());
    }

    #[test]
    fn constant_points_have_no_extremum() {
        let points: Vec<(f64, f64)> = (1..=10).map(|n| (n as f64, 50.0)).collect();
        let fit = quad_fit(&points).unwrap();
        assert!(fit.a.abs() < 1e-9);
        assert!(fit.extremum.is_none());
    }

    #[test]
    fn convex_fit_has_no_reported_extremum() {
        let points: Vec<(f64, f64)> = (1..=10)
            .map(|n| {
                let x = n as f64;
                (x, x * x)
            })
            .collect();
        let fit = quad_fit(&points).unwrap();
        assert!(fit.a > 0.0);
        assert!(fit.extremum.is_none());
    }

    fn sample_result() -> SweepResult {
        let points: Vec<SweepPoint> = (1..=5)
            .map(|n| SweepPoint {
                n_shots: n,
                p: 50.0 + n as f64,
                r: 40.0 + n as f64,
                f1: 44.0 + n as f64,
            })
            .collect();
        let fit = quad_fit(
            &points
                .iter()
                .map(|p| (p.n_shots as f64, p.f1))
                .collect::<Vec<_>>(),
        );
        SweepResult { points, fit }
    }

    #[test]
    fn csv_has_header_and_one_row_per_point() {
        let csv = sweep_csv(&sample_result());
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 6);
        assert_eq!(lines[0], "n_shots,p,r,f1");
        assert!(lines[1].starts_with("1,51.00,41.00,45.00"));
    }

    #[test]
    fn svg_is_well_formed_enough() {
        let svg = sweep_svg(&sample_result(), "fixture ASTE");
        assert!(svg.starts_with("<?xml"));
        assert!(svg.contains("<svg "));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert!(svg.contains("<polyline"));
    }
}
