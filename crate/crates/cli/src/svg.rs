//! Static route maps. Map units are kilometres with north up.

use std::fmt::Write;

use gadop_core::FirstStagePlan;

use crate::report::Layout;

const TRUCK_COLORS: [&str; 4] = ["#1f77b4", "#2ca02c", "#9467bd", "#8c564b"];
const DRONE_COLORS: [&str; 4] = ["#d62728", "#ff7f0e", "#e377c2", "#17becf"];

fn fmt(v: f64) -> String {
    let s = format!("{v:.4}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".into() } else { s.into() }
}

/// Distinct trip ranges of the drones the plan reserves.
fn range_radii(plan: &FirstStagePlan, layout: &Layout) -> Vec<f64> {
    let mut radii: Vec<f64> = plan
        .drone_used
        .iter()
        .zip(&layout.drone_trip_km)
        .filter(|(used, _)| **used)
        .map(|(_, e)| e / 2.0)
        .collect();
    radii.sort_by(f64::total_cmp);
    radii.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
    radii
}

/// Depot, customers, one polyline per truck tour, a line per drone delivery and
/// a circle of half the trip range around the depot for each reserved drone range.
pub fn render_svg(plan: &FirstStagePlan, layout: &Layout) -> String {
    let pts: Vec<(f64, f64)> = layout.coordinates.iter().map(|c| (c[0], -c[1])).collect();
    let depot = pts[0];
    let radii = range_radii(plan, layout);

    let (mut x0, mut y0, mut x1, mut y1) = (depot.0, depot.1, depot.0, depot.1);
    for &(x, y) in &pts {
        x0 = x0.min(x);
        y0 = y0.min(y);
        x1 = x1.max(x);
        y1 = y1.max(y);
    }
    for r in &radii {
        x0 = x0.min(depot.0 - r);
        y0 = y0.min(depot.1 - r);
        x1 = x1.max(depot.0 + r);
        y1 = y1.max(depot.1 + r);
    }
    let extent = (x1 - x0).max(y1 - y0).max(1.0);
    let pad = extent * 0.05;
    let stroke = extent / 400.0;
    let dot = extent / 120.0;

    let mut s = String::new();
    writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#).unwrap();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="800" height="{}" viewBox="{} {} {} {}">"#,
        (800.0 * (y1 - y0 + 2.0 * pad) / (x1 - x0 + 2.0 * pad)).round(),
        fmt(x0 - pad),
        fmt(y0 - pad),
        fmt(x1 - x0 + 2.0 * pad),
        fmt(y1 - y0 + 2.0 * pad)
    )
    .unwrap();
    writeln!(s, r##"<rect x="{}" y="{}" width="{}" height="{}" fill="#ffffff"/>"##, fmt(x0 - pad), fmt(y0 - pad), fmt(x1 - x0 + 2.0 * pad), fmt(y1 - y0 + 2.0 * pad)).unwrap();

    for r in &radii {
        writeln!(
            s,
            r##"<circle class="range" cx="{}" cy="{}" r="{}" fill="none" stroke="#999999" stroke-width="{}" stroke-dasharray="{} {}"/>"##,
            fmt(depot.0),
            fmt(depot.1),
            fmt(*r),
            fmt(stroke),
            fmt(4.0 * stroke),
            fmt(3.0 * stroke)
        )
        .unwrap();
    }

    for (t, route) in plan.truck_routes.iter().enumerate() {
        if !plan.truck_used[t] || route.is_empty() {
            continue;
        }
        let stops = std::iter::once(0).chain(route.iter().copied()).chain(std::iter::once(0));
        let points: Vec<String> = stops.map(|i| format!("{},{}", fmt(pts[i].0), fmt(pts[i].1))).collect();
        writeln!(
            s,
            r#"<polyline class="truck" data-truck="{}" points="{}" fill="none" stroke="{}" stroke-width="{}"/>"#,
            t + 1,
            points.join(" "),
            TRUCK_COLORS[t % TRUCK_COLORS.len()],
            fmt(2.0 * stroke)
        )
        .unwrap();
    }

    for (d, order) in plan.drone_orders.iter().enumerate() {
        if !plan.drone_used[d] {
            continue;
        }
        for &i in order {
            writeln!(
                s,
                r#"<line class="drone" data-drone="{}" x1="{}" y1="{}" x2="{}" y2="{}" stroke="{}" stroke-width="{}" stroke-dasharray="{} {}"/>"#,
                d + 1,
                fmt(depot.0),
                fmt(depot.1),
                fmt(pts[i].0),
                fmt(pts[i].1),
                DRONE_COLORS[d % DRONE_COLORS.len()],
                fmt(1.5 * stroke),
                fmt(2.0 * stroke),
                fmt(2.0 * stroke)
            )
            .unwrap();
        }
    }

    for (i, p) in pts.iter().enumerate().skip(1) {
        writeln!(s, r##"<circle class="customer" cx="{}" cy="{}" r="{}" fill="#333333"/>"##, fmt(p.0), fmt(p.1), fmt(dot)).unwrap();
        writeln!(
            s,
            r##"<text x="{}" y="{}" font-size="{}" font-family="sans-serif" fill="#333333">{}</text>"##,
            fmt(p.0 + dot),
            fmt(p.1 - dot),
            fmt(3.0 * dot),
            i
        )
        .unwrap();
    }
    writeln!(
        s,
        r##"<rect class="depot" x="{}" y="{}" width="{}" height="{}" fill="#000000"/>"##,
        fmt(depot.0 - 1.5 * dot),
        fmt(depot.1 - 1.5 * dot),
        fmt(3.0 * dot),
        fmt(3.0 * dot)
    )
    .unwrap();
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn layout() -> Layout {
        Layout { coordinates: vec![[0.0, 0.0], [3.0, 4.0], [-2.0, 1.0]], drone_trip_km: vec![15.0, 15.0] }
    }

    #[test]
    fn number_formatting() {
        assert_eq!(fmt(1.5), "1.5");
        assert_eq!(fmt(2.0), "2");
        assert_eq!(fmt(-0.00001), "0");
    }

    #[test]
    fn shared_range_drawn_once() {
        let plan = FirstStagePlan::from_assignments(vec![vec![]], vec![vec![1], vec![2]]);
        let svg = render_svg(&plan, &layout());
        assert_eq!(svg.matches(r#"class="range""#).count(), 1);
        assert_eq!(svg.matches(r#"class="drone""#).count(), 2);
        assert!(svg.contains(r#"r="7.5""#));
    }

    #[test]
    fn north_is_up() {
        let plan = FirstStagePlan::empty(1, 2);
        let svg = render_svg(&plan, &layout());
        assert!(svg.contains(r#"cx="3" cy="-4""#));
    }
}
