//! Minimal SVG box plots of MAE distributions.

use std::fmt::Write;

use crate::aggregate::quantile_sorted;

const COLORS: [&str; 6] = [
    "#4c72b0", "#dd8452", "#55a868", "#c44e52", "#8172b3", "#937860",
];

/// `(group label, [(series label, values)])`.
pub type PlotGroup = (String, Vec<(String, Vec<f64>)>);

/// One box per (group, series); boxes show quartiles and whiskers at
/// min/max.
pub fn box_plot_svg(title: &str, groups: &[PlotGroup]) -> String {
    let series: Vec<&str> = groups
        .first()
        .map(|(_, s)| s.iter().map(|(n, _)| n.as_str()).collect())
        .unwrap_or_default();
    let y_max = groups
        .iter()
        .flat_map(|(_, s)| s.iter().flat_map(|(_, v)| v.iter().copied()))
        .fold(0.0f64, f64::max)
        .max(1e-9)
        * 1.05;
    let (left, top, plot_h, box_w, gap) = (60.0, 40.0, 300.0, 18.0, 24.0);
    let group_w = series.len().max(1) as f64 * (box_w + 4.0) + gap;
    let width = left + groups.len() as f64 * group_w + 140.0;
    let height = top + plot_h + 60.0;
    let y = |v: f64| top + plot_h * (1.0 - v / y_max);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{left}" y="20" font-size="14">{}</text>"#,
        escape(title)
    );
    let _ = writeln!(
        s,
        r#"<line x1="{left}" y1="{top}" x2="{left}" y2="{:.1}" stroke="black"/>"#,
        top + plot_h
    );
    for k in 0..=4 {
        let v = y_max * k as f64 / 4.0;
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{v:.2}</text>"#,
            left - 4.0,
            y(v) + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="14" y="{:.1}" transform="rotate(-90 14 {:.1})">MAE (kg)</text>"#,
        top + plot_h / 2.0,
        top + plot_h / 2.0
    );
    for (g, (label, boxes)) in groups.iter().enumerate() {
        let gx = left + gap / 2.0 + g as f64 * group_w;
        for (k, (_, values)) in boxes.iter().enumerate() {
            if values.is_empty() {
                continue;
            }
            let mut v = values.clone();
            v.sort_by(f64::total_cmp);
            let (q1, med, q3) = (
                quantile_sorted(&v, 0.25),
                quantile_sorted(&v, 0.5),
                quantile_sorted(&v, 0.75),
            );
            let x = gx + k as f64 * (box_w + 4.0);
            let cx = x + box_w / 2.0;
            let color = COLORS[k % COLORS.len()];
            let _ = writeln!(
                s,
                r#"<line x1="{cx:.1}" y1="{:.1}" x2="{cx:.1}" y2="{:.1}" stroke="black"/>"#,
                y(v[0]),
                y(v[v.len() - 1])
            );
            let _ = writeln!(
                s,
                r#"<rect x="{x:.1}" y="{:.1}" width="{box_w}" height="{:.1}" fill="{color}" stroke="black"/>"#,
                y(q3),
                (y(q1) - y(q3)).max(0.5)
            );
            let _ = writeln!(
                s,
                r#"<line x1="{x:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="black" stroke-width="2"/>"#,
                y(med),
                x + box_w,
                y(med)
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            gx + (group_w - gap) / 2.0,
            top + plot_h + 18.0,
            escape(label)
        );
    }
    for (k, name) in series.iter().enumerate() {
        let lx = width - 120.0;
        let ly = top + 16.0 * k as f64;
        let _ = writeln!(
            s,
            r#"<rect x="{lx:.1}" y="{ly:.1}" width="10" height="10" fill="{}"/><text x="{:.1}" y="{:.1}">{}</text>"#,
            COLORS[k % COLORS.len()],
            lx + 14.0,
            ly + 9.0,
            escape(name)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}
