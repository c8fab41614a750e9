//! Grouped bar chart of consistency rates as a standalone SVG.

use std::fmt::Write as _;

use cadastre_core::consistency::{ConsistencyReport, GroupStats};

const SERIES: [(&str, &str); 5] = [
    ("EC-3", "#1f4e79"),
    ("EC-2", "#5b9bd5"),
    ("C3-3", "#385723"),
    ("C3-2", "#70ad47"),
    ("C2-2", "#c5e0b4"),
];

fn rates(g: &GroupStats) -> [f64; 5] {
    let n = g.questions.max(1) as f64;
    [
        g.ec3_rate,
        g.ec2_rate,
        g.classes.c33 as f64 / n,
        g.classes.c32 as f64 / n,
        g.classes.c22 as f64 / n,
    ]
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

pub fn render_svg(report: &ConsistencyReport) -> String {
    let groups: Vec<&GroupStats> = report
        .overall
        .iter()
        .chain(&report.by_category)
        .chain(&report.by_answer_type)
        .collect();

    let bar = 14.0;
    let gap = 24.0;
    let group_w = bar * SERIES.len() as f64 + gap;
    let (left, top, plot_h) = (50.0, 40.0, 240.0);
    let width = left + group_w * groups.len().max(1) as f64 + 20.0;
    let height = top + plot_h + 90.0;
    let base = top + plot_h;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" font-family="sans-serif" font-size="11">"#
    );
    let [a, b, c] = report.seeds;
    let _ = writeln!(s, r#"<text x="{left}" y="20" font-size="13">Consistency rates, seeds {a}, {b}, {c}</text>"#);
    for tick in 0..=4 {
        let v = tick as f64 / 4.0;
        let y = base - v * plot_h;
        let _ = writeln!(
            s,
            r##"<line x1="{left}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="#ddd"/><text x="{:.1}" y="{:.1}" text-anchor="end">{v:.2}</text>"##,
            width - 20.0,
            left - 6.0,
            y + 4.0
        );
    }
    for (gi, g) in groups.iter().enumerate() {
        let x0 = left + gap / 2.0 + gi as f64 * group_w;
        for (si, r) in rates(g).iter().enumerate() {
            let h = r * plot_h;
            let _ = writeln!(
                s,
                r#"<rect x="{:.1}" y="{:.1}" width="{bar}" height="{h:.1}" fill="{}"><title>{} {}: {r:.3}</title></rect>"#,
                x0 + si as f64 * bar,
                base - h,
                SERIES[si].1,
                escape(&g.group),
                SERIES[si].0
            );
        }
        let cx = x0 + bar * SERIES.len() as f64 / 2.0;
        let _ = writeln!(
            s,
            r#"<text x="{cx:.1}" y="{:.1}" text-anchor="end" transform="rotate(-35 {cx:.1} {:.1})">{} (n={})</text>"#,
            base + 14.0,
            base + 14.0,
            escape(&g.group),
            g.questions
        );
    }
    for (si, (name, color)) in SERIES.iter().enumerate() {
        let x = left + si as f64 * 70.0;
        let y = height - 14.0;
        let _ = writeln!(
            s,
            r#"<rect x="{x:.1}" y="{:.1}" width="10" height="10" fill="{color}"/><text x="{:.1}" y="{y:.1}">{name}</text>"#,
            y - 9.0,
            x + 14.0
        );
    }
    s.push_str("</svg>\n");
    s
}
