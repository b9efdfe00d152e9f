use std::fmt::Write;

use super::TrainLogRow;

/// Episodes averaged by the reward plots.
pub const SMOOTHING_WINDOW: usize = 100;

/// Trailing moving average; the first `window - 1` points average what is
/// available so far.
pub fn moving_average(xs: &[f64], window: usize) -> Vec<f64> {
    assert!(window > 0, "window must be positive");
    let mut out = Vec::with_capacity(xs.len());
    let mut sum = 0.0;
    for (i, x) in xs.iter().enumerate() {
        sum += x;
        if i >= window {
            sum -= xs[i - window];
        }
        out.push(sum / (i + 1).min(window) as f64);
    }
    out
}

const PANEL_W: f64 = 460.0;
const PANEL_H: f64 = 320.0;
const MARGIN_L: f64 = 64.0;
const MARGIN_B: f64 = 48.0;
const MARGIN_T: f64 = 36.0;
const MARGIN_R: f64 = 16.0;

fn range(v: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = v.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
    if !lo.is_finite() {
        (0.0, 1.0)
    } else if hi - lo < 1e-12 {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

fn tick_label(v: f64) -> String {
    if v != 0.0 && (v.abs() >= 1e5 || v.abs() < 1e-2) {
        format!("{v:.1e}")
    } else if v.fract() == 0.0 {
        format!("{v:.0}")
    } else {
        format!("{v:.2}")
    }
}

fn panel(svg: &mut String, x0: f64, xs: &[f64], ys: &[f64], x_label: &str, y_label: &str) {
    let (xl, xh) = range(xs.iter().copied());
    let (yl, yh) = range(ys.iter().copied());
    let w = PANEL_W - MARGIN_L - MARGIN_R;
    let h = PANEL_H - MARGIN_T - MARGIN_B;
    let px = |x: f64| x0 + MARGIN_L + (x - xl) / (xh - xl) * w;
    let py = |y: f64| MARGIN_T + h - (y - yl) / (yh - yl) * h;
    let _ = writeln!(
        svg,
        r##"<rect x="{:.1}" y="{MARGIN_T}" width="{w}" height="{h}" fill="none" stroke="#444"/>"##,
        x0 + MARGIN_L
    );
    for k in 0..=4 {
        let f = k as f64 / 4.0;
        let (xv, yv) = (xl + f * (xh - xl), yl + f * (yh - yl));
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" font-size="11" text-anchor="middle">{}</text>"#,
            px(xv),
            MARGIN_T + h + 16.0,
            tick_label(xv)
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" font-size="11" text-anchor="end">{}</text>"#,
            x0 + MARGIN_L - 6.0,
            py(yv) + 4.0,
            tick_label(yv)
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" font-size="12" text-anchor="middle">{x_label}</text>"#,
        x0 + MARGIN_L + w / 2.0,
        PANEL_H - 10.0
    );
    let (ly, lx) = (MARGIN_T + h / 2.0, x0 + 16.0);
    let _ = writeln!(
        svg,
        r#"<text x="{lx:.1}" y="{ly:.1}" font-size="12" text-anchor="middle" transform="rotate(-90 {lx:.1} {ly:.1})">{y_label}</text>"#
    );
    let points: Vec<String> = xs
        .iter()
        .zip(ys)
        .map(|(&x, &y)| format!("{:.2},{:.2}", px(x), py(y)))
        .collect();
    let _ = writeln!(
        svg,
        r##"<polyline fill="none" stroke="#1f77b4" stroke-width="1.5" points="{}"/>"##,
        points.join(" ")
    );
}

/// Smoothed episode reward against environment steps and wall time, drawn
/// from the rows of a training log.
pub fn reward_svg(rows: &[TrainLogRow], title: &str) -> String {
    let smooth = moving_average(&rows.iter().map(|r| r.episode_reward).collect::<Vec<_>>(), SMOOTHING_WINDOW);
    let steps: Vec<f64> = rows.iter().map(|r| r.global_step as f64).collect();
    let wall: Vec<f64> = rows.iter().map(|r| r.wall_s).collect();
    let y_label = format!("episode reward (moving average, {SMOOTHING_WINDOW} episodes)");
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{PANEL_H}" font-family="sans-serif">"#,
        2.0 * PANEL_W
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{PANEL_W}" y="20" font-size="14" text-anchor="middle">{}</text>"#,
        escape(title)
    );
    panel(&mut svg, 0.0, &steps, &smooth, "environment steps", &y_label);
    panel(&mut svg, PANEL_W, &wall, &smooth, "wall time [s]", &y_label);
    svg.push_str("</svg>\n");
    svg
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn moving_average_cases() {
        assert_eq!(moving_average(&[1.0, 3.0, 5.0, 7.0], 2), vec![1.0, 2.0, 4.0, 6.0]);
        assert_eq!(moving_average(&[], 3), Vec::<f64>::new());
        assert_eq!(moving_average(&[2.0, 4.0], 10), vec![2.0, 3.0]);
    }

    proptest! {
        #[test]
        fn constant_series_is_a_fixed_point(c in -10.0..10.0f64, n in 1usize..300, w in 1usize..150) {
            for m in moving_average(&vec![c; n], w) {
                prop_assert!((m - c).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn svg_is_well_formed() {
        let rows: Vec<TrainLogRow> = (0..5)
            .map(|i| TrainLogRow {
                run_id: "x".into(),
                algorithm: "PPO".into(),
                strategy: "incremental".into(),
                case: "bandit".into(),
                n_envs: 1,
                seed: 0,
                global_step: i + 1,
                episode: i + 1,
                episode_reward: i as f64,
                steps_per_episode: 1,
                wall_s: 0.0,
            })
            .collect();
        let svg = reward_svg(&rows, "a<b");
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains("a&lt;b"));
        assert!(!svg.contains("NaN"));
        assert!(reward_svg(&[], "empty").contains("</svg>"));
    }
}
