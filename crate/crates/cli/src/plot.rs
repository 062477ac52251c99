//! SVG rendering of 2-D projections of reach sets.
//!
//! Each member is drawn as the polygon cut out by its support lines in 64
//! equally spaced directions. This polygon contains the true projection.

use std::fmt::Write as _;

use czreach_core::{ConstrainedZonotope, ReachResult, UnsafeSet};
use nalgebra::DVector;

use crate::error::CliError;
use crate::sampling::Trajectories;

pub const DIRECTIONS: usize = 64;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 540.0;
const MARGIN: f64 = 48.0;

/// Outer polygon of the projection of `z` onto coordinates `(i, j)`.
pub fn support_polygon(z: &ConstrainedZonotope, i: usize, j: usize) -> czreach_core::Result<Vec<(f64, f64)>> {
    let half = DIRECTIONS / 2;
    let mut normals = vec![(0.0, 0.0); DIRECTIONS];
    let mut values = vec![0.0; DIRECTIONS];
    for k in 0..half {
        let theta = std::f64::consts::PI * k as f64 / half as f64;
        let (s, c) = theta.sin_cos();
        let mut d = DVector::zeros(z.dim());
        d[i] = c;
        d[j] = s;
        let range = z.support(&d)?;
        normals[k] = (c, s);
        values[k] = range.hi;
        normals[k + half] = (-c, -s);
        values[k + half] = -range.lo;
    }
    let mut pts = Vec::with_capacity(DIRECTIONS);
    for k in 0..DIRECTIONS {
        let (a, b) = (k, (k + 1) % DIRECTIONS);
        let (n1, n2) = (normals[a], normals[b]);
        let det = n1.0 * n2.1 - n1.1 * n2.0;
        let x = (values[a] * n2.1 - values[b] * n1.1) / det;
        let y = (n1.0 * values[b] - n2.0 * values[a]) / det;
        pts.push((x, y));
    }
    Ok(pts)
}

struct Frame {
    lo: (f64, f64),
    hi: (f64, f64),
}

impl Frame {
    fn map(&self, p: (f64, f64)) -> (f64, f64) {
        let sx = (WIDTH - 2.0 * MARGIN) / (self.hi.0 - self.lo.0);
        let sy = (HEIGHT - 2.0 * MARGIN) / (self.hi.1 - self.lo.1);
        (MARGIN + (p.0 - self.lo.0) * sx, HEIGHT - MARGIN - (p.1 - self.lo.1) * sy)
    }
}

fn polygon_path(frame: &Frame, pts: &[(f64, f64)]) -> String {
    let mut s = String::new();
    for (k, p) in pts.iter().enumerate() {
        let (x, y) = frame.map(*p);
        let _ = write!(s, "{}{x:.2},{y:.2} ", if k == 0 { "M" } else { "L" });
    }
    s.push('Z');
    s
}

/// Parses `"x1,x2"` (1-based) into 0-based coordinates.
pub fn parse_dims(spec: &str, dim: usize) -> Result<(usize, usize), CliError> {
    let parse_one = |s: &str| -> Result<usize, CliError> {
        let k: usize = s
            .trim()
            .trim_start_matches('x')
            .parse()
            .map_err(|_| CliError::Usage(format!("bad plot dimension `{s}`; expected e.g. x1,x2")))?;
        if k == 0 || k > dim {
            return Err(CliError::Usage(format!("plot dimension `{s}` outside 1..={dim}")));
        }
        Ok(k - 1)
    };
    let parts: Vec<&str> = spec.split(',').collect();
    if parts.len() != 2 {
        return Err(CliError::Usage(format!("plot dimensions `{spec}` must name two coordinates")));
    }
    let (i, j) = (parse_one(parts[0])?, parse_one(parts[1])?);
    if i == j {
        return Err(CliError::Usage("plot dimensions must differ".into()));
    }
    Ok((i, j))
}

/// Renders every step of `reach` projected onto `(i, j)`.
pub fn render_svg(
    reach: &ReachResult,
    dims: (usize, usize),
    unsafe_sets: &[UnsafeSet],
    samples: Option<&Trajectories>,
) -> Result<String, CliError> {
    let n = reach.dim();
    if n < 2 {
        return Err(CliError::Dimension(n));
    }
    let (i, j) = dims;
    if i >= n || j >= n || i == j {
        return Err(CliError::Usage(format!("plot dimensions ({}, {}) invalid for dimension {n}", i + 1, j + 1)));
    }
    let core = |e| CliError::Usage(format!("plot: {e}"));

    let mut steps: Vec<Vec<Vec<(f64, f64)>>> = Vec::with_capacity(reach.steps.len());
    for s in &reach.steps {
        let mut polys = Vec::with_capacity(s.len());
        for m in s.members() {
            match support_polygon(m, i, j) {
                Ok(p) => polys.push(p),
                Err(czreach_core::Error::EmptySet) => {}
                Err(e) => return Err(core(e)),
            }
        }
        steps.push(polys);
    }
    let obstacles: Vec<Vec<(f64, f64)>> =
        unsafe_sets.iter().map(|o| support_polygon(o.region(), i, j)).collect::<Result<_, _>>().map_err(core)?;

    let mut lo = (f64::INFINITY, f64::INFINITY);
    let mut hi = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    let mut grow = |p: &(f64, f64)| {
        lo = (lo.0.min(p.0), lo.1.min(p.1));
        hi = (hi.0.max(p.0), hi.1.max(p.1));
    };
    steps.iter().flatten().flatten().for_each(&mut grow);
    obstacles.iter().flatten().for_each(&mut grow);
    if let Some(tr) = samples {
        tr.states.iter().flatten().for_each(|x| grow(&(x[i], x[j])));
    }
    if !lo.0.is_finite() {
        lo = (-1.0, -1.0);
        hi = (1.0, 1.0);
    }
    let pad = |a: f64, b: f64| {
        let w = (b - a).max(1e-9);
        (a - 0.05 * w, b + 0.05 * w)
    };
    let (x0, x1) = pad(lo.0, hi.0);
    let (y0, y1) = pad(lo.1, hi.1);
    let frame = Frame { lo: (x0, y0), hi: (x1, y1) };

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let (bl, tr) = (frame.map((x0, y0)), frame.map((x1, y1)));
    let _ = writeln!(
        svg,
        r##"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="#888"/>"##,
        bl.0,
        tr.1,
        tr.0 - bl.0,
        bl.1 - tr.1
    );
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" font-size="12" font-family="sans-serif">x{} in [{x0:.3}, {x1:.3}], x{} in [{y0:.3}, {y1:.3}]</text>"#,
        MARGIN,
        MARGIN - 12.0,
        i + 1,
        j + 1
    );
    for (k, poly) in obstacles.iter().enumerate() {
        let _ = writeln!(
            svg,
            r#"<path class="unsafe" d="{}" fill="magenta" fill-opacity="0.35" stroke="magenta"><title>{}</title></path>"#,
            polygon_path(&frame, poly),
            unsafe_sets[k].label()
        );
    }
    for (t, polys) in steps.iter().enumerate() {
        if polys.is_empty() {
            let _ = writeln!(
                svg,
                r#"<text class="skipped" x="{:.2}" y="{:.2}" font-size="11" font-family="sans-serif">t={t}: no members</text>"#,
                WIDTH - MARGIN - 120.0,
                MARGIN + 14.0 * t as f64
            );
            continue;
        }
        let style = if t == 0 {
            r#"fill="cyan" fill-opacity="0.5" stroke="teal""#
        } else {
            r#"fill="none" stroke="blue" stroke-width="1.2""#
        };
        let _ = writeln!(svg, r#"<g class="step" data-t="{t}">"#);
        for p in polys {
            let _ = writeln!(svg, r#"  <path d="{}" {style}/>"#, polygon_path(&frame, p));
        }
        let _ = writeln!(svg, "</g>");
    }
    if let Some(tr) = samples {
        let _ = writeln!(svg, r#"<g class="samples" fill="red">"#);
        for x in tr.states.iter().flatten() {
            let (px, py) = frame.map((x[i], x[j]));
            let _ = writeln!(svg, r#"  <circle cx="{px:.2}" cy="{py:.2}" r="1"/>"#);
        }
        let _ = writeln!(svg, "</g>");
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}
