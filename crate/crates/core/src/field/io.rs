//! Plain-text grid and layout files.
//!
//! Grid files:
//!
//! ```text
//! # ionjunction-grid v1
//! dims 81 81 41
//! origin -100 -100 -24
//! spacing 2.5 2.5 1.2
//! electrodes rf dc_c0 ...
//! electrode rf
//! <one line per (i, j) column, nz values, z fastest>
//! electrode dc_c0
//! ...
//! ```
//!
//! Layout files list rectangles per electrode; edges may be `inf` or `-inf`:
//!
//! ```text
//! # ionjunction-layout v1
//! plane_half_separation 25
//! image_order 20
//! electrode rf bottom rf
//! rect -1500 1500 40 129.6
//! rect -1500 1500 -129.6 -40
//! electrode dc_c0 bottom control
//! ...
//! ```
//!
//! Numbers use Rust's shortest round-trip formatting, so reading back a
//! written file reproduces every value bit for bit.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use super::grid::{FieldGrid, GridSpec};
use super::layout::{Electrode, ElectrodeLayout, Layer, Rect, Role};
use crate::{Error, Result, Vec3};

pub const GRID_FORMAT_TAG: &str = "# ionjunction-grid v1";
pub const LAYOUT_FORMAT_TAG: &str = "# ionjunction-layout v1";

pub fn write_grid(grid: &FieldGrid, mut out: impl Write) -> Result<()> {
    let spec = grid.spec();
    for name in grid.names() {
        if name.is_empty() || name.chars().any(char::is_whitespace) {
            return Err(Error::InvalidArgument(format!("electrode name {name:?} cannot be written")));
        }
    }
    let [nx, ny, nz] = spec.dims;
    let mut text = String::new();
    writeln!(text, "{GRID_FORMAT_TAG}").unwrap();
    writeln!(text, "dims {nx} {ny} {nz}").unwrap();
    writeln!(text, "origin {:e} {:e} {:e}", spec.origin.x, spec.origin.y, spec.origin.z).unwrap();
    writeln!(text, "spacing {:e} {:e} {:e}", spec.spacing.x, spec.spacing.y, spec.spacing.z).unwrap();
    writeln!(text, "electrodes {}", grid.names().join(" ")).unwrap();
    out.write_all(text.as_bytes())?;
    for (e, name) in grid.names().iter().enumerate() {
        text.clear();
        writeln!(text, "electrode {name}").unwrap();
        for column in grid.values(e).chunks(nz) {
            let mut first = true;
            for v in column {
                if !first {
                    text.push(' ');
                }
                first = false;
                write!(text, "{v:e}").unwrap();
            }
            text.push('\n');
        }
        out.write_all(text.as_bytes())?;
    }
    Ok(())
}

pub fn read_grid(input: impl BufRead) -> Result<FieldGrid> {
    let mut lines = input.lines().enumerate().map(|(i, l)| (i + 1, l));
    let mut next = |what: &str| -> Result<(usize, String)> {
        loop {
            match lines.next() {
                Some((_, Ok(l))) if l.trim().is_empty() => continue,
                Some((n, Ok(l))) => return Ok((n, l)),
                Some((_, Err(e))) => return Err(e.into()),
                None => return Err(Error::Parse { line: 0, message: format!("unexpected end of file, expected {what}") }),
            }
        }
    };

    let (n, tag) = next("format tag")?;
    if tag.trim() != GRID_FORMAT_TAG {
        return Err(Error::Parse { line: n, message: format!("expected {GRID_FORMAT_TAG:?}") });
    }
    let dims = keyed::<usize>(next("dims")?, "dims", 3)?;
    let origin = keyed::<f64>(next("origin")?, "origin", 3)?;
    let spacing = keyed::<f64>(next("spacing")?, "spacing", 3)?;
    let (n, line) = next("electrodes")?;
    let mut words = line.split_whitespace();
    if words.next() != Some("electrodes") {
        return Err(Error::Parse { line: n, message: "expected electrodes line".into() });
    }
    let names: Vec<String> = words.map(str::to_string).collect();

    let spec = GridSpec::new(
        Vec3::new(origin[0], origin[1], origin[2]),
        Vec3::new(spacing[0], spacing[1], spacing[2]),
        [dims[0], dims[1], dims[2]],
    )
    .map_err(|e| Error::Parse { line: n, message: e.to_string() })?;

    let mut electrodes = Vec::with_capacity(names.len());
    for name in &names {
        let (n, header) = next("electrode block")?;
        if header.split_whitespace().collect::<Vec<_>>() != ["electrode", name.as_str()] {
            return Err(Error::Parse { line: n, message: format!("expected block for electrode {name:?}") });
        }
        let mut values = Vec::with_capacity(spec.len());
        for _ in 0..dims[0] * dims[1] {
            let (n, row) = next("sample row")?;
            let before = values.len();
            for word in row.split_whitespace() {
                values.push(
                    word.parse::<f64>().map_err(|e| Error::Parse { line: n, message: format!("{word:?}: {e}") })?,
                );
            }
            if values.len() - before != dims[2] {
                return Err(Error::Parse { line: n, message: format!("expected {} values", dims[2]) });
            }
        }
        electrodes.push((name.clone(), values));
    }
    if let Ok((n, extra)) = next("end of file") {
        return Err(Error::Parse { line: n, message: format!("trailing content {extra:?}") });
    }
    FieldGrid::new(spec, electrodes)
}

pub fn write_layout(layout: &ElectrodeLayout, mut out: impl Write) -> Result<()> {
    let mut text = String::new();
    writeln!(text, "{LAYOUT_FORMAT_TAG}").unwrap();
    writeln!(text, "plane_half_separation {:e}", layout.plane_half_separation).unwrap();
    writeln!(text, "image_order {}", layout.image_order).unwrap();
    for e in &layout.electrodes {
        if e.name.is_empty() || e.name.chars().any(char::is_whitespace) {
            return Err(Error::InvalidArgument(format!("electrode name {:?} cannot be written", e.name)));
        }
        let layer = match e.layer {
            Layer::Bottom => "bottom",
            Layer::Top => "top",
        };
        let role = match e.role {
            Role::Rf => "rf",
            Role::Control => "control",
        };
        writeln!(text, "electrode {} {layer} {role}", e.name).unwrap();
        for r in &e.rects {
            writeln!(text, "rect {:e} {:e} {:e} {:e}", r.x0, r.x1, r.y0, r.y1).unwrap();
        }
    }
    out.write_all(text.as_bytes())?;
    Ok(())
}

pub fn read_layout(input: impl BufRead) -> Result<ElectrodeLayout> {
    let mut separation = None;
    let mut order = None;
    let mut electrodes: Vec<Electrode> = Vec::new();
    let mut tagged = false;
    for (i, line) in input.lines().enumerate() {
        let n = i + 1;
        let line = line?;
        let line = line.trim();
        if !tagged {
            if line != LAYOUT_FORMAT_TAG {
                return Err(Error::Parse { line: n, message: format!("expected {LAYOUT_FORMAT_TAG:?}") });
            }
            tagged = true;
            continue;
        }
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let words: Vec<&str> = line.split_whitespace().collect();
        let bad = |message: String| Error::Parse { line: n, message };
        let num = |w: &str| w.parse::<f64>().map_err(|e| bad(format!("{w:?}: {e}")));
        match words.as_slice() {
            ["plane_half_separation", v] => separation = Some(num(v)?),
            ["image_order", v] => order = Some(v.parse::<usize>().map_err(|e| bad(format!("{v:?}: {e}")))?),
            ["electrode", name, layer, role] => {
                let layer = match *layer {
                    "bottom" => Layer::Bottom,
                    "top" => Layer::Top,
                    other => return Err(bad(format!("unknown layer {other:?}"))),
                };
                let role = match *role {
                    "rf" => Role::Rf,
                    "control" => Role::Control,
                    other => return Err(bad(format!("unknown role {other:?}"))),
                };
                electrodes.push(Electrode::new(*name, layer, role, Vec::new()));
            }
            ["rect", x0, x1, y0, y1] => {
                let rect = Rect::new(num(x0)?, num(x1)?, num(y0)?, num(y1)?).map_err(|e| bad(e.to_string()))?;
                electrodes.last_mut().ok_or_else(|| bad("rect before any electrode".into()))?.rects.push(rect);
            }
            _ => return Err(bad(format!("unrecognised line {line:?}"))),
        }
    }
    if !tagged {
        return Err(Error::Parse { line: 0, message: "empty layout file".into() });
    }
    if let Some(e) = electrodes.iter().find(|e| e.rects.is_empty()) {
        return Err(Error::Geometry(format!("electrode {:?} has no rectangles", e.name)));
    }
    let separation =
        separation.ok_or_else(|| Error::Parse { line: 0, message: "missing plane_half_separation".into() })?;
    let layout = ElectrodeLayout::new(separation, electrodes)?;
    Ok(match order {
        Some(o) => layout.with_image_order(o),
        None => layout,
    })
}

fn keyed<T: std::str::FromStr>((n, line): (usize, String), key: &str, count: usize) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    let mut words = line.split_whitespace();
    if words.next() != Some(key) {
        return Err(Error::Parse { line: n, message: format!("expected {key} line") });
    }
    let values = words
        .map(|w| w.parse::<T>().map_err(|e| Error::Parse { line: n, message: format!("{w:?}: {e}") }))
        .collect::<Result<Vec<T>>>()?;
    if values.len() != count {
        return Err(Error::Parse { line: n, message: format!("{key} needs {count} values") });
    }
    Ok(values)
}
