//! Plain-text and image writers shared by the grid outputs.

use std::io::{self, Write};

/// Control points of the viridis colour map.
const VIRIDIS: [[u8; 3]; 9] = [
    [68, 1, 84],
    [71, 44, 122],
    [59, 81, 139],
    [44, 113, 142],
    [33, 144, 141],
    [39, 173, 129],
    [92, 200, 99],
    [170, 220, 50],
    [253, 231, 37],
];

/// Viridis colour for `x` in `[0, 1]` (clamped).
pub fn viridis(x: f64) -> [u8; 3] {
    let x = if x.is_finite() { x.clamp(0.0, 1.0) } else { 0.0 };
    let pos = x * (VIRIDIS.len() - 1) as f64;
    let i = (pos.floor() as usize).min(VIRIDIS.len() - 2);
    let f = pos - i as f64;
    let mut out = [0u8; 3];
    for c in 0..3 {
        let a = f64::from(VIRIDIS[i][c]);
        let b = f64::from(VIRIDIS[i + 1][c]);
        out[c] = (a + f * (b - a)).round() as u8;
    }
    out
}

/// One heatmap cell.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Pixel {
    Value(f64),
    /// Rendered white.
    Absent,
    /// Rendered black.
    Failed,
}

/// Binary PPM heatmap of a row-major grid with the first axis fastest.
///
/// The second axis grows upwards. Values are mapped linearly from
/// `[lo, hi]` onto the colour ramp. Each cell is `scale` pixels square.
pub fn write_heatmap<W: Write>(
    mut w: W,
    cells: &[Pixel],
    nx: usize,
    ny: usize,
    lo: f64,
    hi: f64,
    scale: usize,
) -> io::Result<()> {
    assert_eq!(cells.len(), nx * ny, "heatmap cell count");
    let scale = scale.max(1);
    let (width, height) = (nx * scale, ny * scale);
    write!(w, "P6\n{width} {height}\n255\n")?;
    let span = if hi > lo { hi - lo } else { 1.0 };
    let mut line = Vec::with_capacity(width * 3);
    for row in (0..ny).rev() {
        line.clear();
        for col in 0..nx {
            let rgb = match cells[row * nx + col] {
                Pixel::Value(v) => viridis((v - lo) / span),
                Pixel::Absent => [255, 255, 255],
                Pixel::Failed => [0, 0, 0],
            };
            for _ in 0..scale {
                line.extend_from_slice(&rgb);
            }
        }
        for _ in 0..scale {
            w.write_all(&line)?;
        }
    }
    Ok(())
}
