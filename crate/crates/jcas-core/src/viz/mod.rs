//! Spectrogram grid rendering: frames laid out in a fixed rows x cols grid,
//! one frame per cell, rasterized deterministically to binary PPM (and
//! optionally PNG).
//!
//! A cell shows the frame's Doppler-time magnitude block, averaged over
//! antennas when a frame carries more than one, with the highest Doppler bin
//! at the top. Dynamic range defaults to a -60 dB floor relative to the
//! normalization peak; every magnitude at or below the floor maps to the
//! zero-intensity color, never below it.

use std::io::Write;
use std::path::Path;

use thiserror::Error;

use crate::csi::MotionClass;
use crate::preprocess::DfsFrame;

#[derive(Debug, Error)]
pub enum VizError {
    #[error("layout mismatch: {0}")]
    LayoutMismatch(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("image i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("png encoding: {0}")]
    Png(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ColorMap {
    /// Greyscale ramp.
    Mono,
    /// Black, red, yellow, white heat ramp.
    Heat,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Scale {
    /// Log magnitude clamped to `[floor_db, 0]` relative to the peak.
    Db { floor_db: f64 },
    /// Magnitude relative to the peak.
    Linear,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CellNorm {
    /// One peak across the whole grid.
    Global,
    /// Each cell normalizes to its own peak.
    PerFrame,
}

/// Grid geometry and rendering options. Rows usually index classes or TX
/// beams and columns RX antennas; `rows * cols` must equal the frame count.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridLayout {
    pub rows: usize,
    pub cols: usize,
    pub colormap: ColorMap,
    pub scale: Scale,
    pub norm: CellNorm,
}

impl GridLayout {
    pub fn new(rows: usize, cols: usize) -> Self {
        GridLayout {
            rows,
            cols,
            colormap: ColorMap::Mono,
            scale: Scale::Db { floor_db: -60.0 },
            norm: CellNorm::Global,
        }
    }

    pub fn validate(&self) -> Result<(), VizError> {
        if self.rows == 0 || self.cols == 0 {
            return Err(VizError::Config("grid needs positive rows and cols".into()));
        }
        if let Scale::Db { floor_db } = self.scale {
            if !(floor_db.is_finite() && floor_db < 0.0) {
                return Err(VizError::Config(format!(
                    "dB floor must be finite and negative, got {floor_db}"
                )));
            }
        }
        Ok(())
    }
}

/// Packed 8-bit RGB raster, row-major from the top-left.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Raster {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

impl Raster {
    pub fn at(&self, x: usize, y: usize) -> [u8; 3] {
        let i = (y * self.width + x) * 3;
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }
}

/// Mean magnitude over antennas at one Doppler-time position.
fn cell_value(f: &DfsFrame, bin: usize, col: usize) -> f64 {
    let mut s = 0.0;
    for a in 0..f.a {
        s += f.at(a, bin, col);
    }
    s / f.a as f64
}

fn frame_peak(f: &DfsFrame) -> f64 {
    let mut peak = 0.0f64;
    for bin in 0..f.b {
        for col in 0..f.t {
            peak = peak.max(cell_value(f, bin, col));
        }
    }
    peak
}

/// Maps a magnitude to `[0, 1]` intensity under the layout's scale. A zero
/// peak (an all-zero cell) pins the whole cell to intensity 0.
fn intensity(value: f64, peak: f64, scale: Scale) -> f64 {
    if peak <= 0.0 {
        return 0.0;
    }
    let rel = value / peak;
    match scale {
        Scale::Linear => rel.clamp(0.0, 1.0),
        Scale::Db { floor_db } => {
            if rel <= 0.0 {
                return 0.0;
            }
            let db = 20.0 * rel.log10();
            let clamped = db.clamp(floor_db, 0.0);
            1.0 - clamped / floor_db
        }
    }
}

fn shade(i: f64, map: ColorMap) -> [u8; 3] {
    let to_u8 = |v: f64| (v.clamp(0.0, 1.0) * 255.0).round() as u8;
    match map {
        ColorMap::Mono => {
            let g = to_u8(i);
            [g, g, g]
        }
        ColorMap::Heat => [to_u8(3.0 * i), to_u8(3.0 * i - 1.0), to_u8(3.0 * i - 2.0)],
    }
}

/// Rasterizes `frames` into a `rows x cols` grid, one frame per cell in
/// row-major order. All frames must share Doppler and time dimensions; the
/// highest Doppler bin renders at the top of each cell.
pub fn render_dfs_grid(frames: &[&DfsFrame], layout: &GridLayout) -> Result<Raster, VizError> {
    layout.validate()?;
    if frames.len() != layout.rows * layout.cols {
        return Err(VizError::LayoutMismatch(format!(
            "{} frames cannot fill a {} x {} grid",
            frames.len(),
            layout.rows,
            layout.cols
        )));
    }
    let (b, t) = (frames[0].b, frames[0].t);
    for (i, f) in frames.iter().enumerate() {
        if f.b != b || f.t != t {
            return Err(VizError::LayoutMismatch(format!(
                "frame {i} is {} x {}, expected {b} x {t}",
                f.b, f.t
            )));
        }
    }

    let global_peak = frames.iter().map(|f| frame_peak(f)).fold(0.0f64, f64::max);
    let width = layout.cols * t;
    let height = layout.rows * b;
    let mut pixels = vec![0u8; width * height * 3];
    for (i, f) in frames.iter().enumerate() {
        let cell_row = i / layout.cols;
        let cell_col = i % layout.cols;
        let peak = match layout.norm {
            CellNorm::Global => global_peak,
            CellNorm::PerFrame => frame_peak(f),
        };
        for bin in 0..b {
            // Highest Doppler on top.
            let y = cell_row * b + (b - 1 - bin);
            for col in 0..t {
                let x = cell_col * t + col;
                let rgb = shade(intensity(cell_value(f, bin, col), peak, layout.scale), layout.colormap);
                let o = (y * width + x) * 3;
                pixels[o..o + 3].copy_from_slice(&rgb);
            }
        }
    }
    Ok(Raster { width, height, pixels })
}

/// Binary (P6) PPM encoding.
pub fn ppm_bytes(r: &Raster) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", r.width, r.height).into_bytes();
    out.extend_from_slice(&r.pixels);
    out
}

pub fn write_ppm(path: &Path, r: &Raster) -> Result<(), VizError> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(&ppm_bytes(r))?;
    Ok(())
}

pub fn write_png(path: &Path, r: &Raster) -> Result<(), VizError> {
    image::save_buffer(
        path,
        &r.pixels,
        r.width as u32,
        r.height as u32,
        image::ExtendedColorType::Rgb8,
    )
    .map_err(|e| VizError::Png(e.to_string()))
}

/// Canonical grid artifact name: `<dataset>_<txbeam>_<class>.ppm`.
pub fn grid_filename(dataset: &str, tx_beam: u32, class: MotionClass) -> String {
    format!("{dataset}_{tx_beam}_{}.ppm", class.as_str())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::csi::{DomainLabel, FrameMeta, Orientation};

    fn meta(class: MotionClass) -> FrameMeta {
        FrameMeta {
            class,
            domain: DomainLabel {
                tx_beam: 3,
                rx_patch: None,
                subject_id: 0,
                orientation: Orientation::Frontal,
            },
        }
    }

    /// 1-antenna frame with magnitude 1 at the given bins, else 0.
    fn frame_with_bins(b: usize, t: usize, hot: &[usize], class: MotionClass) -> DfsFrame {
        let mut values = vec![0.0f64; b * t];
        for &bin in hot {
            for col in 0..t {
                values[bin * t + col] = 1.0;
            }
        }
        DfsFrame::from_parts(
            1,
            b,
            t,
            values,
            vec![0.0; b],
            vec![0.0; t],
            100.0,
            100.0,
            meta(class),
        )
    }

    #[test]
    fn frame_count_must_match_the_grid() {
        let f = frame_with_bins(4, 4, &[2], MotionClass::Still);
        let layout = GridLayout::new(2, 2);
        let err = render_dfs_grid(&[&f], &layout);
        assert!(matches!(err, Err(VizError::LayoutMismatch(_))));
    }

    #[test]
    fn mismatched_frame_dims_are_a_layout_error() {
        let a = frame_with_bins(4, 4, &[0], MotionClass::Still);
        let b = frame_with_bins(4, 6, &[0], MotionClass::Still);
        let err = render_dfs_grid(&[&a, &b], &GridLayout::new(1, 2));
        assert!(matches!(err, Err(VizError::LayoutMismatch(_))));
    }

    #[test]
    fn rendering_is_byte_deterministic() {
        let f0 = frame_with_bins(8, 6, &[1, 2], MotionClass::Squat);
        let f1 = frame_with_bins(8, 6, &[4], MotionClass::Empty);
        let layout = GridLayout { colormap: ColorMap::Heat, ..GridLayout::new(1, 2) };
        let a = render_dfs_grid(&[&f0, &f1], &layout).unwrap();
        let b = render_dfs_grid(&[&f0, &f1], &layout).unwrap();
        assert_eq!(ppm_bytes(&a), ppm_bytes(&b));
    }

    #[test]
    fn ppm_header_and_length_are_exact() {
        let f = frame_with_bins(4, 5, &[2], MotionClass::Still);
        let r = render_dfs_grid(&[&f], &GridLayout::new(1, 1)).unwrap();
        let bytes = ppm_bytes(&r);
        assert!(bytes.starts_with(b"P6\n5 4\n255\n"));
        assert_eq!(bytes.len(), b"P6\n5 4\n255\n".len() + 3 * 5 * 4);
    }

    #[test]
    fn all_zero_frames_render_a_uniform_floor_cell() {
        let zero = frame_with_bins(4, 4, &[], MotionClass::Empty);
        let hot = frame_with_bins(4, 4, &[1], MotionClass::Squat);
        for norm in [CellNorm::Global, CellNorm::PerFrame] {
            let layout = GridLayout { norm, ..GridLayout::new(1, 2) };
            let r = render_dfs_grid(&[&zero, &hot], &layout).unwrap();
            // Left cell: every pixel exactly the zero-intensity color.
            for y in 0..4 {
                for x in 0..4 {
                    assert_eq!(r.at(x, y), [0, 0, 0], "non-floor pixel at {x},{y}");
                }
            }
        }
    }

    #[test]
    fn identical_frames_render_identical_cells() {
        let f = frame_with_bins(6, 5, &[2, 4], MotionClass::Still);
        let g = frame_with_bins(6, 5, &[2, 4], MotionClass::Still);
        let r = render_dfs_grid(&[&f, &g], &GridLayout::new(1, 2)).unwrap();
        for y in 0..6 {
            for x in 0..5 {
                assert_eq!(r.at(x, y), r.at(x + 5, y));
            }
        }
    }

    #[test]
    fn off_center_energy_separates_motion_from_empty_cells() {
        // 8 bins: DC sits at bin 4. The empty frame concentrates at DC, the
        // moving frame at bins 1 and 6.
        let empty = frame_with_bins(8, 4, &[4], MotionClass::Empty);
        let squat = frame_with_bins(8, 4, &[1, 6], MotionClass::Squat);
        let r = render_dfs_grid(&[&empty, &squat], &GridLayout::new(2, 1)).unwrap();

        // Off-center rows: everything except the DC row (pixel row b-1-4 = 3
        // within each cell).
        let cell_energy = |cell: usize| -> (u64, u64) {
            let (mut dc, mut off) = (0u64, 0u64);
            for bin in 0..8usize {
                let y = cell * 8 + (8 - 1 - bin);
                for x in 0..4 {
                    let v = r.at(x, y)[0] as u64;
                    if bin == 4 {
                        dc += v;
                    } else {
                        off += v;
                    }
                }
            }
            (dc, off)
        };
        let (empty_dc, empty_off) = cell_energy(0);
        let (squat_dc, squat_off) = cell_energy(1);
        assert!(empty_dc > 0 && empty_off == 0);
        assert!(squat_off > 0 && squat_dc == 0);
        assert!(squat_off > empty_off);
    }

    #[test]
    fn db_floor_clamps_but_never_undershoots() {
        // Magnitudes 1, 1e-2 (-40 dB) and 1e-6 (-120 dB, below the floor).
        let mut f = frame_with_bins(4, 3, &[], MotionClass::Still);
        f.values_mut()[0 * 3 + 0] = 1.0;
        f.values_mut()[1 * 3 + 0] = 1e-2;
        f.values_mut()[2 * 3 + 0] = 1e-6;
        let r = render_dfs_grid(&[&f], &GridLayout::new(1, 1)).unwrap();
        // Bin 0 renders at the bottom (y = 3).
        assert_eq!(r.at(0, 3), [255, 255, 255]);
        let mid = r.at(0, 2)[0];
        assert!(mid > 0 && mid < 255, "-40 dB should be mid-scale, got {mid}");
        assert_eq!(r.at(0, 1), [0, 0, 0], "below-floor magnitude clamps to the floor color");
        assert_eq!(r.at(0, 0), [0, 0, 0]);
    }

    #[test]
    fn linear_scale_and_per_frame_norm_rescale_cells() {
        let mut dim = frame_with_bins(2, 2, &[], MotionClass::Still);
        dim.values_mut()[0] = 0.5;
        let bright = frame_with_bins(2, 2, &[0], MotionClass::Still);
        let layout = GridLayout {
            scale: Scale::Linear,
            norm: CellNorm::PerFrame,
            ..GridLayout::new(1, 2)
        };
        let r = render_dfs_grid(&[&dim, &bright], &layout).unwrap();
        // Per-frame peaks make both cells reach full scale.
        assert_eq!(r.at(0, 1), [255, 255, 255]);
        assert_eq!(r.at(2, 1), [255, 255, 255]);

        let global = GridLayout { norm: CellNorm::Global, ..layout };
        let g = render_dfs_grid(&[&dim, &bright], &global).unwrap();
        assert_eq!(g.at(0, 1), [128, 128, 128]);
        assert_eq!(g.at(2, 1), [255, 255, 255]);
    }

    #[test]
    fn heat_ramp_is_monotone_in_intensity() {
        let reds: Vec<u8> = (0..=10)
            .map(|i| shade(i as f64 / 10.0, ColorMap::Heat)[0])
            .collect();
        assert!(reds.windows(2).all(|w| w[0] <= w[1]));
        assert_eq!(shade(0.0, ColorMap::Heat), [0, 0, 0]);
        assert_eq!(shade(1.0, ColorMap::Heat), [255, 255, 255]);
    }

    #[test]
    fn artifact_names_follow_the_convention() {
        assert_eq!(grid_filename("d1", 3, MotionClass::Squat), "d1_3_squat.ppm");
        assert_eq!(
            grid_filename("d2v2", 14, MotionClass::HandGesture),
            "d2v2_14_hand_gesture.ppm"
        );
    }

    #[test]
    fn png_round_trips_the_raster() {
        let f = frame_with_bins(4, 4, &[1], MotionClass::Still);
        let r = render_dfs_grid(&[&f], &GridLayout::new(1, 1)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("grid.png");
        write_png(&path, &r).unwrap();
        let back = image::open(&path).unwrap().into_rgb8();
        assert_eq!(back.dimensions(), (4, 4));
        assert_eq!(back.as_raw(), &r.pixels);
    }
}
