//! Sliding-window DFT into Doppler-time magnitude maps, power-of-two
//! padding, and RX-antenna unstacking.

use num_complex::Complex64;
use rustfft::FftPlanner;

use super::pca::PcaSeries;
use super::PreprocessError;
use crate::csi::FrameMeta;

#[derive(Debug, Clone, Copy)]
pub struct StftConfig {
    /// Rate declared to the transform. Only axis labels depend on it; the
    /// collection rate may differ.
    pub reported_fs: f64,
    pub window_len: usize,
    pub hop: usize,
}

impl StftConfig {
    pub fn new(reported_fs: f64) -> Self {
        Self { reported_fs, window_len: 64, hop: 1 }
    }
}

/// Doppler spectrogram stack, dims A x B x T' with T' fastest, linear
/// magnitudes.
#[derive(Debug, Clone, PartialEq)]
pub struct DfsFrame {
    pub a: usize,
    pub b: usize,
    pub t: usize,
    values: Vec<f64>,
    pub doppler_axis: Vec<f64>,
    pub time_axis: Vec<f64>,
    pub reported_fs: f64,
    pub fs_collect: f64,
    pub meta: FrameMeta,
}

impl DfsFrame {
    #[inline]
    pub fn idx(&self, a: usize, b: usize, t: usize) -> usize {
        debug_assert!(a < self.a && b < self.b && t < self.t);
        (a * self.b + b) * self.t + t
    }

    #[inline]
    pub fn at(&self, a: usize, b: usize, t: usize) -> f64 {
        self.values[self.idx(a, b, t)]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// One antenna's B x T' block.
    pub fn antenna(&self, a: usize) -> &[f64] {
        &self.values[a * self.b * self.t..(a + 1) * self.b * self.t]
    }

    pub(crate) fn from_parts(
        a: usize,
        b: usize,
        t: usize,
        values: Vec<f64>,
        doppler_axis: Vec<f64>,
        time_axis: Vec<f64>,
        reported_fs: f64,
        fs_collect: f64,
        meta: FrameMeta,
    ) -> Self {
        assert_eq!(values.len(), a * b * t);
        Self { a, b, t, values, doppler_axis, time_axis, reported_fs, fs_collect, meta }
    }
}

/// Hop-1-capable centered spectrogram: each output column windows the
/// samples around its input index (zeros beyond the edges), DFT, two-sided
/// center-DC order, magnitude.
pub fn stft_spectrogram(series: &PcaSeries, cfg: &StftConfig) -> Result<DfsFrame, PreprocessError> {
    if cfg.window_len == 0 || cfg.hop == 0 {
        return Err(PreprocessError::Config("window_len and hop must be positive".into()));
    }
    if series.t == 0 {
        return Err(PreprocessError::Config("empty series".into()));
    }
    // Centered windows pad window_len/2 on each side; the window must fit.
    let padded = series.t + 2 * (cfg.window_len / 2);
    if cfg.window_len > padded {
        return Err(PreprocessError::Config(format!(
            "window {} exceeds padded series length {padded}",
            cfg.window_len
        )));
    }

    let b_n = cfg.window_len;
    let t_out = series.t.div_ceil(cfg.hop);
    let window: Vec<f64> = (0..b_n)
        .map(|n| 0.5 * (1.0 - (2.0 * core::f64::consts::PI * n as f64 / b_n as f64).cos()))
        .collect();
    let fft = FftPlanner::<f64>::new().plan_fft_forward(b_n);

    let mut values = vec![0.0f64; series.a * b_n * t_out];
    let mut buf = vec![Complex64::new(0.0, 0.0); b_n];
    let half = b_n / 2;
    for a in 0..series.a {
        let s = series.antenna(a);
        for col in 0..t_out {
            let center = (col * cfg.hop) as isize;
            for (n, slot) in buf.iter_mut().enumerate() {
                let src = center + n as isize - half as isize;
                *slot = if src >= 0 && (src as usize) < series.t {
                    s[src as usize] * window[n]
                } else {
                    Complex64::new(0.0, 0.0)
                };
            }
            fft.process(&mut buf);
            // Shift so bin half is DC, negative Doppler below it.
            for i in 0..b_n {
                let raw = (i + half) % b_n;
                values[(a * b_n + i) * t_out + col] = buf[raw].norm();
            }
        }
    }

    let doppler_axis: Vec<f64> = (0..b_n)
        .map(|i| (i as f64 - half as f64) * cfg.reported_fs / b_n as f64)
        .collect();
    let time_axis: Vec<f64> =
        (0..t_out).map(|c| (c * cfg.hop) as f64 / cfg.reported_fs).collect();
    Ok(DfsFrame::from_parts(
        series.a,
        b_n,
        t_out,
        values,
        doppler_axis,
        time_axis,
        cfg.reported_fs,
        series.fs_collect,
        series.meta.clone(),
    ))
}

/// Zero-pad the Doppler and time dims up to the next powers of two, appending
/// at the high end and extending the axes at their final spacing.
pub fn pad_pow2(dfs: &DfsFrame) -> DfsFrame {
    let b_new = dfs.b.next_power_of_two();
    let t_new = dfs.t.next_power_of_two();
    let mut values = vec![0.0f64; dfs.a * b_new * t_new];
    for a in 0..dfs.a {
        for b in 0..dfs.b {
            let src = &dfs.values[(a * dfs.b + b) * dfs.t..(a * dfs.b + b + 1) * dfs.t];
            values[(a * b_new + b) * t_new..(a * b_new + b) * t_new + dfs.t].copy_from_slice(src);
        }
    }
    let extend = |axis: &[f64], n: usize| -> Vec<f64> {
        let mut out = axis.to_vec();
        let step = if axis.len() >= 2 { axis[axis.len() - 1] - axis[axis.len() - 2] } else { 1.0 };
        while out.len() < n {
            out.push(out.last().unwrap() + step);
        }
        out
    };
    DfsFrame::from_parts(
        dfs.a,
        b_new,
        t_new,
        values,
        extend(&dfs.doppler_axis, b_new),
        extend(&dfs.time_axis, t_new),
        dfs.reported_fs,
        dfs.fs_collect,
        dfs.meta.clone(),
    )
}

/// Split a stacked frame into single-antenna frames, stamping each with its
/// RX patch index.
pub fn unstack_rx(dfs: &DfsFrame) -> Vec<DfsFrame> {
    (0..dfs.a)
        .map(|a| {
            let mut meta = dfs.meta.clone();
            meta.domain.rx_patch = Some(a as u32);
            DfsFrame::from_parts(
                1,
                dfs.b,
                dfs.t,
                dfs.antenna(a).to_vec(),
                dfs.doppler_axis.clone(),
                dfs.time_axis.clone(),
                dfs.reported_fs,
                dfs.fs_collect,
                meta,
            )
        })
        .collect()
}

/// Inverse of `unstack_rx`: reassemble by patch index.
pub fn restack_rx(frames: &[DfsFrame]) -> Result<DfsFrame, PreprocessError> {
    if frames.is_empty() {
        return Err(PreprocessError::InconsistentShape("no frames to restack".into()));
    }
    let (b, t) = (frames[0].b, frames[0].t);
    let mut ordered: Vec<&DfsFrame> = frames.iter().collect();
    ordered.sort_by_key(|f| f.meta.domain.rx_patch);
    let mut values = Vec::with_capacity(frames.len() * b * t);
    for (i, f) in ordered.iter().enumerate() {
        if f.a != 1 || f.b != b || f.t != t {
            return Err(PreprocessError::InconsistentShape("mixed dims in restack".into()));
        }
        match f.meta.domain.rx_patch {
            Some(p) if p as usize == i => {}
            other => {
                return Err(PreprocessError::InconsistentShape(format!(
                    "expected patch {i}, found {other:?}"
                )))
            }
        }
        values.extend_from_slice(f.values());
    }
    let mut meta = frames[0].meta.clone();
    meta.domain.rx_patch = None;
    Ok(DfsFrame::from_parts(
        frames.len(),
        b,
        t,
        values,
        frames[0].doppler_axis.clone(),
        frames[0].time_axis.clone(),
        frames[0].reported_fs,
        frames[0].fs_collect,
        meta,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::csi::{DomainLabel, MotionClass, Orientation};

    fn meta() -> FrameMeta {
        FrameMeta {
            class: MotionClass::Squat,
            domain: DomainLabel {
                tx_beam: 7,
                rx_patch: None,
                subject_id: 1,
                orientation: Orientation::Frontal,
            },
        }
    }

    fn series_of(a: usize, t: usize, f: impl Fn(usize, usize) -> Complex64) -> PcaSeries {
        let mut data = vec![Complex64::new(0.0, 0.0); a * t];
        for ai in 0..a {
            for ti in 0..t {
                data[ai * t + ti] = f(ai, ti);
            }
        }
        PcaSeries { a, t, data, degenerate: vec![], fs_collect: 100.0, meta: meta() }
    }

    #[test]
    fn constant_series_concentrates_at_zero_hz() {
        let s = series_of(1, 100, |_, _| Complex64::new(1.0, 0.0));
        let dfs = stft_spectrogram(&s, &StftConfig::new(100.0)).unwrap();
        assert_eq!((dfs.a, dfs.b, dfs.t), (1, 64, 100));
        let col = 50;
        let total: f64 = (0..64).map(|b| dfs.at(0, b, col).powi(2)).sum();
        let center: f64 = (31..=33).map(|b| dfs.at(0, b, col).powi(2)).sum();
        assert!(center / total > 0.99, "center share {}", center / total);
        assert!((dfs.doppler_axis[32]).abs() < 1e-12);
    }

    #[test]
    fn complex_tone_lands_on_its_doppler_bin() {
        let f0 = 10.0;
        let s = series_of(1, 100, |_, t| {
            Complex64::from_polar(1.0, 2.0 * core::f64::consts::PI * f0 * t as f64 / 100.0)
        });
        let dfs = stft_spectrogram(&s, &StftConfig::new(100.0)).unwrap();
        let col = 50;
        let peak = (0..64)
            .max_by(|&x, &y| dfs.at(0, x, col).total_cmp(&dfs.at(0, y, col)))
            .unwrap();
        let bin_width = 100.0 / 64.0;
        assert!(
            (dfs.doppler_axis[peak] - f0).abs() <= bin_width,
            "peak at {} Hz",
            dfs.doppler_axis[peak]
        );
    }

    #[test]
    fn reported_rate_rescales_axes_only() {
        let s = series_of(2, 80, |a, t| {
            Complex64::from_polar(1.0 + a as f64, 0.37 * t as f64)
        });
        let lo = stft_spectrogram(&s, &StftConfig::new(100.0)).unwrap();
        let hi = stft_spectrogram(&s, &StftConfig::new(800.0)).unwrap();
        assert_eq!(lo.values(), hi.values());
        for (x, y) in lo.doppler_axis.iter().zip(&hi.doppler_axis) {
            assert!((y - 8.0 * x).abs() < 1e-9);
        }
        for (x, y) in lo.time_axis.iter().zip(&hi.time_axis) {
            assert!((x - 8.0 * y).abs() < 1e-9);
        }
    }

    #[test]
    fn time_shift_moves_interior_columns() {
        let tone =
            |t: usize| Complex64::from_polar(1.0, 0.9 * t as f64) * (1.0 + (t as f64 * 0.05).sin());
        let shift = 3usize;
        let s0 = series_of(1, 90, |_, t| tone(t));
        let s1 = series_of(1, 90, |_, t| if t >= shift { tone(t - shift) } else { tone(0) });
        let a = stft_spectrogram(&s0, &StftConfig::new(100.0)).unwrap();
        let b = stft_spectrogram(&s1, &StftConfig::new(100.0)).unwrap();
        // Columns fully interior under a 64-wide window in both frames.
        for col in 40..50 {
            for bin in 0..64 {
                let x = a.at(0, bin, col - shift);
                let y = b.at(0, bin, col);
                assert!((x - y).abs() < 1e-9, "bin {bin} col {col}: {x} vs {y}");
            }
        }
    }

    #[test]
    fn global_phase_rotation_is_invisible() {
        let s0 = series_of(1, 70, |_, t| Complex64::from_polar(1.0, 0.21 * t as f64));
        let rot = Complex64::from_polar(1.0, 2.1);
        let mut s1 = s0.clone();
        for v in s1.data.iter_mut() {
            *v *= rot;
        }
        let a = stft_spectrogram(&s0, &StftConfig::new(100.0)).unwrap();
        let b = stft_spectrogram(&s1, &StftConfig::new(100.0)).unwrap();
        for (x, y) in a.values().iter().zip(b.values()) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn padding_reaches_the_next_powers_of_two() {
        let s = series_of(2, 100, |_, t| Complex64::new(t as f64, 0.0));
        let dfs = stft_spectrogram(&s, &StftConfig::new(100.0)).unwrap();
        let padded = pad_pow2(&dfs);
        assert_eq!((padded.b, padded.t), (64, 128));
        for a in 0..2 {
            for b in 0..64 {
                for t in 0..100 {
                    assert_eq!(padded.at(a, b, t), dfs.at(a, b, t));
                }
                for t in 100..128 {
                    assert_eq!(padded.at(a, b, t), 0.0);
                }
            }
        }
        assert_eq!(padded.doppler_axis.len(), 64);
        assert_eq!(padded.time_axis.len(), 128);

        let s200 = series_of(1, 200, |_, t| Complex64::new(1.0 / (t + 1) as f64, 0.0));
        let p200 = pad_pow2(&stft_spectrogram(&s200, &StftConfig::new(100.0)).unwrap());
        assert_eq!(p200.t, 256);
        // Already a power of two: no-op on the Doppler dim.
        assert_eq!(p200.b, 64);
    }

    #[test]
    fn hop_reduces_columns_by_ceil_division() {
        let s = series_of(1, 100, |_, t| Complex64::new(t as f64, 0.0));
        let mut cfg = StftConfig::new(100.0);
        cfg.hop = 3;
        let dfs = stft_spectrogram(&s, &cfg).unwrap();
        assert_eq!(dfs.t, 34);
    }

    #[test]
    fn zero_window_or_hop_is_a_config_error() {
        let s = series_of(1, 10, |_, t| Complex64::new(t as f64, 0.0));
        let mut cfg = StftConfig::new(100.0);
        cfg.window_len = 0;
        assert!(matches!(stft_spectrogram(&s, &cfg), Err(PreprocessError::Config(_))));
        let mut cfg = StftConfig::new(100.0);
        cfg.hop = 0;
        assert!(matches!(stft_spectrogram(&s, &cfg), Err(PreprocessError::Config(_))));
    }

    #[test]
    fn unstack_then_restack_is_lossless() {
        let s = series_of(16, 40, |a, t| {
            Complex64::new((a * t) as f64 * 0.01, a as f64 - t as f64 * 0.1)
        });
        let dfs = stft_spectrogram(&s, &StftConfig::new(100.0)).unwrap();
        let parts = unstack_rx(&dfs);
        assert_eq!(parts.len(), 16);
        let mut patches: Vec<u32> =
            parts.iter().map(|p| p.meta.domain.rx_patch.unwrap()).collect();
        patches.sort_unstable();
        assert_eq!(patches, (0..16).collect::<Vec<_>>());
        let back = restack_rx(&parts).unwrap();
        assert_eq!(back.values(), dfs.values());
        assert_eq!(back.meta.domain.rx_patch, None);
    }
}
