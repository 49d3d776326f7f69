//! Labeled dataset assembly: enumerate a scenario grid, simulate each cell,
//! run the full CSI-to-DFS pipeline, optionally unstack, and gate the result
//! against the declared sample/domain arithmetic.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::pca::pca_first_component;
use super::stft::{pad_pow2, stft_spectrogram, unstack_rx, DfsFrame, StftConfig};
use super::PreprocessError;
use crate::csi::{
    apply_snr_zeroing, simulate_csi, Clutter, CsiError, CsiFrame, MotionClass, MotionProfile,
    Orientation, SimScenario, Vec3, SNR_ZERO_THRESHOLD_DB, USABLE_TX_BEAMS,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetKind {
    Dataset1,
    Dataset2V1,
    Dataset2V2,
    Dataset2V3,
}

impl DatasetKind {
    /// Published sample/domain totals the builder must reproduce.
    pub fn declared_counts(self) -> (usize, usize) {
        match self {
            DatasetKind::Dataset1 => (384, 96),
            DatasetKind::Dataset2V1 => (195, 24),
            DatasetKind::Dataset2V2 | DatasetKind::Dataset2V3 => (3120, 384),
        }
    }
}

/// One classification target. A locked orientation makes the facing
/// direction part of the class itself; `None` sweeps both directions as a
/// domain factor.
#[derive(Debug, Clone, Copy)]
pub struct ClassSpec {
    pub class: MotionClass,
    pub orientation: Option<Orientation>,
    /// Recorded repetitions per grid cell.
    pub reps: usize,
}

/// Extra participant captured on a single beam and facing direction with a
/// class subset.
#[derive(Debug, Clone)]
pub struct PartialSubject {
    pub subject_id: u32,
    pub tx_beam: usize,
    pub orientation: Orientation,
    pub classes: Vec<(MotionClass, usize)>,
}

#[derive(Debug, Clone)]
pub struct DatasetSpec {
    pub which: DatasetKind,
    pub unstack: bool,
    pub reported_fs: f64,
    pub classes: Vec<ClassSpec>,
    pub tx_beams: Vec<usize>,
    pub subjects: Vec<u32>,
    pub partial_subject: Option<PartialSubject>,
    pub fs_collect: f64,
    /// Seconds per recorded repetition.
    pub duration: f64,
    /// Motion executions within one squat frame, inclusive range drawn per
    /// frame.
    pub squat_motions: (u32, u32),
    /// SNR gate applied to raw frames; `None` disables zeroing.
    pub snr_threshold: Option<f64>,
    /// Static per-beam nuisance scatterer, the domain-shift stressor.
    pub beam_clutter: bool,
}

impl DatasetSpec {
    pub fn dataset1() -> Self {
        let f = Orientation::Frontal;
        let o = Orientation::Orthogonal;
        Self {
            which: DatasetKind::Dataset1,
            unstack: true,
            reported_fs: 500.0,
            classes: vec![
                ClassSpec { class: MotionClass::Empty, orientation: Some(f), reps: 1 },
                ClassSpec { class: MotionClass::Still, orientation: Some(f), reps: 1 },
                ClassSpec { class: MotionClass::Squat, orientation: Some(f), reps: 1 },
                ClassSpec { class: MotionClass::Squat, orientation: Some(o), reps: 1 },
            ],
            tx_beams: (5..=10).collect(),
            subjects: vec![1],
            partial_subject: None,
            fs_collect: 20.0,
            duration: 5.0,
            squat_motions: (3, 4),
            snr_threshold: Some(SNR_ZERO_THRESHOLD_DB),
            beam_clutter: true,
        }
    }

    pub fn dataset2_v1() -> Self {
        Self {
            which: DatasetKind::Dataset2V1,
            unstack: false,
            reported_fs: 100.0,
            classes: vec![
                ClassSpec {
                    class: MotionClass::Empty,
                    orientation: Some(Orientation::Frontal),
                    reps: 3,
                },
                ClassSpec { class: MotionClass::Still, orientation: None, reps: 3 },
                ClassSpec { class: MotionClass::HandGesture, orientation: None, reps: 3 },
                ClassSpec { class: MotionClass::Squat, orientation: None, reps: 3 },
            ],
            tx_beams: vec![7, 8, 9],
            subjects: vec![1, 2, 3],
            partial_subject: Some(PartialSubject {
                subject_id: 4,
                tx_beam: 7,
                orientation: Orientation::Frontal,
                classes: vec![(MotionClass::HandGesture, 3), (MotionClass::Empty, 3)],
            }),
            fs_collect: 100.0,
            duration: 2.0,
            squat_motions: (1, 1),
            snr_threshold: Some(SNR_ZERO_THRESHOLD_DB),
            beam_clutter: true,
        }
    }

    pub fn dataset2_v2() -> Self {
        Self { which: DatasetKind::Dataset2V2, unstack: true, ..Self::dataset2_v1() }
    }

    pub fn dataset2_v3() -> Self {
        Self { which: DatasetKind::Dataset2V3, reported_fs: 800.0, ..Self::dataset2_v2() }
    }

    pub fn for_kind(which: DatasetKind) -> Self {
        match which {
            DatasetKind::Dataset1 => Self::dataset1(),
            DatasetKind::Dataset2V1 => Self::dataset2_v1(),
            DatasetKind::Dataset2V2 => Self::dataset2_v2(),
            DatasetKind::Dataset2V3 => Self::dataset2_v3(),
        }
    }

    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    /// Label index for a class under a given facing direction.
    fn label_of(&self, class: MotionClass, orientation: Orientation) -> Option<u32> {
        self.classes
            .iter()
            .position(|c| c.class == class && c.orientation.is_none_or(|o| o == orientation))
            .map(|i| i as u32)
    }

    fn validate(&self) -> Result<(), PreprocessError> {
        if self.classes.is_empty() || self.tx_beams.is_empty() || self.subjects.is_empty() {
            return Err(PreprocessError::Config("empty class, beam, or subject list".into()));
        }
        let mut beams = self.tx_beams.clone();
        if let Some(p) = &self.partial_subject {
            beams.push(p.tx_beam);
            for (class, _) in &p.classes {
                if self.label_of(*class, p.orientation).is_none() {
                    return Err(PreprocessError::Config(format!(
                        "partial subject class {class:?} is not in the class list"
                    )));
                }
            }
        }
        for &b in &beams {
            if !USABLE_TX_BEAMS.contains(&b) {
                return Err(PreprocessError::Config(format!(
                    "tx beam {b} outside the usable range {USABLE_TX_BEAMS:?}"
                )));
            }
        }
        Ok(())
    }

    /// Grid cells in definition order: beams, then subjects, then classes,
    /// then facing directions; the partial subject's cells come last.
    fn cells(&self) -> Vec<Cell> {
        let mut out = Vec::new();
        for &beam in &self.tx_beams {
            for &subject in &self.subjects {
                for (label, cs) in self.classes.iter().enumerate() {
                    let orientations: &[Orientation] = match cs.orientation {
                        Some(ref o) => core::slice::from_ref(o),
                        None => &[Orientation::Frontal, Orientation::Orthogonal],
                    };
                    for &orientation in orientations {
                        out.push(Cell {
                            tx_beam: beam,
                            subject_id: subject,
                            orientation,
                            class: cs.class,
                            label: label as u32,
                            reps: cs.reps,
                        });
                    }
                }
            }
        }
        if let Some(p) = &self.partial_subject {
            for &(class, reps) in &p.classes {
                out.push(Cell {
                    tx_beam: p.tx_beam,
                    subject_id: p.subject_id,
                    orientation: p.orientation,
                    class,
                    label: self.label_of(class, p.orientation).unwrap(),
                    reps,
                });
            }
        }
        out
    }

    fn scenario_for(&self, cell: &Cell, squat_motions: u32) -> SimScenario {
        let base = subject_position(cell.subject_id);
        let mut s = SimScenario::default();
        s.tx_beam = cell.tx_beam;
        s.subject_id = cell.subject_id;
        s.fs_collect = self.fs_collect;
        s.duration = self.duration;
        s.clutter = self.beam_clutter.then(|| Clutter::beam_signature(cell.tx_beam));
        s.subject = match cell.class {
            MotionClass::Empty => MotionProfile::empty(),
            MotionClass::Still => MotionProfile::still(base, cell.orientation),
            MotionClass::Squat => {
                MotionProfile::squat(base, cell.orientation, squat_motions, self.duration)
            }
            MotionClass::HandGesture => MotionProfile::hand_gesture(base, cell.orientation),
        };
        s
    }

    /// Unique-domain count as the factor product over the spec's structure,
    /// not the realized label set (empty-room frames collapse orientations,
    /// partial subjects cover one beam).
    fn nominal_domains(&self, patches: usize) -> usize {
        let patch_factor = if self.unstack { patches } else { 1 };
        match self.which {
            DatasetKind::Dataset1 => patches * self.tx_beams.len(),
            _ => {
                let subjects = self.subjects.len() + usize::from(self.partial_subject.is_some());
                2 * self.tx_beams.len() * subjects * patch_factor
            }
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Cell {
    tx_beam: usize,
    subject_id: u32,
    orientation: Orientation,
    class: MotionClass,
    label: u32,
    reps: usize,
}

/// Where each participant stood, inside the transmitter's coverage sector.
pub fn subject_position(subject_id: u32) -> Vec3 {
    match subject_id {
        1 => Vec3::new(4.5, 2.4, 0.9),
        2 => Vec3::new(5.0, 2.9, 0.9),
        3 => Vec3::new(5.5, 3.7, 0.9),
        4 => Vec3::new(4.2, 2.5, 0.9),
        n => Vec3::new(4.0 + 0.25 * f64::from(n % 8), 2.2 + 0.3 * f64::from(n % 5), 0.9),
    }
}

/// One labeled sample ready for model input assembly.
#[derive(Debug, Clone)]
pub struct SampleRecord {
    pub dfs: DfsFrame,
    /// Index into the generating spec's class list.
    pub label: u32,
}

/// One frame the grid wants simulated: the scenario, the generator seed,
/// and the spec-relative class label.
#[derive(Debug, Clone)]
pub struct FramePlan {
    pub scenario: SimScenario,
    pub seed: u64,
    pub label: u32,
}

/// Expand the grid into per-frame simulation orders. Per frame, the squat
/// motion count and then the generator seed are drawn from `rng` in grid
/// order, so the plan pins the whole dataset to the master seed.
pub fn plan_dataset(
    spec: &DatasetSpec,
    rng: &mut impl Rng,
) -> Result<Vec<FramePlan>, PreprocessError> {
    spec.validate()?;
    let mut plans = Vec::new();
    for cell in spec.cells() {
        for _ in 0..cell.reps {
            let motions = rng.random_range(spec.squat_motions.0..=spec.squat_motions.1);
            let seed = rng.random::<u64>();
            plans.push(FramePlan { scenario: spec.scenario_for(&cell, motions), seed, label: cell.label });
        }
    }
    Ok(plans)
}

/// Gate, reduce, transform, pad, and optionally unstack one simulated frame.
pub fn preprocess_frame(
    spec: &DatasetSpec,
    mut frame: CsiFrame,
    label: u32,
) -> Result<Vec<SampleRecord>, PreprocessError> {
    if let Some(threshold) = spec.snr_threshold {
        frame = apply_snr_zeroing(frame, threshold);
    }
    let cfg = StftConfig::new(spec.reported_fs);
    let series = pca_first_component(&frame)?;
    let dfs = pad_pow2(&stft_spectrogram(&series, &cfg)?);
    if spec.unstack {
        Ok(unstack_rx(&dfs).into_iter().map(|dfs| SampleRecord { dfs, label }).collect())
    } else {
        Ok(vec![SampleRecord { dfs, label }])
    }
}

/// Run the grid: plan every frame, call `simulate`, then push each one
/// through the DFS pipeline. Errors when the produced sample count or the
/// nominal domain product disagrees with the declared totals.
pub fn build_dataset<F>(
    spec: &DatasetSpec,
    mut simulate: F,
    rng: &mut impl Rng,
) -> Result<Vec<SampleRecord>, PreprocessError>
where
    F: FnMut(&SimScenario, u64) -> Result<CsiFrame, CsiError>,
{
    let mut records = Vec::new();
    let mut stacked_a = 0usize;
    for plan in plan_dataset(spec, rng)? {
        let frame = simulate(&plan.scenario, plan.seed)?;
        let samples = preprocess_frame(spec, frame, plan.label)?;
        stacked_a = if spec.unstack { samples.len() } else { samples[0].dfs.a };
        records.extend(samples);
    }

    let (want_samples, want_domains) = spec.which.declared_counts();
    if records.len() != want_samples {
        return Err(PreprocessError::SpecArithmetic(format!(
            "produced {} samples, declared {want_samples}",
            records.len()
        )));
    }
    let domains = spec.nominal_domains(stacked_a);
    if domains != want_domains {
        return Err(PreprocessError::SpecArithmetic(format!(
            "produced {domains} domains, declared {want_domains}"
        )));
    }
    Ok(records)
}

/// `build_dataset` against the real channel simulator, one seeded generator
/// per frame.
pub fn simulate_dataset(
    spec: &DatasetSpec,
    rng: &mut impl Rng,
) -> Result<Vec<SampleRecord>, PreprocessError> {
    build_dataset(
        spec,
        |scenario, seed| simulate_csi(scenario, &mut ChaCha8Rng::seed_from_u64(seed)),
        rng,
    )
}
