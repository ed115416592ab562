//! Train/test assembly from a run of recordings.

use std::path::{Path, PathBuf};

use crate::data::synth::SyntheticRun;
use crate::data::{
    label_windows, list_data_files, load_ims_file, segment, shuffle_split, FileRange, LabelPlan, LoadedFile,
    SignalWindow,
};
use crate::error::{Error, Result};

use super::config::Config;

/// Where recordings come from. Files are read one at a time on demand.
#[derive(Debug, Clone)]
pub enum Source {
    Synthetic(SyntheticRun),
    Directory { channels: usize, paths: Vec<PathBuf> },
}

impl Source {
    pub fn from_config(config: &Config) -> Result<Self> {
        if config.data.synthetic {
            let run = config.synthetic_run();
            run.validate()?;
            return Ok(Source::Synthetic(run));
        }
        let dir = config
            .data
            .dir
            .as_deref()
            .ok_or_else(|| Error::InvalidConfig("no data directory configured".into()))?;
        let paths = list_data_files(dir)?;
        if paths.is_empty() {
            return Err(Error::Data(format!("{} contains no data files", dir.display())));
        }
        Ok(Source::Directory {
            channels: config.data.channels,
            paths,
        })
    }

    pub fn len(&self) -> usize {
        match self {
            Source::Synthetic(run) => run.files,
            Source::Directory { paths, .. } => paths.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// On-disk path of a file, `None` for generated recordings.
    pub fn path(&self, file_index: usize) -> Option<&Path> {
        match self {
            Source::Synthetic(_) => None,
            Source::Directory { paths, .. } => paths.get(file_index).map(PathBuf::as_path),
        }
    }

    pub fn load(&self, file_index: usize) -> LoadedFile {
        match self {
            Source::Synthetic(run) => LoadedFile {
                file_index,
                path: PathBuf::from(format!("synthetic/{file_index:04}")),
                recording: run.recording(file_index),
            },
            Source::Directory { channels, paths } => match paths.get(file_index) {
                Some(p) => load_ims_file(p, file_index, *channels),
                None => LoadedFile {
                    file_index,
                    path: PathBuf::new(),
                    recording: Err(Error::Data(format!("no file with index {file_index}"))),
                },
            },
        }
    }
}

#[derive(Debug, Clone)]
pub struct Dataset {
    /// Raw (unnormalized) labeled normal and degraded training windows.
    pub train: Vec<SignalWindow>,
    /// Held-out normal and degraded windows followed by every severe window.
    pub test: Vec<SignalWindow>,
    pub training_files: Vec<usize>,
    pub severe_files: Vec<usize>,
}

impl Dataset {
    /// Every file index the dataset was read from, ascending.
    pub fn files_used(&self) -> Vec<usize> {
        let mut all: Vec<usize> = self.training_files.iter().chain(&self.severe_files).copied().collect();
        all.sort_unstable();
        all.dedup();
        all
    }
}

fn labeled_windows(source: &Source, files: &[usize], plan: &LabelPlan, window: usize) -> Result<Vec<SignalWindow>> {
    let mut out = Vec::new();
    for &i in files {
        let file = source.load(i);
        let rec = file.recording.map_err(|e| Error::Data(format!("file {i} ({}): {e}", file.path.display())))?;
        let mut windows = segment(&rec, plan.channel, window)?;
        if windows.is_empty() {
            return Err(Error::Data(format!("file {i} is shorter than one window")));
        }
        label_windows(&mut windows, plan)?;
        out.extend(windows);
    }
    Ok(out)
}

fn check_in_source(range: FileRange, source: &Source, name: &str) -> Result<()> {
    if range.end >= source.len() {
        return Err(Error::Data(format!(
            "{name} range ends at file {} but the source has {} files",
            range.end,
            source.len()
        )));
    }
    Ok(())
}

/// Picks `train_files_per_class` evenly spaced files from the normal and
/// degraded ranges, splits their windows into train and held-out parts, and
/// appends every window of the severe range to the held-out part.
pub fn build_dataset(source: &Source, config: &Config) -> Result<Dataset> {
    let plan = &config.labels;
    plan.validate()?;
    check_in_source(plan.normal, source, "normal")?;
    check_in_source(plan.degraded, source, "degraded")?;
    check_in_source(plan.severe, source, "severe")?;
    let k = config.data.train_files_per_class;
    let mut training_files = plan.normal.evenly_spaced(k);
    training_files.extend(plan.degraded.evenly_spaced(k));
    let severe_files: Vec<usize> = (plan.severe.start..=plan.severe.end).collect();

    let seen = labeled_windows(source, &training_files, plan, config.data.window)?;
    let (train, mut test) = shuffle_split(seen, config.data.train_fraction, config.train.seed)?;
    test.extend(labeled_windows(source, &severe_files, plan, config.data.window)?);
    Ok(Dataset {
        train,
        test,
        training_files,
        severe_files,
    })
}
