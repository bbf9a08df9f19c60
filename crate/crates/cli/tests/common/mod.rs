#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::Path;

use slelab_cli::{Experiment, ExperimentConfig};

/// Small but non-trivial configuration for each experiment.
pub fn small_config(experiment: Experiment) -> ExperimentConfig {
    let text = match experiment {
        Experiment::SleTrace => "seed = 5\nreplicates = 3\n[params]\nkappa = 2.0\ndt = 0.01\n",
        Experiment::GffProbes => "seed = 5\nreplicates = 50\n",
        Experiment::Gmc => "seed = 5\nreplicates = 50\n[params]\nregime = \"bulk\"\ngamma_tilde = 0.3\n",
        Experiment::Minkowski => {
            "seed = 5\nreplicates = 2\n[params]\ndt = 1e-4\nhorizon = 0.25\nschedule = [0.125, 0.0625, 0.03125]\n"
        }
        Experiment::NaturalParam => {
            "seed = 5\nreplicates = 20\n[params]\ndt = 1e-3\nt = 0.25\nsegments = 4\ncurve_gap = 0.04\n"
        }
        Experiment::Zipper => "seed = 5\nreplicates = 3\n[params]\nhorizon = 0.5\n",
        Experiment::MarkovCheck => "seed = 5\nreplicates = 50\n[params]\ndt = 1e-3\ncurve_gap = 0.04\n",
    };
    ExperimentConfig::parse_with("small.toml", text, Some(experiment), &[]).expect("small config is valid")
}

pub const ALL: [Experiment; 7] = [
    Experiment::SleTrace,
    Experiment::GffProbes,
    Experiment::Gmc,
    Experiment::Minkowski,
    Experiment::NaturalParam,
    Experiment::Zipper,
    Experiment::MarkovCheck,
];

/// Every file under `results/` and `plot/`, keyed by relative path.
pub fn result_files(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut files = BTreeMap::new();
    for dir in ["results", "plot"] {
        let mut entries: Vec<_> = std::fs::read_dir(root.join(dir)).unwrap().map(|e| e.unwrap().path()).collect();
        entries.sort();
        for p in entries {
            files.insert(format!("{dir}/{}", p.file_name().unwrap().to_string_lossy()), std::fs::read(&p).unwrap());
        }
    }
    files
}

/// Runs `config` into a fresh directory and returns its result files.
pub fn run_into(config: &ExperimentConfig, dir: &Path, workers: usize) -> BTreeMap<String, Vec<u8>> {
    let mut c = config.clone();
    c.out = dir.to_path_buf();
    slelab_cli::run(&c, Some(workers)).unwrap_or_else(|f| panic!("{}: {}", config.experiment, f.message));
    result_files(dir)
}

/// Whether every result file names `hash` in its header.
pub fn all_stamped(files: &BTreeMap<String, Vec<u8>>, hash: &str) -> Result<(), String> {
    for (name, bytes) in files {
        let text = String::from_utf8_lossy(bytes);
        let ok = if name.ends_with(".json") {
            serde_json::from_str::<serde_json::Value>(&text).ok().and_then(|v| v["manifest"].as_str().map(|h| h == hash))
                == Some(true)
        } else if name.ends_with(".csv") {
            text.lines().next().is_some_and(|l| l.starts_with("# ") && l.contains(&format!("\"manifest\":\"{hash}\"")))
        } else {
            text.lines().next() == Some(&format!("# manifest {hash}"))
        };
        if !ok {
            return Err(format!("{name} does not carry manifest {hash}"));
        }
    }
    Ok(())
}
