//! Benchmark runner: repeated solver runs over (instance, configuration)
//! pairs, medians and median absolute deviations of the node rate, and
//! machine-readable output.
//!
//! A search node is one branching decision; both the assign and the refute
//! child of a decision count. Node counts are deterministic, so they must be
//! identical across repeats (checked) and across GAC configurations.

use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::config::{build_solver, BuildError, PropChoice};
use crate::engine::{SearchStatus, SolverOptions};
use crate::model::Model;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RunRecord {
    pub instance: String,
    pub config: String,
    pub repeat: u32,
    pub nodes: u64,
    pub solutions: u64,
    pub wall_time: f64,
    pub nodes_per_second: f64,
    pub peak_stored_supports: u64,
    pub peak_memory_bytes: u64,
    pub limit_hit: bool,
    pub status: String,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Summary {
    pub instance: String,
    pub config: String,
    pub repeats: u32,
    pub nodes: u64,
    pub solutions: u64,
    pub median_node_rate: f64,
    pub mad_node_rate: f64,
    pub median_memory_bytes: f64,
    pub mad_memory_bytes: f64,
    pub nodes_identical: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchReport {
    pub records: Vec<RunRecord>,
    pub summaries: Vec<Summary>,
}

/// Median of a non-empty sample.
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Median absolute deviation from the median.
pub fn mad(values: &[f64]) -> f64 {
    let m = median(values);
    let devs: Vec<f64> = values.iter().map(|x| (x - m).abs()).collect();
    median(&devs)
}

/// Peak resident set of this process in bytes, best effort (Linux VmHWM).
pub fn peak_memory_bytes() -> u64 {
    if let Ok(text) = std::fs::read_to_string("/proc/self/status") {
        for line in text.lines() {
            if let Some(rest) = line.strip_prefix("VmHWM:") {
                let kb: u64 = rest
                    .trim()
                    .trim_end_matches("kB")
                    .trim()
                    .parse()
                    .unwrap_or(0);
                return kb * 1024;
            }
        }
    }
    0
}

/// One solve of `model` under `choice`.
pub fn run_single(
    instance: &str,
    model: &Model,
    choice: PropChoice,
    repeat: u32,
    options: &SolverOptions,
    support_cap: usize,
) -> Result<RunRecord, BuildError> {
    let mut solver = build_solver(model, choice, options.clone(), support_cap)?;
    let res = solver.solve_all();
    let status = match res.stats.status {
        SearchStatus::Complete => "complete",
        SearchStatus::NodeLimit => "node-limit",
        SearchStatus::TimeLimit => "time-limit",
    };
    Ok(RunRecord {
        instance: instance.to_string(),
        config: choice.to_string(),
        repeat,
        nodes: res.stats.nodes,
        solutions: res.stats.solutions,
        wall_time: res.stats.wall_time,
        nodes_per_second: if res.stats.wall_time > 0.0 {
            res.stats.nodes as f64 / res.stats.wall_time
        } else {
            0.0
        },
        peak_stored_supports: res.stats.peak_stored_supports,
        peak_memory_bytes: peak_memory_bytes(),
        limit_hit: res.stats.status != SearchStatus::Complete,
        status: status.to_string(),
    })
}

/// Run every (instance, config) pair `repeats` times, with up to `jobs`
/// worker threads, each job owning its solver instance outright.
pub fn run_benchmark(
    instances: &[(String, Model)],
    configs: &[PropChoice],
    repeats: u32,
    jobs: usize,
    options: &SolverOptions,
    support_cap: usize,
) -> Result<BenchReport, BuildError> {
    let mut work: Vec<(usize, PropChoice, u32)> = Vec::new();
    for (i, _) in instances.iter().enumerate() {
        for &c in configs {
            for r in 0..repeats {
                work.push((i, c, r));
            }
        }
    }
    let queue = Mutex::new(work.into_iter());
    let results: Mutex<Vec<Result<RunRecord, BuildError>>> = Mutex::new(Vec::new());
    let jobs = jobs.max(1);
    std::thread::scope(|scope| {
        for _ in 0..jobs {
            scope.spawn(|| loop {
                let job = queue.lock().unwrap().next();
                let Some((i, c, r)) = job else { break };
                let (name, model) = &instances[i];
                let rec = run_single(name, model, c, r, options, support_cap);
                results.lock().unwrap().push(rec);
            });
        }
    });
    let mut records = Vec::new();
    for r in results.into_inner().unwrap() {
        records.push(r?);
    }
    records.sort_by(|a, b| {
        (&a.instance, &a.config, a.repeat).cmp(&(&b.instance, &b.config, b.repeat))
    });

    let mut summaries = Vec::new();
    let mut i = 0;
    while i < records.len() {
        let mut j = i;
        while j < records.len()
            && records[j].instance == records[i].instance
            && records[j].config == records[i].config
        {
            j += 1;
        }
        let group = &records[i..j];
        let rates: Vec<f64> = group.iter().map(|r| r.nodes_per_second).collect();
        let mems: Vec<f64> = group.iter().map(|r| r.peak_memory_bytes as f64).collect();
        summaries.push(Summary {
            instance: group[0].instance.clone(),
            config: group[0].config.clone(),
            repeats: group.len() as u32,
            nodes: group[0].nodes,
            solutions: group[0].solutions,
            median_node_rate: median(&rates),
            mad_node_rate: mad(&rates),
            median_memory_bytes: median(&mems),
            mad_memory_bytes: mad(&mems),
            nodes_identical: group.iter().all(|r| r.nodes == group[0].nodes),
        });
        i = j;
    }
    Ok(BenchReport { records, summaries })
}

impl BenchReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> serde_json::Result<BenchReport> {
        serde_json::from_str(text)
    }

    /// Records as CSV. The header carries the node definition so rates are
    /// interpretable without the documentation.
    pub fn records_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
        for r in &self.records {
            w.serialize(r).expect("record serializes");
        }
        let body = String::from_utf8(w.into_inner().expect("csv buffer")).unwrap();
        format!("# node = one branching decision (assign or refute child)\n{body}")
    }

    pub fn records_from_csv(text: &str) -> Result<Vec<RunRecord>, csv::Error> {
        let body: String = text
            .lines()
            .filter(|l| !l.starts_with('#'))
            .collect::<Vec<_>>()
            .join("\n");
        let mut r = csv::ReaderBuilder::new().from_reader(body.as_bytes());
        r.deserialize().collect()
    }

    pub fn summaries_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
        for s in &self.summaries {
            w.serialize(s).expect("summary serializes");
        }
        String::from_utf8(w.into_inner().expect("csv buffer")).unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{Instantiation, DEFAULT_SUPPORT_CAP};
    use crate::instances::build_rect_pack;

    #[test]
    fn median_and_mad() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert_eq!(mad(&[1.0, 1.0, 4.0]), 0.0);
        assert_eq!(median(&[7.0]), 7.0);
        assert_eq!(mad(&[7.0]), 0.0, "single repeat has zero deviation");
    }

    #[test]
    fn repeats_identical_and_round_trip() {
        let model = build_rect_pack(2, 3, 3).unwrap();
        let configs = vec![
            PropChoice::HaggisGac(Instantiation::Specific),
            PropChoice::Builtin,
        ];
        let report = run_benchmark(
            &[("rect-2-3-3".to_string(), model)],
            &configs,
            3,
            2,
            &SolverOptions::default(),
            DEFAULT_SUPPORT_CAP,
        )
        .unwrap();
        assert_eq!(report.records.len(), 6);
        for s in &report.summaries {
            assert!(s.nodes_identical);
            assert!(!s.instance.is_empty());
        }
        // node counts equal across the two configs
        assert_eq!(report.summaries[0].nodes, report.summaries[1].nodes);
        assert_eq!(report.summaries[0].solutions, report.summaries[1].solutions);

        // CSV round-trips through the JSON emitter losslessly
        let json = report.to_json();
        let back = BenchReport::from_json(&json).unwrap();
        assert_eq!(back.records, report.records);
        let csv_text = report.records_csv();
        let parsed = BenchReport::records_from_csv(&csv_text).unwrap();
        assert_eq!(parsed, report.records);
    }
}
