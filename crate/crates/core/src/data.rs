//! Canonical data model and preprocessing pipeline: trace ingestion,
//! forward-fill imputation, min-max normalization, sliding windows, and
//! deterministic dataset splitting.
//!
//! Feature vector order is fixed as (SOC, speed, force, voltage,
//! temperature, short_circuit) so serialized model weights stay portable
//! across runs; see [`FEATURE_NAMES`].

use std::collections::BTreeSet;
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::mat::Mat;

/// Number of model input features per time step.
pub const FEATURE_COUNT: usize = 6;
/// Fixed feature order of the normalized matrix columns.
pub const FEATURE_NAMES: [&str; FEATURE_COUNT] =
    ["soc", "speed_mm_min", "force_kN", "voltage_V", "temperature_C", "short_circuit"];
/// Column index of the forecast target (temperature) in the feature matrix.
pub const TEMPERATURE_CHANNEL: usize = 4;

/// Expected CSV header written and read by this crate.
pub const CSV_COLUMNS: [&str; 7] =
    ["time_s", "soc", "speed_mm_min", "force_kN", "voltage_V", "temperature_C", "short_circuit"];

/// Relative tolerance for accepting sample-interval jitter at ingestion.
pub const DT_REL_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("required column '{0}' missing from CSV header")]
    MissingColumn(String),
    #[error("non-uniform sampling: gap {gap} at row {row} deviates from dt {dt}")]
    NonUniformSampling { row: usize, gap: f64, dt: f64 },
    #[error("file contains no data rows")]
    EmptyFile,
    #[error("channel '{channel}' starts with a missing value; forward fill has no source")]
    LeadingMissing { channel: &'static str },
    #[error("no traces provided")]
    EmptyInput,
    #[error("normalization params cover {params} channels, trace has {trace}")]
    ChannelMismatch { params: usize, trace: usize },
    #[error("matrix with {rows} rows is too short for window length {n} (need >= n + 1)")]
    TooShort { rows: usize, n: usize },
    #[error("grouped split needs at least 3 distinct scenarios, found {found}")]
    InsufficientGroups { found: usize },
    #[error("invalid split spec: {0}")]
    BadSplitSpec(String),
    #[error("invalid trace: {0}")]
    InvalidTrace(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Synchronized multi-channel time series for one abuse test.
///
/// Numeric channels use `f64::NAN` as the missing-value marker between
/// loading and [`impute_forward_fill`]. `short_circuit` is stored as a
/// 0/1 numeric channel (it enters the feature matrix numerically); use
/// [`Trace::short_circuit_at`] for the boolean view.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub time_s: Vec<f64>,
    pub soc_frac: Vec<f64>,
    pub speed_mm_min: Vec<f64>,
    pub force_kn: Vec<f64>,
    pub voltage_v: Vec<f64>,
    pub temperature_c: Vec<f64>,
    pub short_circuit: Vec<f64>,
    /// Uniform sample interval; `None` for single-sample traces.
    pub dt_s: Option<f64>,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.time_s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.time_s.is_empty()
    }

    pub fn short_circuit_at(&self, k: usize) -> bool {
        self.short_circuit[k] >= 0.5
    }

    /// Validates channel lengths, sampling uniformity, and short-circuit
    /// monotonicity (missing cells are skipped; they are resolved by
    /// imputation before any downstream use).
    pub fn validate(&self) -> Result<(), DataError> {
        let n = self.len();
        if n == 0 {
            return Err(DataError::EmptyFile);
        }
        let lens = [
            self.soc_frac.len(),
            self.speed_mm_min.len(),
            self.force_kn.len(),
            self.voltage_v.len(),
            self.temperature_c.len(),
            self.short_circuit.len(),
        ];
        if lens.iter().any(|&l| l != n) {
            return Err(DataError::InvalidTrace(format!(
                "channel lengths {lens:?} do not all match time length {n}"
            )));
        }
        if let Some(dt) = self.dt_s {
            if dt <= 0.0 {
                return Err(DataError::InvalidTrace(format!("dt_s must be positive, got {dt}")));
            }
            for k in 1..n {
                let gap = self.time_s[k] - self.time_s[k - 1];
                if ((gap - dt) / dt).abs() > DT_REL_TOLERANCE {
                    return Err(DataError::NonUniformSampling { row: k, gap, dt });
                }
            }
        }
        let mut seen_true = false;
        for (k, &v) in self.short_circuit.iter().enumerate() {
            if v.is_nan() {
                continue;
            }
            let flag = v >= 0.5;
            if seen_true && !flag {
                return Err(DataError::InvalidTrace(format!(
                    "short_circuit flag drops back to 0 at row {k}"
                )));
            }
            seen_true |= flag;
        }
        Ok(())
    }

    fn channels_mut(&mut self) -> [(&'static str, &mut Vec<f64>); 6] {
        [
            ("soc", &mut self.soc_frac),
            ("speed_mm_min", &mut self.speed_mm_min),
            ("force_kN", &mut self.force_kn),
            ("voltage_V", &mut self.voltage_v),
            ("temperature_C", &mut self.temperature_c),
            ("short_circuit", &mut self.short_circuit),
        ]
    }

    fn feature_channels(&self) -> [&[f64]; FEATURE_COUNT] {
        [
            &self.soc_frac,
            &self.speed_mm_min,
            &self.force_kn,
            &self.voltage_v,
            &self.temperature_c,
            &self.short_circuit,
        ]
    }
}

/// Maps canonical channel names to the column names present in a CSV file.
#[derive(Debug, Clone)]
pub struct ColumnSchema {
    pub time: String,
    pub soc: String,
    pub speed: String,
    pub force: String,
    pub voltage: String,
    pub temperature: String,
    pub short_circuit: String,
}

impl Default for ColumnSchema {
    fn default() -> Self {
        Self {
            time: "time_s".into(),
            soc: "soc".into(),
            speed: "speed_mm_min".into(),
            force: "force_kN".into(),
            voltage: "voltage_V".into(),
            temperature: "temperature_C".into(),
            short_circuit: "short_circuit".into(),
        }
    }
}

/// Loads a trace CSV. Empty cells become missing markers for
/// [`impute_forward_fill`]; `dt_s` is inferred from the first two
/// timestamps and further gaps must match it within [`DT_REL_TOLERANCE`].
pub fn load_trace_csv(path: &Path, schema: &ColumnSchema) -> Result<Trace, DataError> {
    let text = std::fs::read_to_string(path)?;
    parse_trace_csv(&text, schema)
}

pub fn parse_trace_csv(text: &str, schema: &ColumnSchema) -> Result<Trace, DataError> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or(DataError::EmptyFile)?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    let find = |name: &str| -> Result<usize, DataError> {
        cols.iter()
            .position(|c| *c == name)
            .ok_or_else(|| DataError::MissingColumn(name.to_string()))
    };
    let idx = [
        find(&schema.time)?,
        find(&schema.soc)?,
        find(&schema.speed)?,
        find(&schema.force)?,
        find(&schema.voltage)?,
        find(&schema.temperature)?,
        find(&schema.short_circuit)?,
    ];

    let mut channels: [Vec<f64>; 7] = Default::default();
    for (line_no, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        for (c, &col) in idx.iter().enumerate() {
            let cell = cells.get(col).copied().unwrap_or("");
            let value = if cell.is_empty() {
                f64::NAN
            } else {
                cell.parse::<f64>().map_err(|e| DataError::Parse {
                    line: line_no + 1,
                    msg: format!("cannot parse '{cell}': {e}"),
                })?
            };
            channels[c].push(value);
        }
    }

    let [time, soc, speed, force, voltage, temperature, short] = channels;
    if time.is_empty() {
        return Err(DataError::EmptyFile);
    }
    if time.iter().any(|t| t.is_nan()) {
        return Err(DataError::Parse { line: 0, msg: "time column has empty cells".into() });
    }

    let dt_s = if time.len() >= 2 {
        let dt = time[1] - time[0];
        if dt <= 0.0 {
            return Err(DataError::NonUniformSampling { row: 1, gap: dt, dt });
        }
        Some(dt)
    } else {
        None
    };

    let trace = Trace {
        time_s: time,
        soc_frac: soc,
        speed_mm_min: speed,
        force_kn: force,
        voltage_v: voltage,
        temperature_c: temperature,
        short_circuit: short,
        dt_s,
    };
    trace.validate()?;
    Ok(trace)
}

/// Writes a trace in the canonical CSV schema.
pub fn write_trace_csv(trace: &Trace, path: &Path) -> Result<(), DataError> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "{}", CSV_COLUMNS.join(","))?;
    for k in 0..trace.len() {
        writeln!(
            out,
            "{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{}",
            trace.time_s[k],
            trace.soc_frac[k],
            trace.speed_mm_min[k],
            trace.force_kn[k],
            trace.voltage_v[k],
            trace.temperature_c[k],
            if trace.short_circuit_at(k) { 1 } else { 0 },
        )?;
    }
    out.flush()?;
    Ok(())
}

/// Replaces every missing cell with the most recent non-missing value in the
/// same channel. Errors if a channel starts missing. Idempotent.
pub fn impute_forward_fill(trace: &Trace) -> Result<Trace, DataError> {
    let mut filled = trace.clone();
    for (name, channel) in filled.channels_mut() {
        if channel.first().is_some_and(|v| v.is_nan()) {
            return Err(DataError::LeadingMissing { channel: name });
        }
        let mut last = f64::NAN;
        for v in channel.iter_mut() {
            if v.is_nan() {
                *v = last;
            } else {
                last = *v;
            }
        }
    }
    filled.validate()?;
    Ok(filled)
}

/// Per-channel min/max statistics fitted on training traces.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizationParams {
    pub mins: Vec<f64>,
    pub maxs: Vec<f64>,
}

impl NormalizationParams {
    pub fn channel_count(&self) -> usize {
        self.mins.len()
    }

    /// Channels with max == min map to 0 under normalization.
    pub fn is_constant(&self, channel: usize) -> bool {
        self.maxs[channel] == self.mins[channel]
    }

    pub fn normalize_value(&self, channel: usize, x: f64) -> f64 {
        if self.is_constant(channel) {
            0.0
        } else {
            (x - self.mins[channel]) / (self.maxs[channel] - self.mins[channel])
        }
    }

    pub fn denormalize_value(&self, channel: usize, x: f64) -> f64 {
        if self.is_constant(channel) {
            self.mins[channel]
        } else {
            x * (self.maxs[channel] - self.mins[channel]) + self.mins[channel]
        }
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), DataError> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(out, "channel,min,max,constant")?;
        for (c, name) in FEATURE_NAMES.iter().enumerate() {
            writeln!(out, "{name},{},{},{}", self.mins[c], self.maxs[c], self.is_constant(c))?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Fits per-channel min/max over the union of the provided traces.
pub fn fit_normalization(traces: &[Trace]) -> Result<NormalizationParams, DataError> {
    if traces.is_empty() {
        return Err(DataError::EmptyInput);
    }
    let mut mins = vec![f64::INFINITY; FEATURE_COUNT];
    let mut maxs = vec![f64::NEG_INFINITY; FEATURE_COUNT];
    for trace in traces {
        for (c, channel) in trace.feature_channels().iter().enumerate() {
            for &v in channel.iter() {
                if v.is_nan() {
                    continue;
                }
                mins[c] = mins[c].min(v);
                maxs[c] = maxs[c].max(v);
            }
        }
    }
    if mins.iter().any(|m| !m.is_finite()) {
        return Err(DataError::InvalidTrace("a channel has no finite values".into()));
    }
    Ok(NormalizationParams { mins, maxs })
}

/// Min-max normalizes a trace into an `[rows × 6]` feature matrix.
/// Values outside the fitted range are allowed to leave [0, 1].
pub fn normalize(trace: &Trace, params: &NormalizationParams) -> Result<Mat<f64>, DataError> {
    if params.channel_count() != FEATURE_COUNT {
        return Err(DataError::ChannelMismatch {
            params: params.channel_count(),
            trace: FEATURE_COUNT,
        });
    }
    let channels = trace.feature_channels();
    Ok(Mat::from_fn(trace.len(), FEATURE_COUNT, |r, c| {
        params.normalize_value(c, channels[c][r])
    }))
}

/// Window samples produced from a single normalized feature matrix.
#[derive(Debug, Clone)]
pub struct WindowList {
    pub windows: Vec<Mat<f64>>,
    pub targets: Vec<f64>,
    pub starts: Vec<usize>,
    pub n: usize,
}

/// Slides a length-`n` window over the matrix; sample `i` covers rows
/// `[i, i + n)` with the target taken from `target_channel` at row `i + n`,
/// yielding exactly `rows - n` samples.
pub fn make_windows(
    matrix: &Mat<f64>,
    target_channel: usize,
    n: usize,
) -> Result<WindowList, DataError> {
    let rows = matrix.rows();
    if rows <= n {
        return Err(DataError::TooShort { rows, n });
    }
    let count = rows - n;
    let mut windows = Vec::with_capacity(count);
    let mut targets = Vec::with_capacity(count);
    let mut starts = Vec::with_capacity(count);
    for i in 0..count {
        windows.push(Mat::from_fn(n, matrix.cols(), |r, c| matrix.get(i + r, c)));
        targets.push(matrix.get(i + n, target_channel));
        starts.push(i);
    }
    Ok(WindowList { windows, targets, starts, n })
}

/// Normalized feature windows with scalar next-step targets, plus the
/// normalization parameters needed to invert predictions and per-sample
/// provenance (source scenario and window start row).
#[derive(Debug, Clone)]
pub struct WindowedDataset {
    pub windows: Vec<Mat<f64>>,
    pub targets: Vec<f64>,
    pub n: usize,
    pub d: usize,
    pub target_channel: usize,
    pub params: NormalizationParams,
    /// Distinct source scenario ids, in first-seen order.
    pub scenarios: Vec<String>,
    /// Sample interval of each scenario's source trace, aligned with
    /// `scenarios`; NaN when the source interval was unknown.
    pub scenario_dt_s: Vec<f64>,
    /// Index into `scenarios` per sample.
    pub sample_scenario: Vec<usize>,
    /// Window start row in the source trace per sample.
    pub sample_start: Vec<usize>,
    /// Time of the target row in the source trace per sample.
    pub sample_time_s: Vec<f64>,
}

impl WindowedDataset {
    /// Builds a dataset from `(scenario id, trace)` pairs using previously
    /// fitted normalization parameters. Traces shorter than `n + 1` rows
    /// are rejected.
    pub fn from_traces(
        traces: &[(String, Trace)],
        params: &NormalizationParams,
        n: usize,
        target_channel: usize,
    ) -> Result<Self, DataError> {
        if traces.is_empty() {
            return Err(DataError::EmptyInput);
        }
        let mut ds = WindowedDataset {
            windows: Vec::new(),
            targets: Vec::new(),
            n,
            d: FEATURE_COUNT,
            target_channel,
            params: params.clone(),
            scenarios: Vec::new(),
            scenario_dt_s: Vec::new(),
            sample_scenario: Vec::new(),
            sample_start: Vec::new(),
            sample_time_s: Vec::new(),
        };
        for (id, trace) in traces {
            let matrix = normalize(trace, params)?;
            let list = make_windows(&matrix, target_channel, n)?;
            let scenario_idx = ds.scenarios.len();
            ds.scenarios.push(id.clone());
            ds.scenario_dt_s.push(trace.dt_s.unwrap_or(f64::NAN));
            for ((window, target), start) in
                list.windows.into_iter().zip(list.targets).zip(list.starts)
            {
                ds.windows.push(window);
                ds.targets.push(target);
                ds.sample_scenario.push(scenario_idx);
                ds.sample_start.push(start);
                ds.sample_time_s.push(trace.time_s[start + n]);
            }
        }
        Ok(ds)
    }

    pub fn len(&self) -> usize {
        self.windows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.windows.is_empty()
    }

    /// Sample indices per scenario, in scenario order; window order within a
    /// scenario follows the start index, so consecutive samples form the
    /// trace's consecutive prediction sequence.
    pub fn samples_by_scenario(&self) -> Vec<Vec<usize>> {
        let mut groups = vec![Vec::new(); self.scenarios.len()];
        for (sample, &scenario) in self.sample_scenario.iter().enumerate() {
            groups[scenario].push(sample);
        }
        groups
    }

    fn subset(&self, indices: &[usize]) -> WindowedDataset {
        let mut scenarios = Vec::new();
        let mut scenario_dt = Vec::new();
        let mut remap = vec![usize::MAX; self.scenarios.len()];
        let mut ds = WindowedDataset {
            windows: Vec::with_capacity(indices.len()),
            targets: Vec::with_capacity(indices.len()),
            n: self.n,
            d: self.d,
            target_channel: self.target_channel,
            params: self.params.clone(),
            scenarios: Vec::new(),
            scenario_dt_s: Vec::new(),
            sample_scenario: Vec::with_capacity(indices.len()),
            sample_start: Vec::with_capacity(indices.len()),
            sample_time_s: Vec::with_capacity(indices.len()),
        };
        for &i in indices {
            let old = self.sample_scenario[i];
            if remap[old] == usize::MAX {
                remap[old] = scenarios.len();
                scenarios.push(self.scenarios[old].clone());
                scenario_dt.push(self.scenario_dt_s[old]);
            }
            ds.windows.push(self.windows[i].clone());
            ds.targets.push(self.targets[i]);
            ds.sample_scenario.push(remap[old]);
            ds.sample_start.push(self.sample_start[i]);
            ds.sample_time_s.push(self.sample_time_s[i]);
        }
        ds.scenarios = scenarios;
        ds.scenario_dt_s = scenario_dt;
        ds
    }

    /// Writes the flat index layout (scenario id, start index, target) that,
    /// together with the source traces and normalization parameters,
    /// reconstructs every sample.
    pub fn write_index_csv(&self, path: &Path) -> Result<(), DataError> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(out, "scenario,start,target,target_time_s")?;
        for i in 0..self.len() {
            writeln!(
                out,
                "{},{},{},{}",
                self.scenarios[self.sample_scenario[i]],
                self.sample_start[i],
                self.targets[i],
                self.sample_time_s[i],
            )?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Train/validation/test split configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    pub train_frac: f64,
    pub val_frac: f64,
    pub test_frac: f64,
    pub seed: u64,
    /// When set, scenarios are assigned to splits as whole groups so no
    /// experimental condition appears in two splits.
    pub by_scenario: bool,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self { train_frac: 0.7, val_frac: 0.2, test_frac: 0.1, seed: 0, by_scenario: true }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<(), DataError> {
        let fracs = [self.train_frac, self.val_frac, self.test_frac];
        if fracs.iter().any(|f| *f <= 0.0 || *f >= 1.0) {
            return Err(DataError::BadSplitSpec(format!(
                "fractions must lie in (0, 1), got {fracs:?}"
            )));
        }
        let sum: f64 = fracs.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(DataError::BadSplitSpec(format!("fractions sum to {sum}, expected 1")));
        }
        Ok(())
    }
}

/// Allocates `total` items to three splits matching the fractions within
/// one item, each split non-empty when `total >= 3`.
fn allocate_counts(total: usize, spec: &SplitSpec) -> (usize, usize, usize) {
    let mut train = (spec.train_frac * total as f64).round() as usize;
    let mut val = (spec.val_frac * total as f64).round() as usize;
    train = train.clamp(1, total.saturating_sub(2));
    val = val.clamp(1, total - train - 1);
    let test = total - train - val;
    (train, val, test)
}

/// Deterministically partitions scenario ids into train/val/test groups.
///
/// Ids are sorted before shuffling so the result depends only on the id set
/// and the seed, not input order.
pub fn split_scenario_ids(
    ids: &[String],
    spec: &SplitSpec,
) -> Result<(Vec<String>, Vec<String>, Vec<String>), DataError> {
    spec.validate()?;
    let distinct: BTreeSet<&String> = ids.iter().collect();
    if distinct.len() < 3 {
        return Err(DataError::InsufficientGroups { found: distinct.len() });
    }
    let mut sorted: Vec<String> = distinct.into_iter().cloned().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    sorted.shuffle(&mut rng);
    let (n_train, n_val, _) = allocate_counts(sorted.len(), spec);
    let test = sorted.split_off(n_train + n_val);
    let val = sorted.split_off(n_train);
    Ok((sorted, val, test))
}

/// Splits a windowed dataset into train/val/test. With `by_scenario` set,
/// whole scenarios are assigned to one split each; otherwise samples are
/// shuffled individually. Deterministic under a fixed seed.
pub fn split(
    dataset: &WindowedDataset,
    spec: &SplitSpec,
) -> Result<(WindowedDataset, WindowedDataset, WindowedDataset), DataError> {
    spec.validate()?;
    if spec.by_scenario {
        let (train_ids, val_ids, test_ids) = split_scenario_ids(&dataset.scenarios, spec)?;
        let pick = |ids: &[String]| -> Vec<usize> {
            (0..dataset.len())
                .filter(|&i| ids.contains(&dataset.scenarios[dataset.sample_scenario[i]]))
                .collect()
        };
        Ok((
            dataset.subset(&pick(&train_ids)),
            dataset.subset(&pick(&val_ids)),
            dataset.subset(&pick(&test_ids)),
        ))
    } else {
        if dataset.len() < 3 {
            return Err(DataError::InsufficientGroups { found: dataset.len() });
        }
        let mut order: Vec<usize> = (0..dataset.len()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        order.shuffle(&mut rng);
        let (n_train, n_val, _) = allocate_counts(order.len(), spec);
        let test: Vec<usize> = order.split_off(n_train + n_val);
        let val: Vec<usize> = order.split_off(n_train);
        Ok((dataset.subset(&order), dataset.subset(&val), dataset.subset(&test)))
    }
}
