//! Measurement data: CSV ingestion, option schemas, preprocessing
//! (constant/collinear column removal, output normalization), t-wise
//! covering-array sampling and K-fold splits.

use std::collections::HashSet;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seeds;

/// Default tolerance for the collinearity filter.
pub const DEFAULT_COLLINEARITY_TOL: f64 = 1e-8;

/// Candidate spaces up to this size are enumerated exhaustively by the
/// greedy covering-array construction; larger spaces fall back to
/// tuple-seeded candidate generation.
const GREEDY_ENUM_CAP: u128 = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptionKind {
    Binary,
    Numeric,
}

/// One configuration option: a name, a kind, and the sorted list of values
/// it can take. Binary options always carry levels `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigOption {
    pub name: String,
    pub kind: OptionKind,
    pub levels: Vec<f64>,
}

impl ConfigOption {
    pub fn binary(name: impl Into<String>) -> Self {
        ConfigOption {
            name: name.into(),
            kind: OptionKind::Binary,
            levels: vec![0.0, 1.0],
        }
    }

    /// Numeric option over its observed levels (at least 2 distinct values).
    pub fn numeric(name: impl Into<String>, mut levels: Vec<f64>) -> Result<Self> {
        let name = name.into();
        levels.sort_by(|a, b| a.partial_cmp(b).unwrap());
        levels.dedup();
        if levels.len() < 2 {
            return Err(Error::data(format!(
                "numeric option '{name}' needs at least 2 distinct levels"
            )));
        }
        Ok(ConfigOption {
            name,
            kind: OptionKind::Numeric,
            levels,
        })
    }

    pub fn contains_level(&self, v: f64) -> bool {
        match self.kind {
            OptionKind::Binary => v == 0.0 || v == 1.0,
            OptionKind::Numeric => self.levels.iter().any(|&l| l == v),
        }
    }
}

/// Ordered option schema of a configurable system.
///
/// Datasets loaded from small sample files may contain numeric options with a
/// single observed level; those survive loading so that preprocessing can
/// drop them as constant columns, but they are rejected by the sampler.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptionSchema {
    pub options: Vec<ConfigOption>,
}

impl OptionSchema {
    pub fn new(options: Vec<ConfigOption>) -> Result<Self> {
        let schema = OptionSchema { options };
        schema.validate()?;
        Ok(schema)
    }

    pub fn len(&self) -> usize {
        self.options.len()
    }

    pub fn is_empty(&self) -> bool {
        self.options.is_empty()
    }

    pub fn names(&self) -> Vec<&str> {
        self.options.iter().map(|o| o.name.as_str()).collect()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.options.iter().position(|o| o.name == name)
    }

    pub fn validate(&self) -> Result<()> {
        if self.options.is_empty() {
            return Err(Error::data("schema has no options"));
        }
        let mut seen = HashSet::new();
        for opt in &self.options {
            if opt.name.is_empty() {
                return Err(Error::data("option names must be non-empty"));
            }
            if !seen.insert(opt.name.as_str()) {
                return Err(Error::data(format!("duplicate option name '{}'", opt.name)));
            }
            match opt.kind {
                OptionKind::Binary => {
                    if opt.levels != [0.0, 1.0] {
                        return Err(Error::data(format!(
                            "binary option '{}' must have levels [0, 1]",
                            opt.name
                        )));
                    }
                }
                OptionKind::Numeric => {
                    if opt.levels.is_empty() {
                        return Err(Error::data(format!(
                            "numeric option '{}' has no levels",
                            opt.name
                        )));
                    }
                    if opt
                        .levels
                        .windows(2)
                        .any(|w| !(w[0] < w[1]) || !w[0].is_finite() || !w[1].is_finite())
                    {
                        return Err(Error::data(format!(
                            "levels of option '{}' must be finite, sorted and distinct",
                            opt.name
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Stricter check used by the sampler: every option must expose at least
    /// two levels, otherwise no level combination can be enumerated.
    fn check_sampleable(&self) -> Result<()> {
        self.validate()?;
        for opt in &self.options {
            if opt.levels.len() < 2 {
                return Err(Error::data(format!(
                    "option '{}' has fewer than 2 observed levels; cannot sample",
                    opt.name
                )));
            }
        }
        Ok(())
    }
}

/// Measured configurations: an N x n matrix of option values plus the
/// length-N performance vector, in measurement units.
#[derive(Debug, Clone, PartialEq)]
pub struct PerformanceDataset {
    pub schema: OptionSchema,
    pub rows: Vec<Vec<f64>>,
    pub performance: Vec<f64>,
}

impl PerformanceDataset {
    pub fn new(schema: OptionSchema, rows: Vec<Vec<f64>>, performance: Vec<f64>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::data("dataset has no rows"));
        }
        if rows.len() != performance.len() {
            return Err(Error::data(format!(
                "{} rows but {} performance values",
                rows.len(),
                performance.len()
            )));
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != schema.len() {
                return Err(Error::data(format!(
                    "row {} has width {} but schema has {} options",
                    i + 1,
                    row.len(),
                    schema.len()
                )));
            }
            for (j, (&v, opt)) in row.iter().zip(&schema.options).enumerate() {
                if !opt.contains_level(v) {
                    return Err(Error::data(format!(
                        "row {}, column '{}': value {} is not an observed level",
                        i + 1,
                        schema.options[j].name,
                        v
                    )));
                }
            }
        }
        if performance.iter().any(|y| !y.is_finite()) {
            return Err(Error::data("performance values must be finite"));
        }
        Ok(PerformanceDataset {
            schema,
            rows,
            performance,
        })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn width(&self) -> usize {
        self.schema.len()
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[j]).collect()
    }

    /// Row subset by index, preserving the given order.
    pub fn subset(&self, idx: &[usize]) -> PerformanceDataset {
        PerformanceDataset {
            schema: self.schema.clone(),
            rows: idx.iter().map(|&i| self.rows[i].clone()).collect(),
            performance: idx.iter().map(|&i| self.performance[i]).collect(),
        }
    }

    /// Column subset by schema index, preserving order.
    pub fn select_columns(&self, keep: &[usize]) -> PerformanceDataset {
        let schema = OptionSchema {
            options: keep.iter().map(|&j| self.schema.options[j].clone()).collect(),
        };
        let rows = self
            .rows
            .iter()
            .map(|r| keep.iter().map(|&j| r[j]).collect())
            .collect();
        PerformanceDataset {
            schema,
            rows,
            performance: self.performance.clone(),
        }
    }

    pub fn with_performance(&self, performance: Vec<f64>) -> PerformanceDataset {
        PerformanceDataset {
            schema: self.schema.clone(),
            rows: self.rows.clone(),
            performance,
        }
    }
}

/// Affine map between measured performance and the normalized [0, 100] scale.
/// Fitted on training data only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub y_min: f64,
    pub y_max: f64,
}

impl Normalizer {
    pub fn fit(values: &[f64]) -> Result<Self> {
        let y_min = values.iter().cloned().fold(f64::INFINITY, f64::min);
        let y_max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if !(y_max > y_min) {
            return Err(Error::data(format!(
                "performance range is degenerate (min = max = {y_min}); cannot normalize"
            )));
        }
        Ok(Normalizer { y_min, y_max })
    }

    pub fn normalize(&self, y: f64) -> f64 {
        (y - self.y_min) / (self.y_max - self.y_min) * 100.0
    }

    pub fn denormalize(&self, v: f64) -> f64 {
        v / 100.0 * (self.y_max - self.y_min) + self.y_min
    }

    /// Map both endpoints of a normalized interval back to measured units.
    pub fn denormalize_interval(&self, lo: f64, hi: f64) -> Result<(f64, f64)> {
        if lo > hi {
            return Err(Error::data(format!("interval endpoints out of order: {lo} > {hi}")));
        }
        Ok((self.denormalize(lo), self.denormalize(hi)))
    }
}

/// Rescale the performance vector to [0, 100], returning the rescaled dataset
/// and the fitted normalizer.
pub fn normalize_performance(ds: &PerformanceDataset) -> Result<(PerformanceDataset, Normalizer)> {
    let nz = Normalizer::fit(&ds.performance)?;
    let perf = ds.performance.iter().map(|&y| nz.normalize(y)).collect();
    Ok((ds.with_performance(perf), nz))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DropReason {
    Constant,
    LinearlyDependent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroppedColumn {
    pub name: String,
    pub reason: DropReason,
}

/// Record of the preprocessing pass: which columns were removed and why.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreprocessReport {
    pub dropped_columns: Vec<DroppedColumn>,
    pub retained_count: usize,
}

/// Drop constant columns, then columns that are (within `tol`) linear
/// combinations of retained earlier columns. Column order is preserved.
pub fn remove_collinear(
    ds: &PerformanceDataset,
    tol: f64,
) -> Result<(PerformanceDataset, PreprocessReport)> {
    if !(tol > 0.0) {
        return Err(Error::config("collinearity tolerance must be > 0"));
    }
    let n_cols = ds.width();
    let mut dropped = Vec::new();
    let mut retained = Vec::new();
    // orthonormal basis of the retained column span
    let mut basis: Vec<Vec<f64>> = Vec::new();

    for j in 0..n_cols {
        let col = ds.column(j);
        let name = ds.schema.options[j].name.clone();
        if col.iter().all(|&v| v == col[0]) {
            dropped.push(DroppedColumn {
                name,
                reason: DropReason::Constant,
            });
            continue;
        }
        let norm = dot(&col, &col).sqrt();
        let mut resid = col.clone();
        // modified Gram-Schmidt, applied twice for numerical robustness
        for _ in 0..2 {
            for q in &basis {
                let c = dot(q, &resid);
                for (r, qi) in resid.iter_mut().zip(q) {
                    *r -= c * qi;
                }
            }
        }
        let rnorm = dot(&resid, &resid).sqrt();
        if rnorm < tol * norm {
            dropped.push(DroppedColumn {
                name,
                reason: DropReason::LinearlyDependent,
            });
        } else {
            for r in resid.iter_mut() {
                *r /= rnorm;
            }
            basis.push(resid);
            retained.push(j);
        }
    }

    if retained.is_empty() {
        return Err(Error::data(
            "all option columns were constant or linearly dependent; nothing to model",
        ));
    }
    let report = PreprocessReport {
        dropped_columns: dropped,
        retained_count: retained.len(),
    };
    Ok((ds.select_columns(&retained), report))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

// ---------------------------------------------------------------------------
// CSV ingestion
// ---------------------------------------------------------------------------

/// Load a measurement CSV: header row of option names plus one performance
/// column; every cell a finite number with '.' decimal separator.
///
/// Option kinds are inferred per column: binary iff all values lie in {0, 1},
/// numeric otherwise with levels equal to the sorted distinct values.
pub fn load_dataset(path: impl AsRef<Path>, performance_column: &str) -> Result<PerformanceDataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(file);

    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| Error::data(format!("cannot read header of '{}': {e}", path.display())))?
        .iter()
        .map(|s| s.to_string())
        .collect();
    if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
        return Err(Error::data(format!("'{}' is empty", path.display())));
    }
    let perf_idx = headers
        .iter()
        .position(|h| h == performance_column)
        .ok_or_else(|| {
            Error::data(format!(
                "performance column '{performance_column}' not found in '{}' (columns: {})",
                path.display(),
                headers.join(", ")
            ))
        })?;
    let option_names: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != perf_idx)
        .map(|(_, h)| h.clone())
        .collect();
    if option_names.is_empty() {
        return Err(Error::data(format!(
            "'{}' has no option columns besides '{performance_column}'",
            path.display()
        )));
    }

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut performance: Vec<f64> = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let record =
            record.map_err(|e| Error::data(format!("'{}' row {}: {e}", path.display(), r + 1)))?;
        if record.len() != headers.len() {
            return Err(Error::data(format!(
                "'{}' row {}: expected {} cells, found {}",
                path.display(),
                r + 1,
                headers.len(),
                record.len()
            )));
        }
        let mut row = Vec::with_capacity(option_names.len());
        for (c, cell) in record.iter().enumerate() {
            let v: f64 = cell.parse().unwrap_or(f64::NAN);
            if !v.is_finite() {
                return Err(Error::data(format!(
                    "'{}' row {}, column '{}': cannot parse '{}' as a finite number",
                    path.display(),
                    r + 1,
                    headers[c],
                    cell
                )));
            }
            if c == perf_idx {
                performance.push(v);
            } else {
                row.push(v);
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::data(format!("'{}' contains no data rows", path.display())));
    }

    let mut options = Vec::with_capacity(option_names.len());
    for (j, name) in option_names.iter().enumerate() {
        let mut levels: Vec<f64> = rows.iter().map(|r| r[j]).collect();
        levels.sort_by(|a, b| a.partial_cmp(b).unwrap());
        levels.dedup();
        if levels.iter().all(|&v| v == 0.0 || v == 1.0) {
            options.push(ConfigOption::binary(name.clone()));
        } else {
            options.push(ConfigOption {
                name: name.clone(),
                kind: OptionKind::Numeric,
                levels,
            });
        }
    }
    let schema = OptionSchema { options };
    schema.validate()?;
    PerformanceDataset::new(schema, rows, performance)
}

/// Write a dataset as CSV with the given performance column name. Values use
/// the shortest round-trip decimal representation.
pub fn write_csv(
    ds: &PerformanceDataset,
    performance_column: &str,
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    for opt in &ds.schema.options {
        out.push_str(&opt.name);
        out.push(',');
    }
    out.push_str(performance_column);
    out.push('\n');
    for (row, y) in ds.rows.iter().zip(&ds.performance) {
        for v in row {
            out.push_str(&format!("{v},"));
        }
        out.push_str(&format!("{y}\n"));
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

// ---------------------------------------------------------------------------
// t-wise covering arrays
// ---------------------------------------------------------------------------

struct SubsetInfo {
    opts: Vec<usize>,
    offset: usize,
    dims: Vec<usize>,
}

struct TupleSpace {
    subsets: Vec<SubsetInfo>,
    covered: Vec<bool>,
    total: usize,
    remaining: usize,
}

impl TupleSpace {
    fn new(level_counts: &[usize], t: usize) -> Self {
        let mut subsets = Vec::new();
        let mut offset = 0;
        for opts in combinations(level_counts.len(), t) {
            let dims: Vec<usize> = opts.iter().map(|&o| level_counts[o]).collect();
            let size: usize = dims.iter().product();
            subsets.push(SubsetInfo { opts, offset, dims });
            offset += size;
        }
        TupleSpace {
            subsets,
            covered: vec![false; offset],
            total: offset,
            remaining: offset,
        }
    }

    fn tuple_index(info: &SubsetInfo, cfg: &[usize]) -> usize {
        let mut idx = 0;
        for (pos, &o) in info.opts.iter().enumerate() {
            idx = idx * info.dims[pos] + cfg[o];
        }
        info.offset + idx
    }

    fn count_new(&self, cfg: &[usize]) -> usize {
        self.subsets
            .iter()
            .filter(|info| !self.covered[Self::tuple_index(info, cfg)])
            .count()
    }

    fn mark(&mut self, cfg: &[usize]) {
        for s in 0..self.subsets.len() {
            let idx = Self::tuple_index(&self.subsets[s], cfg);
            if !self.covered[idx] {
                self.covered[idx] = true;
                self.remaining -= 1;
            }
        }
    }

    /// Restrict the universe to tuples realizable by the candidate list:
    /// anything no candidate exhibits is marked covered up front.
    fn restrict_to(&mut self, candidates: &[Vec<usize>]) {
        let mut realizable = vec![false; self.covered.len()];
        for cfg in candidates {
            for info in &self.subsets {
                realizable[Self::tuple_index(info, cfg)] = true;
            }
        }
        for (c, r) in self.covered.iter_mut().zip(&realizable) {
            if !*r && !*c {
                *c = true;
                self.remaining -= 1;
                self.total -= 1;
            }
        }
    }
}

fn combinations(n: usize, t: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(t);
    fn rec(start: usize, n: usize, t: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == t {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, t, cur, out);
            cur.pop();
        }
    }
    rec(0, n, t, &mut cur, &mut out);
    out
}

/// Greedy pick loop over an explicit candidate list: repeatedly take the
/// candidate covering the most uncovered tuples, ties broken by seeded
/// random choice. Returns indices into `candidates` in pick order.
fn greedy_cover(candidates: &[Vec<usize>], space: &mut TupleSpace, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut picks = Vec::new();
    while space.remaining > 0 {
        let mut best = 0;
        let mut ties: Vec<usize> = Vec::new();
        for (i, cfg) in candidates.iter().enumerate() {
            let c = space.count_new(cfg);
            if c > best {
                best = c;
                ties.clear();
                ties.push(i);
            } else if c == best && c > 0 {
                ties.push(i);
            }
        }
        debug_assert!(best > 0, "uncovered tuples must be coverable");
        let choice = ties[rng.gen_range(0..ties.len())];
        space.mark(&candidates[choice]);
        picks.push(choice);
    }
    picks
}

fn enumerate_full_factorial(level_counts: &[usize]) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cfg = vec![0usize; level_counts.len()];
    loop {
        out.push(cfg.clone());
        let mut j = level_counts.len();
        loop {
            if j == 0 {
                return out;
            }
            j -= 1;
            cfg[j] += 1;
            if cfg[j] < level_counts[j] {
                break;
            }
            cfg[j] = 0;
        }
    }
}

/// Construct a t-wise covering array over the schema's level space: for every
/// subset of `t` options and every combination of their levels, at least one
/// returned configuration exhibits that combination. Greedy construction,
/// deterministic given `seed`.
pub fn twise_sample(schema: &OptionSchema, t: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    schema.check_sampleable()?;
    let n = schema.len();
    if t < 1 || t > 3 || t > n {
        return Err(Error::config(format!(
            "t must satisfy 1 <= t <= min(3, {n}); got {t}"
        )));
    }
    let level_counts: Vec<usize> = schema.options.iter().map(|o| o.levels.len()).collect();
    let mut space = TupleSpace::new(&level_counts, t);
    let mut rng = seeds::rng_for(seed, 0x7715E);

    let total_space: u128 = level_counts.iter().map(|&c| c as u128).product();
    let configs: Vec<Vec<usize>> = if total_space <= GREEDY_ENUM_CAP {
        let candidates = enumerate_full_factorial(&level_counts);
        let picks = greedy_cover(&candidates, &mut space, &mut rng);
        picks.into_iter().map(|i| candidates[i].clone()).collect()
    } else {
        greedy_cover_seeded(&level_counts, &mut space, &mut rng)
    };

    Ok(configs
        .into_iter()
        .map(|cfg| {
            cfg.iter()
                .enumerate()
                .map(|(j, &li)| schema.options[j].levels[li])
                .collect()
        })
        .collect())
}

/// Covering-array construction for spaces too large to enumerate: each round
/// builds a batch of candidates seeded from uncovered tuples, completes them
/// option-by-option to maximize fresh coverage, and keeps the best.
fn greedy_cover_seeded(
    level_counts: &[usize],
    space: &mut TupleSpace,
    rng: &mut ChaCha8Rng,
) -> Vec<Vec<usize>> {
    const BATCH: usize = 48;
    let mut configs = Vec::new();
    while space.remaining > 0 {
        // indices of currently uncovered tuples
        let uncovered: Vec<usize> = space
            .covered
            .iter()
            .enumerate()
            .filter(|(_, &c)| !c)
            .map(|(i, _)| i)
            .collect();
        let mut best_cfg: Option<Vec<usize>> = None;
        let mut best_count = 0;
        for _ in 0..BATCH.min(uncovered.len().max(1)) {
            let tuple_id = uncovered[rng.gen_range(0..uncovered.len())];
            let cfg = build_candidate(level_counts, space, tuple_id, rng);
            let c = space.count_new(&cfg);
            if c > best_count {
                best_count = c;
                best_cfg = Some(cfg);
            }
        }
        let cfg = best_cfg.expect("seeded candidate covers its own tuple");
        space.mark(&cfg);
        configs.push(cfg);
    }
    configs
}

/// Fix the options of one uncovered tuple, then assign the remaining options
/// in random order, each to the level adding the most newly covered tuples.
fn build_candidate(
    level_counts: &[usize],
    space: &TupleSpace,
    tuple_id: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<usize> {
    let n = level_counts.len();
    let info_idx = space
        .subsets
        .partition_point(|s| s.offset <= tuple_id)
        .saturating_sub(1);
    let info = &space.subsets[info_idx];
    let mut rem = tuple_id - info.offset;
    let mut cfg = vec![usize::MAX; n];
    for pos in (0..info.opts.len()).rev() {
        cfg[info.opts[pos]] = rem % info.dims[pos];
        rem /= info.dims[pos];
    }
    let mut order: Vec<usize> = (0..n).filter(|&o| cfg[o] == usize::MAX).collect();
    order.shuffle(rng);
    for o in order {
        let mut best = -1i64;
        let mut ties = Vec::new();
        for li in 0..level_counts[o] {
            cfg[o] = li;
            let c = count_new_partial(space, &cfg) as i64;
            if c > best {
                best = c;
                ties.clear();
                ties.push(li);
            } else if c == best {
                ties.push(li);
            }
        }
        cfg[o] = ties[rng.gen_range(0..ties.len())];
    }
    cfg
}

/// Count uncovered tuples matched by a partially assigned configuration
/// (unassigned options marked with usize::MAX).
fn count_new_partial(space: &TupleSpace, cfg: &[usize]) -> usize {
    space
        .subsets
        .iter()
        .filter(|info| {
            info.opts.iter().all(|&o| cfg[o] != usize::MAX)
                && !space.covered[TupleSpace::tuple_index(info, cfg)]
        })
        .count()
}

/// Covering-array selection restricted to measured rows: candidates are the
/// distinct configurations of `ds`, and the tuple universe is restricted to
/// combinations that actually occur. Returns row indices in pick order.
pub fn twise_sample_rows(ds: &PerformanceDataset, t: usize, seed: u64) -> Result<Vec<usize>> {
    ds.schema.check_sampleable()?;
    let n = ds.width();
    if t < 1 || t > 3 || t > n {
        return Err(Error::config(format!(
            "t must satisfy 1 <= t <= min(3, {n}); got {t}"
        )));
    }
    let level_counts: Vec<usize> = ds.schema.options.iter().map(|o| o.levels.len()).collect();

    // distinct configurations, keeping the first row exhibiting each
    let mut seen = HashSet::new();
    let mut candidates: Vec<Vec<usize>> = Vec::new();
    let mut cand_rows: Vec<usize> = Vec::new();
    for (i, row) in ds.rows.iter().enumerate() {
        let cfg: Vec<usize> = row
            .iter()
            .zip(&ds.schema.options)
            .map(|(&v, opt)| opt.levels.iter().position(|&l| l == v).unwrap())
            .collect();
        let key: Vec<u64> = cfg.iter().map(|&x| x as u64).collect();
        if seen.insert(key) {
            candidates.push(cfg);
            cand_rows.push(i);
        }
    }

    let mut space = TupleSpace::new(&level_counts, t);
    space.restrict_to(&candidates);
    let mut rng = seeds::rng_for(seed, 0x7715E);
    let picks = greedy_cover(&candidates, &mut space, &mut rng);
    Ok(picks.into_iter().map(|i| cand_rows[i]).collect())
}

/// Count how many of the possible t-tuples a set of configurations covers.
pub fn twise_coverage(schema: &OptionSchema, t: usize, configs: &[Vec<f64>]) -> Result<(usize, usize)> {
    schema.check_sampleable()?;
    let level_counts: Vec<usize> = schema.options.iter().map(|o| o.levels.len()).collect();
    let mut space = TupleSpace::new(&level_counts, t);
    for row in configs {
        let cfg: Vec<usize> = row
            .iter()
            .zip(&schema.options)
            .map(|(&v, opt)| {
                opt.levels
                    .iter()
                    .position(|&l| l == v)
                    .ok_or_else(|| Error::data(format!("value {v} is not a level")))
            })
            .collect::<Result<_>>()?;
        space.mark(&cfg);
    }
    Ok((space.total - space.remaining, space.total))
}

// ---------------------------------------------------------------------------
// K-fold splits
// ---------------------------------------------------------------------------

/// Shuffle 0..n and partition into K folds with sizes differing by at most 1.
/// Deterministic given `seed`; indices within each fold are sorted.
pub fn kfold_split(n: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(Error::config(format!("K must be at least 2; got {k}")));
    }
    if n < k {
        return Err(Error::data(format!("cannot split {n} points into {k} folds")));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut seeds::rng_for(seed, 0xF01D));
    let base = n / k;
    let rem = n % k;
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let size = base + usize::from(f < rem);
        let mut fold: Vec<usize> = idx[start..start + size].to_vec();
        fold.sort_unstable();
        folds.push(fold);
        start += size;
    }
    Ok(folds)
}
