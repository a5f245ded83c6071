//! Candidate model initialization and the alternating label/model
//! optimization of a window.

use std::fmt::Write as _;

use log::{debug, info};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::events::{Event, EventWindow};
use crate::graph::window_graph;
use crate::motion::{fit_motion, Family, FitOptions, Kernel, MotionModel};
use crate::optim::{
    alpha_expansion, build_unary_tables, energy_terms, prune_models, unary_table, EnergyParams, Labeling, ModelPool,
    PoolEntry, UnaryTables,
};

/// How candidate models are proposed.
#[derive(Clone, Debug, PartialEq)]
pub struct InitConfig {
    /// Number of subdivision levels; level `n` splits the image into
    /// `2^n x 2^n` tiles.
    pub levels: usize,
    pub families: Vec<Family>,
    /// Use only the finest level plus the whole volume.
    pub finest_only: bool,
    /// Tiles with fewer events are skipped.
    pub min_events: usize,
    pub fit: FitOptions,
}

impl Default for InitConfig {
    fn default() -> Self {
        Self {
            levels: 4,
            families: vec![Family::Flow2],
            finest_only: false,
            min_events: 30,
            fit: FitOptions::default(),
        }
    }
}

impl InitConfig {
    pub fn validate(&self) -> Result<()> {
        if self.levels == 0 || self.levels > 12 {
            return Err(Error::Config(format!("levels must be in 1..=12, got {}", self.levels)));
        }
        if self.families.is_empty() {
            return Err(Error::Config("at least one motion family is required".to_string()));
        }
        Ok(())
    }

    fn level_list(&self) -> Vec<usize> {
        if self.finest_only && self.levels > 1 {
            vec![0, self.levels - 1]
        } else {
            (0..self.levels).collect()
        }
    }
}

/// Settings of [`segment`].
#[derive(Clone, Debug, PartialEq)]
pub struct SegmentConfig {
    pub init: InitConfig,
    pub energy: EnergyParams,
    /// Kernel used when refitting clusters.
    pub refit_kernel: Kernel,
    pub max_iters: usize,
    /// Stop once an iteration lowers the energy by less than this fraction.
    pub rel_tol: f64,
    /// Refit every final cluster once more, without the energy check.
    pub polish: bool,
}

impl Default for SegmentConfig {
    fn default() -> Self {
        Self {
            init: InitConfig::default(),
            energy: EnergyParams::default(),
            refit_kernel: Kernel::Gaussian { sigma: 1.0 },
            max_iters: 10,
            rel_tol: 1e-3,
            polish: true,
        }
    }
}

/// Models parameters closer than this in every component are merged.
const DUPLICATE_TOL: f64 = 1e-3;

fn is_duplicate(a: &MotionModel, b: &MotionModel) -> bool {
    a.family() == b.family()
        && a.params()
            .iter()
            .zip(b.params())
            .all(|(x, y)| (x - y).abs() < DUPLICATE_TOL)
}

/// Events of every tile with enough events, coarsest level first.
fn tile_subsets(window: &EventWindow, config: &InitConfig) -> Vec<Vec<Event>> {
    let (w, h) = (window.geometry.width, window.geometry.height);
    let mut subsets: Vec<Vec<Event>> = Vec::new();
    for level in config.level_list() {
        let tiles = 1usize << level;
        let mut buckets = vec![Vec::new(); tiles * tiles];
        for e in &window.events {
            let (px, py) = e.pixel();
            let tx = ((px.max(0) as usize) * tiles / w).min(tiles - 1);
            let ty = ((py.max(0) as usize) * tiles / h).min(tiles - 1);
            buckets[ty * tiles + tx].push(*e);
        }
        subsets.extend(buckets.into_iter().filter(|b| b.len() >= config.min_events));
    }
    subsets
}

/// Fits every family on every tile of every level. The whole-volume fit of
/// the first family comes first.
pub fn init_model_pool(window: &EventWindow, config: &InitConfig) -> Result<ModelPool> {
    config.validate()?;
    if window.is_empty() {
        return Ok(ModelPool::default());
    }
    let subsets = tile_subsets(window, config);
    let jobs: Vec<(usize, Family)> = (0..subsets.len())
        .flat_map(|s| config.families.iter().map(move |&f| (s, f)))
        .collect();
    let fitted = jobs
        .par_iter()
        .map(|&(s, family)| {
            fit_motion(
                &subsets[s],
                &MotionModel::zero(family),
                &window.geometry,
                window.t_min,
                &config.fit,
            )
        })
        .collect::<Result<Vec<_>>>()?;

    let mut models: Vec<MotionModel> = Vec::with_capacity(fitted.len());
    for m in fitted {
        if !models.iter().any(|kept| is_duplicate(kept, &m)) {
            models.push(m);
        }
    }
    debug!("{} candidate models from {} fits", models.len(), jobs.len());
    Ok(ModelPool::new(models))
}

/// Output of [`segment`] for one window.
#[derive(Clone, Debug, PartialEq)]
pub struct SegmentationResult {
    pub t_min: f64,
    pub t_max: f64,
    /// Index of the window's first event in the stream.
    pub offset: usize,
    /// Active models; labels index into this pool.
    pub pool: ModelPool,
    pub labeling: Labeling,
    /// Energy at the start and after every half-step.
    pub energy_trace: Vec<f64>,
}

impl SegmentationResult {
    pub fn event_count(&self) -> usize {
        self.labeling.len()
    }

    pub fn final_energy(&self) -> f64 {
        *self.energy_trace.last().unwrap_or(&0.0)
    }

    /// Structured text form, read back by [`SegmentationResult::parse`].
    pub fn to_document(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "window {} {} {} {}", self.offset, self.event_count(), self.t_min, self.t_max);
        let _ = writeln!(out, "models {}", self.pool.len());
        for (label, entry) in self.pool.entries().iter().enumerate() {
            let _ = writeln!(out, "model {label} {} {}", entry.id, entry.model);
        }
        let _ = write!(out, "energy {}", self.energy_trace.len());
        for e in &self.energy_trace {
            let _ = write!(out, " {e}");
        }
        out.push('\n');
        let _ = writeln!(out, "labels {}", self.event_count());
        for (i, l) in self.labeling.as_slice().iter().enumerate() {
            let _ = writeln!(out, "{i} {l}");
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(k, l)| (k + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let mut next = |what: &str| -> Result<(usize, Vec<&str>)> {
            lines
                .next()
                .map(|(n, l)| (n, l.split_whitespace().collect()))
                .ok_or_else(|| Error::parse(0, format!("missing {what} line")))
        };
        fn num<T: std::str::FromStr>(line: usize, tok: &str) -> Result<T> {
            tok.parse()
                .map_err(|_| Error::parse(line, format!("bad value '{tok}'")))
        }
        fn expect_key(line: usize, fields: &[&str], key: &str, min_len: usize) -> Result<()> {
            if fields.first() != Some(&key) || fields.len() < min_len {
                return Err(Error::parse(line, format!("expected '{key}' line")));
            }
            Ok(())
        }

        let (n, f) = next("window")?;
        expect_key(n, &f, "window", 5)?;
        let offset: usize = num(n, f[1])?;
        let count: usize = num(n, f[2])?;
        let t_min: f64 = num(n, f[3])?;
        let t_max: f64 = num(n, f[4])?;

        let (n, f) = next("models")?;
        expect_key(n, &f, "models", 2)?;
        let model_count: usize = num(n, f[1])?;
        let mut entries = Vec::with_capacity(model_count);
        for k in 0..model_count {
            let (n, f) = next("model")?;
            expect_key(n, &f, "model", 4)?;
            if num::<usize>(n, f[1])? != k {
                return Err(Error::parse(n, "model labels must be consecutive"));
            }
            let family: Family = f[3].parse().map_err(|e: Error| Error::parse(n, e.to_string()))?;
            let params = f[4..].iter().map(|t| num(n, t)).collect::<Result<Vec<f64>>>()?;
            let model = MotionModel::new(family, params).map_err(|e| Error::parse(n, e.to_string()))?;
            entries.push(PoolEntry {
                id: num(n, f[2])?,
                model,
                active: true,
            });
        }

        let (n, f) = next("energy")?;
        expect_key(n, &f, "energy", 2)?;
        let len: usize = num(n, f[1])?;
        if f.len() != len + 2 {
            return Err(Error::parse(n, "energy trace length mismatch"));
        }
        let energy_trace = f[2..].iter().map(|t| num(n, t)).collect::<Result<Vec<f64>>>()?;

        let (n, f) = next("labels")?;
        expect_key(n, &f, "labels", 2)?;
        if num::<usize>(n, f[1])? != count {
            return Err(Error::parse(n, "label count differs from window size"));
        }
        let mut labels = Vec::with_capacity(count);
        for k in 0..count {
            let (n, f) = next("label")?;
            if f.len() != 2 || num::<usize>(n, f[0])? != k {
                return Err(Error::parse(n, format!("expected label line for event {k}")));
            }
            let l: usize = num(n, f[1])?;
            if l >= model_count {
                return Err(Error::Range {
                    line: n,
                    msg: format!("label {l} has no model"),
                });
            }
            labels.push(l);
        }
        Ok(SegmentationResult {
            t_min,
            t_max,
            offset,
            pool: ModelPool::from_entries(entries),
            labeling: Labeling::new(labels),
            energy_trace,
        })
    }

    /// Event locations warped to the window start by their cluster's model,
    /// grouped by label.
    pub fn warped_clusters(&self, window: &EventWindow) -> Result<Vec<Vec<(f64, f64)>>> {
        self.warped_clusters_at(window, self.t_min)
    }

    /// Like [`SegmentationResult::warped_clusters`] with an arbitrary
    /// reference time.
    pub fn warped_clusters_at(&self, window: &EventWindow, t_ref: f64) -> Result<Vec<Vec<(f64, f64)>>> {
        let warpers = self
            .pool
            .entries()
            .iter()
            .map(|e| e.model.warper(t_ref, &window.geometry))
            .collect::<Result<Vec<_>>>()?;
        let mut clusters = vec![Vec::new(); self.pool.len()];
        for (e, &l) in window.events.iter().zip(self.labeling.as_slice()) {
            clusters[l].push(warpers[l].warp_event(e));
        }
        Ok(clusters)
    }
}

/// Reorders unary tables to follow a pruned pool, matching entries by id.
fn follow_pool(tables: &UnaryTables, before: &ModelPool, after: &ModelPool) -> UnaryTables {
    let reordered = after
        .entries()
        .iter()
        .map(|entry| {
            let old = before
                .entries()
                .iter()
                .position(|e| e.id == entry.id)
                .expect("pruning keeps ids");
            tables.table(old).map(<[u32]>::to_vec)
        })
        .collect();
    UnaryTables::from_tables(reordered)
}

/// Kernel used for every unary table.
const ENERGY_KERNEL: Kernel = Kernel::Bilinear;

/// Segments one window: proposes candidates, then alternates labeling by
/// alpha-expansion with refitting every cluster's model on its own events.
pub fn segment(window: &EventWindow, config: &SegmentConfig) -> Result<SegmentationResult> {
    if window.is_empty() {
        return Err(Error::Config("cannot segment an empty window".to_string()));
    }
    let (_, graph) = window_graph(window);
    let mut pool = init_model_pool(window, &config.init)?;
    if pool.is_empty() {
        pool = ModelPool::new(vec![MotionModel::zero(config.init.families[0])]);
    }
    let mut labeling = Labeling::uniform(window.len(), 0);
    let mut unaries = build_unary_tables(window, &pool, ENERGY_KERNEL)?;
    let params = &config.energy;
    let mut energy = energy_terms(&labeling, &unaries, &graph, params).total;
    let mut trace = vec![energy];
    info!(
        "window at {}: {} events, {} candidates, energy {energy}",
        window.offset,
        window.len(),
        pool.len()
    );

    let refit = FitOptions {
        kernel: config.refit_kernel,
        ..config.init.fit
    };
    for iteration in 0..config.max_iters {
        let start = energy;

        labeling = alpha_expansion(&labeling, &pool, &unaries, &graph, params);
        let (pruned, relabeled) = prune_models(&pool, &labeling);
        let pruned = pruned.active_only();
        unaries = follow_pool(&unaries, &pool, &pruned);
        pool = pruned;
        labeling = relabeled;
        energy = energy_terms(&labeling, &unaries, &graph, params).total;
        trace.push(energy);

        let labels = labeling.as_slice();
        let updates = (0..pool.len())
            .into_par_iter()
            .map(|l| -> Result<Option<(MotionModel, Vec<u32>)>> {
                let members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == l).collect();
                let events: Vec<Event> = members.iter().map(|&i| window.events[i]).collect();
                let model = fit_motion(&events, pool.model(l), &window.geometry, window.t_min, &refit)?;
                if &model == pool.model(l) {
                    return Ok(None);
                }
                let table = unary_table(window, &model, ENERGY_KERNEL)?;
                let old = unaries.table(l).expect("active label has a table");
                let cost = |t: &[u32]| members.iter().map(|&i| u64::from(t[i])).sum::<u64>();
                let (after, before) = (cost(&table), cost(old));
                debug!("refit label {l}: {} -> {model}, cluster cost {before} -> {after}", pool.model(l));
                Ok((after < before).then_some((model, table)))
            })
            .collect::<Result<Vec<_>>>()?;
        for (l, update) in updates.into_iter().enumerate() {
            if let Some((model, table)) = update {
                pool.set_model(l, model);
                unaries.set_table(l, table);
            }
        }
        energy = energy_terms(&labeling, &unaries, &graph, params).total;
        trace.push(energy);
        debug!(
            "iteration {iteration}: {} labels, energy {start} -> {energy}",
            pool.len()
        );
        if start <= 0.0 || (start - energy) / start < config.rel_tol {
            break;
        }
    }

    if config.polish {
        let labels = labeling.as_slice();
        let models = (0..pool.len())
            .into_par_iter()
            .map(|l| {
                let events: Vec<Event> = (0..labels.len())
                    .filter(|&i| labels[i] == l)
                    .map(|i| window.events[i])
                    .collect();
                fit_motion(&events, pool.model(l), &window.geometry, window.t_min, &refit)
            })
            .collect::<Result<Vec<_>>>()?;
        for (l, model) in models.into_iter().enumerate() {
            debug!("polish label {l}: {} -> {model}", pool.model(l));
            pool.set_model(l, model);
        }
    }

    Ok(SegmentationResult {
        t_min: window.t_min,
        t_max: window.t_max,
        offset: window.offset,
        pool,
        labeling,
        energy_trace: trace,
    })
}
