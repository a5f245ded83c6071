use crate::motion::MotionModel;

/// A candidate model with a stable identifier.
#[derive(Clone, Debug, PartialEq)]
pub struct PoolEntry {
    pub id: usize,
    pub model: MotionModel,
    pub active: bool,
}

/// Ordered motion model candidates. Labels are positions in this list.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ModelPool {
    entries: Vec<PoolEntry>,
}

impl ModelPool {
    /// Pool of active models with ids `0..n`.
    pub fn new(models: Vec<MotionModel>) -> Self {
        let entries = models
            .into_iter()
            .enumerate()
            .map(|(id, model)| PoolEntry {
                id,
                model,
                active: true,
            })
            .collect();
        Self { entries }
    }

    pub fn from_entries(entries: Vec<PoolEntry>) -> Self {
        Self { entries }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[PoolEntry] {
        &self.entries
    }

    pub fn model(&self, label: usize) -> &MotionModel {
        &self.entries[label].model
    }

    pub fn set_model(&mut self, label: usize, model: MotionModel) {
        self.entries[label].model = model;
    }

    pub fn is_active(&self, label: usize) -> bool {
        self.entries[label].active
    }

    pub fn active_labels(&self) -> impl Iterator<Item = usize> + '_ {
        self.entries
            .iter()
            .enumerate()
            .filter(|(_, e)| e.active)
            .map(|(i, _)| i)
    }

    pub fn active_count(&self) -> usize {
        self.entries.iter().filter(|e| e.active).count()
    }

    /// Only the active entries, in order; labels are renumbered accordingly.
    pub fn active_only(&self) -> ModelPool {
        ModelPool {
            entries: self.entries.iter().filter(|e| e.active).cloned().collect(),
        }
    }
}

/// Per-event label, an index into a [`ModelPool`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Labeling(Vec<usize>);

impl Labeling {
    pub fn new(labels: Vec<usize>) -> Self {
        Self(labels)
    }

    pub fn uniform(events: usize, label: usize) -> Self {
        Self(vec![label; events])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn get(&self, event: usize) -> usize {
        self.0[event]
    }

    pub fn set(&mut self, event: usize, label: usize) {
        self.0[event] = label;
    }

    /// Number of events per label for labels `0..labels`.
    pub fn counts(&self, labels: usize) -> Vec<usize> {
        let mut counts = vec![0; labels];
        for &l in &self.0 {
            counts[l] += 1;
        }
        counts
    }

    /// Number of distinct labels in use.
    pub fn used_label_count(&self, labels: usize) -> usize {
        self.counts(labels).iter().filter(|&&c| c > 0).count()
    }

    /// Whether every label is an active entry of `pool`.
    pub fn is_valid_for(&self, pool: &ModelPool) -> bool {
        self.0.iter().all(|&l| l < pool.len() && pool.is_active(l))
    }
}

/// Deactivates models without events and moves the active ones to the
/// front, sorted by descending event count (ties keep pool order).
/// Returns the reordered pool and the remapped labeling.
pub fn prune_models(pool: &ModelPool, labeling: &Labeling) -> (ModelPool, Labeling) {
    let counts = labeling.counts(pool.len());
    let mut used: Vec<usize> = (0..pool.len()).filter(|&l| counts[l] > 0).collect();
    used.sort_by(|&a, &b| counts[b].cmp(&counts[a]));
    let unused = (0..pool.len()).filter(|&l| counts[l] == 0);

    let mut remap = vec![usize::MAX; pool.len()];
    let mut entries = Vec::with_capacity(pool.len());
    for (new, old) in used.iter().copied().chain(unused).enumerate() {
        remap[old] = new;
        let mut entry = pool.entries[old].clone();
        entry.active = counts[old] > 0;
        entries.push(entry);
    }
    let labels = labeling.0.iter().map(|&l| remap[l]).collect();
    (ModelPool { entries }, Labeling(labels))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pool(n: usize) -> ModelPool {
        ModelPool::new((0..n).map(|i| MotionModel::flow(i as f64, 0.0)).collect())
    }

    #[test]
    fn unused_model_is_deactivated() {
        let (p, l) = prune_models(&pool(3), &Labeling::new(vec![0, 2, 2, 0, 0]));
        assert_eq!(p.active_count(), 2);
        assert_eq!(l.as_slice(), &[0, 1, 1, 0, 0]);
        assert!(!p.is_active(2));
        assert_eq!(p.entries()[2].id, 1);
    }

    #[test]
    fn sorted_by_descending_count() {
        let mut labels = vec![0; 100];
        labels.extend(vec![1; 900]);
        let (p, l) = prune_models(&pool(2), &Labeling::new(labels));
        assert_eq!(p.entries()[0].id, 1);
        assert_eq!(l.counts(2), vec![900, 100]);
    }

    #[test]
    fn single_model_collapse() {
        let (p, l) = prune_models(&pool(4), &Labeling::uniform(10, 3));
        assert_eq!(p.active_count(), 1);
        assert_eq!(p.entries()[0].id, 3);
        assert!(l.as_slice().iter().all(|&x| x == 0));
    }

    #[test]
    fn remap_keeps_per_event_models() {
        let before = pool(5);
        let labeling = Labeling::new(vec![4, 1, 1, 3, 4, 4, 0]);
        let (after, remapped) = prune_models(&before, &labeling);
        for (old, new) in labeling.as_slice().iter().zip(remapped.as_slice()) {
            assert_eq!(before.model(*old), after.model(*new));
        }
        assert!(remapped.is_valid_for(&after));
    }
}
