//! Memo table for pointwise Hopf limits.
//!
//! Keys are unit-tangent states quantized to a 1e-9 grid together with the
//! requested tolerance; values are never interpolated. Readers share the lock;
//! a miss computes outside the lock and then takes the write lock once.

use std::collections::HashMap;
use std::sync::RwLock;

const QUANTUM: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub(crate) struct StateKey {
    u: i64,
    v: i64,
    theta: i64,
    tag: u64,
}

impl StateKey {
    pub(crate) fn new(u: f64, v: f64, theta: f64, tag: u64) -> Self {
        let theta = theta.rem_euclid(std::f64::consts::TAU);
        Self {
            u: (u / QUANTUM).round() as i64,
            v: (v / QUANTUM).round() as i64,
            theta: (theta / QUANTUM).round() as i64,
            tag,
        }
    }
}

#[derive(Debug, Default)]
pub(crate) struct MemoCache<V: Clone> {
    map: RwLock<HashMap<StateKey, V>>,
}

impl<V: Clone> MemoCache<V> {
    pub(crate) fn new() -> Self {
        Self {
            map: RwLock::new(HashMap::new()),
        }
    }

    pub(crate) fn get(&self, key: &StateKey) -> Option<V> {
        self.map.read().ok()?.get(key).cloned()
    }

    pub(crate) fn insert(&self, key: StateKey, value: V) {
        if let Ok(mut m) = self.map.write() {
            m.entry(key).or_insert(value);
        }
    }

    #[cfg(test)]
    pub(crate) fn len(&self) -> usize {
        self.map.read().map(|m| m.len()).unwrap_or(0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keys_quantize_and_wrap_angles() {
        let a = StateKey::new(0.1, 0.2, 0.3, 7);
        let b = StateKey::new(0.1 + 1e-11, 0.2, 0.3 + std::f64::consts::TAU, 7);
        assert_eq!(a, b);
        assert_ne!(a, StateKey::new(0.1, 0.2, 0.3, 8));
        let c: MemoCache<f64> = MemoCache::new();
        c.insert(a, 1.5);
        c.insert(b, 2.5);
        assert_eq!(c.get(&b), Some(1.5));
        assert_eq!(c.len(), 1);
    }
}
