use std::hash::BuildHasher;
use std::sync::Arc;

use hashbrown::{DefaultHashBuilder, HashTable};

use crate::dsl::{Kind, Value, ValueData};

fn kind_slot(kind: Kind) -> usize {
    match kind {
        Kind::Str => 0,
        Kind::Int => 1,
    }
}

/// Deduplicated values indexed by stored weight and kind. Ids are insertion
/// positions.
#[derive(Debug, Clone, Default)]
pub struct ValueBank {
    values: Vec<Arc<Value>>,
    by_weight: Vec<[Vec<u32>; 2]>,
    /// Ids keyed by the hash of their rows.
    seen: HashTable<u32>,
    hasher: DefaultHashBuilder,
}

impl ValueBank {
    pub fn new() -> ValueBank {
        ValueBank::default()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub(crate) fn hash_of(&self, data: &ValueData) -> u64 {
        self.hasher.hash_one(data)
    }

    pub(crate) fn contains_hashed(&self, hash: u64, data: &ValueData) -> bool {
        self.seen.find(hash, |&id| self.values[id as usize].data == *data).is_some()
    }

    pub fn contains(&self, data: &ValueData) -> bool {
        self.contains_hashed(self.hash_of(data), data)
    }

    pub fn lookup(&self, data: &ValueData) -> Option<&Arc<Value>> {
        let hash = self.hash_of(data);
        self.seen
            .find(hash, |&id| self.values[id as usize].data == *data)
            .map(|&id| &self.values[id as usize])
    }

    /// Stores `value` unless its rows are already present; returns its id.
    pub fn insert(&mut self, value: Value) -> Option<u32> {
        let hash = self.hash_of(&value.data);
        if self.contains_hashed(hash, &value.data) {
            return None;
        }
        let id = self.values.len() as u32;
        let w = value.weight as usize;
        if self.by_weight.len() <= w {
            self.by_weight.resize_with(w + 1, Default::default);
        }
        self.by_weight[w][kind_slot(value.kind())].push(id);
        let Self { values, seen, hasher, .. } = self;
        seen.insert_unique(hash, id, |&i| hasher.hash_one(&values[i as usize].data));
        values.push(Arc::new(value));
        Some(id)
    }

    pub fn get(&self, id: u32) -> &Arc<Value> {
        &self.values[id as usize]
    }

    /// Ids of stored values with this weight and kind, in insertion order.
    pub fn ids(&self, weight: u32, kind: Kind) -> &[u32] {
        self.by_weight
            .get(weight as usize)
            .map_or(&[], |slots| slots[kind_slot(kind)].as_slice())
    }

    pub fn max_weight(&self) -> u32 {
        self.by_weight.len().saturating_sub(1) as u32
    }

    pub fn values(&self) -> impl Iterator<Item = &Arc<Value>> {
        self.values.iter()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::Leaf;

    fn s(rows: &[&str]) -> ValueData {
        ValueData::Str(rows.iter().map(|r| r.to_string()).collect())
    }

    #[test]
    fn first_seen_wins() {
        let mut bank = ValueBank::new();
        assert_eq!(bank.insert(Value::leaf(Leaf::Var(0), s(&["a", "b"]))), Some(0));
        assert_eq!(bank.insert(Value::leaf(Leaf::Str("x".into()), s(&["a", "b"]))), None);
        assert_eq!(bank.insert(Value::leaf(Leaf::Int(1), ValueData::Int(vec![1, 1]))), Some(1));
        assert_eq!(bank.len(), 2);
        assert!(matches!(bank.lookup(&s(&["a", "b"])).unwrap().provenance, crate::dsl::Provenance::Leaf(Leaf::Var(0))));
        assert_eq!(bank.ids(1, Kind::Str), &[0]);
        assert_eq!(bank.ids(1, Kind::Int), &[1]);
        assert!(bank.ids(7, Kind::Int).is_empty());
    }
}
