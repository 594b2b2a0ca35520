//! JSON shapes for maps keyed by iteration refs (JSON object keys must be
//! strings, so these become lists of `{"iter": .., "value": ..}`).

pub mod iter_map {
    use std::collections::BTreeMap;

    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use crate::model::IterRef;

    #[derive(Serialize)]
    struct EntryRef<'a, V> {
        iter: &'a IterRef,
        value: &'a V,
    }

    #[derive(Deserialize)]
    struct Entry<V> {
        iter: IterRef,
        value: V,
    }

    pub fn serialize<S: Serializer, V: Serialize>(map: &BTreeMap<IterRef, V>, s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(map.iter().map(|(iter, value)| EntryRef { iter, value }))
    }

    pub fn deserialize<'de, D, V>(d: D) -> Result<BTreeMap<IterRef, V>, D::Error>
    where
        D: Deserializer<'de>,
        V: Deserialize<'de>,
    {
        let entries = Vec::<Entry<V>>::deserialize(d)?;
        Ok(entries.into_iter().map(|e| (e.iter, e.value)).collect())
    }
}
