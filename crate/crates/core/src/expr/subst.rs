use std::collections::BTreeMap;

use super::{DagBuilder, ExprDag, Symbol};

/// Replaces each mapped variable by its image. Unmapped variables stay.
pub fn substitute(dag: &ExprDag, map: &BTreeMap<Symbol, ExprDag>) -> ExprDag {
    let mut b = DagBuilder::new();
    let mut imported: BTreeMap<Symbol, usize> = BTreeMap::new();
    let root = b.import(dag, |b, s| {
        let image = map.get(s)?;
        if let Some(&i) = imported.get(s) {
            return Some(i);
        }
        let i = b.import(image, |_, _| None);
        imported.insert(s.clone(), i);
        Some(i)
    });
    b.finish(root)
}
