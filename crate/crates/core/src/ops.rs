//! Row-level kernels shared by the indexed join and the executor.

use std::collections::HashMap;

use crate::value::{Row, Value};

/// Inner equi-join of two row sets. Output rows are `left ++ right`, in
/// left-row order with matches in right-row order.
pub fn hash_join_rows(left: &[Row], left_key: usize, right: &[Row], right_key: usize) -> Vec<Row> {
    if left.is_empty() || right.is_empty() {
        return Vec::new();
    }
    let mut table: HashMap<&Value, Vec<&Row>> = HashMap::with_capacity(right.len());
    for r in right {
        table.entry(&r[right_key]).or_default().push(r);
    }
    let mut out = Vec::new();
    for l in left {
        if let Some(matches) = table.get(&l[left_key]) {
            for r in matches {
                let mut row = Vec::with_capacity(l.len() + r.len());
                row.extend_from_slice(l);
                row.extend_from_slice(r);
                out.push(row);
            }
        }
    }
    out
}

/// Keeps only the listed columns, in the listed order.
pub fn project_row(row: &Row, columns: &[usize]) -> Row {
    columns.iter().map(|&i| row[i].clone()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rows(keys: &[i64]) -> Vec<Row> {
        keys.iter().map(|k| vec![Value::Int(*k)]).collect()
    }

    #[test]
    fn joins_with_duplicates() {
        let out = hash_join_rows(&rows(&[1, 2, 2]), 0, &rows(&[2, 2, 3]), 0);
        assert_eq!(out.len(), 4);
        assert!(out.iter().all(|r| r[0] == Value::Int(2) && r[1] == Value::Int(2)));
    }

    #[test]
    fn empty_side() {
        assert!(hash_join_rows(&rows(&[]), 0, &rows(&[1]), 0).is_empty());
    }
}
