//! User-defined functions callable from a SQL select list.
//!
//! A UDF receives one or more column frames, one per entry of its declared
//! argument column counts, and returns a frame, a scalar, or nothing. The
//! engine only checks arity and result shape; the callable is opaque.

use std::collections::BTreeMap;
use std::fmt;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;

use parking_lot::RwLock;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::value::{Row, Value};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum UdfError {
    #[error("UDF `{0}` already registered")]
    DuplicateUdf(String),
    #[error("UDF `{name}`: argument column counts must be >= 1, got {counts:?}")]
    InvalidArity { name: String, counts: Vec<usize> },
    #[error("unknown UDF `{0}`")]
    UnknownUdf(String),
    #[error("UDF `{name}` expects frames of widths {expected:?}, got {found:?}")]
    UdfArityMismatch {
        name: String,
        expected: Vec<usize>,
        found: Vec<usize>,
    },
    #[error("UDF `{name}` raised: {cause}")]
    UdfRaised { name: String, cause: String },
    #[error("frame columns have unequal lengths")]
    FrameShape,
    #[error("unknown builtin `{0}`")]
    UnknownBuiltin(String),
    #[error("udf script line {line}: {message}")]
    Script { line: usize, message: String },
}

/// Named columns of equal length.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ColumnFrame {
    names: Vec<String>,
    columns: Vec<Vec<Value>>,
}

impl ColumnFrame {
    pub fn new(names: Vec<String>, columns: Vec<Vec<Value>>) -> Result<ColumnFrame, UdfError> {
        if names.len() != columns.len() || columns.windows(2).any(|w| w[0].len() != w[1].len()) {
            return Err(UdfError::FrameShape);
        }
        Ok(ColumnFrame { names, columns })
    }

    pub fn from_rows(names: Vec<String>, rows: &[Row]) -> Result<ColumnFrame, UdfError> {
        if rows.iter().any(|r| r.len() != names.len()) {
            return Err(UdfError::FrameShape);
        }
        let columns = (0..names.len())
            .map(|i| rows.iter().map(|r| r[i].clone()).collect())
            .collect();
        Ok(ColumnFrame { names, columns })
    }

    /// A single-row frame of floats.
    pub fn single_row(cells: &[(&str, f64)]) -> ColumnFrame {
        ColumnFrame {
            names: cells.iter().map(|(n, _)| n.to_string()).collect(),
            columns: cells.iter().map(|&(_, v)| vec![Value::Float(v)]).collect(),
        }
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn width(&self) -> usize {
        self.columns.len()
    }

    pub fn len(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn column(&self, i: usize) -> &[Value] {
        &self.columns[i]
    }

    /// Column `i` as floats; fails on non-numeric cells.
    pub fn f64_column(&self, i: usize) -> Result<Vec<f64>, String> {
        self.columns[i]
            .iter()
            .map(|v| {
                v.as_f64()
                    .ok_or_else(|| format!("column `{}` holds non-numeric `{v}`", self.names[i]))
            })
            .collect()
    }

    pub fn to_rows(&self) -> Vec<Row> {
        (0..self.len())
            .map(|r| self.columns.iter().map(|c| c[r].clone()).collect())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum UdfOutput {
    Frame(ColumnFrame),
    Scalar(Value),
    /// Display-only UDFs.
    Nothing,
}

pub type UdfFn = dyn Fn(&[ColumnFrame]) -> Result<UdfOutput, String> + Send + Sync;

#[derive(Clone)]
pub struct UdfDescriptor {
    pub name: String,
    pub arg_column_counts: Vec<usize>,
    callable: Arc<UdfFn>,
}

impl UdfDescriptor {
    pub fn total_columns(&self) -> usize {
        self.arg_column_counts.iter().sum()
    }
}

impl fmt::Debug for UdfDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("UdfDescriptor")
            .field("name", &self.name)
            .field("arg_column_counts", &self.arg_column_counts)
            .finish_non_exhaustive()
    }
}

/// Name → descriptor. Lookups ignore ASCII case, like SQL identifiers.
#[derive(Debug, Default)]
pub struct UdfRegistry {
    udfs: RwLock<BTreeMap<String, UdfDescriptor>>,
}

impl UdfRegistry {
    pub fn new() -> UdfRegistry {
        UdfRegistry::default()
    }

    /// Registry preloaded with the benchmark UDFs: `myLinearFit`,
    /// `myKMeans`, `myQuantile` and `myCGO`.
    pub fn with_suite() -> UdfRegistry {
        let reg = UdfRegistry::new();
        for (name, builtin_name, counts) in SUITE {
            reg.register_udf(name, builtin(builtin_name).unwrap(), counts.to_vec())
                .expect("suite names are distinct");
        }
        reg
    }

    pub fn register_udf(
        &self,
        name: &str,
        callable: Arc<UdfFn>,
        arg_column_counts: Vec<usize>,
    ) -> Result<(), UdfError> {
        if arg_column_counts.is_empty() || arg_column_counts.contains(&0) {
            return Err(UdfError::InvalidArity {
                name: name.to_string(),
                counts: arg_column_counts,
            });
        }
        let key = name.to_ascii_lowercase();
        let mut udfs = self.udfs.write();
        if udfs.contains_key(&key) {
            return Err(UdfError::DuplicateUdf(name.to_string()));
        }
        udfs.insert(
            key,
            UdfDescriptor {
                name: name.to_string(),
                arg_column_counts,
                callable,
            },
        );
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<UdfDescriptor> {
        self.udfs.read().get(&name.to_ascii_lowercase()).cloned()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.udfs.read().contains_key(&name.to_ascii_lowercase())
    }

    pub fn names(&self) -> Vec<String> {
        self.udfs.read().values().map(|d| d.name.clone()).collect()
    }

    /// Runs the UDF once over `frames`. Errors and panics inside the
    /// callable surface as [`UdfError::UdfRaised`].
    pub fn invoke(&self, name: &str, frames: &[ColumnFrame]) -> Result<UdfOutput, UdfError> {
        let desc = self
            .get(name)
            .ok_or_else(|| UdfError::UnknownUdf(name.to_string()))?;
        let widths: Vec<usize> = frames.iter().map(ColumnFrame::width).collect();
        if widths != desc.arg_column_counts {
            return Err(UdfError::UdfArityMismatch {
                name: desc.name,
                expected: desc.arg_column_counts,
                found: widths,
            });
        }
        let raised = |cause: String| UdfError::UdfRaised {
            name: desc.name.clone(),
            cause,
        };
        match catch_unwind(AssertUnwindSafe(|| (desc.callable)(frames))) {
            Ok(Ok(out)) => Ok(out),
            Ok(Err(cause)) => Err(raised(cause)),
            Err(panic) => Err(raised(panic_message(panic.as_ref()))),
        }
    }

    /// Applies a UDF script: one `register_udf(sqlName, builtin, [n, ...])`
    /// per line; blank lines and `#` comments are skipped.
    pub fn load_script(&self, text: &str) -> Result<usize, UdfError> {
        let mut n = 0;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| UdfError::Script {
                line: i + 1,
                message,
            };
            let (name, builtin_name, counts) = parse_script_line(line).map_err(err)?;
            let f = builtin(&builtin_name).ok_or_else(|| err(format!("unknown builtin `{builtin_name}`")))?;
            self.register_udf(&name, f, counts).map_err(|e| err(e.to_string()))?;
            n += 1;
        }
        Ok(n)
    }
}

pub(crate) fn panic_message(payload: &(dyn std::any::Any + Send)) -> String {
    if let Some(s) = payload.downcast_ref::<&str>() {
        s.to_string()
    } else if let Some(s) = payload.downcast_ref::<String>() {
        s.clone()
    } else {
        "panic".to_string()
    }
}

fn is_ident(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn parse_script_line(line: &str) -> Result<(String, String, Vec<usize>), String> {
    let body = line
        .strip_prefix("register_udf")
        .map(str::trim_start)
        .and_then(|s| s.strip_prefix('('))
        .and_then(|s| s.trim_end().trim_end_matches(';').trim_end().strip_suffix(')'))
        .ok_or("expected register_udf(name, builtin, [counts])")?;
    let (head, list) = body.split_once('[').ok_or("missing [counts]")?;
    let list = list.trim().strip_suffix(']').ok_or("unterminated [counts]")?;
    let parts: Vec<&str> = head.split(',').map(str::trim).collect();
    let [name, builtin_name, ""] = parts.as_slice() else {
        return Err("expected register_udf(name, builtin, [counts])".into());
    };
    if !is_ident(name) || !is_ident(builtin_name) {
        return Err(format!("bad identifier in `{line}`"));
    }
    let counts = list
        .split(',')
        .map(|c| c.trim().parse::<usize>().map_err(|_| format!("bad count `{}`", c.trim())))
        .collect::<Result<Vec<_>, _>>()?;
    Ok((name.to_string(), builtin_name.to_string(), counts))
}

const SUITE: [(&str, &str, &[usize]); 4] = [
    ("myLinearFit", "linear_fit", &[2]),
    ("myKMeans", "kmeans", &[2]),
    ("myQuantile", "quantiles", &[1]),
    ("myCGO", "cgo", &[2]),
];

pub const BUILTINS: [&str; 5] = ["linear_fit", "kmeans", "quantiles", "cgo", "column_means"];

/// Deterministic analytics callables usable from UDF scripts.
pub fn builtin(name: &str) -> Option<Arc<UdfFn>> {
    let f: Arc<UdfFn> = match name {
        "linear_fit" => Arc::new(|fs| {
            let (x, y) = two_columns(&fs[0])?;
            let (a, b) = least_squares(&x, &y);
            Ok(UdfOutput::Frame(ColumnFrame::single_row(&[("intercept", a), ("slope", b)])))
        }),
        "kmeans" => Arc::new(|fs| {
            let points = rows_f64(&fs[0])?;
            Ok(UdfOutput::Scalar(Value::Float(kmeans_inertia(&points, 4, 20, 0))))
        }),
        "quantiles" => Arc::new(|fs| {
            let v = fs[0].f64_column(0)?;
            if v.is_empty() {
                return Err("quantiles of an empty column".into());
            }
            let [q1, q2, q3] = [0.25, 0.5, 0.75].map(|p| lower_quantile(&v, p));
            Ok(UdfOutput::Frame(ColumnFrame::single_row(&[("q25", q1), ("q50", q2), ("q75", q3)])))
        }),
        "cgo" => Arc::new(|fs| {
            let (x, y) = two_columns(&fs[0])?;
            Ok(UdfOutput::Scalar(Value::Float(cg_residual(&x, &y, 10))))
        }),
        "column_means" => Arc::new(|fs| {
            let frame = &fs[0];
            let mut cells = Vec::new();
            for i in 0..frame.width() {
                let col = frame.f64_column(i)?;
                cells.push((format!("mean{}", i + 1), mean(&col)));
            }
            let cells: Vec<(&str, f64)> = cells.iter().map(|(n, v)| (n.as_str(), *v)).collect();
            Ok(UdfOutput::Frame(ColumnFrame::single_row(&cells)))
        }),
        _ => return None,
    };
    Some(f)
}

fn two_columns(frame: &ColumnFrame) -> Result<(Vec<f64>, Vec<f64>), String> {
    if frame.width() != 2 {
        return Err(format!("expected 2 columns, got {}", frame.width()));
    }
    Ok((frame.f64_column(0)?, frame.f64_column(1)?))
}

fn rows_f64(frame: &ColumnFrame) -> Result<Vec<Vec<f64>>, String> {
    let cols = (0..frame.width())
        .map(|i| frame.f64_column(i))
        .collect::<Result<Vec<_>, _>>()?;
    Ok((0..frame.len())
        .map(|r| cols.iter().map(|c| c[r]).collect())
        .collect())
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        f64::NAN
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

/// Ordinary least squares `y = a + b x`; a constant `x` gives slope 0.
pub fn least_squares(x: &[f64], y: &[f64]) -> (f64, f64) {
    let (mx, my) = (mean(x), mean(y));
    let sxx: f64 = x.iter().map(|xi| (xi - mx) * (xi - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(xi, yi)| (xi - mx) * (yi - my)).sum();
    let b = if sxx == 0.0 { 0.0 } else { sxy / sxx };
    (my - b * mx, b)
}

/// Nearest-rank quantile taking the lower element: the value at sorted
/// position `ceil(p * n) - 1`.
pub fn lower_quantile(values: &[f64], p: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let rank = ((p * v.len() as f64).ceil() as usize).clamp(1, v.len());
    v[rank - 1]
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Lloyd's algorithm from `k` seeded distinct starting rows; returns the
/// final within-cluster sum of squares.
pub fn kmeans_inertia(points: &[Vec<f64>], k: usize, iterations: usize, seed: u64) -> f64 {
    if points.is_empty() {
        return 0.0;
    }
    let k = k.min(points.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut init: Vec<usize> = sample(&mut rng, points.len(), k).into_vec();
    init.sort_unstable();
    let mut centers: Vec<Vec<f64>> = init.iter().map(|&i| points[i].clone()).collect();
    let dim = points[0].len();
    let mut assign = vec![0usize; points.len()];
    for _ in 0..iterations {
        for (a, p) in assign.iter_mut().zip(points) {
            *a = nearest(&centers, p);
        }
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (&a, p) in assign.iter().zip(points) {
            counts[a] += 1;
            for (s, x) in sums[a].iter_mut().zip(p) {
                *s += x;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                centers[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            }
        }
    }
    points
        .iter()
        .map(|p| sq_dist(p, &centers[nearest(&centers, p)]))
        .sum()
}

fn nearest(centers: &[Vec<f64>], p: &[f64]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, c) in centers.iter().enumerate() {
        let d = sq_dist(c, p);
        if d < best_d {
            best = i;
            best_d = d;
        }
    }
    best
}

/// Fits `y = a + b x` by a fixed number of conjugate-gradient steps on the
/// normal equations; returns the residual norm `||y - (a + b x)||`.
pub fn cg_residual(x: &[f64], y: &[f64], iterations: usize) -> f64 {
    let n = x.len() as f64;
    let (sx, sxx) = (x.iter().sum::<f64>(), x.iter().map(|v| v * v).sum::<f64>());
    let a = [[n, sx], [sx, sxx]];
    let rhs = [y.iter().sum::<f64>(), x.iter().zip(y).map(|(p, q)| p * q).sum::<f64>()];
    let mul = |v: [f64; 2]| [a[0][0] * v[0] + a[0][1] * v[1], a[1][0] * v[0] + a[1][1] * v[1]];
    let dot = |u: [f64; 2], v: [f64; 2]| u[0] * v[0] + u[1] * v[1];
    let mut beta = [0.0, 0.0];
    let mut r = rhs;
    let mut p = r;
    let mut rr = dot(r, r);
    for _ in 0..iterations {
        if rr <= 1e-30 {
            break;
        }
        let ap = mul(p);
        let pap = dot(p, ap);
        if pap <= 0.0 {
            break;
        }
        let alpha = rr / pap;
        beta = [beta[0] + alpha * p[0], beta[1] + alpha * p[1]];
        r = [r[0] - alpha * ap[0], r[1] - alpha * ap[1]];
        let rr_next = dot(r, r);
        p = [r[0] + rr_next / rr * p[0], r[1] + rr_next / rr * p[1]];
        rr = rr_next;
    }
    x.iter()
        .zip(y)
        .map(|(xi, yi)| (yi - beta[0] - beta[1] * xi).powi(2))
        .sum::<f64>()
        .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frame(cols: &[(&str, &[f64])]) -> ColumnFrame {
        ColumnFrame::new(
            cols.iter().map(|(n, _)| n.to_string()).collect(),
            cols.iter()
                .map(|(_, v)| v.iter().map(|&x| Value::Float(x)).collect())
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn register_and_invoke_means() {
        let reg = UdfRegistry::new();
        reg.register_udf("means", builtin("column_means").unwrap(), vec![2]).unwrap();
        let out = reg
            .invoke("means", &[frame(&[("a", &[0.1, 0.3]), ("b", &[0.2, 0.4])])])
            .unwrap();
        let UdfOutput::Frame(f) = out else { panic!() };
        assert_eq!(f.names(), ["mean1", "mean2"]);
        let m: Vec<f64> = (0..2).map(|i| f.f64_column(i).unwrap()[0]).collect();
        assert!((m[0] - 0.2).abs() < 1e-12 && (m[1] - 0.3).abs() < 1e-12);
    }

    #[test]
    fn registration_errors() {
        let reg = UdfRegistry::with_suite();
        assert!(reg.contains("mykmeans"));
        assert!(matches!(
            reg.register_udf("f", builtin("kmeans").unwrap(), vec![0]),
            Err(UdfError::InvalidArity { .. })
        ));
        assert_eq!(
            reg.register_udf("myKMeans", builtin("kmeans").unwrap(), vec![2]),
            Err(UdfError::DuplicateUdf("myKMeans".into()))
        );
    }

    #[test]
    fn arity_mismatch_and_raise() {
        let reg = UdfRegistry::with_suite();
        let three = frame(&[("a", &[1.0]), ("b", &[1.0]), ("c", &[1.0])]);
        assert!(matches!(
            reg.invoke("myKMeans", &[three]),
            Err(UdfError::UdfArityMismatch { .. })
        ));
        reg.register_udf("boom", Arc::new(|_| Err("bad input".into())), vec![1]).unwrap();
        reg.register_udf("panics", Arc::new(|_| panic!("kaput")), vec![1]).unwrap();
        let one = frame(&[("a", &[1.0])]);
        assert_eq!(
            reg.invoke("boom", &[one.clone()]),
            Err(UdfError::UdfRaised { name: "boom".into(), cause: "bad input".into() })
        );
        assert!(matches!(reg.invoke("panics", &[one]), Err(UdfError::UdfRaised { cause, .. }) if cause == "kaput"));
    }

    #[test]
    fn analytics_builtins() {
        let (a, b) = least_squares(&[0.0, 1.0, 2.0], &[1.0, 3.0, 5.0]);
        assert!((a - 1.0).abs() < 1e-12 && (b - 2.0).abs() < 1e-12);
        assert!(cg_residual(&[0.0, 1.0, 2.0], &[1.0, 3.0, 5.0], 10) < 1e-9);
        assert_eq!(lower_quantile(&[4.0, 1.0, 3.0, 2.0], 0.5), 2.0);
        assert_eq!(lower_quantile(&[4.0, 1.0, 3.0, 2.0], 0.25), 1.0);
        let pts: Vec<Vec<f64>> = [0.0, 0.1, 10.0, 10.1].iter().map(|&x| vec![x, 0.0]).collect();
        assert!((kmeans_inertia(&pts, 2, 20, 0) - 0.01).abs() < 1e-9);
        assert_eq!(kmeans_inertia(&pts, 4, 20, 0), 0.0);
    }

    #[test]
    fn script_registration() {
        let reg = UdfRegistry::new();
        let n = reg
            .load_script("# suite\nregister_udf(myKMeans, kmeans, [2])\n\nregister_udf(q, quantiles, [1]);\n")
            .unwrap();
        assert_eq!(n, 2);
        assert_eq!(reg.get("MYKMEANS").unwrap().arg_column_counts, [2]);
        assert!(matches!(
            reg.load_script("register_udf(x, nosuch, [1])"),
            Err(UdfError::Script { line: 1, .. })
        ));
        assert!(matches!(reg.load_script("register(x)"), Err(UdfError::Script { .. })));
    }
}
