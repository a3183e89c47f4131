//! Loader for the classic Cora citation files: `cora.content` with
//! `<paper_id>\t<f_1>...<f_d>\t<label>` lines and `cora.cites` with
//! `<cited>\t<citing>` lines.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Edge, Graph, Masks};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Deterministic split: the first `train_per_class` nodes of every class
/// (in file order) train, then the next `val` and `test` remaining nodes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSizes {
    pub train_per_class: usize,
    pub val: usize,
    pub test: usize,
}

impl Default for SplitSizes {
    fn default() -> Self {
        Self {
            train_per_class: 20,
            val: 500,
            test: 1000,
        }
    }
}

impl SplitSizes {
    pub fn apply(&self, labels: &[usize]) -> Masks {
        let n_classes = labels.iter().copied().max().map_or(0, |m| m + 1);
        let mut per_class = vec![0usize; n_classes];
        let mut train = Vec::new();
        for (i, &c) in labels.iter().enumerate() {
            if per_class[c] < self.train_per_class {
                per_class[c] += 1;
                train.push(i);
            }
        }
        let in_train: HashSet<usize> = train.iter().copied().collect();
        let mut rest = (0..labels.len()).filter(|i| !in_train.contains(i));
        let val: Vec<usize> = rest.by_ref().take(self.val).collect();
        let test: Vec<usize> = rest.take(self.test).collect();
        Masks { train, val, test }
    }
}

#[derive(Clone, Debug)]
pub struct CoraLoad {
    pub graph: Graph,
    /// Cites lines naming an id absent from the content file.
    pub skipped_cites: usize,
    /// Cites lines repeating an already seen undirected pair (or a self citation).
    pub duplicate_cites: usize,
    /// Class names in id order.
    pub class_names: Vec<String>,
    /// Original paper ids in dense index order.
    pub node_ids: Vec<String>,
}

pub fn load_cora(content_path: impl AsRef<Path>, cites_path: impl AsRef<Path>, split: SplitSizes) -> Result<CoraLoad> {
    let content_path = content_path.as_ref();
    let cites_path = cites_path.as_ref();
    let content = fs::read_to_string(content_path)?;
    let parse_err = |path: &Path, line: usize, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };

    let mut node_ids = Vec::new();
    let mut index_of = HashMap::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut raw_labels = Vec::new();
    let mut dim = None;
    for (lineno, line) in content.lines().enumerate() {
        let lineno = lineno + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() < 3 {
            return Err(parse_err(
                content_path,
                lineno,
                format!("expected id, features and label, found {} fields", fields.len()),
            ));
        }
        let id = fields[0];
        let label = fields[fields.len() - 1];
        let feats = fields[1..fields.len() - 1]
            .iter()
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|_| parse_err(content_path, lineno, format!("bad feature value {s:?}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        match dim {
            None => dim = Some(feats.len()),
            Some(d) if d != feats.len() => {
                return Err(parse_err(
                    content_path,
                    lineno,
                    format!("{} features, earlier lines have {d}", feats.len()),
                ))
            }
            _ => {}
        }
        if index_of.insert(id.to_string(), node_ids.len()).is_some() {
            return Err(parse_err(content_path, lineno, format!("duplicate node id {id:?}")));
        }
        node_ids.push(id.to_string());
        rows.push(feats);
        raw_labels.push(label.to_string());
    }
    if rows.is_empty() {
        return Err(parse_err(content_path, 0, "no nodes".into()));
    }

    let class_names: Vec<String> = raw_labels
        .iter()
        .cloned()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let class_of: HashMap<&str, usize> = class_names.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    let labels: Vec<usize> = raw_labels.iter().map(|s| class_of[s.as_str()]).collect();

    let cites = fs::read_to_string(cites_path)?;
    let mut seen = HashSet::new();
    let mut edges = Vec::new();
    let mut skipped = 0;
    let mut duplicates = 0;
    for (lineno, line) in cites.lines().enumerate() {
        let lineno = lineno + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 2 {
            return Err(parse_err(
                cites_path,
                lineno,
                format!("expected two ids, found {} fields", fields.len()),
            ));
        }
        let (Some(&a), Some(&b)) = (index_of.get(fields[0]), index_of.get(fields[1])) else {
            skipped += 1;
            continue;
        };
        let key = (a.min(b), a.max(b));
        if a == b || !seen.insert(key) {
            duplicates += 1;
            continue;
        }
        edges.push(Edge::new(key.0, key.1));
    }

    let masks = split.apply(&labels);
    let graph = Graph::new(Matrix::from_rows(&rows)?, edges, Some(labels), masks)?;
    Ok(CoraLoad {
        graph,
        skipped_cites: skipped,
        duplicate_cites: duplicates,
        class_names,
        node_ids,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write(dir: &tempfile::TempDir, name: &str, text: &str) -> std::path::PathBuf {
        let p = dir.path().join(name);
        let mut f = fs::File::create(&p).unwrap();
        f.write_all(text.as_bytes()).unwrap();
        p
    }

    #[test]
    fn two_papers_one_citation() {
        let dir = tempfile::tempdir().unwrap();
        let c = write(&dir, "c", "p1\t0\t1\tTheory\np2\t1\t0\tAI\n");
        let e = write(&dir, "e", "p1\tp2\n");
        let load = load_cora(&c, &e, SplitSizes::default()).unwrap();
        assert_eq!(load.graph.n_nodes(), 2);
        assert_eq!(load.graph.edges().len(), 1);
        // lexicographic: "AI" < "Theory"
        assert_eq!(load.graph.labels().unwrap(), &[1, 0]);
        assert_eq!(load.skipped_cites, 0);
    }

    #[test]
    fn unknown_ids_are_skipped_and_counted() {
        let dir = tempfile::tempdir().unwrap();
        let c = write(&dir, "c", "a\t1\tX\nb\t0\tY\n");
        let e = write(&dir, "e", "a\tzzz\na\tb\nb\ta\n");
        let load = load_cora(&c, &e, SplitSizes::default()).unwrap();
        assert_eq!(load.skipped_cites, 1);
        assert_eq!(load.duplicate_cites, 1);
        assert_eq!(load.graph.edges().len(), 1);
    }

    #[test]
    fn malformed_lines_report_line_numbers() {
        let dir = tempfile::tempdir().unwrap();
        let c = write(&dir, "c", "a\t1\t0\tX\nb\t1\tY\n");
        let e = write(&dir, "e", "");
        let err = load_cora(&c, &e, SplitSizes::default()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");

        let c = write(&dir, "c2", "a\t1\tq\tX\n");
        let err = load_cora(&c, &e, SplitSizes::default()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));

        let c = write(&dir, "c3", "a\t1\tX\n");
        let e = write(&dir, "e3", "a\n");
        assert!(matches!(
            load_cora(&c, &e, SplitSizes::default()),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn split_takes_first_k_per_class() {
        let labels = vec![0, 1, 0, 0, 1, 1, 0];
        let m = SplitSizes {
            train_per_class: 2,
            val: 2,
            test: 10,
        }
        .apply(&labels);
        assert_eq!(m.train, vec![0, 1, 2, 4]);
        assert_eq!(m.val, vec![3, 5]);
        assert_eq!(m.test, vec![6]);
    }
}
