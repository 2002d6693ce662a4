//! Human-inspectable text serialization of a trained forest.
//!
//! Layout (one token group per line; `#` lines are comments):
//!
//! ```text
//! gridpop-forest v1
//! n_features 8
//! n_trees 100
//! max_depth none
//! min_samples_leaf 1
//! features_per_split auto
//! seed 42
//! importances 0.61 0.02 ...
//! tree
//! split 0 12.5        <- pre-order: split line, left subtree, right subtree
//! leaf 0.25 16        <- positive_fraction n_samples
//! leaf 1 24
//! end
//! ```
//!
//! Floats are written in Rust's shortest round-trip notation, so a load
//! after save reproduces the model bit for bit.

use std::path::Path;

use super::{ForestError, ForestModel, ForestParams, TreeNode};

impl ForestModel {
    /// Serializes the model to the v1 text format.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str("gridpop-forest v1\n");
        out.push_str(&format!("n_features {}\n", self.n_features));
        out.push_str(&format!("n_trees {}\n", self.params.n_trees));
        match self.params.max_depth {
            Some(d) => out.push_str(&format!("max_depth {d}\n")),
            None => out.push_str("max_depth none\n"),
        }
        out.push_str(&format!("min_samples_leaf {}\n", self.params.min_samples_leaf));
        match self.params.features_per_split {
            Some(k) => out.push_str(&format!("features_per_split {k}\n")),
            None => out.push_str("features_per_split auto\n"),
        }
        out.push_str(&format!("seed {}\n", self.seed));
        let importances: Vec<String> = self.importances.iter().map(|v| format!("{v}")).collect();
        out.push_str(&format!("importances {}\n", importances.join(" ")));
        for tree in &self.trees {
            out.push_str("tree\n");
            write_node(tree, &mut out);
        }
        out.push_str("end\n");
        out
    }

    /// Parses the v1 text format. Comment lines (`#`) are ignored wherever
    /// they appear.
    pub fn from_text(text: &str) -> Result<Self, ForestError> {
        let lines: Vec<(usize, &str)> = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
            .collect();
        let mut cursor = Cursor { lines: &lines, pos: 0 };

        let version = cursor.tagged("gridpop-forest")?;
        if version.1 != ["v1"] {
            return Err(malformed(version.0, format!("unsupported version {:?}", version.1)));
        }
        let n_features: usize = cursor.scalar("n_features")?;
        let n_trees: usize = cursor.scalar("n_trees")?;
        let max_depth: Option<u32> = cursor.optional_scalar("max_depth", "none")?;
        let min_samples_leaf: usize = cursor.scalar("min_samples_leaf")?;
        let features_per_split: Option<usize> =
            cursor.optional_scalar("features_per_split", "auto")?;
        let seed: u64 = cursor.scalar("seed")?;
        let (line, tokens) = cursor.tagged("importances")?;
        let importances: Vec<f64> = tokens
            .iter()
            .map(|t| t.parse().map_err(|e| malformed(line, format!("importances: {e}"))))
            .collect::<Result<_, _>>()?;

        let mut trees = Vec::with_capacity(n_trees);
        loop {
            let (line, text) = cursor.take("tree or end")?;
            match text.split_whitespace().next() {
                Some("tree") => trees.push(read_node(&mut cursor)?),
                Some("end") => break,
                other => return Err(malformed(line, format!("expected tree or end, found {other:?}"))),
            }
        }
        if trees.len() != n_trees {
            return Err(malformed(0, format!("declared {n_trees} trees, found {}", trees.len())));
        }

        let params = ForestParams { n_trees, max_depth, min_samples_leaf, features_per_split };
        ForestModel::from_parts(trees, n_features, params, seed, importances)
    }

    pub fn save(&self, path: &Path) -> Result<(), ForestError> {
        std::fs::write(path, self.to_text()).map_err(|e| ForestError::Io(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, ForestError> {
        let text = std::fs::read_to_string(path).map_err(|e| ForestError::Io(e.to_string()))?;
        Self::from_text(&text)
    }
}

fn malformed(line: usize, msg: String) -> ForestError {
    ForestError::MalformedModel { line, msg }
}

struct Cursor<'a> {
    lines: &'a [(usize, &'a str)],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, expect: &str) -> Result<(usize, &'a str), ForestError> {
        let item = self
            .lines
            .get(self.pos)
            .copied()
            .ok_or_else(|| malformed(0, format!("unexpected end of file, wanted {expect}")))?;
        self.pos += 1;
        Ok(item)
    }

    /// A line that must start with `tag`; returns the remaining tokens.
    fn tagged(&mut self, tag: &str) -> Result<(usize, Vec<&'a str>), ForestError> {
        let (line, text) = self.take(tag)?;
        let mut tokens = text.split_whitespace();
        let head = tokens.next().unwrap_or_default();
        if head != tag {
            return Err(malformed(line, format!("expected {tag:?}, found {head:?}")));
        }
        Ok((line, tokens.collect()))
    }

    fn scalar<T: std::str::FromStr>(&mut self, tag: &str) -> Result<T, ForestError>
    where
        T::Err: std::fmt::Display,
    {
        let (line, tokens) = self.tagged(tag)?;
        if tokens.len() != 1 {
            return Err(malformed(line, format!("{tag}: expected one value, got {}", tokens.len())));
        }
        tokens[0]
            .parse()
            .map_err(|e| malformed(line, format!("{tag}: {e}")))
    }

    fn optional_scalar<T: std::str::FromStr>(
        &mut self,
        tag: &str,
        none_word: &str,
    ) -> Result<Option<T>, ForestError>
    where
        T::Err: std::fmt::Display,
    {
        let (line, tokens) = self.tagged(tag)?;
        match tokens.as_slice() {
            [word] if *word == none_word => Ok(None),
            [value] => value
                .parse()
                .map(Some)
                .map_err(|e| malformed(line, format!("{tag}: {e}"))),
            _ => Err(malformed(line, format!("{tag}: expected one value"))),
        }
    }
}

fn write_node(node: &TreeNode, out: &mut String) {
    match node {
        TreeNode::Leaf { positive_fraction, n_samples } => {
            out.push_str(&format!("leaf {positive_fraction} {n_samples}\n"));
        }
        TreeNode::Split { feature_index, threshold, left, right } => {
            out.push_str(&format!("split {feature_index} {threshold}\n"));
            write_node(left, out);
            write_node(right, out);
        }
    }
}

fn read_node(cursor: &mut Cursor) -> Result<TreeNode, ForestError> {
    let (line, text) = cursor.take("split or leaf")?;
    let tokens: Vec<&str> = text.split_whitespace().collect();
    match tokens.as_slice() {
        ["leaf", fraction, samples] => {
            let positive_fraction: f64 = fraction
                .parse()
                .map_err(|e| malformed(line, format!("leaf fraction: {e}")))?;
            let n_samples: usize = samples
                .parse()
                .map_err(|e| malformed(line, format!("leaf samples: {e}")))?;
            if !(0.0..=1.0).contains(&positive_fraction) {
                return Err(malformed(line, format!("leaf fraction {positive_fraction} outside [0,1]")));
            }
            Ok(TreeNode::Leaf { positive_fraction, n_samples })
        }
        ["split", feature, threshold] => {
            let feature_index: usize = feature
                .parse()
                .map_err(|e| malformed(line, format!("split feature: {e}")))?;
            let threshold: f64 = threshold
                .parse()
                .map_err(|e| malformed(line, format!("split threshold: {e}")))?;
            let left = Box::new(read_node(cursor)?);
            let right = Box::new(read_node(cursor)?);
            Ok(TreeNode::Split { feature_index, threshold, left, right })
        }
        _ => Err(malformed(line, format!("expected split or leaf, found {text:?}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::super::{train, ForestParams, TrainExample};
    use super::*;

    fn fixture() -> ForestModel {
        let examples: Vec<TrainExample> = (0..60)
            .map(|i| TrainExample {
                features: vec![(i % 10) as f64, (i % 4) as f64],
                label: (i % 10) > 4,
            })
            .collect();
        train(&examples, &ForestParams { n_trees: 7, max_depth: Some(4), ..Default::default() }, 5)
            .unwrap()
    }

    #[test]
    fn text_round_trip_is_exact() {
        let model = fixture();
        let text = model.to_text();
        let back = ForestModel::from_text(&text).unwrap();
        assert_eq!(model, back);
        assert_eq!(text, back.to_text());
    }

    #[test]
    fn comment_lines_are_ignored() {
        let model = fixture();
        let text = format!("# digest=feedface seed=5\n{}", model.to_text());
        let back = ForestModel::from_text(&text).unwrap();
        assert_eq!(model, back);
    }

    #[test]
    fn malformed_input_is_rejected() {
        assert!(matches!(
            ForestModel::from_text("not a model"),
            Err(ForestError::MalformedModel { .. })
        ));
        let model = fixture();
        let text = model.to_text().replace("v1", "v9");
        assert!(matches!(
            ForestModel::from_text(&text),
            Err(ForestError::MalformedModel { .. })
        ));
        // Truncated tree section.
        let text = model.to_text();
        let cut = &text[..text.len() - 30];
        assert!(ForestModel::from_text(cut).is_err());
    }

    #[test]
    fn save_load_predicts_identically() {
        let model = fixture();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.txt");
        model.save(&path).unwrap();
        let back = ForestModel::load(&path).unwrap();
        for probe in [[0.0, 0.0], [3.0, 1.0], [9.0, 3.0], [5.5, 2.0]] {
            assert_eq!(
                model.predict_proba(&probe).unwrap(),
                back.predict_proba(&probe).unwrap()
            );
        }
    }
}
