use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::corpus::{Corpus, PubId};
use crate::error::{Error, Result};

pub type FieldId = u32;

/// Assignment of publications to fields.
///
/// Algorithmically built systems assign exactly one field per publication;
/// externally supplied systems may assign several.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassificationSystem {
    name: String,
    field_names: Vec<String>,
    assignment: BTreeMap<PubId, Vec<FieldId>>,
    multi_assignment: bool,
}

impl ClassificationSystem {
    /// Single-assignment system from `pub -> field name` pairs. Field ids
    /// follow the sorted order of the distinct names.
    pub fn single<I, S>(name: impl Into<String>, pairs: I) -> Self
    where
        I: IntoIterator<Item = (PubId, S)>,
        S: Into<String>,
    {
        let mut sys = Self::from_pairs(name, pairs);
        sys.multi_assignment = false;
        debug_assert!(sys.assignment.values().all(|f| f.len() == 1));
        sys
    }

    /// Possibly multi-assignment system from `(pub, field name)` rows.
    pub fn from_pairs<I, S>(name: impl Into<String>, pairs: I) -> Self
    where
        I: IntoIterator<Item = (PubId, S)>,
        S: Into<String>,
    {
        let rows: Vec<(PubId, String)> = pairs.into_iter().map(|(p, f)| (p, f.into())).collect();
        let names: BTreeSet<&str> = rows.iter().map(|(_, f)| f.as_str()).collect();
        let field_names: Vec<String> = names.into_iter().map(str::to_string).collect();
        let ids: BTreeMap<&str, FieldId> = field_names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.as_str(), i as FieldId))
            .collect();
        let mut assignment: BTreeMap<PubId, Vec<FieldId>> = BTreeMap::new();
        for (p, f) in &rows {
            assignment.entry(*p).or_default().push(ids[f.as_str()]);
        }
        for fields in assignment.values_mut() {
            fields.sort_unstable();
            fields.dedup();
        }
        ClassificationSystem {
            name: name.into(),
            field_names,
            assignment,
            multi_assignment: true,
        }
    }

    /// Single-assignment system from dense labels, named by their decimal id.
    pub(crate) fn from_labels(name: impl Into<String>, labels: BTreeMap<PubId, FieldId>, field_count: usize) -> Self {
        ClassificationSystem {
            name: name.into(),
            field_names: (0..field_count).map(|f| f.to_string()).collect(),
            assignment: labels.into_iter().map(|(p, f)| (p, vec![f])).collect(),
            multi_assignment: false,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn is_multi_assignment(&self) -> bool {
        self.multi_assignment
    }

    pub fn field_count(&self) -> usize {
        self.field_names.len()
    }

    pub fn field_name(&self, f: FieldId) -> &str {
        &self.field_names[f as usize]
    }

    pub fn field_names(&self) -> &[String] {
        &self.field_names
    }

    /// Fields of a publication; empty if unassigned.
    pub fn fields_of(&self, id: PubId) -> &[FieldId] {
        self.assignment.get(&id).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn contains(&self, id: PubId) -> bool {
        self.assignment.contains_key(&id)
    }

    pub fn assigned_count(&self) -> usize {
        self.assignment.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (PubId, &[FieldId])> {
        self.assignment.iter().map(|(&p, f)| (p, f.as_slice()))
    }

    /// Number of publications per field.
    pub fn field_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.field_names.len()];
        for fields in self.assignment.values() {
            for &f in fields {
                sizes[f as usize] += 1;
            }
        }
        sizes
    }

    pub fn mean_fields_per_pub(&self) -> f64 {
        if self.assignment.is_empty() {
            return 0.0;
        }
        let total: usize = self.assignment.values().map(Vec::len).sum();
        total as f64 / self.assignment.len() as f64
    }

    /// Adds single-field assignments for publications not yet assigned.
    pub(crate) fn extend_unassigned(&mut self, extra: impl IntoIterator<Item = (PubId, FieldId)>) {
        for (p, f) in extra {
            self.assignment.entry(p).or_insert_with(|| vec![f]);
        }
    }

    /// Writes `pub_id,field_id` rows, one per assignment.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["pub_id", "field_id"])?;
        for (p, fields) in &self.assignment {
            for &f in fields {
                w.write_record([p.to_string().as_str(), self.field_name(f)])?;
            }
        }
        w.flush().map_err(|e| Error::io("<classification output>", e))?;
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(f)
    }
}

/// Reads a `pub_id,field_id` CSV as a multi-assignment system.
///
/// Rows with an empty field id are dropped, so a publication with no
/// categories is absent from the system. With a corpus supplied, rows for
/// unknown publications are skipped with a warning.
pub fn read_classification<R: Read>(
    name: &str,
    input: R,
    corpus: Option<&Corpus>,
) -> Result<ClassificationSystem> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(input);
    let mut rows = Vec::new();
    let mut unknown = 0usize;
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let raw_id = rec.get(0).unwrap_or("").trim();
        let id: PubId = raw_id.parse().map_err(|_| Error::Parse {
            line,
            message: format!("invalid publication id {raw_id:?}"),
        })?;
        let field = rec.get(1).unwrap_or("").trim();
        if field.is_empty() {
            continue;
        }
        if let Some(c) = corpus {
            if c.position(id).is_none() {
                unknown += 1;
                continue;
            }
        }
        rows.push((id, field.to_string()));
    }
    if unknown > 0 {
        log::warn!("{name}: skipped {unknown} rows for publications not in the corpus");
    }
    Ok(ClassificationSystem::from_pairs(name, rows))
}

pub fn load_external_classification(path: &Path, corpus: Option<&Corpus>) -> Result<ClassificationSystem> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "external".to_string());
    read_classification(&name, f, corpus)
}
