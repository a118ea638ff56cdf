//! Interaction datasets: in-memory form, TSV persistence, affinity
//! conversion, and the BindingDB extraction recipe.
//!
//! Dataset files are three TSVs with headers:
//!
//! - `proteins.tsv`: `protein_id <TAB> sequence`
//! - `ligands.tsv`: `ligand_id <TAB> smiles`
//! - `interactions.tsv`: `protein_id <TAB> ligand_id <TAB> affinity <TAB>
//!   kind <TAB> censored`
//!
//! `kind` is `pkd` (larger is stronger) or `kiba` (smaller is stronger) and
//! must be uniform within a file.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seqsim::{ProteinSequence, RESIDUES};
use crate::smiles_lang::SmilesString;

/// Affinity semantics of a dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AffinityKind {
    /// -log10(Kd / 1e9); larger means stronger binding.
    PKd,
    /// Combined bioactivity score; smaller means stronger binding.
    Kiba,
}

impl AffinityKind {
    pub fn larger_is_stronger(self) -> bool {
        matches!(self, AffinityKind::PKd)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            AffinityKind::PKd => "pkd",
            AffinityKind::Kiba => "kiba",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "pkd" => Ok(AffinityKind::PKd),
            "kiba" => Ok(AffinityKind::Kiba),
            other => Err(Error::Data(format!("unknown affinity kind {other:?}"))),
        }
    }
}

/// One measured protein-ligand pair; indices point into the dataset's
/// protein and ligand lists.
#[derive(Debug, Clone, PartialEq)]
pub struct Interaction {
    pub protein: usize,
    pub ligand: usize,
    pub affinity: f64,
    /// True when the source measurement was a clamped ">=" row.
    pub censored: bool,
}

#[derive(Debug, Clone)]
pub struct Ligand {
    pub id: String,
    pub smiles: SmilesString,
}

#[derive(Debug, Clone)]
pub struct InteractionDataset {
    proteins: Vec<ProteinSequence>,
    ligands: Vec<Ligand>,
    interactions: Vec<Interaction>,
    kind: AffinityKind,
    protein_index: HashMap<String, usize>,
    ligand_index: HashMap<String, usize>,
}

impl InteractionDataset {
    pub fn new(
        proteins: Vec<ProteinSequence>,
        ligands: Vec<Ligand>,
        interactions: Vec<(String, String, f64, bool)>,
        kind: AffinityKind,
    ) -> Result<Self> {
        let mut protein_index = HashMap::with_capacity(proteins.len());
        for (i, p) in proteins.iter().enumerate() {
            if protein_index.insert(p.id().to_string(), i).is_some() {
                return Err(Error::Data(format!("duplicate protein id {:?}", p.id())));
            }
        }
        let mut ligand_index = HashMap::with_capacity(ligands.len());
        for (i, l) in ligands.iter().enumerate() {
            if l.id.is_empty() || l.id.chars().any(char::is_whitespace) {
                return Err(Error::Data(format!("bad ligand id {:?}", l.id)));
            }
            if ligand_index.insert(l.id.clone(), i).is_some() {
                return Err(Error::Data(format!("duplicate ligand id {:?}", l.id)));
            }
        }
        let mut rows = Vec::with_capacity(interactions.len());
        let mut seen_pairs = HashSet::with_capacity(interactions.len());
        for (pid, lid, affinity, censored) in interactions {
            let protein = *protein_index
                .get(&pid)
                .ok_or_else(|| Error::Data(format!("interaction references unknown protein {pid:?}")))?;
            let ligand = *ligand_index
                .get(&lid)
                .ok_or_else(|| Error::Data(format!("interaction references unknown ligand {lid:?}")))?;
            if !affinity.is_finite() {
                return Err(Error::Data(format!(
                    "non-finite affinity for pair ({pid}, {lid})"
                )));
            }
            if !seen_pairs.insert((protein, ligand)) {
                return Err(Error::Data(format!("duplicate pair ({pid}, {lid})")));
            }
            rows.push(Interaction {
                protein,
                ligand,
                affinity,
                censored,
            });
        }
        Ok(Self {
            proteins,
            ligands,
            interactions: rows,
            kind,
            protein_index,
            ligand_index,
        })
    }

    pub fn proteins(&self) -> &[ProteinSequence] {
        &self.proteins
    }

    pub fn ligands(&self) -> &[Ligand] {
        &self.ligands
    }

    pub fn interactions(&self) -> &[Interaction] {
        &self.interactions
    }

    pub fn kind(&self) -> AffinityKind {
        self.kind
    }

    pub fn n_proteins(&self) -> usize {
        self.proteins.len()
    }

    pub fn n_ligands(&self) -> usize {
        self.ligands.len()
    }

    pub fn n_interactions(&self) -> usize {
        self.interactions.len()
    }

    pub fn protein_id(&self, idx: usize) -> &str {
        self.proteins[idx].id()
    }

    pub fn ligand_id(&self, idx: usize) -> &str {
        &self.ligands[idx].id
    }

    pub fn protein_idx(&self, id: &str) -> Option<usize> {
        self.protein_index.get(id).copied()
    }

    pub fn ligand_idx(&self, id: &str) -> Option<usize> {
        self.ligand_index.get(id).copied()
    }

    /// Clone with the affinities of the selected interactions replaced.
    /// Used by leakage checks to poison a fold.
    pub fn with_affinities(&self, idx: &[usize], values: &[f64]) -> Result<Self> {
        if idx.len() != values.len() {
            return Err(Error::InvalidInput("index/value length mismatch".into()));
        }
        let mut out = self.clone();
        for (&i, &v) in idx.iter().zip(values) {
            if !v.is_finite() {
                return Err(Error::InvalidInput("non-finite affinity".into()));
            }
            out.interactions[i].affinity = v;
        }
        Ok(out)
    }

    pub fn save_tsv(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let mut proteins = String::from("protein_id\tsequence\n");
        for p in &self.proteins {
            writeln!(proteins, "{}\t{}", p.id(), p.residues()).expect("string write");
        }
        fs::write(dir.join("proteins.tsv"), proteins)?;

        let mut ligands = String::from("ligand_id\tsmiles\n");
        for l in &self.ligands {
            writeln!(ligands, "{}\t{}", l.id, l.smiles).expect("string write");
        }
        fs::write(dir.join("ligands.tsv"), ligands)?;

        let mut rows = String::from("protein_id\tligand_id\taffinity\tkind\tcensored\n");
        for r in &self.interactions {
            writeln!(
                rows,
                "{}\t{}\t{}\t{}\t{}",
                self.protein_id(r.protein),
                self.ligand_id(r.ligand),
                r.affinity,
                self.kind.as_str(),
                u8::from(r.censored),
            )
            .expect("string write");
        }
        fs::write(dir.join("interactions.tsv"), rows)?;
        Ok(())
    }

    pub fn load_tsv(proteins: &Path, ligands: &Path, interactions: &Path) -> Result<Self> {
        let protein_rows = read_tsv(proteins, &["protein_id", "sequence"])?;
        let proteins_vec: Vec<ProteinSequence> = protein_rows
            .into_iter()
            .map(|row| ProteinSequence::new(&row[0], &row[1]).map_err(|e| {
                Error::Data(format!("{}: {e}", proteins.display()))
            }))
            .collect::<Result<_>>()?;

        let ligand_rows = read_tsv(ligands, &["ligand_id", "smiles"])?;
        let ligands_vec: Vec<Ligand> = ligand_rows
            .into_iter()
            .map(|row| {
                Ok(Ligand {
                    id: row[0].clone(),
                    smiles: SmilesString::new(&row[1])
                        .map_err(|e| Error::Data(format!("{}: {e}", ligands.display())))?,
                })
            })
            .collect::<Result<_>>()?;

        let rows = read_tsv(
            interactions,
            &["protein_id", "ligand_id", "affinity", "kind", "censored"],
        )?;
        if rows.is_empty() {
            return Err(Error::Data(format!(
                "{}: no interactions",
                interactions.display()
            )));
        }
        let kind = AffinityKind::parse(&rows[0][3])?;
        let mut parsed = Vec::with_capacity(rows.len());
        for row in &rows {
            if AffinityKind::parse(&row[3])? != kind {
                return Err(Error::Data(format!(
                    "{}: mixed affinity kinds in one dataset",
                    interactions.display()
                )));
            }
            let affinity: f64 = row[2].parse().map_err(|_| {
                Error::Data(format!(
                    "{}: bad affinity {:?}",
                    interactions.display(),
                    row[2]
                ))
            })?;
            let censored = match row[4].as_str() {
                "0" => false,
                "1" => true,
                other => {
                    return Err(Error::Data(format!(
                        "{}: bad censored flag {other:?}",
                        interactions.display()
                    )))
                }
            };
            parsed.push((row[0].clone(), row[1].clone(), affinity, censored));
        }
        Self::new(proteins_vec, ligands_vec, parsed, kind)
    }
}

/// Read a TSV with the given header, returning the field lists per row.
fn read_tsv(path: &Path, header: &[&str]) -> Result<Vec<Vec<String>>> {
    let file = File::open(path)
        .map_err(|e| Error::Data(format!("cannot open {}: {e}", path.display())))?;
    let mut lines = BufReader::new(file).lines();
    let first = lines
        .next()
        .ok_or_else(|| Error::Data(format!("{}: empty file", path.display())))??;
    let expected = header.join("\t");
    if first.trim_end_matches('\r') != expected {
        return Err(Error::Data(format!(
            "{}: expected header {expected:?}, found {first:?}",
            path.display()
        )));
    }
    let mut out = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let fields: Vec<String> = line.split('\t').map(|s| s.to_string()).collect();
        if fields.len() != header.len() {
            return Err(Error::Data(format!(
                "{}:{}: {} fields, expected {}",
                path.display(),
                lineno + 2,
                fields.len(),
                header.len()
            )));
        }
        out.push(fields);
    }
    Ok(out)
}

/// Convert a Kd in nanomolar to pKd. Censored ">=" measurements of 10000 nM
/// or weaker are stored as exactly pKd 5.
pub fn kd_to_pkd(kd_nanomolar: f64, censored_ge: bool) -> Result<f64> {
    if !(kd_nanomolar > 0.0) || !kd_nanomolar.is_finite() {
        return Err(Error::InvalidInput(format!(
            "Kd must be positive and finite, got {kd_nanomolar}"
        )));
    }
    if censored_ge && kd_nanomolar >= 10_000.0 {
        return Ok(5.0);
    }
    Ok(-(kd_nanomolar / 1e9).log10())
}

/// Logical-to-actual column names for the raw BindingDB TSV export.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ColumnMap {
    pub protein_id: String,
    pub sequence: String,
    pub ligand_id: String,
    pub smiles: String,
    pub kd: String,
}

impl Default for ColumnMap {
    fn default() -> Self {
        Self {
            protein_id: "UniProt (SwissProt) Primary ID of Target Chain".into(),
            sequence: "BindingDB Target Chain Sequence".into(),
            ligand_id: "BindingDB MonomerID".into(),
            smiles: "Ligand SMILES".into(),
            kd: "Kd (nM)".into(),
        }
    }
}

/// One usable raw row. `kd_nanomolar` is `None` for rows measured with
/// something other than Kd.
#[derive(Debug, Clone)]
pub struct RawBindingRow {
    pub protein_id: String,
    pub sequence: String,
    pub ligand_id: String,
    pub smiles: String,
    pub kd_nanomolar: Option<(f64, bool)>, // value, ">=" censored
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct IngestStats {
    pub total_rows: usize,
    pub malformed: usize,
    pub non_kd: usize,
    pub nonstandard_residues: usize,
}

/// Read the raw BindingDB TSV export. Malformed rows are skipped and
/// counted; residues outside the supported alphabet are mapped to X.
pub fn read_bindingdb_raw(path: &Path, map: &ColumnMap) -> Result<(Vec<RawBindingRow>, IngestStats)> {
    let file = File::open(path)
        .map_err(|e| Error::Data(format!("cannot open {}: {e}", path.display())))?;
    let mut lines = BufReader::new(file).lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Data(format!("{}: empty file", path.display())))??;
    let columns: Vec<&str> = header.trim_end_matches('\r').split('\t').collect();
    let col = |name: &str| -> Result<usize> {
        columns
            .iter()
            .position(|c| *c == name)
            .ok_or_else(|| Error::Data(format!("{}: missing column {name:?}", path.display())))
    };
    let ci_protein = col(&map.protein_id)?;
    let ci_seq = col(&map.sequence)?;
    let ci_ligand = col(&map.ligand_id)?;
    let ci_smiles = col(&map.smiles)?;
    let ci_kd = col(&map.kd)?;

    let mut stats = IngestStats::default();
    let mut rows = Vec::new();
    for line in lines {
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        stats.total_rows += 1;
        let fields: Vec<&str> = line.split('\t').collect();
        let get = |i: usize| fields.get(i).copied().unwrap_or("").trim();
        let protein_id = get(ci_protein);
        let smiles = get(ci_smiles);
        let ligand_id = get(ci_ligand);
        let raw_seq = get(ci_seq);
        if protein_id.is_empty() || smiles.is_empty() || ligand_id.is_empty() || raw_seq.is_empty()
        {
            stats.malformed += 1;
            continue;
        }
        let mut sequence = String::with_capacity(raw_seq.len());
        let mut mapped = false;
        for c in raw_seq.chars() {
            let c = c.to_ascii_uppercase();
            if RESIDUES.contains(c) {
                sequence.push(c);
            } else if c.is_ascii_alphabetic() {
                sequence.push('X');
                mapped = true;
            } else {
                sequence.clear();
                break;
            }
        }
        if sequence.is_empty() {
            stats.malformed += 1;
            continue;
        }
        if mapped {
            stats.nonstandard_residues += 1;
        }

        let kd_cell = get(ci_kd);
        let kd_nanomolar = if kd_cell.is_empty() {
            stats.non_kd += 1;
            None
        } else {
            let (text, censored) = if let Some(rest) =
                kd_cell.strip_prefix(">=").or_else(|| kd_cell.strip_prefix('>'))
            {
                (rest.trim(), true)
            } else if let Some(rest) =
                kd_cell.strip_prefix("<=").or_else(|| kd_cell.strip_prefix('<'))
            {
                (rest.trim(), false)
            } else {
                (kd_cell, false)
            };
            match text.parse::<f64>() {
                Ok(v) if v > 0.0 && v.is_finite() => Some((v, censored)),
                _ => {
                    stats.malformed += 1;
                    continue;
                }
            }
        };
        rows.push(RawBindingRow {
            protein_id: protein_id.to_string(),
            sequence,
            ligand_id: ligand_id.to_string(),
            smiles: smiles.to_string(),
            kd_nanomolar,
        });
    }
    Ok((rows, stats))
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct FilterStats {
    pub kd_rows: usize,
    pub deduplicated: usize,
    pub after_prune: usize,
    pub censored_clamped: usize,
}

/// The BindingDB extraction recipe: keep Kd rows, convert to pKd, keep the
/// strongest measurement per pair, then iteratively drop proteins with
/// fewer than 6 and ligands with fewer than 3 interactions until stable.
pub fn filter_bindingdb(rows: &[RawBindingRow]) -> Result<(InteractionDataset, FilterStats)> {
    let mut stats = FilterStats::default();

    // (iii) Kd rows only, converted to pKd.
    let mut converted: Vec<(String, String, f64, bool)> = Vec::new();
    let mut sequences: HashMap<String, String> = HashMap::new();
    let mut smiles_of: HashMap<String, String> = HashMap::new();
    for row in rows {
        let Some((kd, censored_ge)) = row.kd_nanomolar else {
            continue;
        };
        stats.kd_rows += 1;
        let pkd = kd_to_pkd(kd, censored_ge)?;
        let clamped = censored_ge && kd >= 10_000.0;
        if clamped {
            stats.censored_clamped += 1;
        }
        if let Some(prev) = sequences.get(&row.protein_id) {
            if prev != &row.sequence {
                warn!(
                    "protein {} has conflicting sequences; keeping the first",
                    row.protein_id
                );
            }
        } else {
            sequences.insert(row.protein_id.clone(), row.sequence.clone());
        }
        if let Some(prev) = smiles_of.get(&row.ligand_id) {
            if prev != &row.smiles {
                warn!(
                    "ligand {} has conflicting SMILES; keeping the first",
                    row.ligand_id
                );
            }
        } else {
            smiles_of.insert(row.ligand_id.clone(), row.smiles.clone());
        }
        converted.push((row.protein_id.clone(), row.ligand_id.clone(), pkd, clamped));
    }

    // (ii) strongest measurement per pair.
    let deduped = dedupe_strongest(converted);
    stats.deduplicated = deduped.len();

    // (i) iterative degree pruning.
    let pruned = prune_min_degree(deduped, 6, 3);
    stats.after_prune = pruned.len();
    if pruned.is_empty() {
        return Err(Error::Data(
            "empty dataset: no interactions survive the BindingDB filter".into(),
        ));
    }

    // Assemble in first-appearance order.
    let mut protein_order: Vec<String> = Vec::new();
    let mut ligand_order: Vec<String> = Vec::new();
    let mut seen_p = HashSet::new();
    let mut seen_l = HashSet::new();
    for (pid, lid, _, _) in &pruned {
        if seen_p.insert(pid.clone()) {
            protein_order.push(pid.clone());
        }
        if seen_l.insert(lid.clone()) {
            ligand_order.push(lid.clone());
        }
    }
    let proteins: Vec<ProteinSequence> = protein_order
        .iter()
        .map(|pid| ProteinSequence::new(pid, &sequences[pid]).map_err(|e| {
            Error::Data(format!("protein {pid}: {e}"))
        }))
        .collect::<Result<_>>()?;
    let ligands: Vec<Ligand> = ligand_order
        .iter()
        .map(|lid| {
            Ok(Ligand {
                id: lid.clone(),
                smiles: SmilesString::new(&smiles_of[lid])
                    .map_err(|e| Error::Data(format!("ligand {lid}: {e}")))?,
            })
        })
        .collect::<Result<_>>()?;

    let dataset = InteractionDataset::new(proteins, ligands, pruned, AffinityKind::PKd)?;
    Ok((dataset, stats))
}

/// Keep the strongest (largest pKd) measurement per (protein, ligand) pair,
/// preserving first-appearance order of the surviving pairs.
pub fn dedupe_strongest(
    rows: Vec<(String, String, f64, bool)>,
) -> Vec<(String, String, f64, bool)> {
    let mut best: HashMap<(String, String), (f64, bool)> = HashMap::new();
    let mut order: Vec<(String, String)> = Vec::new();
    for (pid, lid, pkd, censored) in rows {
        let key = (pid, lid);
        match best.get_mut(&key) {
            None => {
                order.push(key.clone());
                best.insert(key, (pkd, censored));
            }
            Some(entry) => {
                if pkd > entry.0 {
                    *entry = (pkd, censored);
                }
            }
        }
    }
    order
        .into_iter()
        .map(|key| {
            let (pkd, censored) = best[&key];
            (key.0, key.1, pkd, censored)
        })
        .collect()
}

/// Iteratively remove interactions of proteins with fewer than
/// `min_protein` and ligands with fewer than `min_ligand` interactions
/// until the set is stable. Idempotent.
pub fn prune_min_degree(
    mut rows: Vec<(String, String, f64, bool)>,
    min_protein: usize,
    min_ligand: usize,
) -> Vec<(String, String, f64, bool)> {
    loop {
        let mut protein_degree: HashMap<&str, usize> = HashMap::new();
        for (pid, _, _, _) in &rows {
            *protein_degree.entry(pid).or_default() += 1;
        }
        let keep_p: HashSet<String> = protein_degree
            .iter()
            .filter(|(_, &d)| d >= min_protein)
            .map(|(p, _)| p.to_string())
            .collect();
        let before = rows.len();
        rows.retain(|(pid, _, _, _)| keep_p.contains(pid));

        let mut ligand_degree: HashMap<&str, usize> = HashMap::new();
        for (_, lid, _, _) in &rows {
            *ligand_degree.entry(lid).or_default() += 1;
        }
        let keep_l: HashSet<String> = ligand_degree
            .iter()
            .filter(|(_, &d)| d >= min_ligand)
            .map(|(l, _)| l.to_string())
            .collect();
        rows.retain(|(_, lid, _, _)| keep_l.contains(lid));

        if rows.len() == before {
            return rows;
        }
    }
}
