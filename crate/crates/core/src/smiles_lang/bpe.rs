//! Byte-pair-encoding vocabulary training and segmentation.
//!
//! Training starts from the corpus characters, repeatedly merges the most
//! frequent adjacent token pair, and stops when the vocabulary reaches its
//! target size, no candidate pair remains, or every remaining candidate
//! would exceed the maximum word length. Frequency ties break on the
//! lexicographic order of the `(left, right)` pair so identical corpora
//! always produce identical merge lists.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::smiles_lang::{ChemWord, SmilesString, MAX_WORD_LEN, UNK_TOKEN};

/// Token id 0 is reserved for the unknown symbol.
const UNK_ID: u32 = 0;

#[derive(Debug, Clone)]
pub struct BpeParams {
    /// Vocabulary size to stop at (unknown symbol excluded).
    pub target_size: usize,
    /// Fraction of total character mass kept; the rest maps to the unknown
    /// symbol. Characters are ranked by descending corpus frequency and the
    /// smallest prefix whose cumulative frequency reaches the coverage is
    /// kept.
    pub character_coverage: f64,
    /// Candidate merges producing tokens longer than this are skipped.
    pub max_word_len: usize,
}

impl Default for BpeParams {
    fn default() -> Self {
        Self {
            target_size: 20_000,
            character_coverage: 0.99,
            max_word_len: MAX_WORD_LEN,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct MergeRule {
    left: u32,
    right: u32,
    out: u32,
}

/// A trained BPE vocabulary: an ordered merge list plus the token set it
/// constructs.
#[derive(Debug, Clone)]
pub struct BpeVocabulary {
    merges: Vec<(String, String)>,
    tokens: BTreeSet<String>,
    /// Characters inside the coverage. `None` (vocabularies loaded from a
    /// merge-list file, which does not record coverage survivors) means all
    /// characters pass through; unknown single characters then segment as
    /// themselves instead of the unk symbol.
    kept_chars: Option<BTreeSet<char>>,
    target_size: usize,
    character_coverage: f64,
    token_text: Vec<String>,
    token_ids: HashMap<String, u32>,
    rules: Vec<MergeRule>,
}

impl BpeVocabulary {
    /// Build a vocabulary from a bare merge list. The character coverage
    /// survivors are unknown in this form, so every character counts as
    /// in-coverage and unknown single characters segment as themselves.
    pub fn from_merges(
        merges: Vec<(String, String)>,
        target_size: usize,
        character_coverage: f64,
    ) -> Result<Self> {
        Self::assemble(merges, None, target_size, character_coverage)
    }

    /// Build the token table from a merge list, validating that each merge's
    /// operands are single characters or results of earlier merges.
    fn assemble(
        merges: Vec<(String, String)>,
        kept_chars: Option<BTreeSet<char>>,
        target_size: usize,
        character_coverage: f64,
    ) -> Result<Self> {
        let mut token_text: Vec<String> = vec![UNK_TOKEN.to_string()];
        let mut token_ids: HashMap<String, u32> = HashMap::new();
        let mut tokens: BTreeSet<String> = BTreeSet::new();

        let intern = |text: String,
                          token_text: &mut Vec<String>,
                          token_ids: &mut HashMap<String, u32>|
         -> u32 {
            if let Some(&id) = token_ids.get(&text) {
                return id;
            }
            let id = token_text.len() as u32;
            token_ids.insert(text.clone(), id);
            token_text.push(text);
            id
        };

        if let Some(kept) = &kept_chars {
            for &c in kept {
                let s = c.to_string();
                intern(s.clone(), &mut token_text, &mut token_ids);
                tokens.insert(s);
            }
        }

        let mut rules = Vec::with_capacity(merges.len());
        for (i, (left, right)) in merges.iter().enumerate() {
            let mut operand = |text: &String| -> Result<u32> {
                if let Some(&id) = token_ids.get(text) {
                    return Ok(id);
                }
                // Single characters are implicit base tokens when the kept
                // set is unknown; anything longer must come from an earlier
                // merge.
                if kept_chars.is_none() && text.chars().count() == 1 {
                    tokens.insert(text.clone());
                    return Ok(intern(text.clone(), &mut token_text, &mut token_ids));
                }
                Err(Error::Data(format!(
                    "merge {}: operand {text:?} is neither a single character \
                     nor the result of an earlier merge",
                    i + 1
                )))
            };
            let l = operand(left)?;
            let r = operand(right)?;
            let merged = format!("{left}{right}");
            tokens.insert(merged.clone());
            let out = intern(merged, &mut token_text, &mut token_ids);
            rules.push(MergeRule {
                left: l,
                right: r,
                out,
            });
        }

        Ok(Self {
            merges,
            tokens,
            kept_chars,
            target_size,
            character_coverage,
            token_text,
            token_ids,
            rules,
        })
    }

    pub fn merges(&self) -> &[(String, String)] {
        &self.merges
    }

    pub fn tokens(&self) -> &BTreeSet<String> {
        &self.tokens
    }

    pub fn target_size(&self) -> usize {
        self.target_size
    }

    pub fn character_coverage(&self) -> f64 {
        self.character_coverage
    }

    pub fn unk_token(&self) -> &'static str {
        UNK_TOKEN
    }

    pub(crate) fn segment(&self, s: &SmilesString) -> Vec<ChemWord> {
        #[derive(Clone, Copy, PartialEq)]
        enum Item {
            Tok(u32),
            Raw(usize), // index into raw_chars: in-coverage char without an id
            Unk,
        }

        let mut raw_chars: Vec<char> = Vec::new();
        let mut items: Vec<Item> = s
            .as_str()
            .chars()
            .map(|c| {
                let mut buf = [0u8; 4];
                let text: &str = c.encode_utf8(&mut buf);
                if let Some(&id) = self.token_ids.get(text) {
                    return Item::Tok(id);
                }
                match &self.kept_chars {
                    Some(kept) if !kept.contains(&c) => Item::Unk,
                    // In coverage but never part of a merge: passes through.
                    _ => {
                        raw_chars.push(c);
                        Item::Raw(raw_chars.len() - 1)
                    }
                }
            })
            .collect();

        for rule in &self.rules {
            if items.len() < 2 {
                break;
            }
            let mut out = Vec::with_capacity(items.len());
            let mut i = 0;
            while i < items.len() {
                if i + 1 < items.len()
                    && items[i] == Item::Tok(rule.left)
                    && items[i + 1] == Item::Tok(rule.right)
                {
                    out.push(Item::Tok(rule.out));
                    i += 2;
                } else {
                    out.push(items[i]);
                    i += 1;
                }
            }
            items = out;
        }

        items
            .into_iter()
            .map(|item| match item {
                Item::Tok(id) => ChemWord(self.token_text[id as usize].clone()),
                Item::Raw(i) => ChemWord(raw_chars[i].to_string()),
                Item::Unk => ChemWord(UNK_TOKEN.to_string()),
            })
            .collect()
    }

    /// Write the vocabulary: header `bpe <target_size> <coverage>`, then one
    /// merge per line as `<left><TAB><right>` in learned order.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        writeln!(out, "bpe {} {}", self.target_size, self.character_coverage)
            .expect("string write");
        for (left, right) in &self.merges {
            writeln!(out, "{left}\t{right}").expect("string write");
        }
        let mut file = File::create(path)?;
        file.write_all(out.as_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path)
            .map_err(|e| Error::Data(format!("cannot open vocabulary {}: {e}", path.display())))?;
        let mut lines = BufReader::new(file).lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Data(format!("{}: empty vocabulary file", path.display())))??;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 3 || fields[0] != "bpe" {
            return Err(Error::Data(format!(
                "{}: bad vocabulary header {header:?}",
                path.display()
            )));
        }
        let target_size: usize = fields[1]
            .parse()
            .map_err(|_| Error::Data(format!("{}: bad target size", path.display())))?;
        let character_coverage: f64 = fields[2]
            .parse()
            .map_err(|_| Error::Data(format!("{}: bad coverage", path.display())))?;
        let mut merges = Vec::new();
        for (lineno, line) in lines.enumerate() {
            let line = line?;
            let line = line.trim_end_matches(['\r', '\n']);
            if line.is_empty() {
                continue;
            }
            let mut parts = line.splitn(2, '\t');
            let left = parts.next().unwrap_or_default();
            let right = parts.next().ok_or_else(|| {
                Error::Data(format!(
                    "{}:{}: merge line missing tab separator",
                    path.display(),
                    lineno + 2
                ))
            })?;
            if left.is_empty() || right.is_empty() {
                return Err(Error::Data(format!(
                    "{}:{}: empty merge operand",
                    path.display(),
                    lineno + 2
                )));
            }
            merges.push((left.to_string(), right.to_string()));
        }
        Self::assemble(merges, None, target_size, character_coverage)
    }
}

/// Train a BPE vocabulary on a SMILES corpus.
pub fn train_bpe(corpus: &[SmilesString], params: &BpeParams) -> Result<BpeVocabulary> {
    if corpus.is_empty() {
        return Err(Error::InvalidInput("empty BPE training corpus".into()));
    }
    if !(params.character_coverage > 0.0 && params.character_coverage <= 1.0) {
        return Err(Error::InvalidInput(format!(
            "character coverage must lie in (0, 1], got {}",
            params.character_coverage
        )));
    }
    if params.max_word_len == 0 || params.max_word_len > MAX_WORD_LEN {
        return Err(Error::InvalidInput(format!(
            "max word length must lie in 1..={MAX_WORD_LEN}, got {}",
            params.max_word_len
        )));
    }

    let kept = coverage_chars(corpus, params.character_coverage);
    if params.target_size <= kept.len() {
        return Err(Error::InvalidInput(format!(
            "target size {} must exceed the {} distinct kept characters",
            params.target_size,
            kept.len()
        )));
    }

    // Token table: unk, then kept characters, then merge products.
    let mut token_text: Vec<String> = vec![UNK_TOKEN.to_string()];
    let mut token_len: Vec<usize> = vec![1];
    let mut char_ids: HashMap<char, u32> = HashMap::new();
    for &c in &kept {
        char_ids.insert(c, token_text.len() as u32);
        token_text.push(c.to_string());
        token_len.push(1);
    }

    // Deduplicate corpus strings, preserving first-seen order.
    let mut seq_of: HashMap<&str, usize> = HashMap::new();
    let mut seqs: Vec<Vec<u32>> = Vec::new();
    let mut seq_count: Vec<i64> = Vec::new();
    for s in corpus {
        if let Some(&i) = seq_of.get(s.as_str()) {
            seq_count[i] += 1;
            continue;
        }
        let ids = s
            .as_str()
            .chars()
            .map(|c| char_ids.get(&c).copied().unwrap_or(UNK_ID))
            .collect();
        seq_of.insert(s.as_str(), seqs.len());
        seqs.push(ids);
        seq_count.push(1);
    }

    let mut pair_counts: HashMap<(u32, u32), i64> = HashMap::new();
    let mut pair_seqs: HashMap<(u32, u32), HashSet<u32>> = HashMap::new();
    for (i, seq) in seqs.iter().enumerate() {
        for w in seq.windows(2) {
            if w[0] == UNK_ID || w[1] == UNK_ID {
                continue;
            }
            *pair_counts.entry((w[0], w[1])).or_default() += seq_count[i];
            pair_seqs.entry((w[0], w[1])).or_default().insert(i as u32);
        }
    }

    let mut merges: Vec<(String, String)> = Vec::new();
    let mut tokens_len = kept.len();

    while tokens_len < params.target_size {
        // Most frequent candidate pair; ties break on the lexicographic
        // order of (left, right). Candidates whose merge would exceed the
        // maximum word length are skipped, not fatal.
        let mut best: Option<((u32, u32), i64)> = None;
        for (&pair, &count) in &pair_counts {
            if count <= 0 {
                continue;
            }
            if token_len[pair.0 as usize] + token_len[pair.1 as usize] > params.max_word_len {
                continue;
            }
            let better = match best {
                None => true,
                Some((bp, bc)) => {
                    count > bc
                        || (count == bc
                            && (
                                token_text[pair.0 as usize].as_str(),
                                token_text[pair.1 as usize].as_str(),
                            ) < (
                                token_text[bp.0 as usize].as_str(),
                                token_text[bp.1 as usize].as_str(),
                            ))
                }
            };
            if better {
                best = Some((pair, count));
            }
        }
        let Some((pair, _)) = best else { break };

        let (l, r) = pair;
        let new_id = token_text.len() as u32;
        let merged = format!("{}{}", token_text[l as usize], token_text[r as usize]);
        token_len.push(token_len[l as usize] + token_len[r as usize]);
        merges.push((
            token_text[l as usize].clone(),
            token_text[r as usize].clone(),
        ));
        token_text.push(merged);
        tokens_len += 1;

        let affected: Vec<u32> = {
            let mut v: Vec<u32> = pair_seqs
                .get(&pair)
                .map(|s| s.iter().copied().collect())
                .unwrap_or_default();
            v.sort_unstable();
            v
        };
        for si in affected {
            let seq = &seqs[si as usize];
            let count = seq_count[si as usize];
            let mut old_pairs: Vec<(u32, u32)> = Vec::with_capacity(seq.len());
            for w in seq.windows(2) {
                if w[0] != UNK_ID && w[1] != UNK_ID {
                    old_pairs.push((w[0], w[1]));
                }
            }

            let mut new_seq = Vec::with_capacity(seq.len());
            let mut i = 0;
            while i < seq.len() {
                if i + 1 < seq.len() && seq[i] == l && seq[i + 1] == r {
                    new_seq.push(new_id);
                    i += 2;
                } else {
                    new_seq.push(seq[i]);
                    i += 1;
                }
            }

            let mut new_pairs: Vec<(u32, u32)> = Vec::with_capacity(new_seq.len());
            for w in new_seq.windows(2) {
                if w[0] != UNK_ID && w[1] != UNK_ID {
                    new_pairs.push((w[0], w[1]));
                }
            }

            for &p in &old_pairs {
                let c = pair_counts.get_mut(&p).expect("counted pair");
                *c -= count;
                if *c <= 0 {
                    pair_counts.remove(&p);
                }
            }
            let new_set: HashSet<(u32, u32)> = new_pairs.iter().copied().collect();
            for &p in &old_pairs {
                if !new_set.contains(&p) {
                    if let Some(set) = pair_seqs.get_mut(&p) {
                        set.remove(&si);
                        if set.is_empty() {
                            pair_seqs.remove(&p);
                        }
                    }
                }
            }
            for &p in &new_pairs {
                *pair_counts.entry(p).or_default() += count;
                pair_seqs.entry(p).or_default().insert(si);
            }
            seqs[si as usize] = new_seq;
        }
    }

    BpeVocabulary::assemble(
        merges,
        Some(kept.into_iter().collect()),
        params.target_size,
        params.character_coverage,
    )
}

/// Characters kept under the coverage: rank by descending frequency (ties
/// by codepoint) and keep the smallest prefix whose cumulative frequency
/// reaches `coverage` of the total.
fn coverage_chars(corpus: &[SmilesString], coverage: f64) -> Vec<char> {
    let mut freq: HashMap<char, u64> = HashMap::new();
    let mut total: u64 = 0;
    for s in corpus {
        for c in s.as_str().chars() {
            *freq.entry(c).or_default() += 1;
            total += 1;
        }
    }
    let mut ranked: Vec<(char, u64)> = freq.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    let needed = coverage * total as f64;
    let mut kept = Vec::new();
    let mut cum: u64 = 0;
    for (c, n) in ranked {
        if cum as f64 >= needed && !kept.is_empty() {
            break;
        }
        kept.push(c);
        cum += n;
    }
    kept
}
