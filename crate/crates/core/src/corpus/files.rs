//! CSV and JSON Lines readers and writers for the corpus files.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use super::{
    build_vocabulary, project_documents, Corpus, CorpusError, IdMap, Key, RawDocument,
    ScoreMatrix, ScoreRange, Vocabulary,
};
use crate::io::write_atomic;

const SCORE_HEADER: [&str; 3] = ["reviewer_id", "paper_id", "score"];
const COI_HEADER: [&str; 2] = ["reviewer_id", "paper_id"];

/// Scores read from a file together with the id ↔ index maps they induced.
#[derive(Debug, Clone)]
pub struct LoadedScores {
    pub matrix: ScoreMatrix,
    pub reviewers: IdMap,
    pub papers: IdMap,
}

/// Standard file layout of a corpus directory.
#[derive(Debug, Clone)]
pub struct CorpusFiles {
    pub scores: PathBuf,
    pub papers: PathBuf,
    pub reviewers: PathBuf,
    pub coi: Option<PathBuf>,
}

impl CorpusFiles {
    pub const SCORES: &'static str = "scores.csv";
    pub const PAPERS: &'static str = "papers.jsonl";
    pub const REVIEWERS: &'static str = "reviewers.jsonl";
    pub const COI: &'static str = "coi.csv";
    pub const TRUTH: &'static str = "truth.csv";

    /// The standard names under `dir`; the conflict file is optional.
    pub fn in_dir(dir: &Path) -> Self {
        let coi = dir.join(Self::COI);
        CorpusFiles {
            scores: dir.join(Self::SCORES),
            papers: dir.join(Self::PAPERS),
            reviewers: dir.join(Self::REVIEWERS),
            coi: coi.exists().then_some(coi),
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CorpusError + '_ {
    move |source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(path: &Path, e: csv::Error) -> CorpusError {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    match e.into_kind() {
        csv::ErrorKind::Io(source) => CorpusError::Io {
            path: path.to_path_buf(),
            source,
        },
        other => CorpusError::Parse {
            path: path.to_path_buf(),
            line,
            message: format!("{other:?}"),
        },
    }
}

/// Reads the data rows of a headed CSV file, checking the header names.
fn read_csv_rows(path: &Path, header: &[&str]) -> Result<Vec<(u64, Vec<String>)>, CorpusError> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(file);
    let found = rdr.headers().map_err(|e| csv_err(path, e))?.clone();
    if !found.is_empty() && found.iter().ne(header.iter().copied()) {
        return Err(CorpusError::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: format!("expected header {:?}", header.join(",")),
        });
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        if rec.len() != header.len() {
            return Err(CorpusError::Parse {
                path: path.to_path_buf(),
                line,
                message: format!("expected {} fields, found {}", header.len(), rec.len()),
            });
        }
        rows.push((line, rec.iter().map(str::to_string).collect()));
    }
    Ok(rows)
}

struct ScoreRow {
    line: u64,
    reviewer: String,
    paper: String,
    score: f64,
}

fn read_score_rows(path: &Path, range: ScoreRange) -> Result<Vec<ScoreRow>, CorpusError> {
    read_csv_rows(path, &SCORE_HEADER)?
        .into_iter()
        .map(|(line, mut f)| {
            let score: f64 = f[2].parse().map_err(|_| CorpusError::Parse {
                path: path.to_path_buf(),
                line,
                message: format!("malformed score {:?}", f[2]),
            })?;
            if !range.contains(score) {
                return Err(CorpusError::OutOfRange {
                    line,
                    score,
                    min: range.min,
                    max: range.max,
                });
            }
            let paper = std::mem::take(&mut f[1]);
            let reviewer = std::mem::take(&mut f[0]);
            Ok(ScoreRow {
                line,
                reviewer,
                paper,
                score,
            })
        })
        .collect()
}

fn fill_matrix(
    rows: Vec<ScoreRow>,
    range: ScoreRange,
    mut index: impl FnMut(&ScoreRow) -> Result<(usize, usize), CorpusError>,
) -> Result<ScoreMatrix, CorpusError> {
    let mut m = ScoreMatrix::new(0, 0, range);
    for row in rows {
        let (r, p) = index(&row)?;
        m.grow(r + 1, p + 1);
        if m.contains((r, p)) {
            return Err(CorpusError::Duplicate {
                line: row.line,
                reviewer: row.reviewer,
                paper: row.paper,
            });
        }
        m.insert(r, p, row.score)?;
    }
    Ok(m)
}

/// Loads `reviewer_id,paper_id,score` rows, assigning dense indices in order
/// of first appearance.
pub fn load_scores(path: &Path, range: ScoreRange) -> Result<LoadedScores, CorpusError> {
    let rows = read_score_rows(path, range)?;
    let mut reviewers = IdMap::new();
    let mut papers = IdMap::new();
    let matrix = fill_matrix(rows, range, |row| {
        Ok((reviewers.intern(&row.reviewer), papers.intern(&row.paper)))
    })?;
    Ok(LoadedScores {
        matrix,
        reviewers,
        papers,
    })
}

/// Loads scores against existing id maps. Unseen reviewers are appended to
/// `reviewers`; unseen papers are an error. The result spans the full maps.
pub fn load_scores_indexed(
    path: &Path,
    range: ScoreRange,
    reviewers: &mut IdMap,
    papers: &IdMap,
) -> Result<ScoreMatrix, CorpusError> {
    let rows = read_score_rows(path, range)?;
    let mut m = fill_matrix(rows, range, |row| {
        let p = papers.get(&row.paper).ok_or_else(|| CorpusError::UnknownId {
            line: row.line,
            kind: "paper",
            id: row.paper.clone(),
        })?;
        Ok((reviewers.intern(&row.reviewer), p))
    })?;
    m.grow(reviewers.len(), papers.len());
    Ok(m)
}

pub fn load_coi(
    path: &Path,
    reviewers: &IdMap,
    papers: &IdMap,
) -> Result<BTreeSet<Key>, CorpusError> {
    let mut out = BTreeSet::new();
    for (line, f) in read_csv_rows(path, &COI_HEADER)? {
        let r = reviewers.get(&f[0]).ok_or_else(|| CorpusError::UnknownId {
            line,
            kind: "reviewer",
            id: f[0].clone(),
        })?;
        let p = papers.get(&f[1]).ok_or_else(|| CorpusError::UnknownId {
            line,
            kind: "paper",
            id: f[1].clone(),
        })?;
        out.insert((r, p));
    }
    Ok(out)
}

/// Reads one `{"id": .., "counts": {..}}` object per non-blank line.
pub fn load_documents(path: &Path) -> Result<Vec<RawDocument>, CorpusError> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut docs = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let doc: RawDocument = serde_json::from_str(&line).map_err(|e| CorpusError::Parse {
            path: path.to_path_buf(),
            line: i as u64 + 1,
            message: e.to_string(),
        })?;
        docs.push(doc);
    }
    Ok(docs)
}

/// Loads a corpus directory: papers define the submission set, reviewer
/// archive lines sharing an id form one reviewer's archive, and reviewers
/// appearing only in the score file get an empty archive.
pub fn load_corpus(
    files: &CorpusFiles,
    vocab_size: usize,
    range: ScoreRange,
) -> Result<Corpus, CorpusError> {
    let raw_papers = load_documents(&files.papers)?;
    let raw_archive = load_documents(&files.reviewers)?;

    let mut paper_ids = IdMap::new();
    for (i, d) in raw_papers.iter().enumerate() {
        if paper_ids.get(&d.id).is_some() {
            return Err(CorpusError::Parse {
                path: files.papers.clone(),
                line: i as u64 + 1,
                message: format!("duplicate paper id {:?}", d.id),
            });
        }
        paper_ids.intern(&d.id);
    }
    let mut reviewer_ids = IdMap::new();
    let owners: Vec<usize> = raw_archive.iter().map(|d| reviewer_ids.intern(&d.id)).collect();

    let scores = load_scores_indexed(&files.scores, range, &mut reviewer_ids, &paper_ids)?;
    let coi = match &files.coi {
        Some(path) => load_coi(path, &reviewer_ids, &paper_ids)?,
        None => BTreeSet::new(),
    };

    let all_counts: Vec<_> = raw_papers
        .iter()
        .chain(raw_archive.iter())
        .map(|d| d.counts.clone())
        .collect();
    let vocabulary = if all_counts.is_empty() {
        Vocabulary::default()
    } else {
        build_vocabulary(&all_counts, vocab_size)?
    };
    let paper_docs = project_documents(&all_counts[..raw_papers.len()], &vocabulary);
    let archive_docs = project_documents(&all_counts[raw_papers.len()..], &vocabulary);
    let mut reviewer_archives = vec![Vec::new(); reviewer_ids.len()];
    for (owner, doc) in owners.into_iter().zip(archive_docs) {
        reviewer_archives[owner].push(doc);
    }
    Corpus::new(
        vocabulary,
        paper_docs,
        reviewer_archives,
        scores,
        coi,
        reviewer_ids,
        paper_ids,
    )
}

fn csv_bytes<I, R>(header: &[&str], rows: I) -> Vec<u8>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for row in rows {
        w.write_record(row).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

pub fn write_scores(
    path: &Path,
    scores: &ScoreMatrix,
    reviewers: &IdMap,
    papers: &IdMap,
) -> Result<(), crate::io::WriteError> {
    let rows = scores.observations().map(|o| {
        vec![
            reviewers.name(o.reviewer).to_string(),
            papers.name(o.paper).to_string(),
            o.score.to_string(),
        ]
    });
    write_atomic(path, &csv_bytes(&SCORE_HEADER, rows))
}

pub fn write_coi(
    path: &Path,
    coi: &BTreeSet<Key>,
    reviewers: &IdMap,
    papers: &IdMap,
) -> Result<(), crate::io::WriteError> {
    let rows = coi
        .iter()
        .map(|&(r, p)| vec![reviewers.name(r).to_string(), papers.name(p).to_string()]);
    write_atomic(path, &csv_bytes(&COI_HEADER, rows))
}

pub fn write_documents(path: &Path, docs: &[RawDocument]) -> Result<(), crate::io::WriteError> {
    let mut out = Vec::new();
    for d in docs {
        serde_json::to_writer(&mut out, d).expect("in-memory write");
        out.push(b'\n');
    }
    write_atomic(path, &out)
}
