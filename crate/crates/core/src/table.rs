//! The augmented feature table `[raw | lap | deg, pagerank | nbr]` and its
//! comma-separated file format.
//!
//! The header row names every column after its group: `raw_<j>`, `lap_<j>`,
//! `deg`, `pagerank`, `nbr_<p>_<q>_<j>`. Group metadata is recovered from the
//! header alone, so tables survive a round trip through disk unchanged.

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::ops::Range;
use std::path::Path;
use std::str::FromStr;

use ndarray::{s, Array2, ArrayView2, Axis};

use crate::error::{Error, Result};
use crate::graph::{check_finite, check_len, FeatureMatrix};
use crate::spectral::SpectralEmbedding;
use crate::structure::StructuralCharacteristics;
use crate::wavelet::WaveletBankOutput;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GroupTag {
    Raw,
    Lap,
    Deg,
    PageRank,
    Nbr { p: usize, q: usize },
}

impl GroupTag {
    /// Position in the canonical column order.
    fn rank(self) -> (usize, usize) {
        match self {
            GroupTag::Raw => (0, 0),
            GroupTag::Lap => (1, 0),
            GroupTag::Deg => (2, 0),
            GroupTag::PageRank => (3, 0),
            GroupTag::Nbr { p, .. } => (4, p),
        }
    }

    fn column_name(self, j: usize) -> String {
        match self {
            GroupTag::Raw => format!("raw_{j}"),
            GroupTag::Lap => format!("lap_{j}"),
            GroupTag::Deg => "deg".to_string(),
            GroupTag::PageRank => "pagerank".to_string(),
            GroupTag::Nbr { p, q } => format!("nbr_{p}_{q}_{j}"),
        }
    }

    fn parse_column(name: &str) -> Option<(GroupTag, usize)> {
        let num = |s: &str| s.parse::<usize>().ok();
        match name {
            "deg" => return Some((GroupTag::Deg, 0)),
            "pagerank" => return Some((GroupTag::PageRank, 0)),
            _ => {}
        }
        if let Some(rest) = name.strip_prefix("raw_") {
            return Some((GroupTag::Raw, num(rest)?));
        }
        if let Some(rest) = name.strip_prefix("lap_") {
            return Some((GroupTag::Lap, num(rest)?));
        }
        let rest = name.strip_prefix("nbr_")?;
        let mut parts = rest.split('_');
        let (p, q, j) = (num(parts.next()?)?, num(parts.next()?)?, num(parts.next()?)?);
        if parts.next().is_some() {
            return None;
        }
        Some((GroupTag::Nbr { p, q }, j))
    }
}

impl fmt::Display for GroupTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GroupTag::Raw => f.write_str("raw"),
            GroupTag::Lap => f.write_str("lap"),
            GroupTag::Deg => f.write_str("deg"),
            GroupTag::PageRank => f.write_str("pagerank"),
            GroupTag::Nbr { p, q } => write!(f, "nbr({p},{q})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnGroup {
    pub tag: GroupTag,
    pub span: Range<usize>,
}

/// Which of the four feature blocks to include.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FeatureGroups {
    pub raw: bool,
    pub lap: bool,
    pub char: bool,
    pub nbr: bool,
}

impl FeatureGroups {
    pub const ALL: FeatureGroups = FeatureGroups {
        raw: true,
        lap: true,
        char: true,
        nbr: true,
    };
    pub const RAW: FeatureGroups = FeatureGroups {
        raw: true,
        lap: false,
        char: false,
        nbr: false,
    };

    /// Cumulative variants: raw, +nbr, +char, +lap.
    pub fn ablation_ladder() -> [FeatureGroups; 4] {
        let raw_nbr = FeatureGroups {
            nbr: true,
            ..Self::RAW
        };
        let raw_char_nbr = FeatureGroups {
            char: true,
            ..raw_nbr
        };
        [Self::RAW, raw_nbr, raw_char_nbr, Self::ALL]
    }

    pub fn is_empty(&self) -> bool {
        !(self.raw || self.lap || self.char || self.nbr)
    }
}

impl Default for FeatureGroups {
    fn default() -> Self {
        Self::ALL
    }
}

impl FromStr for FeatureGroups {
    type Err = Error;

    /// Comma-separated subset of `raw,lap,char,nbr`, or `all`.
    fn from_str(s: &str) -> Result<Self> {
        let mut g = FeatureGroups {
            raw: false,
            lap: false,
            char: false,
            nbr: false,
        };
        for tok in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
            match tok {
                "all" => g = Self::ALL,
                "raw" => g.raw = true,
                "lap" => g.lap = true,
                "char" => g.char = true,
                "nbr" => g.nbr = true,
                other => {
                    return Err(Error::InvalidArgument(format!("unknown feature group {other:?}")))
                }
            }
        }
        if g.is_empty() {
            return Err(Error::InvalidArgument("feature group mask is empty".into()));
        }
        Ok(g)
    }
}

impl fmt::Display for FeatureGroups {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = [
            (self.raw, "raw"),
            (self.lap, "lap"),
            (self.char, "char"),
            (self.nbr, "nbr"),
        ]
        .into_iter()
        .filter_map(|(on, name)| on.then_some(name))
        .collect();
        f.write_str(&names.join(","))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedTable {
    values: Array2<f64>,
    groups: Vec<ColumnGroup>,
}

/// Feature blocks available for assembly; only masked-in blocks must be present.
#[derive(Debug, Clone, Copy, Default)]
pub struct TableInputs<'a> {
    pub raw: Option<&'a FeatureMatrix>,
    pub lap: Option<&'a SpectralEmbedding>,
    pub char: Option<&'a StructuralCharacteristics>,
    pub nbr: Option<&'a WaveletBankOutput>,
}

impl AugmentedTable {
    /// Validates that `groups` tile the columns contiguously in canonical order.
    pub fn new(values: Array2<f64>, groups: Vec<ColumnGroup>) -> Result<Self> {
        let mut next = 0;
        let mut prev_rank = None;
        for g in &groups {
            if g.span.start != next || g.span.end <= g.span.start {
                return Err(Error::Header(format!(
                    "group {} has span {:?}, expected to start at {next}",
                    g.tag, g.span
                )));
            }
            if matches!(g.tag, GroupTag::Deg | GroupTag::PageRank) && g.span.len() != 1 {
                return Err(Error::Header(format!("group {} must be one column", g.tag)));
            }
            let rank = g.tag.rank();
            if prev_rank.is_some_and(|r| r >= rank) {
                return Err(Error::Header(format!("group {} out of canonical order", g.tag)));
            }
            prev_rank = Some(rank);
            next = g.span.end;
        }
        check_len("table width", next, values.ncols())?;
        check_finite("table", values.view())?;
        Ok(AugmentedTable { values, groups })
    }

    pub fn assemble(inputs: &TableInputs<'_>, mask: FeatureGroups) -> Result<Self> {
        if mask.is_empty() {
            return Err(Error::InvalidArgument("feature group mask is empty".into()));
        }
        fn need<'a, T>(x: Option<&'a T>, what: &str) -> Result<&'a T> {
            x.ok_or_else(|| Error::InvalidArgument(format!("mask selects {what} but it was not provided")))
        }
        let mut blocks: Vec<(GroupTag, ArrayView2<'_, f64>)> = Vec::new();
        let char_cols;
        if mask.raw {
            blocks.push((GroupTag::Raw, need(inputs.raw, "raw")?.view()));
        }
        if mask.lap {
            blocks.push((GroupTag::Lap, need(inputs.lap, "lap")?.vectors.view()));
        }
        if mask.char {
            let c = need(inputs.char, "char")?;
            char_cols = Array2::from_shape_fn((c.len(), 2), |(v, j)| {
                if j == 0 {
                    c.degree[v]
                } else {
                    c.pagerank[v]
                }
            });
            blocks.push((GroupTag::Deg, char_cols.slice(s![.., 0..1])));
            blocks.push((GroupTag::PageRank, char_cols.slice(s![.., 1..2])));
        }
        if mask.nbr {
            let bank = need(inputs.nbr, "nbr")?;
            for ((p, q), b) in bank.filters().zip(&bank.blocks) {
                blocks.push((GroupTag::Nbr { p, q }, b.view()));
            }
        }

        let n = blocks[0].1.nrows();
        let mut groups = Vec::with_capacity(blocks.len());
        let mut start = 0;
        for (tag, b) in &blocks {
            check_len("table input rows", n, b.nrows())?;
            groups.push(ColumnGroup {
                tag: *tag,
                span: start..start + b.ncols(),
            });
            start += b.ncols();
        }
        let views: Vec<_> = blocks.iter().map(|(_, b)| b.view()).collect();
        let values = ndarray::concatenate(Axis(1), &views).expect("row counts checked");
        Self::new(values, groups)
    }

    pub fn nrows(&self) -> usize {
        self.values.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> ArrayView2<'_, f64> {
        self.values.view()
    }

    pub fn groups(&self) -> &[ColumnGroup] {
        &self.groups
    }

    pub fn column_names(&self) -> Vec<String> {
        self.groups
            .iter()
            .flat_map(|g| (0..g.span.len()).map(move |j| g.tag.column_name(j)))
            .collect()
    }

    /// Same groups, rows taken in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> AugmentedTable {
        AugmentedTable {
            values: self.values.select(Axis(0), rows),
            groups: self.groups.clone(),
        }
    }

    /// Z-scores every column with population statistics when `enabled`.
    /// Columns whose standard deviation is below 1e-12 are left untouched.
    pub fn standardize(&self, enabled: bool) -> AugmentedTable {
        let mut out = self.clone();
        if !enabled || self.nrows() == 0 {
            return out;
        }
        let n = self.nrows() as f64;
        for mut col in out.values.columns_mut() {
            let mean = col.sum() / n;
            let var = col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
            let sd = var.sqrt();
            if sd >= 1e-12 {
                col.mapv_inplace(|x| (x - mean) / sd);
            }
        }
        out
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{}", self.column_names().join(","))?;
        for row in self.values.rows() {
            let mut first = true;
            for x in row {
                if !first {
                    w.write_all(b",")?;
                }
                write!(w, "{x:?}")?;
                first = false;
            }
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn export(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let f = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(f);
        self.write_csv(&mut w)?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read_csv<R: BufRead>(reader: R) -> Result<Self> {
        let mut lines = reader.lines();
        let header = match lines.next() {
            Some(h) => h?,
            None => return Err(Error::Header("empty table file".into())),
        };
        let groups = parse_header(&header)?;
        let width = groups.last().map_or(0, |g| g.span.end);
        let mut data = Vec::new();
        let mut rows = 0;
        for (i, line) in lines.enumerate() {
            let line_no = i + 2;
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let before = data.len();
            for f in line.split(',') {
                let f = f.trim();
                let x: f64 = f
                    .parse()
                    .map_err(|_| Error::parse(line_no, format!("invalid number {f:?}")))?;
                data.push(x);
            }
            if data.len() - before != width {
                return Err(Error::Header(format!(
                    "line {line_no} has {} values, header declares {width}",
                    data.len() - before
                )));
            }
            rows += 1;
        }
        let values = Array2::from_shape_vec((rows, width), data).expect("row widths checked");
        Self::new(values, groups)
    }

    pub fn import(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let f = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(BufReader::new(f))
    }
}

fn parse_header(header: &str) -> Result<Vec<ColumnGroup>> {
    let mut groups: Vec<ColumnGroup> = Vec::new();
    for (col, name) in header.split(',').map(str::trim).enumerate() {
        let (tag, j) = GroupTag::parse_column(name)
            .ok_or_else(|| Error::Header(format!("column {col}: unrecognized name {name:?}")))?;
        match groups.last_mut() {
            Some(g) if g.tag == tag && !matches!(tag, GroupTag::Deg | GroupTag::PageRank) => {
                if j != g.span.len() {
                    return Err(Error::Header(format!(
                        "column {col}: expected {}, found {name:?}",
                        tag.column_name(g.span.len())
                    )));
                }
                g.span.end += 1;
            }
            _ => {
                if j != 0 {
                    return Err(Error::Header(format!(
                        "column {col}: group {tag} must start at index 0, found {name:?}"
                    )));
                }
                if groups.iter().any(|g| g.tag == tag) {
                    return Err(Error::Header(format!("column {col}: group {tag} repeated")));
                }
                groups.push(ColumnGroup {
                    tag,
                    span: col..col + 1,
                });
            }
        }
    }
    Ok(groups)
}
