//! Reading a structure estimate off a trained attention state. Each head
//! casts a per-node verdict: concentrated on position j when the attention
//! weight there clears the threshold, diffuse otherwise. The estimated
//! adjacency is the union of concentrated verdicts across heads, so heads
//! that collapse onto the same parent still contribute a single edge, and
//! the collapse itself is reported.
//!
//! One structural wrinkle: the second node in the ordering has exactly one
//! attendable position, so its attention is pinned at certainty whether or
//! not an edge exists. A verdict there is accepted only when the score
//! table's entry for that pair rises above a caller-supplied noise floor
//! (zero suffices for population tables, whose rootward columns vanish;
//! estimated tables pass the largest magnitude seen in a known-root column).

use crate::infometric::KgmiTable;
use crate::linalg::Matrix;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum DecodeError {
    #[error("threshold {0} must lie strictly between 1/2 and 1")]
    BadThreshold(f64),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Verdict {
    Concentrated(usize),
    Diffuse,
}

#[derive(Debug, Clone)]
pub struct DecodeOptions {
    pub theta_c: f64,
    /// Minimum table entry for a verdict on the single-attendable-position
    /// node to count as evidence.
    pub noise_floor: f64,
}

impl Default for DecodeOptions {
    fn default() -> Self {
        DecodeOptions { theta_c: 0.9, noise_floor: 0.0 }
    }
}

/// Two or more heads concentrated on the same parent of the same node.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Collapse {
    pub node: usize,
    pub parent: usize,
    pub heads: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct DecodedGraph {
    pub t: usize,
    /// 0/1 matrix, rows are sources, columns are targets.
    pub adjacency: Matrix,
    /// verdicts[head][node]; node 0 has no attendable positions and is
    /// always diffuse.
    pub verdicts: Vec<Vec<Verdict>>,
    /// Deduplicated, sorted union of concentrated verdicts per node.
    pub parents: Vec<Vec<usize>>,
    pub collapses: Vec<Collapse>,
}

pub fn decode(
    attn: &[Matrix],
    table: &KgmiTable,
    opts: &DecodeOptions,
) -> Result<DecodedGraph, DecodeError> {
    if !(opts.theta_c > 0.5 && opts.theta_c < 1.0) {
        return Err(DecodeError::BadThreshold(opts.theta_c));
    }
    if attn.is_empty() {
        return Err(DecodeError::DimensionMismatch("no attention heads".into()));
    }
    let t = attn[0].rows();
    if attn.iter().any(|a| a.rows() != t || a.cols() != t) {
        return Err(DecodeError::DimensionMismatch("ragged attention heads".into()));
    }
    if table.t() != t || table.k() != attn.len() {
        return Err(DecodeError::DimensionMismatch(format!(
            "table is {} nodes x {} heads, attention is {} x {}",
            table.t(),
            table.k(),
            t,
            attn.len()
        )));
    }
    let mut verdicts = vec![vec![Verdict::Diffuse; t]; attn.len()];
    for (l, a) in attn.iter().enumerate() {
        for i in 1..t {
            let mut best = f64::NEG_INFINITY;
            let mut best_j = 0;
            for j in 0..i {
                let v = a.get(j, i);
                if v > best {
                    best = v;
                    best_j = j;
                }
            }
            if best > opts.theta_c {
                // a lone attendable position carries no information by
                // itself; demand table evidence
                if i == 1 && !(table.heads[l].get(0, 1) > opts.noise_floor) {
                    continue;
                }
                verdicts[l][i] = Verdict::Concentrated(best_j);
            }
        }
    }
    let mut adjacency = Matrix::zeros(t, t);
    let mut parents = vec![Vec::new(); t];
    let mut collapses = Vec::new();
    for i in 1..t {
        let mut hit_heads: Vec<(usize, usize)> = Vec::new();
        for (l, row) in verdicts.iter().enumerate() {
            if let Verdict::Concentrated(j) = row[i] {
                hit_heads.push((j, l));
            }
        }
        hit_heads.sort();
        let mut idx = 0;
        while idx < hit_heads.len() {
            let j = hit_heads[idx].0;
            let heads: Vec<usize> = hit_heads[idx..]
                .iter()
                .take_while(|&&(jj, _)| jj == j)
                .map(|&(_, l)| l)
                .collect();
            adjacency.set(j, i, 1.0);
            parents[i].push(j);
            if heads.len() >= 2 {
                collapses.push(Collapse { node: i, parent: j, heads: heads.clone() });
            }
            idx += heads.len();
        }
    }
    Ok(DecodedGraph { t, adjacency, verdicts, parents, collapses })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreReport {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub shd: usize,
    pub runtime_seconds: f64,
}

/// Precision/recall/F1 over directed edge sets plus the Hamming distance of
/// the adjacency matrices. Entries above 1/2 count as edges.
pub fn score(estimated: &Matrix, truth: &Matrix) -> Result<ScoreReport, DecodeError> {
    if estimated.rows() != truth.rows()
        || estimated.cols() != truth.cols()
        || estimated.rows() != estimated.cols()
    {
        return Err(DecodeError::DimensionMismatch(format!(
            "estimated {}x{}, truth {}x{}",
            estimated.rows(),
            estimated.cols(),
            truth.rows(),
            truth.cols()
        )));
    }
    let t = truth.rows();
    let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
    for j in 0..t {
        for i in 0..t {
            let e = estimated.get(j, i) > 0.5;
            let a = truth.get(j, i) > 0.5;
            match (e, a) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, true) => fn_ += 1,
                (false, false) => {}
            }
        }
    }
    let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Ok(ScoreReport { precision, recall, f1, shd: fp + fn_, runtime_seconds: 0.0 })
}

/// 0/1 CSV, one row per source node.
pub fn adjacency_csv(m: &Matrix) -> String {
    let mut out = String::new();
    for j in 0..m.rows() {
        let row: Vec<&str> =
            (0..m.cols()).map(|i| if m.get(j, i) > 0.5 { "1" } else { "0" }).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Full-precision CSV of an arbitrary matrix.
pub fn matrix_csv(m: &Matrix) -> String {
    let mut out = String::new();
    for j in 0..m.rows() {
        let row: Vec<String> = (0..m.cols()).map(|i| format!("{}", m.get(j, i))).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Merge a two-head attention state into one signed matrix: head 1 weights
/// enter positively, head 2 weights negated, so one diverging colormap shows
/// both heads at once.
pub fn two_head_heatmap(attn: &[Matrix]) -> Result<Matrix, DecodeError> {
    if attn.len() != 2 {
        return Err(DecodeError::DimensionMismatch(format!(
            "combined heatmap wants exactly 2 heads, got {}",
            attn.len()
        )));
    }
    if attn[0].rows() != attn[1].rows() || attn[0].cols() != attn[1].cols() {
        return Err(DecodeError::DimensionMismatch("heads differ in shape".into()));
    }
    let mut out = Matrix::zeros(attn[0].rows(), attn[0].cols());
    for j in 0..out.rows() {
        for i in 0..out.cols() {
            out.set(j, i, attn[0].get(j, i) - attn[1].get(j, i));
        }
    }
    Ok(out)
}

/// Minimal standalone SVG rendering of a signed matrix as a colored grid:
/// red for positive, blue for negative, intensity scaled to the largest
/// magnitude.
pub fn heatmap_svg(m: &Matrix) -> String {
    let cell = 24usize;
    let margin = 28usize;
    let w = margin + m.cols() * cell + 4;
    let h = margin + m.rows() * cell + 4;
    let mut peak = m.max_abs();
    if peak == 0.0 {
        peak = 1.0;
    }
    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" \
         viewBox=\"0 0 {w} {h}\" font-family=\"monospace\" font-size=\"10\">\n"
    );
    for j in 0..m.rows() {
        for i in 0..m.cols() {
            let v = m.get(j, i) / peak;
            let (r, g, b) = if v >= 0.0 {
                let s = 1.0 - v;
                (255, (255.0 * s) as u8, (255.0 * s) as u8)
            } else {
                let s = 1.0 + v;
                ((255.0 * s) as u8, (255.0 * s) as u8, 255)
            };
            let x = margin + i * cell;
            let y = margin + j * cell;
            svg.push_str(&format!(
                "<rect x=\"{x}\" y=\"{y}\" width=\"{cell}\" height=\"{cell}\" \
                 fill=\"rgb({r},{g},{b})\" stroke=\"#ccc\"/>\n"
            ));
        }
    }
    for i in 0..m.cols() {
        let x = margin + i * cell + cell / 2;
        svg.push_str(&format!(
            "<text x=\"{x}\" y=\"{}\" text-anchor=\"middle\">{i}</text>\n",
            margin - 8
        ));
    }
    for j in 0..m.rows() {
        let y = margin + j * cell + cell / 2 + 4;
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{y}\" text-anchor=\"end\">{j}</text>\n",
            margin - 6
        ));
    }
    svg.push_str("</svg>\n");
    svg
}
