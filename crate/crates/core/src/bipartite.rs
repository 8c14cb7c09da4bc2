//! Chain-state structures for the bipartite view of a dataset.
//!
//! A transactional dataset is held as a sparse binary biadjacency matrix
//! (rows = transactions, columns = items); a sequence dataset as a bipartite
//! multigraph whose left vertices carry ordered ports holding itemset ids.
//! Both expose the joint degree matrix `J`, where `J[i,j]` counts edges
//! joining a degree-`i` left vertex to a degree-`j` right vertex, plus the
//! derived statistics used by the samplers and their invariant checks.
//!
//! All swap operations in this crate preserve every row and column sum, so
//! the degree classes (`A_m` = rows of sum `m`, `B_n` = columns of sum `n`)
//! are built once per chain and never rebuilt.

use crate::dataset::{ItemsetId, SequenceDataset, TransactionalDataset};
use crate::error::{Error, Result};

/// Groups vertex ids by degree. Index `d` holds the ids of degree `d`.
#[derive(Debug, Clone)]
pub struct DegreeClasses {
    by_degree: Vec<Vec<u32>>,
}

impl DegreeClasses {
    fn from_degrees(degrees: impl Iterator<Item = usize>) -> Self {
        let mut by_degree: Vec<Vec<u32>> = Vec::new();
        for (id, d) in degrees.enumerate() {
            if by_degree.len() <= d {
                by_degree.resize(d + 1, Vec::new());
            }
            by_degree[d].push(id as u32);
        }
        Self { by_degree }
    }

    pub fn members(&self, degree: usize) -> &[u32] {
        self.by_degree.get(degree).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn max_degree(&self) -> usize {
        self.by_degree.len().saturating_sub(1)
    }

    /// (degree, class size) for every non-empty class.
    pub fn sizes(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.by_degree
            .iter()
            .enumerate()
            .filter(|(_, v)| !v.is_empty())
            .map(|(d, v)| (d, v.len()))
    }
}

/// Joint degree matrix of a bipartite (multi-)graph. Degrees are 1-indexed;
/// entry `(i, j)` is stored at `entries[(i-1) * k_right + (j-1)]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bjdm {
    entries: Vec<u64>,
    k_left: usize,
    k_right: usize,
}

impl Bjdm {
    fn new(k_left: usize, k_right: usize) -> Self {
        Self { entries: vec![0; k_left * k_right], k_left, k_right }
    }

    pub fn from_entries(entries: Vec<u64>, k_left: usize, k_right: usize) -> Self {
        assert_eq!(entries.len(), k_left * k_right);
        Self { entries, k_left, k_right }
    }

    pub fn k_left(&self) -> usize {
        self.k_left
    }

    pub fn k_right(&self) -> usize {
        self.k_right
    }

    /// Entry for left degree `i` and right degree `j` (both 1-indexed).
    pub fn get(&self, i: usize, j: usize) -> u64 {
        assert!((1..=self.k_left).contains(&i) && (1..=self.k_right).contains(&j));
        self.entries[(i - 1) * self.k_right + (j - 1)]
    }

    fn add(&mut self, i: usize, j: usize, n: u64) {
        self.entries[(i - 1) * self.k_right + (j - 1)] += n;
    }

    /// Total number of edges: the entries sum to `|E|`.
    pub fn total_edges(&self) -> u64 {
        self.entries.iter().sum()
    }

    /// Number of caterpillars (simple paths of length three) determined by
    /// the matrix: `sum over i,j >= 2 of J[i,j] * (i-1) * (j-1)`.
    pub fn caterpillars(&self) -> u64 {
        let mut total = 0u64;
        for i in 2..=self.k_left {
            for j in 2..=self.k_right {
                total += self.get(i, j) * (i as u64 - 1) * (j as u64 - 1);
            }
        }
        total
    }

    /// Recovers the degree histograms: `left[i]` = number of left vertices
    /// of degree `i`, and symmetrically for `right`. Index 0 is unused.
    /// A non-zero remainder in either division signals an invalid matrix.
    pub fn degree_histograms(&self) -> Result<(Vec<u64>, Vec<u64>)> {
        let mut left = vec![0u64; self.k_left + 1];
        for (i, slot) in left.iter_mut().enumerate().skip(1) {
            let row_sum: u64 = (1..=self.k_right).map(|j| self.get(i, j)).sum();
            if !row_sum.is_multiple_of(i as u64) {
                return Err(Error::InvalidBjdm(format!(
                    "edge count {row_sum} for left degree {i} is not divisible by {i}"
                )));
            }
            *slot = row_sum / i as u64;
        }
        let mut right = vec![0u64; self.k_right + 1];
        for (j, slot) in right.iter_mut().enumerate().skip(1) {
            let col_sum: u64 = (1..=self.k_left).map(|i| self.get(i, j)).sum();
            if !col_sum.is_multiple_of(j as u64) {
                return Err(Error::InvalidBjdm(format!(
                    "edge count {col_sum} for right degree {j} is not divisible by {j}"
                )));
            }
            *slot = col_sum / j as u64;
        }
        Ok((left, right))
    }

    pub fn entries(&self) -> &[u64] {
        &self.entries
    }

    /// One CSV row per left degree, ascending; columns are right degrees.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for i in 1..=self.k_left {
            let row: Vec<String> =
                (1..=self.k_right).map(|j| self.get(i, j).to_string()).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    /// FNV-1a over the dimensions and entries; used in sample manifests.
    pub fn checksum(&self) -> u64 {
        let mut h = 0xcbf29ce484222325u64;
        let mut eat = |x: u64| {
            for b in x.to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x100000001b3);
            }
        };
        eat(self.k_left as u64);
        eat(self.k_right as u64);
        for &e in &self.entries {
            eat(e);
        }
        h
    }
}

fn replace_sorted(v: &mut Vec<u32>, old: u32, new: u32) {
    let pos = v.binary_search(&old).expect("value to replace not present");
    v.remove(pos);
    let ins = v.binary_search(&new).expect_err("replacement already present");
    v.insert(ins, new);
}

/// Sparse binary biadjacency matrix with mutually consistent row and column
/// index sets. Rows and columns stay sorted; every mutation preserves all
/// row and column sums.
#[derive(Debug, Clone)]
pub struct BiadjacencyState {
    rows: Vec<Vec<u32>>,
    cols: Vec<Vec<u32>>,
    row_classes: DegreeClasses,
    col_classes: DegreeClasses,
}

impl BiadjacencyState {
    pub fn from_dataset(dataset: &TransactionalDataset) -> Self {
        Self::from_rows(dataset.transactions().to_vec(), dataset.num_items())
    }

    pub fn from_rows(rows: Vec<Vec<u32>>, num_cols: usize) -> Self {
        let mut cols: Vec<Vec<u32>> = vec![Vec::new(); num_cols];
        for (r, row) in rows.iter().enumerate() {
            debug_assert!(row.windows(2).all(|w| w[0] < w[1]), "row not sorted/deduped");
            for &c in row {
                cols[c as usize].push(r as u32);
            }
        }
        let row_classes = DegreeClasses::from_degrees(rows.iter().map(Vec::len));
        let col_classes = DegreeClasses::from_degrees(cols.iter().map(Vec::len));
        Self { rows, cols, row_classes, col_classes }
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn num_cols(&self) -> usize {
        self.cols.len()
    }

    pub fn row(&self, r: u32) -> &[u32] {
        &self.rows[r as usize]
    }

    pub fn col(&self, c: u32) -> &[u32] {
        &self.cols[c as usize]
    }

    pub fn row_sum(&self, r: u32) -> usize {
        self.rows[r as usize].len()
    }

    pub fn col_sum(&self, c: u32) -> usize {
        self.cols[c as usize].len()
    }

    pub fn row_classes(&self) -> &DegreeClasses {
        &self.row_classes
    }

    pub fn col_classes(&self) -> &DegreeClasses {
        &self.col_classes
    }

    pub fn contains(&self, r: u32, c: u32) -> bool {
        self.rows[r as usize].binary_search(&c).is_ok()
    }

    pub fn total_edges(&self) -> u64 {
        self.rows.iter().map(|r| r.len() as u64).sum()
    }

    /// Applies the checkerboard swap `(a,c),(b,d) -> (a,d),(b,c)`. Requires
    /// `M[a,c] = M[b,d] = 1` and `M[a,d] = M[b,c] = 0`.
    pub fn apply_swap(&mut self, a: u32, b: u32, c: u32, d: u32) {
        replace_sorted(&mut self.rows[a as usize], c, d);
        replace_sorted(&mut self.rows[b as usize], d, c);
        replace_sorted(&mut self.cols[c as usize], a, b);
        replace_sorted(&mut self.cols[d as usize], b, a);
    }

    /// Moves columns between two equal-sum rows: each column of `to_b`
    /// leaves row `a` for row `b`, and vice versa. The two lists must be
    /// disjoint from each other and equally long.
    pub fn apply_row_trade(&mut self, a: u32, b: u32, to_b: &[u32], to_a: &[u32]) {
        debug_assert_eq!(to_b.len(), to_a.len());
        for &c in to_b {
            let pos = self.rows[a as usize].binary_search(&c).expect("column not in row a");
            self.rows[a as usize].remove(pos);
            replace_sorted(&mut self.cols[c as usize], a, b);
        }
        for &c in to_a {
            let pos = self.rows[b as usize].binary_search(&c).expect("column not in row b");
            self.rows[b as usize].remove(pos);
            replace_sorted(&mut self.cols[c as usize], b, a);
        }
        for &c in to_a {
            let ins = self.rows[a as usize].binary_search(&c).expect_err("duplicate column");
            self.rows[a as usize].insert(ins, c);
        }
        for &c in to_b {
            let ins = self.rows[b as usize].binary_search(&c).expect_err("duplicate column");
            self.rows[b as usize].insert(ins, c);
        }
    }

    /// Column counterpart of [`apply_row_trade`]: rows in `to_d` exchange
    /// item `c` for item `d`, rows in `to_c` the opposite.
    ///
    /// [`apply_row_trade`]: BiadjacencyState::apply_row_trade
    pub fn apply_col_trade(&mut self, c: u32, d: u32, to_d: &[u32], to_c: &[u32]) {
        debug_assert_eq!(to_d.len(), to_c.len());
        for &r in to_d {
            let pos = self.cols[c as usize].binary_search(&r).expect("row not in column c");
            self.cols[c as usize].remove(pos);
            replace_sorted(&mut self.rows[r as usize], c, d);
        }
        for &r in to_c {
            let pos = self.cols[d as usize].binary_search(&r).expect("row not in column d");
            self.cols[d as usize].remove(pos);
            replace_sorted(&mut self.rows[r as usize], d, c);
        }
        for &r in to_c {
            let ins = self.cols[c as usize].binary_search(&r).expect_err("duplicate row");
            self.cols[c as usize].insert(ins, r);
        }
        for &r in to_d {
            let ins = self.cols[d as usize].binary_search(&r).expect_err("duplicate row");
            self.cols[d as usize].insert(ins, r);
        }
    }

    pub fn bjdm(&self) -> Bjdm {
        let k_left = self.rows.iter().map(Vec::len).max().unwrap_or(0);
        let k_right = self.cols.iter().map(Vec::len).max().unwrap_or(0);
        let mut j = Bjdm::new(k_left, k_right);
        for row in &self.rows {
            let i = row.len();
            if i == 0 {
                continue;
            }
            for &c in row {
                j.add(i, self.cols[c as usize].len(), 1);
            }
        }
        j
    }

    /// Recomputes the joint degree matrix into `scratch` and compares it to
    /// `reference` entrywise. Allocation-free so the per-step checking mode
    /// stays affordable.
    pub fn bjdm_equals(&self, reference: &Bjdm, scratch: &mut Vec<u64>) -> bool {
        let (k_left, k_right) = (reference.k_left(), reference.k_right());
        scratch.clear();
        scratch.resize(k_left * k_right, 0);
        for row in &self.rows {
            let i = row.len();
            if i == 0 {
                continue;
            }
            if i > k_left {
                return false;
            }
            for &c in row {
                let j = self.cols[c as usize].len();
                if j == 0 || j > k_right {
                    return false;
                }
                scratch[(i - 1) * k_right + (j - 1)] += 1;
            }
        }
        scratch.as_slice() == reference.entries()
    }

    /// Caterpillar count by the edge sum `sum over edges (u,v) of
    /// (deg(u)-1)(deg(v)-1)`; agrees with [`Bjdm::caterpillars`] of this
    /// state's matrix.
    pub fn caterpillars_direct(&self) -> u64 {
        let mut total = 0u64;
        for row in &self.rows {
            if row.len() < 2 {
                continue;
            }
            let du = row.len() as u64 - 1;
            for &c in row {
                total += du * (self.cols[c as usize].len() as u64 - 1);
            }
        }
        total
    }

    /// Rebuilds the row contents as a dataset, preserving row order and the
    /// observed dataset's item labels.
    pub fn to_dataset(&self, labels: &[String]) -> TransactionalDataset {
        TransactionalDataset::with_labels(self.rows.clone(), labels.to_vec())
    }

    /// Full consistency audit (transpose agreement, sortedness, immutable
    /// degree classes). Used by the slow invariant-checking path.
    pub fn audit(&self) -> Result<()> {
        let mut edge_count = 0usize;
        for (r, row) in self.rows.iter().enumerate() {
            if !row.windows(2).all(|w| w[0] < w[1]) {
                return Err(Error::InvariantViolation {
                    step: 0,
                    msg: format!("row {r} not sorted"),
                });
            }
            for &c in row {
                if self.cols[c as usize].binary_search(&(r as u32)).is_err() {
                    return Err(Error::InvariantViolation {
                        step: 0,
                        msg: format!("edge ({r},{c}) missing from column set"),
                    });
                }
                edge_count += 1;
            }
        }
        let col_total: usize = self.cols.iter().map(Vec::len).sum();
        if col_total != edge_count {
            return Err(Error::InvariantViolation {
                step: 0,
                msg: "row/column edge totals disagree".to_string(),
            });
        }
        for (d, _) in self.row_classes.sizes() {
            for &r in self.row_classes.members(d) {
                if self.rows[r as usize].len() != d {
                    return Err(Error::InvariantViolation {
                        step: 0,
                        msg: format!("row {r} left its degree class {d}"),
                    });
                }
            }
        }
        for (d, _) in self.col_classes.sizes() {
            for &c in self.col_classes.members(d) {
                if self.cols[c as usize].len() != d {
                    return Err(Error::InvariantViolation {
                        step: 0,
                        msg: format!("column {c} left its degree class {d}"),
                    });
                }
            }
        }
        Ok(())
    }
}

/// Bipartite multigraph of a sequence dataset. Left vertex `v` has one port
/// per position of its sequence; `ports[v][k]` holds the itemset id wired to
/// port `k`. The right incidence lists store `(left vertex, port)` pairs,
/// one entry per parallel edge.
#[derive(Debug, Clone)]
pub struct BipartiteMultigraph {
    ports: Vec<Vec<ItemsetId>>,
    incidence: Vec<Vec<(u32, u32)>>,
    left_classes: DegreeClasses,
    right_classes: DegreeClasses,
}

impl BipartiteMultigraph {
    pub fn from_dataset(dataset: &SequenceDataset) -> Self {
        Self::from_ports(dataset.sequences().to_vec(), dataset.dictionary().len())
    }

    pub fn from_ports(ports: Vec<Vec<ItemsetId>>, num_right: usize) -> Self {
        let mut incidence: Vec<Vec<(u32, u32)>> = vec![Vec::new(); num_right];
        for (v, seq) in ports.iter().enumerate() {
            for (k, &w) in seq.iter().enumerate() {
                incidence[w as usize].push((v as u32, k as u32));
            }
        }
        let left_classes = DegreeClasses::from_degrees(ports.iter().map(Vec::len));
        let right_classes = DegreeClasses::from_degrees(incidence.iter().map(Vec::len));
        Self { ports, incidence, left_classes, right_classes }
    }

    pub fn num_left(&self) -> usize {
        self.ports.len()
    }

    pub fn num_right(&self) -> usize {
        self.incidence.len()
    }

    pub fn ports(&self, v: u32) -> &[ItemsetId] {
        &self.ports[v as usize]
    }

    pub fn incidence(&self, w: u32) -> &[(u32, u32)] {
        &self.incidence[w as usize]
    }

    pub fn left_degree(&self, v: u32) -> usize {
        self.ports[v as usize].len()
    }

    pub fn right_degree(&self, w: u32) -> usize {
        self.incidence[w as usize].len()
    }

    pub fn left_classes(&self) -> &DegreeClasses {
        &self.left_classes
    }

    pub fn right_classes(&self) -> &DegreeClasses {
        &self.right_classes
    }

    pub fn total_edges(&self) -> u64 {
        self.ports.iter().map(|p| p.len() as u64).sum()
    }

    /// Applies the edge swap `(a,x,c),(b,y,d) -> (a,x,d),(b,y,c)`. The two
    /// edges must exist and `c != d`; all degrees are preserved.
    pub fn apply_swap(&mut self, a: u32, x: u32, c: u32, b: u32, y: u32, d: u32) {
        debug_assert_ne!(c, d);
        debug_assert_eq!(self.ports[a as usize][x as usize], c);
        debug_assert_eq!(self.ports[b as usize][y as usize], d);
        self.ports[a as usize][x as usize] = d;
        self.ports[b as usize][y as usize] = c;
        let ci = self.incidence[c as usize]
            .iter()
            .position(|&e| e == (a, x))
            .expect("edge missing from incidence of c");
        self.incidence[c as usize].swap_remove(ci);
        self.incidence[c as usize].push((b, y));
        let di = self.incidence[d as usize]
            .iter()
            .position(|&e| e == (b, y))
            .expect("edge missing from incidence of d");
        self.incidence[d as usize].swap_remove(di);
        self.incidence[d as usize].push((a, x));
    }

    pub fn bjdm(&self) -> Bjdm {
        let k_left = self.ports.iter().map(Vec::len).max().unwrap_or(0);
        let k_right = self.incidence.iter().map(Vec::len).max().unwrap_or(0);
        let mut j = Bjdm::new(k_left, k_right);
        for seq in &self.ports {
            let i = seq.len();
            if i == 0 {
                continue;
            }
            for &w in seq {
                j.add(i, self.incidence[w as usize].len(), 1);
            }
        }
        j
    }

    /// Allocation-free recompute-and-compare of the joint degree matrix.
    pub fn bjdm_equals(&self, reference: &Bjdm, scratch: &mut Vec<u64>) -> bool {
        let (k_left, k_right) = (reference.k_left(), reference.k_right());
        scratch.clear();
        scratch.resize(k_left * k_right, 0);
        for seq in &self.ports {
            let i = seq.len();
            if i == 0 {
                continue;
            }
            if i > k_left {
                return false;
            }
            for &w in seq {
                let j = self.incidence[w as usize].len();
                if j == 0 || j > k_right {
                    return false;
                }
                scratch[(i - 1) * k_right + (j - 1)] += 1;
            }
        }
        scratch.as_slice() == reference.entries()
    }

    /// Number of paths of three distinct edges, not necessarily simple.
    /// For each middle edge `(u,v)` there are `(deg(u)-1)(deg(v)-1)` choices
    /// of flanking edges, minus the parallel copies of the middle edge,
    /// which would reuse a single edge on both sides.
    pub fn count_l3_paths(&self) -> u64 {
        let mut total = 0u64;
        let mut mult: Vec<(ItemsetId, u64)> = Vec::new();
        for (v, seq) in self.ports.iter().enumerate() {
            let dv = seq.len() as u64;
            // Multiplicity of each right endpoint among v's ports.
            mult.clear();
            let mut sorted: Vec<ItemsetId> = seq.clone();
            sorted.sort_unstable();
            let mut i = 0;
            while i < sorted.len() {
                let mut j = i + 1;
                while j < sorted.len() && sorted[j] == sorted[i] {
                    j += 1;
                }
                mult.push((sorted[i], (j - i) as u64));
                i = j;
            }
            let _ = v;
            for &(w, m) in &mult {
                let dw = self.incidence[w as usize].len() as u64;
                let per_edge = (dv - 1) * (dw - 1) - (m - 1);
                total += m * per_edge;
            }
        }
        total
    }

    /// Rebuilds the sequences, preserving left-vertex order.
    pub fn to_dataset(&self, reference: &SequenceDataset) -> SequenceDataset {
        SequenceDataset::new(
            self.ports.clone(),
            reference.dictionary().clone(),
            reference.item_labels().to_vec(),
        )
    }

    pub fn audit(&self) -> Result<()> {
        let mut edge_count = 0usize;
        for (v, seq) in self.ports.iter().enumerate() {
            for (k, &w) in seq.iter().enumerate() {
                if !self.incidence[w as usize].contains(&(v as u32, k as u32)) {
                    return Err(Error::InvariantViolation {
                        step: 0,
                        msg: format!("edge ({v},{k},{w}) missing from incidence"),
                    });
                }
                edge_count += 1;
            }
        }
        let incidence_total: usize = self.incidence.iter().map(Vec::len).sum();
        if incidence_total != edge_count {
            return Err(Error::InvariantViolation {
                step: 0,
                msg: "port/incidence edge totals disagree".to_string(),
            });
        }
        Ok(())
    }
}
