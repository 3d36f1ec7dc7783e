//! Words in `x_1, x_1^*, ..., x_n, x_n^*` and the moments `tr(w(x))/N`.
//!
//! Tables are keyed by freely reduced words only: for unitary tuples the
//! moments factor through the free group, so an unreduced word carries no
//! information its reduction does not.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{trace_of_product, ComplexMatrix, UnitaryTuple, C64, ONE, ZERO};
use crate::rng::{self, domain};

/// Largest `(2n)^k` enumerated exhaustively.
pub const ENUMERATION_GUARD: f64 = 1e6;

/// One generator or its adjoint. Indices are 1-based; ordering is
/// `x_1 < x_1^* < x_2 < ...`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Letter {
    pub index: usize,
    pub star: bool,
}

impl Letter {
    pub fn new(index: usize, star: bool) -> Self {
        Letter { index, star }
    }

    pub fn inverse(self) -> Self {
        Letter { index: self.index, star: !self.star }
    }

    /// The `2n` letters of an `n`-tuple in ascending order.
    pub fn alphabet(n: usize) -> impl Iterator<Item = Letter> {
        (1..=n).flat_map(|i| [Letter::new(i, false), Letter::new(i, true)])
    }
}

impl fmt::Display for Letter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.index, if self.star { "*" } else { "" })
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct Word(Vec<Letter>);

impl Word {
    pub fn empty() -> Self {
        Word(Vec::new())
    }

    pub fn new(letters: Vec<Letter>) -> Self {
        Word(letters)
    }

    /// Builds a word from `(index, star)` pairs.
    pub fn from_pairs(pairs: &[(usize, bool)]) -> Self {
        Word(pairs.iter().map(|&(i, s)| Letter::new(i, s)).collect())
    }

    pub fn letters(&self) -> &[Letter] {
        &self.0
    }

    pub fn degree(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_reduced(&self) -> bool {
        self.0.windows(2).all(|p| p[1] != p[0].inverse())
    }

    /// `w^*`: letters reversed and starred.
    pub fn adjoint(&self) -> Self {
        Word(self.0.iter().rev().map(|l| l.inverse()).collect())
    }
}

/// Length first, then lexicographic in letter order.
impl Ord for Word {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.len().cmp(&other.0.len()).then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for Word {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, l) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{l}")?;
        }
        Ok(())
    }
}

impl FromStr for Word {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.split_whitespace()
            .map(|tok| {
                let (digits, star) = match tok.strip_suffix('*') {
                    Some(d) => (d, true),
                    None => (tok, false),
                };
                match digits.parse::<usize>() {
                    Ok(i) if i >= 1 => Ok(Letter::new(i, star)),
                    _ => Err(Error::Parse(format!("bad letter {tok:?}"))),
                }
            })
            .collect::<Result<Vec<_>>>()
            .map(Word)
    }
}

impl From<Word> for String {
    fn from(w: Word) -> String {
        w.to_string()
    }
}

impl TryFrom<String> for Word {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

/// Free reduction: cancels adjacent `x x^*` and `x^* x` until none remain.
/// A single left-to-right stack pass reaches the normal form.
pub fn reduce(w: &Word) -> Word {
    let mut stack: Vec<Letter> = Vec::with_capacity(w.0.len());
    for &l in &w.0 {
        if stack.last() == Some(&l.inverse()) {
            stack.pop();
        } else {
            stack.push(l);
        }
    }
    Word(stack)
}

/// Letter matrices of a tuple with their adjoints precomputed.
struct Alphabet<'a> {
    tuple: &'a UnitaryTuple,
    adjoints: Vec<ComplexMatrix>,
}

impl<'a> Alphabet<'a> {
    fn new(tuple: &'a UnitaryTuple) -> Self {
        Alphabet { tuple, adjoints: tuple.matrices().iter().map(ComplexMatrix::adjoint).collect() }
    }

    fn matrix(&self, l: Letter) -> &ComplexMatrix {
        if l.star {
            &self.adjoints[l.index - 1]
        } else {
            self.tuple.matrix(l.index - 1)
        }
    }
}

fn check_indices(x: &UnitaryTuple, w: &Word) -> Result<()> {
    if let Some(bad) = w.0.iter().find(|l| l.index == 0 || l.index > x.n()) {
        return Err(Error::IndexOutOfRange { index: bad.index, n: x.n() });
    }
    Ok(())
}

/// `x_{i_1}^{e_1} ... x_{i_k}^{e_k}`; the empty word gives the identity.
pub fn evaluate_word(x: &UnitaryTuple, w: &Word) -> Result<ComplexMatrix> {
    check_indices(x, w)?;
    let alphabet = Alphabet::new(x);
    let mut acc = ComplexMatrix::identity(x.dim());
    for &l in &w.0 {
        acc = acc.multiply(alphabet.matrix(l))?;
    }
    Ok(acc)
}

/// `tr(w(x)) / N`.
pub fn moment(x: &UnitaryTuple, w: &Word) -> Result<C64> {
    check_indices(x, w)?;
    let Some((&last, prefix)) = w.0.split_last() else {
        return Ok(ONE);
    };
    let alphabet = Alphabet::new(x);
    let mut acc = ComplexMatrix::identity(x.dim());
    for &l in prefix {
        acc = acc.multiply(alphabet.matrix(l))?;
    }
    Ok(trace_of_product(&acc, alphabet.matrix(last)) / x.dim() as f64)
}

/// Number of reduced words of length exactly `k` over `n` generators.
pub fn reduced_word_count(n: usize, k: usize) -> u128 {
    if k == 0 {
        1
    } else {
        2 * n as u128 * (2 * n as u128 - 1).pow(k as u32 - 1)
    }
}

/// All reduced words of length `<= max_degree`, length-lexicographic.
pub fn reduced_words(n: usize, max_degree: usize) -> Vec<Word> {
    let mut out = vec![Word::empty()];
    let mut frontier = vec![Word::empty()];
    for _ in 0..max_degree {
        let mut next = Vec::new();
        for w in &frontier {
            for l in Letter::alphabet(n) {
                if w.0.last() != Some(&l.inverse()) {
                    let mut letters = w.0.clone();
                    letters.push(l);
                    next.push(Word(letters));
                }
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}

/// Uniform sample among reduced words of length `<= max_degree`: the
/// length is drawn proportionally to the word counts, then letters are
/// drawn uniformly among those that do not cancel.
fn random_reduced_word(n: usize, max_degree: usize, rng: &mut impl Rng) -> Word {
    let counts: Vec<f64> = (0..=max_degree).map(|k| reduced_word_count(n, k) as f64).collect();
    let total: f64 = counts.iter().sum();
    let mut pick = rng.random::<f64>() * total;
    let mut len = max_degree;
    for (k, c) in counts.iter().enumerate() {
        if pick < *c {
            len = k;
            break;
        }
        pick -= c;
    }
    let alphabet: Vec<Letter> = Letter::alphabet(n).collect();
    let mut letters: Vec<Letter> = Vec::with_capacity(len);
    while letters.len() < len {
        let l = alphabet[rng.random_range(0..alphabet.len())];
        if letters.last() != Some(&l.inverse()) {
            letters.push(l);
        }
    }
    Word(letters)
}

/// The word set of a sampled table: the empty word plus up to `count`
/// distinct uniform draws. Depends only on `(n, max_degree, count, seed)`.
pub fn sampled_words(n: usize, max_degree: usize, count: usize, seed: u64) -> Vec<Word> {
    let mut rng = rng::stream(seed, domain::WORD_SAMPLE, 0);
    let mut set = std::collections::BTreeSet::new();
    set.insert(Word::empty());
    for _ in 0..count {
        set.insert(random_reduced_word(n, max_degree, &mut rng));
    }
    set.into_iter().collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct MomentTable {
    n: usize,
    max_degree: usize,
    dim: usize,
    sampled: bool,
    entries: BTreeMap<Word, C64>,
}

#[derive(Serialize, Deserialize)]
struct TableEntry {
    word: Word,
    re: f64,
    im: f64,
}

#[derive(Serialize, Deserialize)]
struct TableDoc {
    n: usize,
    max_degree: usize,
    dim: usize,
    sampled: bool,
    entries: Vec<TableEntry>,
}

impl Serialize for MomentTable {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        TableDoc {
            n: self.n,
            max_degree: self.max_degree,
            dim: self.dim,
            sampled: self.sampled,
            entries: self
                .entries
                .iter()
                .map(|(w, z)| TableEntry { word: w.clone(), re: z.re, im: z.im })
                .collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for MomentTable {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let doc = TableDoc::deserialize(d)?;
        Ok(MomentTable {
            n: doc.n,
            max_degree: doc.max_degree,
            dim: doc.dim,
            sampled: doc.sampled,
            entries: doc.entries.into_iter().map(|e| (e.word, C64::new(e.re, e.im))).collect(),
        })
    }
}

impl MomentTable {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_sampled(&self) -> bool {
        self.sampled
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, w: &Word) -> Option<C64> {
        self.entries.get(&reduce(w)).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Word, &C64)> {
        self.entries.iter()
    }

    /// Same word set with `1` on the empty word and `0` elsewhere: the
    /// limit distribution of independent Haar unitaries.
    pub fn free_haar_reference(&self) -> MomentTable {
        MomentTable {
            entries: self
                .entries
                .keys()
                .map(|w| (w.clone(), if w.is_empty() { ONE } else { ZERO }))
                .collect(),
            dim: 0,
            ..self.clone()
        }
    }

    /// Moments of a block-diagonal tuple from the tables of its blocks:
    /// the normalized trace of a direct sum is the dimension-weighted mean
    /// of the block traces.
    pub fn direct_sum(tables: &[MomentTable]) -> Result<MomentTable> {
        let first = tables.first().ok_or_else(|| Error::Invalid("no blocks".into()))?;
        for t in tables {
            if t.n != first.n || t.max_degree != first.max_degree {
                return Err(Error::Shape("block tables differ in n or degree".into()));
            }
            if t.entries.len() != first.entries.len() || !t.entries.keys().eq(first.entries.keys()) {
                return Err(Error::Shape("block tables cover different words".into()));
            }
        }
        let total: usize = tables.iter().map(|t| t.dim).sum();
        let entries = first
            .entries
            .keys()
            .map(|w| {
                if w.is_empty() {
                    return (w.clone(), ONE);
                }
                let sum: C64 = tables.iter().map(|t| t.entries[w] * t.dim as f64).sum();
                (w.clone(), sum / total as f64)
            })
            .collect();
        Ok(MomentTable { dim: total, entries, ..first.clone() })
    }
}

fn guard(n: usize, max_degree: usize) -> Result<()> {
    let size = (2.0 * n as f64).powi(max_degree as i32);
    if size > ENUMERATION_GUARD {
        return Err(Error::Guard(format!(
            "(2n)^k = {size:e} exceeds {ENUMERATION_GUARD:e}; enable word sampling"
        )));
    }
    Ok(())
}

/// Every reduced word of degree `<= max_degree` with its moment.
///
/// Words are walked as a prefix tree so each interior node costs one
/// matrix product and each leaf only an O(N^2) trace.
pub fn moment_table(x: &UnitaryTuple, max_degree: usize) -> Result<MomentTable> {
    guard(x.n(), max_degree)?;
    let alphabet = Alphabet::new(x);
    let dim = x.dim() as f64;
    let mut entries = BTreeMap::new();
    entries.insert(Word::empty(), ONE);

    fn walk(
        alphabet: &Alphabet<'_>,
        prefix: &mut Vec<Letter>,
        product: &ComplexMatrix,
        remaining: usize,
        dim: f64,
        out: &mut BTreeMap<Word, C64>,
    ) -> Result<()> {
        for l in Letter::alphabet(alphabet.tuple.n()) {
            if prefix.last() == Some(&l.inverse()) {
                continue;
            }
            let m = alphabet.matrix(l);
            prefix.push(l);
            if remaining == 1 {
                out.insert(Word(prefix.clone()), trace_of_product(product, m) / dim);
            } else {
                let next = product.multiply(m)?;
                out.insert(Word(prefix.clone()), next.trace()? / dim);
                walk(alphabet, prefix, &next, remaining - 1, dim, out)?;
            }
            prefix.pop();
        }
        Ok(())
    }

    if max_degree > 0 {
        let id = ComplexMatrix::identity(x.dim());
        walk(&alphabet, &mut Vec::new(), &id, max_degree, dim, &mut entries)?;
    }
    Ok(MomentTable { n: x.n(), max_degree, dim: x.dim(), sampled: false, entries })
}

/// Moments on the word set of [`sampled_words`]; no size guard.
pub fn sampled_moment_table(
    x: &UnitaryTuple,
    max_degree: usize,
    count: usize,
    seed: u64,
) -> Result<MomentTable> {
    let words = sampled_words(x.n(), max_degree, count, seed);
    let entries = words
        .into_iter()
        .map(|w| moment(x, &w).map(|m| (w, m)))
        .collect::<Result<BTreeMap<_, _>>>()?;
    Ok(MomentTable { n: x.n(), max_degree, dim: x.dim(), sampled: true, entries })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistributionDistance {
    pub degree: usize,
    pub value: f64,
    pub argmax_word: Word,
}

/// Sup over shared words of `|mu_a(w) - mu_b(w)|`. Ties resolve to the
/// first word in table order.
pub fn distance(a: &MomentTable, b: &MomentTable) -> Result<DistributionDistance> {
    if a.n != b.n || a.max_degree != b.max_degree {
        return Err(Error::Shape(format!(
            "tables differ: n {} vs {}, degree {} vs {}",
            a.n, b.n, a.max_degree, b.max_degree
        )));
    }
    let mut best = DistributionDistance { degree: a.max_degree, value: 0.0, argmax_word: Word::empty() };
    let mut first = true;
    for (w, za) in &a.entries {
        if let Some(zb) = b.entries.get(w) {
            let d = (za - zb).norm();
            if first || d > best.value {
                best.value = d;
                best.argmax_word = w.clone();
                first = false;
            }
        }
    }
    Ok(best)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    /// `d(m, m+1)` for consecutive entries.
    pub consecutive: Vec<DistributionDistance>,
    /// Distance of each entry to the free-Haar reference.
    pub to_reference: Vec<DistributionDistance>,
    pub threshold: f64,
    /// Greedily selected indices with pairwise distance `<= threshold`.
    pub subsequence: Vec<usize>,
}

/// Diagnostics for a sequence of already computed tables.
pub fn convergence_report_from_tables(tables: &[MomentTable], threshold: f64) -> Result<ConvergenceReport> {
    if tables.len() < 2 {
        return Err(Error::Invalid(format!("need at least 2 tuples, got {}", tables.len())));
    }
    let consecutive = tables
        .windows(2)
        .map(|p| distance(&p[0], &p[1]))
        .collect::<Result<Vec<_>>>()?;
    let to_reference = tables
        .iter()
        .map(|t| distance(t, &t.free_haar_reference()))
        .collect::<Result<Vec<_>>>()?;
    let mut subsequence = vec![0];
    for j in 1..tables.len() {
        let mut close = true;
        for &i in &subsequence {
            if distance(&tables[i], &tables[j])?.value > threshold {
                close = false;
                break;
            }
        }
        if close {
            subsequence.push(j);
        }
    }
    Ok(ConvergenceReport { consecutive, to_reference, threshold, subsequence })
}

pub fn convergence_report(
    sequence: &[UnitaryTuple],
    max_degree: usize,
    threshold: f64,
) -> Result<ConvergenceReport> {
    if sequence.len() < 2 {
        return Err(Error::Invalid(format!("need at least 2 tuples, got {}", sequence.len())));
    }
    if sequence.iter().any(|t| t.n() != sequence[0].n()) {
        return Err(Error::Shape("tuples in a sequence must share n".into()));
    }
    let tables = sequence
        .iter()
        .map(|t| moment_table(t, max_degree))
        .collect::<Result<Vec<_>>>()?;
    convergence_report_from_tables(&tables, threshold)
}
