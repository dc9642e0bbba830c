//! Finite-alphabet truncations of countable Markov shifts: admissible words,
//! transition structure, counting, and finite-primitivity witnesses.

use num_bigint::BigUint;
use num_traits::{One, Zero};

use crate::error::{Error, Result};

/// Symbols are 0-based indices into the truncated alphabet.
pub type Symbol = u32;

/// An admissible (or candidate) finite word over the alphabet.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize)]
pub struct Word(pub Vec<Symbol>);

impl Word {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[Symbol] {
        &self.0
    }
}

impl From<Vec<Symbol>> for Word {
    fn from(v: Vec<Symbol>) -> Self {
        Word(v)
    }
}

impl std::ops::Deref for Word {
    type Target = [Symbol];
    fn deref(&self) -> &[Symbol] {
        &self.0
    }
}

/// Transition structure between consecutive symbols.
#[derive(Debug, Clone, PartialEq)]
pub enum Transition {
    /// Every pair is admissible (full shift).
    Full,
    /// Row-major m*m table; entry a*m+b says whether a can be followed by b.
    Table(Vec<bool>),
}

/// A truncated shift: alphabet {0, .., m-1} plus a transition rule.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftSpec {
    m: usize,
    transition: Transition,
}

/// Constraints on word enumeration and counting.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Constraint {
    /// Fix the first symbol.
    pub start: Option<Symbol>,
    /// Fix the last symbol.
    pub end: Option<Symbol>,
    /// Require the wrap-around step (last -> first) to be admissible too.
    pub periodic: bool,
}

impl Constraint {
    pub fn none() -> Self {
        Constraint::default()
    }

    pub fn periodic() -> Self {
        Constraint {
            periodic: true,
            ..Constraint::default()
        }
    }

    pub fn from_to(a: Symbol, b: Symbol) -> Self {
        Constraint {
            start: Some(a),
            end: Some(b),
            periodic: false,
        }
    }
}

/// A finite-primitivity witness: a set of connecting words, all of one length,
/// such that any symbol a and b can be joined as a-lambda-b admissibly.
#[derive(Debug, Clone, PartialEq)]
pub struct Witness {
    pub connect_len: usize,
    pub words: Vec<Word>,
}

impl ShiftSpec {
    /// Full shift on m symbols.
    pub fn full(m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidInput("alphabet must be nonempty".into()));
        }
        Ok(ShiftSpec {
            m,
            transition: Transition::Full,
        })
    }

    /// Shift from a 0/1 transition table. Rows must be equal-length and every
    /// row and column must contain a 1, otherwise some symbol is a dead end
    /// and word sums over the truncation degenerate.
    pub fn from_table(rows: &[Vec<u8>]) -> Result<Self> {
        let m = rows.len();
        if m == 0 {
            return Err(Error::InvalidInput("alphabet must be nonempty".into()));
        }
        let mut table = vec![false; m * m];
        for (i, row) in rows.iter().enumerate() {
            if row.len() != m {
                return Err(Error::InvalidInput(format!(
                    "transition row {} has length {}, expected {}",
                    i,
                    row.len(),
                    m
                )));
            }
            for (j, &v) in row.iter().enumerate() {
                table[i * m + j] = v != 0;
            }
        }
        for a in 0..m {
            if !(0..m).any(|b| table[a * m + b]) {
                return Err(Error::ZeroRowOrColumn {
                    index: a,
                    is_row: true,
                });
            }
        }
        for b in 0..m {
            if !(0..m).any(|a| table[a * m + b]) {
                return Err(Error::ZeroRowOrColumn {
                    index: b,
                    is_row: false,
                });
            }
        }
        Ok(ShiftSpec {
            m,
            transition: Transition::Table(table),
        })
    }

    /// The golden-mean shift: two symbols, 11 forbidden.
    pub fn golden_mean() -> Self {
        ShiftSpec::from_table(&[vec![1, 1], vec![1, 0]]).expect("static table is valid")
    }

    /// Parse {"alphabet_size": m, "transition": "full" | [[0,1,..], ..]}.
    /// A missing transition field means the full shift.
    pub fn from_json(doc: &serde_json::Value) -> Result<Self> {
        let obj = doc
            .as_object()
            .ok_or_else(|| Error::ConfigInvalid("shift must be a JSON object".into()))?;
        let m = obj
            .get("alphabet_size")
            .and_then(|v| v.as_u64())
            .ok_or_else(|| Error::ConfigInvalid("shift needs integer alphabet_size".into()))?
            as usize;
        match obj.get("transition") {
            None => ShiftSpec::full(m),
            Some(serde_json::Value::String(s)) if s == "full" => ShiftSpec::full(m),
            Some(serde_json::Value::Array(rows)) => {
                if rows.len() != m {
                    return Err(Error::ConfigInvalid(format!(
                        "transition has {} rows, alphabet_size is {}",
                        rows.len(),
                        m
                    )));
                }
                let mut parsed = Vec::with_capacity(m);
                for row in rows {
                    let row = row.as_array().ok_or_else(|| {
                        Error::ConfigInvalid("transition rows must be arrays".into())
                    })?;
                    let mut r = Vec::with_capacity(row.len());
                    for v in row {
                        match v.as_u64() {
                            Some(0) => r.push(0),
                            Some(1) => r.push(1),
                            _ => {
                                return Err(Error::ConfigInvalid(
                                    "transition entries must be 0 or 1".into(),
                                ))
                            }
                        }
                    }
                    parsed.push(r);
                }
                ShiftSpec::from_table(&parsed)
            }
            Some(_) => Err(Error::ConfigInvalid(
                "transition must be \"full\" or a 0/1 matrix".into(),
            )),
        }
    }

    pub fn alphabet_size(&self) -> usize {
        self.m
    }

    pub fn is_full(&self) -> bool {
        matches!(self.transition, Transition::Full)
    }

    /// Whether symbol a may be followed by symbol b.
    pub fn allowed(&self, a: Symbol, b: Symbol) -> bool {
        let (a, b) = (a as usize, b as usize);
        if a >= self.m || b >= self.m {
            return false;
        }
        match &self.transition {
            Transition::Full => true,
            Transition::Table(t) => t[a * self.m + b],
        }
    }

    /// Validate a word symbol by symbol. The reported position is the index
    /// of the offending symbol, or of the left symbol of a forbidden step.
    pub fn check_word(&self, word: &[Symbol]) -> Result<()> {
        for (i, &s) in word.iter().enumerate() {
            if (s as usize) >= self.m {
                return Err(Error::InadmissibleWord { position: i });
            }
        }
        for i in 0..word.len().saturating_sub(1) {
            if !self.allowed(word[i], word[i + 1]) {
                return Err(Error::InadmissibleWord { position: i });
            }
        }
        Ok(())
    }

    /// Lexicographic enumeration of admissible words of length n.
    pub fn words(&self, n: usize, constraint: Constraint) -> WordIter<'_> {
        WordIter {
            spec: self,
            c: constraint,
            n,
            w: vec![0; n],
            state: IterState::Fresh,
        }
    }

    /// Exact count of admissible words of length n under the constraint,
    /// via transfer-matrix powers. Periodic cannot combine with start/end.
    pub fn count_words(&self, n: usize, c: Constraint) -> Result<BigUint> {
        if c.periodic && (c.start.is_some() || c.end.is_some()) {
            return Err(Error::InvalidInput(
                "periodic constraint cannot be combined with start or end".into(),
            ));
        }
        for s in [c.start, c.end].into_iter().flatten() {
            if (s as usize) >= self.m {
                return Err(Error::InvalidInput(format!(
                    "constraint symbol {} out of alphabet",
                    s
                )));
            }
        }
        let m = self.m;
        if n == 0 {
            // The empty word exists once and has no first or last symbol.
            return Ok(if c.start.is_some() || c.end.is_some() {
                BigUint::zero()
            } else {
                BigUint::one()
            });
        }
        if self.is_full() {
            let mb = BigUint::from(m);
            return Ok(match (c.periodic, c.start, c.end) {
                (true, _, _) => mb.pow(n as u32),
                (false, None, None) => mb.pow(n as u32),
                (false, Some(_), None) | (false, None, Some(_)) => mb.pow(n as u32 - 1),
                (false, Some(a), Some(b)) => {
                    if n == 1 {
                        if a == b {
                            BigUint::one()
                        } else {
                            BigUint::zero()
                        }
                    } else {
                        mb.pow(n as u32 - 2)
                    }
                }
            });
        }
        let adj = self.adjacency_biguint();
        if c.periodic {
            let p = big_matpow(m, &adj, n);
            let mut t = BigUint::zero();
            for i in 0..m {
                t += &p[i * m + i];
            }
            return Ok(t);
        }
        // Length-n words are (n-1)-step paths.
        let p = big_matpow(m, &adj, n - 1);
        let mut total = BigUint::zero();
        match (c.start, c.end) {
            (Some(a), Some(b)) => total = p[a as usize * m + b as usize].clone(),
            (Some(a), None) => {
                for b in 0..m {
                    total += &p[a as usize * m + b];
                }
            }
            (None, Some(b)) => {
                for a in 0..m {
                    total += &p[a * m + b as usize];
                }
            }
            (None, None) => {
                for e in &p {
                    total += e;
                }
            }
        }
        Ok(total)
    }

    /// Adjacency matrix as big integers, row-major.
    pub fn adjacency_biguint(&self) -> Vec<BigUint> {
        let m = self.m;
        let mut adj = vec![BigUint::zero(); m * m];
        for a in 0..m {
            for b in 0..m {
                if self.allowed(a as Symbol, b as Symbol) {
                    adj[a * m + b] = BigUint::one();
                }
            }
        }
        adj
    }

    /// Search for a finite-primitivity witness: the smallest connecting
    /// length up to max_len for which a finite word set joins every symbol
    /// pair. The word set is built greedily over (first, last) symbol
    /// classes, so it is small but not guaranteed minimal.
    pub fn witness(&self, max_len: usize) -> Result<Witness> {
        let m = self.m;
        for len in 0..=max_len {
            if len == 0 {
                if (0..m).all(|a| (0..m).all(|b| self.allowed(a as Symbol, b as Symbol))) {
                    return Ok(Witness {
                        connect_len: 0,
                        words: vec![],
                    });
                }
                continue;
            }
            // reach[k*m + s]: some admissible length-(k+1) word starts at s
            // with its k-step endpoint anywhere; built per target below.
            // A connecting word of length len with first symbol h and last
            // symbol t exists iff t is reachable from h in len-1 steps.
            let steps = len - 1;
            let mut reach = vec![false; m * m]; // reach[h*m+t] over exactly `steps` steps
            for h in 0..m {
                reach[h * m + h] = true;
            }
            for _ in 0..steps {
                let mut next = vec![false; m * m];
                for h in 0..m {
                    for mid in 0..m {
                        if reach[h * m + mid] {
                            for t in 0..m {
                                if self.allowed(mid as Symbol, t as Symbol) {
                                    next[h * m + t] = true;
                                }
                            }
                        }
                    }
                }
                reach = next;
            }
            // Each viable (h, t) class covers the rectangle of pairs
            // {a: a->h} x {b: t->b}; greedily cover all m*m pairs.
            let mut uncovered = vec![true; m * m];
            let mut remaining = m * m;
            let mut chosen: Vec<(usize, usize)> = Vec::new();
            while remaining > 0 {
                let mut best: Option<(usize, usize, usize)> = None;
                for h in 0..m {
                    for t in 0..m {
                        if !reach[h * m + t] {
                            continue;
                        }
                        let mut gain = 0;
                        for a in 0..m {
                            if !self.allowed(a as Symbol, h as Symbol) {
                                continue;
                            }
                            for b in 0..m {
                                if self.allowed(t as Symbol, b as Symbol) && uncovered[a * m + b] {
                                    gain += 1;
                                }
                            }
                        }
                        if gain > 0 && best.map_or(true, |(_, _, g)| gain > g) {
                            best = Some((h, t, gain));
                        }
                    }
                }
                let Some((h, t, gain)) = best else { break };
                for a in 0..m {
                    if !self.allowed(a as Symbol, h as Symbol) {
                        continue;
                    }
                    for b in 0..m {
                        if self.allowed(t as Symbol, b as Symbol) && uncovered[a * m + b] {
                            uncovered[a * m + b] = false;
                        }
                    }
                }
                remaining -= gain;
                chosen.push((h, t));
            }
            if remaining == 0 {
                let mut words = Vec::with_capacity(chosen.len());
                for (h, t) in chosen {
                    words.push(self.lex_first_path(h as Symbol, t as Symbol, len));
                }
                words.sort();
                return Ok(Witness {
                    connect_len: len,
                    words,
                });
            }
        }
        Err(Error::NoWitnessFound { depth: max_len })
    }

    /// Lexicographically smallest admissible word of the given length from h
    /// to t. Caller guarantees one exists (witness search checked first).
    fn lex_first_path(&self, h: Symbol, t: Symbol, len: usize) -> Word {
        let m = self.m;
        // can_end[k*m + s]: t is reachable from s in exactly k steps
        let mut can_end = vec![false; len * m];
        can_end[t as usize] = true; // k = 0 row
        for k in 1..len {
            for s in 0..m {
                can_end[k * m + s] = (0..m)
                    .any(|s2| self.allowed(s as Symbol, s2 as Symbol) && can_end[(k - 1) * m + s2]);
            }
        }
        let mut w = Vec::with_capacity(len);
        w.push(h);
        for i in 1..len {
            let steps_left = len - 1 - i;
            let prev = w[i - 1];
            let next = (0..m as Symbol)
                .find(|&s| self.allowed(prev, s) && can_end[steps_left * m + s as usize])
                .expect("path existence was verified");
            w.push(next);
        }
        Word(w)
    }
}

enum IterState {
    Fresh,
    Mid,
    Done,
}

/// Lexicographic depth-first enumeration of admissible words.
pub struct WordIter<'a> {
    spec: &'a ShiftSpec,
    c: Constraint,
    n: usize,
    w: Vec<Symbol>,
    state: IterState,
}

impl<'a> WordIter<'a> {
    fn candidate_ok(&self, i: usize, s: Symbol) -> bool {
        if (s as usize) >= self.spec.m {
            return false;
        }
        if i == 0 {
            if let Some(a) = self.c.start {
                if s != a {
                    return false;
                }
            }
        } else if !self.spec.allowed(self.w[i - 1], s) {
            return false;
        }
        if i + 1 == self.n {
            if let Some(b) = self.c.end {
                if s != b {
                    return false;
                }
            }
        }
        true
    }

    /// Fill positions i.. with minimal admissible symbols, the symbol at i
    /// being at least smin; backtracks freely below i. False means exhausted.
    fn descend(&mut self, mut i: usize, mut smin: Symbol) -> bool {
        loop {
            let found = (smin..self.spec.m as Symbol).find(|&s| self.candidate_ok(i, s));
            match found {
                Some(s) => {
                    self.w[i] = s;
                    if i + 1 == self.n {
                        return true;
                    }
                    i += 1;
                    smin = 0;
                }
                None => {
                    if i == 0 {
                        return false;
                    }
                    i -= 1;
                    smin = self.w[i] + 1;
                }
            }
        }
    }
}

impl<'a> Iterator for WordIter<'a> {
    type Item = Word;

    fn next(&mut self) -> Option<Word> {
        loop {
            let filled = match self.state {
                IterState::Done => return None,
                IterState::Fresh => {
                    self.state = IterState::Mid;
                    if self.n == 0 {
                        self.state = IterState::Done;
                        if self.c.start.is_none() && self.c.end.is_none() {
                            return Some(Word(vec![]));
                        }
                        return None;
                    }
                    self.descend(0, 0)
                }
                IterState::Mid => {
                    let last = self.n - 1;
                    let smin = self.w[last] + 1;
                    self.descend(last, smin)
                }
            };
            if !filled {
                self.state = IterState::Done;
                return None;
            }
            if self.c.periodic && !self.spec.allowed(self.w[self.n - 1], self.w[0]) {
                continue;
            }
            return Some(Word(self.w.clone()));
        }
    }
}

fn big_matmul(m: usize, a: &[BigUint], b: &[BigUint]) -> Vec<BigUint> {
    let mut out = vec![BigUint::zero(); m * m];
    for i in 0..m {
        for k in 0..m {
            if a[i * m + k].is_zero() {
                continue;
            }
            let aik = &a[i * m + k];
            for j in 0..m {
                if !b[k * m + j].is_zero() {
                    out[i * m + j] += aik * &b[k * m + j];
                }
            }
        }
    }
    out
}

fn big_matpow(m: usize, a: &[BigUint], mut e: usize) -> Vec<BigUint> {
    let mut result = vec![BigUint::zero(); m * m];
    for i in 0..m {
        result[i * m + i] = BigUint::one();
    }
    let mut base = a.to_vec();
    while e > 0 {
        if e & 1 == 1 {
            result = big_matmul(m, &result, &base);
        }
        e >>= 1;
        if e > 0 {
            base = big_matmul(m, &base, &base);
        }
    }
    result
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rejects_zero_rows_and_columns() {
        let err = ShiftSpec::from_table(&[vec![1, 1], vec![0, 0]]).unwrap_err();
        assert_eq!(
            err,
            Error::ZeroRowOrColumn {
                index: 1,
                is_row: true
            }
        );
        let err = ShiftSpec::from_table(&[vec![1, 0], vec![1, 0]]).unwrap_err();
        assert_eq!(
            err,
            Error::ZeroRowOrColumn {
                index: 1,
                is_row: false
            }
        );
    }

    #[test]
    fn golden_mean_word_list_n3() {
        let spec = ShiftSpec::golden_mean();
        let words: Vec<Vec<Symbol>> = spec.words(3, Constraint::none()).map(|w| w.0).collect();
        assert_eq!(
            words,
            vec![
                vec![0, 0, 0],
                vec![0, 0, 1],
                vec![0, 1, 0],
                vec![1, 0, 0],
                vec![1, 0, 1]
            ]
        );
    }

    #[test]
    fn golden_mean_counts_are_fibonacci_and_lucas() {
        let spec = ShiftSpec::golden_mean();
        // Words of length n: F(n+2) with F(1)=F(2)=1; length 10 gives 144.
        assert_eq!(
            spec.count_words(10, Constraint::none()).unwrap(),
            BigUint::from(144u32)
        );
        // Periodic words: Lucas numbers 1, 3, 4, 7, 11.
        let lucas = [1u32, 3, 4, 7, 11];
        for (i, &l) in lucas.iter().enumerate() {
            let n = i + 1;
            assert_eq!(
                spec.count_words(n, Constraint::periodic()).unwrap(),
                BigUint::from(l)
            );
            assert_eq!(spec.words(n, Constraint::periodic()).count(), l as usize);
        }
    }

    #[test]
    fn full_shift_counts() {
        let spec = ShiftSpec::full(3).unwrap();
        assert_eq!(
            spec.count_words(4, Constraint::none()).unwrap(),
            BigUint::from(81u32)
        );
        assert_eq!(
            spec.count_words(4, Constraint::periodic()).unwrap(),
            BigUint::from(81u32)
        );
        assert_eq!(
            spec.count_words(4, Constraint::from_to(1, 2)).unwrap(),
            BigUint::from(9u32)
        );
        assert_eq!(
            spec.count_words(0, Constraint::none()).unwrap(),
            BigUint::one()
        );
    }

    #[test]
    fn check_word_reports_first_bad_position() {
        let spec = ShiftSpec::golden_mean();
        assert!(spec.check_word(&[0, 1, 0, 1]).is_ok());
        assert_eq!(
            spec.check_word(&[0, 1, 1]).unwrap_err(),
            Error::InadmissibleWord { position: 1 }
        );
        assert_eq!(
            spec.check_word(&[0, 2]).unwrap_err(),
            Error::InadmissibleWord { position: 1 }
        );
    }

    #[test]
    fn witness_full_shift_is_empty_at_length_zero() {
        let spec = ShiftSpec::full(5).unwrap();
        let w = spec.witness(4).unwrap();
        assert_eq!(w.connect_len, 0);
        assert!(w.words.is_empty());
    }

    #[test]
    fn witness_golden_mean_is_single_zero() {
        let spec = ShiftSpec::golden_mean();
        let w = spec.witness(4).unwrap();
        assert_eq!(w.connect_len, 1);
        assert_eq!(w.words, vec![Word(vec![0])]);
    }

    #[test]
    fn witness_fails_on_bipartite_shift() {
        // Period-2 structure: connecting words of any single length cannot
        // join both same-parity and opposite-parity symbol pairs.
        let spec = ShiftSpec::from_table(&[vec![0, 1], vec![1, 0]]).unwrap();
        assert_eq!(
            spec.witness(6).unwrap_err(),
            Error::NoWitnessFound { depth: 6 }
        );
    }

    #[test]
    fn witness_words_actually_connect_everything() {
        let spec = ShiftSpec::from_table(&[vec![1, 1, 1], vec![1, 1, 1], vec![1, 0, 0]]).unwrap();
        let w = spec.witness(4).unwrap();
        assert_eq!(w.connect_len, 1);
        let m = spec.alphabet_size() as Symbol;
        for a in 0..m {
            for b in 0..m {
                assert!(w.words.iter().any(|lam| {
                    let mut joined = vec![a];
                    joined.extend_from_slice(lam);
                    joined.push(b);
                    spec.check_word(&joined).is_ok()
                }));
            }
        }
    }

    #[test]
    fn enumeration_respects_start_end() {
        let spec = ShiftSpec::golden_mean();
        let words: Vec<Vec<Symbol>> = spec
            .words(4, Constraint::from_to(1, 1))
            .map(|w| w.0)
            .collect();
        assert_eq!(words, vec![vec![1, 0, 0, 1]]);
        assert_eq!(
            spec.count_words(4, Constraint::from_to(1, 1)).unwrap(),
            BigUint::one()
        );
    }

    #[test]
    fn from_json_parses_both_forms() {
        let full: serde_json::Value =
            serde_json::from_str(r#"{"alphabet_size": 7, "transition": "full"}"#).unwrap();
        let spec = ShiftSpec::from_json(&full).unwrap();
        assert!(spec.is_full());
        assert_eq!(spec.alphabet_size(), 7);

        let table: serde_json::Value =
            serde_json::from_str(r#"{"alphabet_size": 2, "transition": [[1,1],[1,0]]}"#).unwrap();
        let spec = ShiftSpec::from_json(&table).unwrap();
        assert_eq!(spec, ShiftSpec::golden_mean());

        let bad: serde_json::Value =
            serde_json::from_str(r#"{"alphabet_size": 2, "transition": [[1,1]]}"#).unwrap();
        assert!(matches!(
            ShiftSpec::from_json(&bad),
            Err(Error::ConfigInvalid(_))
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn counting_matches_enumeration(
            bits in proptest::collection::vec(any::<bool>(), 9),
            n in 0usize..6,
            periodic in any::<bool>(),
        ) {
            let rows: Vec<Vec<u8>> = (0..3)
                .map(|i| (0..3).map(|j| bits[i * 3 + j] as u8).collect())
                .collect();
            let spec = match ShiftSpec::from_table(&rows) {
                Ok(s) => s,
                Err(_) => return Ok(()), // zero row/col, nothing to test
            };
            let c = if periodic { Constraint::periodic() } else { Constraint::none() };
            let counted = spec.count_words(n, c).unwrap();
            let enumerated = spec.words(n, c).count();
            prop_assert_eq!(counted, BigUint::from(enumerated));
        }
    }
}
