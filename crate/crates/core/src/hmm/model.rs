use serde::{Deserialize, Serialize};

use super::HmmError;

/// Log of a zero probability.
pub const LOG_ZERO: f64 = f64::NEG_INFINITY;

/// Row sums and the initial distribution may deviate from 1 by at most this much.
pub const STOCHASTIC_TOLERANCE: f64 = 1e-9;

/// A discrete hidden Markov model in probability space.
///
/// Matrices are stored row-major as nested vectors, which is also the JSON
/// layout of a model file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HmmModel {
    pub num_states: usize,
    pub num_symbols: usize,
    /// `transition[i][j] = p(X_{t+1} = j | X_t = i)`
    pub transition: Vec<Vec<f64>>,
    /// `emission[i][k] = p(Y_t = k | X_t = i)`
    pub emission: Vec<Vec<f64>>,
    pub initial: Vec<f64>,
}

impl HmmModel {
    pub fn new(transition: Vec<Vec<f64>>, emission: Vec<Vec<f64>>, initial: Vec<f64>) -> Self {
        let num_states = initial.len();
        let num_symbols = emission.first().map_or(0, Vec::len);
        Self {
            num_states,
            num_symbols,
            transition,
            emission,
            initial,
        }
    }

    pub fn from_json(text: &str) -> Result<Self, HmmError> {
        serde_json::from_str(text).map_err(|e| HmmError::Parse(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("model serializes")
    }

    /// Validates the model and converts it to log space.
    pub fn validate(&self) -> Result<LogModel, HmmError> {
        validate_model(self)
    }
}

/// An [`HmmModel`] with every entry replaced by its natural logarithm.
///
/// Matrices are flattened row-major. Zero probabilities become [`LOG_ZERO`].
#[derive(Debug, Clone, PartialEq)]
pub struct LogModel {
    num_states: usize,
    num_symbols: usize,
    transition: Vec<f64>,
    emission: Vec<f64>,
    initial: Vec<f64>,
}

impl LogModel {
    /// Builds a log model from already-logged flat arrays. Used for abstract
    /// models, whose max-constructed rows are not stochastic.
    pub(crate) fn from_raw(
        num_states: usize,
        num_symbols: usize,
        transition: Vec<f64>,
        emission: Vec<f64>,
        initial: Vec<f64>,
    ) -> Self {
        debug_assert_eq!(transition.len(), num_states * num_states);
        debug_assert_eq!(emission.len(), num_states * num_symbols);
        debug_assert_eq!(initial.len(), num_states);
        Self {
            num_states,
            num_symbols,
            transition,
            emission,
            initial,
        }
    }

    #[inline]
    pub fn num_states(&self) -> usize {
        self.num_states
    }

    #[inline]
    pub fn num_symbols(&self) -> usize {
        self.num_symbols
    }

    #[inline]
    pub fn transition(&self, from: usize, to: usize) -> f64 {
        self.transition[from * self.num_states + to]
    }

    #[inline]
    pub fn emission(&self, state: usize, symbol: usize) -> f64 {
        self.emission[state * self.num_symbols + symbol]
    }

    #[inline]
    pub fn initial(&self, state: usize) -> f64 {
        self.initial[state]
    }

    pub fn transition_row(&self, from: usize) -> &[f64] {
        &self.transition[from * self.num_states..(from + 1) * self.num_states]
    }

    pub fn emission_row(&self, state: usize) -> &[f64] {
        &self.emission[state * self.num_symbols..(state + 1) * self.num_symbols]
    }

    pub fn initial_row(&self) -> &[f64] {
        &self.initial
    }

    /// Probability-space view, `exp` of the stored entries.
    pub fn to_probabilities(&self) -> HmmModel {
        let n = self.num_states;
        let m = self.num_symbols;
        HmmModel {
            num_states: n,
            num_symbols: m,
            transition: (0..n)
                .map(|i| self.transition_row(i).iter().map(|x| x.exp()).collect())
                .collect(),
            emission: (0..n)
                .map(|i| self.emission_row(i).iter().map(|x| x.exp()).collect())
                .collect(),
            initial: self.initial.iter().map(|x| x.exp()).collect(),
        }
    }
}

#[inline]
pub(crate) fn ln(p: f64) -> f64 {
    if p == 0.0 {
        LOG_ZERO
    } else {
        p.ln()
    }
}

fn check_row(what: &'static str, row_index: usize, row: &[f64]) -> Result<(), HmmError> {
    for (col, &p) in row.iter().enumerate() {
        if !(0.0..=1.0).contains(&p) {
            return Err(HmmError::OutOfRange {
                what,
                row: row_index,
                col,
                value: p,
            });
        }
    }
    let sum: f64 = row.iter().sum();
    if (sum - 1.0).abs() > STOCHASTIC_TOLERANCE {
        return Err(HmmError::NotStochastic {
            what,
            row: row_index,
            sum,
        });
    }
    Ok(())
}

/// Checks shapes, ranges and stochasticity, then converts to log space.
pub fn validate_model(model: &HmmModel) -> Result<LogModel, HmmError> {
    let n = model.num_states;
    let m = model.num_symbols;
    if n == 0 {
        return Err(HmmError::DimensionMismatch {
            what: "num_states",
            expected: 1,
            found: 0,
        });
    }
    if m == 0 {
        return Err(HmmError::DimensionMismatch {
            what: "num_symbols",
            expected: 1,
            found: 0,
        });
    }
    let dims = [
        ("transition rows", n, model.transition.len()),
        ("emission rows", n, model.emission.len()),
        ("initial", n, model.initial.len()),
    ];
    for (what, expected, found) in dims {
        if expected != found {
            return Err(HmmError::DimensionMismatch {
                what,
                expected,
                found,
            });
        }
    }
    for row in &model.transition {
        if row.len() != n {
            return Err(HmmError::DimensionMismatch {
                what: "transition columns",
                expected: n,
                found: row.len(),
            });
        }
    }
    for row in &model.emission {
        if row.len() != m {
            return Err(HmmError::DimensionMismatch {
                what: "emission columns",
                expected: m,
                found: row.len(),
            });
        }
    }
    for (i, row) in model.transition.iter().enumerate() {
        check_row("transition", i, row)?;
    }
    for (i, row) in model.emission.iter().enumerate() {
        check_row("emission", i, row)?;
    }
    check_row("initial", 0, &model.initial)?;

    let transition = model.transition.iter().flatten().map(|&p| ln(p)).collect();
    let emission = model.emission.iter().flatten().map(|&p| ln(p)).collect();
    let initial = model.initial.iter().map(|&p| ln(p)).collect();
    Ok(LogModel::from_raw(n, m, transition, emission, initial))
}

/// A sequence of observed symbols `Y_1..Y_T`, stored 0-based.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObservationSequence {
    symbols: Vec<usize>,
}

impl ObservationSequence {
    /// Wraps a symbol list without checking it against an alphabet.
    pub fn new(symbols: Vec<usize>) -> Self {
        Self { symbols }
    }

    /// Wraps a symbol list, checking every symbol is below `num_symbols`.
    pub fn checked(symbols: Vec<usize>, num_symbols: usize) -> Result<Self, HmmError> {
        let seq = Self { symbols };
        seq.check_alphabet(num_symbols)?;
        Ok(seq)
    }

    pub fn check_alphabet(&self, num_symbols: usize) -> Result<(), HmmError> {
        if let Some((t, &s)) = self
            .symbols
            .iter()
            .enumerate()
            .find(|(_, &s)| s >= num_symbols)
        {
            return Err(HmmError::SymbolOutOfRange {
                time: t,
                symbol: s,
                num_symbols,
            });
        }
        Ok(())
    }

    /// Parses whitespace-separated 0-based integers.
    pub fn parse(text: &str) -> Result<Self, HmmError> {
        let symbols = text
            .split_whitespace()
            .map(|tok| {
                tok.parse::<usize>()
                    .map_err(|_| HmmError::Parse(format!("bad observation token {tok:?}")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { symbols })
    }

    /// One line of space-separated symbols with a trailing newline.
    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(self.symbols.len() * 4);
        for (i, s) in self.symbols.iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            out.push_str(&s.to_string());
        }
        out.push('\n');
        out
    }

    pub fn symbols(&self) -> &[usize] {
        &self.symbols
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    /// Returns the first `len` observations.
    pub fn prefix(&self, len: usize) -> Self {
        Self {
            symbols: self.symbols[..len.min(self.symbols.len())].to_vec(),
        }
    }
}

impl std::ops::Index<usize> for ObservationSequence {
    type Output = usize;

    fn index(&self, t: usize) -> &usize {
        &self.symbols[t]
    }
}
