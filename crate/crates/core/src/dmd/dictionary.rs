use super::{DmdError, Result};
use crate::scalar::Scalar;

type ObservableFn<T> = Box<dyn Fn(&[T]) -> T + Send + Sync>;

/// Named list of scalar observable functions on the state space.
pub struct Dictionary<T> {
    names: Vec<String>,
    funcs: Vec<ObservableFn<T>>,
}

impl<T: Scalar> Default for Dictionary<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> Dictionary<T> {
    pub fn new() -> Self {
        Self {
            names: Vec::new(),
            funcs: Vec::new(),
        }
    }

    pub fn push(
        mut self,
        name: impl Into<String>,
        f: impl Fn(&[T]) -> T + Send + Sync + 'static,
    ) -> Self {
        self.names.push(name.into());
        self.funcs.push(Box::new(f));
        self
    }

    pub fn len(&self) -> usize {
        self.funcs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.funcs.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    /// Evaluate every function on one state.
    pub fn evaluate(&self, state: &[T]) -> Result<Vec<T>> {
        self.evaluate_indexed(state, 0)
    }

    pub(crate) fn evaluate_indexed(&self, state: &[T], index: usize) -> Result<Vec<T>> {
        let mut out = Vec::with_capacity(self.funcs.len());
        for (name, f) in self.names.iter().zip(&self.funcs) {
            let v = f(state);
            if !v.is_finite() {
                return Err(DmdError::NonFiniteDictionary {
                    name: name.clone(),
                    index,
                });
            }
            out.push(v);
        }
        Ok(out)
    }

    /// Parse a comma-separated monomial list such as `x1,x2,x1^2,x1*x2,1`.
    /// Components are 1-based; `1` is the constant function.
    pub fn parse_monomials(spec: &str, dim: usize) -> Result<Self> {
        let mut dict = Self::new();
        for raw in spec.split(',') {
            let term = raw.trim();
            if term.is_empty() {
                continue;
            }
            let powers = parse_term(term, dim)?;
            let name = term.to_string();
            dict = dict.push(name, move |state: &[T]| {
                let mut acc = T::one();
                for (i, &p) in powers.iter().enumerate() {
                    for _ in 0..p {
                        acc = acc * state[i];
                    }
                }
                acc
            });
        }
        if dict.is_empty() {
            return Err(DmdError::EmptyDictionary);
        }
        Ok(dict)
    }
}

/// Per-component exponents of one monomial term.
fn parse_term(term: &str, dim: usize) -> Result<Vec<u32>> {
    let mut powers = vec![0u32; dim];
    if term == "1" {
        return Ok(powers);
    }
    for factor in term.split('*') {
        let factor = factor.trim();
        let (var, pow) = match factor.split_once('^') {
            Some((v, p)) => {
                let pow: u32 = p.trim().parse().map_err(|_| DmdError::BadDictionaryTerm {
                    term: term.into(),
                    reason: format!("bad exponent '{p}'"),
                })?;
                (v.trim(), pow)
            }
            None => (factor, 1),
        };
        let idx: usize = var
            .strip_prefix('x')
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| DmdError::BadDictionaryTerm {
                term: term.into(),
                reason: format!("expected xN, found '{var}'"),
            })?;
        if idx == 0 || idx > dim {
            return Err(DmdError::BadDictionaryTerm {
                term: term.into(),
                reason: format!("component x{idx} outside 1..={dim}"),
            });
        }
        powers[idx - 1] += pow;
    }
    Ok(powers)
}
