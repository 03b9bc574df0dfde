//! Symbolic Hamiltonians: sums of coefficient times products of named
//! single-site operators.

use crate::basis::SiteBasis;
use crate::tensor::C64;
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct ProductTerm {
    pub coefficient: C64,
    /// `(site, operator name)` with strictly increasing sites. An empty list
    /// is a multiple of the identity.
    pub factors: Vec<(usize, String)>,
}

impl ProductTerm {
    /// Build a term, sorting the factors by site.
    pub fn new(coefficient: impl Into<C64>, factors: &[(usize, &str)]) -> Result<Self> {
        let coefficient = coefficient.into();
        if !(coefficient.re.is_finite() && coefficient.im.is_finite()) || coefficient == C64::new(0.0, 0.0) {
            return Err(Error::InvalidArgument(format!(
                "term coefficient must be finite and nonzero, got {coefficient}"
            )));
        }
        let mut factors: Vec<(usize, String)> = factors.iter().map(|&(s, n)| (s, n.to_string())).collect();
        factors.sort_by_key(|f| f.0);
        if factors.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::InvalidArgument(format!("repeated site in term factors {factors:?}")));
        }
        Ok(Self { coefficient, factors })
    }

    pub fn real(coefficient: f64, factors: &[(usize, &str)]) -> Result<Self> {
        Self::new(C64::new(coefficient, 0.0), factors)
    }

    pub fn first_site(&self) -> Option<usize> {
        self.factors.first().map(|f| f.0)
    }

    pub fn last_site(&self) -> Option<usize> {
        self.factors.last().map(|f| f.0)
    }
}

/// Check that every factor names an operator defined on its site.
pub fn validate_terms(terms: &[ProductTerm], bases: &[SiteBasis]) -> Result<()> {
    if terms.is_empty() {
        return Err(Error::EmptyTerms);
    }
    if bases.is_empty() {
        return Err(Error::InvalidArgument("no sites".into()));
    }
    for b in bases {
        b.validate()?;
    }
    for t in terms {
        if t.factors.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(Error::InvalidArgument(format!("term sites not strictly increasing: {:?}", t.factors)));
        }
        for (site, name) in &t.factors {
            let basis = bases.get(*site).ok_or(Error::SiteOutOfRange { site: *site, len: bases.len() })?;
            basis.op(name)?;
        }
    }
    Ok(())
}
