//! Matrix product operators and their compilation from symbolic terms.

use std::collections::BTreeMap;

use nalgebra::DMatrix;

use crate::basis::SiteBasis;
use crate::tensor::{DenseTensor, C64, ZERO};
use crate::terms::{validate_terms, ProductTerm};
use crate::{Error, Result};

/// Nonzero `d x d` block `W[left, :, :, right]` of an MPO tensor, stored as
/// sparse `(out, in, value)` entries.
#[derive(Clone, Debug)]
pub(crate) struct OpBlock {
    pub left: usize,
    pub right: usize,
    pub entries: Vec<(usize, usize, C64)>,
}

#[derive(Clone, Debug)]
pub struct MatrixProductOperator {
    /// `(w_left, d_out, d_in, w_right)`
    tensors: Vec<DenseTensor>,
    bases: Vec<SiteBasis>,
    blocks: Vec<Vec<OpBlock>>,
}

impl MatrixProductOperator {
    pub fn from_tensors(tensors: Vec<DenseTensor>, bases: Vec<SiteBasis>) -> Result<Self> {
        if tensors.is_empty() || tensors.len() != bases.len() {
            return Err(Error::Shape(format!("{} tensors for {} sites", tensors.len(), bases.len())));
        }
        for (i, (t, b)) in tensors.iter().zip(&bases).enumerate() {
            let s = t.shape();
            if s.len() != 4 || s[1] != b.dim() || s[2] != b.dim() {
                return Err(Error::Shape(format!("MPO tensor {i} has shape {s:?} for {b}")));
            }
            if i > 0 && tensors[i - 1].shape()[3] != s[0] {
                return Err(Error::Shape(format!("MPO bond {i} mismatch")));
            }
        }
        if tensors[0].shape()[0] != 1 || tensors.last().unwrap().shape()[3] != 1 {
            return Err(Error::Shape("MPO boundary bonds must be 1".into()));
        }
        let blocks = tensors.iter().map(extract_blocks).collect();
        Ok(Self { tensors, bases, blocks })
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn bases(&self) -> &[SiteBasis] {
        &self.bases
    }

    pub fn tensors(&self) -> &[DenseTensor] {
        &self.tensors
    }

    pub(crate) fn blocks(&self, site: usize) -> &[OpBlock] {
        &self.blocks[site]
    }

    /// `w_0 .. w_N`, boundaries included.
    pub fn bond_dims(&self) -> Vec<usize> {
        let mut dims = vec![1];
        dims.extend(self.tensors.iter().map(|t| t.shape()[3]));
        dims
    }

    pub fn max_bond(&self) -> usize {
        self.bond_dims().into_iter().max().unwrap_or(1)
    }

    pub(crate) fn right_dim(&self, site: usize) -> usize {
        self.tensors[site].shape()[3]
    }

    pub(crate) fn left_dim(&self, site: usize) -> usize {
        self.tensors[site].shape()[0]
    }

    /// Act on a dense vector (site 0 most significant).
    pub fn apply_dense(&self, v: &[C64]) -> Result<Vec<C64>> {
        let dims: Vec<usize> = self.bases.iter().map(|b| b.dim()).collect();
        let total: usize = dims.iter().product();
        if v.len() != total {
            return Err(Error::Shape(format!("vector of length {} for dimension {total}", v.len())));
        }
        // x layout: (w, done, s, rest)
        let mut x = v.to_vec();
        let mut w = 1;
        let mut done = 1;
        for (i, &d) in dims.iter().enumerate() {
            let rest = total / (done * d);
            let wr = self.right_dim(i);
            let mut y = vec![ZERO; wr * done * d * rest];
            for blk in &self.blocks[i] {
                for p in 0..done {
                    for &(so, si, val) in &blk.entries {
                        let src = ((blk.left * done + p) * d + si) * rest;
                        let dst = ((blk.right * done + p) * d + so) * rest;
                        for k in 0..rest {
                            y[dst + k] += val * x[src + k];
                        }
                    }
                }
            }
            debug_assert_eq!(w, self.left_dim(i));
            x = y;
            w = wr;
            done *= d;
        }
        debug_assert_eq!(w, 1);
        Ok(x)
    }
}

fn extract_blocks(t: &DenseTensor) -> Vec<OpBlock> {
    let s = t.shape();
    let (wl, d, wr) = (s[0], s[1], s[3]);
    let mut out = Vec::new();
    for a in 0..wl {
        for b in 0..wr {
            let entries: Vec<(usize, usize, C64)> = (0..d)
                .flat_map(|so| (0..d).map(move |si| (so, si)))
                .filter_map(|(so, si)| {
                    let v = t.get(&[a, so, si, b]);
                    (v != ZERO).then_some((so, si, v))
                })
                .collect();
            if !entries.is_empty() {
                out.push(OpBlock { left: a, right: b, entries });
            }
        }
    }
    out
}

type Prefix = Vec<(usize, String)>;

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Debug)]
enum State {
    Start,
    Open(usize),
    Done,
}

/// Compile a sum of product terms into an MPO.
///
/// Finite-state construction along the chain: each bond carries a "nothing
/// placed yet" state, a "term finished" state, and one state per distinct
/// open operator prefix. Terms that share a prefix share the state; the
/// coefficient is applied with the final factor.
pub fn mpo_from_terms(terms: &[ProductTerm], bases: &[SiteBasis]) -> Result<MatrixProductOperator> {
    validate_terms(terms, bases)?;
    let n = bases.len();

    // Open prefixes per bond b (between site b and b+1).
    let mut prefixes: Vec<BTreeMap<Prefix, usize>> = vec![BTreeMap::new(); n.saturating_sub(1)];
    for t in terms {
        let (Some(first), Some(last)) = (t.first_site(), t.last_site()) else { continue };
        for (b, map) in prefixes.iter_mut().enumerate().take(last).skip(first) {
            let key: Prefix = t.factors.iter().filter(|f| f.0 <= b).cloned().collect();
            map.entry(key).or_insert(0);
        }
    }
    for map in &mut prefixes {
        for (k, v) in map.values_mut().enumerate() {
            *v = k;
        }
    }
    // State index at bond b; bond -1 holds only Start, bond n-1 only Done.
    let index = |bond: isize, st: State| -> usize {
        if bond < 0 || bond as usize == n - 1 {
            return 0;
        }
        let open = prefixes[bond as usize].len();
        match st {
            State::Start => 0,
            State::Open(k) => 1 + k,
            State::Done => 1 + open,
        }
    };
    let bond_dim = |bond: isize| -> usize {
        if bond < 0 || bond as usize == n - 1 {
            1
        } else {
            prefixes[bond as usize].len() + 2
        }
    };
    let state_of = |bond: usize, key: &Prefix| -> State {
        if key.is_empty() {
            State::Start
        } else {
            State::Open(prefixes[bond][key])
        }
    };

    let mut ops: Vec<BTreeMap<(usize, usize), DMatrix<C64>>> = vec![BTreeMap::new(); n];
    let mut add = |site: usize, l: usize, r: usize, m: DMatrix<C64>| {
        ops[site]
            .entry((l, r))
            .and_modify(|acc| *acc += &m)
            .or_insert(m);
    };
    let mut placed: Vec<std::collections::BTreeSet<(usize, usize)>> = vec![Default::default(); n];

    for (i, basis) in bases.iter().enumerate() {
        let id = basis.op("id")?.matrix;
        let bl = i as isize - 1;
        let br = i as isize;
        if i < n - 1 {
            add(i, index(bl, State::Start), index(br, State::Start), id.clone());
        }
        if i > 0 {
            add(i, index(bl, State::Done), index(br, State::Done), id.clone());
        }
        for t in terms {
            let (Some(first), Some(last)) = (t.first_site(), t.last_site()) else {
                if i == 0 {
                    add(0, index(bl, State::Start), index(br, State::Done), &id * t.coefficient);
                }
                continue;
            };
            if i < first || i > last {
                continue;
            }
            let before: Prefix = t.factors.iter().filter(|f| f.0 < i).cloned().collect();
            let from = if i == first { State::Start } else { state_of(i - 1, &before) };
            let l = index(bl, from);
            match t.factors.iter().find(|f| f.0 == i) {
                Some((_, name)) => {
                    let op = basis.op(name)?.matrix;
                    if i == last {
                        add(i, l, index(br, State::Done), op * t.coefficient);
                    } else {
                        let mut upto = before.clone();
                        upto.push((i, name.clone()));
                        let r = index(br, state_of(i, &upto));
                        if placed[i].insert((l, r)) {
                            add(i, l, r, op);
                        }
                    }
                }
                None => {
                    let r = index(br, state_of(i, &before));
                    if placed[i].insert((l, r)) {
                        add(i, l, r, id.clone());
                    }
                }
            }
        }
    }

    let mut tensors = Vec::with_capacity(n);
    for (i, basis) in bases.iter().enumerate() {
        let d = basis.dim();
        let (wl, wr) = (bond_dim(i as isize - 1), bond_dim(i as isize));
        let mut t = DenseTensor::zeros(&[wl, d, d, wr]);
        for (&(l, r), m) in &ops[i] {
            for so in 0..d {
                for si in 0..d {
                    t.set(&[l, so, si, r], m[(so, si)]);
                }
            }
        }
        tensors.push(t);
    }
    MatrixProductOperator::from_tensors(tensors, bases.to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::DenseHamiltonian;
    use crate::tensor::tests_support::random_tensor;

    fn spins(n: usize) -> Vec<SiteBasis> {
        vec![SiteBasis::SpinHalf; n]
    }

    fn max_diff(a: &[C64], b: &[C64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
    }

    #[test]
    fn single_site_sum_has_bond_two() {
        let terms: Vec<_> = (0..3).map(|i| ProductTerm::real(1.0, &[(i, "sz")]).unwrap()).collect();
        let mpo = mpo_from_terms(&terms, &spins(3)).unwrap();
        assert_eq!(mpo.bond_dims(), vec![1, 2, 2, 1]);
    }

    #[test]
    fn nearest_neighbour_chain_has_bond_three() {
        let n = 5;
        let mut terms = Vec::new();
        for i in 0..n - 1 {
            terms.push(ProductTerm::real(-1.0, &[(i, "sz"), (i + 1, "sz")]).unwrap());
        }
        for i in 0..n {
            terms.push(ProductTerm::real(-0.7, &[(i, "sx")]).unwrap());
        }
        let mpo = mpo_from_terms(&terms, &spins(n)).unwrap();
        assert_eq!(mpo.max_bond(), 3);
        let h = DenseHamiltonian::new(&terms, &spins(n)).unwrap();
        let v = random_tensor(&[1 << n], 3).into_data();
        assert!(max_diff(&mpo.apply_dense(&v).unwrap(), &h.apply(&v)) < 1e-12);
    }

    #[test]
    fn long_range_and_identity_terms() {
        let bases = vec![SiteBasis::SpinHalf, SiteBasis::Boson { levels: 3 }, SiteBasis::SpinHalf, SiteBasis::Boson { levels: 2 }];
        let terms = vec![
            ProductTerm::real(0.5, &[(0, "sz"), (3, "x_dimless")]).unwrap(),
            ProductTerm::real(-0.3, &[(0, "sz"), (2, "sx")]).unwrap(),
            ProductTerm::new(C64::new(0.2, 0.1), &[(1, "b"), (2, "sp")]).unwrap(),
            ProductTerm::new(C64::new(0.2, -0.1), &[(1, "bdag"), (2, "sm")]).unwrap(),
            ProductTerm::real(1.25, &[]).unwrap(),
            ProductTerm::real(0.9, &[(1, "n")]).unwrap(),
        ];
        let mpo = mpo_from_terms(&terms, &bases).unwrap();
        let h = DenseHamiltonian::new(&terms, &bases).unwrap();
        let v = random_tensor(&[2 * 3 * 2 * 2], 5).into_data();
        assert!(max_diff(&mpo.apply_dense(&v).unwrap(), &h.apply(&v)) < 1e-12);
    }

    #[test]
    fn single_site_system() {
        let terms = vec![ProductTerm::real(-2.0, &[(0, "sx")]).unwrap()];
        let mpo = mpo_from_terms(&terms, &spins(1)).unwrap();
        assert_eq!(mpo.bond_dims(), vec![1, 1]);
        let out = mpo.apply_dense(&[C64::new(1.0, 0.0), ZERO]).unwrap();
        assert_eq!(out, vec![ZERO, C64::new(-2.0, 0.0)]);
    }

    #[test]
    fn compile_errors() {
        assert!(matches!(mpo_from_terms(&[], &spins(2)), Err(Error::EmptyTerms)));
        let t = ProductTerm::real(1.0, &[(5, "sz")]).unwrap();
        assert!(matches!(mpo_from_terms(&[t], &spins(2)), Err(Error::SiteOutOfRange { .. })));
        let t = ProductTerm::real(1.0, &[(0, "bogus")]).unwrap();
        assert!(matches!(mpo_from_terms(&[t], &spins(2)), Err(Error::UnknownOperator { .. })));
    }

    #[test]
    fn term_concatenation_is_additive() {
        let n = 6;
        let a: Vec<_> = (0..n - 2).map(|i| ProductTerm::real(0.3 * i as f64 + 0.1, &[(i, "sx"), (i + 2, "sy")]).unwrap()).collect();
        let b: Vec<_> = (0..n).map(|i| ProductTerm::real(-0.2, &[(i, "sz")]).unwrap()).collect();
        let both: Vec<_> = a.iter().chain(&b).cloned().collect();
        let v = random_tensor(&[1 << n], 8).into_data();
        let ma = mpo_from_terms(&a, &spins(n)).unwrap().apply_dense(&v).unwrap();
        let mb = mpo_from_terms(&b, &spins(n)).unwrap().apply_dense(&v).unwrap();
        let mab = mpo_from_terms(&both, &spins(n)).unwrap().apply_dense(&v).unwrap();
        let sum: Vec<C64> = ma.iter().zip(&mb).map(|(x, y)| x + y).collect();
        assert!(max_diff(&sum, &mab) < 1e-10);
    }
}
