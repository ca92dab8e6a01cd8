//! Single-photon modes and the exchange-symmetric two-photon state.
//!
//! A single photon lives in the 4-dimensional space spanned by
//! `{H, V} x {first path, second path}`. The two photons are kept as
//! distinguishable slots whose amplitude tensor is symmetric under exchange,
//! so the transposed terms of a pair state are always stored explicitly.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, SQRT_2};
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Number of single-photon modes for a fixed path set.
pub const MODE_DIM: usize = 4;

/// Tolerance used by the constructors' normalization checks.
pub const NORM_TOL: f64 = 1e-12;

/// Magnitudes below this are omitted from dumps and pretty-printing.
pub const DISPLAY_ZERO: f64 = 1e-14;

pub type Amplitudes = [[Complex64; MODE_DIM]; MODE_DIM];

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Polarization {
    H,
    V,
}

impl Polarization {
    pub const ALL: [Polarization; 2] = [Polarization::H, Polarization::V];

    pub fn index(self) -> usize {
        match self {
            Polarization::H => 0,
            Polarization::V => 1,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Polarization::H => Polarization::V,
            Polarization::V => Polarization::H,
        }
    }
}

/// Which pair of transverse paths is active: the two slits behind the crystal,
/// or the two output ports of the interferometer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PathSet {
    Input,
    Output,
}

impl PathSet {
    pub fn paths(self) -> [PathMode; 2] {
        match self {
            PathSet::Input => [PathMode::A, PathMode::B],
            PathSet::Output => [PathMode::Aout, PathMode::Bout],
        }
    }

    pub fn modes(self) -> [SingleMode; MODE_DIM] {
        let mut out = [SingleMode::new(Polarization::H, PathMode::A); MODE_DIM];
        for pol in Polarization::ALL {
            for path in self.paths() {
                let m = SingleMode::new(pol, path);
                out[m.index()] = m;
            }
        }
        out
    }
}

/// Transverse path of a photon. `Aout`/`Bout` are the interferometer outputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PathMode {
    A,
    B,
    Aout,
    Bout,
}

impl PathMode {
    pub fn path_set(self) -> PathSet {
        match self {
            PathMode::A | PathMode::B => PathSet::Input,
            PathMode::Aout | PathMode::Bout => PathSet::Output,
        }
    }

    /// Position within its path set: 0 for the A-side path, 1 for the B-side.
    pub fn slot(self) -> usize {
        match self {
            PathMode::A | PathMode::Aout => 0,
            PathMode::B | PathMode::Bout => 1,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            PathMode::A => "A",
            PathMode::B => "B",
            PathMode::Aout => "Aout",
            PathMode::Bout => "Bout",
        }
    }

    pub fn from_label(label: &str) -> Option<Self> {
        match label {
            "A" => Some(PathMode::A),
            "B" => Some(PathMode::B),
            "Aout" => Some(PathMode::Aout),
            "Bout" => Some(PathMode::Bout),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SingleMode {
    pub pol: Polarization,
    pub path: PathMode,
}

impl SingleMode {
    pub const fn new(pol: Polarization, path: PathMode) -> Self {
        SingleMode { pol, path }
    }

    /// Basis index within the mode's own path set.
    pub fn index(self) -> usize {
        self.pol.index() * 2 + self.path.slot()
    }

    pub fn from_index(pathset: PathSet, index: usize) -> Self {
        debug_assert!(index < MODE_DIM);
        let pol = Polarization::ALL[index / 2];
        SingleMode::new(pol, pathset.paths()[index % 2])
    }
}

impl fmt::Display for SingleMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}.{}", self.pol, self.path.label())
    }
}

/// Two photons over the 4x4 ordered mode pairs of one path set.
///
/// Invariants: unit norm, `amp(m1, m2) == amp(m2, m1)`, and every index
/// refers to the active path set.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoPhotonState {
    amp: Amplitudes,
    pathset: PathSet,
}

impl TwoPhotonState {
    /// Builds a state from raw ordered amplitudes, symmetrizing and
    /// normalizing them.
    pub fn from_amplitudes(pathset: PathSet, amp: Amplitudes) -> Result<Self> {
        let mut sym = [[ZERO; MODE_DIM]; MODE_DIM];
        for (i, row) in sym.iter_mut().enumerate() {
            for (j, slot) in row.iter_mut().enumerate() {
                *slot = (amp[i][j] + amp[j][i]) * 0.5;
            }
        }
        Self::normalize_raw(pathset, sym)
    }

    /// Builds `sum_k c_k |m1_k>|m2_k> + t.t.` and normalizes it.
    pub fn from_terms(pathset: PathSet, terms: &[(SingleMode, SingleMode, Complex64)]) -> Result<Self> {
        let mut amp = [[ZERO; MODE_DIM]; MODE_DIM];
        for &(m1, m2, c) in terms {
            check_mode(pathset, m1)?;
            check_mode(pathset, m2)?;
            amp[m1.index()][m2.index()] += c;
            amp[m2.index()][m1.index()] += c;
        }
        Self::normalize_raw(pathset, amp)
    }

    /// Unchecked constructor for callers that already hold a symmetric,
    /// normalized tensor (the element lift preserves both).
    pub(crate) fn from_parts(pathset: PathSet, amp: Amplitudes) -> Self {
        TwoPhotonState { amp, pathset }
    }

    fn normalize_raw(pathset: PathSet, amp: Amplitudes) -> Result<Self> {
        let norm = norm_sqr(&amp).sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::ZeroState);
        }
        let mut out = amp;
        for row in out.iter_mut() {
            for a in row.iter_mut() {
                *a /= norm;
            }
        }
        Ok(TwoPhotonState { amp: out, pathset })
    }

    pub fn pathset(&self) -> PathSet {
        self.pathset
    }

    pub fn amplitudes(&self) -> &Amplitudes {
        &self.amp
    }

    /// Ordered-slot amplitude `amp(m1, m2)`; zero for modes outside the
    /// active path set.
    pub fn amplitude(&self, m1: SingleMode, m2: SingleMode) -> Complex64 {
        if m1.path.path_set() != self.pathset || m2.path.path_set() != self.pathset {
            return ZERO;
        }
        self.amp[m1.index()][m2.index()]
    }

    /// Coefficient of `|m1>|m2>` when the transposed term is left implicit,
    /// i.e. the coefficient printed in ket notation without "t.t.".
    pub fn term_coefficient(&self, m1: SingleMode, m2: SingleMode) -> Complex64 {
        if m1 == m2 {
            self.amplitude(m1, m2)
        } else {
            self.amplitude(m1, m2) * SQRT_2
        }
    }

    pub fn norm_sqr(&self) -> f64 {
        norm_sqr(&self.amp)
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        (0..MODE_DIM).all(|i| (0..MODE_DIM).all(|j| (self.amp[i][j] - self.amp[j][i]).norm() <= tol))
    }

    /// Equality up to a global phase: `|<self|other>| = 1` within `tol`.
    pub fn approx_eq_up_to_phase(&self, other: &TwoPhotonState, tol: f64) -> bool {
        if self.pathset != other.pathset {
            return false;
        }
        let overlap = inner_product(self, other).map(|c| c.norm()).unwrap_or(0.0);
        (1.0 - overlap).abs() <= tol
    }

    /// Nonzero unordered terms as `(m1, m2, term coefficient)`, ordered
    /// A-side path first, then H before V (so `|H,Aout>|V,Bout>` reads as in
    /// ket notation).
    pub fn terms(&self) -> Vec<(SingleMode, SingleMode, Complex64)> {
        let mut order = self.pathset.modes();
        order.sort_by_key(|m| (m.path.slot(), m.pol.index()));
        let mut out = Vec::new();
        for (k, &m1) in order.iter().enumerate() {
            for &m2 in &order[k..] {
                let c = self.term_coefficient(m1, m2);
                if c.norm() >= DISPLAY_ZERO {
                    out.push((m1, m2, c));
                }
            }
        }
        out
    }
}

impl fmt::Display for TwoPhotonState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let terms = self.terms();
        for (k, (m1, m2, c)) in terms.iter().enumerate() {
            if k > 0 {
                write!(f, " + ")?;
            }
            write!(f, "({:.6}{:+.6}i)|{}>|{}>", c.re, c.im, m1, m2)?;
        }
        Ok(())
    }
}

fn norm_sqr(amp: &Amplitudes) -> f64 {
    amp.iter().flatten().map(|a| a.norm_sqr()).sum()
}

fn check_mode(pathset: PathSet, m: SingleMode) -> Result<()> {
    if m.path.path_set() != pathset {
        return Err(Error::PathSetMismatch {
            expected: pathset,
            found: m.path.path_set(),
        });
    }
    Ok(())
}

fn mode(pol: Polarization, path: PathMode) -> SingleMode {
    SingleMode::new(pol, path)
}

/// The symmetric four-term state of two orthogonally polarized photons
/// behind two slits, every ordered slot weighted `1/(2 sqrt 2)`.
pub fn make_state_eq1() -> TwoPhotonState {
    use PathMode::{A, B};
    use Polarization::{H, V};
    let c = Complex64::new(1.0 / (2.0 * SQRT_2), 0.0);
    let terms = [
        (mode(H, A), mode(V, A), c),
        (mode(H, B), mode(V, B), c),
        (mode(H, A), mode(V, B), c),
        (mode(H, B), mode(V, A), c),
    ];
    TwoPhotonState::from_terms(PathSet::Input, &terms).expect("nonzero by construction")
}

/// Spatially correlated pair: `cos(eps)|H,A>|V,A> + sin(eps)|H,B>|V,B>`.
///
/// `eps = pi/4` is the balanced two-slit state; other values model unequal
/// pump intensity on the two slits.
pub fn make_state_eq2(epsilon: f64) -> Result<TwoPhotonState> {
    use PathMode::{A, B};
    use Polarization::{H, V};
    if !(0.0..=FRAC_PI_2).contains(&epsilon) {
        return Err(Error::out_of_range("epsilon", epsilon, "0 <= epsilon <= pi/2"));
    }
    let terms = [
        (mode(H, A), mode(V, A), Complex64::new(epsilon.cos(), 0.0)),
        (mode(H, B), mode(V, B), Complex64::new(epsilon.sin(), 0.0)),
    ];
    TwoPhotonState::from_terms(PathSet::Input, &terms)
}

/// `(|H,Aout>|V,Bout> + e^{i phase}|V,Aout>|H,Bout>)/sqrt 2`.
///
/// `phase = 0` is the triplet, `phase = pi` the singlet.
pub fn make_bell(phase: f64) -> TwoPhotonState {
    use PathMode::{Aout, Bout};
    use Polarization::{H, V};
    let terms = [
        (mode(H, Aout), mode(V, Bout), Complex64::new(FRAC_1_SQRT_2, 0.0)),
        (
            mode(V, Aout),
            mode(H, Bout),
            Complex64::from_polar(FRAC_1_SQRT_2, phase),
        ),
    ];
    TwoPhotonState::from_terms(PathSet::Output, &terms).expect("nonzero by construction")
}

/// `<s1|s2>`, conjugate-linear in `s1`.
pub fn inner_product(s1: &TwoPhotonState, s2: &TwoPhotonState) -> Result<Complex64> {
    if s1.pathset != s2.pathset {
        return Err(Error::PathSetMismatch {
            expected: s1.pathset,
            found: s2.pathset,
        });
    }
    Ok(s1
        .amp
        .iter()
        .flatten()
        .zip(s2.amp.iter().flatten())
        .map(|(a, b)| a.conj() * b)
        .sum())
}

pub fn normalize(s: &TwoPhotonState) -> Result<TwoPhotonState> {
    TwoPhotonState::normalize_raw(s.pathset, s.amp)
}
