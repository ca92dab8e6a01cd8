//! Unitary single-photon optical elements and their action on photon pairs.
//!
//! The PBS, both arms, the double-passed QWPs and the recombination are folded
//! into one net map ([`roof_mirror_arm1`]) from the slit paths to the output
//! paths. All reflection phases are absorbed; the only physical relative phase
//! is the one owned by [`mirror_tilt`].

use num_complex::Complex64;

use crate::modes::{PathSet, Polarization, SingleMode, TwoPhotonState, MODE_DIM};
use crate::{Error, Result};

pub type Matrix4 = [[Complex64; MODE_DIM]; MODE_DIM];

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// A 4x4 unitary on the single-photon basis, `matrix[out][in]`.
///
/// `domain`/`codomain` of `None` mean the element acts on either path set
/// and leaves it unchanged (wave plates, identity).
#[derive(Debug, Clone, PartialEq)]
pub struct OpticalElement {
    matrix: Matrix4,
    label: String,
    domain: Option<PathSet>,
    codomain: Option<PathSet>,
}

impl OpticalElement {
    pub fn new(label: impl Into<String>, matrix: Matrix4, domain: Option<PathSet>, codomain: Option<PathSet>) -> Self {
        OpticalElement {
            matrix,
            label: label.into(),
            domain,
            codomain,
        }
    }

    pub fn matrix(&self) -> &Matrix4 {
        &self.matrix
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn domain(&self) -> Option<PathSet> {
        self.domain
    }

    pub fn codomain(&self) -> Option<PathSet> {
        self.codomain
    }

    fn output_set(&self, input: PathSet) -> PathSet {
        self.codomain.unwrap_or(input)
    }

    /// `M^dagger M = I` within `tol`.
    pub fn is_unitary(&self, tol: f64) -> bool {
        for i in 0..MODE_DIM {
            for j in 0..MODE_DIM {
                let dot: Complex64 = (0..MODE_DIM)
                    .map(|k| self.matrix[k][i].conj() * self.matrix[k][j])
                    .sum();
                let target = if i == j { ONE } else { ZERO };
                if (dot - target).norm() > tol {
                    return false;
                }
            }
        }
        true
    }

    /// `next` applied after `self`.
    pub fn then(&self, next: &OpticalElement) -> Result<OpticalElement> {
        if let (Some(out), Some(expected)) = (self.codomain, next.domain) {
            if out != expected {
                return Err(Error::PathSetMismatch { expected, found: out });
            }
        }
        let matrix = matmul(&next.matrix, &self.matrix);
        let domain = self.domain.or(next.domain);
        let codomain = next.codomain.or(self.codomain);
        Ok(OpticalElement::new(
            format!("{} -> {}", self.label, next.label),
            matrix,
            domain,
            codomain,
        ))
    }
}

pub fn matmul(a: &Matrix4, b: &Matrix4) -> Matrix4 {
    let mut out = [[ZERO; MODE_DIM]; MODE_DIM];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, slot) in row.iter_mut().enumerate() {
            *slot = (0..MODE_DIM).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

fn identity_matrix() -> Matrix4 {
    let mut m = [[ZERO; MODE_DIM]; MODE_DIM];
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = ONE;
    }
    m
}

fn idx(pol: Polarization, slot: usize) -> usize {
    pol.index() * 2 + slot
}

/// `U (x) U` acting on the pair: `amp'(i,j) = sum M(i,k) M(j,l) amp(k,l)`.
pub fn lift_apply(e: &OpticalElement, s: &TwoPhotonState) -> Result<TwoPhotonState> {
    if let Some(expected) = e.domain {
        if expected != s.pathset() {
            return Err(Error::PathSetMismatch {
                expected,
                found: s.pathset(),
            });
        }
    }
    let m = &e.matrix;
    let amp = s.amplitudes();
    // (M amp M^T), done as two 4x4 products.
    let mut half = [[ZERO; MODE_DIM]; MODE_DIM];
    for (i, row) in half.iter_mut().enumerate() {
        for (l, slot) in row.iter_mut().enumerate() {
            *slot = (0..MODE_DIM).map(|k| m[i][k] * amp[k][l]).sum();
        }
    }
    let mut out = [[ZERO; MODE_DIM]; MODE_DIM];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, slot) in row.iter_mut().enumerate() {
            *slot = (0..MODE_DIM).map(|l| half[i][l] * m[j][l]).sum();
        }
    }
    Ok(TwoPhotonState::from_parts(e.output_set(s.pathset()), out))
}

pub fn identity() -> OpticalElement {
    OpticalElement::new("identity", identity_matrix(), None, None)
}

/// Net interferometer map from the slit paths to the output paths.
///
/// V photons (arm with the roof mirror) swap sides, `A -> Bout`, `B -> Aout`;
/// H photons keep their side, `A -> Aout`, `B -> Bout`.
pub fn roof_mirror_arm1() -> OpticalElement {
    use Polarization::{H, V};
    let mut m = [[ZERO; MODE_DIM]; MODE_DIM];
    m[idx(H, 0)][idx(H, 0)] = ONE;
    m[idx(H, 1)][idx(H, 1)] = ONE;
    m[idx(V, 1)][idx(V, 0)] = ONE;
    m[idx(V, 0)][idx(V, 1)] = ONE;
    OpticalElement::new("interferometer", m, Some(PathSet::Input), Some(PathSet::Output))
}

/// Relabels `Aout -> A`, `Bout -> B`, so a state can be sent around again.
pub fn relabel_output_to_input() -> OpticalElement {
    OpticalElement::new(
        "relabel",
        identity_matrix(),
        Some(PathSet::Output),
        Some(PathSet::Input),
    )
}

/// Phase `e^{i phi}` on the `(H, B)` mode from tilting the plane mirror.
pub fn mirror_tilt(phi: f64) -> OpticalElement {
    let mut m = identity_matrix();
    m[idx(Polarization::H, 1)][idx(Polarization::H, 1)] = Complex64::from_polar(1.0, phi);
    OpticalElement::new(format!("tilt({phi})"), m, Some(PathSet::Input), Some(PathSet::Input))
}

/// Double-passed QWP: `H <-> V` on every path, no phase.
pub fn qwp_flip() -> OpticalElement {
    let mut m = [[ZERO; MODE_DIM]; MODE_DIM];
    for pol in Polarization::ALL {
        for slot in 0..2 {
            m[idx(pol.flipped(), slot)][idx(pol, slot)] = ONE;
        }
    }
    OpticalElement::new("qwp-flip", m, None, None)
}

/// Rotation of the polarization basis by `theta` on both paths:
/// `H -> cos H + sin V`, `V -> -sin H + cos V`.
pub fn hwp_rotation(theta: f64) -> OpticalElement {
    use Polarization::{H, V};
    let (s, c) = theta.sin_cos();
    let mut m = [[ZERO; MODE_DIM]; MODE_DIM];
    for slot in 0..2 {
        m[idx(H, slot)][idx(H, slot)] = Complex64::new(c, 0.0);
        m[idx(V, slot)][idx(H, slot)] = Complex64::new(s, 0.0);
        m[idx(H, slot)][idx(V, slot)] = Complex64::new(-s, 0.0);
        m[idx(V, slot)][idx(V, slot)] = Complex64::new(c, 0.0);
    }
    OpticalElement::new(format!("rotation({theta})"), m, None, None)
}

/// Image of a single basis mode, as `(mode, amplitude)` pairs with nonzero
/// amplitude.
pub fn image_of(e: &OpticalElement, input: SingleMode) -> Vec<(SingleMode, Complex64)> {
    let out_set = e.output_set(input.path.path_set());
    let col = input.index();
    (0..MODE_DIM)
        .filter(|&row| e.matrix[row][col].norm() > 0.0)
        .map(|row| (SingleMode::from_index(out_set, row), e.matrix[row][col]))
        .collect()
}
