//! Polarization-qubit and two-qubit linear algebra: states, projectors,
//! frame rotation, tensor products, fidelity and density-matrix validation.
//!
//! Everything is fixed-size (2x2 / 4x4 complex) and hand-rolled; eigenvalues
//! come from a cyclic Jacobi sweep, which is exact enough at this size.

use num_complex::Complex64 as C64;

use crate::{Error, Result};

/// Tolerance for "exact" state/operator identities.
pub const EPS: f64 = 1e-12;

const INV_SQRT2: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// 2x2 complex matrix, row major.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat2(pub [[C64; 2]; 2]);

/// 4x4 complex matrix, row major, over the ordered basis {HH, HV, VH, VV}.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat4(pub [[C64; 4]; 4]);

impl Mat2 {
    pub fn zero() -> Self {
        Mat2([[C64::new(0.0, 0.0); 2]; 2])
    }

    pub fn identity() -> Self {
        let mut m = Self::zero();
        m.0[0][0] = C64::new(1.0, 0.0);
        m.0[1][1] = C64::new(1.0, 0.0);
        m
    }

    pub fn trace(&self) -> C64 {
        self.0[0][0] + self.0[1][1]
    }

    pub fn mul(&self, rhs: &Mat2) -> Mat2 {
        let mut out = Mat2::zero();
        for i in 0..2 {
            for j in 0..2 {
                let mut s = C64::new(0.0, 0.0);
                for k in 0..2 {
                    s += self.0[i][k] * rhs.0[k][j];
                }
                out.0[i][j] = s;
            }
        }
        out
    }

    pub fn add(&self, rhs: &Mat2) -> Mat2 {
        let mut out = *self;
        for i in 0..2 {
            for j in 0..2 {
                out.0[i][j] += rhs.0[i][j];
            }
        }
        out
    }
}

impl Mat4 {
    pub fn zero() -> Self {
        Mat4([[C64::new(0.0, 0.0); 4]; 4])
    }

    pub fn identity() -> Self {
        let mut m = Self::zero();
        for i in 0..4 {
            m.0[i][i] = C64::new(1.0, 0.0);
        }
        m
    }

    pub fn trace(&self) -> C64 {
        (0..4).map(|i| self.0[i][i]).sum()
    }

    pub fn mul(&self, rhs: &Mat4) -> Mat4 {
        let mut out = Mat4::zero();
        for i in 0..4 {
            for j in 0..4 {
                let mut s = C64::new(0.0, 0.0);
                for k in 0..4 {
                    s += self.0[i][k] * rhs.0[k][j];
                }
                out.0[i][j] = s;
            }
        }
        out
    }

    pub fn scale(&self, c: f64) -> Mat4 {
        let mut out = *self;
        for row in out.0.iter_mut() {
            for v in row.iter_mut() {
                *v *= c;
            }
        }
        out
    }

    pub fn add(&self, rhs: &Mat4) -> Mat4 {
        let mut out = *self;
        for i in 0..4 {
            for j in 0..4 {
                out.0[i][j] += rhs.0[i][j];
            }
        }
        out
    }
}

/// Single polarization qubit |psi> = a_H |H> + a_V |V>.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PureQubitState {
    pub amps: [C64; 2],
}

impl PureQubitState {
    /// Builds a state, enforcing unit norm to within [`EPS`].
    pub fn new(a_h: C64, a_v: C64) -> Result<Self> {
        let st = PureQubitState { amps: [a_h, a_v] };
        if (st.norm_sqr() - 1.0).abs() > EPS {
            return Err(Error::invalid(format!(
                "qubit state norm^2 = {} is not 1",
                st.norm_sqr()
            )));
        }
        Ok(st)
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps[0].norm_sqr() + self.amps[1].norm_sqr()
    }
}

/// Two-photon polarization state over the ordered basis {HH, HV, VH, VV};
/// the first factor is the XX photon, the second the X photon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoQubitPureState {
    pub amps: [C64; 4],
}

impl TwoQubitPureState {
    pub fn new(amps: [C64; 4]) -> Result<Self> {
        let st = TwoQubitPureState { amps };
        if (st.norm_sqr() - 1.0).abs() > EPS {
            return Err(Error::invalid(format!(
                "two-qubit state norm^2 = {} is not 1",
                st.norm_sqr()
            )));
        }
        Ok(st)
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    /// The Bell state (|HH> + |VV>)/sqrt(2).
    pub fn phi_plus() -> Self {
        let z = C64::new(0.0, 0.0);
        let a = C64::new(INV_SQRT2, 0.0);
        TwoQubitPureState { amps: [a, z, z, a] }
    }

    /// Outer product |psi><psi|.
    pub fn density(&self) -> TwoQubitDensityMatrix {
        let mut m = Mat4::zero();
        for i in 0..4 {
            for j in 0..4 {
                m.0[i][j] = self.amps[i] * self.amps[j].conj();
            }
        }
        TwoQubitDensityMatrix { entries: m }
    }
}

/// 4x4 density matrix over {HH, HV, VH, VV}.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoQubitDensityMatrix {
    pub entries: Mat4,
}

/// Invariant measurements reported by [`validate_density_matrix`].
#[derive(Debug, Clone, Copy)]
pub struct DensityDiagnostics {
    pub trace_error: f64,
    pub hermiticity_error: f64,
    pub min_eigenvalue: f64,
}

impl DensityDiagnostics {
    /// True when all three invariants hold at the documented tolerances.
    pub fn is_valid(&self) -> bool {
        self.trace_error <= EPS && self.hermiticity_error <= EPS && self.min_eigenvalue >= -1e-10
    }
}

impl TwoQubitDensityMatrix {
    /// The classically correlated mixture (|HH><HH| + |VV><VV|)/2.
    pub fn classical() -> Self {
        let mut m = Mat4::zero();
        m.0[0][0] = C64::new(0.5, 0.0);
        m.0[3][3] = C64::new(0.5, 0.0);
        TwoQubitDensityMatrix { entries: m }
    }

    /// The maximally mixed state I/4.
    pub fn maximally_mixed() -> Self {
        TwoQubitDensityMatrix {
            entries: Mat4::identity().scale(0.25),
        }
    }

    pub fn validate(&self) -> DensityDiagnostics {
        validate_density_matrix(self)
    }
}

/// Measurement-basis label for a polarization analyzer.
///
/// Conventions: D = (H+V)/sqrt2, A = (H-V)/sqrt2, R = (H+iV)/sqrt2,
/// L = (H-iV)/sqrt2, and `Linear(chi)` = cos(chi) H + sin(chi) V.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BasisLabel {
    H,
    V,
    D,
    A,
    R,
    L,
    Linear(f64),
}

impl BasisLabel {
    /// The orthogonal analyzer setting (the other output of the same basis).
    pub fn orthogonal(&self) -> BasisLabel {
        match *self {
            BasisLabel::H => BasisLabel::V,
            BasisLabel::V => BasisLabel::H,
            BasisLabel::D => BasisLabel::A,
            BasisLabel::A => BasisLabel::D,
            BasisLabel::R => BasisLabel::L,
            BasisLabel::L => BasisLabel::R,
            BasisLabel::Linear(chi) => BasisLabel::Linear(chi + std::f64::consts::FRAC_PI_2),
        }
    }
}

impl std::fmt::Display for BasisLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BasisLabel::H => write!(f, "H"),
            BasisLabel::V => write!(f, "V"),
            BasisLabel::D => write!(f, "D"),
            BasisLabel::A => write!(f, "A"),
            BasisLabel::R => write!(f, "R"),
            BasisLabel::L => write!(f, "L"),
            BasisLabel::Linear(chi) => write!(f, "lin:{chi}"),
        }
    }
}

/// Unit-norm amplitudes of the labelled analyzer state.
pub fn basis_state(label: BasisLabel) -> PureQubitState {
    let s2 = INV_SQRT2;
    let (a, b) = match label {
        BasisLabel::H => (C64::new(1.0, 0.0), C64::new(0.0, 0.0)),
        BasisLabel::V => (C64::new(0.0, 0.0), C64::new(1.0, 0.0)),
        BasisLabel::D => (C64::new(s2, 0.0), C64::new(s2, 0.0)),
        BasisLabel::A => (C64::new(s2, 0.0), C64::new(-s2, 0.0)),
        BasisLabel::R => (C64::new(s2, 0.0), C64::new(0.0, s2)),
        BasisLabel::L => (C64::new(s2, 0.0), C64::new(0.0, -s2)),
        BasisLabel::Linear(chi) => (C64::new(chi.cos(), 0.0), C64::new(chi.sin(), 0.0)),
    };
    PureQubitState { amps: [a, b] }
}

/// Projector P = |psi><psi| onto a unit-norm state.
pub fn projector(state: &PureQubitState) -> Result<Mat2> {
    if (state.norm_sqr() - 1.0).abs() > EPS {
        return Err(Error::invalid(format!(
            "projector input has norm^2 = {}",
            state.norm_sqr()
        )));
    }
    let mut m = Mat2::zero();
    for i in 0..2 {
        for j in 0..2 {
            m.0[i][j] = state.amps[i] * state.amps[j].conj();
        }
    }
    Ok(m)
}

fn rotation(theta: f64) -> Mat2 {
    let (s, c) = theta.sin_cos();
    Mat2([
        [C64::new(c, 0.0), C64::new(-s, 0.0)],
        [C64::new(s, 0.0), C64::new(c, 0.0)],
    ])
}

/// Applies the real frame rotation R(theta) to a single-qubit state, v -> R v.
pub fn rotate_state(state: &PureQubitState, theta: f64) -> PureQubitState {
    let r = rotation(theta);
    let a = r.0[0][0] * state.amps[0] + r.0[0][1] * state.amps[1];
    let b = r.0[1][0] * state.amps[0] + r.0[1][1] * state.amps[1];
    PureQubitState { amps: [a, b] }
}

/// Applies the frame rotation to a single-qubit operator, P -> R P R^T.
pub fn rotate_operator(op: &Mat2, theta: f64) -> Mat2 {
    let r = rotation(theta);
    let rt = Mat2([
        [r.0[0][0], r.0[1][0]],
        [r.0[0][1], r.0[1][1]],
    ]);
    r.mul(op).mul(&rt)
}

/// Applies the frame rotation to each qubit factor of a two-qubit operator.
pub fn rotate_two_qubit_operator(op: &Mat4, theta: f64) -> Mat4 {
    let r = rotation(theta);
    let rr = tensor(&r, &r);
    let mut rrt = Mat4::zero();
    for i in 0..4 {
        for j in 0..4 {
            rrt.0[i][j] = rr.0[j][i];
        }
    }
    rr.mul(op).mul(&rrt)
}

/// Applies the frame rotation to each qubit factor of a two-qubit state.
pub fn rotate_two_qubit_state(state: &TwoQubitPureState, theta: f64) -> TwoQubitPureState {
    let r = rotation(theta);
    let rr = tensor(&r, &r);
    let mut amps = [C64::new(0.0, 0.0); 4];
    for (i, out) in amps.iter_mut().enumerate() {
        for k in 0..4 {
            *out += rr.0[i][k] * state.amps[k];
        }
    }
    TwoQubitPureState { amps }
}

/// Kronecker product; the first factor acts on the XX photon, the second on X.
pub fn tensor(a: &Mat2, b: &Mat2) -> Mat4 {
    let mut out = Mat4::zero();
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                for l in 0..2 {
                    out.0[2 * i + k][2 * j + l] = a.0[i][j] * b.0[k][l];
                }
            }
        }
    }
    out
}

/// Overlap fidelity <psi| rho |psi>.
///
/// `rho` must satisfy the density-matrix invariants; its imaginary part in the
/// quadratic form is required to vanish to within [`EPS`].
pub fn fidelity(rho: &TwoQubitDensityMatrix, psi: &TwoQubitPureState) -> Result<f64> {
    let diag = rho.validate();
    if !diag.is_valid() {
        return Err(Error::invalid(format!(
            "density matrix invalid: trace_error={:.3e}, hermiticity_error={:.3e}, min_eig={:.3e}",
            diag.trace_error, diag.hermiticity_error, diag.min_eigenvalue
        )));
    }
    if (psi.norm_sqr() - 1.0).abs() > EPS {
        return Err(Error::invalid("fidelity: state not normalized".to_string()));
    }
    let mut val = C64::new(0.0, 0.0);
    for i in 0..4 {
        for j in 0..4 {
            val += psi.amps[i].conj() * rho.entries.0[i][j] * psi.amps[j];
        }
    }
    debug_assert!(val.im.abs() <= EPS);
    Ok(val.re)
}

/// Eigenvalues of a 4x4 Hermitian matrix by cyclic Jacobi rotations,
/// iterated until the off-diagonal norm falls below 1e-12 (ascending order).
///
/// The input is symmetrized first; a deliberately non-Hermitian input
/// therefore yields the spectrum of (A + A^dagger)/2.
pub fn hermitian_eigenvalues(m: &Mat4) -> [f64; 4] {
    // symmetrize so rounding noise in the caller cannot stall convergence
    let mut a = Mat4::zero();
    for i in 0..4 {
        for j in 0..4 {
            a.0[i][j] = 0.5 * (m.0[i][j] + m.0[j][i].conj());
        }
    }

    let off = |a: &Mat4| -> f64 {
        let mut s = 0.0;
        for i in 0..4 {
            for j in 0..4 {
                if i != j {
                    s += a.0[i][j].norm_sqr();
                }
            }
        }
        s.sqrt()
    };

    for _ in 0..60 {
        if off(&a) <= 1e-12 {
            break;
        }
        for p in 0..3 {
            for q in (p + 1)..4 {
                let apq = a.0[p][q];
                let r = apq.norm();
                if r < 1e-300 {
                    continue;
                }
                // phase factor making the pivot entry real, then a real
                // Jacobi rotation in the (p, q) plane
                let u = apq / r;
                let alpha = a.0[p][p].re;
                let beta = a.0[q][q].re;
                let tau = (beta - alpha) / (2.0 * r);
                let t = if tau == 0.0 {
                    1.0
                } else {
                    tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;

                // columns of the combined unitary J = diag-phase * rotation:
                // J[p] = (c, -s*conj(u)), J[q] = (s, c*conj(u)) in the (p,q) plane
                let jc_pp = C64::new(c, 0.0);
                let jc_pq = C64::new(s, 0.0);
                let jc_qp = C64::new(-s, 0.0) * u.conj();
                let jc_qq = C64::new(c, 0.0) * u.conj();

                // A <- J^dagger A J, applied as row then column updates
                for k in 0..4 {
                    let akp = a.0[k][p];
                    let akq = a.0[k][q];
                    a.0[k][p] = akp * jc_pp + akq * jc_qp;
                    a.0[k][q] = akp * jc_pq + akq * jc_qq;
                }
                for k in 0..4 {
                    let apk = a.0[p][k];
                    let aqk = a.0[q][k];
                    a.0[p][k] = jc_pp.conj() * apk + jc_qp.conj() * aqk;
                    a.0[q][k] = jc_pq.conj() * apk + jc_qq.conj() * aqk;
                }
            }
        }
    }

    let mut ev = [a.0[0][0].re, a.0[1][1].re, a.0[2][2].re, a.0[3][3].re];
    ev.sort_by(|x, y| x.partial_cmp(y).unwrap());
    ev
}

/// Reports the three density-matrix invariants without judging them.
pub fn validate_density_matrix(rho: &TwoQubitDensityMatrix) -> DensityDiagnostics {
    let m = &rho.entries;
    let trace_error = (m.trace().re - 1.0).abs().max(m.trace().im.abs());
    let mut herm = 0.0f64;
    for i in 0..4 {
        for j in 0..4 {
            herm = herm.max((m.0[i][j] - m.0[j][i].conj()).norm());
        }
    }
    let ev = hermitian_eigenvalues(m);
    DensityDiagnostics {
        trace_error,
        hermiticity_error: herm,
        min_eigenvalue: ev[0],
    }
}
