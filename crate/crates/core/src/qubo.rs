//! The regression QUBO `min_z zᵀAz + bᵀz` with `A = PᵀGP`, `b = −2Pᵀm`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::dataset::GramSystem;
use crate::error::{invalid, Result};
use crate::precision::PrecisionSpec;
use crate::regression::WeightVector;

/// Binary selectors `ẑ`, laid out as `D` blocks of `K` bits.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(transparent))]
pub struct BinaryAssignment(Vec<u8>);

impl BinaryAssignment {
    pub fn from_bits(bits: Vec<u8>) -> Result<Self> {
        if let Some(pos) = bits.iter().position(|&b| b > 1) {
            return Err(invalid(format!(
                "bit {pos} is {}, expected 0 or 1",
                bits[pos]
            )));
        }
        Ok(BinaryAssignment(bits))
    }

    pub fn zeros(len: usize) -> Self {
        BinaryAssignment(vec![0; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn bits(&self) -> &[u8] {
        &self.0
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        self.0[i] == 1
    }

    #[inline]
    pub fn flip(&mut self, i: usize) {
        self.0[i] ^= 1;
    }
}

/// A dense QUBO: `energy(z) = zᵀAz + bᵀz`, with `offset` kept aside so that
/// `energy + offset` is the regression RSS.
#[derive(Debug, Clone, PartialEq)]
pub struct QuboProblem {
    matrix: DMatrix<f64>,
    linear: Vec<f64>,
    offset: f64,
    precision: Option<PrecisionSpec>,
}

impl QuboProblem {
    /// Wraps a square `matrix`, which must be symmetric to 1e-9 relative.
    pub fn new(matrix: DMatrix<f64>, linear: Vec<f64>, offset: f64) -> Result<Self> {
        let m = linear.len();
        if matrix.nrows() != m || matrix.ncols() != m {
            return Err(invalid(format!(
                "matrix is {}x{}, linear term has {m} entries",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        if matrix.iter().chain(&linear).any(|v| !v.is_finite()) || !offset.is_finite() {
            return Err(invalid("QUBO coefficients must be finite"));
        }
        let scale = matrix.amax().max(f64::MIN_POSITIVE);
        for i in 0..m {
            for j in i + 1..m {
                if (matrix[(i, j)] - matrix[(j, i)]).abs() > 1e-9 * scale {
                    return Err(invalid(format!("matrix is not symmetric at ({i}, {j})")));
                }
            }
        }
        Ok(QuboProblem {
            matrix,
            linear,
            offset,
            precision: None,
        })
    }

    /// Builds from upper-triangular couplers `(i, j, v)` with `i < j`; each
    /// coupler is split evenly between `A[i][j]` and `A[j][i]`.
    pub fn from_couplers(
        linear: Vec<f64>,
        couplers: &[(usize, usize, f64)],
        offset: f64,
    ) -> Result<Self> {
        let m = linear.len();
        let mut matrix = DMatrix::zeros(m, m);
        for &(i, j, v) in couplers {
            if i >= j || j >= m {
                return Err(invalid(format!(
                    "coupler ({i}, {j}) is not upper-triangular within {m}"
                )));
            }
            matrix[(i, j)] += v / 2.0;
            matrix[(j, i)] += v / 2.0;
        }
        Self::new(matrix, linear, offset)
    }

    pub fn dim(&self) -> usize {
        self.linear.len()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn linear(&self) -> &[f64] {
        &self.linear
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    /// The encoding this problem was built from, if any.
    pub fn precision(&self) -> Option<&PrecisionSpec> {
        self.precision.as_ref()
    }

    /// `zᵀAz + bᵀz`, excluding the offset.
    pub fn energy(&self, z: &BinaryAssignment) -> f64 {
        debug_assert_eq!(z.len(), self.dim());
        let on: Vec<usize> = (0..z.len()).filter(|&i| z.get(i)).collect();
        let mut e = 0.0;
        for &i in &on {
            let mut row = 0.0;
            for &j in &on {
                row += self.matrix[(i, j)];
            }
            e += row + self.linear[i];
        }
        e
    }

    /// Diagonal folded into the linear term: `b_i + A_ii`.
    pub fn folded_linear(&self) -> Vec<f64> {
        (0..self.dim())
            .map(|i| self.linear[i] + self.matrix[(i, i)])
            .collect()
    }

    /// Upper-triangular couplers `(i, j, A_ij + A_ji)` for `i < j`, zeros skipped.
    pub fn couplers(&self) -> Vec<(usize, usize, f64)> {
        let m = self.dim();
        let mut out = Vec::new();
        for i in 0..m {
            for j in i + 1..m {
                let v = self.matrix[(i, j)] + self.matrix[(j, i)];
                if v != 0.0 {
                    out.push((i, j, v));
                }
            }
        }
        out
    }

    /// Multiplies `A`, `b` and the offset by `c`.
    pub fn scaled(&self, c: f64) -> QuboProblem {
        QuboProblem {
            matrix: &self.matrix * c,
            linear: self.linear.iter().map(|v| v * c).collect(),
            offset: self.offset * c,
            precision: self.precision.clone(),
        }
    }
}

/// Assembles the regression QUBO for `stats` under encoding `spec`.
///
/// Block `(i, j)` of `A` is `G_ij · π_i π_jᵀ`; only the upper triangle is
/// computed and then mirrored, so `A` is exactly symmetric.
pub fn build_qubo(stats: &GramSystem, spec: &PrecisionSpec) -> Result<QuboProblem> {
    let d = stats.dim();
    if spec.dim() != d {
        return Err(invalid(format!(
            "precision spec covers {} coefficients, data has {d}",
            spec.dim()
        )));
    }
    let k = spec.k();
    let m = d * k;
    let mut a = DMatrix::zeros(m, m);
    for i in 0..d {
        let pi = spec.vector(i);
        for j in i..d {
            let pj = spec.vector(j);
            let g = stats.gram[(i, j)];
            for (r, &pa) in pi.iter().enumerate() {
                let row = i * k + r;
                let gpa = g * pa;
                for (c, &pb) in pj.iter().enumerate() {
                    let col = j * k + c;
                    if col < row {
                        continue;
                    }
                    let v = gpa * pb;
                    a[(row, col)] = v;
                    a[(col, row)] = v;
                }
            }
        }
    }
    let mut linear = Vec::with_capacity(m);
    for i in 0..d {
        let mi = stats.moment[i];
        for &pa in spec.vector(i) {
            linear.push(-2.0 * pa * mi);
        }
    }
    Ok(QuboProblem {
        matrix: a,
        linear,
        offset: stats.y_sq,
        precision: Some(spec.clone()),
    })
}

/// `w_i = Σ_k π_ik · z_ik`, i.e. `w = P z`.
pub fn decode_weights(z: &BinaryAssignment, spec: &PrecisionSpec) -> Result<WeightVector> {
    if z.len() != spec.num_vars() {
        return Err(invalid(format!(
            "assignment has {} bits, encoding needs {}",
            z.len(),
            spec.num_vars()
        )));
    }
    let k = spec.k();
    let w = spec
        .vectors()
        .enumerate()
        .map(|(i, pi)| {
            pi.iter()
                .enumerate()
                .filter(|(c, _)| z.get(i * k + c))
                .map(|(_, v)| v)
                .sum()
        })
        .collect();
    Ok(WeightVector::new(w))
}
