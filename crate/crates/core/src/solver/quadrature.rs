use super::SolverMesh;
use crate::error::{Error, Result};
use crate::spectral::{heat_semigroup, SpectralField};

/// `Identity` drops `e^{(t−s)Δ}` from the Duhamel rule (test hook).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeatFactor {
    Heat,
    Identity,
}

fn check(mesh: &SolverMesh, len: usize, exponent: f64) -> Result<()> {
    if !(exponent > -1.0) {
        return Err(Error::Exponents(format!("singular exponent {exponent} is not integrable at 0")));
    }
    if len != mesh.nodes() {
        return Err(Error::InvalidArgument(format!("{len} samples for {} mesh nodes", mesh.nodes())));
    }
    Ok(())
}

/// `Q_j ≈ ∫₀^{t_j} e^{(t_j−s)Δ} F(s) ds` at every node.
///
/// The first cell integrates `(s/t₁)^γ F(t₁)` exactly; later cells use the
/// left-point rule in `σ = √(s/T)`, so `Q_{j+1} = e^{(t_{j+1}−t_j)Δ}(Q_j + w_j F_j)`.
/// The sample at `t = 0` is never read.
pub fn duhamel_quadrature(mesh: &SolverMesh, samples: &[SpectralField], exponent: f64, heat: HeatFactor) -> Result<Vec<SpectralField>> {
    check(mesh, samples.len(), exponent)?;
    let mut out = Vec::with_capacity(mesh.nodes());
    out.push(SpectralField::zeros(samples[0].grid));
    let mut q = samples[1].scale(mesh.first_cell_weight(exponent));
    out.push(q.clone());
    for j in 1..mesh.steps {
        let acc = q.add(&samples[j].scale(mesh.rectangle_weight(j)));
        q = match heat {
            HeatFactor::Heat => heat_semigroup(&acc, mesh.times[j + 1] - mesh.times[j])?,
            HeatFactor::Identity => acc,
        };
        out.push(q.clone());
    }
    Ok(out)
}

/// The same rule for scalar integrands, without the heat factor.
pub fn cumulative_scalar(mesh: &SolverMesh, values: &[f64], exponent: f64) -> Result<Vec<f64>> {
    check(mesh, values.len(), exponent)?;
    let mut out = vec![0.0, mesh.first_cell_weight(exponent) * values[1]];
    for j in 1..mesh.steps {
        out.push(out[j] + mesh.rectangle_weight(j) * values[j]);
    }
    Ok(out)
}
