//! Fixed workloads shared by the benchmarks.

use wegner_core::{
    assemble, AssemblyOptions, CovarianceKernel, DiscreteHamiltonian, FieldSampler, GridSpec,
    InteractionPotential, TwoParticleBox,
};

/// Symmetric one-dimensional box of half-side `l` centred at the origin.
pub fn box_1d(l: f64) -> TwoParticleBox {
    TwoParticleBox::symmetric(vec![0.0], l).expect("valid box")
}

pub fn node_grid(bx: &TwoParticleBox, h: f64) -> GridSpec {
    GridSpec::interior_nodes(&bx.shadow(), h).expect("aligned grid")
}

pub fn cell_grid(bx: &TwoParticleBox, h: f64) -> GridSpec {
    GridSpec::cells(&bx.shadow(), h).expect("aligned grid")
}

pub fn kernel() -> CovarianceKernel {
    CovarianceKernel::exponential(1.0, 0.5)
}

/// Operator with one Gaussian field sample and a square-well interaction.
pub fn hamiltonian(l: f64, h: f64) -> DiscreteHamiltonian {
    let bx = box_1d(l);
    let grid = node_grid(&bx, h);
    let v = FieldSampler::new(&kernel(), grid.clone())
        .expect("factorizable kernel")
        .sample_stream(1, 0);
    assemble(
        &bx,
        &grid,
        &InteractionPotential::square(1.0, 0.5),
        &v,
        &AssemblyOptions::default(),
    )
    .expect("assembly")
}
