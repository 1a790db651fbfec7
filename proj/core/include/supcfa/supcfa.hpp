#pragma once

// Supervised cross-modal factor analysis.
//
// Learns orthonormal projections Ω_I (d_I x d) and Ω_T (d_T x d) of the two
// modalities into a shared d-dimensional space together with a linear
// predictor W (d x m), minimizing
//
//   ½‖W‖²_F + C1·Σ_i (ξ_i + ε_i) + C2·Σ_i ‖I_iΩ_I − T_iΩ_T‖²
//
// where ξ_i = max(0, h − (I_iΩ_I) W y_iᵀ) and ε_i likewise for the text.
// Training alternates a dual QP over the hinge multipliers (Ω fixed) with an
// orthogonal Procrustes step solved by one SVD (duals fixed).

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "supcfa/dataset.hpp"
#include "supcfa/qp.hpp"
#include "supcfa/tensor.hpp"

namespace supcfa {

struct Hyperparams {
    double c1 = 1.0;
    double c2 = 1.0;
    double h = 1.0;
    std::size_t shared_dim = 0;
    std::size_t max_iters = 100;
    double qp_tol = 1e-8;
    double outer_tol = 1e-4;        // relative objective change; 0 disables early stopping
    std::size_t qp_max_sweeps = 0;  // 0 selects 10·n

    /// Throws std::invalid_argument on non-positive c1/c2/h/tolerances,
    /// d = 0, or d > min(d_image, d_text).
    void validate(std::size_t d_image, std::size_t d_text) const;
};

struct OmegaPair {
    Matrix image; // d_I x d
    Matrix text;  // d_T x d
};

struct ModelParams {
    Matrix omega_image;
    Matrix omega_text;
    Matrix w;

    std::size_t shared_dim() const noexcept { return w.rows(); }
    std::size_t num_classes() const noexcept { return w.cols(); }

    /// Throws std::runtime_error when shapes disagree or an omega deviates
    /// from orthonormal columns by more than `tol`.
    void check_invariants(double tol = 1e-8) const;
};

struct TraceRecord {
    std::size_t iteration = 0;
    double primal_objective = 0.0;
    double qp_dual_objective = 0.0;
    bool qp_converged = false;
    std::size_t qp_sweeps = 0;
    double orthonormality_error = 0.0; // max over both omegas after the update
    double elapsed_seconds = 0.0;
};

using TrainTrace = std::vector<TraceRecord>;

struct Initialization {
    enum class Kind { unsupervised, random } kind = Kind::unsupervised;
    std::uint64_t seed = 0;

    static Initialization unsupervised() { return {}; }
    static Initialization random(std::uint64_t seed) { return {Kind::random, seed}; }
};

struct TrainResult {
    ModelParams params;
    TrainTrace trace;
    DualState duals;         // from the final QP at the returned omegas
    bool qp_converged = true; // false if any QP solve hit its sweep cap
};

/// u = x·Ω.
std::vector<double> project(std::span<const double> features, const Matrix& omega);

/// Ω_I, Ω_T maximizing Tr(Ω_Iᵀ C Ω_T) with C = Σ_i I_iᵀT_i, i.e. minimizing
/// Σ_i ‖I_iΩ_I − T_iΩ_T‖² under orthonormality.
OmegaPair fit_unsupervised_cfa(const Dataset& dataset, std::size_t d);

/// Σ_i I_iᵀ T_i.
Matrix coupling_matrix(const Dataset& dataset);

/// Z = 2·c2·Σ_i I_iᵀT_i + Σ_{i,j} α_iγ_j (y_i·y_j) I_iᵀT_j, the matrix whose
/// trace maximization is the projection step for fixed duals.
Matrix compute_z(const Dataset& dataset, const DualState& duals, double c2);

/// Top-d left/right singular vectors of z.
OmegaPair update_omegas(const Matrix& z, std::size_t d);

/// W = Σ_i α_i (I_iΩ_I)ᵀ y_i + Σ_i γ_i (T_iΩ_T)ᵀ y_i.
Matrix recover_w(const Dataset& dataset, const DualState& duals, const Matrix& omega_image, const Matrix& omega_text);

/// Objective with the slacks at their minimal feasible values.
double primal_objective(const Dataset& dataset, const ModelParams& params, const Hyperparams& hp);

/// QP at fixed omegas, using the projected features of `dataset`.
QpProblem build_qp_for(const Dataset& dataset, const Matrix& omega_image, const Matrix& omega_text,
                       const Hyperparams& hp);

/// Alternating trainer. Each iteration solves the dual QP at the current
/// omegas (warm-started), then replaces the omegas by the SVD of Z. Stops
/// after max_iters or when the primal objective's relative change drops below
/// outer_tol. W comes from one last QP at the final omegas.
TrainResult fit_supervised(const Dataset& dataset, const Hyperparams& hp,
                           const Initialization& init = Initialization::unsupervised());

} // namespace supcfa
