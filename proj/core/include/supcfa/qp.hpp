#pragma once

// Box-constrained concave QP over the hinge multipliers, the Lagrange dual
// of the max-margin problem for W at fixed projections:
//
//   max  -½ αᵀAα - αᵀBγ - ½ γᵀGγ + h·Σ(α_i + γ_i)
//   s.t. 0 ≤ α_i ≤ C1,  0 ≤ γ_i ≤ C1
//
// with A_ij = (y_i·y_j)(u_i·u_j), B_ij = (y_i·y_j)(u_i·v_j),
// G_ij = (y_i·y_j)(v_i·v_j), where u_i, v_i are the projected image and text
// features. Written as -½ xᵀMx + h·1ᵀx with x = [α; γ] and
// M = [[A, B], [Bᵀ, G]], the Gram matrix of the vectors y_i⊗u_i, y_i⊗v_i.
// At the optimum the value equals ½‖W‖² + C1·Σ(ξ_i + ε_i) for
// W = Σ α_i u_iᵀy_i + Σ γ_i v_iᵀy_i.

#include <cstddef>
#include <optional>
#include <vector>

#include "supcfa/tensor.hpp"

namespace supcfa {

struct DualState {
    std::vector<double> alpha;
    std::vector<double> gamma;

    static DualState zeros(std::size_t n) { return {std::vector<double>(n, 0.0), std::vector<double>(n, 0.0)}; }
    std::size_t size() const noexcept { return alpha.size(); }
    bool feasible(double c1) const;

    friend bool operator==(const DualState&, const DualState&) = default;
};

struct QpProblem {
    Matrix gram_ii; // A
    Matrix gram_it; // B
    Matrix gram_tt; // G
    double margin_h = 1.0;
    double box_c1 = 1.0;

    std::size_t size() const noexcept { return gram_ii.rows(); }

    double objective(const DualState& x) const;

    /// Gradient of the objective, in the order (d/dα, d/dγ).
    DualState gradient(const DualState& x) const;

    /// Largest KKT violation: |g| in the interior, max(g, 0) at 0, max(-g, 0) at C1.
    double max_projected_gradient(const DualState& x) const;

    /// The 2n x 2n matrix M = [[A, B], [Bᵀ, G]].
    Matrix stacked() const;
};

/// projected_images and projected_texts are n x d, labels is n x m (±1).
QpProblem build_qp(const Matrix& projected_images, const Matrix& projected_texts, const Matrix& labels, double h,
                   double c1);

struct QpOptions {
    double tol = 1e-8;
    std::size_t max_sweeps = 0; // 0 selects 10·n
};

struct QpResult {
    DualState duals;
    double objective = 0.0;
    double max_projected_gradient = 0.0;
    std::size_t sweeps = 0;
    bool converged = false;
};

/// Projected exact coordinate ascent, sweeping α_1…α_n then γ_1…γ_n. Each
/// step maximizes the scalar concave quadratic in one coordinate and clips
/// to [0, C1], so the objective never decreases. Warm starts are clipped into
/// the box first. If the sweep cap is hit, the last iterate is returned with
/// converged = false.
QpResult solve_qp(const QpProblem& problem, const std::optional<DualState>& warm_start = std::nullopt,
                  const QpOptions& options = {});

/// Verification oracle for 2n ≤ 6: exhaustive grid over {0, C1/g, …, C1}^{2n}
/// refined by one pass of exact per-coordinate maximization, compared against
/// an enumeration of every face of the box (each free set solved exactly).
/// Returns whichever point scores higher. Throws std::invalid_argument for
/// larger instances.
DualState brute_force_qp(const QpProblem& problem, std::size_t grid_steps);

} // namespace supcfa
