#include "supcfa/supcfa.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>
#include <string>

#include "rng.hpp"

namespace supcfa {

namespace {

// Dense views of a dataset, built once per training run.
struct DataMatrices {
    Matrix images; // n x d_I
    Matrix texts;  // n x d_T
    Matrix labels; // n x m

    explicit DataMatrices(const Dataset& d)
        : images(d.image_matrix()), texts(d.text_matrix()), labels(d.label_matrix()) {}
};

// Rows of x scaled by the weights.
Matrix scale_rows(const Matrix& x, std::span<const double> weights) {
    Matrix out = x;
    for (std::size_t r = 0; r < x.rows(); ++r)
        for (double& v : out.row(r)) v *= weights[r];
    return out;
}

void require_duals(const DualState& duals, std::size_t n) {
    if (duals.alpha.size() != n || duals.gamma.size() != n) {
        throw std::invalid_argument("dual state has " + std::to_string(duals.alpha.size()) + "/" +
                                    std::to_string(duals.gamma.size()) + " entries for " + std::to_string(n) +
                                    " documents");
    }
}

Matrix z_from(const DataMatrices& m, const DualState& duals, double c2) {
    // Σ_{i,j} α_iγ_j (y_i·y_j) I_iᵀT_j = (Yᵀ diag(α) I)ᵀ (Yᵀ diag(γ) T)
    const Matrix weighted_images = matmul_tn(m.labels, scale_rows(m.images, duals.alpha)); // m x d_I
    const Matrix weighted_texts = matmul_tn(m.labels, scale_rows(m.texts, duals.gamma));   // m x d_T
    return (2.0 * c2) * matmul_tn(m.images, m.texts) + matmul_tn(weighted_images, weighted_texts);
}

Matrix w_from(const Matrix& projected_images, const Matrix& projected_texts, const Matrix& labels,
              const DualState& duals) {
    return matmul_tn(scale_rows(projected_images, duals.alpha), labels) +
           matmul_tn(scale_rows(projected_texts, duals.gamma), labels);
}

double primal_from(const DataMatrices& m, const ModelParams& params, const Hyperparams& hp) {
    const Matrix u = matmul(m.images, params.omega_image);
    const Matrix v = matmul(m.texts, params.omega_text);
    const Matrix su = matmul(u, params.w); // n x m scores
    const Matrix sv = matmul(v, params.w);
    double hinge = 0.0;
    double distance = 0.0;
    for (std::size_t i = 0; i < m.images.rows(); ++i) {
        hinge += std::max(0.0, hp.h - dot(su.row(i), m.labels.row(i)));
        hinge += std::max(0.0, hp.h - dot(sv.row(i), m.labels.row(i)));
        for (std::size_t k = 0; k < u.cols(); ++k) {
            const double diff = u(i, k) - v(i, k);
            distance += diff * diff;
        }
    }
    const double wn = frobenius_norm(params.w);
    return 0.5 * wn * wn + hp.c1 * hinge + hp.c2 * distance;
}

QpProblem qp_from(const DataMatrices& m, const OmegaPair& omegas, const Hyperparams& hp) {
    return build_qp(matmul(m.images, omegas.image), matmul(m.texts, omegas.text), m.labels, hp.h, hp.c1);
}

} // namespace

void Hyperparams::validate(std::size_t d_image, std::size_t d_text) const {
    const auto positive = [](double v, const char* name) {
        if (!(v > 0.0) || !std::isfinite(v)) throw std::invalid_argument(std::string("hyperparams: ") + name + " must be > 0");
    };
    positive(c1, "c1");
    positive(c2, "c2");
    positive(h, "h");
    positive(qp_tol, "qp_tol");
    if (!(outer_tol >= 0.0)) throw std::invalid_argument("hyperparams: outer_tol must be >= 0");
    if (shared_dim == 0) throw std::invalid_argument("hyperparams: shared_dim must be positive");
    if (shared_dim > std::min(d_image, d_text)) {
        throw std::invalid_argument("hyperparams: shared_dim " + std::to_string(shared_dim) + " exceeds min(d_image=" +
                                    std::to_string(d_image) + ", d_text=" + std::to_string(d_text) + ")");
    }
}

void ModelParams::check_invariants(double tol) const {
    if (omega_image.cols() != w.rows() || omega_text.cols() != w.rows()) {
        throw std::runtime_error("model: shapes disagree (omega_image " + omega_image.shape() + ", omega_text " +
                                 omega_text.shape() + ", w " + w.shape() + ")");
    }
    const double ei = orthonormality_error(omega_image);
    const double et = orthonormality_error(omega_text);
    if (!(ei <= tol) || !(et <= tol)) {
        throw std::runtime_error("model: omega columns not orthonormal (image " + std::to_string(ei) + ", text " +
                                 std::to_string(et) + ")");
    }
}

std::vector<double> project(std::span<const double> features, const Matrix& omega) {
    return row_times(features, omega);
}

Matrix coupling_matrix(const Dataset& dataset) { return matmul_tn(dataset.image_matrix(), dataset.text_matrix()); }

OmegaPair fit_unsupervised_cfa(const Dataset& dataset, std::size_t d) {
    if (d == 0 || d > std::min(dataset.d_image(), dataset.d_text()))
        throw std::invalid_argument("fit_unsupervised_cfa: d must lie in [1, min(d_image, d_text)]");
    return update_omegas(coupling_matrix(dataset), d);
}

Matrix compute_z(const Dataset& dataset, const DualState& duals, double c2) {
    require_duals(duals, dataset.size());
    return z_from(DataMatrices(dataset), duals, c2);
}

OmegaPair update_omegas(const Matrix& z, std::size_t d) {
    if (d == 0 || d > std::min(z.rows(), z.cols()))
        throw std::invalid_argument("update_omegas: d = " + std::to_string(d) + " invalid for " + z.shape());
    const SvdResult s = svd(z);
    return {s.u.left_columns(d), s.vt.transposed().left_columns(d)};
}

Matrix recover_w(const Dataset& dataset, const DualState& duals, const Matrix& omega_image, const Matrix& omega_text) {
    require_duals(duals, dataset.size());
    const DataMatrices m(dataset);
    return w_from(matmul(m.images, omega_image), matmul(m.texts, omega_text), m.labels, duals);
}

double primal_objective(const Dataset& dataset, const ModelParams& params, const Hyperparams& hp) {
    return primal_from(DataMatrices(dataset), params, hp);
}

QpProblem build_qp_for(const Dataset& dataset, const Matrix& omega_image, const Matrix& omega_text,
                       const Hyperparams& hp) {
    return qp_from(DataMatrices(dataset), {omega_image, omega_text}, hp);
}

TrainResult fit_supervised(const Dataset& dataset, const Hyperparams& hp, const Initialization& init) {
    hp.validate(dataset.d_image(), dataset.d_text());
    const DataMatrices m(dataset);
    const std::size_t d = hp.shared_dim;
    const auto start = std::chrono::steady_clock::now();

    OmegaPair omegas = init.kind == Initialization::Kind::unsupervised
                           ? update_omegas(matmul_tn(m.images, m.texts), d)
                           : OmegaPair{random_orthonormal(dataset.d_image(), d, detail::derive_seed(init.seed, 10)),
                                       random_orthonormal(dataset.d_text(), d, detail::derive_seed(init.seed, 11))};

    const QpOptions qp_options{hp.qp_tol, hp.qp_max_sweeps};
    TrainResult result;
    DualState duals = DualState::zeros(dataset.size());

    for (std::size_t t = 1; t <= hp.max_iters; ++t) {
        const Matrix u = matmul(m.images, omegas.image);
        const Matrix v = matmul(m.texts, omegas.text);
        const QpResult qp = solve_qp(build_qp(u, v, m.labels, hp.h, hp.c1), duals, qp_options);
        duals = qp.duals;
        result.qp_converged = result.qp_converged && qp.converged;

        // Objective of the model the QP just solved for, before the projection moves.
        const ModelParams current{omegas.image, omegas.text, w_from(u, v, m.labels, duals)};
        const double primal = primal_from(m, current, hp);

        omegas = update_omegas(z_from(m, duals, hp.c2), d);

        TraceRecord rec;
        rec.iteration = t;
        rec.primal_objective = primal;
        rec.qp_dual_objective = qp.objective;
        rec.qp_converged = qp.converged;
        rec.qp_sweeps = qp.sweeps;
        rec.orthonormality_error = std::max(orthonormality_error(omegas.image), orthonormality_error(omegas.text));
        rec.elapsed_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        result.trace.push_back(rec);

        if (hp.outer_tol > 0.0 && result.trace.size() >= 2) {
            const double prev = result.trace[result.trace.size() - 2].primal_objective;
            if (std::abs(primal - prev) <= hp.outer_tol * std::max(1.0, std::abs(prev))) break;
        }
    }

    const Matrix u = matmul(m.images, omegas.image);
    const Matrix v = matmul(m.texts, omegas.text);
    const QpResult final_qp = solve_qp(build_qp(u, v, m.labels, hp.h, hp.c1), duals, qp_options);
    result.qp_converged = result.qp_converged && final_qp.converged;
    result.duals = final_qp.duals;
    result.params = ModelParams{std::move(omegas.image), std::move(omegas.text), w_from(u, v, m.labels, result.duals)};
    return result;
}

} // namespace supcfa
