#include "supcfa/qp.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace supcfa {

namespace {

double clip(double x, double lo, double hi) { return std::min(hi, std::max(lo, x)); }

// Exact maximizer of g·t - ½ curv·t² over x + t ∈ [0, c1]; zero curvature
// moves to the bound the gradient points at and stays put on a zero gradient.
double coordinate_target(double x, double g, double curv, double c1) {
    if (curv > 0.0) return clip(x + g / curv, 0.0, c1);
    if (g > 0.0) return c1;
    if (g < 0.0) return 0.0;
    return x;
}

double projected(double x, double g, double c1) {
    if (x <= 0.0) return std::max(g, 0.0);
    if (x >= c1) return std::max(-g, 0.0);
    return std::abs(g);
}

void require_square(const Matrix& m, std::size_t n, const char* name) {
    if (m.rows() != n || m.cols() != n)
        throw std::invalid_argument(std::string("QpProblem: ") + name + " is " + m.shape() + ", expected " +
                                    std::to_string(n) + "x" + std::to_string(n));
}

// Solves a small dense system in place with partial pivoting. Returns false
// when a pivot falls below `singular`.
bool solve_dense(std::vector<std::vector<double>>& a, std::vector<double>& b, double singular) {
    const std::size_t n = b.size();
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t pivot = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::abs(a[r][col]) > std::abs(a[pivot][col])) pivot = r;
        if (std::abs(a[pivot][col]) <= singular) return false;
        std::swap(a[pivot], a[col]);
        std::swap(b[pivot], b[col]);
        for (std::size_t r = col + 1; r < n; ++r) {
            const double f = a[r][col] / a[col][col];
            for (std::size_t c = col; c < n; ++c) a[r][c] -= f * a[col][c];
            b[r] -= f * b[col];
        }
    }
    for (std::size_t i = n; i-- > 0;) {
        double s = b[i];
        for (std::size_t c = i + 1; c < n; ++c) s -= a[i][c] * b[c];
        b[i] = s / a[i][i];
    }
    return true;
}

DualState unflatten(const std::vector<double>& v, std::size_t n) {
    return {std::vector<double>(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(n)),
            std::vector<double>(v.begin() + static_cast<std::ptrdiff_t>(n), v.end())};
}

double stacked_objective(const Matrix& m, const std::vector<double>& x, double h) {
    double quad = 0.0;
    double lin = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        lin += x[i];
        if (x[i] == 0.0) continue;
        quad += x[i] * dot(m.row(i), x);
    }
    return -0.5 * quad + h * lin;
}

// One pass of exact per-coordinate maximization on the stacked form.
void refine_once(const Matrix& m, std::vector<double>& x, double h, double c1) {
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double g = h - dot(m.row(i), x);
        x[i] = coordinate_target(x[i], g, m(i, i), c1);
    }
}

} // namespace

bool DualState::feasible(double c1) const {
    if (alpha.size() != gamma.size()) return false;
    const auto in_box = [c1](double v) { return v >= 0.0 && v <= c1; };
    return std::all_of(alpha.begin(), alpha.end(), in_box) && std::all_of(gamma.begin(), gamma.end(), in_box);
}

double QpProblem::objective(const DualState& x) const {
    const std::size_t n = size();
    if (x.alpha.size() != n || x.gamma.size() != n) throw std::invalid_argument("QpProblem::objective: size mismatch");
    double value = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double aa = 0.0, ab = 0.0, gg = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            aa += gram_ii(i, j) * x.alpha[j];
            ab += gram_it(i, j) * x.gamma[j];
            gg += gram_tt(i, j) * x.gamma[j];
        }
        value += -0.5 * x.alpha[i] * aa - x.alpha[i] * ab - 0.5 * x.gamma[i] * gg;
        value += margin_h * (x.alpha[i] + x.gamma[i]);
    }
    return value;
}

DualState QpProblem::gradient(const DualState& x) const {
    const std::size_t n = size();
    DualState g = DualState::zeros(n);
    for (std::size_t i = 0; i < n; ++i) {
        double ga = margin_h;
        double gg = margin_h;
        for (std::size_t j = 0; j < n; ++j) {
            ga -= gram_ii(i, j) * x.alpha[j] + gram_it(i, j) * x.gamma[j];
            gg -= gram_tt(i, j) * x.gamma[j] + gram_it(j, i) * x.alpha[j];
        }
        g.alpha[i] = ga;
        g.gamma[i] = gg;
    }
    return g;
}

double QpProblem::max_projected_gradient(const DualState& x) const {
    const DualState g = gradient(x);
    double worst = 0.0;
    for (std::size_t i = 0; i < size(); ++i) {
        worst = std::max(worst, projected(x.alpha[i], g.alpha[i], box_c1));
        worst = std::max(worst, projected(x.gamma[i], g.gamma[i], box_c1));
    }
    return worst;
}

Matrix QpProblem::stacked() const {
    const std::size_t n = size();
    Matrix m(2 * n, 2 * n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            m(i, j) = gram_ii(i, j);
            m(i, n + j) = gram_it(i, j);
            m(n + i, j) = gram_it(j, i);
            m(n + i, n + j) = gram_tt(i, j);
        }
    }
    return m;
}

QpProblem build_qp(const Matrix& projected_images, const Matrix& projected_texts, const Matrix& labels, double h,
                   double c1) {
    const std::size_t n = projected_images.rows();
    if (projected_texts.rows() != n || labels.rows() != n) {
        throw std::invalid_argument("build_qp: inconsistent document counts (images " + projected_images.shape() +
                                    ", texts " + projected_texts.shape() + ", labels " + labels.shape() + ")");
    }
    if (projected_images.cols() != projected_texts.cols()) {
        throw std::invalid_argument("build_qp: projected dimensions differ (" + projected_images.shape() + " vs " +
                                    projected_texts.shape() + ")");
    }
    if (!(c1 > 0.0)) throw std::invalid_argument("build_qp: C1 must be positive");

    const Matrix label_gram = matmul_nt(labels, labels);
    QpProblem p{matmul_nt(projected_images, projected_images), matmul_nt(projected_images, projected_texts),
                matmul_nt(projected_texts, projected_texts), h, c1};
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            const double yy = label_gram(i, j);
            p.gram_ii(i, j) *= yy;
            p.gram_it(i, j) *= yy;
            p.gram_tt(i, j) *= yy;
        }
    }
    // Exact symmetry; the products above agree only up to rounding.
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            p.gram_ii(j, i) = p.gram_ii(i, j);
            p.gram_tt(j, i) = p.gram_tt(i, j);
        }
    }
    return p;
}

QpResult solve_qp(const QpProblem& problem, const std::optional<DualState>& warm_start, const QpOptions& options) {
    const std::size_t n = problem.size();
    require_square(problem.gram_ii, n, "gram_ii");
    require_square(problem.gram_it, n, "gram_it");
    require_square(problem.gram_tt, n, "gram_tt");
    if (!(options.tol > 0.0)) throw std::invalid_argument("solve_qp: tol must be positive");
    const double c1 = problem.box_c1;
    const auto& a = problem.gram_ii;
    const auto& b = problem.gram_it;
    const auto& g = problem.gram_tt;

    QpResult result;
    result.duals = DualState::zeros(n);
    if (warm_start) {
        if (warm_start->size() != n) throw std::invalid_argument("solve_qp: warm start has the wrong size");
        for (std::size_t i = 0; i < n; ++i) {
            result.duals.alpha[i] = clip(warm_start->alpha[i], 0.0, c1);
            result.duals.gamma[i] = clip(warm_start->gamma[i], 0.0, c1);
        }
    }
    auto& alpha = result.duals.alpha;
    auto& gamma = result.duals.gamma;
    const std::size_t cap = options.max_sweeps > 0 ? options.max_sweeps : 10 * n;

    DualState grad = problem.gradient(result.duals);
    const auto kkt = [&]() {
        double worst = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            worst = std::max(worst, projected(alpha[i], grad.alpha[i], c1));
            worst = std::max(worst, projected(gamma[i], grad.gamma[i], c1));
        }
        return worst;
    };

    result.max_projected_gradient = kkt();
    while (result.max_projected_gradient > options.tol && result.sweeps < cap) {
        for (std::size_t i = 0; i < n; ++i) {
            const double next = coordinate_target(alpha[i], grad.alpha[i], a(i, i), c1);
            const double delta = next - alpha[i];
            if (delta == 0.0) continue;
            alpha[i] = next;
            for (std::size_t k = 0; k < n; ++k) {
                grad.alpha[k] -= delta * a(k, i);
                grad.gamma[k] -= delta * b(i, k);
            }
        }
        for (std::size_t j = 0; j < n; ++j) {
            const double next = coordinate_target(gamma[j], grad.gamma[j], g(j, j), c1);
            const double delta = next - gamma[j];
            if (delta == 0.0) continue;
            gamma[j] = next;
            for (std::size_t k = 0; k < n; ++k) {
                grad.gamma[k] -= delta * g(k, j);
                grad.alpha[k] -= delta * b(k, j);
            }
        }
        ++result.sweeps;
        result.max_projected_gradient = kkt();
        if (result.max_projected_gradient <= options.tol) {
            // Confirm against a fresh gradient; the running one accumulates rounding.
            grad = problem.gradient(result.duals);
            result.max_projected_gradient = kkt();
        }
    }
    result.converged = result.max_projected_gradient <= options.tol;
    result.objective = problem.objective(result.duals);
    return result;
}

DualState brute_force_qp(const QpProblem& problem, std::size_t grid_steps) {
    const std::size_t n = problem.size();
    const std::size_t dim = 2 * n;
    if (dim > 6) throw std::invalid_argument("brute_force_qp: 2n = " + std::to_string(dim) + " exceeds 6");
    if (grid_steps == 0) throw std::invalid_argument("brute_force_qp: grid_steps must be positive");
    if (dim == 0) return DualState::zeros(0);
    const Matrix m = problem.stacked();
    const double h = problem.margin_h;
    const double c1 = problem.box_c1;

    // Grid stage.
    std::vector<std::size_t> digits(dim, 0);
    std::vector<double> x(dim), best_grid(dim, 0.0);
    double best_grid_value = -INFINITY;
    while (true) {
        for (std::size_t i = 0; i < dim; ++i)
            x[i] = c1 * static_cast<double>(digits[i]) / static_cast<double>(grid_steps);
        const double v = stacked_objective(m, x, h);
        if (v > best_grid_value) {
            best_grid_value = v;
            best_grid = x;
        }
        std::size_t pos = 0;
        while (pos < dim && ++digits[pos] > grid_steps) digits[pos++] = 0;
        if (pos == dim) break;
    }
    refine_once(m, best_grid, h, c1);
    std::vector<double> best = best_grid;
    double best_value = stacked_objective(m, best_grid, h);

    // Face stage: every variable is at 0, at C1, or free. A concave QP over a
    // box attains its maximum at a point whose free block has a nonsingular
    // M_FF, so solving those systems covers the optimum.
    const double singular = 1e-12 * std::max(1.0, max_abs(m));
    std::size_t faces = 1;
    for (std::size_t i = 0; i < dim; ++i) faces *= 3;
    std::vector<int> state(dim);
    for (std::size_t code = 0; code < faces; ++code) {
        std::size_t c = code;
        std::vector<std::size_t> free_vars;
        for (std::size_t i = 0; i < dim; ++i) {
            state[i] = static_cast<int>(c % 3);
            c /= 3;
            if (state[i] == 2) free_vars.push_back(i);
            else x[i] = state[i] == 0 ? 0.0 : c1;
        }
        if (!free_vars.empty()) {
            const std::size_t k = free_vars.size();
            std::vector<std::vector<double>> sys(k, std::vector<double>(k));
            std::vector<double> rhs(k, h);
            for (std::size_t r = 0; r < k; ++r) {
                for (std::size_t cc = 0; cc < k; ++cc) sys[r][cc] = m(free_vars[r], free_vars[cc]);
                for (std::size_t j = 0; j < dim; ++j)
                    if (state[j] != 2) rhs[r] -= m(free_vars[r], j) * x[j];
            }
            if (!solve_dense(sys, rhs, singular)) continue;
            bool inside = true;
            for (std::size_t r = 0; r < k; ++r) {
                if (rhs[r] < -1e-12 * c1 || rhs[r] > c1 * (1.0 + 1e-12)) {
                    inside = false;
                    break;
                }
                x[free_vars[r]] = clip(rhs[r], 0.0, c1);
            }
            if (!inside) continue;
        }
        const double v = stacked_objective(m, x, h);
        if (v > best_value) {
            best_value = v;
            best = x;
        }
    }
    return unflatten(best, n);
}

} // namespace supcfa
