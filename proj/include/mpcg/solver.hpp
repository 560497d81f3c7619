#ifndef MPCG_SOLVER_HPP
#define MPCG_SOLVER_HPP

#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "error.hpp"
#include "sparse.hpp"

namespace mpcg {

enum class Preconditioner { none, jacobi };
enum class ResidualMode { relative, absolute };
enum class SolveStatus { converged, max_iterations, stagnated };

constexpr std::string_view to_string(SolveStatus s) {
    switch (s) {
    case SolveStatus::converged: return "converged";
    case SolveStatus::max_iterations: return "max_iterations";
    case SolveStatus::stagnated: return "stagnated";
    }
    return "unknown";
}

struct SolveConfig {
    double tolerance = 1e-10;
    /// Unset means 10 * n.
    std::optional<std::size_t> max_iterations;
    Preconditioner preconditioner = Preconditioner::none;
    ResidualMode residual_mode = ResidualMode::relative;
    /// Stop once the best true residual has not shrunk by stagnation_factor
    /// within this many iterations.
    std::size_t stagnation_window = 25;
    double stagnation_factor = 0.99;

    void validate() const {
        if (!(tolerance > 0.0)) throw Error(ErrorCode::InvalidArgument, "tolerance must be positive");
        if (max_iterations && *max_iterations == 0)
            throw Error(ErrorCode::InvalidArgument, "max_iterations must be positive");
        if (stagnation_window == 0)
            throw Error(ErrorCode::InvalidArgument, "stagnation_window must be at least 1");
        if (!(stagnation_factor > 0.0 && stagnation_factor <= 1.0))
            throw Error(ErrorCode::InvalidArgument, "stagnation_factor must lie in (0, 1]");
    }

    std::size_t iteration_limit(std::size_t n) const { return max_iterations.value_or(10 * n); }
};

template <Scalar T>
struct SolveResult {
    Vector<T> x;
    std::size_t iterations = 0;
    /// Last true residual, relative or absolute per the configured mode.
    double final_residual_norm = 0.0;
    SolveStatus status = SolveStatus::max_iterations;
    /// True residual after each iteration; its length equals iterations.
    std::vector<double> residual_history;
};

namespace detail {

/**
 * Shared CG / Jacobi-PCG loop. With a null diagonal it reduces to plain CG
 * operation for operation.
 *
 * Each iteration performs, in order: alpha, x, r, beta, d. The stopping test
 * uses the true residual b - A x recomputed from scratch, never the
 * recursive r. All arithmetic happens in T.
 */
template <Scalar T>
SolveResult<T> conjugate_gradient(const CsrMatrix<T>& a, std::span<const T> b,
                                  std::span<const T> x0, const SolveConfig& config,
                                  const Vector<T>* diag) {
    config.validate();
    const std::size_t n = a.size();
    if (b.size() != n || x0.size() != n)
        throw Error(ErrorCode::DimensionMismatch,
                    "matrix " + std::to_string(n) + ", rhs " + std::to_string(b.size()) +
                        ", x0 " + std::to_string(x0.size()));

    SolveResult<T> result;
    result.x.assign(x0.begin(), x0.end());
    Vector<T>& x = result.x;
    Vector<T> r(n), z(n), q(n), ax(n), t(n);

    const T b_norm = norm2(b);
    const T scale =
        (config.residual_mode == ResidualMode::relative && b_norm > T(0)) ? b_norm : T(1);
    const T tol = static_cast<T>(config.tolerance);

    auto true_residual = [&] {
        spmv(a, std::span<const T>(x), std::span<T>(ax));
        for (std::size_t i = 0; i < n; ++i) t[i] = b[i] - ax[i];
        return norm2(std::span<const T>(t)) / scale;
    };
    auto precondition = [&] {
        if (diag)
            for (std::size_t i = 0; i < n; ++i) z[i] = r[i] / (*diag)[i];
        else
            z = r;
    };

    spmv(a, std::span<const T>(x), std::span<T>(ax));
    for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - ax[i];
    T residual = norm2(std::span<const T>(r)) / scale;
    result.final_residual_norm = residual;
    if (residual <= tol) {
        result.status = SolveStatus::converged;
        return result;
    }

    precondition();
    Vector<T> d = z;
    T rz = dot(std::span<const T>(r), std::span<const T>(z));

    const std::size_t limit = config.iteration_limit(n);
    T anchor = residual;
    T best = residual;
    std::size_t anchor_iteration = 0;

    while (true) {
        if (result.iterations >= limit) {
            result.status = SolveStatus::max_iterations;
            break;
        }
        if (rz == T(0)) {
            // recursive residual vanished while the true residual still fails
            result.status = SolveStatus::stagnated;
            break;
        }
        spmv(a, std::span<const T>(d), std::span<T>(q));
        const T curvature = dot(std::span<const T>(d), std::span<const T>(q));
        if (!(curvature > T(0)))
            throw Error(ErrorCode::BreakdownDivisionByZero,
                        "d^T A d = " + std::to_string(curvature) + " at iteration " +
                            std::to_string(result.iterations));
        const T alpha = rz / curvature;
        for (std::size_t i = 0; i < n; ++i) x[i] += alpha * d[i];
        for (std::size_t i = 0; i < n; ++i) r[i] -= alpha * q[i];
        precondition();
        const T rz_next = dot(std::span<const T>(r), std::span<const T>(z));
        const T beta = rz_next / rz;
        for (std::size_t i = 0; i < n; ++i) d[i] = z[i] + beta * d[i];
        rz = rz_next;
        ++result.iterations;

        residual = true_residual();
        result.residual_history.push_back(residual);
        result.final_residual_norm = residual;
        if (residual <= tol) {
            result.status = SolveStatus::converged;
            break;
        }
        if (residual < best) best = residual;
        if (best < static_cast<T>(config.stagnation_factor) * anchor) {
            anchor = best;
            anchor_iteration = result.iterations;
        } else if (result.iterations - anchor_iteration >= config.stagnation_window) {
            result.status = SolveStatus::stagnated;
            break;
        }
    }
    return result;
}

} // namespace detail

/// Conjugate gradient at the precision of A.
template <Scalar T>
SolveResult<T> cg(const CsrMatrix<T>& a, std::span<const T> b, std::span<const T> x0,
                  const SolveConfig& config) {
    return detail::conjugate_gradient<T>(a, b, x0, config, nullptr);
}

template <Scalar T>
SolveResult<T> cg(const CsrMatrix<T>& a, const Vector<T>& b, const Vector<T>& x0,
                  const SolveConfig& config) {
    return cg(a, std::span<const T>(b), std::span<const T>(x0), config);
}

/// Jacobi-preconditioned CG (M = diag(A)); the stopping test is on the
/// unpreconditioned residual, same as cg.
template <Scalar T>
SolveResult<T> pcg_jacobi(const CsrMatrix<T>& a, std::span<const T> b, std::span<const T> x0,
                          const SolveConfig& config) {
    const Vector<T> diag = a.diagonal();
    for (std::size_t i = 0; i < diag.size(); ++i)
        if (!(diag[i] > T(0)))
            throw Error(ErrorCode::NonpositiveDiagonal, "a_ii <= 0 at row " + std::to_string(i));
    return detail::conjugate_gradient<T>(a, b, x0, config, &diag);
}

template <Scalar T>
SolveResult<T> pcg_jacobi(const CsrMatrix<T>& a, const Vector<T>& b, const Vector<T>& x0,
                          const SolveConfig& config) {
    return pcg_jacobi(a, std::span<const T>(b), std::span<const T>(x0), config);
}

/// Dispatches on config.preconditioner.
template <Scalar T>
SolveResult<T> solve(const CsrMatrix<T>& a, std::span<const T> b, std::span<const T> x0,
                     const SolveConfig& config) {
    return config.preconditioner == Preconditioner::jacobi ? pcg_jacobi(a, b, x0, config)
                                                           : cg(a, b, x0, config);
}

/// Weighted iteration count: a reduced-precision iteration costs mu of a full one.
constexpr double cost(std::size_t n1, std::size_t n2, double mu) {
    return mu * static_cast<double>(n1) + static_cast<double>(n2);
}

/// Upper estimate ceil(sqrt(kappa)/2 * ln(2/eps)) of CG iterations needed to
/// shrink the A-norm error by eps.
inline std::size_t iteration_bound(double kappa, double epsilon) {
    if (!(kappa >= 1.0) || !std::isfinite(kappa))
        throw Error(ErrorCode::InvalidArgument, "kappa must be >= 1");
    if (!(epsilon > 0.0 && epsilon < 2.0))
        throw Error(ErrorCode::InvalidArgument, "epsilon must lie in (0, 2)");
    return static_cast<std::size_t>(std::ceil(0.5 * std::sqrt(kappa) * std::log(2.0 / epsilon)));
}

struct TwoStageResult {
    Vector<double> x;
    std::size_t n1 = 0;
    std::size_t n2 = 0;
    double epsilon1 = 0.0;
    double epsilon2 = 0.0;
    double mu = 0.5;
    double cost = 0.0;
    SolveStatus stage1_status = SolveStatus::converged;
    SolveStatus stage2_status = SolveStatus::converged;
    double stage1_residual = 0.0;
    double final_residual = 0.0;
};

/**
 * Mixed-precision two-stage solve.
 *
 * Stage 1 runs in binary32 on (float(A), float(b)) from zero to epsilon1.
 * Its last iterate, even when stage 1 stagnated, is widened and used as the
 * starting point of stage 2, which runs in binary64 to epsilon2. Stagnation
 * detection is applied to stage 1 only.
 */
inline TwoStageResult two_stage_solve(const SparseSymMatrix& a, std::span<const double> b,
                                      double epsilon1, double epsilon2, double mu,
                                      const SolveConfig& config = {}) {
    if (!(epsilon2 > 0.0) || !(epsilon2 <= epsilon1))
        throw Error(ErrorCode::InvalidArgument, "require 0 < epsilon2 <= epsilon1");
    if (!(mu > 0.0 && mu < 1.0)) throw Error(ErrorCode::InvalidArgument, "mu must lie in (0, 1)");
    if (b.size() != a.size()) throw Error(ErrorCode::DimensionMismatch, "rhs length");

    const ReducedMatrix reduced = downcast(a);
    const Vector<float> b_reduced = downcast_vector(b);
    const Vector<float> zero(a.size(), 0.0f);

    SolveConfig stage1 = config;
    stage1.tolerance = epsilon1;
    const auto first = solve<float>(reduced, b_reduced, zero, stage1);

    SolveConfig stage2 = config;
    stage2.tolerance = epsilon2;
    stage2.stagnation_window = std::numeric_limits<std::size_t>::max();
    const Vector<double> x0 = upcast_vector(first.x);
    auto second = solve<double>(a, b, x0, stage2);
    if (second.status != SolveStatus::converged)
        throw Error(ErrorCode::Stage2NotConverged,
                    std::string(to_string(second.status)) + " after " +
                        std::to_string(second.iterations) + " iterations, residual " +
                        std::to_string(second.final_residual_norm));

    TwoStageResult out;
    out.x = std::move(second.x);
    out.n1 = first.iterations;
    out.n2 = second.iterations;
    out.epsilon1 = epsilon1;
    out.epsilon2 = epsilon2;
    out.mu = mu;
    out.cost = cost(out.n1, out.n2, mu);
    out.stage1_status = first.status;
    out.stage2_status = second.status;
    out.stage1_residual = first.final_residual_norm;
    out.final_residual = second.final_residual_norm;
    return out;
}

/// Pure binary64 solve reported in the same shape (N1 = 0).
inline TwoStageResult double_only_solve(const SparseSymMatrix& a, std::span<const double> b,
                                        double epsilon2, double mu,
                                        const SolveConfig& config = {}) {
    SolveConfig stage2 = config;
    stage2.tolerance = epsilon2;
    stage2.stagnation_window = std::numeric_limits<std::size_t>::max();
    const Vector<double> zero(a.size(), 0.0);
    auto result = solve<double>(a, b, zero, stage2);
    if (result.status != SolveStatus::converged)
        throw Error(ErrorCode::Stage2NotConverged,
                    std::string(to_string(result.status)) + " after " +
                        std::to_string(result.iterations) + " iterations");
    TwoStageResult out;
    out.x = std::move(result.x);
    out.n2 = result.iterations;
    out.epsilon1 = 0.0;
    out.epsilon2 = epsilon2;
    out.mu = mu;
    out.cost = cost(0, out.n2, mu);
    out.final_residual = result.final_residual_norm;
    return out;
}

} // namespace mpcg

#endif // MPCG_SOLVER_HPP
