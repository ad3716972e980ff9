#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "condquant/baselines.hpp"

namespace condquant {
namespace {

double summed_pinball(const Eigen::VectorXd& y, const Eigen::VectorXd& fitted, double alpha) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) total += pinball_loss(y[i], fitted[i], alpha);
  return total;
}

Eigen::VectorXd solve_spd(const Eigen::MatrixXd& a, const Eigen::VectorXd& b) {
  Eigen::LDLT<Eigen::MatrixXd> ldlt(a);
  if (ldlt.info() == Eigen::Success && ldlt.isPositive()) {
    Eigen::VectorXd x = ldlt.solve(b);
    if (x.allFinite()) return x;
  }
  return a.completeOrthogonalDecomposition().solve(b);
}

// Greedy selection of q rows, in the given order, that form an invertible basis.
std::vector<Eigen::Index> initial_basis(const Eigen::MatrixXd& design,
                                        const std::vector<Eigen::Index>& order) {
  const Eigen::Index q = design.cols();
  std::vector<Eigen::Index> rows;
  Eigen::MatrixXd picked(0, q);
  for (Eigen::Index i : order) {
    Eigen::MatrixXd trial(picked.rows() + 1, q);
    trial.topRows(picked.rows()) = picked;
    trial.row(picked.rows()) = design.row(i);
    Eigen::FullPivLU<Eigen::MatrixXd> lu(trial);
    if (lu.rank() == trial.rows()) {
      picked = std::move(trial);
      rows.push_back(i);
      if (picked.rows() == q) break;
    }
  }
  return rows;
}

struct VertexResult {
  Eigen::VectorXd beta;
  bool optimal = false;
};

// Simplex-type descent over interpolating bases. At a vertex with basis B the
// directional derivative along the edge releasing basis point k is
// (1 - alpha) - xi_k upwards and alpha + xi_k downwards, where
// xi' = sum_{i not in basis} psi(r_i) x_i' B^{-1}. A negative value is
// followed to the minimizing breakpoint, whose observation enters the basis.
VertexResult descend_vertices(const Eigen::MatrixXd& design, const Eigen::VectorXd& y,
                              double alpha, std::vector<Eigen::Index> basis_rows,
                              std::size_t max_steps) {
  const Eigen::Index n = design.rows();
  const Eigen::Index q = design.cols();
  const double slack = 1e-10;
  std::vector<char> in_basis(static_cast<std::size_t>(n), 0);
  for (Eigen::Index i : basis_rows) in_basis[static_cast<std::size_t>(i)] = 1;

  VertexResult out;
  std::vector<std::pair<double, double>> breaks;  // (t, |c|)
  for (std::size_t step = 0; step <= max_steps; ++step) {
    Eigen::MatrixXd b(q, q);
    Eigen::VectorXd yb(q);
    for (Eigen::Index k = 0; k < q; ++k) {
      b.row(k) = design.row(basis_rows[static_cast<std::size_t>(k)]);
      yb[k] = y[basis_rows[static_cast<std::size_t>(k)]];
    }
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(b);
    out.beta = lu.solve(yb);
    if (!out.beta.allFinite()) return out;
    const Eigen::VectorXd r = y - design * out.beta;
    Eigen::VectorXd g = Eigen::VectorXd::Zero(q);
    for (Eigen::Index i = 0; i < n; ++i) {
      if (in_basis[static_cast<std::size_t>(i)]) continue;
      g += (r[i] < 0.0 ? alpha - 1.0 : alpha) * design.row(i).transpose();
    }
    const Eigen::VectorXd xi = lu.transpose().solve(g);

    // Steepest violated edge.
    Eigen::Index leave = -1;
    double sign = 0.0;
    double worst = -slack * (1.0 + static_cast<double>(n));
    for (Eigen::Index k = 0; k < q; ++k) {
      const double up = (1.0 - alpha) - xi[k];
      const double down = alpha + xi[k];
      if (up < worst) {
        worst = up;
        leave = k;
        sign = 1.0;
      }
      if (down < worst) {
        worst = down;
        leave = k;
        sign = -1.0;
      }
    }
    if (leave < 0) {
      out.optimal = true;
      return out;
    }

    Eigen::VectorXd e = Eigen::VectorXd::Zero(q);
    e[leave] = sign;
    const Eigen::VectorXd delta = lu.solve(e);
    const Eigen::VectorXd c = design * delta;
    breaks.clear();
    for (Eigen::Index i = 0; i < n; ++i) {
      if (in_basis[static_cast<std::size_t>(i)] || c[i] == 0.0) continue;
      const double t = r[i] / c[i];
      if (t >= 0.0) breaks.emplace_back(t, std::abs(c[i]));
    }
    if (breaks.empty()) return out;  // unbounded edge; cannot happen for alpha in (0, 1)
    std::sort(breaks.begin(), breaks.end());
    double slope = worst;
    double t_star = breaks.back().first;
    for (const auto& [t, weight] : breaks) {
      slope += weight;
      if (slope >= 0.0) {
        t_star = t;
        break;
      }
    }
    // Entering observation: the breakpoint at t_star (ties broken by index).
    Eigen::Index enter = -1;
    for (Eigen::Index i = 0; i < n && enter < 0; ++i) {
      if (in_basis[static_cast<std::size_t>(i)] || c[i] == 0.0) continue;
      if (r[i] / c[i] == t_star) enter = i;
    }
    if (enter < 0) return out;
    in_basis[static_cast<std::size_t>(basis_rows[static_cast<std::size_t>(leave)])] = 0;
    basis_rows[static_cast<std::size_t>(leave)] = enter;
    in_basis[static_cast<std::size_t>(enter)] = 1;
  }
  return out;
}

}  // namespace

std::vector<double> LinearQuantileModel::predict(const Eigen::MatrixXd& covariates) const {
  require(covariates.cols() == coefficients.size(), ErrorCode::kInvalidInput,
          "covariate column count does not match the linear quantile model");
  const Eigen::VectorXd fitted = (covariates * coefficients).array() + intercept;
  return {fitted.data(), fitted.data() + fitted.size()};
}

double linear_quantile_objective(const Dataset& data, double alpha, double intercept,
                                 const Eigen::VectorXd& coefficients) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < data.covariates.rows(); ++i) {
    const double q = intercept + data.covariates.row(i).dot(coefficients);
    total += pinball_loss(data.responses[static_cast<std::size_t>(i)], q, alpha);
  }
  return total;
}

LinearQuantileModel fit_linear_quantile(const Dataset& data, double alpha,
                                        const LinearQuantileOptions& options) {
  data.validate();
  require(alpha > 0.0 && alpha < 1.0, ErrorCode::kInvalidInput,
          "quantile level must lie strictly between 0 and 1");
  const auto n = static_cast<Eigen::Index>(data.rows());
  const Standardizer standardizer = Standardizer::fit(data.covariates);
  const Eigen::MatrixXd z = standardizer.apply(data.covariates);

  std::vector<Eigen::Index> active;
  for (Eigen::Index j = 0; j < z.cols(); ++j) {
    if (!standardizer.is_constant(j)) active.push_back(j);
  }
  const auto q = static_cast<Eigen::Index>(active.size()) + 1;
  Eigen::MatrixXd design(n, q);
  design.col(0).setOnes();
  for (Eigen::Index k = 0; k + 1 < q; ++k) design.col(k + 1) = z.col(active[static_cast<std::size_t>(k)]);
  const Eigen::Map<const Eigen::VectorXd> y(data.responses.data(), n);

  const double median = empirical_quantile(data.responses, 0.5);
  double scale = (y.array() - median).abs().mean();
  if (!(scale > 0.0)) scale = 1.0;

  // Least-squares start with the intercept moved to the alpha-quantile of the residuals.
  Eigen::VectorXd beta = design.completeOrthogonalDecomposition().solve(y);
  {
    const Eigen::VectorXd r = y - design * beta;
    beta[0] += empirical_quantile(std::span<const double>(r.data(), static_cast<std::size_t>(n)), alpha);
  }

  Eigen::VectorXd best_beta = beta;
  double best_objective = summed_pinball(y, design * beta, alpha);
  auto consider = [&](const Eigen::VectorXd& candidate) {
    if (!candidate.allFinite()) return;
    const double f = summed_pinball(y, design * candidate, alpha);
    if (f < best_objective) {
      best_objective = f;
      best_beta = candidate;
    }
  };

  const Eigen::VectorXd linear_term = (2.0 * alpha - 1.0) * design.colwise().sum().transpose();
  const double final_epsilon = options.final_epsilon * scale;
  std::size_t iterations = 0;
  bool converged = false;
  for (double epsilon = 0.1 * scale;; epsilon = std::max(epsilon * 0.1, final_epsilon)) {
    const bool last_level = epsilon <= final_epsilon * (1.0 + 1e-12);
    double previous = std::numeric_limits<double>::infinity();
    converged = false;
    for (std::size_t it = 0; it < options.max_iterations; ++it, ++iterations) {
      const Eigen::VectorXd r = y - design * beta;
      const Eigen::VectorXd w = (r.array().abs() + epsilon).inverse();
      // Smoothed objective; non-increasing under the majorize-minimize update.
      double smoothed = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        smoothed += 0.5 * r[i] * r[i] * w[i] + (alpha - 0.5) * r[i];
      }
      if (std::abs(previous - smoothed) <= options.tolerance * std::max(std::abs(smoothed), scale)) {
        converged = true;
        break;
      }
      previous = smoothed;
      const Eigen::MatrixXd gram = design.transpose() * w.asDiagonal() * design;
      const Eigen::VectorXd rhs = design.transpose() * w.cwiseProduct(y) + linear_term;
      beta = solve_spd(gram, rhs);
      consider(beta);
    }
    if (last_level) break;
  }

  // The optimum is attained at a vertex interpolating q observations. Start
  // from the q smallest residuals of the best iterate and exchange basis
  // points along descent edges until the subgradient check passes.
  bool certified = false;
  if (q <= n) {
    const Eigen::VectorXd r0 = y - design * best_beta;
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::sort(order.begin(), order.end(),
              [&](Eigen::Index a, Eigen::Index b) { return std::abs(r0[a]) < std::abs(r0[b]); });
    std::vector<Eigen::Index> basis_rows = initial_basis(design, order);
    if (static_cast<Eigen::Index>(basis_rows.size()) == q) {
      const VertexResult v = descend_vertices(design, y, alpha, std::move(basis_rows),
                                              options.max_iterations * 10);
      certified = v.optimal;
      if (certified) {
        best_beta = v.beta;
        best_objective = summed_pinball(y, design * v.beta, alpha);
      } else {
        consider(v.beta);
      }
    }
  }
  converged = converged || certified;

  LinearQuantileModel model;
  model.alpha = alpha;
  model.iterations = iterations;
  model.coefficients = Eigen::VectorXd::Zero(data.covariates.cols());
  for (Eigen::Index k = 0; k + 1 < q; ++k) {
    const Eigen::Index j = active[static_cast<std::size_t>(k)];
    model.coefficients[j] = best_beta[k + 1] / standardizer.scale[j];
  }
  model.intercept = best_beta[0] - model.coefficients.dot(standardizer.center);
  model.objective = linear_quantile_objective(data, alpha, model.intercept, model.coefficients);

  if (!converged) {
    throw QuantileFitError("linear quantile regression did not converge within " +
                               std::to_string(options.max_iterations) +
                               " iterations per smoothing level (best objective " +
                               std::to_string(model.objective) + ")",
                           model);
  }
  return model;
}

}  // namespace condquant
