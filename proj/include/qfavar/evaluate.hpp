#pragma once

// Forecast evaluation: tick-loss quantile scores, Diebold–Mariano-style
// equality-of-accuracy t-statistics with a Newey–West HAC variance, and
// factor commonality R².

#include <cmath>
#include <iomanip>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "qfavar/shrinkage.hpp"  // Vector/Matrix aliases

namespace qfavar {

// Nonnegative tick loss (q - 1{y <= Q})(y - Q); lower is better. The
// sign-flipped variant is available for tools that expect the loss as a
// (nonpositive) score.
inline double quantile_score(double y, double Q, double q) {
  if (!(q > 0.0 && q < 1.0)) throw std::invalid_argument("quantile_score: q outside (0,1)");
  const double ind = y <= Q ? 1.0 : 0.0;
  return (q - ind) * (y - Q);
}

inline double quantile_score_signed(double y, double Q, double q) {
  return -quantile_score(y, Q, q);
}

// Newey–West long-run variance of a series with the given truncation lag.
inline double newey_west_variance(const Vector& d, int lag) {
  const auto n = d.size();
  if (n < 2) throw std::invalid_argument("newey_west_variance: need at least 2 observations");
  const double mean = d.mean();
  const Vector c = d.array() - mean;
  double v = c.squaredNorm() / static_cast<double>(n);
  for (int j = 1; j <= lag && j < n; ++j) {
    double g = 0.0;
    for (long t = j; t < n; ++t) g += c[t] * c[t - j];
    g /= static_cast<double>(n);
    v += 2.0 * (1.0 - static_cast<double>(j) / (lag + 1.0)) * g;
  }
  return v;
}

// t-statistic for equal average loss: mean(loss_a - loss_b) over its HAC
// standard error with truncation lag h-1. Negative values favor model a.
inline double dm_tstat(const Vector& loss_a, const Vector& loss_b, int horizon) {
  if (loss_a.size() != loss_b.size())
    throw std::invalid_argument("dm_tstat: loss vectors must have equal length");
  if (loss_a.size() <= 10) throw std::invalid_argument("dm_tstat: need more than 10 losses");
  if (horizon < 1) throw std::invalid_argument("dm_tstat: horizon must be >= 1");
  const Vector d = loss_a - loss_b;
  const double v = newey_west_variance(d, horizon - 1);
  if (!(v > 0.0)) {
    if (d.maxCoeff() == d.minCoeff() && d[0] == 0.0) return 0.0;  // identical losses
    throw std::runtime_error("dm_tstat: degenerate loss differential (zero HAC variance)");
  }
  return d.mean() / std::sqrt(v / static_cast<double>(d.size()));
}

// Share of the variance of y explained by the column span of F:
// ||F(F'F)^{-1}F'y||^2 / ||y||^2.
inline double commonality_r2(const Vector& y, const Matrix& F) {
  if (F.rows() != y.size()) throw std::invalid_argument("commonality_r2: length mismatch");
  Eigen::ColPivHouseholderQR<Matrix> qr(F);
  if (qr.rank() < F.cols()) throw std::invalid_argument("commonality_r2: rank-deficient factors");
  const double yy = y.squaredNorm();
  if (yy == 0.0) return 0.0;
  const Vector fitted = F * qr.solve(y);
  return std::min(1.0, fitted.squaredNorm() / yy);
}

// Per-(model, variable, quantile, horizon) loss track.
struct ScoreSeries {
  std::string model, variable;
  double quantile = 0.5;
  int horizon = 1;
  std::vector<double> losses;  // one entry per forecast origin, in time order

  double mean() const {
    if (losses.empty()) return 0.0;
    double s = 0.0;
    for (double x : losses) s += x;
    return s / static_cast<double>(losses.size());
  }
  std::vector<double> cumulative() const {
    std::vector<double> out;
    double s = 0.0;
    for (double x : losses) out.push_back(s += x);
    return out;
  }
};

// Table-shaped report: one row per variable, one column per (quantile,
// horizon) cell, containing the t-statistic of model_a vs model_b; entries
// with |t| > 2 are flagged with '*'.
struct DmCell {
  double quantile;
  int horizon;
  double tstat;
};

inline std::string dm_report_csv(
    const std::map<std::string, std::vector<DmCell>>& rows) {
  std::ostringstream out;
  bool header_done = false;
  for (const auto& [variable, cells] : rows) {
    if (!header_done) {
      out << "variable";
      for (const auto& c : cells) out << ",q" << c.quantile << "_h" << c.horizon;
      out << '\n';
      header_done = true;
    }
    out << variable << std::setprecision(4);
    for (const auto& c : cells) {
      out << ',' << c.tstat;
      if (std::abs(c.tstat) > 2.0) out << '*';
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace qfavar
