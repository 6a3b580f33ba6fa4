#include "rankprop/rankdist.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numbers>
#include <ostream>

#include <Eigen/Dense>

namespace rankprop {

double SquareMatrix::max_row_residual() const {
  double worst = 0.0;
  for (std::size_t r = 0; r < n_; ++r) {
    double s = 0.0;
    for (double v : row(r)) s += v;
    worst = std::max(worst, std::abs(s - 1.0));
  }
  return worst;
}

double SquareMatrix::max_col_residual() const {
  double worst = 0.0;
  for (std::size_t c = 0; c < n_; ++c) {
    double s = 0.0;
    for (std::size_t r = 0; r < n_; ++r) s += (*this)(r, c);
    worst = std::max(worst, std::abs(s - 1.0));
  }
  return worst;
}

double contest_probability(double s_d, double s_z, double sigma) {
  if (!(sigma > 0.0)) throw std::invalid_argument("contest_probability: sigma must be positive");
  const double gap = s_d - s_z;
  // Phi(gap / (sigma sqrt 2)) = 0.5 erfc(-gap / (2 sigma))
  const double tail = 0.5 * std::erfc(std::abs(gap) / (2.0 * sigma));
  return gap >= 0.0 ? 1.0 - tail : tail;
}

double log_normal_cdf(double x) {
  if (x < -30.0) {
    // Asymptotic expansion of the Mills ratio.
    const double x2 = x * x;
    const double inv = 1.0 / x2;
    const double series = 1.0 - inv * (1.0 - inv * (3.0 - inv * (15.0 - inv * 105.0)));
    return -0.5 * x2 - std::log(-x) - 0.5 * std::log(2.0 * std::numbers::pi) + std::log(series);
  }
  if (x > 0.0) return std::log1p(-0.5 * std::erfc(x / std::numbers::sqrt2));
  return std::log(0.5 * std::erfc(-x / std::numbers::sqrt2));
}

SquareMatrix contest_matrix(std::span<const double> scores, double sigma) {
  SquareMatrix w(scores.size());
  for (std::size_t d = 0; d < scores.size(); ++d) {
    for (std::size_t z = 0; z < scores.size(); ++z) {
      w(d, z) = d == z ? 0.5 : contest_probability(scores[d], scores[z], sigma);
    }
  }
  return w;
}

double lookup_score(const ScoreTable& scores, const QueryId& q, DocId d) {
  auto it = scores.find(q);
  if (it == scores.end() || d.value >= it->second.size()) {
    throw std::out_of_range("missing imitation score for query '" + q.value + "' doc " +
                            std::to_string(d.value));
  }
  const double s = it->second[d.value];
  if (!std::isfinite(s)) {
    throw std::out_of_range("non-finite imitation score for query '" + q.value + "' doc " +
                            std::to_string(d.value));
  }
  return s;
}

double sigma_log_likelihood(std::span<const double> score_gaps, double sigma) {
  const double scale = 1.0 / (sigma * std::numbers::sqrt2);
  double total = 0.0;
  for (double g : score_gaps) total += log_normal_cdf(g * scale);
  return total;
}

std::vector<double> logged_score_gaps(const LoggedDataset& ds, const ScoreTable& scores) {
  std::vector<double> gaps;
  std::vector<double> s;
  for (const auto& rec : ds.records) {
    s.clear();
    for (DocId d : rec.impression.docs) s.push_back(lookup_score(scores, rec.impression.query, d));
    for (std::size_t i = 0; i + 1 < s.size(); ++i) {
      for (std::size_t j = i + 1; j < s.size(); ++j) gaps.push_back(s[i] - s[j]);
    }
  }
  return gaps;
}

SigmaEstimate infer_sigma_from_gaps(std::span<const double> score_gaps, const SigmaSearch& search) {
  if (score_gaps.empty()) throw std::invalid_argument("infer_sigma: no logged pairs");
  if (!(search.log_lo < search.log_hi) || search.grid_points < 2 || !(search.tolerance > 0.0)) {
    throw std::invalid_argument("infer_sigma: invalid search settings");
  }
  // Logged lists repeat, so gaps do too: evaluate each distinct gap once.
  std::vector<double> sorted(score_gaps.begin(), score_gaps.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<std::pair<double, double>> distinct;  // (gap, multiplicity)
  for (double g : sorted) {
    if (!distinct.empty() && distinct.back().first == g) {
      distinct.back().second += 1.0;
    } else {
      distinct.emplace_back(g, 1.0);
    }
  }
  auto f = [&](double log_sigma) {
    const double scale = 1.0 / (std::exp(log_sigma) * std::numbers::sqrt2);
    double total = 0.0;
    for (const auto& [g, count] : distinct) total += count * log_normal_cdf(g * scale);
    return total;
  };

  const std::size_t n = search.grid_points;
  const double step = (search.log_hi - search.log_lo) / static_cast<double>(n - 1);
  std::vector<double> grid(n), values(n);
  std::size_t best = 0;
  for (std::size_t i = 0; i < n; ++i) {
    grid[i] = i + 1 == n ? search.log_hi : search.log_lo + step * static_cast<double>(i);
    values[i] = f(grid[i]);
    if (values[i] > values[best]) best = i;
  }

  double a = grid[best == 0 ? 0 : best - 1];
  double b = grid[std::min(best + 1, n - 1)];
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = f(c), fd = f(d);
  while (b - a > search.tolerance) {
    if (fc >= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = f(d);
    }
  }
  double arg = 0.5 * (a + b);
  double val = f(arg);
  const double at_lo = values.front(), at_hi = values.back();
  if (at_lo >= val && at_lo >= at_hi) {
    arg = search.log_lo;
    val = at_lo;
  } else if (at_hi >= val) {
    arg = search.log_hi;
    val = at_hi;
  }
  return SigmaEstimate{std::exp(arg), arg, val, search.log_lo, search.log_hi};
}

SigmaEstimate infer_sigma(const LoggedDataset& ds, const ScoreTable& scores,
                          const SigmaSearch& search) {
  const auto gaps = logged_score_gaps(ds, scores);
  return infer_sigma_from_gaps(gaps, search);
}

RankDistribution rank_distribution_unnormalized(std::span<const double> scores, double sigma) {
  if (!(sigma > 0.0)) throw std::invalid_argument("rank_distribution: sigma must be positive");
  for (double s : scores) {
    if (!std::isfinite(s)) throw std::invalid_argument("rank_distribution: non-finite score");
  }
  const std::size_t k = scores.size();
  RankDistribution dist(k);
  for (std::size_t d = 0; d < k; ++d) {
    auto mass = dist.row(d);
    mass[0] = 1.0;
    std::size_t placed = 1;  // ranks the anchor can occupy so far
    for (std::size_t z = 0; z < k; ++z) {
      if (z == d) continue;
      const double win = contest_probability(scores[d], scores[z], sigma);
      const double lose = 1.0 - win;
      for (std::size_t r = placed; r > 0; --r) mass[r] = win * mass[r] + lose * mass[r - 1];
      mass[0] *= win;
      ++placed;
    }
  }
  return dist;
}

namespace {

void sinkhorn_sweep(SquareMatrix& a, std::vector<double>& col) {
  const std::size_t n = a.size();
  for (std::size_t r = 0; r < n; ++r) {
    auto row = a.row(r);
    double s = 0.0;
    for (double v : row) s += v;
    if (!(s > 0.0)) throw std::invalid_argument("sinkhorn_normalize: zero row");
    for (double& v : row) v /= s;
  }
  std::fill(col.begin(), col.end(), 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < n; ++c) col[c] += a(r, c);
  }
  for (std::size_t c = 0; c < n; ++c) {
    if (!(col[c] > 0.0)) throw std::invalid_argument("sinkhorn_normalize: zero column");
  }
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < n; ++c) a(r, c) /= col[c];
  }
}

// Gradient of f(x, y) = sum_ij a_ij e^(x_i + y_j) - sum x - sum y, with the
// last column scaling fixed at zero: (row sums - 1, column sums - 1 except last).
Eigen::VectorXd balance_gradient(const SquareMatrix& a) {
  const std::size_t n = a.size();
  Eigen::VectorXd g = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(2 * n - 1));
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < n; ++c) {
      g(static_cast<Eigen::Index>(r)) += a(r, c);
      if (c + 1 < n) g(static_cast<Eigen::Index>(n + c)) += a(r, c);
    }
  }
  return g.array() - 1.0;
}

SquareMatrix rescaled(const SquareMatrix& a, const Eigen::VectorXd& step) {
  const std::size_t n = a.size();
  SquareMatrix out = a;
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < n; ++c) {
      const double y = c + 1 < n ? step(static_cast<Eigen::Index>(n + c)) : 0.0;
      out(r, c) *= std::exp(step(static_cast<Eigen::Index>(r)) + y);
    }
  }
  return out;
}

// One damped Newton step on the log scalings of a; returns false when no
// step reduces the gradient norm.
bool newton_step(SquareMatrix& a) {
  const std::size_t n = a.size();
  const auto m = static_cast<Eigen::Index>(2 * n - 1);
  const Eigen::VectorXd g = balance_gradient(a);
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(m, m);
  for (std::size_t r = 0; r < n; ++r) {
    const auto ri = static_cast<Eigen::Index>(r);
    for (std::size_t c = 0; c < n; ++c) {
      h(ri, ri) += a(r, c);
      if (c + 1 < n) {
        const auto ci = static_cast<Eigen::Index>(n + c);
        h(ci, ci) += a(r, c);
        h(ri, ci) = a(r, c);
        h(ci, ri) = a(r, c);
      }
    }
  }
  const Eigen::VectorXd delta = h.ldlt().solve(-g);
  if (!delta.allFinite()) return false;
  const double g0 = g.lpNorm<Eigen::Infinity>();
  for (double t = 1.0; t > 1e-10; t *= 0.5) {
    SquareMatrix trial = rescaled(a, t * delta);
    if (balance_gradient(trial).lpNorm<Eigen::Infinity>() < g0) {
      a = std::move(trial);
      return true;
    }
  }
  return false;
}

}  // namespace

SinkhornResult sinkhorn_normalize(const SquareMatrix& m, const SinkhornOptions& options) {
  const std::size_t n = m.size();
  SinkhornResult res{m, 0, 0.0};
  SquareMatrix& a = res.matrix;
  for (std::size_t r = 0; r < n; ++r) {
    for (double& v : a.row(r)) {
      if (!(v >= 0.0) || !std::isfinite(v)) {
        throw std::invalid_argument("sinkhorn_normalize: entries must be finite and nonnegative");
      }
      v += options.floor;
    }
  }
  std::vector<double> col(n);
  auto residual = [&] { return std::max(a.max_row_residual(), a.max_col_residual()); };
  // At least one sweep, so the floor is always rebalanced away.
  bool newton = false;
  do {
    if (res.iterations == options.max_iterations) throw SinkhornError(res.iterations, residual());
    if (n > 1 && res.iterations >= options.newton_after) newton = true;
    if (!newton || !newton_step(a)) sinkhorn_sweep(a, col);
    ++res.iterations;
    res.residual = residual();
  } while (res.residual >= options.tolerance);
  return res;
}

RankDistribution rank_distribution(std::span<const double> scores, double sigma,
                                   const SinkhornOptions& options) {
  return sinkhorn_normalize(rank_distribution_unnormalized(scores, sigma), options).matrix;
}

RankDistribution impression_rank_distribution(const Impression& impression,
                                              const ScoreTable& scores, double sigma,
                                              const SinkhornOptions& options) {
  std::vector<double> s;
  s.reserve(impression.size());
  for (DocId d : impression.docs) s.push_back(lookup_score(scores, impression.query, d));
  return rank_distribution(s, sigma, options);
}

double propensity(const Impression& impression, std::size_t k, const ScoreTable& scores,
                  double sigma, const SinkhornOptions& options) {
  if (k == 0 || k > impression.size()) throw std::out_of_range("propensity: rank out of range");
  const auto dist = impression_rank_distribution(impression, scores, sigma, options);
  return dist(k - 1, k - 1);
}

void write_rank_distribution(std::ostream& out, std::size_t index, const Impression& impression,
                             const RankDistribution& dist) {
  out << "# impression " << index << " query " << impression.query.value << " K " << dist.size()
      << '\n';
  char buf[32];
  for (std::size_t r = 0; r < dist.size(); ++r) {
    for (std::size_t c = 0; c < dist.size(); ++c) {
      auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), dist(r, c));
      if (c) out << ' ';
      out.write(buf, ptr - buf);
    }
    out << '\n';
  }
}

}  // namespace rankprop
