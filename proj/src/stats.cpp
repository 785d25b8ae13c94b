#include "capbench/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace capbench {

// ===== Distribution tails =====

double normal_sf(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

double chi_squared_1_sf(double x) {
  if (x <= 0.0) return 1.0;
  return std::erfc(std::sqrt(x / 2.0));
}

// Continued-fraction evaluation (modified Lentz) of the incomplete beta
// function's standard expansion.
static double beta_continued_fraction(double a, double b, double x) {
  constexpr int kMaxIter = 400;
  constexpr double kEps = 3e-16;
  constexpr double kTiny = 1e-300;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEps) break;
  }
  return h;
}

double regularized_incomplete_beta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double ln_front = std::lgamma(a + b) - std::lgamma(a) -
                          std::lgamma(b) + a * std::log(x) +
                          b * std::log1p(-x);
  const double front = std::exp(ln_front);
  if (x < (a + 1.0) / (a + b + 2.0))
    return front * beta_continued_fraction(a, b, x) / a;
  return 1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double student_t_two_sided_p(double t, int dof) {
  if (dof <= 0) throw StatsError("t distribution needs positive dof");
  const double t2 = t * t;
  const double x = dof / (dof + t2);
  return regularized_incomplete_beta(dof / 2.0, 0.5, x);
}

// ===== McNemar =====

double mcnemar(const PairedBinaryTable& table) {
  const std::uint64_t b = table.b, c = table.c;
  const std::uint64_t n = b + c;
  if (n == 0)
    throw StatsError("mcnemar undefined without discordant pairs (b + c = 0)");

  if (n < kMcnemarExactThreshold) {
    // Binomial row via the multiplicative recurrence, exact in 64-bit for
    // n < 25; tails kept as integer counts so the only rounding is the final
    // division by 2^n.
    std::uint64_t coeff = 1;
    std::vector<std::uint64_t> binom(n + 1);
    for (std::uint64_t i = 0; i <= n; ++i) {
      binom[i] = coeff;
      if (i < n) coeff = coeff * (n - i) / (i + 1);
    }
    const std::uint64_t lo = std::min(b, c);
    const std::uint64_t hi = std::max(b, c);
    std::uint64_t tail_low = 0, tail_high = 0;
    for (std::uint64_t i = 0; i <= lo; ++i) tail_low += binom[i];
    for (std::uint64_t i = hi; i <= n; ++i) tail_high += binom[i];
    const std::uint64_t doubled = 2 * std::min(tail_low, tail_high);
    const double p =
        static_cast<double>(doubled) / std::ldexp(1.0, static_cast<int>(n));
    return std::min(1.0, p);
  }

  const double diff = b > c ? static_cast<double>(b - c)
                            : static_cast<double>(c - b);
  const double corrected = std::max(0.0, diff - 1.0);
  const double chi2 = corrected * corrected / static_cast<double>(n);
  return chi_squared_1_sf(chi2);
}

// ===== Wilcoxon signed-rank =====

namespace {

struct RankedDiffs {
  std::vector<std::uint64_t> doubled_ranks;  // per surviving difference
  std::uint64_t w2 = 0;                      // doubled rank sum of positives
  double tie_term = 0.0;                     // sum of t^3 - t over tie groups
  std::size_t n = 0;
};

RankedDiffs rank_differences(const std::vector<double>& differences) {
  std::vector<double> d;
  for (double v : differences)
    if (v != 0.0) d.push_back(v);
  RankedDiffs out;
  out.n = d.size();
  if (d.empty()) return out;

  std::vector<std::size_t> order(d.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
    return std::fabs(d[i]) < std::fabs(d[j]);
  });

  out.doubled_ranks.assign(d.size(), 0);
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() &&
           std::fabs(d[order[j + 1]]) == std::fabs(d[order[i]]))
      ++j;
    // positions i..j (0-based) share the midrank; doubled it is an integer
    const std::uint64_t doubled = static_cast<std::uint64_t>(i + j + 2);
    for (std::size_t k = i; k <= j; ++k) out.doubled_ranks[order[k]] = doubled;
    const double t = static_cast<double>(j - i + 1);
    out.tie_term += t * t * t - t;
    i = j + 1;
  }
  for (std::size_t k = 0; k < d.size(); ++k)
    if (d[k] > 0.0) out.w2 += out.doubled_ranks[k];
  return out;
}

}  // namespace

double wilcoxon_signed_rank(const std::vector<double>& differences) {
  const RankedDiffs r = rank_differences(differences);
  if (r.n == 0)
    throw StatsError("wilcoxon undefined when every difference is zero");
  const std::size_t n = r.n;
  const std::uint64_t total2 = static_cast<std::uint64_t>(n) * (n + 1);

  if (n <= kWilcoxonExactThreshold) {
    // Null distribution of the doubled positive-rank sum by subset-sum DP;
    // counts stay exact in 64-bit (at most 2^20), final division by 2^n is
    // the only floating-point step.
    std::vector<std::uint64_t> count(total2 + 1, 0);
    count[0] = 1;
    for (std::uint64_t rank : r.doubled_ranks)
      for (std::uint64_t w = total2; w >= rank; --w)
        count[w] += count[w - rank];
    std::uint64_t below = 0, above = 0;
    for (std::uint64_t w = 0; w <= r.w2; ++w) below += count[w];
    for (std::uint64_t w = r.w2; w <= total2; ++w) above += count[w];
    const std::uint64_t doubled = 2 * std::min(below, above);
    const double p =
        static_cast<double>(doubled) / std::ldexp(1.0, static_cast<int>(n));
    return std::min(1.0, p);
  }

  const double nn = static_cast<double>(n);
  const double mean2 = nn * (nn + 1.0) / 2.0;
  const double var2 = nn * (nn + 1.0) * (2.0 * nn + 1.0) / 6.0 - r.tie_term / 12.0;
  const double w2 = static_cast<double>(r.w2);
  double z = 0.0;
  if (w2 > mean2)
    z = (w2 - mean2 - 1.0) / std::sqrt(var2);
  else if (w2 < mean2)
    z = (w2 - mean2 + 1.0) / std::sqrt(var2);
  return std::min(1.0, 2.0 * normal_sf(std::fabs(z)));
}

// ===== Linear fit =====

LinearFit ols_fit(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size())
    throw StatsError("ols_fit needs equal-length inputs");
  const std::size_t n = x.size();
  if (n < 3) throw StatsError("ols_fit needs at least 3 points");
  const double nn = static_cast<double>(n);
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / nn;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / nn;
  double sxx = 0.0, sxy = 0.0, tss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    tss += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0) throw StatsError("ols_fit needs non-constant x");

  LinearFit fit;
  fit.n = n;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = y[i] - fit.fitted(x[i]);
    fit.rss += r * r;
  }
  fit.r2 = tss > 0.0 ? 1.0 - fit.rss / tss : 0.0;
  const double s2 = fit.rss / static_cast<double>(n - 2);
  fit.se_slope = std::sqrt(s2 / sxx);
  fit.se_intercept = std::sqrt(s2 * (1.0 / nn + mx * mx / sxx));
  if (fit.se_slope > 0.0) {
    fit.t_slope = fit.slope / fit.se_slope;
    fit.p_slope =
        student_t_two_sided_p(fit.t_slope, static_cast<int>(n) - 2);
  } else {
    fit.t_slope = fit.slope == 0.0 ? 0.0
                  : (fit.slope > 0.0
                         ? std::numeric_limits<double>::infinity()
                         : -std::numeric_limits<double>::infinity());
    fit.p_slope = fit.slope == 0.0 ? 1.0 : 0.0;
  }
  return fit;
}

LinearFit accuracy_l2_regression(const std::vector<double>& acc,
                                 const std::vector<double>& l2) {
  return ols_fit(acc, l2);
}

// ===== Power-law fit =====

PowerFitError::PowerFitError(PowerFit best_so_far)
    : StatsError("power-law refinement hit the iteration cap"),
      best(best_so_far) {}

double PowerFit::fitted(double eff) const {
  return A + k * std::pow(eff, alpha);
}

namespace {

double power_rss(const std::vector<double>& eff, const std::vector<double>& acc,
                 double A, double k, double alpha) {
  double rss = 0.0;
  for (std::size_t i = 0; i < eff.size(); ++i) {
    const double r = acc[i] - (A + k * std::pow(eff[i], alpha));
    rss += r * r;
  }
  return rss;
}

// Closed-form (A, k) for fixed alpha via the 2x2 normal equations.
void solve_offset_scale(const std::vector<double>& eff,
                        const std::vector<double>& acc, double alpha,
                        double& A, double& k) {
  const double n = static_cast<double>(eff.size());
  double su = 0.0, suu = 0.0, sy = 0.0, suy = 0.0;
  for (std::size_t i = 0; i < eff.size(); ++i) {
    const double u = std::pow(eff[i], alpha);
    su += u;
    suu += u * u;
    sy += acc[i];
    suy += u * acc[i];
  }
  const double det = n * suu - su * su;
  if (det <= 0.0 || !std::isfinite(det)) {
    A = sy / n;
    k = 0.0;
    return;
  }
  k = (n * suy - su * sy) / det;
  A = (sy - k * su) / n;
}

// Solves the symmetric 3x3 system H d = g in place; returns false when
// singular even after damping.
bool solve3(double H[3][3], const double g[3], double d[3]) {
  double m[3][4];
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) m[i][j] = H[i][j];
    m[i][3] = g[i];
  }
  for (int col = 0; col < 3; ++col) {
    int pivot = col;
    for (int row = col + 1; row < 3; ++row)
      if (std::fabs(m[row][col]) > std::fabs(m[pivot][col])) pivot = row;
    if (std::fabs(m[pivot][col]) < 1e-300) return false;
    if (pivot != col)
      for (int j = 0; j < 4; ++j) std::swap(m[col][j], m[pivot][j]);
    for (int row = 0; row < 3; ++row) {
      if (row == col) continue;
      const double f = m[row][col] / m[col][col];
      for (int j = col; j < 4; ++j) m[row][j] -= f * m[col][j];
    }
  }
  for (int i = 0; i < 3; ++i) d[i] = m[i][3] / m[i][i];
  return true;
}

}  // namespace

PowerFit powerlaw_fit(const std::vector<double>& eff,
                      const std::vector<double>& acc) {
  if (eff.size() != acc.size())
    throw StatsError("powerlaw_fit needs equal-length inputs");
  const std::size_t n = eff.size();
  if (n < 4) throw StatsError("powerlaw_fit needs at least 4 points");
  for (double e : eff)
    if (!(e >= 0.0 && e <= 1.0))
      throw StatsError("powerlaw_fit efficiencies must lie in [0, 1]");

  // Coarse alpha grid; strictly-better comparisons keep the smaller alpha on
  // ties and make the scan deterministic.
  double best_A = 0.0, best_k = 0.0, best_alpha = 0.1;
  double best_rss = std::numeric_limits<double>::infinity();
  for (int i = 2; i <= 100; ++i) {
    const double alpha = 0.05 * i;
    double A, k;
    solve_offset_scale(eff, acc, alpha, A, k);
    const double rss = power_rss(eff, acc, A, k, alpha);
    if (rss < best_rss) {
      best_rss = rss;
      best_A = A;
      best_k = k;
      best_alpha = alpha;
    }
  }

  // Damped Gauss-Newton (Levenberg style) joint refinement.
  double A = best_A, k = best_k, alpha = best_alpha, rss = best_rss;
  double lambda = 1e-3;
  constexpr int kMaxIter = 200;
  bool converged = false;
  for (int iter = 0; iter < kMaxIter && !converged; ++iter) {
    double H[3][3] = {{0, 0, 0}, {0, 0, 0}, {0, 0, 0}};
    double g[3] = {0, 0, 0};
    for (std::size_t i = 0; i < n; ++i) {
      const double u = std::pow(eff[i], alpha);
      const double j0 = 1.0;
      const double j1 = u;
      const double j2 = eff[i] > 0.0 ? k * u * std::log(eff[i]) : 0.0;
      const double r = acc[i] - (A + k * u);
      const double row[3] = {j0, j1, j2};
      for (int p = 0; p < 3; ++p) {
        g[p] += row[p] * r;
        for (int q = 0; q < 3; ++q) H[p][q] += row[p] * row[q];
      }
    }

    bool stepped = false;
    while (lambda <= 1e12) {
      double Hd[3][3];
      for (int p = 0; p < 3; ++p)
        for (int q = 0; q < 3; ++q)
          Hd[p][q] = H[p][q] + (p == q ? lambda : 0.0);
      double d[3];
      if (!solve3(Hd, g, d)) {
        lambda *= 10.0;
        continue;
      }
      const double A2 = A + d[0];
      const double k2 = k + d[1];
      const double alpha2 = std::clamp(alpha + d[2], 1e-6, 50.0);
      const double rss2 = power_rss(eff, acc, A2, k2, alpha2);
      if (rss2 <= rss) {
        const double step = std::max({std::fabs(d[0]), std::fabs(d[1]),
                                      std::fabs(d[2])});
        const double gain = rss - rss2;
        A = A2;
        k = k2;
        alpha = alpha2;
        rss = rss2;
        lambda = std::max(lambda / 3.0, 1e-12);
        stepped = true;
        if (step < 1e-12 || gain < 1e-15 * (1.0 + rss)) converged = true;
        break;
      }
      lambda *= 10.0;
    }
    if (!stepped) converged = true;  // damping exhausted; stationary point
  }

  PowerFit fit;
  fit.A = A;
  fit.k = k;
  fit.alpha = alpha;
  fit.rss = rss;
  fit.n = n;
  fit.converged = converged;

  double my = std::accumulate(acc.begin(), acc.end(), 0.0) /
              static_cast<double>(n);
  double tss = 0.0;
  for (double y : acc) tss += (y - my) * (y - my);
  fit.r2 = tss > 0.0 ? 1.0 - rss / tss : 0.0;

  // Standard errors from the Gauss-Newton normal matrix at the optimum.
  {
    double H[3][3] = {{0, 0, 0}, {0, 0, 0}, {0, 0, 0}};
    for (std::size_t i = 0; i < n; ++i) {
      const double u = std::pow(eff[i], alpha);
      const double row[3] = {1.0, u,
                             eff[i] > 0.0 ? k * u * std::log(eff[i]) : 0.0};
      for (int p = 0; p < 3; ++p)
        for (int q = 0; q < 3; ++q) H[p][q] += row[p] * row[q];
    }
    const double s2 =
        n > 3 ? rss / static_cast<double>(n - 3) : 0.0;
    const double unit[3][3] = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
    double inv_col[3];
    double se[3] = {std::nan(""), std::nan(""), std::nan("")};
    bool ok = true;
    for (int c = 0; c < 3 && ok; ++c) {
      double Hc[3][3];
      for (int p = 0; p < 3; ++p)
        for (int q = 0; q < 3; ++q) Hc[p][q] = H[p][q];
      ok = solve3(Hc, unit[c], inv_col);
      if (ok) se[c] = std::sqrt(std::max(0.0, s2 * inv_col[c]));
    }
    fit.se_A = se[0];
    fit.se_k = se[1];
    fit.se_alpha = se[2];
  }

  if (!converged) throw PowerFitError(fit);
  return fit;
}

// ===== Pearson =====

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size())
    throw StatsError("pearson needs equal-length inputs");
  const std::size_t n = x.size();
  if (n < 3) throw StatsError("pearson needs at least 3 pairs");
  const double nn = static_cast<double>(n);
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / nn;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / nn;
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0)
    throw StatsError("pearson undefined for zero-variance input");
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace capbench
