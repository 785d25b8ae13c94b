#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

namespace capbench {

struct StatsError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ===== Paired tests =====

// Paired binary outcomes: a = both correct, b = first-only, c = second-only,
// d = both wrong.
struct PairedBinaryTable {
  std::uint64_t a = 0, b = 0, c = 0, d = 0;
};

// Discordant-count threshold: b + c below this uses the exact binomial path,
// at or above it the continuity-corrected chi-square approximation.
inline constexpr std::uint64_t kMcnemarExactThreshold = 25;

// Exact-enumeration limit for the signed-rank test; larger samples use the
// tie-corrected normal approximation with continuity correction.
inline constexpr std::size_t kWilcoxonExactThreshold = 20;

// Two-sided McNemar p-value on the discordant pairs. The exact path computes
// binomial tail counts in integer arithmetic with a single final division, so
// equal inputs give bit-identical p-values. Throws StatsError when b + c = 0.
double mcnemar(const PairedBinaryTable& table);

// Two-sided Wilcoxon signed-rank p-value. Zeros are dropped; ties get
// midranks. The exact path enumerates the sign-assignment null distribution
// by dynamic programming over doubled (integer) ranks. Throws StatsError when
// every difference is zero.
double wilcoxon_signed_rank(const std::vector<double>& differences);

// ===== Fits =====

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double rss = 0.0;
  double r2 = 0.0;
  double se_slope = 0.0;
  double se_intercept = 0.0;
  double t_slope = 0.0;
  double p_slope = 1.0;  // two-sided
  std::size_t n = 0;

  double fitted(double x) const { return slope * x + intercept; }
};

// Least squares y = slope*x + intercept with slope standard error and
// two-sided t-test p-value. Requires n >= 3 and non-constant x.
LinearFit ols_fit(const std::vector<double>& x, const std::vector<double>& y);

struct PowerFit {
  double A = 0.0;
  double k = 0.0;
  double alpha = 1.0;
  double rss = 0.0;
  double r2 = 0.0;
  double se_A = 0.0;
  double se_k = 0.0;
  double se_alpha = 0.0;
  std::size_t n = 0;
  bool converged = false;

  double fitted(double eff) const;
};

struct PowerFitError : StatsError {
  explicit PowerFitError(PowerFit best_so_far);
  PowerFit best;
};

// Least squares for acc = A + k*eff^alpha. Deterministic: a coarse alpha grid
// over [0.1, 5.0] step 0.05 with (A, k) solved in closed form per alpha (ties
// to the smaller alpha), then damped Gauss-Newton refinement of all three
// parameters. Requires n >= 4 and eff values in [0, 1]. Throws PowerFitError
// carrying the best fit so far if refinement hits the iteration cap without
// converging.
PowerFit powerlaw_fit(const std::vector<double>& eff,
                      const std::vector<double>& acc);

// OLS of L2 on accuracy; the interesting outputs are the slope sign and R².
LinearFit accuracy_l2_regression(const std::vector<double>& acc,
                                 const std::vector<double>& l2);

// ===== Correlation =====

// Pearson product-moment coefficient. Requires equal lengths, n >= 3, and
// non-zero variance on both sides.
double pearson(const std::vector<double>& x, const std::vector<double>& y);

// ===== Distribution tails (exposed for reuse and direct testing) =====

double normal_sf(double z);                       // P(Z > z), standard normal
double chi_squared_1_sf(double x);                // survival, 1 degree of freedom
double student_t_two_sided_p(double t, int dof);  // 2 * P(T >= |t|)
double regularized_incomplete_beta(double a, double b, double x);

}  // namespace capbench
