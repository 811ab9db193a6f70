#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace naslab::stats {

// Correlation of a vector with zero (rank) variance.
class UndefinedCorrelation : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Values aligned to architecture ids; `degenerate` may be empty (none).
struct ScoreVector {
  std::vector<std::string> ids;
  std::vector<double> values;
  std::vector<bool> degenerate;

  std::size_t size() const { return values.size(); }
  bool usable(std::size_t i) const;  // finite and not flagged
  void validate() const;
};

// Average-tie ranks starting at 1.
std::vector<double> fractional_ranks(std::span<const double> v);

double pearson_r(std::span<const double> a, std::span<const double> b);
double spearman_rho(std::span<const double> a, std::span<const double> b);

struct Correlation {
  double value = 0.0;
  std::size_t used = 0;
  std::size_t excluded = 0;  // rows dropped because either side was unusable
};

// Pearson/Spearman over rows usable in both vectors. Ids must match.
Correlation pearson_r(const ScoreVector& a, const ScoreVector& b);
Correlation spearman_rho(const ScoreVector& a, const ScoreVector& b);

struct BinnedVector {
  std::vector<int> bins;
  int n_bins = 1;
  std::vector<double> edges;  // n_bins + 1 entries
  bool constant = false;      // every value equal; single bin
  std::vector<std::string> ids;
};

// round(1 + 3.322 log10 N)
int sturges_bins(std::size_t n);

// Equal-width bins over [min, max]; the maximum falls in the top bin.
BinnedVector bin_equal_width(std::span<const double> v, int n_bins);
BinnedVector bin_sturges(std::span<const double> v, std::optional<int> n_bins = std::nullopt);
BinnedVector bin_sturges(const ScoreVector& v, std::optional<int> n_bins = std::nullopt);

// Plug-in joint entropy (natural log) of the listed variables.
double joint_entropy(std::span<const BinnedVector* const> vars);
double entropy(const BinnedVector& y);
// H(y | z) = H(y, z) - H(z)
double conditional_entropy(const BinnedVector& y, const BinnedVector& z);
// H(y | z1, z2) = H(y, z1, z2) - H(z1, z2)
double conditional_entropy(const BinnedVector& y, const BinnedVector& z1, const BinnedVector& z2);
// H(y | zi) - H(y | zi, zj)
double information_gain(const BinnedVector& y, const BinnedVector& zi, const BinnedVector& zj);

// Pearson correlation between the rankings of a metric and of the bias
// source (parameter count by default at the call sites).
double bias_of(std::span<const double> metric, std::span<const double> bias_source);
Correlation bias_of(const ScoreVector& metric, const ScoreVector& bias_source);

}  // namespace naslab::stats
