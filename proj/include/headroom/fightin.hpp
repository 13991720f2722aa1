#pragma once

#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "headroom/lexicon.hpp"

namespace headroom {

// Informative Dirichlet prior over categories.
struct PriorVector {
  std::vector<std::string> names;
  std::vector<double> alpha;  // all > 0
  double alpha0 = 0.0;        // sum of alpha
};

inline constexpr double kPriorEpsilon = 0.01;
inline constexpr double kDefaultPriorScale = 500.0;

// alpha_c = scale * (count_c + eps) / (sum counts + eps * |C|), so alpha0 == scale.
PriorVector prior_from_counts(const CategoryCounts& reference, double scale, double epsilon = kPriorEpsilon);

// Fallback when no reference corpus is available: alpha_c = scale / |C|.
PriorVector uniform_prior(const std::vector<std::string>& names, double scale);

// Reorders reference counts onto `names`; categories absent from the
// reference get 0, extra reference categories are dropped.
CategoryCounts align_counts(const CategoryCounts& reference, const std::vector<std::string>& names);

struct CategoryLogOdds {
  std::string category;
  double delta = 0.0;
  double variance = 0.0;
  double zscore = 0.0;
};

struct LogOddsResult {
  std::vector<CategoryLogOdds> categories;  // prior's category order
};

// Log-odds ratio of group i over group j with an informative Dirichlet prior:
//   delta_c = ln((y_i+a)/(n_i+a0-y_i-a)) - ln((y_j+a)/(n_j+a0-y_j-a))
//   var_c   = 1/(y_i+a) + 1/(y_j+a)
// where n is the sum of the group's category counts. Throws DataError naming
// the category when an odds denominator is not positive.
LogOddsResult log_odds(const CategoryCounts& counts_i, const CategoryCounts& counts_j, const PriorVector& prior);

enum class Direction { Positive, Negative };

struct RankedCategories {
  std::vector<std::pair<std::string, double>> entries;  // (category, delta)
  bool clamped = false;  // k exceeded the number of categories
};

// Largest (Positive) or smallest (Negative) deltas; ties broken by name.
RankedCategories top_k(const LogOddsResult& result, int k, Direction direction);

// Columns: group_i, group_j, category, delta, variance, zscore.
void write_log_odds_csv(const std::string& group_i, const std::string& group_j, const LogOddsResult& result,
                        std::ostream& out, bool header = true);

}  // namespace headroom
