#include "headroom/fightin.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <map>

#include "headroom/csv.hpp"
#include "headroom/error.hpp"

namespace headroom {

PriorVector prior_from_counts(const CategoryCounts& reference, double scale, double epsilon) {
  if (!(scale > 0.0)) throw ConfigError("prior scale must be positive");
  if (reference.counts.empty()) throw DataError("reference counts have no categories");
  const auto total = reference.sum();
  if (total <= 0) throw DataError("reference counts are all zero; cannot build an informative prior");

  PriorVector prior;
  prior.names = reference.names;
  const double denom = static_cast<double>(total) + epsilon * static_cast<double>(reference.counts.size());
  prior.alpha.reserve(reference.counts.size());
  for (auto count : reference.counts) prior.alpha.push_back(scale * (static_cast<double>(count) + epsilon) / denom);
  prior.alpha0 = scale;
  return prior;
}

PriorVector uniform_prior(const std::vector<std::string>& names, double scale) {
  if (!(scale > 0.0)) throw ConfigError("prior scale must be positive");
  if (names.empty()) throw DataError("uniform prior needs at least one category");
  PriorVector prior;
  prior.names = names;
  prior.alpha.assign(names.size(), scale / static_cast<double>(names.size()));
  prior.alpha0 = scale;
  return prior;
}

CategoryCounts align_counts(const CategoryCounts& reference, const std::vector<std::string>& names) {
  std::map<std::string, std::int64_t> by_name;
  for (std::size_t i = 0; i < reference.names.size(); ++i) by_name[reference.names[i]] += reference.counts[i];
  CategoryCounts aligned;
  aligned.names = names;
  aligned.total_tokens = reference.total_tokens;
  for (const auto& name : names) {
    auto it = by_name.find(name);
    aligned.counts.push_back(it == by_name.end() ? 0 : it->second);
  }
  return aligned;
}

LogOddsResult log_odds(const CategoryCounts& counts_i, const CategoryCounts& counts_j, const PriorVector& prior) {
  if (counts_i.names != prior.names || counts_j.names != prior.names)
    throw DataError("category counts and prior use different category sets");
  if (prior.alpha.size() != prior.names.size()) throw DataError("prior has mismatched alpha length");

  const auto n_i = static_cast<double>(counts_i.sum());
  const auto n_j = static_cast<double>(counts_j.sum());
  const double a0 = prior.alpha0;

  LogOddsResult result;
  result.categories.reserve(prior.names.size());
  for (std::size_t c = 0; c < prior.names.size(); ++c) {
    const double a = prior.alpha[c];
    if (!(a > 0.0)) throw DataError("prior alpha for category '" + prior.names[c] + "' is not positive");
    const double y_i = static_cast<double>(counts_i.counts[c]);
    const double y_j = static_cast<double>(counts_j.counts[c]);
    const double rest_i = n_i + a0 - y_i - a;
    const double rest_j = n_j + a0 - y_j - a;
    if (!(rest_i > 0.0) || !(rest_j > 0.0))
      throw DataError("log-odds denominator is not positive for category '" + prior.names[c] +
                      "'; the prior scale is too small for this category's share");

    CategoryLogOdds out;
    out.category = prior.names[c];
    out.delta = std::log((y_i + a) / rest_i) - std::log((y_j + a) / rest_j);
    out.variance = 1.0 / (y_i + a) + 1.0 / (y_j + a);
    out.zscore = out.delta / std::sqrt(out.variance);
    result.categories.push_back(std::move(out));
  }
  return result;
}

RankedCategories top_k(const LogOddsResult& result, int k, Direction direction) {
  if (k < 1) throw ConfigError("top_k needs k >= 1");
  std::vector<const CategoryLogOdds*> order;
  for (const auto& c : result.categories) order.push_back(&c);
  std::sort(order.begin(), order.end(), [direction](const CategoryLogOdds* a, const CategoryLogOdds* b) {
    if (a->delta != b->delta) return direction == Direction::Positive ? a->delta > b->delta : a->delta < b->delta;
    return a->category < b->category;
  });

  RankedCategories ranked;
  auto count = static_cast<std::size_t>(k);
  if (count > order.size()) {
    ranked.clamped = true;
    count = order.size();
  }
  for (std::size_t i = 0; i < count; ++i) ranked.entries.emplace_back(order[i]->category, order[i]->delta);
  return ranked;
}

void write_log_odds_csv(const std::string& group_i, const std::string& group_j, const LogOddsResult& result,
                        std::ostream& out, bool header) {
  if (header) out << "group_i,group_j,category,delta,variance,zscore\n";
  for (const auto& c : result.categories) {
    out << csv::escape(group_i) << ',' << csv::escape(group_j) << ',' << csv::escape(c.category) << ','
        << fmt::format("{},{},{}", c.delta, c.variance, c.zscore) << '\n';
  }
}

}  // namespace headroom
