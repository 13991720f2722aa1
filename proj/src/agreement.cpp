#include "headroom/agreement.hpp"

#include <charconv>
#include <fstream>

#include "headroom/csv.hpp"
#include "headroom/error.hpp"

namespace headroom {

std::int64_t AnnotationMatrix::raters() const {
  if (rows.empty()) throw DataError("annotation matrix has no items");
  std::int64_t n = -1;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (!labels.empty() && rows[i].size() != labels.size())
      throw DataError("item " + std::to_string(i) + " has the wrong number of label columns");
    std::int64_t sum = 0;
    for (auto c : rows[i]) {
      if (c < 0) throw DataError("negative rating count in item " + std::to_string(i));
      sum += c;
    }
    if (n < 0) n = sum;
    if (sum != n)
      throw DataError("item " + std::to_string(i) + " has " + std::to_string(sum) + " ratings, expected " +
                      std::to_string(n));
  }
  return n;
}

KappaResult fleiss_kappa(const AnnotationMatrix& matrix) {
  const auto n = matrix.raters();
  const auto items = matrix.rows.size();
  if (items < 2) throw DataError("Fleiss' kappa needs at least 2 items");
  if (n < 2) throw DataError("Fleiss' kappa needs at least 2 raters per item");
  const auto categories = matrix.rows.front().size();

  std::vector<double> label_totals(categories, 0.0);
  double agreement_sum = 0.0;
  const double nd = static_cast<double>(n);
  for (const auto& row : matrix.rows) {
    if (row.size() != categories) throw DataError("items have different numbers of label columns");
    double pairs = 0.0;
    for (std::size_t j = 0; j < categories; ++j) {
      const double c = static_cast<double>(row[j]);
      pairs += c * (c - 1.0);
      label_totals[j] += c;
    }
    agreement_sum += pairs / (nd * (nd - 1.0));
  }

  KappaResult result;
  const double total = nd * static_cast<double>(items);
  result.observed = agreement_sum / static_cast<double>(items);
  for (double t : label_totals) result.expected += (t / total) * (t / total);
  if (result.expected >= 1.0) {
    result.degenerate = true;
    result.kappa = 1.0;
    return result;
  }
  result.kappa = (result.observed - result.expected) / (1.0 - result.expected);
  return result;
}

AnnotationMatrix read_annotation_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open annotation matrix " + path.string());
  csv::Reader reader(in);
  auto header = reader.next();
  if (!header || header->size() < 3)
    throw ParseError(path.string(), 1, "header must be item,label1,label2,... with at least two labels");

  AnnotationMatrix matrix;
  matrix.labels.assign(header->begin() + 1, header->end());
  while (auto row = reader.next()) {
    if (row->size() != header->size())
      throw ParseError(path.string(), reader.record_line(), "wrong number of fields");
    std::vector<std::int64_t> counts;
    for (std::size_t i = 1; i < row->size(); ++i) {
      const auto& text = (*row)[i];
      std::int64_t value = 0;
      auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
      if (ec != std::errc{} || ptr != text.data() + text.size() || value < 0)
        throw ParseError(path.string(), reader.record_line(), "cell '" + text + "' is not a non-negative integer");
      counts.push_back(value);
    }
    matrix.rows.push_back(std::move(counts));
  }
  return matrix;
}

}  // namespace headroom
