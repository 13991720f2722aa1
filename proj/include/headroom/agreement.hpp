#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace headroom {

// Items x labels; each cell counts the raters who chose that label.
struct AnnotationMatrix {
  std::vector<std::string> labels;
  std::vector<std::vector<std::int64_t>> rows;

  // Common row sum; throws DataError when rows disagree or cells are negative.
  std::int64_t raters() const;
};

struct KappaResult {
  double kappa = 0.0;
  double observed = 0.0;  // mean per-item agreement
  double expected = 0.0;  // sum of squared label proportions
  // Every rating used one label, so chance agreement is 1 and kappa is
  // undefined; kappa is reported as 1.
  bool degenerate = false;
};

// Fleiss (1971). Requires >= 2 items and >= 2 raters per item.
KappaResult fleiss_kappa(const AnnotationMatrix& matrix);

// CSV: header "item,label1,label2,..." (the first column is an item name).
AnnotationMatrix read_annotation_csv(const std::filesystem::path& path);

}  // namespace headroom
