#include "fairsel/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "fairsel/harness.hpp"
#include "fairsel/random.hpp"

namespace fairsel {

std::string synthetic_csv(const SyntheticConfig& config) {
  Rng rng(config.seed);
  std::ostringstream out;
  out << "income,tenure,score,region,group,outcome\n";
  static const char* regions[] = {"north", "south", "west"};
  static const double region_effect[] = {0.3, -0.2, 0.0};
  for (std::size_t i = 0; i < config.rows; ++i) {
    const bool privileged = rng.bernoulli(config.privileged_share);
    const double income = rng.uniform();
    const double tenure = rng.uniform();
    const double score = rng.uniform();
    const auto region = static_cast<std::size_t>(rng.below(3));
    const double z = 2.5 * (income - 0.5) + 1.5 * (tenure - 0.5) + 0.5 * (score - 0.5) + region_effect[region];
    double p = 1.0 / (1.0 + std::exp(-z));
    p += privileged ? config.bias / 2.0 : -config.bias / 2.0;
    p = std::clamp(p, 0.0, 1.0);
    const bool favorable = rng.bernoulli(p);
    out << format_double(std::round(income * 1e4) / 1e4) << ',' << format_double(std::round(tenure * 1e4) / 1e4)
        << ',' << format_double(std::round(score * 1e4) / 1e4) << ',' << regions[region] << ','
        << (privileged ? "A" : "B") << ',' << (favorable ? "yes" : "no") << '\n';
  }
  return out.str();
}

DatasetSpec synthetic_spec(const std::string& name) {
  DatasetSpec spec;
  spec.name = name;
  spec.label_column = "outcome";
  spec.favorable_value = "yes";
  spec.protected_column = "group";
  spec.privileged_value = "A";
  spec.feature_columns = {{"income", FeatureKind::numeric},
                          {"tenure", FeatureKind::numeric},
                          {"score", FeatureKind::numeric},
                          {"region", FeatureKind::categorical, CategoricalEncoding::one_hot}};
  return spec;
}

}  // namespace fairsel
