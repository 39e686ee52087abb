#pragma once

#include <string>

namespace ambisql {

enum class Provenance { default_gen, infilled, gold_reference, self_corrected };

std::string provenance_name(Provenance p);
Provenance parse_provenance(const std::string& name);

// A single unambiguous natural-language reading of an utterance.
struct Interpretation {
  std::string text;
  Provenance provenance = Provenance::default_gen;
  int ordinal = 0;

  friend bool operator==(const Interpretation&, const Interpretation&) = default;
};

}  // namespace ambisql
