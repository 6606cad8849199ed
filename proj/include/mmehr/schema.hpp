#pragma once

#include "mmehr/tensor.hpp"

#include <json.hpp>

#include <optional>
#include <string>
#include <vector>

namespace mmehr {

inline constexpr Index kHours = 48;

enum class VariableKind { kContinuous, kCategorical };

struct VariableSpec {
  std::string name;
  VariableKind kind = VariableKind::kContinuous;
  std::vector<std::string> categories;
  double mean = 0.0;
  double stddev = 1.0;
  double min_value = 0.0;
  double max_value = 0.0;
  /// Normalised value used before the first observation (continuous only).
  double default_value = 0.0;

  Index width() const { return kind == VariableKind::kCategorical ? static_cast<Index>(categories.size()) : 1; }
};

/// Ordered clinical-variable schema.
///
/// Encoded layout: the value blocks of all variables in schema order, then one
/// mask channel per variable in the same order.
class VariableSchema {
 public:
  static constexpr Index kVariableCount = 17;
  static constexpr Index kEncodedWidth = 76;

  explicit VariableSchema(std::vector<VariableSpec> variables);

  const std::vector<VariableSpec>& variables() const { return variables_; }
  const VariableSpec& variable(Index v) const { return variables_.at(static_cast<std::size_t>(v)); }
  Index size() const { return static_cast<Index>(variables_.size()); }

  Index value_width() const { return value_width_; }
  Index encoded_width() const { return value_width_ + size(); }

  Index value_offset(Index v) const { return offsets_.at(static_cast<std::size_t>(v)); }
  Index mask_channel(Index v) const { return value_width_ + v; }
  /// Every encoded channel that belongs to variable `v` (value block and mask).
  std::vector<Index> channels_of(Index v) const;

  std::optional<Index> find(const std::string& name) const;
  Index index_of(const std::string& name) const;
  Index category_index(Index v, const std::string& label) const;

 private:
  std::vector<VariableSpec> variables_;
  std::vector<Index> offsets_;
  Index value_width_ = 0;
};

/// The 17 ICU variables: 12 continuous plus 5 categorical with cardinalities
/// 2/8/12/12/13 (capillary refill, GCS eye/motor/verbal/total).
VariableSchema default_schema();

nlohmann::json schema_to_json(const VariableSchema& schema);
VariableSchema schema_from_json(const nlohmann::json& j);

}  // namespace mmehr
