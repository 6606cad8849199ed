#include "mmehr/encoding.hpp"

#include <algorithm>
#include <optional>

namespace mmehr {

EncodedTimeSeries encode_variables(const ClinicalEpisode& episode, const VariableSchema& schema) {
  validate(episode, schema);
  const Index nvars = schema.size();

  // Per variable, per hour: index into episode.observations of the winning observation.
  std::vector<std::vector<std::optional<std::size_t>>> at(static_cast<std::size_t>(nvars),
                                                           std::vector<std::optional<std::size_t>>(kHours));
  for (std::size_t i = 0; i < episode.observations.size(); ++i) {
    const Observation& o = episode.observations[i];
    at[static_cast<std::size_t>(o.variable)][static_cast<std::size_t>(o.hour)] = i;
  }

  EncodedTimeSeries enc{MatrixXd::Zero(kHours, schema.encoded_width())};
  for (Index v = 0; v < nvars; ++v) {
    const VariableSpec& spec = schema.variable(v);
    const Index offset = schema.value_offset(v);
    const Index mask = schema.mask_channel(v);
    std::optional<double> carry_value;
    std::optional<Index> carry_category;
    for (Index t = 0; t < kHours; ++t) {
      const auto& hit = at[static_cast<std::size_t>(v)][static_cast<std::size_t>(t)];
      if (hit) {
        const RawValue& raw = episode.observations[*hit].value;
        if (spec.kind == VariableKind::kCategorical) {
          carry_category = schema.category_index(v, std::get<std::string>(raw));
        } else {
          const double x = std::clamp(std::get<double>(raw), spec.min_value, spec.max_value);
          carry_value = (x - spec.mean) / spec.stddev;
        }
        enc.values(t, mask) = 1.0;
      }
      if (spec.kind == VariableKind::kCategorical) {
        if (carry_category) enc.values(t, offset + *carry_category) = 1.0;
      } else {
        enc.values(t, offset) = carry_value.value_or(spec.default_value);
      }
    }
  }
  return enc;
}

void clear_variable(MatrixXd& encoded, const VariableSchema& schema, Index variable) {
  const VariableSpec& spec = schema.variable(variable);
  const Index offset = schema.value_offset(variable);
  if (spec.kind == VariableKind::kCategorical)
    encoded.middleCols(offset, spec.width()).setZero();
  else
    encoded.col(offset).setConstant(spec.default_value);
  encoded.col(schema.mask_channel(variable)).setZero();
}

}  // namespace mmehr
