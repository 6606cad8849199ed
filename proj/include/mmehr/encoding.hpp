#pragma once

#include "mmehr/episode.hpp"

namespace mmehr {

/// L x 76 clinical-variable matrix: value blocks followed by mask channels.
struct EncodedTimeSeries {
  MatrixXd values;

  Index hours() const { return values.rows(); }
  Index width() const { return values.cols(); }
};

/// One-hot/z-normalised encoding with forward fill.
///
/// - continuous: (raw - mean) / std, clipped to the schema range first
/// - categorical: one-hot block; all-zero before the first observation
/// - mask channel of a variable is 1 exactly at hours carrying a real observation
/// - several observations of one variable in one hour: the last one wins
EncodedTimeSeries encode_variables(const ClinicalEpisode& episode, const VariableSchema& schema);

/// The encoding of a variable that was never observed: default values and zero masks.
void clear_variable(MatrixXd& encoded, const VariableSchema& schema, Index variable);

}  // namespace mmehr
