#pragma once

#include "mmehr/tensor.hpp"

#include <json.hpp>

#include <span>

namespace mmehr {

/// Mann-Whitney AUROC: (concordant + 0.5 * tied) / (#pos * #neg).
/// Throws when only one class is present.
double auroc(std::span<const double> scores, std::span<const int> labels);

/// Average precision over a descending score sweep with tied scores grouped
/// (step interpolation). Throws when there are no positives.
double aucpr(std::span<const double> scores, std::span<const int> labels);

struct Confusion {
  Index tp = 0;
  Index fp = 0;
  Index tn = 0;
  Index fn = 0;
};

/// Scores >= threshold are predicted positive.
Confusion confusion(std::span<const double> scores, std::span<const int> labels, double threshold = 0.5);

/// 2PR/(P+R); 0 when nothing is predicted positive or there are no true positives.
double f1(std::span<const double> scores, std::span<const int> labels, double threshold = 0.5);

struct EvalResult {
  double aucroc = 0.0;
  double aucpr = 0.0;
  double f1 = 0.0;
  double threshold = 0.5;
  Confusion counts;
};

EvalResult evaluate(std::span<const double> scores, std::span<const int> labels, double threshold = 0.5);

nlohmann::json eval_to_json(const EvalResult& r);

struct MeanStd {
  double mean = 0.0;
  double stddev = 0.0;
};

/// Sample standard deviation (n - 1); zero for a single value.
MeanStd mean_std(std::span<const double> values);

struct AggregateResult {
  MeanStd aucpr;
  MeanStd aucroc;
  MeanStd f1;
  Index seeds = 0;
};

AggregateResult aggregate(std::span<const EvalResult> runs);

}  // namespace mmehr
