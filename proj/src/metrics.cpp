#include "mmehr/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace mmehr {

namespace {

void check_inputs(const char* what, std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size())
    throw ShapeError(what, {static_cast<Index>(scores.size())}, {static_cast<Index>(labels.size())});
  for (double s : scores)
    if (!std::isfinite(s)) throw NonFiniteError(what);
  for (int y : labels)
    if (y != 0 && y != 1) throw Error(std::string(what) + ": labels must be 0 or 1");
}

std::vector<std::size_t> order_by_score(std::span<const double> scores, bool descending) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return descending ? scores[a] > scores[b] : scores[a] < scores[b];
  });
  return order;
}

}  // namespace

double auroc(std::span<const double> scores, std::span<const int> labels) {
  check_inputs("auroc", scores, labels);
  const auto order = order_by_score(scores, false);
  double concordant = 0.0;
  double tied = 0.0;
  double neg_below = 0.0;
  double pos_total = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    double pos = 0.0;
    double neg = 0.0;
    for (; j < order.size() && scores[order[j]] == scores[order[i]]; ++j) (labels[order[j]] ? pos : neg) += 1.0;
    concordant += pos * neg_below;
    tied += pos * neg;
    neg_below += neg;
    pos_total += pos;
    i = j;
  }
  if (pos_total == 0.0 || neg_below == 0.0) throw Error("auroc: undefined when only one class is present");
  return (concordant + 0.5 * tied) / (pos_total * neg_below);
}

double aucpr(std::span<const double> scores, std::span<const int> labels) {
  check_inputs("aucpr", scores, labels);
  const double positives = static_cast<double>(std::count(labels.begin(), labels.end(), 1));
  if (positives == 0.0) throw Error("aucpr: undefined without positive labels");
  const auto order = order_by_score(scores, true);
  double tp = 0.0;
  double fp = 0.0;
  double area = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    double pos = 0.0;
    for (; j < order.size() && scores[order[j]] == scores[order[i]]; ++j) (labels[order[j]] ? pos : fp) += 1.0;
    tp += pos;
    if (pos > 0.0) area += (tp / (tp + fp)) * (pos / positives);
    i = j;
  }
  return area;
}

Confusion confusion(std::span<const double> scores, std::span<const int> labels, double threshold) {
  check_inputs("confusion", scores, labels);
  Confusion c;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool predicted = scores[i] >= threshold;
    if (predicted && labels[i]) ++c.tp;
    else if (predicted) ++c.fp;
    else if (labels[i]) ++c.fn;
    else ++c.tn;
  }
  return c;
}

double f1(std::span<const double> scores, std::span<const int> labels, double threshold) {
  const Confusion c = confusion(scores, labels, threshold);
  if (c.tp == 0) return 0.0;
  const double precision = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
  const double recall = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
  return 2.0 * precision * recall / (precision + recall);
}

EvalResult evaluate(std::span<const double> scores, std::span<const int> labels, double threshold) {
  EvalResult r;
  r.aucroc = auroc(scores, labels);
  r.aucpr = aucpr(scores, labels);
  r.f1 = f1(scores, labels, threshold);
  r.threshold = threshold;
  r.counts = confusion(scores, labels, threshold);
  return r;
}

nlohmann::json eval_to_json(const EvalResult& r) {
  return {{"aucroc", r.aucroc}, {"aucpr", r.aucpr}, {"f1", r.f1}, {"threshold", r.threshold},
          {"tp", r.counts.tp},  {"fp", r.counts.fp},  {"tn", r.counts.tn}, {"fn", r.counts.fn}};
}

MeanStd mean_std(std::span<const double> values) {
  MeanStd m;
  if (values.empty()) return m;
  m.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - m.mean) * (v - m.mean);
    m.stddev = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return m;
}

AggregateResult aggregate(std::span<const EvalResult> runs) {
  std::vector<double> pr, roc, f;
  for (const EvalResult& r : runs) {
    pr.push_back(r.aucpr);
    roc.push_back(r.aucroc);
    f.push_back(r.f1);
  }
  return {mean_std(pr), mean_std(roc), mean_std(f), static_cast<Index>(runs.size())};
}

}  // namespace mmehr
