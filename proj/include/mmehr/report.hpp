#pragma once

#include "mmehr/attribution.hpp"
#include "mmehr/metrics.hpp"

#include <json.hpp>

#include <filesystem>

namespace mmehr {

inline constexpr std::string_view kVersion = "0.3.0";

struct ModelSummary {
  std::string model;
  AggregateResult result;
};

/// model,aucpr_mean,aucpr_std,aucroc_mean,aucroc_std,f1_mean,f1_std,seeds
std::string metrics_csv(const std::vector<ModelSummary>& rows);

/// episode,note,hour,position,token,score,rank (rank within the note, 1 = highest).
std::string token_attributions_csv(const std::vector<TokenAttribution>& attributions);

/// Per-episode F(x), F(x'), residual and step count, plus the worst residual.
nlohmann::json attribution_summary(const std::vector<TokenAttribution>& attributions);

/// word,count sorted by count then word.
std::string frequency_csv(const std::map<std::string, Index>& counts);

/// Stand-alone page with every note's tokens shaded by score.
std::string token_heatmap_html(const std::vector<TokenAttribution>& attributions,
                               const std::vector<std::vector<NoteEvent>>& notes);

/// variable,mean_abs,mean_signed,stderr,estimator in schema order.
std::string shapley_csv(const ShapleyReport& report);

/// Horizontal bar chart of the `top` variables by mean |phi|.
std::string shapley_bar_svg(const ShapleyReport& report, std::size_t top = 10);

/// Written next to every output as manifest.json.
nlohmann::json run_manifest(std::string_view command, const nlohmann::json& arguments,
                            const std::vector<std::string>& outputs);

void write_json(const std::filesystem::path& path, const nlohmann::json& j);

}  // namespace mmehr
