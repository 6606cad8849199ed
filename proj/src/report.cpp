#include "mmehr/report.hpp"
#include "mmehr/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace mmehr {

namespace {

std::string num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string html_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

std::string metrics_csv(const std::vector<ModelSummary>& rows) {
  std::ostringstream os;
  os << "model,aucpr_mean,aucpr_std,aucroc_mean,aucroc_std,f1_mean,f1_std,seeds\n";
  for (const auto& r : rows) {
    const AggregateResult& a = r.result;
    os << csv_field(r.model) << ',' << num(a.aucpr.mean) << ',' << num(a.aucpr.stddev) << ',' << num(a.aucroc.mean)
       << ',' << num(a.aucroc.stddev) << ',' << num(a.f1.mean) << ',' << num(a.f1.stddev) << ',' << a.seeds << '\n';
  }
  return os.str();
}

std::string token_attributions_csv(const std::vector<TokenAttribution>& attributions) {
  std::ostringstream os;
  os << "episode,note,hour,position,token,score,rank\n";
  for (const auto& a : attributions) {
    for (const auto& note : tokens_by_note(a)) {
      std::vector<std::size_t> order(note.size());
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
      std::stable_sort(order.begin(), order.end(),
                       [&](std::size_t x, std::size_t y) { return note[x].score > note[y].score; });
      std::vector<std::size_t> rank(note.size());
      for (std::size_t r = 0; r < order.size(); ++r) rank[order[r]] = r + 1;
      for (std::size_t i = 0; i < note.size(); ++i)
        os << csv_field(a.episode_id) << ',' << note[i].note << ',' << note[i].hour << ',' << note[i].position << ','
           << csv_field(note[i].token) << ',' << num(note[i].score) << ',' << rank[i] << '\n';
    }
  }
  return os.str();
}

nlohmann::json attribution_summary(const std::vector<TokenAttribution>& attributions) {
  nlohmann::json episodes = nlohmann::json::array();
  double worst = 0.0;
  for (const auto& a : attributions) {
    worst = std::max(worst, a.residual);
    episodes.push_back({{"episode", a.episode_id},
                        {"granularity", a.token_level ? "token" : "hour"},
                        {"steps", a.steps},
                        {"output", a.output},
                        {"baseline_output", a.baseline_output},
                        {"residual", a.residual},
                        {"hour_scores", a.hour_scores}});
  }
  return {{"episodes", episodes}, {"max_residual", worst}};
}

std::string frequency_csv(const std::map<std::string, Index>& counts) {
  std::vector<std::pair<std::string, Index>> rows(counts.begin(), counts.end());
  std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  std::ostringstream os;
  os << "word,count\n";
  for (const auto& [word, n] : rows) os << csv_field(word) << ',' << n << '\n';
  return os.str();
}

std::string token_heatmap_html(const std::vector<TokenAttribution>& attributions,
                               const std::vector<std::vector<NoteEvent>>& notes) {
  if (attributions.size() != notes.size()) throw Error("token_heatmap_html: attribution and note counts differ");
  std::ostringstream os;
  os << "<!doctype html>\n<html><head><meta charset=\"utf-8\"><title>Note token attributions</title>\n"
        "<style>body{font-family:sans-serif;max-width:60em;margin:auto}"
        ".note{margin:.5em 0;line-height:1.8}.tok{padding:1px 2px;border-radius:2px}</style></head><body>\n";
  for (std::size_t e = 0; e < attributions.size(); ++e) {
    const TokenAttribution& a = attributions[e];
    double scale = 0.0;
    for (const auto& t : a.tokens) scale = std::max(scale, std::abs(t.score));
    if (scale == 0.0) scale = 1.0;
    os << "<h2>" << html_escape(a.episode_id) << "</h2>\n<p>F(x) = " << num(a.output)
       << ", residual = " << num(a.residual) << "</p>\n";
    for (const auto& note : tokens_by_note(a)) {
      if (note.empty()) continue;
      os << "<div class=\"note\"><b>hour " << note.front().hour << ":</b> ";
      for (const auto& t : note) {
        const double s = t.score / scale;
        const int alpha = static_cast<int>(std::lround(std::abs(s) * 100));
        const char* rgb = s >= 0 ? "220,40,40" : "40,80,220";
        os << "<span class=\"tok\" title=\"" << num(t.score) << "\" style=\"background:rgba(" << rgb << ','
           << alpha / 100.0 << ")\">" << html_escape(t.token) << "</span> ";
      }
      os << "</div>\n";
    }
  }
  os << "</body></html>\n";
  return os.str();
}

std::string shapley_csv(const ShapleyReport& report) {
  std::ostringstream os;
  os << "variable,mean_abs,mean_signed,stderr,estimator\n";
  for (const auto& v : report.variables)
    os << csv_field(v.variable) << ',' << num(v.mean_abs) << ',' << num(v.mean_signed) << ',' << num(v.standard_error)
       << ',' << report.estimator << '\n';
  return os.str();
}

std::string shapley_bar_svg(const ShapleyReport& report, std::size_t top) {
  const std::vector<std::size_t> order = report.ranking();
  const std::size_t n = std::min(top, order.size());
  const double max_value = n ? std::max(report.variables[order[0]].mean_abs, 1e-12) : 1.0;
  const int bar_h = 22, label_w = 260, plot_w = 320;
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << label_w + plot_w + 90 << "\" height=\""
     << bar_h * static_cast<int>(n) + 30 << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<text x=\"4\" y=\"14\">mean |Shapley value|</text>\n";
  for (std::size_t r = 0; r < n; ++r) {
    const VariableShapley& v = report.variables[order[r]];
    const int y = 24 + bar_h * static_cast<int>(r);
    const double w = plot_w * v.mean_abs / max_value;
    os << "<text x=\"" << label_w - 6 << "\" y=\"" << y + 14 << "\" text-anchor=\"end\">" << html_escape(v.variable)
       << "</text>\n<rect x=\"" << label_w << "\" y=\"" << y + 3 << "\" width=\"" << num(w) << "\" height=\""
       << bar_h - 6 << "\" fill=\"#3a6ea5\"/>\n<text x=\"" << num(label_w + w + 4) << "\" y=\"" << y + 14 << "\">"
       << num(v.mean_abs) << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

nlohmann::json run_manifest(std::string_view command, const nlohmann::json& arguments,
                            const std::vector<std::string>& outputs) {
  return {{"tool", "mmehr"},
          {"version", std::string(kVersion)},
          {"command", std::string(command)},
          {"arguments", arguments},
          {"outputs", outputs}};
}

void write_json(const std::filesystem::path& path, const nlohmann::json& j) { write_file_atomic(path, j.dump(2) + "\n"); }

}  // namespace mmehr
