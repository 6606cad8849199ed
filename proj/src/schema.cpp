#include "mmehr/schema.hpp"

#include <algorithm>

namespace mmehr {

VariableSchema::VariableSchema(std::vector<VariableSpec> variables) : variables_(std::move(variables)) {
  if (size() != kVariableCount)
    throw Error("schema: expected " + std::to_string(kVariableCount) + " variables, got " + std::to_string(size()));
  for (const VariableSpec& v : variables_) {
    if (v.kind == VariableKind::kCategorical && v.categories.empty())
      throw Error("schema: categorical variable '" + v.name + "' has no categories");
    if (v.kind == VariableKind::kContinuous && !(v.stddev > 0.0))
      throw Error("schema: variable '" + v.name + "' needs a positive stddev");
    offsets_.push_back(value_width_);
    value_width_ += v.width();
  }
  if (encoded_width() != kEncodedWidth)
    throw Error("schema: encoded width " + std::to_string(encoded_width()) + " != " + std::to_string(kEncodedWidth));
}

std::vector<Index> VariableSchema::channels_of(Index v) const {
  std::vector<Index> channels;
  for (Index c = 0; c < variable(v).width(); ++c) channels.push_back(value_offset(v) + c);
  channels.push_back(mask_channel(v));
  return channels;
}

std::optional<Index> VariableSchema::find(const std::string& name) const {
  auto it = std::find_if(variables_.begin(), variables_.end(), [&](const VariableSpec& v) { return v.name == name; });
  if (it == variables_.end()) return std::nullopt;
  return static_cast<Index>(it - variables_.begin());
}

Index VariableSchema::index_of(const std::string& name) const {
  if (auto v = find(name)) return *v;
  throw Error("schema: unknown variable '" + name + "'");
}

Index VariableSchema::category_index(Index v, const std::string& label) const {
  const VariableSpec& spec = variable(v);
  auto it = std::find(spec.categories.begin(), spec.categories.end(), label);
  if (it == spec.categories.end())
    throw Error("variable '" + spec.name + "': unknown category label '" + label + "'");
  return static_cast<Index>(it - spec.categories.begin());
}

namespace {

VariableSpec continuous(std::string name, double mean, double stddev, double lo, double hi) {
  VariableSpec v;
  v.name = std::move(name);
  v.kind = VariableKind::kContinuous;
  v.mean = mean;
  v.stddev = stddev;
  v.min_value = lo;
  v.max_value = hi;
  return v;
}

VariableSpec categorical(std::string name, std::vector<std::string> categories) {
  VariableSpec v;
  v.name = std::move(name);
  v.kind = VariableKind::kCategorical;
  v.categories = std::move(categories);
  return v;
}

}  // namespace

VariableSchema default_schema() {
  std::vector<VariableSpec> vars;
  vars.push_back(categorical("Capillary refill rate", {"0.0", "1.0"}));
  vars.push_back(continuous("Diastolic blood pressure", 59.0, 14.0, 0.0, 300.0));
  vars.push_back(continuous("Fraction inspired oxygen", 0.5, 0.2, 0.2, 1.0));
  vars.push_back(categorical("Glascow coma scale eye opening",
                             {"To Pain", "3 To speech", "1 No Response", "4 Spontaneously", "None", "To Speech",
                              "Spontaneously", "2 To pain"}));
  vars.push_back(categorical("Glascow coma scale motor response",
                             {"1 No Response", "3 Abnorm flexion", "Abnormal extension", "No response",
                              "4 Flex-withdraws", "Localizes Pain", "Flex-withdraws", "Obeys Commands",
                              "Abnormal Flexion", "6 Obeys Commands", "5 Localizes Pain", "2 Abnorm extensn"}));
  vars.push_back(categorical("Glascow coma scale total",
                             {"11", "10", "13", "12", "15", "14", "3", "5", "4", "7", "6", "9", "8"}));
  vars.push_back(categorical("Glascow coma scale verbal response",
                             {"1 No Response", "No Response", "Confused", "Inappropriate Words", "Oriented",
                              "No Response-ETT", "5 Oriented", "Incomprehensible sounds", "1.0 ET/Trach",
                              "4 Confused", "2 Incomp sounds", "3 Inapprop words"}));
  vars.push_back(continuous("Glucose", 130.0, 50.0, 10.0, 1000.0));
  vars.push_back(continuous("Heart Rate", 86.0, 18.0, 0.0, 300.0));
  vars.push_back(continuous("Height", 170.0, 10.0, 100.0, 230.0));
  vars.push_back(continuous("Mean blood pressure", 77.0, 15.0, 0.0, 300.0));
  vars.push_back(continuous("Oxygen saturation", 97.0, 3.0, 0.0, 100.0));
  vars.push_back(continuous("Respiratory rate", 19.0, 6.0, 0.0, 100.0));
  vars.push_back(continuous("Systolic blood pressure", 120.0, 20.0, 0.0, 375.0));
  vars.push_back(continuous("Temperature", 36.9, 0.8, 25.0, 45.0));
  vars.push_back(continuous("Weight", 81.0, 25.0, 20.0, 300.0));
  vars.push_back(continuous("pH", 7.4, 0.08, 6.3, 8.4));
  return VariableSchema(std::move(vars));
}

nlohmann::json schema_to_json(const VariableSchema& schema) {
  nlohmann::json vars = nlohmann::json::array();
  for (const VariableSpec& v : schema.variables()) {
    nlohmann::json j;
    j["name"] = v.name;
    if (v.kind == VariableKind::kCategorical) {
      j["kind"] = "categorical";
      j["categories"] = v.categories;
      j["cardinality"] = v.categories.size();
    } else {
      j["kind"] = "continuous";
      j["mean"] = v.mean;
      j["std"] = v.stddev;
      j["range"] = {v.min_value, v.max_value};
      j["default"] = v.default_value;
    }
    vars.push_back(std::move(j));
  }
  return {{"hours", kHours}, {"encoded_width", schema.encoded_width()}, {"variables", std::move(vars)}};
}

VariableSchema schema_from_json(const nlohmann::json& j) {
  std::vector<VariableSpec> vars;
  for (const auto& jv : j.at("variables")) {
    VariableSpec v;
    v.name = jv.at("name").get<std::string>();
    const std::string kind = jv.at("kind").get<std::string>();
    if (kind == "categorical") {
      v.kind = VariableKind::kCategorical;
      v.categories = jv.at("categories").get<std::vector<std::string>>();
    } else if (kind == "continuous") {
      v.kind = VariableKind::kContinuous;
      v.mean = jv.at("mean").get<double>();
      v.stddev = jv.at("std").get<double>();
      v.min_value = jv.at("range").at(0).get<double>();
      v.max_value = jv.at("range").at(1).get<double>();
      v.default_value = jv.value("default", 0.0);
    } else {
      throw Error("schema: unknown kind '" + kind + "' for variable '" + v.name + "'");
    }
    vars.push_back(std::move(v));
  }
  return VariableSchema(std::move(vars));
}

}  // namespace mmehr
