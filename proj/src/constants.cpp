#include "magp/plants.hpp"

#include "magp/embedded_constants.hpp"

#include <sstream>

namespace magp::plants {

std::map<std::string, double> parse_constants(const std::string& text) {
  std::map<std::string, double> values;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("constants line " + std::to_string(line_no) + ": missing '='");
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    std::size_t used = 0;
    double parsed = 0.0;
    try {
      parsed = std::stod(value, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (key.empty() || used != value.size())
      throw ConfigError("constants line " + std::to_string(line_no) + ": cannot parse '" + value + "'");
    values[key] = parsed;
  }
  return values;
}

namespace {

double lookup(const std::map<std::string, double>& values, const std::string& key) {
  const auto it = values.find(key);
  if (it == values.end()) throw ConfigError("constants: missing '" + key + "'");
  return it->second;
}

}  // namespace

WilliamsOttoConstants WilliamsOttoConstants::from_text(const std::string& text) {
  const auto v = parse_constants(text);
  return {lookup(v, "feed_rate_A"),         lookup(v, "reactor_mass"),
          lookup(v, "plant_k1_preexp"),     lookup(v, "plant_k1_activation"),
          lookup(v, "plant_k2_preexp"),     lookup(v, "plant_k2_activation"),
          lookup(v, "plant_k3_preexp"),     lookup(v, "plant_k3_activation"),
          lookup(v, "model_k1_preexp"),     lookup(v, "model_k1_activation"),
          lookup(v, "model_k2_preexp"),     lookup(v, "model_k2_activation")};
}

const WilliamsOttoConstants& WilliamsOttoConstants::defaults() {
  static const WilliamsOttoConstants constants = from_text(embedded::williams_otto);
  return constants;
}

PhotobioreactorConstants PhotobioreactorConstants::from_text(const std::string& text) {
  const auto v = parse_constants(text);
  return {lookup(v, "u_m"),  lookup(v, "u_d"), lookup(v, "K_N"),  lookup(v, "Y_NX"),
          lookup(v, "k_m"),  lookup(v, "k_d"), lookup(v, "k_s"),  lookup(v, "k_i"),
          lookup(v, "k_sq"), lookup(v, "k_iq"), lookup(v, "K_Np")};
}

const PhotobioreactorConstants& PhotobioreactorConstants::defaults() {
  static const PhotobioreactorConstants constants = from_text(embedded::photobioreactor);
  return constants;
}

}  // namespace magp::plants
