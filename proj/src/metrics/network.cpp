#include "adec/metrics/network.hpp"

#include <cmath>
#include <fstream>

#include "adec/error.hpp"

namespace adec::metrics {

using nlohmann::json;

void NetworkProfile::validate() const {
  if (!(bandwidth_bytes_per_s > 0.0) || !std::isfinite(bandwidth_bytes_per_s)) {
    throw ConfigError("profile " + name + ": bandwidth must be positive and finite");
  }
  for (const auto& [k, v] : per_call_latency_s) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw ConfigError("profile " + name + ": bad per-call latency for " + k);
  }
}

double NetworkProfile::per_call(std::string_view modality) const {
  const auto it = per_call_latency_s.find(std::string(modality));
  if (it == per_call_latency_s.end()) throw ConfigError("profile " + name + " has no latency for " + std::string(modality));
  return it->second;
}

std::vector<NetworkProfile> default_profiles() {
  return {{"WiFi", 10e6, {{"text", 2.0}, {"visual", 4.0}}},
          {"4G", 1e6, {{"text", 2.0}, {"visual", 4.0}}},
          {"3G", 200e3, {{"text", 2.0}, {"visual", 4.0}}},
          {"2G", 50e3, {{"text", 2.0}, {"visual", 4.0}}}};
}

NetworkProfile find_profile(std::string_view name) {
  for (auto& p : default_profiles()) {
    if (p.name == name) return p;
  }
  throw ConfigError("unknown network profile \"" + std::string(name) + "\" (WiFi, 4G, 3G, 2G)");
}

double latency(const NetworkProfile& p, double mc, double uplink_bytes, std::string_view modality) {
  return latency(p.bandwidth_bytes_per_s, mc, p.per_call(modality), uplink_bytes);
}

double latency(double bandwidth_bytes_per_s, double mc, double per_call_s, double uplink_bytes) {
  return mc * per_call_s + uplink_bytes / bandwidth_bytes_per_s;
}

std::vector<MethodRow> load_methods(const json& doc) {
  if (!doc.is_object() || !doc.contains("methods") || !doc["methods"].is_array()) {
    throw ParseError("/methods", "expected an array of method rows");
  }
  std::vector<MethodRow> out;
  const auto& arr = doc["methods"];
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const auto path = "/methods/" + std::to_string(i);
    const auto& j = arr[i];
    try {
      MethodRow m;
      m.name = j.at("name").get<std::string>();
      m.mc = j.at("mc").get<double>();
      m.mt = j.value("mt", 0.0);
      m.per_call_s = j.at("per_call_s").get<double>();
      m.uplink_bytes = j.at("uplink_bytes").get<double>();
      m.image_streaming = j.value("image_streaming", false);
      if (m.mc < 0 || m.per_call_s < 0 || m.uplink_bytes < 0) throw ParseError(path, "negative value");
      out.push_back(std::move(m));
    } catch (const json::exception& e) {
      throw ParseError(path, e.what());
    }
  }
  return out;
}

std::vector<MethodRow> load_methods_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path, "cannot open methods file");
  try {
    return load_methods(json::parse(in));
  } catch (const json::parse_error& e) {
    throw ParseError(path, e.what());
  }
}

}  // namespace adec::metrics
