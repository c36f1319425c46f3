#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace adec::metrics {

struct NetworkProfile {
  std::string name;
  double bandwidth_bytes_per_s = 10e6;
  // per cloud call, keyed by modality ("text", "visual")
  std::map<std::string, double> per_call_latency_s = {{"text", 2.0}, {"visual", 4.0}};

  void validate() const;  // ConfigError
  double per_call(std::string_view modality) const;
};

// WiFi 10 MB/s, 4G 1 MB/s, 3G 200 kB/s, 2G 50 kB/s
std::vector<NetworkProfile> default_profiles();
NetworkProfile find_profile(std::string_view name);  // ConfigError on unknown names

// mc * per_call + uplink / bandwidth
double latency(const NetworkProfile& p, double mc, double uplink_bytes, std::string_view modality = "text");
double latency(double bandwidth_bytes_per_s, double mc, double per_call_s, double uplink_bytes);

// A method configured for the latency comparison.
struct MethodRow {
  std::string name;
  double mc = 0.0;
  double mt = 0.0;
  double per_call_s = 2.0;
  double uplink_bytes = 0.0;
  bool image_streaming = false;
};

std::vector<MethodRow> load_methods(const nlohmann::json& doc);  // ParseError
std::vector<MethodRow> load_methods_file(const std::string& path);

}  // namespace adec::metrics
