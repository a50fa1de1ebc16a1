#include <iomanip>

#include <json.hpp>

#include "oocmem/bench.hpp"
#include "oocmem/error.hpp"

namespace oocmem::bench {

Format parse_format(std::string_view text) {
  if (text == "text") return Format::Text;
  if (text == "csv") return Format::Csv;
  if (text == "json") return Format::Json;
  raise(ErrorCode::ConfigError, "format: expected text, csv or json, got '" + std::string(text) + "'");
}

namespace {

nlohmann::json to_json(const Report& r) {
  nlohmann::json j;
  j["scenario"] = r.scenario;
  j["variant"] = r.variant;
  j["wall_time_ms"] = r.wall_time_ms;
  j["miss_count"] = r.miss_count;
  j["prefetch_hit_count"] = r.prefetch_hit_count;
  j["blocked_wait_count"] = r.blocked_wait_count;
  j["bytes_written"] = r.bytes_written;
  j["bytes_read"] = r.bytes_read;
  j["peak_resident_bytes"] = r.peak_resident_bytes;
  j["ram_limit_bytes"] = r.ram_limit_bytes;
  j["budget_violations"] = r.budget_violations;
  j["checksum_failures"] = r.checksum_failures;
  j["phases"] = nlohmann::json::array();
  for (const auto& p : r.phases)
    j["phases"].push_back({{"name", p.name},
                           {"wall_time_ms", p.wall_time_ms},
                           {"miss_count", p.miss_count},
                           {"bytes_written", p.bytes_written},
                           {"bytes_read", p.bytes_read}});
  j["extra"] = nlohmann::json::object();
  for (const auto& [k, v] : r.extra) j["extra"][k] = v;
  return j;
}

}  // namespace

void emit_report(std::ostream& out, const std::vector<Report>& reports, Format format) {
  switch (format) {
    case Format::Json: {
      auto arr = nlohmann::json::array();
      for (const auto& r : reports) arr.push_back(to_json(r));
      out << arr.dump(2) << '\n';
      break;
    }
    case Format::Csv:
      out << kCsvHeader << '\n';
      for (const auto& r : reports) {
        out << r.scenario << ',' << r.variant << ',' << std::fixed << std::setprecision(3) << r.wall_time_ms
            << std::defaultfloat << ',' << r.miss_count << ',' << r.prefetch_hit_count << ','
            << r.blocked_wait_count << ',' << r.bytes_written << ',' << r.bytes_read << ','
            << r.peak_resident_bytes << ',' << r.ram_limit_bytes << ',' << r.budget_violations << ','
            << r.checksum_failures << '\n';
      }
      break;
    case Format::Text:
      for (const auto& r : reports) {
        out << r.scenario << (r.variant.empty() ? "" : " [" + r.variant + "]") << '\n';
        out << "  wall_time_ms        " << std::fixed << std::setprecision(3) << r.wall_time_ms << std::defaultfloat
            << '\n';
        out << "  miss_count          " << r.miss_count << '\n';
        out << "  prefetch_hit_count  " << r.prefetch_hit_count << '\n';
        out << "  blocked_wait_count  " << r.blocked_wait_count << '\n';
        out << "  bytes_written       " << r.bytes_written << '\n';
        out << "  bytes_read          " << r.bytes_read << '\n';
        out << "  peak_resident_bytes " << r.peak_resident_bytes << '\n';
        out << "  ram_limit_bytes     " << r.ram_limit_bytes << '\n';
        out << "  budget_violations   " << r.budget_violations << '\n';
        out << "  checksum_failures   " << r.checksum_failures << '\n';
        for (const auto& p : r.phases)
          out << "  phase " << p.name << ": " << std::fixed << std::setprecision(3) << p.wall_time_ms
              << std::defaultfloat << " ms, " << p.miss_count << " misses, " << p.bytes_written << " B out, "
              << p.bytes_read << " B in\n";
        for (const auto& [k, v] : r.extra) out << "  " << k << " " << v << '\n';
      }
      break;
  }
  if (!out) raise(ErrorCode::IoFailure, "writing the report failed");
}

}  // namespace oocmem::bench
