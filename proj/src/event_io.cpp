#include "evmesh/simulator.hpp"

#include <json.hpp>

#include <bit>
#include <charconv>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace evmesh {

namespace {

static_assert(std::endian::native == std::endian::little, "binary event I/O assumes little-endian");

bool is_binary_path(const std::string& path) {
  return path.size() >= 4 && path.compare(path.size() - 4, 4, ".bin") == 0;
}

template <class T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  return v;
}

[[noreturn]] void bad_row(const std::string& path, size_t line, const std::string& why) {
  throw std::invalid_argument(path + ":" + std::to_string(line) + ": " + why);
}

}  // namespace

void write_events(const std::vector<Event>& events, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  if (is_binary_path(path)) {
    put<std::uint64_t>(out, events.size());
    for (const auto& e : events) {
      put<double>(out, e.t);
      put<std::uint16_t>(out, e.x);
      put<std::uint16_t>(out, e.y);
      put<std::int8_t>(out, e.polarity);
    }
    return;
  }
  out << "t,x,y,p\n";
  char line[96];
  for (const auto& e : events) {
    const int n = std::snprintf(line, sizeof line, "%.9f,%u,%u,%d\n", e.t, static_cast<unsigned>(e.x),
                                static_cast<unsigned>(e.y), static_cast<int>(e.polarity));
    out.write(line, n);
  }
}

std::vector<Event> read_events(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::vector<Event> events;
  if (is_binary_path(path)) {
    const auto count = get<std::uint64_t>(in);
    if (!in) throw std::invalid_argument(path + ": missing record count");
    events.reserve(count);
    for (std::uint64_t i = 0; i < count; ++i) {
      Event e;
      e.t = get<double>(in);
      e.x = get<std::uint16_t>(in);
      e.y = get<std::uint16_t>(in);
      e.polarity = get<std::int8_t>(in);
      if (!in) throw std::invalid_argument(path + ": truncated at record " + std::to_string(i));
      if (e.polarity != 1 && e.polarity != -1) {
        throw std::invalid_argument(path + ": bad polarity at record " + std::to_string(i));
      }
      events.push_back(e);
    }
    return events;
  }

  std::string row;
  size_t line = 0;
  while (std::getline(in, row)) {
    ++line;
    if (!row.empty() && row.back() == '\r') row.pop_back();
    if (row.empty()) continue;
    if (line == 1 && row == "t,x,y,p") continue;
    const char* p = row.data();
    const char* end = row.data() + row.size();
    Event e;
    long x = 0, y = 0, pol = 0;
    auto next_field = [&](auto& value) {
      auto [ptr, ec] = std::from_chars(p, end, value);
      if (ec != std::errc()) bad_row(path, line, "malformed event row '" + row + "'");
      p = ptr;
    };
    next_field(e.t);
    if (p == end || *p++ != ',') bad_row(path, line, "expected 4 comma-separated fields");
    next_field(x);
    if (p == end || *p++ != ',') bad_row(path, line, "expected 4 comma-separated fields");
    next_field(y);
    if (p == end || *p++ != ',') bad_row(path, line, "expected 4 comma-separated fields");
    next_field(pol);
    if (p != end) bad_row(path, line, "trailing characters");
    if (x < 0 || x > 65535 || y < 0 || y > 65535) bad_row(path, line, "pixel out of range");
    if (pol != 1 && pol != -1) bad_row(path, line, "polarity must be 1 or -1");
    e.x = static_cast<std::uint16_t>(x);
    e.y = static_cast<std::uint16_t>(y);
    e.polarity = static_cast<std::int8_t>(pol);
    events.push_back(e);
  }
  return events;
}

void write_ground_truth(const std::vector<GroundTruthRecord>& records, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  for (const auto& r : records) {
    nlohmann::json j;
    j["t"] = r.t;
    j["theta"] = std::vector<double>(r.theta.data(), r.theta.data() + r.theta.size());
    j["joints"] = nlohmann::json::array();
    for (const auto& p : r.joints) j["joints"].push_back({p.x(), p.y(), p.z()});
    out << j.dump() << '\n';
  }
}

std::vector<GroundTruthRecord> read_ground_truth(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::vector<GroundTruthRecord> records;
  std::string row;
  size_t line = 0;
  while (std::getline(in, row)) {
    ++line;
    if (row.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(row);
      GroundTruthRecord r;
      r.t = j.at("t").get<double>();
      const auto theta = j.at("theta").get<std::vector<double>>();
      r.theta = Eigen::Map<const VecX>(theta.data(), static_cast<Eigen::Index>(theta.size()));
      if (j.contains("joints")) {
        for (const auto& p : j["joints"]) {
          r.joints.emplace_back(p.at(0).get<double>(), p.at(1).get<double>(), p.at(2).get<double>());
        }
      }
      records.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      bad_row(path, line, e.what());
    }
  }
  return records;
}

}  // namespace evmesh
