#include "mra/data_io.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <unordered_set>

#include "mra/errors.hpp"

namespace mra {

static_assert(std::endian::native == std::endian::little,
              "binary formats are little-endian; big-endian hosts need byte swapping");

PointList ObservationSet::locations() const {
  PointList out(size());
  for (std::size_t i = 0; i < size(); ++i) out[i] = location(i);
  return out;
}

namespace {

std::vector<char> slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  in.seekg(0, std::ios::end);
  const auto size = static_cast<std::size_t>(in.tellg());
  in.seekg(0, std::ios::beg);
  std::vector<char> bytes(size);
  if (size > 0 && !in.read(bytes.data(), static_cast<std::streamsize>(size)))
    throw IoError("failed reading '" + path + "'");
  return bytes;
}

std::uint64_t read_count(const std::vector<char>& bytes, const std::string& path) {
  if (bytes.size() < sizeof(std::uint64_t)) {
    throw FormatError("'" + path + "' is " + std::to_string(bytes.size()) +
                      " bytes; expected at least 8 for the count header");
  }
  std::uint64_t n = 0;
  std::memcpy(&n, bytes.data(), sizeof n);
  return n;
}

void expect_size(const std::vector<char>& bytes, std::uint64_t n, std::size_t columns,
                 const std::string& path) {
  const std::uint64_t expected = 8 + n * columns * 8;
  if (n > (std::uint64_t{1} << 56) || bytes.size() != expected) {
    throw FormatError("'" + path + "' header declares " + std::to_string(n) + " rows of " +
                      std::to_string(columns) + " columns, expected " + std::to_string(expected) +
                      " bytes but the file has " + std::to_string(bytes.size()));
  }
}

std::vector<double> column(const std::vector<char>& bytes, std::uint64_t n, std::size_t index) {
  std::vector<double> out(n);
  if (n > 0) std::memcpy(out.data(), bytes.data() + 8 + index * n * 8, n * 8);
  return out;
}

class BinaryWriter {
 public:
  explicit BinaryWriter(const std::string& path) : path_(path), out_(path, std::ios::binary) {
    if (!out_) throw IoError("cannot open '" + path + "' for writing");
  }
  void count(std::uint64_t n) { raw(&n, sizeof n); }
  void values(const std::vector<double>& v) { raw(v.data(), v.size() * sizeof(double)); }
  void close() {
    out_.close();
    if (!out_) throw IoError("failed writing '" + path_ + "'");
  }

 private:
  void raw(const void* data, std::size_t bytes) {
    if (bytes == 0) return;
    out_.write(static_cast<const char*>(data), static_cast<std::streamsize>(bytes));
    if (!out_) throw IoError("failed writing '" + path_ + "'");
  }
  std::string path_;
  std::ofstream out_;
};

struct PointBitsHash {
  std::size_t operator()(const std::pair<std::uint64_t, std::uint64_t>& p) const noexcept {
    return std::hash<std::uint64_t>{}(p.first ^ (p.second * 0x9E3779B97F4A7C15ull));
  }
};

}  // namespace

ObservationSet read_observations(const std::string& path, bool dedup) {
  const auto bytes = slurp(path);
  const std::uint64_t n = read_count(bytes, path);
  expect_size(bytes, n, 3, path);
  if (n == 0) throw FormatError("'" + path + "' contains no observations");
  ObservationSet data{column(bytes, n, 0), column(bytes, n, 1), column(bytes, n, 2)};
  if (dedup) deduplicate(data);
  return data;
}

void write_observations(const std::string& path, const ObservationSet& data) {
  BinaryWriter out(path);
  out.count(data.size());
  out.values(data.lon);
  out.values(data.lat);
  out.values(data.value);
  out.close();
}

std::size_t deduplicate(ObservationSet& data) {
  std::unordered_set<std::pair<std::uint64_t, std::uint64_t>, PointBitsHash> seen;
  seen.reserve(data.size());
  std::size_t kept = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    // +0.0 and -0.0 compare equal as coordinates.
    const double x = data.lon[i] == 0.0 ? 0.0 : data.lon[i];
    const double y = data.lat[i] == 0.0 ? 0.0 : data.lat[i];
    if (!seen.emplace(std::bit_cast<std::uint64_t>(x), std::bit_cast<std::uint64_t>(y)).second)
      continue;
    data.lon[kept] = data.lon[i];
    data.lat[kept] = data.lat[i];
    data.value[kept] = data.value[i];
    ++kept;
  }
  const std::size_t dropped = data.size() - kept;
  data.lon.resize(kept);
  data.lat.resize(kept);
  data.value.resize(kept);
  return dropped;
}

PointList read_locations(const std::string& path) {
  const auto bytes = slurp(path);
  const std::uint64_t n = read_count(bytes, path);
  expect_size(bytes, n, 2, path);
  const auto lon = column(bytes, n, 0);
  const auto lat = column(bytes, n, 1);
  PointList out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = {lon[i], lat[i]};
  return out;
}

void write_locations(const std::string& path, const PointList& points) {
  std::vector<double> lon(points.size()), lat(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    lon[i] = points[i].x;
    lat[i] = points[i].y;
  }
  BinaryWriter out(path);
  out.count(points.size());
  out.values(lon);
  out.values(lat);
  out.close();
}

LocationMode parse_location_mode(const std::string& text) {
  if (text == "N") return LocationMode::nan_values;
  if (text == "D") return LocationMode::data_file;
  if (text == "A") return LocationMode::location_file;
  throw ConfigError("PREDICTION_LOCATION_MODE must be one of 'N', 'D', 'A', got '" + text + "'");
}

PointList resolve_prediction_locations(LocationMode mode, const ObservationSet& data,
                                       const std::string& location_file) {
  switch (mode) {
    case LocationMode::nan_values: {
      PointList out;
      for (std::size_t i = 0; i < data.size(); ++i)
        if (std::isnan(data.value[i])) out.push_back(data.location(i));
      return out;
    }
    case LocationMode::data_file:
      return data.locations();
    case LocationMode::location_file:
      if (location_file.empty())
        throw ConfigError("PREDICTION_LOCATION_MODE = A requires PREDICTION_LOCATION_FILE");
      return read_locations(location_file);
  }
  throw ConfigError("unknown prediction location mode");
}

ObservationSet observed_rows(const ObservationSet& data) {
  ObservationSet out;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (std::isnan(data.value[i])) continue;
    out.lon.push_back(data.lon[i]);
    out.lat.push_back(data.lat[i]);
    out.value.push_back(data.value[i]);
  }
  return out;
}

std::string prediction_file_name(const std::string& stem, int worker) {
  return stem + "_" + std::to_string(worker);
}

void write_predictions(const std::string& path, const PredictionResults& results) {
  std::vector<double> lon(results.size()), lat(results.size());
  for (std::size_t i = 0; i < results.size(); ++i) {
    lon[i] = results.locations[i].x;
    lat[i] = results.locations[i].y;
  }
  BinaryWriter out(path);
  out.count(results.size());
  out.values(lon);
  out.values(lat);
  out.values(results.mean);
  out.values(results.variance);
  out.close();
}

PredictionResults read_predictions(const std::string& path) {
  const auto bytes = slurp(path);
  const std::uint64_t n = read_count(bytes, path);
  expect_size(bytes, n, 4, path);
  PredictionResults out;
  const auto lon = column(bytes, n, 0);
  const auto lat = column(bytes, n, 1);
  out.locations.resize(n);
  for (std::size_t i = 0; i < n; ++i) out.locations[i] = {lon[i], lat[i]};
  out.mean = column(bytes, n, 2);
  out.variance = column(bytes, n, 3);
  return out;
}

}  // namespace mra
